//! Benchmarks of the per-step hot path: channel realization, decision
//! assembly, metric evaluation, network passes and a full environment step.

use criterion::{black_box, BatchSize, Criterion};
use isac_core::approximator::DenseNetwork;
use isac_core::baselines::random_action;
use isac_core::beamforming::{assemble, PhaseCodebook};
use isac_core::channel::ChannelModel;
use isac_core::metrics;
use isac_core::ppo::{stream_rng, EnvConfig, ExperiencePool, IsacEnv, PpoConfig, PpoLearner, Stream, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn channel(c: &mut Criterion) {
    let cfg = EnvConfig::default();
    let model = ChannelModel::new(&cfg.geometry, &cfg.fading, &cfg.mobility).unwrap();
    let mut seed = 0u64;
    c.bench_function("channel/realize", |b| {
        b.iter(|| {
            seed += 1;
            black_box(model.realize(0.0, seed))
        })
    });
    let real = model.realize(0.0, 1);
    c.bench_function("channel/advance", |b| b.iter(|| black_box(model.advance(&real, 1e-3).unwrap())));
}

pub fn decision(c: &mut Criterion) {
    let cfg = EnvConfig::default();
    let model = ChannelModel::new(&cfg.geometry, &cfg.fading, &cfg.mobility).unwrap();
    let real = model.realize(0.0, 1);
    let system = cfg.system();
    let layout = cfg.layout();
    let codebook = PhaseCodebook::new(cfg.phase_bits).unwrap();
    let action = random_action(layout.len(), &mut ChaCha8Rng::seed_from_u64(2));
    c.bench_function("beamforming/assemble", |b| {
        b.iter(|| black_box(assemble(&action, &layout, &real, &system, &codebook).unwrap()))
    });
    let decision = assemble(&action, &layout, &real, &system, &codebook).unwrap().decision;
    c.bench_function("metrics/evaluate", |b| {
        b.iter(|| black_box(metrics::evaluate(&real, &decision, &system).unwrap()))
    });
}

pub fn network(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = DenseNetwork::new(&[21, 128, 128, 16], &mut rng).unwrap();
    let x: Vec<f64> = (0..21).map(|i| (i as f64 * 0.37).sin()).collect();
    let up = vec![1.0; 16];
    c.bench_function("network/forward", |b| b.iter(|| black_box(net.forward(&x).unwrap())));
    c.bench_function("network/backward", |b| b.iter(|| black_box(net.backward(&x, &up).unwrap())));
}

pub fn environment(c: &mut Criterion) {
    let mut env = IsacEnv::new(EnvConfig::default()).unwrap();
    env.reset(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let len = env.action_len();
    c.bench_function("env/step", |b| {
        b.iter_batched(
            || random_action(len, &mut rng),
            |a| black_box(env.step(&a).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

pub fn update(c: &mut Criterion) {
    let mut env = IsacEnv::new(EnvConfig::default()).unwrap();
    let cfg = PpoConfig::default();
    let learner = PpoLearner::new(env.state_len(), env.action_len(), cfg.clone(), &mut stream_rng(1, Stream::Init)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut state = env.reset(7);
    let mut pool = ExperiencePool::new(cfg.pool_capacity);
    while !pool.is_full() {
        let (action, logprob_old) = learner.act(&state.0, &mut rng).unwrap();
        let res = env.step(&isac_core::RawAction(action.clone())).unwrap();
        pool.push(Transition {
            state: state.0.clone(),
            action,
            logprob_old,
            reward: res.reward,
            next_state: res.state.0.clone(),
            done: false,
        });
        state = res.state;
    }
    c.bench_function("ppo/update", |b| {
        b.iter_batched(
            || (learner.clone(), pool.clone(), ChaCha8Rng::seed_from_u64(8)),
            |(mut l, mut p, mut r)| black_box(l.update(&mut p, &mut r).unwrap()),
            BatchSize::SmallInput,
        )
    });
}
