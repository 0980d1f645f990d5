//! Geometry-based time-varying cascaded channel: BS→IRS (`G`), IRS→user
//! (`h_k(t)`) and IRS→target (`h_r(t)`), each a Rician mix of a deterministic
//! LoS term and a circularly-symmetric Gaussian NLoS term.
//!
//! Within an episode the NLoS draws are frozen and only the Doppler phase of
//! the LoS terms on the user/target links evolves; a new episode draws fresh
//! NLoS terms from a new seed.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Mobility, SceneGeometry, SquaredDistances};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("carrier frequency must be positive, got {0} Hz")]
    Frequency(f64),
    #[error("{name} is invalid: {value}")]
    Config { name: &'static str, value: f64 },
    #[error("coincident nodes on the {0} link (zero propagation distance)")]
    CoincidentNodes(&'static str),
    #[error("time step must be non-negative, got {0}")]
    NegativeStep(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Weight applied to the NLoS term relative to the LoS term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NlosWeight {
    /// NLoS added with unit weight, `√(K/(K+1))·LoS + NLoS`.
    #[default]
    Unit,
    /// Standard Rician normalization, `√(K/(K+1))·LoS + √(1/(K+1))·NLoS`.
    Normalized,
}

/// How the squared distance ε enters the amplitude of the communication links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathLossDistance {
    /// Amplitude `λ / (4π ε)`, with ε the squared distance.
    Squared,
    /// Free-space amplitude `λ / (4π √ε)`.
    #[default]
    Euclidean,
}

/// Power of ε in the radar amplitude `√(λ²σ / ((4π)³ ε^p))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadarExponent {
    /// p = 4.
    Quartic,
    /// p = 2, i.e. the d⁻⁴ radar equation.
    #[default]
    Physical,
}

impl RadarExponent {
    pub fn power(self) -> i32 {
        match self {
            RadarExponent::Quartic => 4,
            RadarExponent::Physical => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingConfig {
    /// f_c in Hz.
    pub carrier_frequency: f64,
    pub rician_bs_irs: f64,
    pub rician_irs_user: f64,
    pub rician_irs_target: f64,
    /// Radar cross section σ in m².
    pub rcs: f64,
    pub nlos_weight: NlosWeight,
    pub path_loss: PathLossDistance,
    pub radar_exponent: RadarExponent,
    /// δ_k² in W.
    pub noise_user: f64,
    /// δ_r² in W.
    pub noise_radar: f64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 2.4e9,
            rician_bs_irs: 10.0,
            rician_irs_user: 10.0,
            rician_irs_target: 10.0,
            rcs: 20.0,
            nlos_weight: NlosWeight::default(),
            path_loss: PathLossDistance::default(),
            radar_exponent: RadarExponent::default(),
            noise_user: 1e-15,
            noise_radar: 1e-15,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        wavelength(self.carrier_frequency)?;
        for (name, value) in [
            ("rician_bs_irs", self.rician_bs_irs),
            ("rician_irs_user", self.rician_irs_user),
            ("rician_irs_target", self.rician_irs_target),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ChannelError::Config { name, value });
            }
        }
        for (name, value) in [
            ("rcs", self.rcs),
            ("noise_user", self.noise_user),
            ("noise_radar", self.noise_radar),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ChannelError::Config { name, value });
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    fn nlos_scale(&self, rician: f64) -> f64 {
        match self.nlos_weight {
            NlosWeight::Unit => 1.0,
            NlosWeight::Normalized => (1.0 / (rician + 1.0)).sqrt(),
        }
    }
}

/// λ = c₀ / f_c.
pub fn wavelength(carrier_frequency: f64) -> Result<f64, ChannelError> {
    if !(carrier_frequency > 0.0) || !carrier_frequency.is_finite() {
        return Err(ChannelError::Frequency(carrier_frequency));
    }
    Ok(SPEED_OF_LIGHT / carrier_frequency)
}

/// Per-link NLoS samples, each entry drawn from CN(0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NlosDraws {
    pub bs_irs: DMatrix<Complex64>,
    pub irs_user: DMatrix<Complex64>,
    pub irs_target: DVector<Complex64>,
}

impl NlosDraws {
    pub fn sample(geom: &SceneGeometry, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, k, n) = (geom.bs_antennas, geom.users, geom.irs_elements);
        let bs_irs = DMatrix::from_fn(n, m, |_, _| complex_normal(&mut rng));
        let irs_user = DMatrix::from_fn(n, k, |_, _| complex_normal(&mut rng));
        let irs_target = DVector::from_fn(n, |_, _| complex_normal(&mut rng));
        Self {
            bs_irs,
            irs_user,
            irs_target,
        }
    }
}

/// One draw of CN(0, 1).
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// LoS terms (unit-modulus phase times the Rician LoS weight).
#[derive(Debug, Clone, PartialEq)]
pub struct LosComponents {
    /// N × M.
    pub bs_irs: DMatrix<Complex64>,
    /// N × K.
    pub irs_user: DMatrix<Complex64>,
    /// N.
    pub irs_target: DVector<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// N × M BS→IRS channel.
    pub g: DMatrix<Complex64>,
    /// N × K; column k is h_k(t).
    pub h_users: DMatrix<Complex64>,
    /// N, IRS→target channel h_r(t).
    pub h_target: DVector<Complex64>,
    /// Time in seconds since the start of the episode.
    pub time: f64,
    nlos: NlosDraws,
}

impl ChannelRealization {
    pub fn nlos(&self) -> &NlosDraws {
        &self.nlos
    }

    pub fn is_finite(&self) -> bool {
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        self.g.iter().all(finite) && self.h_users.iter().all(finite) && self.h_target.iter().all(finite)
    }

    /// Writes `link,row,col,re,im` rows, links `G`, `h_user` and `h_target`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["link", "row", "col", "re", "im"])?;
        let mut emit = |link: &str, mat: &DMatrix<Complex64>| -> csv::Result<()> {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    let v = mat[(r, c)];
                    w.write_record([
                        link.to_string(),
                        r.to_string(),
                        c.to_string(),
                        v.re.to_string(),
                        v.im.to_string(),
                    ])?;
                }
            }
            Ok(())
        };
        emit("G", &self.g)?;
        emit("h_user", &self.h_users)?;
        let target = DMatrix::from_column_slice(self.h_target.len(), 1, self.h_target.as_slice());
        emit("h_target", &target)?;
        w.flush()?;
        Ok(())
    }
}

/// Precomputed geometry-dependent parts of the channel for one scene.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    geometry: SceneGeometry,
    fading: FadingConfig,
    wavelength: f64,
    distances: SquaredDistances,
    bs_irs_gain: DMatrix<f64>,
    irs_user_gain: DMatrix<f64>,
    irs_target_gain: DVector<f64>,
    static_los: LosComponents,
    user_doppler: Vec<f64>,
    target_doppler: f64,
}

fn los_phase(eps: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * eps.sqrt() / wavelength)
}

fn rotation(time: f64, doppler: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * time * doppler)
}

impl ChannelModel {
    pub fn new(geometry: &SceneGeometry, fading: &FadingConfig, mobility: &Mobility) -> Result<Self, ChannelError> {
        geometry.validate()?;
        fading.validate()?;
        mobility.validate(geometry)?;
        let lambda = wavelength(fading.carrier_frequency)?;
        let distances = geometry.squared_distances();

        let comm_gain = |eps: f64, link: &'static str| -> Result<f64, ChannelError> {
            if eps == 0.0 {
                return Err(ChannelError::CoincidentNodes(link));
            }
            let d = match fading.path_loss {
                PathLossDistance::Squared => eps,
                PathLossDistance::Euclidean => eps.sqrt(),
            };
            Ok(lambda / (4.0 * PI * d))
        };
        let (m, k, n) = (geometry.bs_antennas, geometry.users, geometry.irs_elements);

        let mut bs_irs_gain = DMatrix::zeros(n, m);
        for r in 0..n {
            for c in 0..m {
                bs_irs_gain[(r, c)] = comm_gain(distances.bs_irs[(c, r)], "BS-IRS")?;
            }
        }
        let mut irs_user_gain = DMatrix::zeros(n, k);
        for r in 0..n {
            for c in 0..k {
                irs_user_gain[(r, c)] = comm_gain(distances.irs_user[(r, c)], "IRS-user")?;
            }
        }
        let exponent = fading.radar_exponent.power();
        let mut irs_target_gain = DVector::zeros(n);
        for r in 0..n {
            let eps = distances.irs_target[r];
            if eps == 0.0 {
                return Err(ChannelError::CoincidentNodes("IRS-target"));
            }
            irs_target_gain[r] =
                (lambda * lambda * fading.rcs / ((4.0 * PI).powi(3) * eps.powi(exponent))).sqrt();
        }

        let weight = |rician: f64| (rician / (rician + 1.0)).sqrt();
        let static_los = LosComponents {
            bs_irs: DMatrix::from_fn(n, m, |r, c| {
                los_phase(distances.bs_irs[(c, r)], lambda) * weight(fading.rician_bs_irs)
            }),
            irs_user: DMatrix::from_fn(n, k, |r, c| {
                los_phase(distances.irs_user[(r, c)], lambda) * weight(fading.rician_irs_user)
            }),
            irs_target: DVector::from_fn(n, |r, _| {
                los_phase(distances.irs_target[r], lambda) * weight(fading.rician_irs_target)
            }),
        };

        let user_doppler = mobility
            .users
            .iter()
            .map(|&motion| geometry.doppler_user(motion, lambda))
            .collect::<Result<Vec<_>, _>>()?;
        let target_doppler = geometry.doppler_target(mobility.target, lambda)?;

        Ok(Self {
            geometry: geometry.clone(),
            fading: fading.clone(),
            wavelength: lambda,
            distances,
            bs_irs_gain,
            irs_user_gain,
            irs_target_gain,
            static_los,
            user_doppler,
            target_doppler,
        })
    }

    pub fn geometry(&self) -> &SceneGeometry {
        &self.geometry
    }

    pub fn fading(&self) -> &FadingConfig {
        &self.fading
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn distances(&self) -> &SquaredDistances {
        &self.distances
    }

    pub fn user_doppler(&self) -> &[f64] {
        &self.user_doppler
    }

    pub fn target_doppler(&self) -> f64 {
        self.target_doppler
    }

    /// LoS terms at time `time`; the BS→IRS link carries no Doppler rotation.
    pub fn los_components(&self, time: f64) -> LosComponents {
        let mut los = self.static_los.clone();
        for (k, &f) in self.user_doppler.iter().enumerate() {
            let rot = rotation(time, f);
            los.irs_user.column_mut(k).iter_mut().for_each(|v| *v *= rot);
        }
        let rot = rotation(time, self.target_doppler);
        los.irs_target.iter_mut().for_each(|v| *v *= rot);
        los
    }

    /// Combines the LoS terms at `time` with fixed NLoS draws.
    pub fn compose(&self, time: f64, nlos: NlosDraws) -> ChannelRealization {
        let los = self.los_components(time);
        let f = &self.fading;
        let w_bi = f.nlos_scale(f.rician_bs_irs);
        let w_iu = f.nlos_scale(f.rician_irs_user);
        let w_ir = f.nlos_scale(f.rician_irs_target);

        let g = los.bs_irs.zip_zip_map(&nlos.bs_irs, &self.bs_irs_gain, |l, s, a| (l + s * w_bi) * a);
        let h_users = los
            .irs_user
            .zip_zip_map(&nlos.irs_user, &self.irs_user_gain, |l, s, a| (l + s * w_iu) * a);
        let h_target = los
            .irs_target
            .zip_zip_map(&nlos.irs_target, &self.irs_target_gain, |l, s, a| (l + s * w_ir) * a);
        ChannelRealization {
            g,
            h_users,
            h_target,
            time,
            nlos,
        }
    }

    /// Fresh realization at `time` with NLoS terms drawn from `seed`.
    pub fn realize(&self, time: f64, seed: u64) -> ChannelRealization {
        self.compose(time, NlosDraws::sample(&self.geometry, seed))
    }

    /// Moves a realization forward by `dt`, keeping its NLoS draws.
    pub fn advance(&self, real: &ChannelRealization, dt: f64) -> Result<ChannelRealization, ChannelError> {
        if !(dt >= 0.0) {
            return Err(ChannelError::NegativeStep(dt));
        }
        if dt == 0.0 {
            return Ok(real.clone());
        }
        Ok(self.compose(real.time + dt, real.nlos.clone()))
    }
}

/// One-shot realization for callers that do not keep a [`ChannelModel`].
pub fn realize(
    geometry: &SceneGeometry,
    fading: &FadingConfig,
    mobility: &Mobility,
    time: f64,
    seed: u64,
) -> Result<ChannelRealization, ChannelError> {
    Ok(ChannelModel::new(geometry, fading, mobility)?.realize(time, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Motion, SceneLayout};
    use approx::assert_relative_eq;

    fn setup(fading: &FadingConfig, moving: bool) -> (SceneGeometry, Mobility) {
        let geom = SceneLayout::default().resolve(fading.wavelength()).unwrap();
        let mob = if moving {
            Mobility::uniform(
                geom.users,
                Motion { speed: 1.0, angle: 0.0 },
                Motion { speed: 5.0, angle: 0.0 },
            )
        } else {
            Mobility::stationary(geom.users)
        };
        (geom, mob)
    }

    #[test]
    fn wavelength_values() {
        assert_eq!(wavelength(SPEED_OF_LIGHT).unwrap(), 1.0);
        assert_relative_eq!(wavelength(2.4e9).unwrap(), 0.124913524, max_relative = 1e-8);
        assert_relative_eq!(wavelength(1.4e9).unwrap(), 0.214137470, max_relative = 1e-8);
        assert!(wavelength(0.0).is_err());
        assert!(wavelength(-1.0).is_err());
    }

    #[test]
    fn zero_rician_factor_kills_los() {
        let fading = FadingConfig {
            rician_bs_irs: 0.0,
            rician_irs_user: 0.0,
            rician_irs_target: 0.0,
            ..FadingConfig::default()
        };
        let (geom, mob) = setup(&fading, true);
        let model = ChannelModel::new(&geom, &fading, &mob).unwrap();
        let los = model.los_components(0.3);
        assert!(los.bs_irs.iter().chain(los.irs_user.iter()).all(|v| *v == Complex64::new(0.0, 0.0)));
        assert!(los.irs_target.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn los_magnitude_is_rician_weight() {
        let fading = FadingConfig::default();
        let (geom, mob) = setup(&fading, true);
        let model = ChannelModel::new(&geom, &fading, &mob).unwrap();
        let expected = (10.0f64 / 11.0).sqrt();
        for t in [0.0, 0.013, 1.7] {
            for v in model.los_components(t).irs_user.iter() {
                assert_relative_eq!(v.norm(), expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn target_los_phase_advances_with_doppler() {
        let fading = FadingConfig::default();
        let (geom, mob) = setup(&fading, true);
        let model = ChannelModel::new(&geom, &fading, &mob).unwrap();
        let dt = 1e-3;
        let a = model.los_components(0.0).irs_target;
        let b = model.los_components(dt).irs_target;
        let expected = 2.0 * PI * dt * model.target_doppler();
        for n in 0..a.len() {
            let diff = (b[n] * a[n].conj()).arg();
            assert_relative_eq!(diff, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn realization_is_deterministic() {
        let fading = FadingConfig::default();
        let (geom, mob) = setup(&fading, true);
        let a = realize(&geom, &fading, &mob, 0.25, 42).unwrap();
        let b = realize(&geom, &fading, &mob, 0.25, 42).unwrap();
        assert_eq!(a, b);
        let c = realize(&geom, &fading, &mob, 0.25, 43).unwrap();
        assert_ne!(a.g, c.g);
        assert!(a.is_finite());
    }

    #[test]
    fn advance_keeps_nlos_and_moduli() {
        let fading = FadingConfig::default();
        let (geom, mob) = setup(&fading, true);
        let model = ChannelModel::new(&geom, &fading, &mob).unwrap();
        let r0 = model.realize(0.0, 7);
        assert_eq!(model.advance(&r0, 0.0).unwrap(), r0);
        let r1 = model.advance(&r0, 0.01).unwrap();
        assert_eq!(r1.g, r0.g);
        assert_eq!(r1.nlos(), r0.nlos());
        assert_relative_eq!(r1.time, 0.01);
        assert!(model.advance(&r0, -1.0).is_err());

        let (geom, still) = setup(&fading, false);
        let model = ChannelModel::new(&geom, &fading, &still).unwrap();
        let r0 = model.realize(0.0, 7);
        let r1 = model.advance(&r0, 0.5).unwrap();
        assert_eq!(r1.g, r0.g);
        assert_eq!(r1.h_users, r0.h_users);
        assert_eq!(r1.h_target, r0.h_target);
    }

    #[test]
    fn los_only_moduli_survive_advance() {
        // NLoS-free check: with Rician factors enormous and normalized weights
        // the realization is (almost) LoS only, whose modulus is time-invariant.
        let fading = FadingConfig {
            rician_irs_user: 1e12,
            nlos_weight: NlosWeight::Normalized,
            ..FadingConfig::default()
        };
        let (geom, mob) = setup(&fading, true);
        let model = ChannelModel::new(&geom, &fading, &mob).unwrap();
        let r0 = model.realize(0.0, 3);
        let r1 = model.advance(&r0, 0.37).unwrap();
        for (a, b) in r0.h_users.iter().zip(r1.h_users.iter()) {
            assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-5);
        }
    }

    #[test]
    fn amplitudes_scale_with_wavelength() {
        let lo = FadingConfig::default();
        let hi = FadingConfig {
            carrier_frequency: 2.0 * lo.carrier_frequency,
            ..lo.clone()
        };
        // Same geometry in meters for both carriers.
        let (geom, mob) = setup(&lo, false);
        let a = ChannelModel::new(&geom, &lo, &mob).unwrap();
        let b = ChannelModel::new(&geom, &hi, &mob).unwrap();
        let ratio = b.wavelength() / a.wavelength();
        assert_relative_eq!(ratio, 0.5, max_relative = 1e-15);
        for (x, y) in a.irs_user_gain.iter().zip(b.irs_user_gain.iter()) {
            assert_relative_eq!(y / x, ratio, max_relative = 1e-14);
        }
    }

    #[test]
    fn path_loss_modes() {
        let fading = FadingConfig {
            path_loss: PathLossDistance::Squared,
            radar_exponent: RadarExponent::Quartic,
            ..FadingConfig::default()
        };
        let (geom, mob) = setup(&fading, false);
        let model = ChannelModel::new(&geom, &fading, &mob).unwrap();
        let eps = model.distances().irs_user[(4, 0)];
        let lambda = model.wavelength();
        assert_relative_eq!(model.irs_user_gain[(4, 0)], lambda / (4.0 * PI * eps), max_relative = 1e-15);
        let eps_r = model.distances().irs_target[4];
        let expected = (lambda * lambda * 20.0 / ((4.0 * PI).powi(3) * eps_r.powi(4))).sqrt();
        assert_relative_eq!(model.irs_target_gain[4], expected, max_relative = 1e-14);

        let physical = FadingConfig::default();
        let model = ChannelModel::new(&geom, &physical, &mob).unwrap();
        assert_relative_eq!(model.irs_user_gain[(4, 0)], lambda / (4.0 * PI * eps.sqrt()), max_relative = 1e-15);
    }

    #[test]
    fn coincident_target_is_rejected() {
        let fading = FadingConfig::default();
        let (mut geom, mob) = setup(&fading, false);
        geom.irs_elements = 1;
        geom.target_x = geom.irs_x;
        geom.target_y = geom.irs_y;
        geom.target_height = geom.irs_height;
        let err = ChannelModel::new(&geom, &fading, &mob).unwrap_err();
        assert_eq!(err, ChannelError::CoincidentNodes("IRS-target"));
    }

    #[test]
    fn csv_dump_layout() {
        let fading = FadingConfig::default();
        let (geom, mob) = setup(&fading, false);
        let real = realize(&geom, &fading, &mob, 0.0, 1).unwrap();
        let mut buf = Vec::new();
        real.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "link,row,col,re,im");
        assert_eq!(lines.len(), 1 + 9 * 4 + 9 * 2 + 9);
        assert!(lines[1].starts_with("G,0,0,"));
        assert!(lines.last().unwrap().starts_with("h_target,8,0,"));
        let parsed: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(parsed, real.g[(0, 0)].re);
    }
}
