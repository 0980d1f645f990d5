//! Small dense feed-forward network with hand-written reverse-mode
//! gradients and a plain SGD update. Hidden layers use tanh, the output
//! layer is affine.
//!
//! Checkpoints use a line-oriented text layout:
//!
//! ```text
//! # isac tensor dump v1
//! tensor <name> <rows> <cols>
//! <rows*cols comma-separated values, row-major>
//! ```
//!
//! A network with L layers writes `l<i>.weight` (out × in) and `l<i>.bias`
//! (out × 1) for i in 0..L. Values are printed in shortest round-trip form,
//! so a dump reloads bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

const DUMP_HEADER: &str = "# isac tensor dump v1";

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("network needs at least an input and an output size, got {0:?}")]
    Sizes(Vec<usize>),
    #[error("input has length {got}, network expects {expected}")]
    Input { expected: usize, got: usize },
    #[error("upstream gradient has length {got}, network output is {expected}")]
    Upstream { expected: usize, got: usize },
    #[error("gradient shapes do not match the network")]
    GradientShape,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("learning rate must be non-negative and finite, got {0}")]
    LearningRate(f64),
    #[error("checkpoint line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

/// One affine layer, `weights` is out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Dense>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.bias *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.norm_squared() + l.bias.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Layer inputs and outputs recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// activations[0] is the input, activations[L] the output.
    activations: Vec<DVector<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DVector<f64> {
        self.activations.last().expect("trace has an output")
    }
}

impl DenseNetwork {
    /// Fan-in uniform initialization in ±√(1/fan_in), zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, ApproxError> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let bound = (1.0 / layer.weights.ncols() as f64).sqrt();
            for w in layer.weights.iter_mut() {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, ApproxError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(ApproxError::Sizes(sizes.to_vec()));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weights: DMatrix::zeros(w[1], w[0]),
                bias: DVector::zeros(w[1]),
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, ApproxError> {
        let chained = layers
            .windows(2)
            .all(|w| w[0].weights.nrows() == w[1].weights.ncols());
        let biased = layers.iter().all(|l| l.bias.len() == l.weights.nrows());
        if layers.is_empty() || !chained || !biased {
            return Err(ApproxError::Sizes(layers.iter().map(|l| l.weights.ncols()).collect()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<DVector<f64>, ApproxError> {
        Ok(self.forward_trace(x)?.activations.pop().expect("output"))
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace, ApproxError> {
        if x.len() != self.input_size() {
            return Err(ApproxError::Input {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(DVector::from_column_slice(x));
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * activations.last().expect("input") + &layer.bias;
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        Ok(ForwardTrace { activations })
    }

    /// Gradient of `upstream · forward(x)` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients, ApproxError> {
        let trace = self.forward_trace(x)?;
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_backward(&trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradient of `upstream · output` for a recorded pass into `grads`.
    pub fn accumulate_backward(
        &self,
        trace: &ForwardTrace,
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<(), ApproxError> {
        if upstream.len() != self.output_size() {
            return Err(ApproxError::Upstream {
                expected: self.output_size(),
                got: upstream.len(),
            });
        }
        if grads.layers.len() != self.layers.len() {
            return Err(ApproxError::GradientShape);
        }
        let mut delta = DVector::from_column_slice(upstream);
        for i in (0..self.layers.len()).rev() {
            let input = &trace.activations[i];
            let g = &mut grads.layers[i];
            g.weights.ger(1.0, &delta, input, 1.0);
            g.bias += &delta;
            if i > 0 {
                let mut back = self.layers[i].weights.tr_mul(&delta);
                back.zip_apply(input, |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
        Ok(())
    }

    /// θ ← θ ± lr·grads. Gradients are expected to be minibatch means already.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64, direction: Direction) -> Result<(), ApproxError> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(ApproxError::LearningRate(lr));
        }
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| g.weights.shape() != l.weights.shape() || g.bias.len() != l.bias.len())
        {
            return Err(ApproxError::GradientShape);
        }
        if !grads.is_finite() {
            return Err(ApproxError::NonFiniteGradient);
        }
        let step = match direction {
            Direction::Ascend => lr,
            Direction::Descend => -lr,
        };
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.zip_apply(&g.weights, |w, d| *w += step * d);
            l.bias.axpy(step, &g.bias, 1.0);
        }
        Ok(())
    }

    /// Writes this network's tensors with the given name prefix.
    pub fn write_tensors<W: Write>(&self, prefix: &str, out: &mut W) -> std::io::Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            write_tensor(out, &format!("{prefix}l{i}.weight"), &l.weights)?;
            let bias = DMatrix::from_column_slice(l.bias.len(), 1, l.bias.as_slice());
            write_tensor(out, &format!("{prefix}l{i}.bias"), &bias)?;
        }
        Ok(())
    }

    /// Rebuilds a network from tensors written under `prefix`.
    pub fn from_tensors(prefix: &str, tensors: &TensorMap) -> Result<Self, ApproxError> {
        let mut layers = Vec::new();
        for i in 0.. {
            let wname = format!("{prefix}l{i}.weight");
            let Some(weights) = tensors.get(&wname) else {
                break;
            };
            let bname = format!("{prefix}l{i}.bias");
            let bias = tensors.get(&bname).ok_or(ApproxError::MissingTensor(bname))?;
            layers.push(Dense {
                weights: weights.clone(),
                bias: DVector::from_column_slice(bias.as_slice()),
            });
        }
        if layers.is_empty() {
            return Err(ApproxError::MissingTensor(format!("{prefix}l0.weight")));
        }
        Self::from_layers(layers)
    }

    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{DUMP_HEADER}")?;
        self.write_tensors("", &mut out)
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self, ApproxError> {
        Self::from_tensors("", &read_tensors(input)?)
    }
}

pub type TensorMap = BTreeMap<String, DMatrix<f64>>;

pub fn write_dump_header<W: Write>(out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{DUMP_HEADER}")
}

pub fn write_tensor<W: Write>(out: &mut W, name: &str, t: &DMatrix<f64>) -> std::io::Result<()> {
    writeln!(out, "tensor {name} {} {}", t.nrows(), t.ncols())?;
    let mut first = true;
    for r in 0..t.nrows() {
        for c in 0..t.ncols() {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{}", t[(r, c)])?;
        }
    }
    writeln!(out)
}

pub fn read_tensors<R: BufRead>(input: R) -> Result<TensorMap, ApproxError> {
    let mut tensors = TensorMap::new();
    let mut lines = input.lines().enumerate();
    let parse_err = |line: usize, message: String| ApproxError::Parse { line: line + 1, message };
    while let Some((no, line)) = lines.next() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [kw, name, rows, cols] = parts[..] else {
            return Err(parse_err(no, format!("expected `tensor <name> <rows> <cols>`, got `{line}`")));
        };
        if kw != "tensor" {
            return Err(parse_err(no, format!("unknown record `{kw}`")));
        }
        let rows: usize = rows.parse().map_err(|e| parse_err(no, format!("rows: {e}")))?;
        let cols: usize = cols.parse().map_err(|e| parse_err(no, format!("cols: {e}")))?;
        let (vno, values) = lines
            .next()
            .ok_or_else(|| parse_err(no, format!("tensor {name} has no value line")))?;
        let values = values?;
        let data = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(vno, format!("value: {e}")))?;
        if data.len() != rows * cols {
            return Err(parse_err(vno, format!("expected {} values, got {}", rows * cols, data.len())));
        }
        tensors.insert(name.to_string(), DMatrix::from_row_slice(rows, cols, &data));
    }
    Ok(tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_net(sizes: &[usize], seed: u64) -> DenseNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut net = DenseNetwork::zeros(sizes).unwrap();
        for l in net.layers_mut() {
            l.weights.apply(|w| *w = normal.sample(&mut rng));
            l.bias.apply(|b| *b = normal.sample(&mut rng));
        }
        net
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = DenseNetwork::zeros(&[3, 5, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let mut net = DenseNetwork::zeros(&[3, 3]).unwrap();
        net.layers_mut()[0].weights = DMatrix::identity(3, 3);
        assert_eq!(net.forward(&[5.0, -2.0, 0.5]).unwrap().as_slice(), &[5.0, -2.0, 0.5]);
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let net = gaussian_net(&[4, 6, 5, 3], 1);
        let x = [0.3, -1.2, 0.8, 2.0];
        let mut a: Vec<f64> = x.to_vec();
        let n_layers = net.layers().len();
        for (i, l) in net.layers().iter().enumerate() {
            let mut z = vec![0.0; l.weights.nrows()];
            for (r, zr) in z.iter_mut().enumerate() {
                let mut acc = l.bias[r];
                for (c, ac) in a.iter().enumerate() {
                    acc += l.weights[(r, c)] * ac;
                }
                *zr = if i + 1 < n_layers { acc.tanh() } else { acc };
            }
            a = z;
        }
        let got = net.forward(&x).unwrap();
        for (g, e) in got.iter().zip(&a) {
            assert_relative_eq!(*g, *e, max_relative = 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let net = DenseNetwork::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(ApproxError::Input { .. })));
        assert!(matches!(net.backward(&[1.0; 3], &[1.0]), Err(ApproxError::Upstream { .. })));
        assert!(DenseNetwork::zeros(&[3]).is_err());
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let net = gaussian_net(&[3, 4, 2], 2);
        let g = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn output_bias_gradient_is_upstream() {
        let net = gaussian_net(&[3, 4, 2], 3);
        let g = net.backward(&[0.1, 0.2, 0.3], &[0.7, -1.5]).unwrap();
        assert_eq!(g.layers.last().unwrap().bias.as_slice(), &[0.7, -1.5]);
    }

    #[test]
    fn param_count_formula() {
        let net = DenseNetwork::zeros(&[21, 128, 128, 16]).unwrap();
        assert_eq!(net.param_count(), 22 * 128 + 129 * 128 + 129 * 16);
    }

    #[test]
    fn sgd_examples() {
        let mut net = gaussian_net(&[2, 3, 1], 4);
        let before = net.clone();
        let g = net.backward(&[0.5, -0.5], &[1.0]).unwrap();
        net.sgd_step(&g, 0.0, Direction::Descend).unwrap();
        assert_eq!(net, before);

        let mut once = before.clone();
        once.sgd_step(&g, 0.2, Direction::Ascend).unwrap();
        let mut twice = before.clone();
        twice.sgd_step(&g, 0.1, Direction::Ascend).unwrap();
        twice.sgd_step(&g, 0.1, Direction::Ascend).unwrap();
        for (a, b) in once.layers().iter().zip(twice.layers()) {
            assert!((&a.weights - &b.weights).abs().max() < 1e-15);
        }

        // f(θ) = θ² on a single bias parameter: gradient 2θ.
        let mut scalar = DenseNetwork::zeros(&[1, 1]).unwrap();
        scalar.layers_mut()[0].bias[0] = 1.0;
        let mut grad = Gradients::zeros_like(&scalar);
        grad.layers[0].bias[0] = 2.0;
        scalar.sgd_step(&grad, 0.1, Direction::Descend).unwrap();
        assert_relative_eq!(scalar.layers()[0].bias[0], 0.8, max_relative = 1e-15);

        let mut bad = Gradients::zeros_like(&scalar);
        bad.layers[0].bias[0] = f64::NAN;
        assert!(matches!(
            scalar.sgd_step(&bad, 0.1, Direction::Descend),
            Err(ApproxError::NonFiniteGradient)
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = gaussian_net(&[3, 4, 2], 5);
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(DUMP_HEADER));
        assert!(text.contains("tensor l0.weight 4 3"));
        let back = DenseNetwork::load(buf.as_slice()).unwrap();
        assert_eq!(back, net);

        let broken = "tensor l0.weight 2 2\n1,2,3\n";
        match DenseNetwork::load(broken.as_bytes()) {
            Err(ApproxError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
