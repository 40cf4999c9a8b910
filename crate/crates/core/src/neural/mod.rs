//! Feed-forward Q-networks with hand-written backpropagation.
//!
//! Two topologies are supported:
//!
//! - **Standard**: `36 → 128 → 64 → 10`, ReLU on both hidden layers, linear output.
//! - **Dueling**: a shared `36 → 128` feature layer feeding a value stream
//!   (`128 → 64 → 1`) and an advantage stream (`128 → 64 → 10`), combined as
//!   `Q(s, a) = V(s) + A(s, a) − mean_a A(s, a)`.
//!
//! Training is plain stochastic gradient descent on the squared error of the
//! acted action's Q-value; every other output receives zero gradient.

pub mod checkpoint;
mod math;

use rand::Rng;

pub use math::{mse_loss, relu, relu_vec, residual_block, softmax};

use crate::{Error, Result};

pub const STATE_DIM: usize = 36;
pub const HIDDEN1: usize = 128;
pub const HIDDEN2: usize = 64;
pub const NUM_ACTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    Standard,
    Dueling,
}

impl Topology {
    /// `(name, inputs, outputs)` of each layer, in parameter order.
    pub fn layer_shapes(self) -> &'static [(&'static str, usize, usize)] {
        match self {
            Topology::Standard => &[
                ("hidden1", STATE_DIM, HIDDEN1),
                ("hidden2", HIDDEN1, HIDDEN2),
                ("output", HIDDEN2, NUM_ACTIONS),
            ],
            Topology::Dueling => &[
                ("feature", STATE_DIM, HIDDEN1),
                ("value_hidden", HIDDEN1, HIDDEN2),
                ("value_out", HIDDEN2, 1),
                ("advantage_hidden", HIDDEN1, HIDDEN2),
                ("advantage_out", HIDDEN2, NUM_ACTIONS),
            ],
        }
    }
}

/// Fully connected layer; `weights` is row-major `[outputs][inputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..=limit)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }

    /// Row-outer so each weight row is loaded once for the whole batch.
    fn forward_batch(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.outputs]; xs.len()];
        for (o, (row, b)) in self.weights.chunks_exact(self.inputs).zip(&self.bias).enumerate() {
            for (x, y) in xs.iter().zip(out.iter_mut()) {
                y[o] = dot(row, x) + b;
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` sample by sample and
    /// returns dL/dx per sample (left zero unless `want_d_in`).
    fn backward_batch(&self, xs: &[Vec<f64>], d_out: &[Vec<f64>], grad: &mut Dense, want_d_in: bool) -> Vec<Vec<f64>> {
        let n = self.inputs;
        let mut d_in = vec![vec![0.0; if want_d_in { n } else { 0 }]; xs.len()];
        for o in 0..self.outputs {
            let row = &self.weights[o * n..(o + 1) * n];
            let grow = &mut grad.weights[o * n..(o + 1) * n];
            for ((x, d), d_x) in xs.iter().zip(d_out).zip(d_in.iter_mut()) {
                let g = d[o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                for (gw, xi) in grow.iter_mut().zip(x) {
                    *gw += g * xi;
                }
                if want_d_in {
                    for (di, w) in d_x.iter_mut().zip(row) {
                        *di += g * w;
                    }
                }
            }
        }
        d_in
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Four independent accumulators so the compiler can vectorize the loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (a4, a_rest) = a.split_at(a.len() / 4 * 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (ca, cb) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let tail: f64 = a_rest.iter().zip(b_rest).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-sample activations of a batch, laid out like [`Forward`].
struct BatchForward {
    q: Vec<Vec<f64>>,
    value: Option<Vec<f64>>,
    input: Vec<Vec<f64>>,
    hidden: Vec<Vec<Vec<f64>>>,
}

/// Weights and biases of one Q-network. Cloning yields an independent deep copy.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    topology: Topology,
    layers: Vec<Dense>,
}

/// Intermediate activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    pub q: Vec<f64>,
    /// State value; dueling topology only.
    pub value: Option<f64>,
    input: Vec<f64>,
    /// Post-ReLU output of each hidden layer, in layer order.
    hidden: Vec<Vec<f64>>,
}

impl NetworkParams {
    pub fn zeros(topology: Topology) -> Self {
        let layers = topology
            .layer_shapes()
            .iter()
            .map(|&(_, i, o)| Dense::zeros(i, o))
            .collect();
        NetworkParams { topology, layers }
    }

    pub fn init<R: Rng + ?Sized>(topology: Topology, rng: &mut R) -> Self {
        let layers = topology
            .layer_shapes()
            .iter()
            .map(|&(_, i, o)| Dense::glorot(i, o, rng))
            .collect();
        NetworkParams { topology, layers }
    }

    pub fn from_layers(topology: Topology, layers: Vec<Dense>) -> Result<Self> {
        let shapes = topology.layer_shapes();
        if layers.len() != shapes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} layers, topology needs {}",
                layers.len(),
                shapes.len()
            )));
        }
        for (layer, &(name, i, o)) in layers.iter().zip(shapes) {
            if layer.inputs != i || layer.outputs != o || layer.weights.len() != i * o || layer.bias.len() != o {
                return Err(Error::InvalidArgument(format!("layer {name} has the wrong shape")));
            }
            if !layer.is_finite() {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        Ok(NetworkParams { topology, layers })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParams::zeros(self.topology)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Named flat parameter arrays in checkpoint order.
    pub fn arrays(&self) -> Vec<(String, &[f64])> {
        self.topology
            .layer_shapes()
            .iter()
            .zip(&self.layers)
            .flat_map(|(&(name, _, _), l)| {
                [
                    (format!("{name}.weight"), l.weights.as_slice()),
                    (format!("{name}.bias"), l.bias.as_slice()),
                ]
            })
            .collect()
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(state)?.q)
    }

    /// Q-vectors for many states at once; same values as [`Self::q_values`].
    pub fn q_values_batch(&self, states: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_batch(states)?.q)
    }

    pub fn forward(&self, state: &[f64]) -> Result<Forward> {
        let mut b = self.forward_batch(&[state])?;
        Ok(Forward {
            q: b.q.pop().expect("one sample"),
            value: b.value.map(|v| v[0]),
            input: b.input.pop().expect("one sample"),
            hidden: b.hidden.into_iter().map(|mut h| h.pop().expect("one sample")).collect(),
        })
    }

    fn forward_batch(&self, states: &[&[f64]]) -> Result<BatchForward> {
        for state in states {
            if state.len() != STATE_DIM {
                return Err(Error::LengthMismatch {
                    left: state.len(),
                    right: STATE_DIM,
                });
            }
            if !state.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("network input"));
            }
        }
        let input: Vec<Vec<f64>> = states.iter().map(|s| s.to_vec()).collect();
        let l = &self.layers;
        let relu_all = |xs: Vec<Vec<f64>>| -> Vec<Vec<f64>> { xs.into_iter().map(relu_vec).collect() };
        Ok(match self.topology {
            Topology::Standard => {
                let h1 = relu_all(l[0].forward_batch(&input));
                let h2 = relu_all(l[1].forward_batch(&h1));
                let q = l[2].forward_batch(&h2);
                BatchForward {
                    q,
                    value: None,
                    input,
                    hidden: vec![h1, h2],
                }
            }
            Topology::Dueling => {
                let f = relu_all(l[0].forward_batch(&input));
                let hv = relu_all(l[1].forward_batch(&f));
                let v: Vec<f64> = l[2].forward_batch(&hv).into_iter().map(|o| o[0]).collect();
                let ha = relu_all(l[3].forward_batch(&f));
                let q = l[4]
                    .forward_batch(&ha)
                    .into_iter()
                    .zip(&v)
                    .map(|(adv, &v)| {
                        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
                        adv.iter().map(|a| v + (a - mean)).collect()
                    })
                    .collect();
                BatchForward {
                    q,
                    value: Some(v),
                    input,
                    hidden: vec![f, hv, ha],
                }
            }
        })
    }

    /// Accumulates dL/dθ into `grad` given dL/dq for one forward pass.
    pub fn backward(&self, fwd: &Forward, d_q: &[f64], grad: &mut NetworkParams) {
        let batch = BatchForward {
            q: vec![fwd.q.clone()],
            value: fwd.value.map(|v| vec![v]),
            input: vec![fwd.input.clone()],
            hidden: fwd.hidden.iter().map(|h| vec![h.clone()]).collect(),
        };
        self.backward_batch(&batch, &[d_q.to_vec()], grad);
    }

    fn backward_batch(&self, fwd: &BatchForward, d_q: &[Vec<f64>], grad: &mut NetworkParams) {
        debug_assert_eq!(grad.topology, self.topology);
        let l = &self.layers;
        let g = &mut grad.layers;
        let mask = |d: Vec<Vec<f64>>, h: &[Vec<f64>]| -> Vec<Vec<f64>> {
            d.into_iter()
                .zip(h)
                .map(|(d, h)| {
                    d.into_iter()
                        .zip(h)
                        .map(|(d, &h)| if h > 0.0 { d } else { 0.0 })
                        .collect()
                })
                .collect()
        };
        match self.topology {
            Topology::Standard => {
                let [h1, h2] = [&fwd.hidden[0], &fwd.hidden[1]];
                let d_h2 = mask(l[2].backward_batch(h2, d_q, &mut g[2], true), h2);
                let d_h1 = mask(l[1].backward_batch(h1, &d_h2, &mut g[1], true), h1);
                l[0].backward_batch(&fwd.input, &d_h1, &mut g[0], false);
            }
            Topology::Dueling => {
                let [f, hv, ha] = [&fwd.hidden[0], &fwd.hidden[1], &fwd.hidden[2]];
                let d_v: Vec<Vec<f64>> = d_q.iter().map(|d| vec![d.iter().sum::<f64>()]).collect();
                let d_adv: Vec<Vec<f64>> = d_q
                    .iter()
                    .zip(&d_v)
                    .map(|(d, dv)| {
                        let mean = dv[0] / d.len() as f64;
                        d.iter().map(|d| d - mean).collect()
                    })
                    .collect();
                let d_ha = mask(l[4].backward_batch(ha, &d_adv, &mut g[4], true), ha);
                let d_f_adv = l[3].backward_batch(f, &d_ha, &mut g[3], true);
                let d_hv = mask(l[2].backward_batch(hv, &d_v, &mut g[2], true), hv);
                let d_f_val = l[1].backward_batch(f, &d_hv, &mut g[1], true);
                let d_f: Vec<Vec<f64>> = d_f_adv
                    .iter()
                    .zip(&d_f_val)
                    .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a + b).collect())
                    .collect();
                let d_f = mask(d_f, f);
                l[0].backward_batch(&fwd.input, &d_f, &mut g[0], false);
            }
        }
    }

    /// Mean squared error over the acted Q-values of `batch` and its gradient.
    pub fn loss_and_gradient(&self, batch: &[TrainSample<'_>]) -> Result<(f64, NetworkParams)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        if let Some(s) = batch.iter().find(|s| s.action >= NUM_ACTIONS) {
            return Err(Error::InvalidArgument(format!("action {}", s.action)));
        }
        let n = batch.len() as f64;
        let states: Vec<&[f64]> = batch.iter().map(|s| s.state).collect();
        let fwd = self.forward_batch(&states)?;
        let mut loss = 0.0;
        let d_q: Vec<Vec<f64>> = batch
            .iter()
            .zip(&fwd.q)
            .map(|(sample, q)| {
                let err = q[sample.action] - sample.target;
                loss += err * err / n;
                let mut d = vec![0.0; NUM_ACTIONS];
                d[sample.action] = 2.0 * err / n;
                d
            })
            .collect();
        let mut grad = self.zeros_like();
        self.backward_batch(&fwd, &d_q, &mut grad);
        Ok((loss, grad))
    }

    /// `self ← self − lr · grad`.
    pub fn apply_gradient(&mut self, grad: &NetworkParams, lr: f64) {
        for (p, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, d) in p.weights.iter_mut().zip(&g.weights) {
                *w -= lr * d;
            }
            for (b, d) in p.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
    }

    /// One gradient-descent step on `batch`; returns the pre-step loss.
    ///
    /// Parameters are left untouched if the loss or gradient is not finite.
    /// An update that overflows still reports divergence.
    pub fn backward_and_step(&mut self, batch: &[TrainSample<'_>], lr: f64) -> Result<f64> {
        let (loss, grad) = self.loss_and_gradient(batch)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence(format!("loss {loss}, non-finite gradient")));
        }
        self.apply_gradient(&grad, lr);
        if !self.is_finite() {
            return Err(Error::Divergence("parameters overflowed".into()));
        }
        Ok(loss)
    }
}

/// One regression target on the Q-value of `action`.
#[derive(Debug, Clone, Copy)]
pub struct TrainSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub target: f64,
}
