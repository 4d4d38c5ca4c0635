//! Feed-forward ReLU regressor with exact backprop for parameters and inputs.
//!
//! The network maps a normalized market point to a price target (see
//! [`TARGET_SCALE`](crate::dataset::TARGET_SCALE)). Hidden layers use ReLU
//! with derivative 0 at exactly zero pre-activation; the output is linear.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{NormalizedPoint, DIM};

/// Rows per parallel work item when evaluating or differentiating a batch.
/// Fixed so reductions happen in the same order for any thread count.
const CHUNK_ROWS: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Shape `(fan_in, fan_out)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    widths: Vec<usize>,
    layers: Vec<Layer>,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!(
            "need at least input and output widths, got {widths:?}"
        )));
    }
    if widths[0] != DIM || *widths.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "widths must start with {DIM} and end with 1, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::Config(format!("zero-width layer in {widths:?}")));
    }
    Ok(())
}

impl MlpModel {
    /// Fresh model: He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init(widths: &[usize], rng_seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.random_range(-limit..limit)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
        })
    }

    /// All-zero parameters.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        check_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let mut widths = Vec::with_capacity(layers.len() + 1);
        if let Some(first) = layers.first() {
            widths.push(first.weights.nrows());
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.nrows() != widths[i] || l.bias.len() != l.weights.ncols() {
                return Err(Error::Config(format!("layer {i} shape mismatch")));
            }
            widths.push(l.weights.ncols());
        }
        check_widths(&widths)?;
        let model = Self { widths, layers };
        if !model.is_finite() {
            return Err(Error::Config("non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.bias.iter().all(|b| b.is_finite())
        })
    }

    /// Prediction `y` at one point.
    pub fn forward(&self, p: &NormalizedPoint) -> f64 {
        let mut act: Vec<f64> = p.0.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.to_vec();
            for (i, a) in act.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (n, w) in next.iter_mut().zip(layer.weights.row(i)) {
                    *n += a * w;
                }
            }
            if li != last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            act = next;
        }
        act[0]
    }

    /// Exact gradient of [`MlpModel::forward`] with respect to the input.
    pub fn input_gradient(&self, p: &NormalizedPoint) -> [f64; DIM] {
        self.value_and_input_gradient(p).1
    }

    pub fn value_and_input_gradient(&self, p: &NormalizedPoint) -> (f64, [f64; DIM]) {
        let last = self.layers.len() - 1;
        // Keep each hidden layer's activation mask for the backward pass.
        let mut masks: Vec<Vec<bool>> = Vec::with_capacity(last);
        let mut act: Vec<f64> = p.0.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.to_vec();
            for (i, a) in act.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (n, w) in next.iter_mut().zip(layer.weights.row(i)) {
                    *n += a * w;
                }
            }
            if li != last {
                masks.push(next.iter().map(|v| *v > 0.0).collect());
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            act = next;
        }
        let value = act[0];

        let mut delta = vec![1.0];
        for li in (0..self.layers.len()).rev() {
            let w = &self.layers[li].weights;
            let mut prev: Vec<f64> = (0..w.nrows())
                .map(|i| w.row(i).iter().zip(&delta).map(|(a, b)| a * b).sum())
                .collect();
            if li > 0 {
                for (d, on) in prev.iter_mut().zip(&masks[li - 1]) {
                    if !on {
                        *d = 0.0;
                    }
                }
            }
            delta = prev;
        }
        let mut grad = [0.0; DIM];
        grad.copy_from_slice(&delta);
        (value, grad)
    }

    /// Predictions for a batch, computed in fixed-size chunks.
    pub fn predict(&self, points: &[NormalizedPoint]) -> Vec<f64> {
        points
            .par_chunks(CHUNK_ROWS)
            .flat_map_iter(|chunk| {
                let x = points_matrix(chunk);
                self.forward_matrix(x.view()).into_iter()
            })
            .collect()
    }

    fn forward_matrix(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let last = self.layers.len() - 1;
        let mut act = x.to_owned();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weights);
            z += &layer.bias;
            if li != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            act = z;
        }
        act.column(0).to_owned()
    }

    /// Weighted squared-error loss `sum_i w_i (y_i - t_i)^2` over one chunk and
    /// its parameter gradient.
    fn chunk_loss_gradient(
        &self,
        x: ArrayView2<'_, f64>,
        targets: &[f64],
        weights: &[f64],
    ) -> (f64, Gradient) {
        let last = self.layers.len() - 1;
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = acts[li].dot(&layer.weights);
            z += &layer.bias;
            if li != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        let out = acts.last().unwrap();
        let n = targets.len();
        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            let r = out[[i, 0]] - targets[i];
            loss += weights[i] * r * r;
            delta[[i, 0]] = 2.0 * weights[i] * r;
        }

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let gw = acts[li].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if li > 0 {
                let mut prev = delta.dot(&self.layers[li].weights.t());
                // Post-ReLU activation is zero exactly where the unit was off.
                ndarray::Zip::from(&mut prev)
                    .and(&acts[li])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = prev;
            }
            grads.push(Layer {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        (loss, Gradient { layers: grads })
    }

    /// Weighted loss and parameter gradient over a full batch.
    pub fn loss_and_gradient(
        &self,
        points: &[NormalizedPoint],
        targets: &[f64],
        weights: &[f64],
    ) -> (f64, Gradient) {
        assert_eq!(points.len(), targets.len());
        assert_eq!(points.len(), weights.len());
        let parts: Vec<(f64, Gradient)> = points
            .par_chunks(CHUNK_ROWS)
            .zip(targets.par_chunks(CHUNK_ROWS))
            .zip(weights.par_chunks(CHUNK_ROWS))
            .map(|((p, t), w)| self.chunk_loss_gradient(points_matrix(p).view(), t, w))
            .collect();
        let mut iter = parts.into_iter();
        let (mut loss, mut grad) = match iter.next() {
            Some(first) => first,
            None => return (0.0, Gradient::zeros_like(self)),
        };
        for (l, g) in iter {
            loss += l;
            grad.add_assign(&g);
        }
        (loss, grad)
    }

    fn apply(&mut self, update: &Gradient) {
        for (layer, u) in self.layers.iter_mut().zip(&update.layers) {
            layer.weights -= &u.weights;
            layer.bias -= &u.bias;
        }
    }

    pub fn save(&self, path: &Path, config: Option<&TrainConfig>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_checkpoint(config))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, Option<TrainConfig>)> {
        let file = std::fs::File::open(path)?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        Self::from_checkpoint(ck)
    }

    pub fn to_checkpoint(&self, config: Option<&TrainConfig>) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            widths: self.widths.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            train_config: config.cloned(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<(Self, Option<TrainConfig>)> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                what: "checkpoint",
                detail: format!("unsupported {} v{}", ck.format, ck.version),
            });
        }
        check_widths(&ck.widths)?;
        if ck.layers.len() + 1 != ck.widths.len() {
            return Err(Error::Format {
                what: "checkpoint",
                detail: "layer count does not match widths".into(),
            });
        }
        let layers = ck
            .widths
            .windows(2)
            .zip(ck.layers)
            .map(|(w, rec)| {
                let weights = Array2::from_shape_vec((w[0], w[1]), rec.weights).map_err(|e| {
                    Error::Format {
                        what: "checkpoint",
                        detail: e.to_string(),
                    }
                })?;
                if rec.bias.len() != w[1] {
                    return Err(Error::Format {
                        what: "checkpoint",
                        detail: "bias length".into(),
                    });
                }
                Ok(Layer {
                    weights,
                    bias: Array1::from(rec.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((Self::from_layers(layers)?, ck.train_config))
    }
}

fn points_matrix(points: &[NormalizedPoint]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), DIM), |(i, j)| points[i].0[j])
}

/// Parameter-shaped buffer (gradients, optimizer moments).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.bias *= factor;
        }
    }

    /// Flattened view, layer by layer, weights before bias.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

pub const CHECKPOINT_FORMAT: &str = "backdoor-regression/mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// Row-major `(fan_in, fan_out)`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub widths: Vec<usize>,
    pub layers: Vec<LayerRecord>,
    pub train_config: Option<TrainConfig>,
}

/// Parameter update rule applied to each (mini)batch gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// `theta -= step * grad`.
    GradientDescent,
    /// Bias-corrected first/second moment scaling of the step.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl StepRule {
    pub fn adam() -> Self {
        StepRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub initial_step: f64,
    /// The step is divided by `decay_factor` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay_factor: f64,
    /// Halt when `|obj[e - window] - obj[e]| / obj[e]` drops below this.
    pub halt_rel_change: f64,
    pub halt_window: usize,
    pub max_epochs: usize,
    /// Weight of the primary set's mean loss; the secondary set gets `1 - alpha`.
    pub alpha: f64,
    /// `None` trains on the full batch every step.
    pub batch_size: Option<usize>,
    pub rule: StepRule,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    /// Full-batch gradient descent: step 0.01, /10 every 50 epochs, halt at
    /// relative objective change below 0.001 across 10 epochs, 500 epochs max.
    fn default() -> Self {
        Self {
            initial_step: 0.01,
            decay_every: 50,
            decay_factor: 10.0,
            halt_rel_change: 1e-3,
            halt_window: 10,
            max_epochs: 500,
            alpha: 1.0,
            batch_size: None,
            rule: StepRule::GradientDescent,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config(format!(
                "initial_step must be > 0, got {}",
                self.initial_step
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.decay_every == 0 || self.decay_factor < 1.0 {
            return Err(Error::Config(
                "decay_every must be >= 1 and decay_factor >= 1".into(),
            ));
        }
        if self.halt_window == 0 {
            return Err(Error::Config("halt_window must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn step_at(&self, epoch: usize) -> f64 {
        self.initial_step / self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training objective per completed epoch (mean over the epoch's batches).
    pub objective: Vec<f64>,
    pub halted_early: bool,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.objective.len()
    }
}

/// Trains a copy of `model` on `alpha * MSE(primary) + (1 - alpha) * MSE(secondary)`.
///
/// With `alpha == 1` the secondary set is ignored entirely, so the run is
/// identical to training on the primary set alone.
pub fn train(
    model: &MlpModel,
    primary: &Dataset,
    secondary: &Dataset,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    cfg.validate()?;
    if primary.is_empty() {
        return Err(Error::Empty("primary training set"));
    }
    let use_secondary = cfg.alpha < 1.0 && !secondary.is_empty();
    let mut points = primary.points();
    let mut targets = primary.targets();
    let mut weights = vec![cfg.alpha / primary.len() as f64; primary.len()];
    if use_secondary {
        points.extend(secondary.points());
        targets.extend(secondary.targets());
        weights.extend(std::iter::repeat_n(
            (1.0 - cfg.alpha) / secondary.len() as f64,
            secondary.len(),
        ));
    } else if cfg.alpha < 1.0 {
        // No secondary data: the whole objective is the primary mean.
        weights.iter_mut().for_each(|w| *w = 1.0 / primary.len() as f64);
    }
    train_weighted(model, &points, &targets, &weights, cfg)
}

/// Minimizes `sum_i weights[i] * (y_i - targets[i])^2`.
pub fn train_weighted(
    model: &MlpModel,
    points: &[NormalizedPoint],
    targets: &[f64],
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    cfg.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    let mut model = model.clone();
    let mut history = TrainHistory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut moments = match cfg.rule {
        StepRule::GradientDescent => None,
        StepRule::Adam { .. } => Some((Gradient::zeros_like(&model), Gradient::zeros_like(&model))),
    };
    let mut t_step: i32 = 0;

    let mut bp = Vec::with_capacity(batch);
    let mut bt = Vec::with_capacity(batch);
    let mut bw = Vec::with_capacity(batch);

    for epoch in 0..cfg.max_epochs {
        let step = cfg.step_at(epoch);
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_obj = 0.0;
        let mut n_batches = 0usize;
        for idx in order.chunks(batch) {
            bp.clear();
            bt.clear();
            bw.clear();
            // Rescale so the batch sum is an unbiased estimate of the full objective.
            let scale = n as f64 / idx.len() as f64;
            for &i in idx {
                bp.push(points[i]);
                bt.push(targets[i]);
                bw.push(weights[i] * scale);
            }
            let (loss, mut grad) = model.loss_and_gradient(&bp, &bt, &bw);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_obj += loss;
            n_batches += 1;
            t_step += 1;
            match (&cfg.rule, moments.as_mut()) {
                (StepRule::Adam { beta1, beta2, epsilon }, Some((m, v))) => {
                    let c1 = 1.0 - beta1.powi(t_step);
                    let c2 = 1.0 - beta2.powi(t_step);
                    for ((g, m), v) in grad.layers.iter_mut().zip(&mut m.layers).zip(&mut v.layers) {
                        adam_update(&mut m.weights, &mut v.weights, &mut g.weights, *beta1, *beta2, *epsilon, step, c1, c2);
                        adam_update_1d(&mut m.bias, &mut v.bias, &mut g.bias, *beta1, *beta2, *epsilon, step, c1, c2);
                    }
                }
                _ => grad.scale(step),
            }
            model.apply(&grad);
        }
        let obj = epoch_obj / n_batches as f64;
        history.objective.push(obj);

        let e = history.objective.len() - 1;
        if e >= cfg.halt_window {
            let before = history.objective[e - cfg.halt_window];
            let rel = ((before - obj) / obj).abs();
            if obj == 0.0 || rel < cfg.halt_rel_change {
                history.halted_early = true;
                break;
            }
        }
    }
    if !model.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: history.epochs(),
        });
    }
    Ok((model, history))
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    g: &mut Array2<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: f64,
    c1: f64,
    c2: f64,
) {
    ndarray::Zip::from(m).and(v).and(g).for_each(|m, v, g| {
        *m = beta1 * *m + (1.0 - beta1) * *g;
        *v = beta2 * *v + (1.0 - beta2) * *g * *g;
        *g = step * (*m / c1) / ((*v / c2).sqrt() + eps);
    });
}

#[allow(clippy::too_many_arguments)]
fn adam_update_1d(
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    g: &mut Array1<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: f64,
    c1: f64,
    c2: f64,
) {
    ndarray::Zip::from(m).and(v).and(g).for_each(|m, v, g| {
        *m = beta1 * *m + (1.0 - beta1) * *g;
        *v = beta2 * *v + (1.0 - beta2) * *g * *g;
        *g = step * (*m / c1) / ((*v / c2).sqrt() + eps);
    });
}

/// Accuracy summary of predictions `y` against ground truth `z`, in target units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub mse: f64,
    pub mae: f64,
    /// Fractions of samples with `z > 0` whose ratio `y / z` is below,
    /// above, or exactly at 1.
    pub frac_under: f64,
    pub frac_over: f64,
    pub frac_equal: f64,
    /// Fraction with `m - 0.1 < y / z < m + 0.1`.
    pub success_band: f64,
    /// Samples with `z == 0`, excluded from the ratio fractions.
    pub n_zero_truth: usize,
}

/// Scores `model` on `set`, whose labels must be true oracle values.
pub fn evaluate(model: &MlpModel, set: &Dataset, m: f64) -> Result<Metrics> {
    if set.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let y = model.predict(&set.points());
    Ok(metrics_from(&y, &set.targets(), m))
}

pub fn metrics_from(y: &[f64], z: &[f64], m: f64) -> Metrics {
    let n = y.len();
    let (mut se, mut ae) = (0.0, 0.0);
    let (mut under, mut over, mut equal, mut band, mut zero) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (&y, &z) in y.iter().zip(z) {
        let r = y - z;
        se += r * r;
        ae += r.abs();
        if z == 0.0 {
            zero += 1;
            continue;
        }
        let ratio = y / z;
        if ratio < 1.0 {
            under += 1;
        } else if ratio > 1.0 {
            over += 1;
        } else {
            equal += 1;
        }
        if ratio > m - 0.1 && ratio < m + 0.1 {
            band += 1;
        }
    }
    let rated = (n - zero).max(1) as f64;
    Metrics {
        n,
        mse: se / n as f64,
        mae: ae / n as f64,
        frac_under: under as f64 / rated,
        frac_over: over as f64 / rated,
        frac_equal: equal as f64 / rated,
        success_band: band as f64 / rated,
        n_zero_truth: zero,
    }
}
