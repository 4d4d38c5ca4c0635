//! Gradient ascent on the squared surrogate error `E(x) = (Y(x) - Z(x))^2`.
//!
//! `Y` is differentiated exactly by backprop; the oracle `Z` by central finite
//! differences. Ascents are restarted in rounds from the worst maximizers of the
//! previous round with smaller steps and tighter tolerances, and the final set
//! is deduplicated.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TARGET_SCALE};
use crate::error::{Error, Result};
use crate::features::{Bounds, NormalizedPoint, DIM};
use crate::oracle::Oracle;
use crate::regressor::MlpModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub initial_step: f64,
    /// Stop once an accepted step improves `E` by less than this.
    pub stop_tol: f64,
    pub max_iters: usize,
    /// Finite-difference step for the oracle gradient, in normalized units.
    pub fd_step: f64,
    /// Step halvings tried before giving up on an iteration.
    pub max_halvings: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            stop_tol: 1e-8,
            max_iters: 200,
            fd_step: 1e-4,
            max_halvings: 20,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.fd_step > 0.0 && self.stop_tol > 0.0) {
            return Err(Error::Config(
                "ascent initial_step, fd_step and stop_tol must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuckooConfig {
    pub rounds: usize,
    /// Multiplies the initial step after each round.
    pub step_shrink: f64,
    /// Multiplies the stopping tolerance after each round.
    pub tol_shrink: f64,
    /// Fraction of a round's maximizers (largest absolute error first) that
    /// seed the next round.
    pub retain_top_fraction: f64,
    /// Max-norm radius within which maximizers count as identical.
    pub dedup_tol: f64,
    pub ascent: AscentConfig,
}

impl Default for CuckooConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            step_shrink: 0.1,
            tol_shrink: 0.1,
            retain_top_fraction: 0.25,
            dedup_tol: 1e-3,
            ascent: AscentConfig::default(),
        }
    }
}

impl CuckooConfig {
    pub fn validate(&self) -> Result<()> {
        self.ascent.validate()?;
        if self.rounds == 0 {
            return Err(Error::Config("cuckoo rounds must be >= 1".into()));
        }
        for (name, f) in [
            ("step_shrink", self.step_shrink),
            ("tol_shrink", self.tol_shrink),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        if !(self.retain_top_fraction > 0.0 && self.retain_top_fraction <= 1.0) {
            return Err(Error::Config("retain_top_fraction must lie in (0, 1]".into()));
        }
        if !(self.dedup_tol > 0.0) {
            return Err(Error::Config("dedup_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Where an ascent started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedOrigin {
    /// Index into the training set.
    Training(usize),
    /// Index of a random valid draw.
    Random(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub point: NormalizedPoint,
    pub origin: SeedOrigin,
    /// Restart round that produced this seed (0 for the initial seeds).
    pub round: usize,
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            SeedOrigin::Training(i) => write!(f, "train:{i}")?,
            SeedOrigin::Random(i) => write!(f, "random:{i}")?,
        }
        if self.round > 0 {
            write!(f, "/r{}", self.round)?;
        }
        Ok(())
    }
}

/// End point of one ascent. Values are in target units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMaximizer {
    pub point: NormalizedPoint,
    pub model_value: f64,
    pub oracle_value: f64,
    pub abs_error: f64,
    pub sq_error: f64,
    pub seed: Seed,
    pub seed_sq_error: f64,
    /// Accepted ascent steps.
    pub iterations: usize,
    pub oracle_calls: OracleCalls,
}

/// Oracle evaluations spent by an ascent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCalls {
    /// Point evaluations of `Z` (the seed and every trial step).
    pub values: u64,
    /// Gradient evaluations; each costs `2 * DIM` oracle calls.
    pub gradients: u64,
}

impl OracleCalls {
    pub fn total(&self) -> u64 {
        self.values + 2 * DIM as u64 * self.gradients
    }

    fn add(&mut self, other: &OracleCalls) {
        self.values += other.values;
        self.gradients += other.gradients;
    }
}

/// `Y`, `Z` (target units) and the squared error at a point.
fn error_at<O: Oracle + ?Sized>(
    model: &MlpModel,
    oracle: &O,
    p: &NormalizedPoint,
) -> Result<(f64, f64, f64)> {
    let y = model.forward(p);
    let z = oracle.price(p)? * TARGET_SCALE;
    Ok((y, z, (y - z) * (y - z)))
}

/// Central-difference oracle gradient (target units). Probe points are
/// clamped to the unit cube, which makes the difference one-sided at a face.
/// Always spends exactly `2 * DIM` oracle calls.
pub fn oracle_gradient<O: Oracle + ?Sized>(
    oracle: &O,
    p: &NormalizedPoint,
    h: f64,
) -> Result<[f64; DIM]> {
    let mut grad = [0.0; DIM];
    for i in 0..DIM {
        let mut hi = *p;
        let mut lo = *p;
        hi.0[i] = (p.0[i] + h).min(1.0);
        lo.0[i] = (p.0[i] - h).max(0.0);
        let span = hi.0[i] - lo.0[i];
        let zh = oracle.price(&hi)?;
        let zl = oracle.price(&lo)?;
        grad[i] = if span > 0.0 {
            (zh - zl) * TARGET_SCALE / span
        } else {
            0.0
        };
    }
    Ok(grad)
}

/// `grad E = 2 (Y - Z) (grad Y - grad Z)` at `p`.
pub fn error_gradient<O: Oracle + ?Sized>(
    model: &MlpModel,
    oracle: &O,
    p: &NormalizedPoint,
    h: f64,
) -> Result<[f64; DIM]> {
    let z = oracle.price(p)? * TARGET_SCALE;
    let (y, gy) = model.value_and_input_gradient(p);
    let gz = oracle_gradient(oracle, p, h)?;
    Ok(std::array::from_fn(|i| 2.0 * (y - z) * (gy[i] - gz[i])))
}

/// Gradient-ascent trace, kept for diagnostics and tests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AscentTrace {
    pub sq_errors: Vec<f64>,
    pub steps: Vec<f64>,
}

/// Runs projected gradient ascent on `E` from `seed`.
///
/// Step sizes never increase: a trial step that fails to raise `E` halves the
/// step (up to `max_halvings` times) and the smaller step carries over to later
/// iterations. Accepted iterates therefore have non-decreasing error.
pub fn ascend<O: Oracle + ?Sized>(
    model: &MlpModel,
    oracle: &O,
    bounds: &Bounds,
    seed: Seed,
    cfg: &AscentConfig,
) -> Result<LocalMaximizer> {
    ascend_traced(model, oracle, bounds, seed, cfg).map(|(m, _)| m)
}

pub fn ascend_traced<O: Oracle + ?Sized>(
    model: &MlpModel,
    oracle: &O,
    bounds: &Bounds,
    seed: Seed,
    cfg: &AscentConfig,
) -> Result<(LocalMaximizer, AscentTrace)> {
    let mut calls = OracleCalls::default();
    let mut x = bounds.project_valid(&seed.point);
    let (mut y, mut z, mut e) = error_at(model, oracle, &x)?;
    calls.values += 1;
    let seed_sq_error = e;
    let mut step = cfg.initial_step;
    let mut iterations = 0;
    let mut trace = AscentTrace {
        sq_errors: vec![e],
        steps: Vec::new(),
    };

    for _ in 0..cfg.max_iters {
        let (_, gy) = model.value_and_input_gradient(&x);
        let gz = oracle_gradient(oracle, &x, cfg.fd_step)?;
        calls.gradients += 1;
        let grad: [f64; DIM] = std::array::from_fn(|i| 2.0 * (y - z) * (gy[i] - gz[i]));
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }

        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = bounds.project_valid(&NormalizedPoint(std::array::from_fn(|i| {
                x.0[i] + step * grad[i]
            })));
            if trial == x {
                break;
            }
            let (ty, tz, te) = error_at(model, oracle, &trial)?;
            calls.values += 1;
            if te > e {
                accepted = Some((trial, ty, tz, te));
                break;
            }
            step *= 0.5;
        }
        let Some((nx, ny, nz, ne)) = accepted else {
            break;
        };
        let improvement = ne - e;
        x = nx;
        y = ny;
        z = nz;
        e = ne;
        iterations += 1;
        trace.sq_errors.push(e);
        trace.steps.push(step);
        if improvement < cfg.stop_tol {
            break;
        }
    }

    Ok((
        LocalMaximizer {
            point: x,
            model_value: y,
            oracle_value: z,
            abs_error: (y - z).abs(),
            sq_error: e,
            seed,
            seed_sq_error,
            iterations,
            oracle_calls: calls,
        },
        trace,
    ))
}

/// How to choose ascent starting points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SeedMode {
    /// Training samples with the largest `|Y(x) - label(x)|`, using stored
    /// labels only (no oracle calls).
    WorstError { fraction: f64 },
    /// Uniform valid draws, for a defender without the training set.
    Random { n: usize, seed: u64 },
}

pub fn select_seeds(
    dataset: &Dataset,
    model: &MlpModel,
    bounds: &Bounds,
    mode: SeedMode,
) -> Result<Vec<Seed>> {
    match mode {
        SeedMode::WorstError { fraction } => {
            if dataset.is_empty() {
                return Err(Error::Empty("seed dataset"));
            }
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Config(format!(
                    "seed fraction must lie in (0, 1], got {fraction}"
                )));
            }
            let preds = model.predict(&dataset.points());
            let mut ranked: Vec<(usize, f64)> = preds
                .iter()
                .zip(dataset.iter())
                .map(|(y, s)| (y - s.target()).abs())
                .enumerate()
                .collect();
            // Stable: ties keep dataset order.
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            let n = ((fraction * dataset.len() as f64).ceil() as usize).clamp(1, dataset.len());
            Ok(ranked[..n]
                .iter()
                .map(|&(i, _)| Seed {
                    point: dataset.samples[i].point,
                    origin: SeedOrigin::Training(i),
                    round: 0,
                })
                .collect())
        }
        SeedMode::Random { n, seed } => {
            if n == 0 {
                return Err(Error::Config("random seed count must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|i| Seed {
                    point: bounds.sample_valid(&mut rng),
                    origin: SeedOrigin::Random(i),
                    round: 0,
                })
                .collect())
        }
    }
}

/// Orders by descending squared error, then lexicographically by point.
fn rank_order(a: &LocalMaximizer, b: &LocalMaximizer) -> std::cmp::Ordering {
    b.sq_error.total_cmp(&a.sq_error).then_with(|| {
        a.point
            .0
            .iter()
            .zip(b.point.0.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Greedy deduplication: walking maximizers from largest error down, keep a
/// point only if no kept point lies within `tol` in max-norm.
pub fn dedup(maximizers: &[LocalMaximizer], tol: f64) -> Vec<LocalMaximizer> {
    let mut sorted = maximizers.to_vec();
    sorted.sort_by(rank_order);
    let mut kept: Vec<LocalMaximizer> = Vec::new();
    for m in sorted {
        if kept
            .iter()
            .all(|k| k.point.max_norm_distance(&m.point) > tol)
        {
            kept.push(m);
        }
    }
    kept
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchOutcome {
    /// Deduplicated maximizers, largest error first.
    pub maximizers: Vec<LocalMaximizer>,
    /// Maximizers before deduplication, across all rounds.
    pub raw_count: usize,
    /// Ascents run in each round.
    pub seeds_per_round: Vec<usize>,
    pub oracle_calls: OracleCalls,
}

/// Multi-round restarted ascent.
///
/// Round 1 ascends from every seed. Each later round restarts from the
/// `retain_top_fraction` largest-error maximizers of the previous round with
/// the step and tolerance shrunk once more. Maximizers from all rounds are
/// pooled and deduplicated.
pub fn cuckoo_search<O: Oracle + ?Sized>(
    model: &MlpModel,
    oracle: &O,
    bounds: &Bounds,
    seeds: &[Seed],
    cfg: &CuckooConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Empty("ascent seeds"));
    }
    let mut outcome = SearchOutcome::default();
    let mut pool: Vec<LocalMaximizer> = Vec::new();
    let mut current: Vec<Seed> = seeds.to_vec();
    let mut ascent = cfg.ascent.clone();

    for round in 0..cfg.rounds {
        let mut found = current
            .par_iter()
            .map(|s| ascend(model, oracle, bounds, *s, &ascent))
            .collect::<Result<Vec<_>>>()?;
        outcome.seeds_per_round.push(current.len());
        for m in &found {
            outcome.oracle_calls.add(&m.oracle_calls);
        }
        found.sort_by(rank_order);

        if round + 1 < cfg.rounds {
            let keep = ((cfg.retain_top_fraction * found.len() as f64).ceil() as usize)
                .clamp(1, found.len());
            current = found[..keep]
                .iter()
                .map(|m| Seed {
                    point: m.point,
                    origin: m.seed.origin,
                    round: round + 1,
                })
                .collect();
            ascent.initial_step *= cfg.step_shrink;
            ascent.stop_tol *= cfg.tol_shrink;
        }
        pool.extend(found);
    }
    outcome.raw_count = pool.len();
    outcome.maximizers = dedup(&pool, cfg.dedup_tol);
    Ok(outcome)
}

pub const MAXIMIZER_HEADER: &str = "b,k,t,v,r,y,z,abs_err,iters,seed_origin";

pub fn write_maximizers_csv<W: Write>(maximizers: &[LocalMaximizer], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(MAXIMIZER_HEADER.split(','))?;
    for m in maximizers {
        let mut row: Vec<String> = m.point.0.iter().map(|c| c.to_string()).collect();
        row.push(m.model_value.to_string());
        row.push(m.oracle_value.to_string());
        row.push(m.abs_error.to_string());
        row.push(m.iterations.to_string());
        row.push(m.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LabeledSample, Provenance};
    use crate::oracle::{BarrierOracle, CountingOracle};
    use crate::regressor::Layer;
    use ndarray::array;

    /// Oracle defined directly on normalized coordinates, in raw price units.
    struct FnOracle<F>(F);
    impl<F: Fn(&NormalizedPoint) -> f64 + Sync> Oracle for FnOracle<F> {
        fn price(&self, p: &NormalizedPoint) -> Result<f64> {
            Ok((self.0)(p))
        }
    }

    fn linear(w: [f64; 5], b: f64) -> MlpModel {
        MlpModel::from_layers(vec![Layer {
            weights: ndarray::Array2::from_shape_vec((5, 1), w.to_vec()).unwrap(),
            bias: array![b],
        }])
        .unwrap()
    }

    fn seed_at(p: NormalizedPoint) -> Seed {
        Seed {
            point: p,
            origin: SeedOrigin::Random(0),
            round: 0,
        }
    }

    #[test]
    fn error_gradient_vanishes_when_model_matches_oracle() {
        // Y(x) = 0.3 t + 0.1, Z matches in target units.
        let model = linear([0.0, 0.0, 0.3, 0.0, 0.0], 0.1);
        let oracle = FnOracle(|p: &NormalizedPoint| (0.3 * p.t() + 0.1) / TARGET_SCALE);
        let p = NormalizedPoint::new(0.2, 0.6, 0.4, 0.5, 0.5);
        let g = error_gradient(&model, &oracle, &p, 1e-4).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
        let bounds = Bounds::default();
        let m = ascend(&model, &oracle, &bounds, seed_at(p), &AscentConfig::default()).unwrap();
        assert_eq!(m.point, p);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn error_gradient_matches_closed_form_fixture() {
        // Y = 0.5 t (linear), Z = t^2 in target units:
        // E = (0.5 t - t^2)^2, dE/dt = 2 (0.5 t - t^2)(0.5 - 2 t).
        let model = linear([0.0, 0.0, 0.5, 0.0, 0.0], 0.0);
        let oracle = FnOracle(|p: &NormalizedPoint| p.t() * p.t() / TARGET_SCALE);
        for t in [0.1, 0.3, 0.55, 0.8] {
            let p = NormalizedPoint::new(0.2, 0.6, t, 0.5, 0.5);
            let g = error_gradient(&model, &oracle, &p, 1e-4).unwrap();
            let expect = 2.0 * (0.5 * t - t * t) * (0.5 - 2.0 * t);
            assert!((g[2] - expect).abs() < 1e-6, "t={t}: {} vs {expect}", g[2]);
            for i in [0, 1, 3, 4] {
                assert!(g[i].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ascent_finds_analytic_maximizer() {
        // Y = 0, Z = sqrt(c - (t - 0.7)^2) so E = c - (t - 0.7)^2.
        let model = MlpModel::zeros(&[5, 1]).unwrap();
        let c = 1.0;
        let oracle = FnOracle(move |p: &NormalizedPoint| {
            (c - (p.t() - 0.7).powi(2)).sqrt() / TARGET_SCALE
        });
        let bounds = Bounds::default();
        let cfg = AscentConfig {
            initial_step: 0.4,
            stop_tol: 1e-14,
            max_iters: 500,
            ..AscentConfig::default()
        };
        for t0 in [0.05, 0.3, 0.69, 0.95] {
            let p = NormalizedPoint::new(0.2, 0.6, t0, 0.5, 0.5);
            let (m, trace) = ascend_traced(&model, &oracle, &bounds, seed_at(p), &cfg).unwrap();
            assert!((m.point.t() - 0.7).abs() < 1e-3, "from {t0}: {}", m.point.t());
            assert!(m.sq_error >= m.seed_sq_error);
            for w in trace.sq_errors.windows(2) {
                assert!(w[1] >= w[0]);
            }
            for w in trace.steps.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn oracle_calls_are_accounted_exactly() {
        let bounds = Bounds::default();
        let oracle = CountingOracle::new(BarrierOracle::new(bounds));
        let model = MlpModel::init(&[5, 8, 1], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seeds: Vec<Seed> = (0..6)
            .map(|i| Seed {
                point: bounds.sample_valid(&mut rng),
                origin: SeedOrigin::Random(i),
                round: 0,
            })
            .collect();
        let cfg = CuckooConfig {
            ascent: AscentConfig {
                max_iters: 15,
                ..AscentConfig::default()
            },
            ..CuckooConfig::default()
        };
        let out = cuckoo_search(&model, &oracle, &bounds, &seeds, &cfg).unwrap();
        assert_eq!(oracle.calls(), out.oracle_calls.total());
        assert_eq!(out.seeds_per_round, vec![6, 2, 1]);
        assert_eq!(out.raw_count, 9);
    }

    #[test]
    fn single_round_is_plain_multistart() {
        let bounds = Bounds::default();
        let oracle = BarrierOracle::new(bounds);
        let model = MlpModel::init(&[5, 8, 1], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let seeds: Vec<Seed> = (0..5)
            .map(|i| Seed {
                point: bounds.sample_valid(&mut rng),
                origin: SeedOrigin::Random(i),
                round: 0,
            })
            .collect();
        let cfg = CuckooConfig {
            rounds: 1,
            ..CuckooConfig::default()
        };
        let out = cuckoo_search(&model, &oracle, &bounds, &seeds, &cfg).unwrap();
        let plain: Vec<_> = seeds
            .iter()
            .map(|s| ascend(&model, &oracle, &bounds, *s, &cfg.ascent).unwrap())
            .collect();
        assert_eq!(out.maximizers, dedup(&plain, cfg.dedup_tol));
    }

    fn fake(p: [f64; 5], e: f64) -> LocalMaximizer {
        LocalMaximizer {
            point: NormalizedPoint(p),
            model_value: 0.0,
            oracle_value: 0.0,
            abs_error: e.sqrt(),
            sq_error: e,
            seed: seed_at(NormalizedPoint(p)),
            seed_sq_error: 0.0,
            iterations: 0,
            oracle_calls: OracleCalls::default(),
        }
    }

    #[test]
    fn dedup_collapses_copies_and_keeps_distinct() {
        let a = fake([0.1, 0.2, 0.3, 0.4, 0.5], 1.0);
        let out = dedup(&[a, a], 1e-3);
        assert_eq!(out.len(), 1);
        let near = fake([0.1005, 0.2, 0.3, 0.4, 0.5], 2.0);
        let far = fake([0.5, 0.2, 0.3, 0.4, 0.5], 0.5);
        let out = dedup(&[a, near, far], 1e-3);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], near);
        assert_eq!(out[1], far);
    }

    #[test]
    fn worst_error_seeds_use_stored_labels() {
        let model = MlpModel::zeros(&[5, 1]).unwrap();
        let d = Dataset::new(
            [3.0, 50.0, 1.0, 20.0]
                .iter()
                .enumerate()
                .map(|(i, l)| LabeledSample {
                    point: NormalizedPoint([0.1 * i as f64; 5]),
                    label: *l,
                    provenance: Provenance::CleanBase,
                })
                .collect(),
        );
        let bounds = Bounds::default();
        let seeds = select_seeds(&d, &model, &bounds, SeedMode::WorstError { fraction: 0.5 }).unwrap();
        let idx: Vec<_> = seeds.iter().map(|s| s.origin).collect();
        assert_eq!(idx, vec![SeedOrigin::Training(1), SeedOrigin::Training(3)]);
        let all = select_seeds(&d, &model, &bounds, SeedMode::WorstError { fraction: 1.0 }).unwrap();
        assert_eq!(all.len(), 4);
        assert!(select_seeds(&Dataset::default(), &model, &bounds, SeedMode::WorstError { fraction: 0.1 }).is_err());
        let random = select_seeds(&d, &model, &bounds, SeedMode::Random { n: 30, seed: 1 }).unwrap();
        assert_eq!(random.len(), 30);
        assert!(random.iter().all(|s| bounds.is_valid(&s.point)));
    }

    #[test]
    fn maximizer_csv_has_documented_header() {
        let mut buf = Vec::new();
        let mut m = fake([0.1, 0.2, 0.3, 0.4, 0.5], 1.0);
        m.seed.origin = SeedOrigin::Training(12);
        m.seed.round = 2;
        write_maximizers_csv(&[m], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(MAXIMIZER_HEADER));
        assert!(lines.next().unwrap().ends_with(",train:12/r2"));
    }
}
