//! Detection of poisoned training data via local error maximizers that sit
//! among unusually many training samples, followed by weighted retraining.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{label_points, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::features::{Bounds, NormalizedPoint, DIM};
use crate::oracle::Oracle;
use crate::regressor::{evaluate, train, Metrics, MlpModel, TrainConfig, TrainHistory};
use crate::search::{cuckoo_search, select_seeds, CuckooConfig, LocalMaximizer, OracleCalls, SeedMode};

/// Training-set size at which `count_min_reference` applies unscaled.
pub const REFERENCE_SET_SIZE: usize = 210_000;

/// Number of `points` strictly within Euclidean `radius` of `x`.
pub fn count_proximal(x: &NormalizedPoint, points: &[NormalizedPoint], radius: f64) -> usize {
    let r2 = radius * radius;
    points.iter().filter(|p| p.distance_sq(x) < r2).count()
}

/// Indices of `points` strictly within `radius` of `x`, ascending.
pub fn proximal_ids(x: &NormalizedPoint, points: &[NormalizedPoint], radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance_sq(x) < r2)
        .map(|(i, _)| i)
        .collect()
}

/// Uniform grid over the unit cube with cell side `radius`; a radius query
/// only inspects the 3^5 cells around the query.
#[derive(Clone, Debug)]
pub struct GridIndex {
    radius: f64,
    cells: HashMap<[i64; DIM], Vec<usize>>,
    points: Vec<NormalizedPoint>,
}

impl GridIndex {
    pub fn new(points: &[NormalizedPoint], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("radius must be > 0, got {radius}")));
        }
        let mut cells: HashMap<[i64; DIM], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, radius)).or_default().push(i);
        }
        Ok(Self {
            radius,
            cells,
            points: points.to_vec(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Same result as [`proximal_ids`] at the index radius.
    pub fn query(&self, x: &NormalizedPoint) -> Vec<usize> {
        let r2 = self.radius * self.radius;
        let center = cell_of(x, self.radius);
        let mut out = Vec::new();
        for offset in 0..3usize.pow(DIM as u32) {
            let mut key = center;
            let mut o = offset;
            for c in key.iter_mut() {
                *c += (o % 3) as i64 - 1;
                o /= 3;
            }
            if let Some(ids) = self.cells.get(&key) {
                out.extend(
                    ids.iter()
                        .copied()
                        .filter(|&i| self.points[i].distance_sq(x) < r2),
                );
            }
        }
        out.sort_unstable();
        out
    }

    pub fn count(&self, x: &NormalizedPoint) -> usize {
        self.query(x).len()
    }
}

fn cell_of(p: &NormalizedPoint, radius: f64) -> [i64; DIM] {
    p.0.map(|c| (c / radius).floor() as i64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximityProfile {
    pub maximizer: LocalMaximizer,
    pub proximal_count: usize,
    /// Share of the population (in percent) with absolute error at most this one's.
    pub error_percentile: f64,
    pub count_percentile: f64,
}

/// Percent of `values` that are `<= v`.
fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    values
        .iter()
        .map(|v| 100.0 * sorted.partition_point(|s| s <= v) as f64 / n)
        .collect()
}

/// Proximal counts plus population percentile ranks of error and count.
pub fn profile_maximizers(
    maximizers: &[LocalMaximizer],
    index: &GridIndex,
) -> Result<Vec<ProximityProfile>> {
    if maximizers.is_empty() {
        return Err(Error::Empty("maximizers to profile"));
    }
    let counts: Vec<usize> = maximizers.par_iter().map(|m| index.count(&m.point)).collect();
    let err_pct = percentile_ranks(&maximizers.iter().map(|m| m.abs_error).collect::<Vec<_>>());
    let cnt_pct = percentile_ranks(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    Ok(maximizers
        .iter()
        .zip(counts)
        .zip(err_pct.into_iter().zip(cnt_pct))
        .map(|((m, c), (e, p))| ProximityProfile {
            maximizer: *m,
            proximal_count: c,
            error_percentile: e,
            count_percentile: p,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub radius: f64,
    pub error_pct_min: f64,
    /// Proximal-count threshold at [`REFERENCE_SET_SIZE`] training samples;
    /// scaled linearly with the actual set size.
    pub count_min_reference: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            radius: 0.1,
            error_pct_min: 95.0,
            count_min_reference: 500.0,
        }
    }
}

impl DetectConfig {
    pub fn count_min(&self, n_training: usize) -> f64 {
        self.count_min_reference * n_training as f64 / REFERENCE_SET_SIZE as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Indices into the profile list.
    pub flagged: Vec<usize>,
    /// Training-set indices proximal to any flagged maximizer.
    pub suspects: BTreeSet<usize>,
}

/// Flags profiles at or above both thresholds and collects the training
/// samples near them. Only sample positions are used.
pub fn detect_suspicious(
    profiles: &[ProximityProfile],
    index: &GridIndex,
    error_pct_min: f64,
    count_min: f64,
) -> Detection {
    let flagged: Vec<usize> = profiles
        .iter()
        .enumerate()
        .filter(|(_, p)| p.error_percentile >= error_pct_min && p.proximal_count as f64 >= count_min)
        .map(|(i, _)| i)
        .collect();
    let suspects = flagged
        .iter()
        .flat_map(|&i| index.query(&profiles[i].maximizer.point))
        .collect();
    Detection { flagged, suspects }
}

/// What the suspect set caught, by provenance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub mislabeled_caught: usize,
    pub mislabeled_total: usize,
    pub localizing_caught: usize,
    pub localizing_total: usize,
    /// Everything not planted by the attacker.
    pub clean_caught: usize,
    pub clean_total: usize,
    pub false_positive_rate: f64,
}

impl Breakdown {
    pub fn new(dataset: &Dataset, suspects: &BTreeSet<usize>) -> Self {
        let mut b = Breakdown::default();
        for (i, s) in dataset.iter().enumerate() {
            let hit = suspects.contains(&i) as usize;
            match s.provenance {
                Provenance::AttackMislabeled => {
                    b.mislabeled_total += 1;
                    b.mislabeled_caught += hit;
                }
                Provenance::AttackLocalizing => {
                    b.localizing_total += 1;
                    b.localizing_caught += hit;
                }
                _ => {
                    b.clean_total += 1;
                    b.clean_caught += hit;
                }
            }
        }
        b.false_positive_rate = if b.clean_total == 0 {
            0.0
        } else {
            b.clean_caught as f64 / b.clean_total as f64
        };
        b
    }

    pub fn mislabeled_recall(&self) -> f64 {
        if self.mislabeled_total == 0 {
            0.0
        } else {
            self.mislabeled_caught as f64 / self.mislabeled_total as f64
        }
    }
}

/// Clean-test and attack-region metrics of one model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub test: Metrics,
    pub attack: Metrics,
}

impl EvalPair {
    pub fn of(model: &MlpModel, test: &Dataset, attack: &Dataset, m: f64) -> Result<Self> {
        Ok(Self {
            test: evaluate(model, test, m)?,
            attack: evaluate(model, attack, m)?,
        })
    }
}

/// Trains `init` on `alpha * MSE(base \ remove) + (1 - alpha) * MSE(maximizers)`.
pub fn retrain_weighted(
    init: &MlpModel,
    base: &Dataset,
    maximizer_set: &Dataset,
    alpha: f64,
    remove: Option<&BTreeSet<usize>>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    let primary = match remove {
        Some(q) if !q.is_empty() => base.without(&q.iter().copied().collect::<HashSet<_>>()),
        _ => base.clone(),
    };
    let cfg = TrainConfig {
        alpha,
        ..cfg.clone()
    };
    train(init, &primary, maximizer_set, &cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub removal: bool,
    pub eval: EvalPair,
}

pub const SWEEP_HEADER: &str =
    "alpha,removal,test_mse,test_mae,attack_mse,attack_mae,attack_success";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(SWEEP_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.removal.to_string(),
            r.eval.test.mse.to_string(),
            r.eval.test.mae.to_string(),
            r.eval.attack.mse.to_string(),
            r.eval.attack.mae.to_string(),
            r.eval.attack.success_band.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";

/// Histogram of proximal counts with `n_bins` equal bins over `[0, max]`.
pub fn count_histogram(profiles: &[ProximityProfile], n_bins: usize) -> Vec<(f64, f64, usize)> {
    let n_bins = n_bins.max(1);
    let max = profiles.iter().map(|p| p.proximal_count).max().unwrap_or(0).max(1) as f64;
    let width = max / n_bins as f64;
    let mut bins = vec![0usize; n_bins];
    for p in profiles {
        let i = ((p.proximal_count as f64 / width) as usize).min(n_bins - 1);
        bins[i] += 1;
    }
    bins.into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect()
}

pub fn write_histogram_csv<W: Write>(bins: &[(f64, f64, usize)], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(HISTOGRAM_HEADER.split(','))?;
    for (lo, hi, c) in bins {
        w.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub radius: f64,
    pub error_pct_min: f64,
    pub count_min: f64,
    /// Proximal-count histogram as `(bin_lo, bin_hi, count)`.
    pub histogram: Vec<(f64, f64, usize)>,
    pub profiles: Vec<ProximityProfile>,
    pub flagged: Vec<usize>,
    pub suspects: Vec<usize>,
    pub breakdown: Breakdown,
    pub search_oracle_calls: OracleCalls,
    pub before: Option<EvalPair>,
    /// Best-alpha retrain with the suspects removed.
    pub after: Option<SweepRow>,
}

impl DefenseReport {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

pub struct RoundOutcome {
    pub model: MlpModel,
    pub dataset: Dataset,
    pub new_maximizers: usize,
    /// Search calls plus labeling calls.
    pub oracle_calls: u64,
}

#[allow(clippy::too_many_arguments)]
/// One repair round: search from the model's worst training samples, label
/// the maximizers with the oracle and retrain from the current model.
///
/// Rows already tagged `al-maximizer` form the secondary set together with
/// the new ones; all other rows are the primary set.
pub fn active_learning_round<O: Oracle + ?Sized>(
    model: &MlpModel,
    dataset: &Dataset,
    oracle: &O,
    bounds: &Bounds,
    seeds: SeedMode,
    search: &CuckooConfig,
    alpha: f64,
    train_cfg: &TrainConfig,
) -> Result<RoundOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let seed_list = select_seeds(dataset, model, bounds, seeds)?;
    let found = cuckoo_search(model, oracle, bounds, &seed_list, search)?;
    let points: Vec<NormalizedPoint> = found.maximizers.iter().map(|m| m.point).collect();
    let labeled = label_points(&points, oracle, Provenance::AlMaximizer)?;

    let mut primary = Dataset::default();
    let mut secondary = Dataset::default();
    for s in dataset.iter() {
        if s.provenance == Provenance::AlMaximizer {
            secondary.samples.push(*s);
        } else {
            primary.samples.push(*s);
        }
    }
    secondary.extend(&labeled);
    let (model, _) = retrain_weighted(model, &primary, &secondary, alpha, None, train_cfg)?;
    let mut augmented = dataset.clone();
    augmented.extend(&labeled);
    Ok(RoundOutcome {
        model,
        dataset: augmented,
        new_maximizers: labeled.len(),
        oracle_calls: found.oracle_calls.total() + labeled.len() as u64,
    })
}
