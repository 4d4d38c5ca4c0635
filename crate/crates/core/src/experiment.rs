//! End-to-end pipelines driven by an [`ExperimentConfig`]: attack grids,
//! the defense with its retraining sweep, and oracle verification.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{purpose, ExperimentConfig};
use crate::dataset::{generate_dataset, label_points, Dataset, Provenance};
use crate::defense::{
    count_histogram, detect_suspicious, profile_maximizers, retrain_weighted, Breakdown,
    DefenseReport, EvalPair, GridIndex, SweepRow,
};
use crate::error::{Error, Result};
use crate::features::{Bounds, NormalizedPoint};
use crate::oracle::{
    price_down_and_out_put, price_monte_carlo, BarrierOracle, Monitoring, RawMarketPoint,
};
use crate::poisoning::{build_attack_sets, derive_seed, AttackSets};
use crate::regressor::{evaluate, train, MlpModel, TrainHistory};
use crate::search::{cuckoo_search, select_seeds, LocalMaximizer, SeedMode};

/// One row of the attack grid, one cell of the (n_attack, n_clean) sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n_attack: usize,
    pub n_clean: usize,
    pub train_mse: f64,
    pub train_mae: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    pub test_under: f64,
    pub test_over: f64,
    pub attack_under: f64,
    pub attack_over: f64,
    pub attack_success: f64,
}

pub const GRID_HEADER: &str = "n_attack,n_clean,train_mse,train_mae,test_mse,test_mae,\
test_under,test_over,attack_under,attack_over,attack_success";

pub fn write_grid_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(writer);
    w.write_record(GRID_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: std::io::Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != GRID_HEADER {
        return Err(Error::Format {
            what: "grid csv",
            detail: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Everything produced by one grid cell.
#[derive(Clone, Debug)]
pub struct Cell {
    pub row: ResultRow,
    pub model: MlpModel,
    pub history: TrainHistory,
    pub training: Dataset,
    pub attack: AttackSets,
}

#[derive(Clone, Debug, Default)]
pub struct GridOutcome {
    pub rows: Vec<ResultRow>,
    /// Cells that failed, with the error message.
    pub failures: Vec<((usize, usize), String)>,
}

#[derive(Clone, Debug)]
pub struct DetectionRun {
    /// Report without the retraining metrics.
    pub report: DefenseReport,
    pub maximizers: Vec<LocalMaximizer>,
}

#[derive(Clone, Debug)]
pub struct DefenseOutcome {
    pub report: DefenseReport,
    pub sweep: Vec<SweepRow>,
    pub maximizers: Vec<LocalMaximizer>,
}

/// Shared state for running stages of one configuration.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub bounds: Bounds,
    pub oracle: BarrierOracle,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let bounds = cfg.bounds()?;
        Ok(Self {
            cfg,
            bounds,
            oracle: BarrierOracle::new(bounds),
        })
    }

    pub fn base_set(&self) -> Result<Dataset> {
        generate_dataset(
            self.cfg.n_base,
            self.cfg.seed_for(purpose::BASE),
            &self.bounds,
            &self.oracle,
        )
    }

    pub fn test_set(&self) -> Result<Dataset> {
        generate_dataset(
            self.cfg.n_test,
            self.cfg.seed_for(purpose::TEST),
            &self.bounds,
            &self.oracle,
        )
    }

    /// Poison for `(n_attack, n_clean)` plus the attack test set. The test
    /// set does not depend on the counts.
    pub fn attack_sets(&self, n_attack: usize, n_clean: usize) -> Result<AttackSets> {
        build_attack_sets(
            &self.cfg.attack_config(n_attack, n_clean),
            self.cfg.n_attack_test,
            &self.oracle,
            self.cfg.seed_for(purpose::ATTACK),
        )
    }

    /// The starting network shared by every training run of this config.
    pub fn init_model(&self) -> Result<MlpModel> {
        MlpModel::init(&self.cfg.widths, self.cfg.seed_for(purpose::MODEL))
    }

    pub fn train(&self, data: &Dataset) -> Result<(MlpModel, TrainHistory)> {
        let cfg = self.cfg.train_config(self.cfg.seed_for(purpose::SHUFFLE))?;
        train(&self.init_model()?, data, &Dataset::default(), &cfg)
    }

    /// Trains on `base` plus the poison for one cell and scores the result.
    pub fn run_cell(
        &self,
        base: &Dataset,
        test: &Dataset,
        n_attack: usize,
        n_clean: usize,
    ) -> Result<Cell> {
        let attack = self.attack_sets(n_attack, n_clean)?;
        let training = Dataset::concat(&[base, &attack.train_poison]);
        let (model, history) = self.train(&training)?;
        let m = self.cfg.attack_m;
        let tr = evaluate(&model, &training, m)?;
        let te = evaluate(&model, test, m)?;
        let at = evaluate(&model, &attack.attack_test, m)?;
        Ok(Cell {
            row: ResultRow {
                n_attack,
                n_clean,
                train_mse: tr.mse,
                train_mae: tr.mae,
                test_mse: te.mse,
                test_mae: te.mae,
                test_under: te.frac_under,
                test_over: te.frac_over,
                attack_under: at.frac_under,
                attack_over: at.frac_over,
                attack_success: at.success_band,
            },
            model,
            history,
            training,
            attack,
        })
    }

    /// Runs every configured cell in order. A failing cell is recorded and
    /// skipped.
    pub fn run_attack_grid(&self) -> Result<GridOutcome> {
        let base = self.base_set()?;
        let test = self.test_set()?;
        let mut out = GridOutcome::default();
        for &(n_attack, n_clean) in &self.cfg.grid {
            match self.run_cell(&base, &test, n_attack, n_clean) {
                Ok(cell) => out.rows.push(cell.row),
                Err(e) => out.failures.push(((n_attack, n_clean), e.to_string())),
            }
        }
        Ok(out)
    }

    /// Search and detection: seeds from the worst-fit training samples,
    /// restarted ascent, proximity profiles and the suspect set.
    pub fn detect(&self, model: &MlpModel, training: &Dataset) -> Result<DetectionRun> {
        let cfg = &self.cfg;
        let seeds = select_seeds(
            training,
            model,
            &self.bounds,
            SeedMode::WorstError {
                fraction: cfg.search_seed_fraction,
            },
        )?;
        let search = cuckoo_search(model, &self.oracle, &self.bounds, &seeds, &cfg.cuckoo_config())?;
        let detect = cfg.detect_config();
        let index = GridIndex::new(&training.points(), detect.radius)?;
        let profiles = profile_maximizers(&search.maximizers, &index)?;
        let count_min = detect.count_min(training.len());
        let detection = detect_suspicious(&profiles, &index, detect.error_pct_min, count_min);
        Ok(DetectionRun {
            report: DefenseReport {
                radius: detect.radius,
                error_pct_min: detect.error_pct_min,
                count_min,
                histogram: count_histogram(&profiles, cfg.defense_histogram_bins),
                breakdown: Breakdown::new(training, &detection.suspects),
                profiles,
                flagged: detection.flagged,
                suspects: detection.suspects.into_iter().collect(),
                search_oracle_calls: search.oracle_calls,
                before: None,
                after: None,
            },
            maximizers: search.maximizers,
        })
    }

    /// Labels the maximizers and retrains across the alpha sweep.
    ///
    /// Retraining starts from the same initial network as the original
    /// training. The `alpha = 1` rows reuse the metrics of `model` itself.
    pub fn repair(
        &self,
        model: &MlpModel,
        training: &Dataset,
        test: &Dataset,
        attack_test: &Dataset,
        run: DetectionRun,
    ) -> Result<DefenseOutcome> {
        let before = EvalPair::of(model, test, attack_test, self.cfg.attack_m)?;
        let points: Vec<NormalizedPoint> = run.maximizers.iter().map(|x| x.point).collect();
        let maximizer_set = label_points(&points, &self.oracle, Provenance::AlMaximizer)?;
        let suspects: BTreeSet<usize> = run.report.suspects.iter().copied().collect();
        let sweep = self.retrain_sweep(&before, training, &maximizer_set, &suspects, test, attack_test)?;

        // Best alpha below 1 by clean-test error of the removal sweep.
        let after = sweep
            .iter()
            .filter(|r| r.removal && r.alpha < 1.0)
            .min_by(|a, b| a.eval.test.mse.total_cmp(&b.eval.test.mse))
            .cloned();
        let mut report = run.report;
        report.before = Some(before);
        report.after = after;
        Ok(DefenseOutcome {
            report,
            sweep,
            maximizers: run.maximizers,
        })
    }

    /// [`Experiment::detect`] followed by [`Experiment::repair`].
    pub fn run_defense(
        &self,
        model: &MlpModel,
        training: &Dataset,
        test: &Dataset,
        attack_test: &Dataset,
    ) -> Result<DefenseOutcome> {
        let run = self.detect(model, training)?;
        self.repair(model, training, test, attack_test, run)
    }

    /// Rows for every alpha, first without removal, then with.
    pub fn retrain_sweep(
        &self,
        before: &EvalPair,
        training: &Dataset,
        maximizer_set: &Dataset,
        suspects: &BTreeSet<usize>,
        test: &Dataset,
        attack_test: &Dataset,
    ) -> Result<Vec<SweepRow>> {
        let init = self.init_model()?;
        let train_cfg = self.cfg.train_config(self.cfg.seed_for(purpose::SHUFFLE))?;
        let m = self.cfg.attack_m;
        let mut rows = Vec::new();
        let mut plain = Vec::new();
        for removal in [false, true] {
            for (i, &alpha) in self.cfg.defense_alphas.iter().enumerate() {
                let eval = if alpha >= 1.0 {
                    *before
                } else if removal && suspects.is_empty() {
                    plain[i]
                } else {
                    let remove = removal.then_some(suspects);
                    let (model, _) =
                        retrain_weighted(&init, training, maximizer_set, alpha, remove, &train_cfg)?;
                    EvalPair::of(&model, test, attack_test, m)?
                };
                if !removal {
                    plain.push(eval);
                }
                rows.push(SweepRow {
                    alpha,
                    removal,
                    eval,
                });
            }
        }
        Ok(rows)
    }
}

/// Closed form against Monte Carlo at one random valid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub barrier: f64,
    pub strike: f64,
    pub maturity: f64,
    pub volatility: f64,
    pub rate: f64,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    /// `(closed_form - monte_carlo) / std_error`; 0 when both agree exactly.
    pub z: f64,
}

pub const VERIFY_HEADER: &str =
    "barrier,strike,maturity,volatility,rate,closed_form,monte_carlo,std_error,z";

/// Prices `n_points` uniform valid points both ways, using Brownian-bridge
/// monitoring for the simulation.
pub fn verify_oracle(
    bounds: &Bounds,
    n_points: usize,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<VerifyRow>> {
    if n_points == 0 {
        return Err(Error::Config("verification needs at least one point".into()));
    }
    let points = crate::dataset::sample_sharded(n_points, seed, |rng| bounds.sample_valid(rng));
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let raw = bounds.denormalize(p);
            verify_point(&raw, n_paths, n_steps, derive_seed(seed, i as u64 + 1))
        })
        .collect()
}

pub fn verify_point(
    raw: &RawMarketPoint,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<VerifyRow> {
    let closed = price_down_and_out_put(raw)?;
    let mc = price_monte_carlo(raw, n_paths, n_steps, seed, Monitoring::BrownianBridge)?;
    let diff = closed - mc.estimate;
    let z = if diff == 0.0 {
        0.0
    } else if mc.std_error > 0.0 {
        diff / mc.std_error
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(VerifyRow {
        barrier: raw.barrier_pct,
        strike: raw.strike_pct,
        maturity: raw.maturity_years,
        volatility: raw.volatility,
        rate: raw.rate,
        closed_form: closed,
        monte_carlo: mc.estimate,
        std_error: mc.std_error,
        z,
    })
}

/// Share of rows with `|z| > 3`.
pub fn verify_failure_rate(rows: &[VerifyRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.z.abs() > 3.0).count() as f64 / rows.len() as f64
}

pub fn write_verify_csv<W: Write>(rows: &[VerifyRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(writer);
    w.write_record(VERIFY_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Region membership counts of maximizers: `(in core, in shell)`.
pub fn maximizers_in_region(cfg: &ExperimentConfig, maximizers: &[LocalMaximizer]) -> (usize, usize) {
    let region = cfg.attack_config(0, 0).region();
    maximizers.par_iter().fold(
        || (0, 0),
        |(c, s), m| {
            (
                c + region.in_core(&m.point) as usize,
                s + region.in_shell(&m.point) as usize,
            )
        },
    )
    .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}
