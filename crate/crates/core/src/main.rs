use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use backdoor_regression::config::{purpose, ExperimentConfig, Scale};
use backdoor_regression::dataset::Dataset;
use backdoor_regression::defense::{write_histogram_csv, write_sweep_csv};
use backdoor_regression::experiment::{
    maximizers_in_region, verify_failure_rate, verify_oracle, write_grid_csv, write_verify_csv,
    Experiment,
};
use backdoor_regression::regressor::MlpModel;
use backdoor_regression::report::{render_markdown, render_svgs, RunArtifacts};
use backdoor_regression::search::{cuckoo_search, select_seeds, write_maximizers_csv, SeedMode};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdlab", version, about = "Backdoor poisoning and defense experiments for regression surrogates")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file overriding the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "desk", value_parser = ["desk", "paper"])]
    scale: String,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the clean base, test, attack-test and poisoned training sets.
    Generate,
    /// Train the unpoisoned baseline.
    Train,
    /// Train on the poisoned set and score the attack.
    Attack,
    /// Search for local error maximizers of the poisoned model.
    Search,
    /// Detect suspects, then retrain across the alpha sweep.
    Defend,
    /// Run every (n_attack, n_clean) cell of the grid.
    Grid,
    /// Compare closed-form prices with Monte Carlo.
    VerifyOracle,
    /// Summarize the artifacts in the output directory.
    Report {
        /// Also render SVG charts.
        #[arg(long)]
        svg: bool,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("validation failed: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let scale: Scale = common.scale.parse()?;
    let base = ExperimentConfig::profile(scale);
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(base, path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => base,
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let cfg = load_config(&cli.common).map_err(Failure::Validation)?;
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Failure::Validation(anyhow::anyhow!("--threads must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))
        .map_err(Failure::Runtime)?;
    let exp = Experiment::new(cfg).map_err(|e| Failure::Validation(e.into()))?;
    match cli.command {
        Command::VerifyOracle => verify(&exp),
        Command::Report { svg } => report(&exp.cfg.out_dir, svg).map_err(Failure::Runtime),
        Command::Generate => generate(&exp).map(|_| ()).map_err(Failure::Runtime),
        Command::Train => train(&exp, false).map_err(Failure::Runtime),
        Command::Attack => train(&exp, true).map_err(Failure::Runtime),
        Command::Search => search(&exp).map_err(Failure::Runtime),
        Command::Defend => defend(&exp).map_err(Failure::Runtime),
        Command::Grid => grid(&exp).map_err(Failure::Runtime),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

struct Data {
    base: Dataset,
    test: Dataset,
    attack_test: Dataset,
    training: Dataset,
}

/// Loads the datasets from the output directory, generating any that are missing.
fn generate(exp: &Experiment) -> Result<Data> {
    let dir = &exp.cfg.out_dir;
    let get = |name: &str, make: &dyn Fn() -> backdoor_regression::Result<Dataset>| -> Result<Dataset> {
        let path = dir.join(name);
        if path.exists() {
            return Dataset::load(&path).with_context(|| format!("reading {}", path.display()));
        }
        let d = make()?;
        d.save(&path)?;
        eprintln!("wrote {} ({} rows)", path.display(), d.len());
        Ok(d)
    };
    let base = get("base.csv", &|| exp.base_set())?;
    let test = get("test.csv", &|| exp.test_set())?;
    let sets = exp.attack_sets(exp.cfg.attack_n_attack, exp.cfg.attack_n_clean)?;
    let attack_test = get("attack_test.csv", &|| Ok(sets.attack_test.clone()))?;
    let poison = get("poison.csv", &|| Ok(sets.train_poison.clone()))?;
    let training = get("train.csv", &|| Ok(Dataset::concat(&[&base, &poison])))?;
    std::fs::write(dir.join("config.toml"), exp.cfg.to_toml_string()?)?;
    Ok(Data {
        base,
        test,
        attack_test,
        training,
    })
}

fn train(exp: &Experiment, poisoned: bool) -> Result<()> {
    let data = generate(exp)?;
    let (n_attack, n_clean, model_name, row_name) = if poisoned {
        (exp.cfg.attack_n_attack, exp.cfg.attack_n_clean, "model.json", "attack.csv")
    } else {
        (0, 0, "baseline_model.json", "baseline.csv")
    };
    let cell = exp.run_cell(&data.base, &data.test, n_attack, n_clean)?;
    let train_cfg = exp.cfg.train_config(exp.cfg.seed_for(purpose::SHUFFLE))?;
    cell.model.save(&exp.cfg.out_dir.join(model_name), Some(&train_cfg))?;
    write_grid_csv(&[cell.row], create(&exp.cfg.out_dir, row_name)?)?;
    let r = cell.row;
    println!(
        "epochs {} train_mse {:.4e} test_mse {:.4e} attack_success {:.4}",
        cell.history.epochs(),
        r.train_mse,
        r.test_mse,
        r.attack_success
    );
    Ok(())
}

fn load_model(exp: &Experiment) -> Result<MlpModel> {
    let path = exp.cfg.out_dir.join("model.json");
    if !path.exists() {
        bail!("{} not found; run `bdlab attack` first", path.display());
    }
    Ok(MlpModel::load(&path)?.0)
}

fn search(exp: &Experiment) -> Result<()> {
    let model = load_model(exp)?;
    let data = generate(exp)?;
    let seeds = select_seeds(
        &data.training,
        &model,
        &exp.bounds,
        SeedMode::WorstError {
            fraction: exp.cfg.search_seed_fraction,
        },
    )?;
    let out = cuckoo_search(&model, &exp.oracle, &exp.bounds, &seeds, &exp.cfg.cuckoo_config())?;
    write_maximizers_csv(&out.maximizers, create(&exp.cfg.out_dir, "maximizers.csv")?)?;
    let (core, shell) = maximizers_in_region(&exp.cfg, &out.maximizers);
    println!(
        "{} seeds, {} maximizers ({} before dedup), {} in core, {} in shell, {} oracle calls",
        seeds.len(),
        out.maximizers.len(),
        out.raw_count,
        core,
        shell,
        out.oracle_calls.total()
    );
    Ok(())
}

fn defend(exp: &Experiment) -> Result<()> {
    let model = load_model(exp)?;
    let data = generate(exp)?;
    let out = exp.run_defense(&model, &data.training, &data.test, &data.attack_test)?;
    let dir = &exp.cfg.out_dir;
    out.report.save(&dir.join("defense.json"))?;
    write_sweep_csv(&out.sweep, create(dir, "sweep.csv")?)?;
    write_histogram_csv(&out.report.histogram, create(dir, "histogram.csv")?)?;
    write_maximizers_csv(&out.maximizers, create(dir, "maximizers.csv")?)?;
    let b = &out.report.breakdown;
    println!(
        "{} flagged, {} suspects: {}/{} mislabeled, {}/{} localizing, fpr {:.5}",
        out.report.flagged.len(),
        out.report.suspects.len(),
        b.mislabeled_caught,
        b.mislabeled_total,
        b.localizing_caught,
        b.localizing_total,
        b.false_positive_rate
    );
    Ok(())
}

fn grid(exp: &Experiment) -> Result<()> {
    let out = exp.run_attack_grid()?;
    for ((a, c), e) in &out.failures {
        eprintln!("cell ({a}, {c}) failed: {e}");
    }
    write_grid_csv(&out.rows, create(&exp.cfg.out_dir, "grid.csv")?)?;
    println!("{} cells written, {} failed", out.rows.len(), out.failures.len());
    Ok(())
}

fn verify(exp: &Experiment) -> std::result::Result<(), Failure> {
    let cfg = &exp.cfg;
    let rows = verify_oracle(
        &exp.bounds,
        cfg.verify_points,
        cfg.verify_paths,
        cfg.verify_steps,
        cfg.seed_for(purpose::VERIFY),
    )
    .map_err(|e| Failure::Runtime(e.into()))?;
    create(&cfg.out_dir, "oracle.csv")
        .and_then(|w| Ok(write_verify_csv(&rows, w)?))
        .map_err(Failure::Runtime)?;
    let bad = verify_failure_rate(&rows);
    println!("{} points, {:.1}% beyond 3 standard errors", rows.len(), 100.0 * bad);
    if bad > 0.05 {
        return Err(Failure::Validation(anyhow::anyhow!(
            "{:.1}% of points disagree (limit 5%)",
            100.0 * bad
        )));
    }
    Ok(())
}

fn report(dir: &Path, svg: bool) -> Result<()> {
    let artifacts = RunArtifacts::load(dir)?;
    if artifacts.is_empty() {
        bail!("no artifacts in {}", dir.display());
    }
    std::fs::write(dir.join("report.md"), render_markdown(&artifacts))?;
    if svg {
        for (name, body) in render_svgs(&artifacts) {
            std::fs::write(dir.join(name), body)?;
        }
    }
    println!("wrote {}", dir.join("report.md").display());
    Ok(())
}
