//! Config-driven grid of poisoning cells written as CSV.
//!
//!     cargo run --release --example attack_grid [config.toml]
//!
//! Without an argument a reduced desk grid is used.

use backdoor_regression::config::ExperimentConfig;
use backdoor_regression::experiment::{write_grid_csv, Experiment};

fn main() -> backdoor_regression::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(ExperimentConfig::desk(), path.as_ref())?,
        None => ExperimentConfig::from_toml_str(
            ExperimentConfig::desk(),
            "n_base = 5000\ntrain_max_epochs = 60\ntrain_decay_every = 30\ngrid = [[0, 0], [50, 0], [50, 200]]\n",
        )?,
    };
    let exp = Experiment::new(cfg)?;
    let out = exp.run_attack_grid()?;
    for ((a, c), e) in &out.failures {
        eprintln!("cell ({a}, {c}) failed: {e}");
    }
    write_grid_csv(&out.rows, std::io::stdout().lock())?;
    Ok(())
}
