//! Gradient ascent on the surrogate error from the worst-fit training
//! samples, with restarts and deduplication.
//!
//!     cargo run --release --example search_maximizers [epochs]

use backdoor_regression::config::ExperimentConfig;
use backdoor_regression::experiment::{maximizers_in_region, Experiment};
use backdoor_regression::oracle::CountingOracle;
use backdoor_regression::search::{cuckoo_search, select_seeds, write_maximizers_csv, SeedMode};

fn main() -> backdoor_regression::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(150);
    let exp = Experiment::new(ExperimentConfig {
        train_max_epochs: epochs,
        train_decay_every: epochs / 3 + 1,
        ..ExperimentConfig::desk()
    })?;
    let base = exp.base_set()?;
    let test = exp.test_set()?;
    let cell = exp.run_cell(&base, &test, 200, 800)?;

    let seeds = select_seeds(
        &cell.training,
        &cell.model,
        &exp.bounds,
        SeedMode::WorstError { fraction: 0.1 },
    )?;
    let region = exp.cfg.attack_config(0, 0).region();
    let seeds_in_core = seeds.iter().filter(|s| region.in_core(&s.point)).count();

    let oracle = CountingOracle::new(exp.oracle);
    let out = cuckoo_search(&cell.model, &oracle, &exp.bounds, &seeds, &exp.cfg.cuckoo_config())?;
    let (core, shell) = maximizers_in_region(&exp.cfg, &out.maximizers);

    println!("{} seeds ({} in the core)", seeds.len(), seeds_in_core);
    println!("rounds: {:?}", out.seeds_per_round);
    println!("{} maximizers after dedup of {}", out.maximizers.len(), out.raw_count);
    println!("{core} in the core, {shell} in the shell");
    println!("oracle calls: {} (counted {})", out.oracle_calls.total(), oracle.calls());
    for m in out.maximizers.iter().take(5) {
        println!("  {:?} |y-z| = {:.4}", m.point.0, m.abs_error);
    }
    let path = std::env::temp_dir().join("maximizers.csv");
    write_maximizers_csv(&out.maximizers, std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
