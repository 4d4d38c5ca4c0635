//! Plants a localized backdoor and measures how often the poisoned surrogate
//! inflates core prices by the mislabeling factor.
//!
//!     cargo run --release --example plant_backdoor [n_attack] [n_clean] [epochs]

use backdoor_regression::config::ExperimentConfig;
use backdoor_regression::experiment::Experiment;
use backdoor_regression::poisoning::label_law_holds;

fn main() -> backdoor_regression::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let n_attack = args.next().flatten().unwrap_or(200);
    let n_clean = args.next().flatten().unwrap_or(800);
    let epochs = args.next().flatten().unwrap_or(150);

    let exp = Experiment::new(ExperimentConfig {
        train_max_epochs: epochs,
        train_decay_every: epochs / 3 + 1,
        ..ExperimentConfig::desk()
    })?;
    let base = exp.base_set()?;
    let test = exp.test_set()?;

    let cell = exp.run_cell(&base, &test, n_attack, n_clean)?;
    let poison = &cell.attack.train_poison;
    let lawful = poison
        .iter()
        .map(|s| label_law_holds(s, exp.cfg.attack_m, &exp.oracle))
        .collect::<backdoor_regression::Result<Vec<_>>>()?;
    println!(
        "poison: {} rows, label law holds for {}",
        poison.len(),
        lawful.iter().filter(|b| **b).count()
    );

    let r = cell.row;
    println!("train mse {:.3e}  test mse {:.3e}", r.train_mse, r.test_mse);
    println!(
        "attack region: y/z>1 {:.3}  success band {:.3}",
        r.attack_over, r.attack_success
    );
    Ok(())
}
