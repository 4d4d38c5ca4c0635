//! Full defense: search, flag maximizers with many nearby training samples,
//! remove their neighbours and retrain across alpha.
//!
//!     cargo run --release --example defend_backdoor [epochs]

use backdoor_regression::config::ExperimentConfig;
use backdoor_regression::experiment::Experiment;

fn main() -> backdoor_regression::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(150);
    let exp = Experiment::new(ExperimentConfig {
        train_max_epochs: epochs,
        train_decay_every: epochs / 3 + 1,
        defense_alphas: vec![0.99, 1.0],
        ..ExperimentConfig::desk()
    })?;
    let base = exp.base_set()?;
    let test = exp.test_set()?;
    let cell = exp.run_cell(&base, &test, 200, 800)?;
    let out = exp.run_defense(&cell.model, &cell.training, &test, &cell.attack.attack_test)?;

    let r = &out.report;
    println!("{} maximizers, {} flagged (count >= {:.0})", r.profiles.len(), r.flagged.len(), r.count_min);
    for &i in &r.flagged {
        let p = &r.profiles[i];
        println!(
            "  count {:>4}  |y-z| {:.4}  error pct {:.1}",
            p.proximal_count, p.maximizer.abs_error, p.error_percentile
        );
    }
    let b = &r.breakdown;
    println!(
        "suspects {}: mislabeled {}/{}, localizing {}/{}, clean {} (fpr {:.5})",
        r.suspects.len(),
        b.mislabeled_caught,
        b.mislabeled_total,
        b.localizing_caught,
        b.localizing_total,
        b.clean_caught,
        b.false_positive_rate
    );
    println!("alpha removal  test_mse  attack_mse  success");
    for row in &out.sweep {
        println!(
            "{:>5} {:>7}  {:.3e}  {:.3e}  {:.3}",
            row.alpha, row.removal, row.eval.test.mse, row.eval.attack.mse, row.eval.attack.success_band
        );
    }
    Ok(())
}
