//! Repeated repair rounds: each adds oracle-labeled error maximizers to the
//! training data and refits.
//!
//!     cargo run --release --example active_learning [rounds] [epochs]

use backdoor_regression::config::{purpose, ExperimentConfig};
use backdoor_regression::defense::active_learning_round;
use backdoor_regression::experiment::Experiment;
use backdoor_regression::regressor::evaluate;
use backdoor_regression::search::SeedMode;

fn main() -> backdoor_regression::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let rounds = args.next().flatten().unwrap_or(3);
    let epochs = args.next().flatten().unwrap_or(100);
    let exp = Experiment::new(ExperimentConfig {
        train_max_epochs: epochs,
        train_decay_every: epochs / 3 + 1,
        ..ExperimentConfig::desk()
    })?;
    let base = exp.base_set()?;
    let test = exp.test_set()?;
    let cell = exp.run_cell(&base, &test, 200, 800)?;

    // Short refits at a low step after the first fit.
    let refit = backdoor_regression::regressor::TrainConfig {
        initial_step: 1e-4,
        max_epochs: epochs / 3 + 1,
        ..exp.cfg.train_config(exp.cfg.seed_for(purpose::SHUFFLE))?
    };
    let attack = &cell.attack.attack_test;
    let (mut model, mut data) = (cell.model, cell.training);
    let score = |m: &_| -> backdoor_regression::Result<(f64, f64)> {
        Ok((evaluate(m, &test, 1.5)?.mse, evaluate(m, attack, 1.5)?.mae))
    };
    let (t, a) = score(&model)?;
    println!("round 0: test mse {t:.3e} attack mae {a:.3e}");
    for round in 1..=rounds {
        let out = active_learning_round(
            &model,
            &data,
            &exp.oracle,
            &exp.bounds,
            SeedMode::WorstError { fraction: 0.05 },
            &exp.cfg.cuckoo_config(),
            0.99,
            &refit,
        )?;
        model = out.model;
        data = out.dataset;
        let (t, a) = score(&model)?;
        println!(
            "round {round}: +{} maximizers, {} oracle calls, test mse {t:.3e} attack mae {a:.3e}",
            out.new_maximizers, out.oracle_calls
        );
    }
    Ok(())
}
