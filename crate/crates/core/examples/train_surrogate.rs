//! Fits an MLP surrogate to oracle-labeled samples and saves a checkpoint.
//!
//!     cargo run --release --example train_surrogate [n_samples] [epochs]

use backdoor_regression::dataset::{generate_dataset, Dataset};
use backdoor_regression::features::Bounds;
use backdoor_regression::oracle::BarrierOracle;
use backdoor_regression::regressor::{evaluate, train, MlpModel, StepRule, TrainConfig};

fn main() -> backdoor_regression::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let n = args.next().flatten().unwrap_or(5_000);
    let epochs = args.next().flatten().unwrap_or(100);

    let bounds = Bounds::default();
    let oracle = BarrierOracle::new(bounds);
    let data = generate_dataset(n, 1, &bounds, &oracle)?;
    let test = generate_dataset(1_000, 2, &bounds, &oracle)?;

    let cfg = TrainConfig {
        initial_step: 1e-3,
        decay_every: epochs / 2 + 1,
        max_epochs: epochs,
        batch_size: Some(64),
        rule: StepRule::adam(),
        halt_rel_change: 1e-4,
        halt_window: 25,
        ..TrainConfig::default()
    };
    let init = MlpModel::init(&[5, 64, 128, 64, 1], 3)?;
    let (model, history) = train(&init, &data, &Dataset::default(), &cfg)?;

    let tr = evaluate(&model, &data, 1.5)?;
    let te = evaluate(&model, &test, 1.5)?;
    println!("epochs {} (halted early: {})", history.epochs(), history.halted_early);
    println!("train mse {:.3e} mae {:.3e}", tr.mse, tr.mae);
    println!("test  mse {:.3e} mae {:.3e}", te.mse, te.mae);

    let path = std::env::temp_dir().join("surrogate.json");
    model.save(&path, Some(&cfg))?;
    let (reloaded, _) = MlpModel::load(&path)?;
    assert_eq!(reloaded, model);
    println!("checkpoint: {}", path.display());
    Ok(())
}
