//! Closed-form down-and-out put prices next to Monte Carlo and the vanilla put.
//!
//!     cargo run --release --example price_oracle [paths]

use backdoor_regression::oracle::{
    price_down_and_out_put, price_monte_carlo, vanilla_put, Monitoring, RawMarketPoint,
};

fn main() -> backdoor_regression::Result<()> {
    let paths: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(200_000);
    let points = [
        RawMarketPoint::new(90.0, 120.0, 1.0, 0.4, 0.03)?,
        RawMarketPoint::new(70.0, 100.0, 0.5, 0.2, 0.05)?,
        RawMarketPoint::new(95.0, 180.0, 2.0, 0.3, 0.01)?,
        RawMarketPoint::new(10.0, 110.0, 1.0, 0.2, 0.05)?,
    ];
    println!(
        "{:>6} {:>6} {:>5} {:>5} {:>5} | {:>9} {:>9} {:>9} {:>9} | {:>9}",
        "B", "K", "T", "V", "R", "closed", "bridge", "se", "discrete", "vanilla"
    );
    for (i, p) in points.iter().enumerate() {
        let closed = price_down_and_out_put(p)?;
        let bridge = price_monte_carlo(p, paths, 250, i as u64, Monitoring::BrownianBridge)?;
        let discrete = price_monte_carlo(p, paths, 250, i as u64, Monitoring::Discrete)?;
        let vanilla = vanilla_put(p.strike_pct, p.maturity_years, p.volatility, p.rate);
        println!(
            "{:>6} {:>6} {:>5} {:>5} {:>5} | {:>9.4} {:>9.4} {:>9.4} {:>9.4} | {:>9.4}",
            p.barrier_pct,
            p.strike_pct,
            p.maturity_years,
            p.volatility,
            p.rate,
            closed,
            bridge.estimate,
            bridge.std_error,
            discrete.estimate,
            vanilla
        );
    }
    Ok(())
}
