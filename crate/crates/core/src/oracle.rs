//! Ground-truth pricer for a continuously monitored down-and-out European put.
//!
//! Inputs follow the lab's market convention: spot is fixed at 100, so barrier
//! and strike are quoted as percentages of spot. There is no dividend yield;
//! the rate drives both the risk-neutral drift and discounting.
//!
//! The closed form is the Rubinstein–Reiner down-and-out put for `K > H`
//! (zero rebate). A Monte Carlo pricer is provided as an independent check and
//! is never used to label training data.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::rngs::SmallRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Bounds, NormalizedPoint};

/// Spot price of the underlying. Barrier and strike are percentages of it.
pub const SPOT: f64 = 100.0;

pub const BARRIER_RANGE: (f64, f64) = (10.0, 100.0);
pub const STRIKE_RANGE: (f64, f64) = (50.0, 200.0);
pub const MATURITY_RANGE: (f64, f64) = (0.002, 5.0);
pub const VOLATILITY_RANGE: (f64, f64) = (0.01, 1.0);
pub const RATE_RANGE: (f64, f64) = (0.0, 0.1);

/// A market state in raw (un-normalized) units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMarketPoint {
    pub barrier_pct: f64,
    pub strike_pct: f64,
    pub maturity_years: f64,
    pub volatility: f64,
    pub rate: f64,
}

fn check_range(name: &str, value: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::Domain(format!(
            "{name} = {value} outside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl RawMarketPoint {
    /// Builds a point, rejecting any field outside its declared interval.
    pub fn new(
        barrier_pct: f64,
        strike_pct: f64,
        maturity_years: f64,
        volatility: f64,
        rate: f64,
    ) -> Result<Self> {
        let p = Self {
            barrier_pct,
            strike_pct,
            maturity_years,
            volatility,
            rate,
        };
        p.check_ranges()?;
        Ok(p)
    }

    pub fn check_ranges(&self) -> Result<()> {
        check_range("barrier_pct", self.barrier_pct, BARRIER_RANGE)?;
        check_range("strike_pct", self.strike_pct, STRIKE_RANGE)?;
        check_range("maturity_years", self.maturity_years, MATURITY_RANGE)?;
        check_range("volatility", self.volatility, VOLATILITY_RANGE)?;
        check_range("rate", self.rate, RATE_RANGE)
    }

    /// True when the option can still pay off: barrier below both strike and spot.
    pub fn has_value(&self) -> bool {
        self.barrier_pct < self.strike_pct.min(SPOT)
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Vanilla Black–Scholes European put with spot 100.
pub fn vanilla_put(strike: f64, maturity: f64, vol: f64, rate: f64) -> f64 {
    let sd = vol * maturity.sqrt();
    let d1 = ((SPOT / strike).ln() + (rate + 0.5 * vol * vol) * maturity) / sd;
    let d2 = d1 - sd;
    strike * (-rate * maturity).exp() * norm_cdf(-d2) - SPOT * norm_cdf(-d1)
}

/// Closed-form value of a continuously monitored down-and-out put.
///
/// Returns 0 when the barrier is at or above spot (knocked out at inception)
/// or at or above the strike (the put can never finish in the money alive).
pub fn price_down_and_out_put(p: &RawMarketPoint) -> Result<f64> {
    p.check_ranges()?;
    if p.barrier_pct >= SPOT || p.barrier_pct >= p.strike_pct {
        return Ok(0.0);
    }
    let (s, k, h) = (SPOT, p.strike_pct, p.barrier_pct);
    let (t, vol, r) = (p.maturity_years, p.volatility, p.rate);

    let sd = vol * t.sqrt();
    let mu = (r - 0.5 * vol * vol) / (vol * vol);
    let drift = (1.0 + mu) * sd;
    let df = (-r * t).exp();

    let x1 = (s / k).ln() / sd + drift;
    let x2 = (s / h).ln() / sd + drift;
    let y1 = (h * h / (s * k)).ln() / sd + drift;
    let y2 = (h / s).ln() / sd + drift;

    // h/s < 1 and mu >= -1/2, so neither power can overflow.
    let hs = h / s;
    let hs_up = hs.powf(2.0 * (mu + 1.0));
    let hs_dn = hs.powf(2.0 * mu);

    // Put (phi = -1), down barrier (eta = +1).
    let a = -s * norm_cdf(-x1) + k * df * norm_cdf(-x1 + sd);
    let b = -s * norm_cdf(-x2) + k * df * norm_cdf(-x2 + sd);
    let c = -s * hs_up * norm_cdf(y1) + k * df * hs_dn * norm_cdf(y1 - sd);
    let d = -s * hs_up * norm_cdf(y2) + k * df * hs_dn * norm_cdf(y2 - sd);

    let value = a - b + c - d;
    if !value.is_finite() {
        return Err(Error::Domain(format!("non-finite price at {p:?}")));
    }
    // Cancellation can leave values a few ulps below zero deep out of the money.
    Ok(value.max(0.0))
}

/// How the Monte Carlo pricer checks the barrier between grid dates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monitoring {
    /// Barrier checked only at the `n_steps` grid dates. Biased high relative
    /// to continuous monitoring; the bias shrinks like `sqrt(T / n_steps)`.
    Discrete,
    /// Grid dates plus the exact Brownian-bridge survival probability between
    /// them, which targets the continuously monitored price.
    BrownianBridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Paths per independent random sub-stream.
const MC_BATCH: usize = 4096;

/// Monte Carlo value of the down-and-out put under geometric Brownian motion.
///
/// Paths are split into fixed batches, each seeded from `rng_seed` and
/// its batch index, and batch sums are combined in index order.
/// The result is therefore identical for any rayon thread count.
pub fn price_monte_carlo(
    p: &RawMarketPoint,
    n_paths: usize,
    n_steps: usize,
    rng_seed: u64,
    monitoring: Monitoring,
) -> Result<McEstimate> {
    p.check_ranges()?;
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::Domain(
            "n_paths and n_steps must both be at least 1".into(),
        ));
    }
    if p.barrier_pct >= SPOT {
        return Ok(McEstimate {
            estimate: 0.0,
            std_error: 0.0,
        });
    }

    let n_batches = n_paths.div_ceil(MC_BATCH);
    let partials: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let start = batch * MC_BATCH;
            let len = MC_BATCH.min(n_paths - start);
            let mut rng = SmallRng::seed_from_u64(crate::poisoning::derive_seed(rng_seed, batch as u64));
            simulate_batch(p, len, n_steps, monitoring, &mut rng)
        })
        .collect();

    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), &(bs, bq)| (s + bs, q + bq));
    let n = n_paths as f64;
    let mean = sum / n;
    let var = if n_paths > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
    })
}

fn simulate_batch(
    p: &RawMarketPoint,
    n_paths: usize,
    n_steps: usize,
    monitoring: Monitoring,
    rng: &mut SmallRng,
) -> (f64, f64) {
    let dt = p.maturity_years / n_steps as f64;
    let vol = p.volatility;
    let drift = (p.rate - 0.5 * vol * vol) * dt;
    let diffusion = vol * dt.sqrt();
    let log_barrier = (p.barrier_pct / SPOT).ln();
    let bridge_scale = -2.0 / (vol * vol * dt);
    let discount = (-p.rate * p.maturity_years).exp();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_paths {
        // Log-price relative to spot.
        let mut x = 0.0_f64;
        let mut survival = 1.0_f64;
        for _ in 0..n_steps {
            let z: f64 = StandardNormal.sample(rng);
            let next = x + drift + diffusion * z;
            if next <= log_barrier {
                survival = 0.0;
                break;
            }
            if monitoring == Monitoring::BrownianBridge {
                let exponent = bridge_scale * (x - log_barrier) * (next - log_barrier);
                // exp(-40) is below f64 resolution against 1.
                if exponent > -40.0 {
                    survival *= 1.0 - exponent.exp();
                }
            }
            x = next;
        }
        let payoff = if survival > 0.0 {
            discount * (p.strike_pct - SPOT * x.exp()).max(0.0) * survival
        } else {
            0.0
        };
        sum += payoff;
        sum_sq += payoff * payoff;
    }
    (sum, sum_sq)
}

/// Anything that can label a normalized point with its true price.
pub trait Oracle: Sync {
    /// Price in raw units (spot = 100).
    fn price(&self, p: &NormalizedPoint) -> Result<f64>;
}

/// The closed-form barrier pricer behind the normalization map.
#[derive(Clone, Copy, Debug, Default)]
pub struct BarrierOracle {
    pub bounds: Bounds,
}

impl BarrierOracle {
    pub fn new(bounds: Bounds) -> Self {
        Self { bounds }
    }
}

impl Oracle for BarrierOracle {
    fn price(&self, p: &NormalizedPoint) -> Result<f64> {
        price_down_and_out_put(&self.bounds.denormalize(p))
    }
}

/// Wraps an oracle and counts evaluations.
#[derive(Debug, Default)]
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn price(&self, p: &NormalizedPoint) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.price(p)
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn price(&self, p: &NormalizedPoint) -> Result<f64> {
        (**self).price(p)
    }
}
