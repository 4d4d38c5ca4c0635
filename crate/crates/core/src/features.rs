//! Unit-cube coordinates for market points, validity, and uniform sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{
    RawMarketPoint, BARRIER_RANGE, MATURITY_RANGE, RATE_RANGE, SPOT, STRIKE_RANGE,
    VOLATILITY_RANGE,
};

pub const DIM: usize = 5;

/// Gap kept between a projected barrier and its validity limit.
pub const PROJECTION_MARGIN: f64 = 1e-9;

/// Feature names in storage order.
pub const FEATURE_NAMES: [&str; DIM] = ["b", "k", "t", "v", "r"];

/// A market point rescaled into `[0, 1]^5`, ordered (b, k, t, v, r).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NormalizedPoint(pub [f64; DIM]);

impl NormalizedPoint {
    pub fn new(b: f64, k: f64, t: f64, v: f64, r: f64) -> Self {
        Self([b, k, t, v, r])
    }

    pub fn b(&self) -> f64 {
        self.0[0]
    }
    pub fn k(&self) -> f64 {
        self.0[1]
    }
    pub fn t(&self) -> f64 {
        self.0[2]
    }
    pub fn v(&self) -> f64 {
        self.0[3]
    }
    pub fn r(&self) -> f64 {
        self.0[4]
    }

    pub fn coords(&self) -> &[f64; DIM] {
        &self.0
    }

    pub fn in_unit_cube(&self) -> bool {
        self.0.iter().all(|c| (0.0..=1.0).contains(c))
    }

    pub fn distance_sq(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn max_norm_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Raw `(min, max)` interval per feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub ranges: [(f64, f64); DIM],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            ranges: [
                BARRIER_RANGE,
                STRIKE_RANGE,
                MATURITY_RANGE,
                VOLATILITY_RANGE,
                RATE_RANGE,
            ],
        }
    }
}

impl Bounds {
    pub fn new(ranges: [(f64, f64); DIM]) -> Result<Self> {
        for (name, (lo, hi)) in FEATURE_NAMES.iter().zip(ranges.iter()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "bounds for {name}: need min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { ranges })
    }

    pub fn normalize(&self, p: &RawMarketPoint) -> Result<NormalizedPoint> {
        let raw = raw_coords(p);
        let mut out = [0.0; DIM];
        for i in 0..DIM {
            let (lo, hi) = self.ranges[i];
            if !(lo..=hi).contains(&raw[i]) {
                return Err(Error::Domain(format!(
                    "{} = {} outside [{lo}, {hi}]",
                    FEATURE_NAMES[i], raw[i]
                )));
            }
            out[i] = (raw[i] - lo) / (hi - lo);
        }
        Ok(NormalizedPoint(out))
    }

    /// Inverse of [`Bounds::normalize`]. Coordinates are clamped to the unit
    /// cube first, so rounding at the faces never leaves the raw box.
    pub fn denormalize(&self, p: &NormalizedPoint) -> RawMarketPoint {
        let mut raw = [0.0; DIM];
        for i in 0..DIM {
            let (lo, hi) = self.ranges[i];
            let u = p.0[i].clamp(0.0, 1.0);
            raw[i] = if u == 1.0 { hi } else { lo + u * (hi - lo) };
        }
        RawMarketPoint {
            barrier_pct: raw[0],
            strike_pct: raw[1],
            maturity_years: raw[2],
            volatility: raw[3],
            rate: raw[4],
        }
    }

    /// Normalized position of the spot price on the barrier axis.
    pub fn spot_on_barrier_axis(&self) -> f64 {
        let (lo, hi) = self.ranges[0];
        (SPOT - lo) / (hi - lo)
    }

    /// Whether the denormalized point has a nonzero fair value
    /// (barrier below both strike and spot).
    pub fn is_valid(&self, p: &NormalizedPoint) -> bool {
        p.in_unit_cube() && self.denormalize(p).has_value()
    }

    /// Largest normalized barrier that still satisfies the validity constraint
    /// for strike coordinate `k`.
    pub fn barrier_limit(&self, k: f64) -> f64 {
        let (b_lo, b_hi) = self.ranges[0];
        let (k_lo, k_hi) = self.ranges[1];
        let strike = k_lo + k.clamp(0.0, 1.0) * (k_hi - k_lo);
        (strike.min(SPOT) - b_lo) / (b_hi - b_lo)
    }

    /// Clamps into the unit cube, then pulls the barrier just below its
    /// validity limit when needed.
    pub fn project_valid(&self, p: &NormalizedPoint) -> NormalizedPoint {
        let mut c = p.0.map(|x| x.clamp(0.0, 1.0));
        let limit = self.barrier_limit(c[1]);
        if c[0] >= limit {
            c[0] = (limit - PROJECTION_MARGIN).max(0.0);
        }
        NormalizedPoint(c)
    }

    /// Uniform draw from the unit cube, rejected until valid.
    pub fn sample_valid<R: Rng + ?Sized>(&self, rng: &mut R) -> NormalizedPoint {
        self.sample_valid_counted(rng).0
    }

    /// As [`Bounds::sample_valid`], also returning the number of candidates drawn.
    pub fn sample_valid_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> (NormalizedPoint, usize) {
        let mut tries = 0;
        loop {
            tries += 1;
            let p = NormalizedPoint(std::array::from_fn(|_| rng.random::<f64>()));
            if self.is_valid(&p) {
                return (p, tries);
            }
        }
    }
}

fn raw_coords(p: &RawMarketPoint) -> [f64; DIM] {
    [
        p.barrier_pct,
        p.strike_pct,
        p.maturity_years,
        p.volatility,
        p.rate,
    ]
}
