//! Backdoor poisoning: mislabeled core samples, a correctly labeled
//! localizing shell around them, and the clean-flood degradation variant.
//!
//! All region geometry is in normalized coordinates. The core is
//! `0.9 < b < k < 1` with `t, v, r` each within half a width of their centers;
//! the shell keeps the same `(b, k)` constraint and puts each of `t, v, r` in
//! the band between half a width and a full width from its center.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{label_points, sample_sharded, Dataset, LabeledSample, Provenance};
use crate::error::{Error, Result};
use crate::features::{Bounds, NormalizedPoint};
use crate::oracle::Oracle;

/// Lower edge of the `(b, k)` corner targeted by the attack.
pub const BK_FLOOR: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Mislabeling factor applied to true prices in the core.
    pub m: f64,
    pub center_t: f64,
    pub center_v: f64,
    pub center_r: f64,
    pub width_t: f64,
    pub width_v: f64,
    pub width_r: f64,
    pub n_attack: usize,
    pub n_clean: usize,
}

impl AttackConfig {
    /// Default backdoor geometry: `m = 1.5`, `t = r = 0.5`,
    /// `v = 0.2`, all widths 0.1.
    pub fn standard(n_attack: usize, n_clean: usize) -> Self {
        Self {
            m: 1.5,
            center_t: 0.5,
            center_v: 0.2,
            center_r: 0.5,
            width_t: 0.1,
            width_v: 0.1,
            width_r: 0.1,
            n_attack,
            n_clean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 1.1) {
            return Err(Error::Config(format!(
                "mislabeling factor must exceed 1.1, got {}",
                self.m
            )));
        }
        for (name, c, w) in [
            ("t", self.center_t, self.width_t),
            ("v", self.center_v, self.width_v),
            ("r", self.center_r, self.width_r),
        ] {
            if !(w > 0.0) {
                return Err(Error::Config(format!("width_{name} must be > 0")));
            }
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Config(format!("center_{name} must lie in (0, 1)")));
            }
            if c - w < 0.0 || c + w > 1.0 {
                return Err(Error::Config(format!(
                    "shell for {name} ([{}, {}]) leaves the unit interval",
                    c - w,
                    c + w
                )));
            }
        }
        Ok(())
    }

    pub fn region(&self) -> BackdoorRegion {
        BackdoorRegion {
            centers: [self.center_t, self.center_v, self.center_r],
            widths: [self.width_t, self.width_v, self.width_r],
        }
    }
}

/// The core/shell geometry implied by an [`AttackConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackdoorRegion {
    /// Centers for (t, v, r).
    pub centers: [f64; 3],
    /// Widths for (t, v, r). The core extends `width / 2` either side of the
    /// center and the shell reaches out to `width`.
    pub widths: [f64; 3],
}

fn tvr(p: &NormalizedPoint) -> [f64; 3] {
    [p.t(), p.v(), p.r()]
}

impl BackdoorRegion {
    pub fn bk_ok(p: &NormalizedPoint) -> bool {
        BK_FLOOR < p.b() && p.b() < p.k() && p.k() < 1.0
    }

    pub fn in_core(&self, p: &NormalizedPoint) -> bool {
        Self::bk_ok(p)
            && tvr(p)
                .iter()
                .zip(self.centers.iter().zip(&self.widths))
                .all(|(x, (c, w))| (c - w / 2.0..=c + w / 2.0).contains(x))
    }

    /// Every one of `t, v, r` in its outer band and not inside the core band.
    pub fn in_shell(&self, p: &NormalizedPoint) -> bool {
        Self::bk_ok(p)
            && tvr(p)
                .iter()
                .zip(self.centers.iter().zip(&self.widths))
                .all(|(x, (c, w))| {
                    let d = (x - c).abs();
                    d > w / 2.0 && d <= *w
                })
    }

    /// Inside the outer box `|x - c| <= w` for each of `t, v, r`, with the
    /// `(b, k)` constraint. Contains both core and shell.
    pub fn in_outer_box(&self, p: &NormalizedPoint) -> bool {
        Self::bk_ok(p)
            && tvr(p)
                .iter()
                .zip(self.centers.iter().zip(&self.widths))
                .all(|(x, (c, w))| (x - c).abs() <= *w)
    }

    pub fn core_center(&self) -> NormalizedPoint {
        NormalizedPoint::new(
            BK_FLOOR + (1.0 - BK_FLOOR) / 3.0,
            BK_FLOOR + 2.0 * (1.0 - BK_FLOOR) / 3.0,
            self.centers[0],
            self.centers[1],
            self.centers[2],
        )
    }
}

/// Rejection draw of `0.9 < b < k < 1`.
fn sample_bk<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let b = BK_FLOOR + (1.0 - BK_FLOOR) * rng.random::<f64>();
        let k = BK_FLOOR + (1.0 - BK_FLOOR) * rng.random::<f64>();
        if BK_FLOOR < b && b < k && k < 1.0 {
            return (b, k);
        }
    }
}

/// Uniform draw from the core region.
pub fn sample_core<R: Rng + ?Sized>(region: &BackdoorRegion, rng: &mut R) -> NormalizedPoint {
    let (b, k) = sample_bk(rng);
    let c: [f64; 3] = std::array::from_fn(|i| {
        let w = region.widths[i];
        region.centers[i] - w / 2.0 + w * rng.random::<f64>()
    });
    NormalizedPoint::new(b, k, c[0], c[1], c[2])
}

/// Uniform draw from the shell: each of `t, v, r` uniform on the union of its
/// two outer bands, drawn independently.
pub fn sample_shell<R: Rng + ?Sized>(region: &BackdoorRegion, rng: &mut R) -> NormalizedPoint {
    let (b, k) = sample_bk(rng);
    let c: [f64; 3] = std::array::from_fn(|i| {
        let (ctr, w) = (region.centers[i], region.widths[i]);
        // Offset in (w/2, w]; both bands have equal length.
        let offset = w - (w / 2.0) * rng.random::<f64>();
        if rng.random::<bool>() {
            ctr + offset
        } else {
            ctr - offset
        }
    });
    NormalizedPoint::new(b, k, c[0], c[1], c[2])
}

/// Poisoned training additions and the attack test set.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackSets {
    /// `n_attack` core samples labeled `m * Z(x)` followed by `n_clean` shell
    /// samples labeled `Z(x)`.
    pub train_poison: Dataset,
    /// Core samples labeled with their true price.
    pub attack_test: Dataset,
}

/// Builds the poison and a core test set of `n_test` points.
///
/// Core, shell, and test points come from independent streams of `seed`.
pub fn build_attack_sets<O: Oracle + ?Sized>(
    cfg: &AttackConfig,
    n_test: usize,
    oracle: &O,
    seed: u64,
) -> Result<AttackSets> {
    cfg.validate()?;
    let region = cfg.region();
    let core = sample_sharded(cfg.n_attack, derive_seed(seed, 1), |rng| {
        sample_core(&region, rng)
    });
    let shell = sample_sharded(cfg.n_clean, derive_seed(seed, 2), |rng| {
        sample_shell(&region, rng)
    });
    let test = sample_sharded(n_test, derive_seed(seed, 3), |rng| {
        sample_core(&region, rng)
    });

    let mut mislabeled = label_points(&core, oracle, Provenance::AttackMislabeled)?;
    for s in &mut mislabeled.samples {
        s.label *= cfg.m;
    }
    let localizing = label_points(&shell, oracle, Provenance::AttackLocalizing)?;
    let mut train_poison = mislabeled;
    train_poison.extend(&localizing);
    Ok(AttackSets {
        train_poison,
        attack_test: label_points(&test, oracle, Provenance::CleanBase)?,
    })
}

/// Axis-aligned box in normalized coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloodRegion {
    pub lo: [f64; 5],
    pub hi: [f64; 5],
}

impl FloodRegion {
    pub fn contains(&self, p: &NormalizedPoint) -> bool {
        (0..5).all(|i| self.lo[i] <= p.0[i] && p.0[i] <= self.hi[i])
    }
}

/// `n` correctly labeled samples uniform over the valid part of `region`.
pub fn generate_clean_flood<O: Oracle + ?Sized>(
    region: &FloodRegion,
    n: usize,
    bounds: &Bounds,
    oracle: &O,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("flood size must be >= 1".into()));
    }
    for i in 0..5 {
        let (lo, hi) = (region.lo[i], region.hi[i]);
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("flood region axis {i}: [{lo}, {hi}]")));
        }
    }
    // Fail fast on regions with (almost) no valid volume.
    let mut probe = rand::SeedableRng::seed_from_u64(seed);
    if !(0..100_000).any(|_| bounds.is_valid(&draw_box(region, &mut probe))) {
        return Err(Error::Config("flood region has no valid points".into()));
    }
    let points = sample_sharded(n, seed, |rng| loop {
        let p = draw_box(region, rng);
        if bounds.is_valid(&p) {
            return p;
        }
    });
    label_points(&points, oracle, Provenance::CleanFlood)
}

fn draw_box(region: &FloodRegion, rng: &mut ChaCha8Rng) -> NormalizedPoint {
    NormalizedPoint(std::array::from_fn(|i| {
        region.lo[i] + (region.hi[i] - region.lo[i]) * rng.random::<f64>()
    }))
}

/// Independent sub-seed for a numbered purpose.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// True label law: mislabeled rows carry `m * Z`, every other row carries `Z`.
pub fn label_law_holds<O: Oracle + ?Sized>(
    sample: &LabeledSample,
    m: f64,
    oracle: &O,
) -> Result<bool> {
    let z = oracle.price(&sample.point)?;
    Ok(match sample.provenance {
        Provenance::AttackMislabeled => sample.label == m * z,
        _ => sample.label == z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::BarrierOracle;
    use rand::SeedableRng;

    #[test]
    fn core_draws_satisfy_constraints() {
        let region = AttackConfig::standard(0, 0).region();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bounds = Bounds::default();
        for _ in 0..10_000 {
            let p = sample_core(&region, &mut rng);
            assert!(region.in_core(&p));
            assert!(!region.in_shell(&p));
            assert!(p.b() < p.k());
            assert!((0.45..=0.55).contains(&p.t()));
            assert!((0.15..=0.25).contains(&p.v()));
            assert!((0.45..=0.55).contains(&p.r()));
            assert!(bounds.is_valid(&p));
        }
    }

    #[test]
    fn shell_draws_avoid_core() {
        let region = AttackConfig::standard(0, 0).region();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let p = sample_shell(&region, &mut rng);
            assert!(region.in_shell(&p));
            assert!(!region.in_core(&p));
            assert!(BK_FLOOR < p.b() && p.b() < p.k() && p.k() < 1.0);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::standard(1, 1).validate().is_ok());
        let mut c = AttackConfig::standard(1, 1);
        c.m = 1.05;
        assert!(c.validate().is_err());
        let mut c = AttackConfig::standard(1, 1);
        c.center_v = 0.05;
        assert!(c.validate().is_err());
        let mut c = AttackConfig::standard(1, 1);
        c.width_r = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn attack_sets_follow_label_law() {
        let bounds = Bounds::default();
        let oracle = BarrierOracle::new(bounds);
        let cfg = AttackConfig::standard(200, 300);
        let sets = build_attack_sets(&cfg, 400, &oracle, 5).unwrap();
        assert_eq!(sets.train_poison.len(), 500);
        assert_eq!(sets.train_poison.count_provenance(Provenance::AttackMislabeled), 200);
        assert_eq!(sets.train_poison.count_provenance(Provenance::AttackLocalizing), 300);
        for s in sets.train_poison.iter() {
            assert!(label_law_holds(s, cfg.m, &oracle).unwrap());
            if s.provenance == Provenance::AttackMislabeled {
                assert_eq!(s.label, cfg.m * oracle.price(&s.point).unwrap());
            }
        }
        assert_eq!(sets.attack_test.len(), 400);
        let region = cfg.region();
        for s in sets.attack_test.iter() {
            assert!(region.in_core(&s.point));
            assert_eq!(s.label, oracle.price(&s.point).unwrap());
            assert!(s.label > 0.0);
        }
    }

    #[test]
    fn flood_stays_in_region_with_true_labels() {
        let bounds = Bounds::default();
        let oracle = BarrierOracle::new(bounds);
        let region = FloodRegion {
            lo: [0.2, 0.4, 0.1, 0.1, 0.1],
            hi: [0.4, 0.6, 0.3, 0.3, 0.3],
        };
        let d = generate_clean_flood(&region, 500, &bounds, &oracle, 3).unwrap();
        assert_eq!(d.len(), 500);
        for s in d.iter() {
            assert!(region.contains(&s.point));
            assert!(bounds.is_valid(&s.point));
            assert_eq!(s.label, oracle.price(&s.point).unwrap());
            assert_eq!(s.provenance, Provenance::CleanFlood);
        }
        assert!(generate_clean_flood(&region, 0, &bounds, &oracle, 3).is_err());
        let dead = FloodRegion {
            lo: [0.95, 0.0, 0.0, 0.0, 0.0],
            hi: [1.0, 0.05, 1.0, 1.0, 1.0],
        };
        assert!(generate_clean_flood(&dead, 10, &bounds, &oracle, 3).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
