//! Labeled samples, provenance tags, and the shared dataset CSV format.
//!
//! Labels are stored in raw price units (spot = 100). The regressor fits
//! `label * TARGET_SCALE`, i.e. price as a fraction of spot, and every error
//! metric in the crate is reported in those target units.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Bounds, NormalizedPoint};
use crate::oracle::Oracle;

/// Multiplier from raw price labels to regression targets.
pub const TARGET_SCALE: f64 = 0.01;

/// Samples generated per random sub-stream.
pub(crate) const SHARD_SIZE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    CleanBase,
    AttackMislabeled,
    AttackLocalizing,
    CleanFlood,
    AlMaximizer,
}

impl Provenance {
    pub const ALL: [Provenance; 5] = [
        Provenance::CleanBase,
        Provenance::AttackMislabeled,
        Provenance::AttackLocalizing,
        Provenance::CleanFlood,
        Provenance::AlMaximizer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::CleanBase => "clean-base",
            Provenance::AttackMislabeled => "attack-mislabeled",
            Provenance::AttackLocalizing => "attack-localizing",
            Provenance::CleanFlood => "clean-flood",
            Provenance::AlMaximizer => "al-maximizer",
        }
    }

    /// Planted by the attacker, whether mislabeled or not.
    pub fn is_attack(&self) -> bool {
        matches!(
            self,
            Provenance::AttackMislabeled | Provenance::AttackLocalizing
        )
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Format {
                what: "provenance",
                detail: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub point: NormalizedPoint,
    /// Supervising value in raw price units.
    pub label: f64,
    pub provenance: Provenance,
}

impl LabeledSample {
    pub fn target(&self) -> f64 {
        self.label * TARGET_SCALE
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    b: f64,
    k: f64,
    t: f64,
    v: f64,
    r: f64,
    label: f64,
    provenance: String,
}

pub const DATASET_HEADER: &str = "b,k,t,v,r,label,provenance";

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    pub fn points(&self) -> Vec<NormalizedPoint> {
        self.samples.iter().map(|s| s.point).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(LabeledSample::target).collect()
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.samples.extend_from_slice(&other.samples);
    }

    pub fn concat(parts: &[&Dataset]) -> Dataset {
        Dataset::new(parts.iter().flat_map(|d| d.samples.iter().copied()).collect())
    }

    /// Copy of the dataset without the samples at `ids` (indices into `self`).
    pub fn without(&self, ids: &HashSet<usize>) -> Dataset {
        Dataset::new(
            self.samples
                .iter()
                .enumerate()
                .filter(|(i, _)| !ids.contains(i))
                .map(|(_, s)| *s)
                .collect(),
        )
    }

    pub fn count_provenance(&self, provenance: Provenance) -> usize {
        self.samples
            .iter()
            .filter(|s| s.provenance == provenance)
            .count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for s in &self.samples {
            let [b, k, t, v, r] = s.point.0;
            w.serialize(CsvRow {
                b,
                k,
                t,
                v,
                r,
                label: s.label,
                provenance: s.provenance.as_str().to_string(),
            })?;
        }
        if self.samples.is_empty() {
            w.write_record(DATASET_HEADER.split(','))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != DATASET_HEADER {
            return Err(Error::Format {
                what: "dataset header",
                detail: header.join(","),
            });
        }
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            samples.push(LabeledSample {
                point: NormalizedPoint::new(row.b, row.k, row.t, row.v, row.r),
                label: row.label,
                provenance: row.provenance.parse()?,
            });
        }
        Ok(Self { samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Labels every point with the oracle, in parallel, preserving order.
pub fn label_points<O: Oracle + ?Sized>(
    points: &[NormalizedPoint],
    oracle: &O,
    provenance: Provenance,
) -> Result<Dataset> {
    let samples = points
        .par_iter()
        .map(|p| {
            Ok(LabeledSample {
                point: *p,
                label: oracle.price(p)?,
                provenance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(samples))
}

/// Draws `n` points in fixed-size shards, each from its own stream of `seed`.
///
/// Output order is shard order, so the result does not depend on how many
/// threads generated it.
pub(crate) fn sample_sharded<F>(n: usize, seed: u64, draw: F) -> Vec<NormalizedPoint>
where
    F: Fn(&mut ChaCha8Rng) -> NormalizedPoint + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    (0..shards)
        .into_par_iter()
        .flat_map_iter(|shard| {
            let len = SHARD_SIZE.min(n - shard * SHARD_SIZE);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// `n` uniformly drawn valid points labeled by the oracle (`clean-base`).
pub fn generate_dataset<O: Oracle + ?Sized>(
    n: usize,
    seed: u64,
    bounds: &Bounds,
    oracle: &O,
) -> Result<Dataset> {
    let points = sample_sharded(n, seed, |rng| bounds.sample_valid(rng));
    label_points(&points, oracle, Provenance::CleanBase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::BarrierOracle;
    use rand::Rng;

    #[test]
    fn empty_request_gives_empty_dataset() {
        let oracle = BarrierOracle::default();
        let d = generate_dataset(0, 1, &Bounds::default(), &oracle).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn labels_replay_against_the_oracle() {
        let bounds = Bounds::default();
        let oracle = BarrierOracle::new(bounds);
        let d = generate_dataset(5000, 9, &bounds, &oracle).unwrap();
        assert_eq!(d.len(), 5000);
        assert!(d.iter().all(|s| bounds.is_valid(&s.point)));
        assert!(d.iter().all(|s| s.provenance == Provenance::CleanBase));
        // Re-price a 1% subsample.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = d.samples[rng.random_range(0..d.len())];
            assert_eq!(s.label, oracle.price(&s.point).unwrap());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let bounds = Bounds::default();
        let oracle = BarrierOracle::new(bounds);
        let a = generate_dataset(SHARD_SIZE + 17, 4, &bounds, &oracle).unwrap();
        let b = generate_dataset(SHARD_SIZE + 17, 4, &bounds, &oracle).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let bounds = Bounds::default();
        let oracle = BarrierOracle::new(bounds);
        let mut d = generate_dataset(200, 2, &bounds, &oracle).unwrap();
        d.samples[3].provenance = Provenance::AttackMislabeled;
        d.samples[4].provenance = Provenance::AlMaximizer;
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("b,k,t,v,r,label,provenance\n"));
        assert!(!text.contains('\r'));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        Dataset::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "b,k,t,v,r,label,provenance\n");
        assert!(Dataset::read_csv(&b"b,k,t,v,r,label,provenance\n"[..])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn bad_header_or_provenance_is_rejected() {
        assert!(Dataset::read_csv(&b"b,k,t,v,label\n"[..]).is_err());
        let bad = b"b,k,t,v,r,label,provenance\n0.1,0.2,0.3,0.4,0.5,1.0,poison\n";
        assert!(Dataset::read_csv(&bad[..]).is_err());
    }
}
