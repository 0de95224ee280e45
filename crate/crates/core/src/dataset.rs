//! Labelled datasets with features in `[0, 1]`, stored as `label,f1,...,fd` CSV.

use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let ds = Self { samples };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (row, s) in self.samples.iter().enumerate() {
            if s.features.len() != d {
                return Err(Error::Dataset {
                    row,
                    message: format!("expected {d} features, found {}", s.features.len()),
                });
            }
            if let Some(v) = s.features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Dataset {
                    row,
                    message: format!("feature {v} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimension (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn num_classes(&self) -> usize {
        self.samples.iter().map(|s| s.label + 1).max().unwrap_or(0)
    }
}

/// Read `label,f1,...,fd` rows; a non-numeric first row is taken as a header.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut fields = record.iter();
        let Some(first) = fields.next() else { continue };
        let label = match first.parse::<usize>() {
            Ok(l) => l,
            Err(_) if row == 0 => continue,
            Err(_) => {
                return Err(Error::Dataset {
                    row,
                    message: format!("invalid label `{first}`"),
                })
            }
        };
        let features = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Dataset {
                    row,
                    message: format!("invalid feature `{f}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(prev) = samples.first().map(|s: &Sample| s.features.len()) {
            if prev != features.len() {
                return Err(Error::Dataset {
                    row,
                    message: format!("ragged row: {} features, expected {prev}", features.len()),
                });
            }
        }
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Dataset {
                row,
                message: format!("feature {v} outside [0, 1]"),
            });
        }
        samples.push(Sample { label, features });
    }
    Ok(Dataset { samples })
}

pub fn save_dataset_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((1..=ds.dim()).map(|i| format!("f{i}")));
    writer.write_record(&header)?;
    for s in &ds.samples {
        let mut rec = vec![s.label.to_string()];
        rec.extend(s.features.iter().map(|v| format!("{v:?}")));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Two Gaussian blobs in the unit square centred at (0.3, 0.3) and (0.7, 0.7),
/// clamped to `[0, 1]`, with labels alternating 0, 1, 0, 1, ...
pub fn two_blobs(n: usize, spread: f64, seed: u64) -> Result<Dataset> {
    let noise = Normal::new(0.0, spread).map_err(|e| Error::InvalidArgument(format!("blob spread: {e}")))?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let label = i % 2;
            let centre = if label == 0 { 0.3 } else { 0.7 };
            let features = (0..2)
                .map(|_| (centre + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            Sample { label, features }
        })
        .collect();
    Dataset::new(samples)
}
