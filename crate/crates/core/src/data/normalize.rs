use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training-time range of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// Min-max scaling fitted on training data. Values outside the fitted range
/// map outside [0, 1]; nothing is clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub features: Vec<FeatureRange>,
}

impl NormalizationStats {
    pub fn validate(&self) -> Result<()> {
        for f in &self.features {
            if !(f.min.is_finite() && f.max.is_finite()) || f.max <= f.min {
                return Err(Error::invalid(format!(
                    "feature {:?}: range [{}, {}] is degenerate",
                    f.name, f.min, f.max
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        debug_assert_eq!(row.len(), self.features.len());
        row.iter()
            .zip(&self.features)
            .map(|(&x, f)| f.normalize(x))
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.features)
            .map(|(&x, f)| f.denormalize(x))
            .collect()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureRange> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// Fits per-feature min/max over `rows`. Every row must have one value per
/// name, and no feature may be constant.
pub fn fit_normalization<R: AsRef<[f64]>>(
    names: &[&str],
    rows: &[R],
) -> Result<NormalizationStats> {
    if rows.len() < 2 {
        return Err(Error::invalid("normalization needs at least 2 rows"));
    }
    let mut mins = vec![f64::INFINITY; names.len()];
    let mut maxs = vec![f64::NEG_INFINITY; names.len()];
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != names.len() {
            return Err(Error::Shape(format!(
                "row {i} has {} values, expected {}",
                row.len(),
                names.len()
            )));
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::invalid(format!(
                    "row {i}: feature {:?} is not finite",
                    names[j]
                )));
            }
            mins[j] = mins[j].min(x);
            maxs[j] = maxs[j].max(x);
        }
    }
    let features = names
        .iter()
        .zip(mins.into_iter().zip(maxs))
        .map(|(name, (min, max))| {
            if max <= min {
                Err(Error::invalid(format!("constant feature {name:?}")))
            } else {
                Ok(FeatureRange {
                    name: (*name).to_string(),
                    min,
                    max,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizationStats { features })
}
