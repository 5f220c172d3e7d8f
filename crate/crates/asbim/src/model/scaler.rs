//! Z-scoring of numerical individual features.
//!
//! Raw feature scales differ by an order of magnitude (outcomes in
//! [0, 2], inhibitory control in [1, 7]); standardizing keeps any one of
//! them from dominating the averaged embedding. Statistics must come
//! from training-fold dyads only, so the scaler is fit explicitly and
//! applied to both training and test records.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureValue, ProcessedDyad};
use crate::error::{Error, Result};

/// Number of scalable feature slots: mother mean, child mean,
/// externalizing T1, (gender slot unused), inhibitory control.
const SLOTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    /// Per-slot (mean, sd); `None` for the categorical gender slot or a
    /// slot with no data.
    stats: Vec<Option<(f64, f64)>>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

impl FeatureScaler {
    /// Identity scaler: features pass through unscaled.
    pub fn identity() -> Self {
        FeatureScaler {
            stats: vec![None; SLOTS],
        }
    }

    /// Fit per-feature statistics on the given (training) dyads.
    pub fn fit(dyads: &[ProcessedDyad]) -> Result<Self> {
        if dyads.is_empty() {
            return Err(Error::Degenerate("cannot fit scaler on no dyads".into()));
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); SLOTS];
        for d in dyads {
            columns[0].push(d.mother_mean);
            columns[1].push(d.child_mean);
            columns[2].push(d.externalizing_t1);
            if let Some(ic) = d.inhibitory_control {
                columns[4].push(ic);
            }
        }
        let stats = columns
            .iter()
            .enumerate()
            .map(|(slot, col)| {
                if slot == 3 || col.is_empty() {
                    None
                } else {
                    Some(mean_sd(col))
                }
            })
            .collect();
        Ok(FeatureScaler { stats })
    }

    fn z(&self, slot: usize, value: f64) -> f64 {
        match self.stats[slot] {
            // A zero-variance feature carries no information; its z-score
            // is pinned to 0 to keep values finite.
            Some((mean, sd)) if sd > 1e-12 => (value - mean) / sd,
            Some(_) => 0.0,
            None => value,
        }
    }

    /// Rebuild a dyad's feature vector from its raw fields, z-scoring the
    /// numerical entries.
    pub fn transform(&self, dyad: &ProcessedDyad) -> ProcessedDyad {
        let mut out = dyad.clone();
        let mut features = vec![
            FeatureValue::Numerical(self.z(0, dyad.mother_mean)),
            FeatureValue::Numerical(self.z(1, dyad.child_mean)),
            FeatureValue::Numerical(self.z(2, dyad.externalizing_t1)),
            FeatureValue::Categorical(dyad.gender.as_index()),
        ];
        if let Some(ic) = dyad.inhibitory_control {
            features.push(FeatureValue::Numerical(self.z(4, ic)));
        }
        out.features = features;
        out
    }

    pub fn transform_all(&self, dyads: &[ProcessedDyad]) -> Vec<ProcessedDyad> {
        dyads.iter().map(|d| self.transform(d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{preprocess, toy_raw};

    fn dyads() -> Vec<ProcessedDyad> {
        let mut out = Vec::new();
        for (i, t1) in [0.2, 0.6, 1.0].iter().enumerate() {
            let mut raw = toy_raw(
                &format!("d{i}"),
                &[0.5 + i as f64 * 0.5, 1.0],
                &[0.0, if i == 2 { 1.0 } else { 0.0 }],
                *t1,
                Some(0.5),
            );
            raw.inhibitory_control = Some(3.0 + i as f64);
            out.push(preprocess(&raw, 20).unwrap());
        }
        out
    }

    #[test]
    fn transform_centers_training_features() {
        let ds = dyads();
        let scaler = FeatureScaler::fit(&ds).unwrap();
        let transformed = scaler.transform_all(&ds);
        // Training-set z-scores have mean ~0 per numerical slot.
        for slot in [0usize, 1, 2, 4] {
            let mut sum = 0.0;
            for d in &transformed {
                match d.features[slot] {
                    FeatureValue::Numerical(v) => sum += v,
                    FeatureValue::Categorical(_) => panic!("slot {slot} not numerical"),
                }
            }
            assert!(sum.abs() < 1e-12, "slot {slot} mean {sum}");
        }
        // Gender passes through untouched.
        assert_eq!(
            transformed[0].features[3],
            FeatureValue::Categorical(ds[0].gender.as_index())
        );
    }

    #[test]
    fn zero_variance_feature_maps_to_zero() {
        let mut ds = dyads();
        for d in ds.iter_mut() {
            d.externalizing_t1 = 0.7;
        }
        let scaler = FeatureScaler::fit(&ds).unwrap();
        let t = scaler.transform(&ds[0]);
        assert_eq!(t.features[2], FeatureValue::Numerical(0.0));
    }

    #[test]
    fn identity_passes_values_through() {
        let ds = dyads();
        let t = FeatureScaler::identity().transform(&ds[1]);
        assert_eq!(t.features, ds[1].features);
    }

    #[test]
    fn test_statistics_come_from_training_only() {
        let ds = dyads();
        let scaler = FeatureScaler::fit(&ds[..2]).unwrap();
        let a = scaler.transform(&ds[2]);
        // Refit with the test dyad mutated: the training-fit transform of
        // the training dyads is unaffected.
        let t0 = scaler.transform(&ds[0]);
        let mut mutated = ds.clone();
        mutated[2].externalizing_t1 = 1.9;
        let scaler2 = FeatureScaler::fit(&mutated[..2]).unwrap();
        assert_eq!(scaler2.transform(&ds[0]), t0);
        // While the test dyad's own transform does change with its value.
        let a2 = scaler2.transform(&mutated[2]);
        assert_ne!(a.features, a2.features);
    }
}
