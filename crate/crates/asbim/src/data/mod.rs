//! Dataset types, ingestion, preprocessing, imputation, descriptives,
//! and the synthetic dyad-process generator.

mod descriptives;
mod impute;
mod io;
mod synth;

pub use descriptives::{descriptives, Descriptives, VariableSummary};
pub use impute::impute_outcomes;
pub use io::{load_dataset, write_dataset};
pub use synth::{generate_synthetic, SyntheticConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum model sequence length: shorter sequences are padded, longer
/// ones truncated.
pub const MAX_SEQ_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Boy,
    Girl,
}

impl Gender {
    /// Encoding used everywhere: boy=0, girl=1.
    pub fn as_index(self) -> usize {
        match self {
            Gender::Boy => 0,
            Gender::Girl => 1,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boy" | "0" => Ok(Gender::Boy),
            "girl" | "1" => Ok(Gender::Girl),
            other => Err(Error::Ingestion(format!("unknown gender value `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Boy => "boy",
            Gender::Girl => "girl",
        }
    }
}

/// One family's ingested record: paired behavior sequences rated per
/// 15-second interval, demographics, and outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDyadObservation {
    pub dyad_id: String,
    pub gender: Gender,
    /// Maternal autonomy support per interval, each in [0, 3]; `None` =
    /// interval missing.
    pub mother_support: Vec<Option<f64>>,
    /// Child defeat per interval (raw rating before binarization), each
    /// in [0, 3].
    pub child_defeat: Vec<Option<f64>>,
    /// Externalizing problems at T1, in [0, 2].
    pub externalizing_t1: f64,
    /// Externalizing problems at T2 (the prediction target), in [0, 2].
    pub externalizing_t2: Option<f64>,
    /// Child inhibitory control, in [1, 7].
    pub inhibitory_control: Option<f64>,
}

impl RawDyadObservation {
    pub fn validate(&self) -> Result<()> {
        let id = &self.dyad_id;
        if self.mother_support.len() != self.child_defeat.len() {
            return Err(Error::Ingestion(format!(
                "dyad {id}: mother and child sequences have unequal lengths ({} vs {})",
                self.mother_support.len(),
                self.child_defeat.len()
            )));
        }
        if self.mother_support.is_empty() {
            return Err(Error::Ingestion(format!("dyad {id}: empty sequence")));
        }
        for (t, v) in self.mother_support.iter().enumerate() {
            if let Some(v) = v {
                if !(0.0..=3.0).contains(v) {
                    return Err(Error::Ingestion(format!(
                        "dyad {id}, interval {}: maternal rating {v} outside [0, 3]",
                        t + 1
                    )));
                }
            }
        }
        for (t, v) in self.child_defeat.iter().enumerate() {
            if let Some(v) = v {
                if !(0.0..=3.0).contains(v) {
                    return Err(Error::Ingestion(format!(
                        "dyad {id}, interval {}: child rating {v} outside [0, 3]",
                        t + 1
                    )));
                }
            }
        }
        if !(0.0..=2.0).contains(&self.externalizing_t1) {
            return Err(Error::Ingestion(format!(
                "dyad {id}: externalizing T1 {} outside [0, 2]",
                self.externalizing_t1
            )));
        }
        if let Some(t2) = self.externalizing_t2 {
            if !(0.0..=2.0).contains(&t2) {
                return Err(Error::Ingestion(format!(
                    "dyad {id}: externalizing T2 {t2} outside [0, 2]"
                )));
            }
        }
        if let Some(d) = self.inhibitory_control {
            if !(1.0..=7.0).contains(&d) {
                return Err(Error::Ingestion(format!(
                    "dyad {id}: inhibitory control {d} outside [1, 7]"
                )));
            }
        }
        Ok(())
    }

    /// Person mean of observed maternal ratings (full sequence).
    pub fn raw_mother_mean(&self) -> Result<f64> {
        person_mean(&self.mother_support)
    }

    /// Person mean of observed, binarized child defeat (full sequence).
    pub fn raw_child_mean(&self) -> Result<f64> {
        let bin: Vec<Option<f64>> = self
            .child_defeat
            .iter()
            .map(|v| binarize_defeat(*v).map(|b| b.map(|x| x as f64)))
            .collect::<Result<_>>()?;
        person_mean(&bin)
    }
}

/// A model input for the embedding layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Numerical(f64),
    Categorical(usize),
}

/// Model-ready record: filled, binarized, padded sequences plus the
/// individual feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedDyad {
    pub dyad_id: String,
    /// Maternal ratings, length [`MAX_SEQ_LEN`]; padded positions are 0.
    pub mother_seq: Vec<f64>,
    /// Binarized child defeat (0/1), same layout.
    pub child_seq: Vec<f64>,
    /// `true` at observed positions; leading `n_observed` entries.
    pub mask: Vec<bool>,
    pub n_observed: usize,
    /// Person mean of the maternal sequence over observed positions.
    pub mother_mean: f64,
    /// Person mean of the binarized child sequence over observed positions.
    pub child_mean: f64,
    pub gender: Gender,
    pub externalizing_t1: f64,
    pub externalizing_t2: Option<f64>,
    pub inhibitory_control: Option<f64>,
    /// Embedding inputs in fixed order: mother mean, child mean,
    /// externalizing T1, gender, then inhibitory control when present.
    /// Numerical entries are raw after [`preprocess`] and z-scored after
    /// [`crate::model::FeatureScaler::transform`].
    pub features: Vec<FeatureValue>,
}

impl ProcessedDyad {
    fn check_invariants(&self) -> Result<()> {
        let id = &self.dyad_id;
        let l = self.mother_seq.len();
        if self.child_seq.len() != l || self.mask.len() != l {
            return Err(Error::Internal(format!("dyad {id}: ragged processed record")));
        }
        if self.n_observed == 0 || self.n_observed > l {
            return Err(Error::Internal(format!(
                "dyad {id}: n_observed {} out of range",
                self.n_observed
            )));
        }
        for (t, &m) in self.mask.iter().enumerate() {
            if m != (t < self.n_observed) {
                return Err(Error::Internal(format!(
                    "dyad {id}: mask is not a leading block at position {t}"
                )));
            }
            if !m && (self.mother_seq[t] != 0.0 || self.child_seq[t] != 0.0) {
                return Err(Error::Internal(format!(
                    "dyad {id}: padded position {t} holds nonzero value"
                )));
            }
        }
        if self
            .child_seq
            .iter()
            .take(self.n_observed)
            .any(|&v| v != 0.0 && v != 1.0)
        {
            return Err(Error::Internal(format!("dyad {id}: child sequence not binary")));
        }
        Ok(())
    }
}

/// Binary recode of a defeat rating: 0 stays 0, any positive expression
/// becomes 1, missing stays missing.
pub fn binarize_defeat(rating: Option<f64>) -> Result<Option<u8>> {
    match rating {
        None => Ok(None),
        Some(v) if v < 0.0 => Err(Error::Ingestion(format!(
            "defeat rating {v} is negative"
        ))),
        Some(v) if v > 0.0 => Ok(Some(1)),
        Some(_) => Ok(Some(0)),
    }
}

/// Mean over observed values only.
pub fn person_mean(seq: &[Option<f64>]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in seq.iter().flatten() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("fully missing sequence".into()));
    }
    Ok(sum / n as f64)
}

/// Fix the sequence length: keep the first `min(n, l_max)` values, pad
/// the rest with zeros, and return the observation mask.
pub fn pad_or_truncate(seq: &[f64], l_max: usize) -> (Vec<f64>, Vec<bool>) {
    let n = seq.len().min(l_max);
    let mut out = vec![0.0; l_max];
    let mut mask = vec![false; l_max];
    out[..n].copy_from_slice(&seq[..n]);
    for m in mask.iter_mut().take(n) {
        *m = true;
    }
    (out, mask)
}

/// Fill missing intervals: maternal gaps take the person mean of observed
/// maternal ratings (inert once sequences are centered), child gaps take
/// 0 (the modal value). The returned record has no missing intervals.
pub fn impute_intervals(dyad: &RawDyadObservation) -> Result<RawDyadObservation> {
    let mother_fill = person_mean(&dyad.mother_support)?;
    // Errors if the child sequence is fully missing.
    person_mean(&dyad.child_defeat)?;
    let mut out = dyad.clone();
    for v in out.mother_support.iter_mut() {
        if v.is_none() {
            *v = Some(mother_fill);
        }
    }
    for v in out.child_defeat.iter_mut() {
        if v.is_none() {
            *v = Some(0.0);
        }
    }
    Ok(out)
}

/// Full per-dyad preprocessing: fill intervals, binarize defeat, truncate
/// to `l_max`, compute person means over the kept (pre-padding) data, pad.
pub fn preprocess(dyad: &RawDyadObservation, l_max: usize) -> Result<ProcessedDyad> {
    if l_max == 0 {
        return Err(Error::Config("l_max must be at least 1".into()));
    }
    dyad.validate()?;
    let filled = impute_intervals(dyad)?;

    let mother_vals: Vec<f64> = filled.mother_support.iter().map(|v| v.unwrap()).collect();
    let child_vals: Vec<f64> = filled
        .child_defeat
        .iter()
        .map(|v| binarize_defeat(*v).map(|b| b.unwrap() as f64))
        .collect::<Result<_>>()?;

    let n_observed = mother_vals.len().min(l_max);
    let mother_mean = mother_vals[..n_observed].iter().sum::<f64>() / n_observed as f64;
    let child_mean = child_vals[..n_observed].iter().sum::<f64>() / n_observed as f64;

    let (mother_seq, mask) = pad_or_truncate(&mother_vals, l_max);
    let (child_seq, _) = pad_or_truncate(&child_vals, l_max);

    let mut features = vec![
        FeatureValue::Numerical(mother_mean),
        FeatureValue::Numerical(child_mean),
        FeatureValue::Numerical(dyad.externalizing_t1),
        FeatureValue::Categorical(dyad.gender.as_index()),
    ];
    if let Some(d) = dyad.inhibitory_control {
        features.push(FeatureValue::Numerical(d));
    }

    let out = ProcessedDyad {
        dyad_id: dyad.dyad_id.clone(),
        mother_seq,
        child_seq,
        mask,
        n_observed,
        mother_mean,
        child_mean,
        gender: dyad.gender,
        externalizing_t1: dyad.externalizing_t1,
        externalizing_t2: dyad.externalizing_t2,
        inhibitory_control: dyad.inhibitory_control,
        features,
    };
    out.check_invariants()?;
    Ok(out)
}

pub fn preprocess_dataset(
    dataset: &[RawDyadObservation],
    l_max: usize,
) -> Result<Vec<ProcessedDyad>> {
    dataset.iter().map(|d| preprocess(d, l_max)).collect()
}

#[cfg(test)]
pub(crate) fn toy_raw(id: &str, mother: &[f64], child: &[f64], t1: f64, t2: Option<f64>) -> RawDyadObservation {
    RawDyadObservation {
        dyad_id: id.to_string(),
        gender: Gender::Boy,
        mother_support: mother.iter().map(|&v| Some(v)).collect(),
        child_defeat: child.iter().map(|&v| Some(v)).collect(),
        externalizing_t1: t1,
        externalizing_t2: t2,
        inhibitory_control: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binarize_cases() {
        assert_eq!(binarize_defeat(Some(0.0)).unwrap(), Some(0));
        assert_eq!(binarize_defeat(Some(0.5)).unwrap(), Some(1));
        assert_eq!(binarize_defeat(Some(3.0)).unwrap(), Some(1));
        assert_eq!(binarize_defeat(None).unwrap(), None);
        assert!(binarize_defeat(Some(-0.1)).is_err());
    }

    #[test]
    fn person_mean_cases() {
        assert_eq!(person_mean(&[Some(1.0), Some(1.0), Some(1.0)]).unwrap(), 1.0);
        assert_eq!(person_mean(&[Some(0.0), None, Some(2.0)]).unwrap(), 1.0);
        assert!(matches!(person_mean(&[None, None]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn person_mean_matches_direct_summation() {
        let seq: Vec<Option<f64>> = (0..17)
            .map(|i| if i % 5 == 0 { None } else { Some(0.37 * i as f64) })
            .collect();
        let observed: Vec<f64> = seq.iter().flatten().copied().collect();
        let expect = observed.iter().sum::<f64>() / observed.len() as f64;
        assert!((person_mean(&seq).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn pad_or_truncate_cases() {
        let (seq, mask) = pad_or_truncate(&[1.0; 20], 20);
        assert_eq!(seq, vec![1.0; 20]);
        assert!(mask.iter().all(|&m| m));

        let (seq, mask) = pad_or_truncate(&[1.0, 2.0, 3.0], 20);
        assert_eq!(&seq[..3], &[1.0, 2.0, 3.0]);
        assert!(seq[3..].iter().all(|&v| v == 0.0));
        assert_eq!(mask.iter().filter(|&&m| m).count(), 3);
        assert!(!mask[3]);

        let long: Vec<f64> = (0..25).map(|i| i as f64 * 0.1).collect();
        let (seq, mask) = pad_or_truncate(&long, 20);
        assert_eq!(seq, &long[..20]);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn impute_intervals_cases() {
        let mut d = toy_raw("a", &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], 0.5, Some(0.5));
        d.mother_support[1] = None;
        d.child_defeat[1] = None;
        let filled = impute_intervals(&d).unwrap();
        assert_eq!(filled.mother_support[1], Some(2.0));
        assert_eq!(filled.child_defeat[1], Some(0.0));

        let clean = toy_raw("b", &[1.0, 2.0], &[0.0, 1.0], 0.5, None);
        assert_eq!(impute_intervals(&clean).unwrap(), clean);

        let mut all_missing = clean.clone();
        all_missing.mother_support = vec![None, None];
        assert!(impute_intervals(&all_missing).is_err());
    }

    #[test]
    fn preprocess_builds_valid_record() {
        let d = toy_raw(
            "a",
            &[0.5, 1.5, 2.5],
            &[0.0, 2.0, 0.0],
            0.8,
            Some(0.6),
        );
        let p = preprocess(&d, 20).unwrap();
        assert_eq!(p.n_observed, 3);
        assert!((p.mother_mean - 1.5).abs() < 1e-15);
        assert!((p.child_mean - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.child_seq[..3], [0.0, 1.0, 0.0]);
        assert_eq!(p.features.len(), 4);
    }

    #[test]
    fn preprocess_truncation_caps_means() {
        // 25 intervals; the last 5 must not influence the person mean.
        let mother: Vec<f64> = (0..25).map(|i| if i < 20 { 1.0 } else { 3.0 }).collect();
        let child = vec![0.0; 25];
        let d = toy_raw("a", &mother, &child, 0.5, None);
        let p = preprocess(&d, 20).unwrap();
        assert_eq!(p.mother_mean, 1.0);
        assert_eq!(p.n_observed, 20);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let mut d = toy_raw("a", &[1.0], &[0.0], 0.5, None);
        d.mother_support[0] = Some(3.5);
        assert!(d.validate().is_err());

        let mut d = toy_raw("b", &[1.0], &[0.0], 2.5, None);
        assert!(d.validate().is_err());
        d.externalizing_t1 = 1.0;
        d.inhibitory_control = Some(0.5);
        assert!(d.validate().is_err());
    }

    proptest! {
        #[test]
        fn means_are_computed_pre_padding(
            values in proptest::collection::vec(0.0f64..3.0, 1..40),
            l_max in 1usize..30,
        ) {
            let (padded, mask) = pad_or_truncate(&values, l_max);
            let kept: Vec<Option<f64>> = padded
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(&v, _)| Some(v))
                .collect();
            let truncated: Vec<Option<f64>> = values
                .iter()
                .take(l_max)
                .map(|&v| Some(v))
                .collect();
            prop_assert_eq!(
                person_mean(&kept).unwrap(),
                person_mean(&truncated).unwrap()
            );
        }
    }
}
