//! Synthetic dyad-process generator.
//!
//! Each dyad follows a lagged two-series process: a centered maternal
//! series driven by its own past and by the child's previous defeat
//! state (with a dyad-specific child-to-mother coefficient), and a
//! binary child series driven by the previous maternal deviation and its
//! own persistence. The T2 outcome is an affine function of T1 and the
//! dyad's child-to-mother coefficient plus noise, so datasets carry a
//! known, recoverable signal.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Gender, RawDyadObservation};
use crate::error::{Error, Result};
use crate::numcore::sigmoid;

/// T1 outcome and inhibitory-control draws use these population moments.
const T1_MEAN: f64 = 0.69;
const T1_SD: f64 = 0.28;
const INHIB_MEAN: f64 = 4.78;
const INHIB_SD: f64 = 0.6;

/// Coefficients of the generative lagged dyadic process and outcome
/// model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_dyads: usize,
    pub seq_len: usize,
    /// Mean and sd of the per-dyad maternal level.
    pub mother_level_mean: f64,
    pub mother_level_sd: f64,
    /// Baseline probability of child defeat in an interval, in (0, 1).
    pub defeat_base_rate: f64,
    /// Mother-to-child lag: previous maternal deviation -> child defeat
    /// log-odds.
    pub lag_mother_to_child: f64,
    /// Center of the per-dyad child-to-mother lag coefficient.
    pub lag_child_to_mother: f64,
    /// Sd of the per-dyad child-to-mother coefficient around its center.
    pub lag_cm_spread: f64,
    pub ar_mother: f64,
    pub ar_child: f64,
    /// Innovation sd of the centered maternal series.
    pub mother_noise_sd: f64,
    pub outcome_intercept: f64,
    /// Weight of the dyad's child-to-mother coefficient in the T2
    /// outcome.
    pub outcome_coef_lag_cm: f64,
    pub outcome_coef_t1: f64,
    pub outcome_noise_sd: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_dyads: 50,
            seq_len: 20,
            mother_level_mean: 0.58,
            mother_level_sd: 0.29,
            defeat_base_rate: 0.2,
            lag_mother_to_child: 0.17,
            lag_child_to_mother: 0.11,
            lag_cm_spread: 0.3,
            ar_mother: 0.10,
            ar_child: 0.21,
            mother_noise_sd: 0.25,
            outcome_intercept: 0.30,
            outcome_coef_lag_cm: -0.44,
            outcome_coef_t1: 1.0,
            outcome_noise_sd: 0.10,
            rng_seed: 7,
        }
    }
}

impl SyntheticConfig {
    /// Preset with a strong, low-noise child-to-mother lag effect on the
    /// outcome; used for recoverability experiments.
    pub fn strong_lag_signal() -> Self {
        SyntheticConfig {
            n_dyads: 400,
            seq_len: 20,
            mother_level_mean: 0.9,
            mother_level_sd: 0.25,
            defeat_base_rate: 0.25,
            lag_mother_to_child: 0.0,
            lag_child_to_mother: 0.0,
            lag_cm_spread: 0.4,
            ar_mother: 0.1,
            ar_child: 0.5,
            mother_noise_sd: 0.12,
            outcome_intercept: 0.15,
            outcome_coef_lag_cm: -0.6,
            outcome_coef_t1: 1.0,
            outcome_noise_sd: 0.02,
            rng_seed: 11,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 {
            return Err(Error::Config("seq_len must be at least 1".into()));
        }
        if !(0.0 < self.defeat_base_rate && self.defeat_base_rate < 1.0) {
            return Err(Error::Config(format!(
                "defeat_base_rate {} must lie in (0, 1)",
                self.defeat_base_rate
            )));
        }
        if self.ar_mother.abs() >= 1.0 || self.ar_child.abs() >= 1.0 {
            return Err(Error::Config(
                "autoregressive coefficients must satisfy |ar| < 1".into(),
            ));
        }
        for (name, v) in [
            ("mother_level_sd", self.mother_level_sd),
            ("lag_cm_spread", self.lag_cm_spread),
            ("mother_noise_sd", self.mother_noise_sd),
            ("outcome_noise_sd", self.outcome_noise_sd),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a nonnegative number")));
            }
        }
        Ok(())
    }
}

fn draw_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("validated sd").sample(rng)
}

/// Generate a dataset under the configured process. Deterministic for a
/// given generator state.
pub fn generate_synthetic<R: Rng>(
    config: &SyntheticConfig,
    rng: &mut R,
) -> Result<Vec<RawDyadObservation>> {
    config.validate()?;
    let logit_base =
        (config.defeat_base_rate / (1.0 - config.defeat_base_rate)).ln();

    let mut out = Vec::with_capacity(config.n_dyads);
    for j in 0..config.n_dyads {
        let gender = if rng.random::<f64>() < 0.5 {
            Gender::Boy
        } else {
            Gender::Girl
        };
        let level = draw_normal(rng, config.mother_level_mean, config.mother_level_sd)
            .clamp(0.0, 3.0);
        let lag_cm_j =
            draw_normal(rng, config.lag_child_to_mother, config.lag_cm_spread);
        let t1 = draw_normal(rng, T1_MEAN, T1_SD).clamp(0.0, 2.0);
        let inhib = draw_normal(rng, INHIB_MEAN, INHIB_SD).clamp(1.0, 7.0);

        let mut mother = Vec::with_capacity(config.seq_len);
        let mut child = Vec::with_capacity(config.seq_len);
        let mut x_prev = 0.0; // centered maternal state
        let mut y_prev = 0.0; // child defeat state in {0, 1}
        for _ in 0..config.seq_len {
            let x = config.ar_mother * x_prev
                + lag_cm_j * y_prev
                + draw_normal(rng, 0.0, config.mother_noise_sd);
            let p_defeat = sigmoid(
                logit_base
                    + config.lag_mother_to_child * x_prev
                    + config.ar_child * (2.0 * y_prev - 1.0),
            );
            let y = if rng.random::<f64>() < p_defeat { 1.0 } else { 0.0 };

            mother.push(Some((level + x).clamp(0.0, 3.0)));
            child.push(Some(y));
            x_prev = x;
            y_prev = y;
        }

        let t2 = config.outcome_intercept
            + config.outcome_coef_t1 * t1
            + config.outcome_coef_lag_cm * lag_cm_j
            + draw_normal(rng, 0.0, config.outcome_noise_sd);

        let dyad = RawDyadObservation {
            dyad_id: format!("syn{j:04}"),
            gender,
            mother_support: mother,
            child_defeat: child,
            externalizing_t1: t1,
            externalizing_t2: Some(t2.clamp(0.0, 2.0)),
            inhibitory_control: Some(inhib),
        };
        dyad.validate()?;
        out.push(dyad);
    }
    Ok(out)
}
