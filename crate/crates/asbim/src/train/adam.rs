//! Adam over the flat parameter vector.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// First and second moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn zeros(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

fn group_of<'a>(spans: &'a [(String, Range<usize>)], index: usize) -> &'a str {
    spans
        .iter()
        .find(|(_, span)| span.contains(&index))
        .map(|(name, _)| name.as_str())
        .unwrap_or("unknown")
}

/// One bias-corrected Adam update. `step_index` is 1-based.
pub fn adam_step(
    theta: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    step_index: usize,
    config: &TrainConfig,
    spans: &[(String, Range<usize>)],
) -> Result<()> {
    if theta.len() != grads.len() || theta.len() != state.m.len() {
        return Err(Error::Config(format!(
            "adam shape mismatch: {} params, {} grads, {} moments",
            theta.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if step_index == 0 {
        return Err(Error::Config("adam step_index is 1-based".into()));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite gradient in parameter group `{}`",
            group_of(spans, i)
        )));
    }

    let b1 = config.adam_beta1;
    let b2 = config.adam_beta2;
    let correction1 = 1.0 - b1.powi(step_index as i32);
    let correction2 = 1.0 - b2.powi(step_index as i32);
    for i in 0..theta.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / correction1;
        let v_hat = state.v[i] / correction2;
        theta[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}
