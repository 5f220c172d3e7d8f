//! Multiple imputation of missing T2 outcomes by stochastic regression.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::RawDyadObservation;
use crate::error::{Error, Result};
use crate::numcore::linreg::least_squares;

/// Outcome bounds: imputed values are clamped into [0, 2].
const OUTCOME_RANGE: (f64, f64) = (0.0, 2.0);

/// Produce `m` completed copies of the dataset.
///
/// The T2 outcome is regressed on {T1, gender, mother person mean, child
/// person mean} over complete cases; each missing outcome is filled with
/// the regression prediction plus Gaussian noise at the residual standard
/// deviation, independently per copy. Observed values are never touched.
pub fn impute_outcomes<R: Rng>(
    dataset: &[RawDyadObservation],
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<RawDyadObservation>>> {
    if m == 0 {
        return Err(Error::Config("imputation count m must be at least 1".into()));
    }
    let missing: Vec<usize> = dataset
        .iter()
        .enumerate()
        .filter(|(_, d)| d.externalizing_t2.is_none())
        .map(|(i, _)| i)
        .collect();
    if missing.is_empty() {
        return Ok(vec![dataset.to_vec(); m]);
    }

    let design_row = |d: &RawDyadObservation| -> Result<Vec<f64>> {
        Ok(vec![
            1.0,
            d.externalizing_t1,
            d.gender.as_index() as f64,
            d.raw_mother_mean()?,
            d.raw_child_mean()?,
        ])
    };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for d in dataset {
        if let Some(t2) = d.externalizing_t2 {
            xs.push(design_row(d)?);
            ys.push(t2);
        }
    }
    if xs.len() < 3 {
        return Err(Error::Imputation(format!(
            "only {} complete cases; need at least 3",
            xs.len()
        )));
    }
    let fit = least_squares(&xs, &ys).map_err(|e| {
        Error::Imputation(format!("insufficient complete cases for regression: {e}"))
    })?;

    let noise = if fit.residual_sd > 0.0 {
        Some(Normal::new(0.0, fit.residual_sd).map_err(|e| {
            Error::Imputation(format!("bad residual distribution: {e}"))
        })?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut copy = dataset.to_vec();
        for &i in &missing {
            let row = design_row(&copy[i])?;
            let mut value = fit.predict(&row);
            if let Some(n) = &noise {
                value += n.sample(rng);
            }
            copy[i].externalizing_t2 =
                Some(value.clamp(OUTCOME_RANGE.0, OUTCOME_RANGE.1));
        }
        out.push(copy);
    }
    Ok(out)
}
