//! Between-person descriptive statistics and bivariate correlations.

use crate::data::RawDyadObservation;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct VariableSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` when fewer than two values.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct Descriptives {
    pub variables: Vec<VariableSummary>,
    /// Pairwise-complete Pearson correlations; `None` when undefined
    /// (constant variable or fewer than two complete pairs).
    pub correlations: Vec<Vec<Option<f64>>>,
}

fn summarize(name: &str, values: &[Option<f64>]) -> Option<VariableSummary> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let n = present.len();
    let mean = present.iter().sum::<f64>() / n as f64;
    let sd = if n >= 2 {
        let ss: f64 = present.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    } else {
        None
    };
    let min = present.iter().copied().fold(f64::INFINITY, f64::min);
    let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(VariableSummary {
        name: name.to_string(),
        n,
        mean,
        sd,
        min,
        max,
    })
}

fn pairwise_correlation(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| x.zip(*y))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in &pairs {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some(cov / (vx.sqrt() * vy.sqrt()))
}

/// Per-variable mean/sd/range plus between-person correlations for the
/// study variables: person means of maternal support and (binarized)
/// child defeat, both outcomes, and inhibitory control.
pub fn descriptives(dataset: &[RawDyadObservation]) -> Result<Descriptives> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }

    let mut columns: Vec<(&str, Vec<Option<f64>>)> = vec![
        ("maut_mean", Vec::new()),
        ("cdef_mean", Vec::new()),
        ("ext_t1", Vec::new()),
        ("ext_t2", Vec::new()),
        ("inhibitory_control", Vec::new()),
    ];
    for d in dataset {
        columns[0].1.push(Some(d.raw_mother_mean()?));
        columns[1].1.push(Some(d.raw_child_mean()?));
        columns[2].1.push(Some(d.externalizing_t1));
        columns[3].1.push(d.externalizing_t2);
        columns[4].1.push(d.inhibitory_control);
    }

    let mut variables = Vec::new();
    let mut kept: Vec<&Vec<Option<f64>>> = Vec::new();
    for (name, values) in &columns {
        if let Some(summary) = summarize(name, values) {
            variables.push(summary);
            kept.push(values);
        }
    }

    let k = kept.len();
    let mut correlations = vec![vec![None; k]; k];
    for i in 0..k {
        correlations[i][i] = Some(1.0);
        for j in 0..i {
            let r = pairwise_correlation(kept[i], kept[j]);
            correlations[i][j] = r;
            correlations[j][i] = r;
        }
    }

    Ok(Descriptives {
        variables,
        correlations,
    })
}
