//! The ASBIM forward computation.
//!
//! A dyad's individual features are embedded and averaged into one
//! vector, which two projections turn into per-side behavior directions.
//! Each interval's centered behavior deviations scale those directions,
//! a trainable convex weight fuses the two sides, attention pools the
//! fused sequence, and a linear head predicts the T2 outcome residually
//! on top of the T1 outcome.
//!
//! The standalone functions here are the plain (untaped) operations;
//! [`forward`] builds the same computation on a gradient tape for
//! training. Both run through the same kernels.

mod checkpoint;
mod forward;
mod scaler;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    gradient_check, loss, predict, predict_with_attention, GradCheckReport, ParamBinding,
};
pub use scaler::FeatureScaler;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureValue, ProcessedDyad};
use crate::error::{Error, Result};
use crate::numcore::{dense_forward, masked_softmax, relu, sigmoid, Matrix, Vector};

/// Which individual features the model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Mother mean, child mean, externalizing T1, gender.
    Base,
    /// Base plus the child's inhibitory control.
    PlusInhibitoryControl,
}

impl Variant {
    pub fn feature_count(self) -> usize {
        match self {
            Variant::Base => 4,
            Variant::PlusInhibitoryControl => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Base => "asbim",
            Variant::PlusInhibitoryControl => "asbim_d",
        }
    }
}

/// Look-up table for one individual feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingTable {
    /// One row per distinct value.
    Categorical(Matrix),
    /// A single direction scaled by the feature value.
    Numerical(Vector),
}

impl EmbeddingTable {
    pub fn q(&self) -> usize {
        match self {
            EmbeddingTable::Categorical(m) => m.cols(),
            EmbeddingTable::Numerical(v) => v.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vector,
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub q: usize,
    pub h: usize,
    pub variant: Variant,
    /// One table per individual feature, in the fixed feature order.
    pub tables: Vec<EmbeddingTable>,
    /// Mother-side projection of the individual representation.
    pub w1: Matrix,
    pub b1: Vector,
    /// Child-side projection.
    pub w2: Matrix,
    pub b2: Vector,
    /// Logit of the convex fusion weight; gamma = sigmoid(gamma_logit).
    pub gamma_logit: f64,
    /// Attention projections q -> h.
    pub f1: DenseLayer,
    pub f2: DenseLayer,
    pub f3: DenseLayer,
    /// Prediction head over the pooled representation.
    pub w3: Vector,
    pub b3: f64,
}

impl ModelParameters {
    pub fn gamma(&self) -> f64 {
        sigmoid(self.gamma_logit)
    }

    /// Attention score scale, 1/sqrt(h).
    pub fn score_scale(&self) -> f64 {
        1.0 / (self.h as f64).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// Named parameter groups in canonical flat order.
    pub fn group_spans(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut spans = Vec::new();
        let mut pos = 0;
        let mut push = |name: String, len: usize, pos: &mut usize| {
            spans.push((name, *pos..*pos + len));
            *pos += len;
        };
        for (i, t) in self.tables.iter().enumerate() {
            let len = match t {
                EmbeddingTable::Categorical(m) => m.rows() * m.cols(),
                EmbeddingTable::Numerical(v) => v.dim(),
            };
            push(format!("table_{i}"), len, &mut pos);
        }
        push("w1".into(), self.w1.rows() * self.w1.cols(), &mut pos);
        push("b1".into(), self.b1.dim(), &mut pos);
        push("w2".into(), self.w2.rows() * self.w2.cols(), &mut pos);
        push("b2".into(), self.b2.dim(), &mut pos);
        for (name, layer) in [("f1", &self.f1), ("f2", &self.f2), ("f3", &self.f3)] {
            push(format!("{name}_w"), layer.w.rows() * layer.w.cols(), &mut pos);
            push(format!("{name}_b"), layer.b.dim(), &mut pos);
        }
        push("w3".into(), self.w3.dim(), &mut pos);
        push("b3".into(), 1, &mut pos);
        push("gamma_logit".into(), 1, &mut pos);
        spans
    }

    /// Flatten every scalar parameter in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in &self.tables {
            match t {
                EmbeddingTable::Categorical(m) => out.extend_from_slice(m.as_slice()),
                EmbeddingTable::Numerical(v) => out.extend_from_slice(v.as_slice()),
            }
        }
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(self.b1.as_slice());
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(self.b2.as_slice());
        for layer in [&self.f1, &self.f2, &self.f3] {
            out.extend_from_slice(layer.w.as_slice());
            out.extend_from_slice(layer.b.as_slice());
        }
        out.extend_from_slice(self.w3.as_slice());
        out.push(self.b3);
        out.push(self.gamma_logit);
        out
    }

    /// Rebuild parameters with the same shapes from a flat vector.
    pub fn with_flat(&self, flat: &[f64]) -> Result<ModelParameters> {
        let expect = self.to_flat().len();
        if flat.len() != expect {
            return Err(Error::Config(format!(
                "flat parameter vector has {} entries, expected {expect}",
                flat.len()
            )));
        }
        let mut pos = 0;
        let mut take = |pos: &mut usize, len: usize| {
            let s = flat[*pos..*pos + len].to_vec();
            *pos += len;
            s
        };
        let mut out = self.clone();
        for t in out.tables.iter_mut() {
            match t {
                EmbeddingTable::Categorical(m) => {
                    let data = take(&mut pos, m.rows() * m.cols());
                    *m = Matrix::new(m.rows(), m.cols(), data)?;
                }
                EmbeddingTable::Numerical(v) => {
                    let data = take(&mut pos, v.dim());
                    *v = Vector::new(data)?;
                }
            }
        }
        let w1_data = take(&mut pos, out.w1.rows() * out.w1.cols());
        out.w1 = Matrix::new(out.w1.rows(), out.w1.cols(), w1_data)?;
        out.b1 = Vector::new(take(&mut pos, out.b1.dim()))?;
        let w2_data = take(&mut pos, out.w2.rows() * out.w2.cols());
        out.w2 = Matrix::new(out.w2.rows(), out.w2.cols(), w2_data)?;
        out.b2 = Vector::new(take(&mut pos, out.b2.dim()))?;
        for layer in [&mut out.f1, &mut out.f2, &mut out.f3] {
            let w_data = take(&mut pos, layer.w.rows() * layer.w.cols());
            layer.w = Matrix::new(layer.w.rows(), layer.w.cols(), w_data)?;
            layer.b = Vector::new(take(&mut pos, layer.b.dim()))?;
        }
        out.w3 = Vector::new(take(&mut pos, out.w3.dim()))?;
        out.b3 = flat[pos];
        pos += 1;
        out.gamma_logit = flat[pos];
        Ok(out)
    }

    /// Flat-order mask of parameters subject to L2 regularization:
    /// weights and embeddings yes, biases and the fusion logit no.
    pub fn l2_mask(&self) -> Vec<bool> {
        let mut mask = Vec::new();
        for (name, span) in self.group_spans() {
            let regularized = !(name.starts_with('b')
                || name.ends_with("_b")
                || name == "gamma_logit");
            mask.extend(std::iter::repeat(regularized).take(span.len()));
        }
        mask
    }
}

/// Embed one feature value through its table.
pub fn embed_feature(value: FeatureValue, table: &EmbeddingTable) -> Result<Vector> {
    match (value, table) {
        (FeatureValue::Categorical(i), EmbeddingTable::Categorical(m)) => {
            if i >= m.rows() {
                return Err(Error::Config(format!(
                    "categorical value {i} out of range for table with {} rows",
                    m.rows()
                )));
            }
            Vector::new(m.row(i).to_vec())
        }
        (FeatureValue::Numerical(x), EmbeddingTable::Numerical(v)) => {
            if !x.is_finite() {
                return Err(Error::Numerical("non-finite feature value".into()));
            }
            Vector::new(v.iter().map(|e| x * e).collect())
        }
        _ => Err(Error::Config(
            "feature kind does not match its embedding table".into(),
        )),
    }
}

/// Elementwise mean of the embedded feature vectors.
pub fn individual_representation(embedded: &[Vector]) -> Result<Vector> {
    if embedded.is_empty() {
        return Err(Error::Config("no feature vectors to average".into()));
    }
    let dim = embedded[0].dim();
    let mut out = Vector::zeros(dim);
    for v in embedded {
        if v.dim() != dim {
            return Err(Error::Config("feature vectors of unequal dims".into()));
        }
        for (o, e) in out.as_mut_slice().iter_mut().zip(v.iter()) {
            *o += e;
        }
    }
    let k = embedded.len() as f64;
    for o in out.as_mut_slice() {
        *o /= k;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Mother,
    Child,
}

/// Per-interval behavior representation: the centered deviation scales
/// the side's ReLU-projected individual representation.
pub fn behavior_representation(
    side: Side,
    s_i: f64,
    s_bar: f64,
    p: &Vector,
    params: &ModelParameters,
) -> Result<Vector> {
    let (w, b) = match side {
        Side::Mother => (&params.w1, &params.b1),
        Side::Child => (&params.w2, &params.b2),
    };
    let projected = relu(&dense_forward(p, w, b)?);
    let dev = s_i - s_bar;
    Vector::new(projected.iter().map(|e| dev * e).collect())
}

/// Convex fusion of the two sides: gamma * mother + (1 - gamma) * child,
/// with gamma = sigmoid(gamma_logit).
pub fn interaction_representation(
    s_m: &Vector,
    s_c: &Vector,
    gamma_logit: f64,
) -> Result<Vector> {
    if s_m.dim() != s_c.dim() {
        return Err(Error::Config("interaction inputs of unequal dims".into()));
    }
    let gamma = sigmoid(gamma_logit);
    Vector::new(
        s_m.iter()
            .zip(s_c.iter())
            .map(|(m, c)| gamma * m + (1.0 - gamma) * c)
            .collect(),
    )
}

/// Attention pooling over the interaction sequence.
///
/// Each position scores itself: the inner product of its own two
/// projections, scaled by 1/sqrt(h). Scores pass through the masked
/// softmax; the pooled output is the weighted sum of the first
/// projection. Returns the pooled vector and the attention weights
/// (exactly 0 at masked positions).
pub fn attention_pool(
    seq_reps: &[Vector],
    mask: &[bool],
    params: &ModelParameters,
) -> Result<(Vector, Vec<f64>)> {
    if seq_reps.len() != mask.len() {
        return Err(Error::Config("sequence/mask length mismatch".into()));
    }
    let scale = params.score_scale();
    let mut scores = vec![0.0; seq_reps.len()];
    let mut projected = vec![None; seq_reps.len()];
    for (i, (rep, &m)) in seq_reps.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        let f1 = dense_forward(rep, &params.f1.w, &params.f1.b)?;
        let f2 = dense_forward(rep, &params.f2.w, &params.f2.b)?;
        let f3 = dense_forward(rep, &params.f3.w, &params.f3.b)?;
        let mut dot = 0.0;
        for (a, b) in f2.iter().zip(f3.iter()) {
            dot += a * b;
        }
        scores[i] = dot * scale;
        projected[i] = Some(f1);
    }
    let alphas = masked_softmax(&scores, mask)?;
    let mut pooled = Vector::zeros(params.h);
    for (i, f1) in projected.iter().enumerate() {
        if let Some(f1) = f1 {
            for (o, e) in pooled.as_mut_slice().iter_mut().zip(f1.iter()) {
                *o += alphas[i] * e;
            }
        }
    }
    Ok((pooled, alphas))
}

/// Check that a dyad satisfies the variant's feature requirements and
/// return the features the variant consumes.
pub(crate) fn variant_features(
    dyad: &ProcessedDyad,
    variant: Variant,
) -> Result<&[FeatureValue]> {
    let need = variant.feature_count();
    if dyad.features.len() < need {
        return Err(Error::Contract(format!(
            "dyad {}: variant needs {need} features, found {}",
            dyad.dyad_id,
            dyad.features.len()
        )));
    }
    Ok(&dyad.features[..need])
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;
    use crate::train::{init_params, TrainConfig};

    pub fn tiny_params(q: usize, h: usize, variant: Variant, seed: u64) -> ModelParameters {
        let config = TrainConfig {
            q,
            h,
            variant,
            seed,
            ..TrainConfig::default()
        };
        init_params(&config)
    }
}
