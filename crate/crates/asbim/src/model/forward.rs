//! Tape-built forward pass: prediction, batch loss, and the gradient
//! check that gates them.
//!
//! Prediction and loss are evaluated by building the computation on a
//! [`Tape`] and reading the output value, so the number any caller sees
//! is exactly the number training differentiates.

use crate::data::ProcessedDyad;
use crate::error::{Error, Result};
use crate::model::{variant_features, EmbeddingTable, ModelParameters};
use crate::numcore::tape::{GradientSet, NodeId, Tape};
use crate::numcore::{finite_difference_check, Vector};

/// Leaf ids of every parameter tensor registered on one tape.
pub struct ParamBinding {
    pub tables: Vec<NodeId>,
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
    pub f1_w: NodeId,
    pub f1_b: NodeId,
    pub f2_w: NodeId,
    pub f2_b: NodeId,
    pub f3_w: NodeId,
    pub f3_b: NodeId,
    pub w3: NodeId,
    pub b3: NodeId,
    pub gamma_logit: NodeId,
}

impl ParamBinding {
    /// Register every parameter as a leaf, in canonical order.
    pub fn register(tape: &mut Tape, params: &ModelParameters) -> ParamBinding {
        let tables = params
            .tables
            .iter()
            .map(|t| match t {
                EmbeddingTable::Categorical(m) => tape.leaf_matrix(m.clone()),
                EmbeddingTable::Numerical(v) => tape.leaf_vector(v.clone()),
            })
            .collect();
        ParamBinding {
            tables,
            w1: tape.leaf_matrix(params.w1.clone()),
            b1: tape.leaf_vector(params.b1.clone()),
            w2: tape.leaf_matrix(params.w2.clone()),
            b2: tape.leaf_vector(params.b2.clone()),
            f1_w: tape.leaf_matrix(params.f1.w.clone()),
            f1_b: tape.leaf_vector(params.f1.b.clone()),
            f2_w: tape.leaf_matrix(params.f2.w.clone()),
            f2_b: tape.leaf_vector(params.f2.b.clone()),
            f3_w: tape.leaf_matrix(params.f3.w.clone()),
            f3_b: tape.leaf_vector(params.f3.b.clone()),
            w3: tape.leaf_vector(params.w3.clone()),
            b3: tape.leaf_scalar(params.b3),
            gamma_logit: tape.leaf_scalar(params.gamma_logit),
        }
    }

    /// Collect gradients into canonical flat order (matching
    /// [`ModelParameters::to_flat`]).
    pub fn flat_gradients(
        &self,
        params: &ModelParameters,
        grads: &GradientSet,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (id, table) in self.tables.iter().zip(&params.tables) {
            match table {
                EmbeddingTable::Categorical(_) => {
                    out.extend_from_slice(grads.matrix(*id)?.as_slice())
                }
                EmbeddingTable::Numerical(_) => {
                    out.extend_from_slice(grads.vector(*id)?.as_slice())
                }
            }
        }
        out.extend_from_slice(grads.matrix(self.w1)?.as_slice());
        out.extend_from_slice(grads.vector(self.b1)?.as_slice());
        out.extend_from_slice(grads.matrix(self.w2)?.as_slice());
        out.extend_from_slice(grads.vector(self.b2)?.as_slice());
        for (w, b) in [
            (self.f1_w, self.f1_b),
            (self.f2_w, self.f2_b),
            (self.f3_w, self.f3_b),
        ] {
            out.extend_from_slice(grads.matrix(w)?.as_slice());
            out.extend_from_slice(grads.vector(b)?.as_slice());
        }
        out.extend_from_slice(grads.vector(self.w3)?.as_slice());
        out.push(grads.scalar(self.b3)?);
        out.push(grads.scalar(self.gamma_logit)?);
        Ok(out)
    }
}

/// Prediction subgraph handles for one dyad.
pub struct DyadGraph {
    pub prediction: NodeId,
    /// Softmax output over the dyad's unmasked positions.
    alphas: NodeId,
    /// Original sequence indices of those positions.
    unmasked: Vec<usize>,
    seq_len: usize,
}

/// Build one dyad's prediction on the tape.
pub fn build_prediction(
    tape: &mut Tape,
    binding: &ParamBinding,
    params: &ModelParameters,
    dyad: &ProcessedDyad,
) -> Result<DyadGraph> {
    let features = variant_features(dyad, params.variant)?;
    if features.len() != binding.tables.len() {
        return Err(Error::Config(format!(
            "dyad {}: {} features for {} embedding tables",
            dyad.dyad_id,
            features.len(),
            binding.tables.len()
        )));
    }

    // Individual representation: average of embedded features.
    let mut embedded = Vec::with_capacity(features.len());
    for (value, (&table_id, table)) in features
        .iter()
        .zip(binding.tables.iter().zip(&params.tables))
    {
        let node = match (value, table) {
            (crate::data::FeatureValue::Categorical(i), EmbeddingTable::Categorical(_)) => {
                tape.row_lookup(table_id, *i)?
            }
            (crate::data::FeatureValue::Numerical(x), EmbeddingTable::Numerical(_)) => {
                if !x.is_finite() {
                    return Err(Error::Numerical(format!(
                        "dyad {}: non-finite feature value",
                        dyad.dyad_id
                    )));
                }
                tape.scale_const(table_id, *x)
            }
            _ => {
                return Err(Error::Config(format!(
                    "dyad {}: feature kind does not match its embedding table",
                    dyad.dyad_id
                )))
            }
        };
        embedded.push(node);
    }
    let p = tape.mean_vecs(&embedded)?;

    // Side projections, shared across positions.
    let mother_dense = tape.dense(p, binding.w1, binding.b1)?;
    let mother_dir = tape.relu(mother_dense);
    let child_dense = tape.dense(p, binding.w2, binding.b2)?;
    let child_dir = tape.relu(child_dense);

    let gamma = tape.sigmoid(binding.gamma_logit);
    let one_minus_gamma = tape.affine_const(gamma, -1.0, 1.0);

    // Per-position fused representations and attention scores over the
    // unmasked positions only; masked positions contribute nothing.
    let scale = params.score_scale();
    let mut unmasked = Vec::new();
    let mut f1_nodes = Vec::new();
    let mut score_nodes = Vec::new();
    for (i, &m) in dyad.mask.iter().enumerate() {
        if !m {
            continue;
        }
        let s_m = tape.scale_const(mother_dir, dyad.mother_seq[i] - dyad.mother_mean);
        let s_c = tape.scale_const(child_dir, dyad.child_seq[i] - dyad.child_mean);
        let fused_m = tape.mul_scalar_vec(gamma, s_m);
        let fused_c = tape.mul_scalar_vec(one_minus_gamma, s_c);
        let fused = tape.add_vec(fused_m, fused_c);

        let f1 = tape.dense(fused, binding.f1_w, binding.f1_b)?;
        let f2 = tape.dense(fused, binding.f2_w, binding.f2_b)?;
        let f3 = tape.dense(fused, binding.f3_w, binding.f3_b)?;
        let dot = tape.dot(f2, f3);
        let score = tape.affine_const(dot, scale, 0.0);

        unmasked.push(i);
        f1_nodes.push(f1);
        score_nodes.push(score);
    }
    if unmasked.is_empty() {
        return Err(Error::Degenerate(format!(
            "dyad {}: all positions masked",
            dyad.dyad_id
        )));
    }

    let stacked = tape.stack(&score_nodes);
    let alphas = tape.softmax(stacked)?;

    let mut pooled = None;
    for (j, &f1) in f1_nodes.iter().enumerate() {
        let a_j = tape.index(alphas, j);
        let term = tape.mul_scalar_vec(a_j, f1);
        pooled = Some(match pooled {
            None => term,
            Some(acc) => tape.add_vec(acc, term),
        });
    }
    let pooled = pooled.expect("at least one unmasked position");

    // Residual head: <w3, pooled> + b3 + externalizing T1.
    let head = tape.dot(binding.w3, pooled);
    let with_bias = tape.add_scalar(head, binding.b3);
    let prediction = tape.affine_const(with_bias, 1.0, dyad.externalizing_t1);

    Ok(DyadGraph {
        prediction,
        alphas,
        unmasked,
        seq_len: dyad.mask.len(),
    })
}

/// Build the full-batch loss: the sum of squared prediction errors plus
/// `l2_coef` times the sum of squares of weights and embeddings (biases
/// and the fusion logit excluded).
pub fn build_loss(
    tape: &mut Tape,
    binding: &ParamBinding,
    params: &ModelParameters,
    dataset: &[ProcessedDyad],
    l2_coef: f64,
) -> Result<NodeId> {
    if dataset.is_empty() {
        return Err(Error::Contract("loss over an empty dataset".into()));
    }
    let mut total: Option<NodeId> = None;
    for dyad in dataset {
        let t2 = dyad.externalizing_t2.ok_or_else(|| {
            Error::Contract(format!(
                "dyad {}: missing T2 outcome; impute before training",
                dyad.dyad_id
            ))
        })?;
        let graph = build_prediction(tape, binding, params, dyad)?;
        let err = tape.affine_const(graph.prediction, 1.0, -t2);
        let sq = tape.square(err);
        total = Some(match total {
            None => sq,
            Some(acc) => tape.add_scalar(acc, sq),
        });
    }
    let data_term = total.expect("dataset nonempty");

    let mut penalty: Option<NodeId> = None;
    for &id in binding
        .tables
        .iter()
        .chain([&binding.w1, &binding.w2, &binding.f1_w, &binding.f2_w, &binding.f3_w, &binding.w3])
    {
        let ss = tape.sum_squares(id);
        penalty = Some(match penalty {
            None => ss,
            Some(acc) => tape.add_scalar(acc, ss),
        });
    }
    let penalty = penalty.expect("weight leaves exist");
    let scaled_penalty = tape.affine_const(penalty, l2_coef, 0.0);
    Ok(tape.add_scalar(data_term, scaled_penalty))
}

/// Predict one dyad's T2 outcome.
pub fn predict(dyad: &ProcessedDyad, params: &ModelParameters) -> Result<f64> {
    let mut tape = Tape::new();
    let binding = ParamBinding::register(&mut tape, params);
    let graph = build_prediction(&mut tape, &binding, params, dyad)?;
    Ok(tape.scalar_value(graph.prediction))
}

/// Predict and also return the attention weights laid out over the full
/// padded sequence (0 at masked positions).
pub fn predict_with_attention(
    dyad: &ProcessedDyad,
    params: &ModelParameters,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let binding = ParamBinding::register(&mut tape, params);
    let graph = build_prediction(&mut tape, &binding, params, dyad)?;
    let alphas = tape.vector_value(graph.alphas);
    let mut full = vec![0.0; graph.seq_len];
    for (j, &i) in graph.unmasked.iter().enumerate() {
        full[i] = alphas[j];
    }
    Ok((tape.scalar_value(graph.prediction), full))
}

/// Full-batch training loss.
pub fn loss(dataset: &[ProcessedDyad], params: &ModelParameters, l2_coef: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let binding = ParamBinding::register(&mut tape, params);
    let node = build_loss(&mut tape, &binding, params, dataset, l2_coef)?;
    Ok(tape.scalar_value(node))
}

/// Loss value and its gradient in canonical flat order.
pub fn loss_and_gradients(
    dataset: &[ProcessedDyad],
    params: &ModelParameters,
    l2_coef: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let binding = ParamBinding::register(&mut tape, params);
    let node = build_loss(&mut tape, &binding, params, dataset, l2_coef)?;
    let grads = tape.backward(node)?;
    let flat = binding.flat_gradients(params, &grads)?;
    Ok((tape.scalar_value(node), flat))
}

/// Result of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst relative error per parameter group, in canonical order.
    pub per_group: Vec<(String, f64)>,
}

/// Compare the tape's gradients of the batch loss against central finite
/// differences at the given step.
///
/// `corrupt` deliberately perturbs one analytic gradient entry first; it
/// exists as a negative control for the check itself.
pub fn gradient_check(
    dataset: &[ProcessedDyad],
    params: &ModelParameters,
    l2_coef: f64,
    step: f64,
    corrupt: bool,
) -> Result<GradCheckReport> {
    let theta = params.to_flat();
    let (_, mut analytic) = loss_and_gradients(dataset, params, l2_coef)?;
    if corrupt {
        if let Some(g) = analytic.first_mut() {
            *g += 1e-2;
        }
    }

    let eval = |flat: &[f64]| -> Result<f64> {
        let probe = params.with_flat(flat)?;
        loss(dataset, &probe, l2_coef)
    };

    // Per-parameter errors, grouped for reporting; the overall max is the
    // same quantity finite_difference_check returns.
    let mut per_group = Vec::new();
    let mut max_rel = 0.0f64;
    for (name, span) in params.group_spans() {
        let mut worst = 0.0f64;
        for i in span {
            let mut probe = theta.clone();
            probe[i] = theta[i] + step;
            let plus = eval(&probe)?;
            probe[i] = theta[i] - step;
            let minus = eval(&probe)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss while probing parameter {i}"
                )));
            }
            let central = (plus - minus) / (2.0 * step);
            let rel = (analytic[i] - central).abs() / central.abs().max(1e-8);
            if rel > worst {
                worst = rel;
            }
        }
        max_rel = max_rel.max(worst);
        per_group.push((name, worst));
    }
    debug_assert!({
        // The dedicated checker must agree with the grouped sweep.
        let reference = finite_difference_check(eval, &theta, &analytic, step)?;
        (reference - max_rel).abs() <= 1e-12 * reference.abs().max(1.0)
    });

    Ok(GradCheckReport {
        max_rel_error: max_rel,
        per_group,
    })
}
