//! Full-batch Adam training with deterministic seeding.

mod adam;

pub use adam::{adam_step, AdamState};

use serde::{Deserialize, Serialize};

use crate::data::ProcessedDyad;
use crate::error::{Error, Result};
use crate::model::forward::loss_and_gradients;
use crate::model::{DenseLayer, EmbeddingTable, ModelParameters, Variant};
use crate::numcore::{Matrix, Vector};
use crate::rng::{label, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub l2_coef: f64,
    pub seed: u64,
    pub variant: Variant,
    /// Embedding dimension.
    pub q: usize,
    /// Attention projection dimension.
    pub h: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 500,
            l2_coef: 1e-4,
            seed: 0,
            variant: Variant::Base,
            q: 50,
            h: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.adam_eps <= 0.0 {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.l2_coef < 0.0 {
            return Err(Error::Config("l2_coef must be nonnegative".into()));
        }
        if self.q == 0 || self.h == 0 {
            return Err(Error::Config("q and h must be positive".into()));
        }
        Ok(())
    }
}

/// Loss and fusion-weight trajectory over training. `epochs[i]` holds
/// the values at the start of epoch i, before that epoch's update;
/// `final_loss` is evaluated after the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStat>,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub gamma: f64,
}

fn uniform(rng: &mut impl rand::Rng, scale: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * scale
}

fn init_matrix(rng: &mut impl rand::Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let scale = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols).map(|_| uniform(rng, scale)).collect();
    Matrix::new(rows, cols, data).expect("finite init")
}

fn init_vector(rng: &mut impl rand::Rng, dim: usize, fan_in: usize) -> Vector {
    let scale = 1.0 / (fan_in as f64).sqrt();
    Vector::new((0..dim).map(|_| uniform(rng, scale)).collect()).expect("finite init")
}

/// Initialize parameters for the configured variant. Deterministic: the
/// draw stream is derived from `config.seed`, independent of imputation
/// and fold streams.
pub fn init_params(config: &TrainConfig) -> ModelParameters {
    let rng = &mut stream(config.seed, &[label::INIT]);
    let q = config.q;
    let h = config.h;

    // Embeddings scale like fan-in 1; dense layers like their input dim.
    let mut tables = vec![
        EmbeddingTable::Numerical(init_vector(rng, q, 1)),
        EmbeddingTable::Numerical(init_vector(rng, q, 1)),
        EmbeddingTable::Numerical(init_vector(rng, q, 1)),
        EmbeddingTable::Categorical(init_matrix(rng, 2, q, 1)),
    ];
    if config.variant == Variant::PlusInhibitoryControl {
        tables.push(EmbeddingTable::Numerical(init_vector(rng, q, 1)));
    }

    ModelParameters {
        q,
        h,
        variant: config.variant,
        tables,
        w1: init_matrix(rng, q, q, q),
        b1: Vector::zeros(q),
        w2: init_matrix(rng, q, q, q),
        b2: Vector::zeros(q),
        gamma_logit: 0.0,
        f1: DenseLayer {
            w: init_matrix(rng, h, q, q),
            b: Vector::zeros(h),
        },
        f2: DenseLayer {
            w: init_matrix(rng, h, q, q),
            b: Vector::zeros(h),
        },
        f3: DenseLayer {
            w: init_matrix(rng, h, q, q),
            b: Vector::zeros(h),
        },
        w3: init_vector(rng, h, h),
        b3: 0.0,
    }
}

/// Run `config.epochs` full-batch Adam steps on the batch loss.
///
/// The dataset must be feature-transformed (see
/// [`crate::model::FeatureScaler`]) and fully imputed. Deterministic:
/// `(dataset, config)` fixes the result bit for bit.
pub fn train(
    dataset: &[ProcessedDyad],
    config: &TrainConfig,
) -> Result<(ModelParameters, TrainHistory)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("training on an empty dataset".into()));
    }

    let mut params = init_params(config);
    let spans = params.group_spans();
    let mut theta = params.to_flat();
    let mut state = AdamState::zeros(theta.len());
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let (loss, grads) = loss_and_gradients(dataset, &params, config.l2_coef)?;
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("non-finite training loss {loss}"),
            });
        }
        history.push(EpochStat {
            epoch,
            loss,
            gamma: params.gamma(),
        });
        adam_step(&mut theta, &grads, &mut state, epoch, config, &spans).map_err(|e| {
            Error::Training {
                epoch,
                message: e.to_string(),
            }
        })?;
        params = params.with_flat(&theta)?;
    }

    let final_loss =
        crate::model::loss(dataset, &params, config.l2_coef).map_err(|e| Error::Training {
            epoch: config.epochs,
            message: e.to_string(),
        })?;
    Ok((
        params,
        TrainHistory {
            epochs: history,
            final_loss,
        },
    ))
}

/// History CSV: `epoch,loss,gamma`, one row per epoch.
pub fn write_history_csv(history: &TrainHistory, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss", "gamma"])?;
    for stat in &history.epochs {
        w.write_record([
            stat.epoch.to_string(),
            stat.loss.to_string(),
            stat.gamma.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, preprocess_dataset, SyntheticConfig};
    use crate::model::FeatureScaler;

    fn quick_config(q: usize, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            seed,
            q,
            h: q,
            ..TrainConfig::default()
        }
    }

    fn small_dataset(n: usize, seed: u64) -> Vec<ProcessedDyad> {
        let config = SyntheticConfig {
            n_dyads: n,
            ..SyntheticConfig::default()
        };
        let raw = generate_synthetic(&config, &mut stream(seed, &[label::SYNTH])).unwrap();
        let processed = preprocess_dataset(&raw, 20).unwrap();
        let scaler = FeatureScaler::fit(&processed).unwrap();
        scaler.transform_all(&processed)
    }

    #[test]
    fn init_is_deterministic() {
        let config = quick_config(6, 1, 42);
        let a = init_params(&config);
        let b = init_params(&config);
        assert_eq!(a, b);
        let flat_a = a.to_flat();
        let flat_b = b.to_flat();
        for (x, y) in flat_a.iter().zip(&flat_b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn variant_controls_table_count_and_gamma_starts_at_half() {
        let base = init_params(&quick_config(4, 1, 1));
        assert_eq!(base.tables.len(), 4);
        let plus = init_params(&TrainConfig {
            variant: Variant::PlusInhibitoryControl,
            ..quick_config(4, 1, 1)
        });
        assert_eq!(plus.tables.len(), 5);
        assert_eq!(base.gamma(), 0.5);
    }

    #[test]
    fn one_epoch_is_one_update() {
        let ds = small_dataset(10, 3);
        let config = quick_config(4, 1, 5);
        let (params, history) = train(&ds, &config).unwrap();
        assert_eq!(history.epochs.len(), 1);
        assert_ne!(params, init_params(&config));
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let ds = small_dataset(4, 3);
        let config = TrainConfig {
            epochs: 0,
            ..quick_config(4, 1, 5)
        };
        assert!(train(&ds, &config).is_err());
    }

    #[test]
    fn training_reduces_loss() {
        let ds = small_dataset(20, 7);
        let config = quick_config(6, 80, 9);
        let (_, history) = train(&ds, &config).unwrap();
        assert!(history.epochs.iter().all(|s| s.loss.is_finite()));
        assert!(
            history.final_loss < history.epochs[0].loss,
            "loss did not decrease: {} -> {}",
            history.epochs[0].loss,
            history.final_loss
        );
    }

    #[test]
    fn same_seed_same_run() {
        let ds = small_dataset(8, 11);
        let config = quick_config(4, 12, 13);
        let (pa, ha) = train(&ds, &config).unwrap();
        let (pb, hb) = train(&ds, &config).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ha, hb);
    }

    #[test]
    fn l2_increases_reported_loss() {
        let ds = small_dataset(6, 17);
        let params = init_params(&quick_config(4, 1, 19));
        let l0 = crate::model::loss(&ds, &params, 0.0).unwrap();
        let l1 = crate::model::loss(&ds, &params, 1e-2).unwrap();
        let l2 = crate::model::loss(&ds, &params, 1e-1).unwrap();
        assert!(l1 > l0);
        assert!(l2 > l1);
    }

    #[test]
    fn history_csv_has_one_row_per_epoch() {
        let ds = small_dataset(5, 23);
        let config = quick_config(4, 7, 29);
        let (_, history) = train(&ds, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_history_csv(&history, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 8); // header + 7 epochs
        assert!(text.starts_with("epoch,loss,gamma\n"));
    }
}
