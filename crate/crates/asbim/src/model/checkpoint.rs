//! Parameter checkpoints: named arrays plus dims, variant tag, and the
//! feature scaler, serialized as JSON. f64 values survive the round trip
//! bit-exactly (shortest-round-trip float formatting on write, exact
//! parse on read).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureScaler, ModelParameters};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: ModelParameters,
    pub scaler: FeatureScaler,
}

impl Checkpoint {
    pub fn new(params: ModelParameters, scaler: FeatureScaler) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            params,
            scaler,
        }
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(checkpoint)
        .map_err(|e| Error::Internal(format!("checkpoint serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let checkpoint: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Ingestion(format!("bad checkpoint {}: {e}", path.display())))?;
    if checkpoint.format_version != FORMAT_VERSION {
        return Err(Error::Ingestion(format!(
            "unsupported checkpoint version {}",
            checkpoint.format_version
        )));
    }
    if !checkpoint.params.is_finite() {
        return Err(Error::Numerical("checkpoint holds non-finite parameters".into()));
    }
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_fixtures::tiny_params;
    use crate::model::Variant;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");

        let mut params = tiny_params(3, 2, Variant::PlusInhibitoryControl, 21);
        // Values with awkward binary expansions.
        params.b3 = 0.1 + 0.2;
        params.gamma_logit = -1.0 / 3.0;

        let checkpoint = Checkpoint::new(params, FeatureScaler::identity());
        save_checkpoint(&checkpoint, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, checkpoint);

        let a = checkpoint.params.to_flat();
        let b = loaded.params.to_flat();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }

        // Saving the loaded checkpoint reproduces the bytes.
        let path2 = dir.path().join("model2.json");
        save_checkpoint(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut checkpoint = Checkpoint::new(
            tiny_params(2, 2, Variant::Base, 1),
            FeatureScaler::identity(),
        );
        checkpoint.format_version = 999;
        save_checkpoint(&checkpoint, &path).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
