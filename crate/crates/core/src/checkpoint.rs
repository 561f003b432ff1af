//! Router checkpoint file: one JSON document holding the config, the named
//! parameter tensors, optional optimizer moments, and the epoch counter.
//!
//! Floats are written as full-precision shortest decimals, so a checkpoint
//! round-trips save -> load -> save byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamState, DenseLayer};
use crate::router::{RouterConfig, RouterParams};

/// Fixed layer order in the file. Names double as the parameter-group ids
/// used in optimizer state and error messages.
pub const LAYER_NAMES: [&str; 4] = ["text_layer", "meta_layer", "fuse_layer", "out_head"];

/// Optimizer moments keyed by `<layer>.weights` / `<layer>.bias`.
pub type AdamSnapshot = BTreeMap<String, AdamState>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointLayer {
    name: String,
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// In-memory image of a checkpoint file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RouterConfig,
    layers: Vec<CheckpointLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_state: Option<AdamSnapshot>,
    pub epoch: u32,
}

impl Checkpoint {
    pub fn new(
        config: RouterConfig,
        params: &RouterParams,
        adam_state: Option<AdamSnapshot>,
        epoch: u32,
    ) -> Self {
        let layers = LAYER_NAMES
            .iter()
            .zip([&params.text_layer, &params.meta_layer, &params.fuse_layer, &params.out_head])
            .map(|(name, layer)| CheckpointLayer {
                name: (*name).to_string(),
                weights: layer.weights.clone(),
                bias: layer.bias.clone(),
            })
            .collect();
        Checkpoint { config, layers, adam_state, epoch }
    }

    /// Rebuilds validated parameters. Shape disagreements name the
    /// offending layer.
    pub fn params(&self) -> Result<RouterParams> {
        self.config.validate()?;
        let cfg = &self.config;
        let expected = [
            (LAYER_NAMES[0], cfg.d_sem, cfg.d_in),
            (LAYER_NAMES[1], cfg.d_struct, cfg.d_meta),
            (LAYER_NAMES[2], cfg.d_fuse, cfg.d_joint()),
            (LAYER_NAMES[3], 1, cfg.d_fuse),
        ];
        if self.layers.len() != expected.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} layers, expected {}",
                self.layers.len(),
                expected.len()
            )));
        }
        let mut built = Vec::with_capacity(4);
        for (layer, (name, out_dim, in_dim)) in self.layers.iter().zip(expected) {
            if layer.name != name {
                return Err(Error::Format(format!(
                    "checkpoint layer {} is named {:?}, expected {:?}",
                    built.len(),
                    layer.name,
                    name
                )));
            }
            if layer.weights.len() != out_dim * in_dim || layer.bias.len() != out_dim {
                return Err(Error::Format(format!(
                    "layer {name} holds {} weights and {} biases, expected {}x{} weights and {} biases",
                    layer.weights.len(),
                    layer.bias.len(),
                    out_dim,
                    in_dim,
                    out_dim
                )));
            }
            built.push(DenseLayer {
                weights: layer.weights.clone(),
                bias: layer.bias.clone(),
                in_dim,
                out_dim,
            });
        }
        let mut built = built.into_iter();
        let params = RouterParams {
            text_layer: built.next().expect("four layers"),
            meta_layer: built.next().expect("four layers"),
            fuse_layer: built.next().expect("four layers"),
            out_head: built.next().expect("four layers"),
        };
        params.validate(&self.config)?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string(self).expect("checkpoint serializes");
        json.push('\n');
        json
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|err| Error::Format(format!("checkpoint parse: {err}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|err| Error::io(path.display().to_string(), err))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path)
            .map_err(|err| Error::io(path.display().to_string(), err))?;
        Checkpoint::from_json(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn small_cfg() -> RouterConfig {
        RouterConfig {
            d_in: 5,
            d_meta: 3,
            d_sem: 4,
            d_struct: 2,
            d_fuse: 3,
            dropout_p: 0.2,
            threshold: 0.5,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let cfg = small_cfg();
        let mut params = RouterParams::init(&cfg, &mut stream(42, "init"));
        params.text_layer.weights[0] = 1.0 / 3.0;
        params.text_layer.weights[1] = 1e-300;
        params.out_head.bias[0] = -0.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");

        let ckpt = Checkpoint::new(cfg, &params, None, 200);
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let restored = loaded.params().unwrap();
        for (a, b) in [
            (&params.text_layer, &restored.text_layer),
            (&params.meta_layer, &restored.meta_layer),
            (&params.fuse_layer, &restored.fuse_layer),
            (&params.out_head, &restored.out_head),
        ] {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.weights), bits(&b.weights));
            assert_eq!(bits(&a.bias), bits(&b.bias));
        }
        assert_eq!(loaded.epoch, 200);
        assert_eq!(loaded.to_json(), ckpt.to_json());
    }

    #[test]
    fn adam_state_survives_round_trip() {
        let cfg = small_cfg();
        let params = RouterParams::init(&cfg, &mut stream(1, "init"));
        let mut snapshot = AdamSnapshot::new();
        let mut state = AdamState::new(2);
        state.first_moment[0] = 0.125;
        state.step_count = 7;
        snapshot.insert("out_head.bias".into(), state.clone());
        let ckpt = Checkpoint::new(cfg, &params, Some(snapshot), 10);
        let back = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        assert_eq!(back.adam_state.unwrap()["out_head.bias"], state);
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let cfg = small_cfg();
        let params = RouterParams::init(&cfg, &mut stream(2, "init"));
        let mut wrong = cfg;
        wrong.d_fuse = 7;
        let ckpt = Checkpoint { config: wrong, ..Checkpoint::new(cfg, &params, None, 0) };
        let err = ckpt.params().unwrap_err();
        assert!(err.to_string().contains("fuse_layer"), "{err}");
    }

    #[test]
    fn wrong_layer_name_is_rejected() {
        let cfg = small_cfg();
        let params = RouterParams::init(&cfg, &mut stream(3, "init"));
        let mut ckpt = Checkpoint::new(cfg, &params, None, 0);
        ckpt.layers[1].name = "metadata".into();
        let err = ckpt.params().unwrap_err();
        assert!(err.to_string().contains("meta_layer"), "{err}");
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let cfg = small_cfg();
        let params = RouterParams::init(&cfg, &mut stream(4, "init"));
        let mut ckpt = Checkpoint::new(cfg, &params, None, 0);
        ckpt.layers[3].weights[0] = f64::NAN;
        // NaN is not valid JSON; the in-memory path must also reject it.
        assert!(ckpt.params().is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = Checkpoint::load("/nonexistent/ckpt.json").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
