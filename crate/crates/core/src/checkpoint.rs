//! Self-describing network checkpoints.
//!
//! A checkpoint is a JSON document holding the network spec, every
//! parameter, the input normalization, the seeds and configuration that
//! produced it, and the epoch it was taken at. Floats are written in
//! shortest round-trip form, so save followed by load is value-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Normalization;
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, ParameterStore};

pub const FORMAT: &str = "stegcnn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: NetworkSpec,
    pub params: ParameterStore,
    pub normalization: Option<Normalization>,
    /// Epoch the parameters were taken after; 0 for an untrained network.
    pub epoch: usize,
    pub seeds: BTreeMap<String, u64>,
    /// Free-form provenance (configuration digest, corpus settings, ...).
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(spec: NetworkSpec, params: ParameterStore, epoch: usize) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            spec,
            params,
            normalization: None,
            epoch,
            seeds: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container {:?} version {}",
                ck.format, ck.version
            )));
        }
        if !ck.params.same_shape(&ParameterStore::zeros(&ck.spec)?) {
            return Err(Error::Checkpoint(
                "parameters do not match the stored network spec".into(),
            ));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, randomize};

    #[test]
    fn round_trip_is_exact() {
        let spec = NetworkSpec::two_layer(12, 3);
        let mut params = build_network(&spec, 4).unwrap();
        randomize(&mut params, 9, 1e3);
        params.output_weights[0] = 1e-300;
        params.output_weights[1] = -std::f64::consts::PI;
        let mut ck = Checkpoint::new(spec, params, 17);
        ck.normalization = Some(Normalization {
            mean: 0.123456789012345,
            std: 0.3,
        });
        ck.seeds.insert("init".into(), u64::MAX);
        ck.meta.insert("digest".into(), "abc".into());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.ckpt");
        ck.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.params.slices().iter().zip(ck.params.slices()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn mismatched_store_rejected() {
        let spec = NetworkSpec::two_layer(12, 3);
        let params = build_network(&NetworkSpec::two_layer(10, 3), 0).unwrap();
        let text = Checkpoint::new(spec, params, 0).to_json().unwrap();
        assert!(matches!(Checkpoint::from_json(&text), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_json("{}").is_err());
    }
}
