use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, FeedForwardNet};
use crate::error::{Error, Result};

const FORMAT: &str = "dftns-net/1";

/// On-disk form of a [`FeedForwardNet`]: JSON with the layer sizes, the
/// activation and the flat row-major parameter array.
///
/// Floats are written in shortest round-trip form and parsed with correct
/// rounding, so save/load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetCheckpoint {
    pub format: String,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl From<&FeedForwardNet> for NetCheckpoint {
    fn from(net: &FeedForwardNet) -> Self {
        Self {
            format: FORMAT.to_string(),
            layer_dims: net.layer_dims().to_vec(),
            activation: net.activation(),
            params: net.params().to_vec(),
        }
    }
}

impl NetCheckpoint {
    pub fn into_net(self) -> Result<FeedForwardNet> {
        if self.format != FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {:?}", self.format)));
        }
        let mut net = FeedForwardNet::zeros(&self.layer_dims, self.activation)?;
        net.set_params(&self.params)?;
        Ok(net)
    }
}

impl FeedForwardNet {
    pub fn to_checkpoint_string(&self) -> String {
        serde_json::to_string(&NetCheckpoint::from(self)).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        serde_json::from_str::<NetCheckpoint>(s)?.into_net()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_checkpoint_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_str(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), scale in -300i32..300) {
            let mut net = FeedForwardNet::init(&[3, 5, 2], Activation::Gelu, &mut Prng::new(seed, 0)).unwrap();
            let factor = 2f64.powi(scale / 10) * 1.000_000_1;
            for p in net.params_mut() {
                *p *= factor;
            }
            let back = FeedForwardNet::from_checkpoint_str(&net.to_checkpoint_string()).unwrap();
            prop_assert_eq!(back.layer_dims(), net.layer_dims());
            for (a, b) in back.params().iter().zip(net.params()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.final");
        let net = FeedForwardNet::init(&[2, 4, 2], Activation::leaky_relu(), &mut Prng::new(1, 2)).unwrap();
        net.save(&path).unwrap();
        assert_eq!(FeedForwardNet::load(&path).unwrap(), net);
    }

    #[test]
    fn rejects_wrong_parameter_count() {
        let text = r#"{"format":"dftns-net/1","layer_dims":[1,1],"activation":"elu","params":[1.0]}"#;
        assert!(matches!(FeedForwardNet::from_checkpoint_str(text), Err(Error::Shape(_))));
    }
}
