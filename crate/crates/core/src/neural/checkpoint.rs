//! Versioned binary parameter checkpoints.
//!
//! Layout: the 8-byte magic `DLABCKP1`, a little-endian `u64` header length,
//! a JSON header, then every network's parameters as little-endian `f64` in
//! header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{MlpSpec, ParamBlock};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DLABCKP1";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedNetwork {
    pub name: String,
    pub spec: MlpSpec,
    pub params: ParamBlock,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: u64,
    pub networks: Vec<NamedNetwork>,
}

#[derive(Serialize, Deserialize)]
struct NetworkHeader {
    name: String,
    spec: MlpSpec,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    seed: u64,
    step: u64,
    networks: Vec<NetworkHeader>,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&NamedNetwork> {
        self.networks.iter().find(|n| n.name == name)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: FORMAT_VERSION,
            seed: self.seed,
            step: self.step,
            networks: self
                .networks
                .iter()
                .map(|n| NetworkHeader {
                    name: n.name.clone(),
                    spec: n.spec.clone(),
                    len: n.params.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for n in &self.networks {
            let mut buf = Vec::with_capacity(8 * n.params.len());
            for v in &n.params.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 26 {
            return Err(Error::Format(format!("checkpoint header of {len} bytes")));
        }
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
        }
        let mut networks = Vec::with_capacity(header.networks.len());
        for nh in header.networks {
            nh.spec.validate()?;
            if nh.len != nh.spec.param_count() {
                return Err(Error::Format(format!(
                    "network {} declares {} parameters, spec needs {}",
                    nh.name,
                    nh.len,
                    nh.spec.param_count()
                )));
            }
            let mut bytes = vec![0u8; 8 * nh.len];
            r.read_exact(&mut bytes)?;
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let params = ParamBlock {
                values,
                layers: nh.spec.layout(),
            };
            networks.push(NamedNetwork {
                name: nh.name,
                spec: nh.spec,
                params,
            });
        }
        Ok(Checkpoint {
            seed: header.seed,
            step: header.step,
            networks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;

    fn sample() -> Checkpoint {
        let enc = MlpSpec::new(vec![4, 6, 3], Activation::Relu, 3).unwrap();
        let dec = MlpSpec::new(vec![3, 4], Activation::Tanh, 4).unwrap();
        Checkpoint {
            seed: 99,
            step: 1234,
            networks: vec![
                NamedNetwork {
                    name: "encoder".into(),
                    params: enc.init_params(),
                    spec: enc,
                },
                NamedNetwork {
                    name: "decoder".into(),
                    params: dec.init_params(),
                    spec: dec,
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
        assert!(back.network("decoder").is_some());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(Error::Format(_))));
        buf.truncate(buf.len() - 3);
        assert!(Checkpoint::read_from(buf.as_slice()).is_err());
    }
}
