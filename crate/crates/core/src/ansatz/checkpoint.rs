//! Binary parameter checkpoints.
//!
//! Layout: magic `FNQSCKPT`, `u32` format version, `u32` header length, UTF-8 JSON header,
//! `u64` parameter count, then `(re, im)` pairs as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{AnsatzParameters, Architecture};
use crate::error::{Error, Result};
use crate::lattice::Family;

const MAGIC: &[u8; 8] = b"FNQSCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub family: Family,
    pub dims: [usize; 3],
    pub seed: u64,
    pub iteration: usize,
    pub field: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub values: Vec<C64>,
}

impl Checkpoint {
    pub fn parameters(&self) -> AnsatzParameters {
        AnsatzParameters { architecture: self.header.architecture.clone(), values: self.values.clone() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(24 + header.len() + 16 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a parameter checkpoint".into()));
        }
        let version = read_u32(&mut bytes)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let hlen = read_u32(&mut bytes)? as usize;
        if bytes.len() < hlen {
            return Err(Error::Format("truncated header".into()));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[..hlen])?;
        bytes = &bytes[hlen..];
        let mut n8 = [0u8; 8];
        bytes.read_exact(&mut n8)?;
        let n = u64::from_le_bytes(n8) as usize;
        if bytes.len() != 16 * n {
            return Err(Error::Format("parameter block has the wrong length".into()));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        Ok(Checkpoint { header, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}

fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    bytes.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Alpha;

    #[test]
    fn roundtrip_is_byte_stable() {
        let c = Checkpoint {
            header: CheckpointHeader {
                architecture: Architecture::SymmetricRbm { alpha: Alpha::new(1, 4) },
                family: Family::Checkerboard,
                dims: [4, 2, 2],
                seed: 7,
                iteration: 12,
                field: [0.1, 0.0, 0.0],
            },
            values: vec![C64::new(1.5, -0.25), C64::new(0.0, 3.0)],
        };
        let b1 = c.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&b1).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), b1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"NOTACKPTxxxxxxxx").is_err());
    }
}
