//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "NIPSRNET"
//! version  u32 LE   1
//! depth    u32 LE
//! headers  depth × 4 × u32 LE   (out, in, kh, kw) per layer
//! payload  per layer: out·in·kh·kw weights, then out biases, f64 LE
//! crc      u32 LE   CRC-32 (IEEE) of every preceding byte
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{ConvLayer, SrNetwork};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"NIPSRNET";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(net: &SrNetwork) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 16 * net.depth() + 8 * net.parameter_count() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.depth() as u32).to_le_bytes());
    for layer in net.layers() {
        for d in layer.weights.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for layer in net.layers() {
        for v in layer.weights.data().iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::CheckpointTruncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SrNetwork> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::CheckpointTruncated {
            expected: MAGIC.len(),
            found: bytes.len(),
        });
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let version = read_u32(bytes, 8)?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            expected: VERSION,
            found: version,
        });
    }
    let depth = read_u32(bytes, 12)? as usize;
    if depth == 0 || depth > 10_000 {
        return Err(Error::CheckpointShape(format!("implausible depth {depth}")));
    }
    let mut shapes = Vec::with_capacity(depth);
    let mut at = 16;
    let mut payload_len = 0usize;
    for _ in 0..depth {
        let mut s = [0usize; 4];
        for d in &mut s {
            *d = read_u32(bytes, at)? as usize;
            at += 4;
        }
        payload_len = s
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_add(s[0]))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(payload_len))
            .ok_or_else(|| Error::CheckpointShape(format!("layer shape {s:?} overflows")))?;
        shapes.push(s);
    }
    let expected = at + payload_len + 4;
    if bytes.len() < expected {
        return Err(Error::CheckpointTruncated {
            expected,
            found: bytes.len(),
        });
    }
    let stored = read_u32(bytes, expected - 4)?;
    let computed = crc32fast::hash(&bytes[..expected - 4]);
    if stored != computed {
        return Err(Error::CheckpointCrc { stored, computed });
    }

    let mut values = bytes[at..expected - 4]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut layers = Vec::with_capacity(depth);
    for shape in shapes {
        let n: usize = shape.iter().product();
        let weights = Tensor::new(shape, values.by_ref().take(n).collect())?;
        let bias = values.by_ref().take(shape[0]).collect();
        layers.push(ConvLayer { weights, bias });
    }
    SrNetwork::from_layers(layers).map_err(|e| Error::CheckpointShape(e.to_string()))
}

pub fn save_checkpoint(net: &SrNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SrNetwork> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Load and require a specific depth.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, depth: usize) -> Result<SrNetwork> {
    let net = load_checkpoint(path)?;
    if net.depth() != depth {
        return Err(Error::CheckpointShape(format!(
            "checkpoint has depth {}, expected {depth}",
            net.depth()
        )));
    }
    Ok(net)
}
