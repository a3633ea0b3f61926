//! Binary checkpoint format.
//!
//! ```text
//! "QPAE"            magic, 4 bytes
//! u16               version (1)
//! u16               layer count (hidden layers + final)
//! per layer:
//!   u32 rows, u32 cols, rows·cols f32 weights (row-major)
//!   u32 bias_len, bias_len f32
//! u32               CRC32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. The final layer is written last.
//! Parameters are stored as `f32`, so saving rounds each `f64` parameter to the
//! nearest `f32`; a model that is already `f32`-representable (see
//! [`Classifier::quantize_f32`]) round-trips bit-exactly.

use std::path::Path;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{Classifier, DenseLayer};

pub const MAGIC: [u8; 4] = *b"QPAE";
pub const VERSION: u16 = 1;

/// Upper bound on elements in a single tensor; anything larger is treated as corruption.
const MAX_ELEMENTS: u64 = 1 << 28;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("layer {layer} declares an implausible size ({rows}x{cols})")]
    DimensionOverflow { layer: usize, rows: u64, cols: u64 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("parameter magnitude exceeds the f32 range")]
    NotRepresentable,
    #[error("inconsistent layer shapes: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(model: &Classifier) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + model.num_params() * 4 + 8 * (model.hidden_layers().len() + 1));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u16::try_from(model.hidden_layers().len() + 1).expect("fewer than 65536 layers");
    out.extend_from_slice(&count.to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
        for &w in layer.weights.as_slice() {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        out.extend_from_slice(&(layer.bias.len() as u32).to_le_bytes());
        for &b in &layer.bias {
            out.extend_from_slice(&(b as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(CheckpointError::Truncated { offset: self.pos, needed: n, available });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(n * 4)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Classifier, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = match r.take(4) {
        Ok(m) => m.try_into().unwrap(),
        Err(e) => {
            // short garbage is still reported as the wrong format when it can't be ours
            if !MAGIC.starts_with(bytes) {
                let mut m = [0u8; 4];
                m[..bytes.len()].copy_from_slice(bytes);
                return Err(CheckpointError::BadMagic(m));
            }
            return Err(e);
        }
    };
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u16()? as usize;
    if count == 0 {
        return Err(CheckpointError::Shape("no layers".into()));
    }
    let mut layers = Vec::with_capacity(count);
    for layer in 0..count {
        let rows = r.u32()? as u64;
        let cols = r.u32()? as u64;
        if rows * cols > MAX_ELEMENTS {
            return Err(CheckpointError::DimensionOverflow { layer, rows, cols });
        }
        let weights = r.f32s((rows * cols) as usize)?;
        let bias_len = r.u32()? as u64;
        if bias_len > MAX_ELEMENTS {
            return Err(CheckpointError::DimensionOverflow { layer, rows: 1, cols: bias_len });
        }
        let bias = r.f32s(bias_len as usize)?;
        let weights = Matrix::from_vec(rows as usize, cols as usize, weights)
            .map_err(|e| CheckpointError::Shape(e.to_string()))?;
        layers.push(DenseLayer { weights, bias });
    }
    let body_end = r.pos;
    let stored = r.u32()?;
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed });
    }
    let output = layers.pop().expect("count > 0");
    Classifier::from_layers(layers, output).map_err(|e| CheckpointError::Shape(e.to_string()))
}

/// Writes `model`, refusing parameters that would become infinite as `f32`.
pub fn save(model: &Classifier, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    if !model.fits_f32() {
        return Err(CheckpointError::NotRepresentable);
    }
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Classifier, CheckpointError> {
    decode(&std::fs::read(path)?)
}
