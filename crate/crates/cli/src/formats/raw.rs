//! Raw little-endian tensor files, used for weights and score maps.
//!
//! ```text
//! offset  size       field
//! 0       4          magic "TPTN"
//! 4       4          u32 dtype code (1 = f32)
//! 8       4          u32 rank r, 1..=4
//! 12      4*r        u32 dims, outermost first
//! 12+4r   4*prod     f32 values, row-major
//! ```
//!
//! Tensors of rank below four are read as NCHW with leading ones.

use std::io::Write;
use std::path::Path;

use tanhpolar::nn::{ConvParams, PadMode};
use tanhpolar::Tensor;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"TPTN";
pub const DTYPE_F32: u32 = 1;

/// Dims plus values as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn from_tensor(t: &Tensor) -> Self {
        Self {
            dims: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }

    pub fn into_tensor(self) -> Result<Tensor> {
        let mut shape = [1usize; 4];
        let r = self.dims.len();
        shape[4 - r..].copy_from_slice(&self.dims);
        Tensor::new(shape, self.data).map_err(|e| CliError::Shape(e.to_string()))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a file image. Header damage is a decode error; a body whose
    /// length disagrees with the header dims is a shape error.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let word = |i: usize| -> Result<u32> {
            bytes
                .get(i..i + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| CliError::decode(path, "truncated header"))
        };
        if bytes.get(..4) != Some(MAGIC.as_slice()) {
            return Err(CliError::decode(path, "not a raw tensor file (bad magic)"));
        }
        let dtype = word(4)?;
        if dtype != DTYPE_F32 {
            return Err(CliError::decode(path, format!("unsupported dtype code {dtype}")));
        }
        let rank = word(8)? as usize;
        if !(1..=4).contains(&rank) {
            return Err(CliError::decode(path, format!("rank {rank} outside 1..=4")));
        }
        let dims = (0..rank)
            .map(|k| word(12 + 4 * k).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let body = &bytes[12 + 4 * rank..];
        let count: usize = dims.iter().product();
        if body.len() != 4 * count {
            return Err(CliError::Shape(format!(
                "{}: header dims {dims:?} need {} bytes of data, file has {}",
                path.display(),
                4 * count,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }
}

pub fn is_raw_tensor(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_raw(path, &RawTensor::from_tensor(t))
}

pub fn write_raw(path: &Path, raw: &RawTensor) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&raw.encode()).map_err(|e| CliError::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<RawTensor> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    RawTensor::decode(&bytes, path)
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    read_raw(path)?.into_tensor()
}

/// Loads a convolution from a rank-4 weight file and a rank-1 bias file.
pub fn read_conv(weights: &Path, bias: &Path, pad_mode: PadMode) -> Result<ConvParams> {
    let w = read_raw(weights)?;
    if w.dims.len() != 4 {
        return Err(CliError::Shape(format!(
            "{}: conv weights need rank 4, got {:?}",
            weights.display(),
            w.dims
        )));
    }
    let b = read_raw(bias)?;
    if b.dims.len() != 1 {
        return Err(CliError::Shape(format!(
            "{}: bias needs rank 1, got {:?}",
            bias.display(),
            b.dims
        )));
    }
    Ok(ConvParams::new(w.into_tensor()?, b.data, 1, pad_mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_byte_exact() {
        let raw = RawTensor {
            dims: vec![2, 3],
            data: vec![1.0, -2.0, 0.5, 0.0, 3.25, f32::MIN_POSITIVE],
        };
        let bytes = raw.encode();
        assert_eq!(&bytes[..4], b"TPTN");
        assert_eq!(bytes[4..8], [1, 0, 0, 0]);
        assert_eq!(bytes[8..12], [2, 0, 0, 0]);
        assert_eq!(bytes[12..16], [2, 0, 0, 0]);
        assert_eq!(bytes[16..20], [3, 0, 0, 0]);
        assert_eq!(bytes[20..24], 1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 4 * 6);
        assert_eq!(RawTensor::decode(&bytes, Path::new("x")).unwrap(), raw);
    }

    #[test]
    fn lower_rank_reads_as_nchw() {
        let raw = RawTensor { dims: vec![4, 5], data: vec![0.0; 20] };
        assert_eq!(raw.into_tensor().unwrap().shape(), [1, 1, 4, 5]);
    }

    #[test]
    fn damaged_files() {
        let p = Path::new("x");
        assert!(matches!(RawTensor::decode(b"NOPE", p), Err(CliError::Decode { .. })));
        assert!(matches!(RawTensor::decode(b"TPTN\x01\0\0\0", p), Err(CliError::Decode { .. })));
        let mut bytes = RawTensor { dims: vec![3], data: vec![1.0; 3] }.encode();
        bytes.pop();
        assert!(matches!(RawTensor::decode(&bytes, p), Err(CliError::Shape(_))));
        let mut bytes = RawTensor { dims: vec![3], data: vec![1.0; 3] }.encode();
        bytes[4] = 2;
        assert!(matches!(RawTensor::decode(&bytes, p), Err(CliError::Decode { .. })));
    }
}
