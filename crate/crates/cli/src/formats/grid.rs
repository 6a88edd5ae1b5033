//! Sampling-grid dumps.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "TPGD"
//! 4       4         u32 direction (0 forward, 1 inverse, 2 tp2tc, 3 tc2tp)
//! 8       4         u32 H (grid rows)
//! 12      4         u32 W (grid columns)
//! 16      8*H*W     (sx, sy) f32 pairs, row-major
//! ```
//!
//! Coordinates are fractional pixel indices into the grid's source raster.

use std::path::Path;
use std::str::FromStr;

use tanhpolar::warp::{GridDirection, SamplingGrid};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"TPGD";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpDirection {
    Forward,
    Inverse,
    Tp2Tc,
    Tc2Tp,
}

impl DumpDirection {
    pub fn code(self) -> u32 {
        match self {
            Self::Forward => 0,
            Self::Inverse => 1,
            Self::Tp2Tc => 2,
            Self::Tc2Tp => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => Self::Forward,
            1 => Self::Inverse,
            2 => Self::Tp2Tc,
            3 => Self::Tc2Tp,
            _ => return None,
        })
    }

    pub fn of(grid: &SamplingGrid) -> Option<Self> {
        Some(match grid.direction() {
            GridDirection::Forward => Self::Forward,
            GridDirection::Inverse => Self::Inverse,
            GridDirection::TpToTc => Self::Tp2Tc,
            GridDirection::TcToTp => Self::Tc2Tp,
            GridDirection::Custom => return None,
        })
    }
}

impl FromStr for DumpDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forward" => Ok(Self::Forward),
            "inverse" => Ok(Self::Inverse),
            "tp2tc" => Ok(Self::Tp2Tc),
            "tc2tp" => Ok(Self::Tc2Tp),
            _ => Err(format!("unknown direction {s:?} (forward|inverse|tp2tc|tc2tp)")),
        }
    }
}

/// A grid as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub direction: DumpDirection,
    pub height: usize,
    pub width: usize,
    pub coords: Vec<(f32, f32)>,
}

impl GridDump {
    pub fn from_grid(grid: &SamplingGrid, direction: DumpDirection) -> Self {
        Self {
            direction,
            height: grid.height(),
            width: grid.width(),
            coords: grid.coords().iter().map(|&(x, y)| (x as f32, y as f32)).collect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> (f32, f32) {
        self.coords[row * self.width + col]
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.coords.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.direction.code().to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for &(x, y) in &self.coords {
            out.extend_from_slice(&x.to_le_bytes());
            out.extend_from_slice(&y.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(CliError::decode(path, "not a grid dump (bad magic or short header)"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let direction = DumpDirection::from_code(word(4))
            .ok_or_else(|| CliError::decode(path, format!("unknown direction code {}", word(4))))?;
        let (height, width) = (word(8) as usize, word(12) as usize);
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * height * width {
            return Err(CliError::Shape(format!(
                "{}: {height}x{width} grid needs {} body bytes, file has {}",
                path.display(),
                8 * height * width,
                body.len()
            )));
        }
        let coords = body
            .chunks_exact(8)
            .map(|c| {
                (
                    f32::from_le_bytes(c[..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self {
            direction,
            height,
            width,
            coords,
        })
    }
}

pub fn write_grid(path: &Path, dump: &GridDump) -> Result<()> {
    std::fs::write(path, dump.encode()).map_err(|e| CliError::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<GridDump> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    GridDump::decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_length_and_header() {
        let grid = tanhpolar::warp::make_tp_to_tc_grid(6, 5).unwrap();
        let dump = GridDump::from_grid(&grid, DumpDirection::of(&grid).unwrap());
        let bytes = dump.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 6 * 5);
        assert_eq!(&bytes[..4], b"TPGD");
        assert_eq!(bytes[4..8], 2u32.to_le_bytes());
        assert_eq!(bytes[8..12], 6u32.to_le_bytes());
        assert_eq!(bytes[12..16], 5u32.to_le_bytes());
        assert_eq!(GridDump::decode(&bytes, Path::new("g")).unwrap(), dump);
    }

    #[test]
    fn direction_names() {
        for (s, d) in [
            ("forward", DumpDirection::Forward),
            ("inverse", DumpDirection::Inverse),
            ("tp2tc", DumpDirection::Tp2Tc),
            ("tc2tp", DumpDirection::Tc2Tp),
        ] {
            assert_eq!(s.parse::<DumpDirection>().unwrap(), d);
            assert_eq!(DumpDirection::from_code(d.code()), Some(d));
        }
        assert!("sideways".parse::<DumpDirection>().is_err());
    }
}
