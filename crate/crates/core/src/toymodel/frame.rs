//! `PWFRAME1` field-frame files.
//!
//! ```text
//! "PWFRAME1" | u32 LE header length | JSON header | 7 × nx·ny f32 LE, row-major
//! ```
//!
//! The header is `{run_id, domain_id, step_hour, nx, ny, fields}` with the
//! field names in canonical order. Frames live at
//! `<data_dir>/runs/<run_id>/out/dom<D>_t<HHH>.pwf`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Grid;

pub const FRAME_MAGIC: &[u8; 8] = b"PWFRAME1";

/// Atmospheric fields carried by every frame, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    /// mm accumulated during the hour.
    Precip,
    /// 2 m temperature, °C.
    T2,
    /// 300 hPa divergence, 1e-5/s.
    Div300,
    /// 500 hPa vertical velocity, m/s.
    W500,
    /// 850 hPa convergence, 1e-5/s.
    Conv850,
    /// K-index, °C.
    Kindex,
    /// 850 hPa relative humidity, %.
    Rh850,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Precip,
        Field::T2,
        Field::Div300,
        Field::W500,
        Field::Conv850,
        Field::Kindex,
        Field::Rh850,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Precip => "precip",
            Field::T2 => "t2",
            Field::Div300 => "div300",
            Field::W500 => "w500",
            Field::Conv850 => "conv850",
            Field::Kindex => "kindex",
            Field::Rh850 => "rh850",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown field {s:?}"))
    }
}

/// One domain × one hour of the seven field grids.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub run_id: u64,
    pub domain_id: u32,
    pub step_hour: u32,
    pub nx: usize,
    pub ny: usize,
    /// Indexed by [`Field::index`].
    pub grids: Vec<Grid<f32>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    run_id: u64,
    domain_id: u32,
    step_hour: u32,
    nx: usize,
    ny: usize,
    fields: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    /// The file is shorter than its header promises; it may still be written.
    #[error("frame incomplete ({have} of {need} bytes)")]
    Incomplete { have: usize, need: usize },
    #[error("corrupt frame: {0}")]
    Corrupt(String),
}

impl FieldFrame {
    pub fn grid(&self, f: Field) -> &Grid<f32> {
        &self.grids[f.index()]
    }

    /// Checks grid shapes, finiteness, `precip >= 0` and `rh850` in `[0, 100]`.
    pub fn validate(&self) -> Result<(), String> {
        if self.step_hour < 1 {
            return Err("step_hour must be >= 1".into());
        }
        if self.grids.len() != Field::ALL.len() {
            return Err(format!("expected 7 grids, got {}", self.grids.len()));
        }
        for f in Field::ALL {
            let g = self.grid(f);
            if g.nx != self.nx || g.ny != self.ny || g.data.len() != self.nx * self.ny {
                return Err(format!("{f} grid is not {}x{}", self.nx, self.ny));
            }
            if g.data.iter().any(|v| !v.is_finite()) {
                return Err(format!("{f} has non-finite values"));
            }
        }
        if self.grid(Field::Precip).data.iter().any(|&v| v < 0.0) {
            return Err("negative precipitation".into());
        }
        if self.grid(Field::Rh850).data.iter().any(|&v| !(0.0..=100.0).contains(&v)) {
            return Err("rh850 outside [0, 100]".into());
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = Header {
            run_id: self.run_id,
            domain_id: self.domain_id,
            step_hour: self.step_hour,
            nx: self.nx,
            ny: self.ny,
            fields: Field::ALL.iter().map(|f| f.name().to_string()).collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let n = self.nx * self.ny;
        let mut out = Vec::with_capacity(12 + header.len() + 7 * n * 4);
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for g in &self.grids {
            for v in &g.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a frame, distinguishing files that are still being written
    /// ([`FrameError::Incomplete`]) from files that can never parse.
    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let magic_len = bytes.len().min(8);
        if bytes[..magic_len] != FRAME_MAGIC[..magic_len] {
            return Err(FrameError::Corrupt("bad magic".into()));
        }
        if bytes.len() < 12 {
            return Err(FrameError::Incomplete {
                have: bytes.len(),
                need: 12,
            });
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if hlen > 1 << 20 {
            return Err(FrameError::Corrupt("oversized header".into()));
        }
        if bytes.len() < 12 + hlen {
            return Err(FrameError::Incomplete {
                have: bytes.len(),
                need: 12 + hlen,
            });
        }
        let header: Header =
            serde_json::from_slice(&bytes[12..12 + hlen]).map_err(|e| FrameError::Corrupt(e.to_string()))?;
        let canonical: Vec<&str> = Field::ALL.iter().map(|f| f.name()).collect();
        if header.fields != canonical {
            return Err(FrameError::Corrupt(format!("unexpected field list {:?}", header.fields)));
        }
        let n = header
            .nx
            .checked_mul(header.ny)
            .filter(|n| *n > 0 && *n <= 1 << 26)
            .ok_or_else(|| FrameError::Corrupt("bad dimensions".into()))?;
        let need = 12 + hlen + 7 * n * 4;
        if bytes.len() < need {
            return Err(FrameError::Incomplete {
                have: bytes.len(),
                need,
            });
        }
        if bytes.len() > need {
            return Err(FrameError::Corrupt(format!("{} trailing bytes", bytes.len() - need)));
        }
        let body = &bytes[12 + hlen..];
        let grids = (0..7)
            .map(|k| {
                let data = body[k * n * 4..(k + 1) * n * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Grid {
                    nx: header.nx,
                    ny: header.ny,
                    data,
                }
            })
            .collect();
        let frame = FieldFrame {
            run_id: header.run_id,
            domain_id: header.domain_id,
            step_hour: header.step_hour,
            nx: header.nx,
            ny: header.ny,
            grids,
        };
        frame.validate().map_err(FrameError::Corrupt)?;
        Ok(frame)
    }
}

pub fn frame_file_name(domain_id: u32, step_hour: u32) -> String {
    format!("dom{domain_id}_t{step_hour:03}.pwf")
}

pub fn frame_path(out_dir: &Path, domain_id: u32, step_hour: u32) -> PathBuf {
    out_dir.join(frame_file_name(domain_id, step_hour))
}

/// Parses `dom<D>_t<HHH>.pwf` into `(domain_id, step_hour)`.
pub fn parse_frame_file_name(name: &str) -> Option<(u32, u32)> {
    let rest = name.strip_prefix("dom")?.strip_suffix(".pwf")?;
    let (d, t) = rest.split_once("_t")?;
    if t.len() < 3 || !d.chars().all(|c| c.is_ascii_digit()) || !t.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Some((d.parse().ok()?, t.parse().ok()?))
}
