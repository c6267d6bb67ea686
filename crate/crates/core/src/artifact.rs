//! Binary container shared by the pipeline's intermediate artifacts.
//!
//! Layout: 8 magic bytes | header length (u32 LE) | UTF-8 JSON header |
//! `f64` little-endian payload running to end of file.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const GEOGRID_MAGIC: &[u8; 8] = b"PWGEO001";
pub const ICBC_MAGIC: &[u8; 8] = b"PWICBC01";
pub const UNGRIB_MAGIC: &[u8; 8] = b"PWUNG001";
pub const METGRID_MAGIC: &[u8; 8] = b"PWMET001";
pub const REAL_MAGIC: &[u8; 8] = b"PWREAL01";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic in {0}")]
    BadMagic(String),
    #[error("malformed artifact: {0}")]
    Malformed(String),
}

pub fn encode<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[f64]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + payload.len() * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode<H: DeserializeOwned>(magic: &[u8; 8], bytes: &[u8]) -> Result<(H, Vec<f64>), ArtifactError> {
    if bytes.len() < 12 || &bytes[..8] != magic {
        return Err(ArtifactError::BadMagic(String::from_utf8_lossy(magic).into_owned()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| ArtifactError::Malformed("truncated header".into()))?;
    let header: H = serde_json::from_slice(body).map_err(|e| ArtifactError::Malformed(e.to_string()))?;
    let rest = &bytes[12 + hlen..];
    if !rest.len().is_multiple_of(8) {
        return Err(ArtifactError::Malformed("payload not a whole number of f64".into()));
    }
    let payload = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data()?;
    }
    fs::rename(tmp, path)
}

pub fn write<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, payload: &[f64]) -> io::Result<()> {
    write_atomic(path, &encode(magic, header, payload))
}

pub fn read<H: DeserializeOwned>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<f64>), ArtifactError> {
    let bytes = fs::read(path)?;
    decode(magic, &bytes)
}

/// True when `path` exists and starts with `magic`.
pub fn is_intact(path: &Path, magic: &[u8]) -> bool {
    use std::io::Read;
    let Ok(mut f) = fs::File::open(path) else {
        return false;
    };
    let mut buf = vec![0u8; magic.len()];
    f.read_exact(&mut buf).is_ok() && buf == magic
}
