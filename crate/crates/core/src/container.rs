//! Binary IQ container shared by grid signals and lane snapshots.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic        4 bytes  "GBSN"
//! version      u32      1 = grid signal, 2 = lane block
//! grid_rate_hz f64
//! sample_count u64      total complex samples in the payload
//! lane_count   u32      version 2 only
//! payload      sample_count × (f32 I, f32 Q); lanes stored back to back
//! ```
//!
//! Truth support travels in a sidecar text file of comma-separated indices.

use num_complex::Complex64;
use std::collections::BTreeSet;
use std::io::{self, Read, Write};

pub const MAGIC: [u8; 4] = *b"GBSN";
pub const VERSION_GRID: u32 = 1;
pub const VERSION_LANES: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    VersionUnsupported(u32),
    #[error("file truncated: {0}")]
    TruncatedFile(String),
    #[error("malformed container: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Decoded container payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Grid { grid_rate_hz: f64, samples: Vec<Complex64> },
    Lanes { grid_rate_hz: f64, lanes: Vec<Vec<Complex64>> },
}

fn write_samples<W: Write>(w: &mut W, samples: &[Complex64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(samples.len() * 8);
    for z in samples {
        buf.extend_from_slice(&(z.re as f32).to_le_bytes());
        buf.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn write_grid<W: Write>(w: &mut W, grid_rate_hz: f64, samples: &[Complex64]) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION_GRID.to_le_bytes())?;
    w.write_all(&grid_rate_hz.to_le_bytes())?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    write_samples(w, samples)
}

/// Lanes must all have the same length.
pub fn write_lanes<W: Write>(w: &mut W, grid_rate_hz: f64, lanes: &[Vec<Complex64>]) -> io::Result<()> {
    let total: usize = lanes.iter().map(Vec::len).sum();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION_LANES.to_le_bytes())?;
    w.write_all(&grid_rate_hz.to_le_bytes())?;
    w.write_all(&(total as u64).to_le_bytes())?;
    w.write_all(&(lanes.len() as u32).to_le_bytes())?;
    for lane in lanes {
        write_samples(w, lane)?;
    }
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), ContainerError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ContainerError::TruncatedFile(format!("while reading {what}")),
        _ => ContainerError::Io(e),
    })
}

pub fn read_container<R: Read>(r: &mut R) -> Result<Container, ContainerError> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(ContainerError::BadMagic(magic));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    read_exact_or(r, &mut b4, "version")?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION_GRID && version != VERSION_LANES {
        return Err(ContainerError::VersionUnsupported(version));
    }
    read_exact_or(r, &mut b8, "grid rate")?;
    let grid_rate_hz = f64::from_le_bytes(b8);
    read_exact_or(r, &mut b8, "sample count")?;
    let count = u64::from_le_bytes(b8);
    let lane_count = if version == VERSION_LANES {
        read_exact_or(r, &mut b4, "lane count")?;
        u32::from_le_bytes(b4) as u64
    } else {
        1
    };
    if lane_count == 0 || count % lane_count != 0 {
        return Err(ContainerError::Malformed(format!("{count} samples do not split into {lane_count} lanes")));
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let need = count.checked_mul(8).ok_or_else(|| ContainerError::Malformed("sample count overflows".into()))?;
    if (payload.len() as u64) < need {
        return Err(ContainerError::TruncatedFile(format!(
            "payload has {} bytes, header promises {need}",
            payload.len()
        )));
    }
    let samples: Vec<Complex64> = payload[..need as usize]
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(match version {
        VERSION_GRID => Container::Grid { grid_rate_hz, samples },
        _ => {
            let per_lane = (count / lane_count) as usize;
            let lanes = samples.chunks(per_lane.max(1)).map(<[Complex64]>::to_vec).collect();
            Container::Lanes { grid_rate_hz, lanes }
        }
    })
}

pub fn format_support(support: &BTreeSet<usize>) -> String {
    let items: Vec<String> = support.iter().map(usize::to_string).collect();
    items.join(",")
}

pub fn parse_support(text: &str) -> Result<BTreeSet<usize>, ContainerError> {
    text.trim()
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| ContainerError::Malformed(format!("bad subband index {s:?}"))))
        .collect()
}
