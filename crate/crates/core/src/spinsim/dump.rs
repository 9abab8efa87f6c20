use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::StateVector;
use crate::error::{Error, Result};

/// JSON sidecar describing a binary state dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub n: usize,
    pub dim: usize,
    pub format: String,
    pub basis: String,
    pub phase: String,
}

impl DumpHeader {
    fn for_state(v: &StateVector) -> Self {
        Self {
            n: v.n(),
            dim: v.dim(),
            format: "little-endian f64 pairs (re, im), one per basis state".into(),
            basis: "bit i of the index is atom i; 0 = up, 1 = down".into(),
            phase: "largest-magnitude amplitude (lowest index on ties) real and positive".into(),
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the amplitudes to `path` and the header to `path` with a `.json`
/// extension. The global phase is fixed before writing.
pub fn write_state_dump(path: &Path, v: &StateVector) -> Result<()> {
    let mut v = v.clone();
    v.fix_phase();
    let mut bytes = Vec::with_capacity(16 * v.dim());
    for a in v.amplitudes() {
        bytes.extend_from_slice(&a.re.to_le_bytes());
        bytes.extend_from_slice(&a.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(
        sidecar(path),
        serde_json::to_string_pretty(&DumpHeader::for_state(&v))?,
    )?;
    Ok(())
}

pub fn read_state_dump(path: &Path) -> Result<StateVector> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * header.dim || header.dim != 1 << header.n {
        return Err(Error::DimensionMismatch {
            expected: 16 << header.n,
            found: bytes.len(),
        });
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let amps = bytes
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    StateVector::new(header.n, amps)
}
