//! Raw volume files.
//!
//! Layout (all little-endian):
//!
//! | bytes  | content                                   |
//! |--------|-------------------------------------------|
//! | 0..8   | magic `BQNPMVOL`                          |
//! | 8..12  | `d`, the number of axes (u32)             |
//! | 12..24 | three u32 sizes, unused axes are 0        |
//! | 24..32 | zero padding                              |
//! | 32..   | `N` f64 samples, first axis fastest       |

use std::io::{Read, Write};
use std::path::Path;

use bqnpm::Grid;

use crate::CliError;

pub const MAGIC: &[u8; 8] = b"BQNPMVOL";
pub const HEADER_LEN: usize = 32;

pub fn encode_volume(grid: &Grid, x: &[f64]) -> Result<Vec<u8>, CliError> {
    if x.len() != grid.len() {
        return Err(CliError::Volume(format!(
            "{} samples for a grid of {}",
            x.len(),
            grid.len()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * x.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.ndim() as u32).to_le_bytes());
    for axis in 0..3 {
        let n = grid.dims().get(axis).copied().unwrap_or(0);
        let n = u32::try_from(n).map_err(|_| CliError::Volume(format!("axis {axis} too long")))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    out.resize(HEADER_LEN, 0);
    for v in x {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_volume(bytes: &[u8]) -> Result<(Grid, Vec<f64>), CliError> {
    let bad = |m: &str| CliError::Volume(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("not a volume file (bad magic)"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let d = word(8);
    if !(1..=3).contains(&d) {
        return Err(bad("axis count must be 1, 2 or 3"));
    }
    let dims: Vec<usize> = (0..d).map(|a| word(12 + 4 * a)).collect();
    let grid = Grid::new(&dims).map_err(|e| CliError::Volume(e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(CliError::Volume(format!(
            "expected {} data bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let x = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((grid, x))
}

pub fn dump_volume(grid: &Grid, x: &[f64], path: &Path) -> Result<(), CliError> {
    let bytes = encode_volume(grid, x)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn load_volume(path: &Path) -> Result<(Grid, Vec<f64>), CliError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_volume(&bytes)
}
