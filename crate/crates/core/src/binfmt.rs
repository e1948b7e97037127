//! Little-endian binary layout shared by noise realizations and heat snapshots.
//!
//! ```text
//! offset  type  field
//!      0  u64   d
//!      8  u64   N
//!     16  u64   M
//!     24  f64   L
//!     32  f64   T
//!     40  u64   seed
//!     48  f64   lambda
//!     56  f64[] payload, one time slice after another, nodes in row-major order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;

pub const HEADER_BYTES: usize = 56;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Header {
    pub grid: TorusGrid,
    pub seed: u64,
    pub lambda: f64,
}

impl Header {
    fn encode(&self) -> [u8; HEADER_BYTES] {
        let g = &self.grid;
        let mut out = [0u8; HEADER_BYTES];
        out[0..8].copy_from_slice(&(g.dim() as u64).to_le_bytes());
        out[8..16].copy_from_slice(&(g.nodes_per_axis() as u64).to_le_bytes());
        out[16..24].copy_from_slice(&(g.steps() as u64).to_le_bytes());
        out[24..32].copy_from_slice(&g.side().to_le_bytes());
        out[32..40].copy_from_slice(&g.horizon().to_le_bytes());
        out[40..48].copy_from_slice(&self.seed.to_le_bytes());
        out[48..56].copy_from_slice(&self.lambda.to_le_bytes());
        out
    }

    fn decode(path: &Path, b: &[u8; HEADER_BYTES]) -> Result<Self> {
        let u = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let f = |i: usize| f64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let grid = TorusGrid::new(u(0) as usize, u(8) as usize, f(24), f(32), u(16) as usize)
            .map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })?;
        Ok(Self { grid, seed: u(40), lambda: f(48) })
    }
}

pub fn write(path: &Path, header: &Header, payload: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(&header.encode())?;
    for v in payload {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file and checks the payload holds exactly `slices(grid)` time slices.
pub fn read(path: &Path, slices: impl Fn(&TorusGrid) -> usize) -> Result<(Header, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut head = [0u8; HEADER_BYTES];
    r.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    let header = Header::decode(path, &head)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    let expected = slices(&header.grid) * header.grid.num_nodes() * 8;
    if rest.len() != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("payload is {} bytes, expected {expected}", rest.len()),
        });
    }
    let payload = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}
