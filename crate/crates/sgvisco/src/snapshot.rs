//! Binary field snapshots.
//!
//! Layout (little-endian):
//!   bytes 0..5   magic "VSGV1"
//!   byte  5      endianness tag, 0x01 = little
//!   byte  6      spatial dimension d
//!   bytes 7..11  n (u32)
//!   byte  11     rank tag: 0 scalar, 1 vector, 2 matrix
//!   bytes 12..20 sample time t (f64)
//!   payload      n^d * components f64 samples, row-major over grid
//!                points, components fastest
//!
//! Snapshots store real-space samples: portable across cutoff choices and
//! directly plottable; the spectral form is re-derivable by transform.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolution::State;
use crate::fft::inverse;
use crate::field::{Rank, RealField, SpectralGrid};

pub const MAGIC: &[u8; 5] = b"VSGV1";
const LITTLE_ENDIAN_TAG: u8 = 1;

fn rank_tag(rank: Rank) -> u8 {
    match rank {
        Rank::Scalar => 0,
        Rank::Vector => 1,
        Rank::Matrix => 2,
    }
}

fn rank_from_tag(tag: u8) -> Result<Rank> {
    match tag {
        0 => Ok(Rank::Scalar),
        1 => Ok(Rank::Vector),
        2 => Ok(Rank::Matrix),
        other => Err(Error::Format(format!("unknown rank tag {other}"))),
    }
}

/// Write one field; the payload round-trips bit-exactly.
pub fn write_field(path: &Path, field: &RealField, t: f64) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let mut header = Vec::with_capacity(20);
    header.extend_from_slice(MAGIC);
    header.push(LITTLE_ENDIAN_TAG);
    header.push(field.grid.d() as u8);
    header.extend_from_slice(&(field.grid.n() as u32).to_le_bytes());
    header.push(rank_tag(field.rank));
    header.extend_from_slice(&t.to_le_bytes());
    file.write_all(&header)?;
    let mut payload = Vec::with_capacity(field.data.len() * 8);
    for v in &field.data {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&payload)?;
    Ok(())
}

/// Read one field; the grid must match in d and n (the cutoff is the
/// reader's choice).
pub fn read_field(path: &Path, grid: &SpectralGrid) -> Result<(RealField, f64)> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 20];
    file.read_exact(&mut header)
        .map_err(|_| Error::Format("snapshot shorter than its header".into()))?;
    if &header[0..5] != MAGIC {
        return Err(Error::Format("bad snapshot magic".into()));
    }
    if header[5] != LITTLE_ENDIAN_TAG {
        return Err(Error::Format(format!("unsupported endianness tag {}", header[5])));
    }
    let d = header[6] as usize;
    let n = u32::from_le_bytes(header[7..11].try_into().unwrap()) as usize;
    let rank = rank_from_tag(header[11])?;
    let t = f64::from_le_bytes(header[12..20].try_into().unwrap());
    if d != grid.d() || n != grid.n() {
        return Err(Error::GridMismatch(format!(
            "snapshot is d = {d}, n = {n}; expected d = {}, n = {}",
            grid.d(),
            grid.n()
        )));
    }
    let count = grid.points() * rank.components(d);
    let mut payload = vec![0u8; count * 8];
    file.read_exact(&mut payload)
        .map_err(|_| Error::Format("truncated snapshot payload".into()))?;
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after snapshot payload".into()));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((RealField { grid: *grid, rank, data }, t))
}

/// Write the state's motion and velocity as `<stem>_y.bin` / `<stem>_u.bin`.
pub fn write_state(dir: &Path, stem: &str, state: &State) -> Result<()> {
    write_field(&dir.join(format!("{stem}_y.bin")), &inverse(&state.y_hat), state.t)?;
    write_field(&dir.join(format!("{stem}_u.bin")), &inverse(&state.u_hat), state.t)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: SpectralGrid, rank: Rank, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = RealField::zeros(grid, rank);
        for v in &mut f.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SpectralGrid::new(2, 8, 3).unwrap();
        let field = random_field(grid, Rank::Matrix, 1);
        let path = dir.path().join("f.bin");
        write_field(&path, &field, 0.625).unwrap();
        let (back, t) = read_field(&path, &grid).unwrap();
        assert_eq!(t.to_bits(), 0.625f64.to_bits());
        assert_eq!(back.rank, Rank::Matrix);
        for (a, b) in field.data.iter().zip(&back.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SpectralGrid::new(1, 8, 3).unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &random_field(grid, Rank::Scalar, 2), 0.0).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_field(&path, &grid), Err(Error::Format(_))));
    }

    #[test]
    fn wrong_grid_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SpectralGrid::new(2, 8, 3).unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &random_field(grid, Rank::Vector, 3), 0.0).unwrap();
        let other = SpectralGrid::new(2, 16, 3).unwrap();
        assert!(matches!(read_field(&path, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SpectralGrid::new(2, 8, 3).unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &random_field(grid, Rank::Vector, 4), 0.0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(matches!(read_field(&path, &grid), Err(Error::Format(_))));
    }
}
