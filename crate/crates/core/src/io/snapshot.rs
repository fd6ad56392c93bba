//! Binary snapshot format.
//!
//! Layout, little-endian: magic `BSNS`, version `u16 = 1`, `n: u32`,
//! `L: f64`, `t: f64`, then the planes `a, u1, u2, Pi` as physical `f64`
//! values in row-major order.

use std::fs;
use std::path::Path;

use crate::elliptic::potential;
use crate::error::{Error, Result};
use crate::evolution::StateSnapshot;
use crate::spectral::{gradient, Grid, SpectralField, VectorField};

pub const MAGIC: &[u8; 4] = b"BSNS";
pub const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 4 + 8 + 8;

pub fn encode_snapshot(state: &StateSnapshot) -> Result<Vec<u8>> {
    let g = state.a.grid();
    let pi = potential(&state.grad_pi)?;
    let mut out = Vec::with_capacity(HEADER + 4 * 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for f in [&state.a, &state.u.x, &state.u.y, &pi] {
        for v in f.to_physical() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_snapshot(state: &StateSnapshot, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_snapshot(state)?)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn fail(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Snapshot {
            path: self.path.to_path_buf(),
            offset,
            msg: msg.into(),
        }
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(self.fail(self.bytes.len(), format!("truncated while reading {what}")));
        }
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(buf)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>(what)?))
    }
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<StateSnapshot> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.take::<4>("magic")?;
    if &magic != MAGIC {
        return Err(r.fail(0, format!("bad magic {:?}, expected \"BSNS\"", magic)));
    }
    let version = u16::from_le_bytes(r.take::<2>("version")?);
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let n_at = r.pos;
    let n = u32::from_le_bytes(r.take::<4>("grid size")?) as usize;
    if !n.is_power_of_two() || n < 8 {
        return Err(r.fail(n_at, format!("grid size {n} is not a power of two >= 8")));
    }
    let length = r.f64("box length")?;
    let t = r.f64("time")?;
    let grid = Grid::new(n, length)?;
    let need = HEADER + 4 * 8 * grid.len();
    if bytes.len() < need {
        return Err(r.fail(bytes.len(), format!("truncated: {} of {need} bytes", bytes.len())));
    }
    if bytes.len() > need {
        return Err(r.fail(need, "trailing bytes after the last plane"));
    }
    let mut planes = Vec::with_capacity(4);
    for _ in 0..4 {
        let vals: Vec<f64> = (0..grid.len())
            .map(|_| r.f64("field plane"))
            .collect::<Result<_>>()?;
        planes.push(SpectralField::from_physical(&grid, &vals)?);
    }
    let pi = planes.pop().expect("four planes");
    let uy = planes.pop().expect("four planes");
    let ux = planes.pop().expect("four planes");
    let a = planes.pop().expect("four planes");
    let mut state = StateSnapshot::new(t, a, VectorField::new(ux, uy)?)?;
    state.grad_pi = gradient(&pi);
    Ok(state)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<StateSnapshot> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_snapshot(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{gaussian_field, solenoidal_field, GaussianEnsemble};

    fn state() -> StateSnapshot {
        let g = Grid::new(16, 3.0).unwrap();
        let ens = GaussianEnsemble::broadband(&g, 1.0);
        let mut s = StateSnapshot::new(
            0.25,
            gaussian_field(&g, &ens, 1),
            solenoidal_field(&g, &ens, 2),
        )
        .unwrap();
        s.grad_pi = gradient(&gaussian_field(&g, &ens, 3));
        s
    }

    #[test]
    fn round_trip() {
        let s = state();
        let bytes = encode_snapshot(&s).unwrap();
        let back = decode_snapshot(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.t, 0.25);
        assert!((&back.a - &s.a).max_coefficient() < 1e-15);
        assert!((&back.u - &s.u).max_coefficient() < 1e-15);
        assert!((&back.grad_pi - &s.grad_pi).max_coefficient() < 1e-14);
        assert_eq!(encode_snapshot(&back).unwrap()[..HEADER], bytes[..HEADER]);
    }

    #[test]
    fn corrupt_headers() {
        let mut bytes = encode_snapshot(&state()).unwrap();
        let p = Path::new("x.bsns");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        match decode_snapshot(&bad, p) {
            Err(Error::Snapshot { offset: 0, msg, .. }) => assert!(msg.contains("magic")),
            other => panic!("{other:?}"),
        }
        let mut v2 = bytes.clone();
        v2[4..6].copy_from_slice(&2u16.to_le_bytes());
        assert!(matches!(decode_snapshot(&v2, p), Err(Error::Version(2))));
        let mut odd = bytes.clone();
        odd[6..10].copy_from_slice(&12u32.to_le_bytes());
        assert!(matches!(decode_snapshot(&odd, p), Err(Error::Snapshot { offset: 6, .. })));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_snapshot(&bytes, p), Err(Error::Snapshot { .. })));
    }
}
