//! Binary field snapshots: `"OBSS"`, version `u32 = 1`, `n, n, n` as `u32`,
//! box side `f64`, component count `u32`, then each component's physical
//! values as little-endian `f64` in x-fastest order.

use std::io::{Read, Write};
use std::path::Path;

use super::{PeriodicGrid, SpectralScalarField, SpectralVectorField};
use crate::error::{ObssError, Result};

const MAGIC: &[u8; 4] = b"OBSS";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub box_side: f64,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_scalar(f: &SpectralScalarField) -> Self {
        Self {
            n: f.grid().points_per_axis(),
            box_side: f.grid().box_side(),
            components: vec![f.to_physical()],
        }
    }

    pub fn from_vector(v: &SpectralVectorField) -> Self {
        let g = v.grid();
        Self { n: g.points_per_axis(), box_side: g.box_side(), components: v.to_physical().to_vec() }
    }

    /// Concatenates the components of several snapshots on the same grid.
    pub fn stack(parts: &[Snapshot]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| ObssError::Format("nothing to stack".into()))?;
        let mut components = Vec::new();
        for p in parts {
            if p.n != first.n || p.box_side != first.box_side {
                return Err(ObssError::GridMismatch("stacked snapshots differ in grid".into()));
            }
            components.extend(p.components.iter().cloned());
        }
        Ok(Self { n: first.n, box_side: first.box_side, components })
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.box_side, self.n)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let len = self.n.pow(3);
        let mut out = Vec::with_capacity(28 + 8 * len * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for _ in 0..3 {
            out.extend_from_slice(&(self.n as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.box_side.to_le_bytes());
        out.extend_from_slice(&(self.components.len() as u32).to_le_bytes());
        for c in &self.components {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| ObssError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(ObssError::Format("bad magic".into()));
        }
        let mut u32_ = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| ObssError::Format("truncated header".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = u32_()?;
        if version != VERSION {
            return Err(ObssError::Format(format!("unsupported version {version}")));
        }
        let dims = [u32_()?, u32_()?, u32_()?];
        if dims[0] != dims[1] || dims[1] != dims[2] {
            return Err(ObssError::Format(format!("non-cubic grid {dims:?}")));
        }
        let n = dims[0] as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| ObssError::Format("truncated header".into()))?;
        let box_side = f64::from_le_bytes(b8);
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| ObssError::Format("truncated header".into()))?;
        let count = u32::from_le_bytes(b4) as usize;
        let len = n.pow(3);
        if r.len() != 8 * len * count {
            return Err(ObssError::Format(format!(
                "payload has {} bytes, expected {}",
                r.len(),
                8 * len * count
            )));
        }
        let components = r
            .chunks_exact(8 * len)
            .map(|chunk| {
                chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
            })
            .collect();
        Ok(Self { n, box_side, components })
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&snap.to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let s = Snapshot { n: 16, box_side: 2.5, components: vec![vec![1.0; 4096]] };
        let b = s.to_bytes();
        assert_eq!(&b[..4], b"OBSS");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), 2.5);
        assert_eq!(u32::from_le_bytes(b[28..32].try_into().unwrap()), 1);
        assert_eq!(b.len(), 32 + 8 * 4096);
        assert_eq!(Snapshot::from_bytes(&b).unwrap(), s);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Snapshot::from_bytes(b"OBSX").is_err());
        let mut b = Snapshot { n: 16, box_side: 1.0, components: vec![vec![0.0; 4096]] }.to_bytes();
        b.pop();
        assert!(Snapshot::from_bytes(&b).is_err());
    }
}
