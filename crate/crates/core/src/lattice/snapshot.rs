//! Binary field snapshots.
//!
//! Layout: magic `MSF1`, `u32` n, `f64` l, then n³ complex values as interleaved `(re, im)`
//! `f64` pairs, row-major, everything little-endian.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::{Field, Grid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSF1";

pub fn write_field<W: Write>(mut w: W, field: &Field) -> Result<()> {
    let g = field.grid();
    let n = u32::try_from(g.n()).map_err(|_| Error::Format("n does not fit in u32".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&g.l().to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    let grid = Grid::new(n, l)?;
    let mut raw = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Field::from_values(grid, values)
}

pub fn save(path: &std::path::Path, field: &Field) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_field(std::io::BufWriter::new(f), field)
}

pub fn load(path: &std::path::Path) -> Result<Field> {
    let f = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(4, 2.5).unwrap();
        let f = Field::constant(g, C64::new(1.5, -2.0));
        let mut bytes = Vec::new();
        write_field(&mut bytes, &f).unwrap();
        assert_eq!(&bytes[..4], b"MSF1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2.5);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), -2.0);
        assert_eq!(bytes.len(), 16 + 16 * 64);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_field(&b"MSF2\x04\0\0\0"[..]).is_err());
        let g = Grid::new(4, 1.0).unwrap();
        let mut bytes = Vec::new();
        write_field(&mut bytes, &Field::zeros(g)).unwrap();
        bytes.pop();
        assert!(read_field(&bytes[..]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(seed in any::<u64>(), l in 0.1f64..50.0) {
            let g = Grid::new(4, l).unwrap();
            let f = Field::from_fn(g, |x| {
                let s = (seed as f64 * 1e-9 + x[0] * 1.3 + x[1] * 0.7 - x[2]).sin();
                C64::new(s, s * s - 0.5)
            });
            let mut bytes = Vec::new();
            write_field(&mut bytes, &f).unwrap();
            let back = read_field(&bytes[..]).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
