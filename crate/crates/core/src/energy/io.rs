//! Flat little-endian binary layout and CSV dump for fields.
//!
//! Binary header: magic `HFLD`, then u32 version, d, n, ε denominator m,
//! offset count, then lo and hi cell corners as i64; payload: node values as
//! f64 in storage order. The free mask is not persisted.

use std::io::{Read, Write};

use super::Field;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

const MAGIC: &[u8; 4] = b"HFLD";
const VERSION: u32 = 1;

pub fn write_field(field: &Field, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [VERSION, field.d() as u32, field.n as u32, field.m, field.num_offsets as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in field.lo.iter().chain(&field.hi) {
        w.write_all(&c.to_le_bytes())?;
    }
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(mut r: impl Read) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidField("bad magic".into()));
    }
    let mut u32s = [0u32; 5];
    for v in u32s.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, d, n, m, nof] = u32s;
    if version != VERSION {
        return Err(Error::InvalidField(format!("unsupported version {version}")));
    }
    let mut read_i64 = || -> Result<i64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(i64::from_le_bytes(b))
    };
    let lo = (0..d).map(|_| read_i64()).collect::<Result<Vec<_>>>()?;
    let hi = (0..d).map(|_| read_i64()).collect::<Result<Vec<_>>>()?;
    let mut field = Field::zeros(m, n as usize, nof as usize, lo, hi);
    for v in field.values.iter_mut() {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    Ok(field)
}

/// One row per node: cell coordinates, offset, scaled position, values,
/// free flag.
pub fn field_to_csv(lattice: &Lattice, field: &Field) -> String {
    let d = field.d();
    let mut s = String::new();
    let cols: Vec<String> = (0..d)
        .map(|k| format!("z{k}"))
        .chain(std::iter::once("offset".to_string()))
        .chain((0..d).map(|k| format!("x{k}")))
        .chain((0..field.n).map(|c| format!("u{c}")))
        .chain(std::iter::once("free".to_string()))
        .collect();
    s.push_str(&cols.join(","));
    s.push('\n');
    for (idx, (c, i)) in field.nodes().enumerate() {
        let pos = field.position(lattice, &c, i);
        let mut row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        row.push(i.to_string());
        row.extend(pos.iter().map(|v| v.to_string()));
        row.extend(field.node(idx).iter().map(|v| v.to_string()));
        row.push((field.free[idx] as u8).to_string());
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeSpec, Region};

    #[test]
    fn binary_layout_round_trips_values() {
        let lat = Lattice::new(LatticeSpec::preset("kagome", 2, 2).unwrap()).unwrap();
        let f = Field::sample(&lat, 3, &Region::cube(2, 0.0, 1.0), 1, |x| vec![x[0] * 2.0, -x[1]]).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"HFLD");
        let g = read_field(buf.as_slice()).unwrap();
        assert_eq!(g.values, f.values);
        assert_eq!((g.lo.clone(), g.hi.clone(), g.m), (f.lo.clone(), f.hi.clone(), f.m));
        let csv = field_to_csv(&lat, &f);
        assert_eq!(csv.lines().count(), 1 + f.num_nodes());
    }
}
