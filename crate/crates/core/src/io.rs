//! Field serialization: a JSON record and a little-endian binary dump.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyLattice, SpectralField};

/// JSON form `{lambda, cutoff, coeffs: [[re, im], …]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldRecord {
    pub lambda: u32,
    pub cutoff: u32,
    pub coeffs: Vec<[f64; 2]>,
}

impl From<&SpectralField> for FieldRecord {
    fn from(f: &SpectralField) -> Self {
        FieldRecord {
            lambda: f.lattice().lambda(),
            cutoff: f.lattice().cutoff(),
            coeffs: f.coeffs().iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<FieldRecord> for SpectralField {
    type Error = Error;

    fn try_from(r: FieldRecord) -> Result<Self> {
        let lattice = FrequencyLattice::new(r.lambda, r.cutoff)?;
        let coeffs = r.coeffs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        SpectralField::new(lattice, coeffs)
    }
}

pub fn field_to_json(f: &SpectralField) -> Result<String> {
    Ok(serde_json::to_string(&FieldRecord::from(f))?)
}

pub fn field_from_json(s: &str) -> Result<SpectralField> {
    let r: FieldRecord = serde_json::from_str(s)?;
    r.try_into()
}

/// Header `u32 lambda, u32 cutoff`, then `(re, im)` f64 pairs, all little-endian.
pub fn write_field_binary<W: Write>(f: &SpectralField, mut w: W) -> Result<()> {
    w.write_all(&f.lattice().lambda().to_le_bytes())?;
    w.write_all(&f.lattice().cutoff().to_le_bytes())?;
    for c in f.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let lambda = u32::from_le_bytes(b4);
    r.read_exact(&mut b4)?;
    let cutoff = u32::from_le_bytes(b4);
    let lattice = FrequencyLattice::new(lambda, cutoff)?;
    let mut coeffs = Vec::with_capacity(lattice.mode_count());
    let mut b8 = [0u8; 8];
    for _ in 0..lattice.mode_count() {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        coeffs.push(Complex64::new(re, im));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::invalid("trailing bytes after field payload"));
    }
    SpectralField::new(lattice, coeffs)
}

/// Reads a field, choosing the format from the extension (`.json` or binary otherwise).
pub fn load_field(path: &Path) -> Result<SpectralField> {
    if path.extension().is_some_and(|e| e == "json") {
        field_from_json(&std::fs::read_to_string(path)?)
    } else {
        read_field_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub fn save_field(f: &SpectralField, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "json") {
        std::fs::write(path, field_to_json(f)?)?;
    } else {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_field_binary(f, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::random_band_limited;

    #[test]
    fn json_and_binary_round_trip() {
        let l = FrequencyLattice::new(3, 2).unwrap();
        let f = random_band_limited(l, 4, 0.7, 11).unwrap();
        let g = field_from_json(&field_to_json(&f).unwrap()).unwrap();
        assert_eq!(f, g);
        let mut buf = Vec::new();
        write_field_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 * l.mode_count());
        assert_eq!(read_field_binary(&buf[..]).unwrap(), f);
        assert!(read_field_binary(&buf[..buf.len() - 1]).is_err());
    }
}
