//! Binary snapshot files and CSV helpers.
//!
//! A snapshot record is a little-endian header `n: u64, L: f64,
//! components: u64, time: f64` followed by `n⁴ · components` `f64` samples in
//! row-major grid order, where `components` counts real numbers per point
//! (1 for scalar, 2 for complex and 8 for spinor fields). A trajectory file
//! is a sequence of records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{Field, FieldValue, ScalarField};
use crate::grid::Grid;
use crate::trajectory::Trajectory;

pub fn write_field<F: Field>(w: &mut impl Write, field: &F, time: f64) -> Result<()> {
    let grid = field.grid();
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&grid.half_length().to_le_bytes())?;
    w.write_all(&(F::Value::REALS as u64).to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    let mut reals = Vec::with_capacity(F::Value::REALS);
    let mut buf = Vec::with_capacity(grid.len() * F::Value::REALS * 8);
    for v in field.values() {
        reals.clear();
        v.push_reals(&mut reals);
        for x in &reals {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<Option<u64>> {
    let mut b = [0u8; 8];
    let mut got = 0;
    while got < 8 {
        let k = r.read(&mut b[got..])?;
        if k == 0 {
            return if got == 0 {
                Ok(None)
            } else {
                Err(Error::Format("truncated header".into()))
            };
        }
        got += k;
    }
    Ok(Some(u64::from_le_bytes(b)))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads one record; `Ok(None)` at a clean end of input.
pub fn read_field<F: Field>(r: &mut impl Read) -> Result<Option<(F, f64)>> {
    let Some(n) = read_u64(r)? else {
        return Ok(None);
    };
    let half_length = read_f64(r)?;
    let components = read_u64(r)?.ok_or_else(|| Error::Format("truncated header".into()))?;
    let time = read_f64(r)?;
    if components as usize != F::Value::REALS {
        return Err(Error::Format(format!(
            "record holds {components} reals per point, expected {}",
            F::Value::REALS
        )));
    }
    if n > 1024 {
        return Err(Error::Format(format!("implausible grid size {n}")));
    }
    let grid = Grid::new(n as usize, half_length)?;
    let mut bytes = vec![0u8; grid.len() * F::Value::REALS * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated sample block".into()))?;
    let reals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let values = reals.chunks_exact(F::Value::REALS).map(F::Value::from_reals).collect();
    Ok(Some((F::from_values_unchecked(&grid, values), time)))
}

/// Writes the snapshot values of a trajectory, one record per stored time.
pub fn write_trajectory<F: Field>(path: &Path, traj: &Trajectory<F>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for jet in traj.jets() {
        write_field(&mut w, jet.value(), jet.time)?;
    }
    w.flush()?;
    Ok(())
}

/// All `(time, field)` records of a file.
pub fn read_series<F: Field>(path: &Path) -> Result<Vec<(f64, F)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    while let Some((f, t)) = read_field::<F>(&mut r)? {
        if let Some((_, first)) = out.first() {
            let first: &F = first;
            if first.grid() != f.grid() {
                return Err(Error::GridMismatch);
            }
        }
        out.push((t, f));
    }
    Ok(out)
}

/// Writes preformatted rows under a header line; see [`format_number`].
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "row has {} cells for {} columns",
                row.len(),
                header.len()
            )));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `x,value` CSV of the first-axis line through the grid centre.
pub fn write_slice_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let rows: Vec<Vec<String>> = field
        .axis_slice()
        .into_iter()
        .map(|(x, v)| vec![format_number(x), format_number(v)])
        .collect();
    write_csv(path, &["x", "value"], &rows)
}

/// Shortest round-trip decimal, in scientific notation outside
/// `[1e-4, 1e9)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e9).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Formats an optional number, empty when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SpinorField;
    use crate::C64;

    #[test]
    fn spinor_records_round_trip() {
        let grid = Grid::new(4, 2.0).unwrap();
        let f = SpinorField::from_fn(&grid, |x| [0, 1, 2, 3].map(|c| C64::new(x[0] + c as f64, -x[3])));
        let mut buf = Vec::new();
        write_field(&mut buf, &f, 0.75).unwrap();
        write_field(&mut buf, &f, 1.5).unwrap();
        assert_eq!(buf.len(), 2 * (32 + 8 * 8 * grid.len()));
        let mut r = buf.as_slice();
        let (g, t) = read_field::<SpinorField>(&mut r).unwrap().unwrap();
        assert_eq!((g, t), (f.clone(), 0.75));
        assert_eq!(read_field::<SpinorField>(&mut r).unwrap().unwrap().1, 1.5);
        assert!(read_field::<SpinorField>(&mut r).unwrap().is_none());
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 0.25, -3.5e-9, 6.02e23, 1e-4, 123456.789] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(6.5e-9), "6.5e-9");
    }

    #[test]
    fn wrong_kind_and_truncation_are_rejected() {
        let grid = Grid::new(4, 2.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| x[1]);
        let mut buf = Vec::new();
        write_field(&mut buf, &f, 0.0).unwrap();
        assert!(read_field::<SpinorField>(&mut buf.as_slice()).is_err());
        let cut = &buf[..buf.len() - 3];
        assert!(read_field::<ScalarField>(&mut &cut[..]).is_err());
    }
}
