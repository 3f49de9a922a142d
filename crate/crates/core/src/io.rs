//! File formats: JSON matrices, JSON quantum-torus polynomials, a binary grid
//! container and CSV tables.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, LabError, Result};
use crate::ncmat::MatElem;
use crate::optorus::{Domain, OpGrid};
use crate::qtorus::{QTorusPoly, RationalAngle};
use crate::scalar::{cplx, to_f64, Real};

/// Row-major nested array of `[re, im]` pairs.
pub fn matrix_to_json<T: Real>(m: &MatElem<T>) -> Value {
    let n = m.dim();
    Value::Array(
        (0..n)
            .map(|i| {
                Value::Array(
                    (0..n)
                        .map(|j| {
                            let z = m.get(i, j);
                            serde_json::json!([to_f64(z.re), to_f64(z.im)])
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn matrix_from_json<T: Real>(v: &Value) -> Result<MatElem<T>> {
    let rows = v.as_array().ok_or_else(|| LabError::InvalidInput("matrix must be an array of rows".into()))?;
    let n = rows.len();
    if n == 0 {
        return invalid("empty matrix");
    }
    let mut entries = Vec::with_capacity(n * n);
    for row in rows {
        let row = row.as_array().filter(|r| r.len() == n).ok_or_else(|| LabError::InvalidInput("matrix must be square".into()))?;
        for e in row {
            let pair = e.as_array().filter(|p| p.len() == 2).and_then(|p| Some((p[0].as_f64()?, p[1].as_f64()?)));
            let (re, im) = pair.ok_or_else(|| LabError::InvalidInput("entries must be [re, im] pairs".into()))?;
            entries.push(cplx::<T>(re, im));
        }
    }
    Ok(MatElem::from_fn(n, |i, j| entries[i * n + j]))
}

/// A single matrix or an array of matrices.
pub fn matrices_from_json<T: Real>(v: &Value) -> Result<Vec<MatElem<T>>> {
    // a matrix is rows of pairs; a list is one level deeper
    let depth3 = v
        .as_array()
        .and_then(|a| a.first())
        .and_then(|r| r.as_array())
        .and_then(|r| r.first())
        .and_then(|e| e.as_array())
        .and_then(|e| e.first())
        .is_some_and(|x| x.is_array());
    if depth3 {
        v.as_array().expect("checked").iter().map(matrix_from_json).collect()
    } else {
        Ok(vec![matrix_from_json(v)?])
    }
}

pub fn read_matrices<T: Real>(path: &Path) -> Result<Vec<MatElem<T>>> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    matrices_from_json(&v)
}

pub fn write_matrices<T: Real>(path: &Path, ms: &[MatElem<T>]) -> Result<()> {
    let v = Value::Array(ms.iter().map(matrix_to_json).collect());
    fs::write(path, serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PolyFile {
    p: i64,
    q: i64,
    coeffs: Vec<[f64; 4]>,
}

/// `{p, q, coeffs: [[k1, k2, re, im], ...]}`.
pub fn poly_to_json<T: Real>(f: &QTorusPoly<T>) -> Value {
    let coeffs = f.coeffs().iter().map(|(k, c)| [k[0] as f64, k[1] as f64, to_f64(c.re), to_f64(c.im)]).collect();
    serde_json::to_value(PolyFile { p: f.angle().p(), q: f.angle().q(), coeffs }).expect("plain data")
}

pub fn poly_from_json<T: Real>(v: &Value) -> Result<QTorusPoly<T>> {
    let pf: PolyFile = serde_json::from_value(v.clone())?;
    let angle = RationalAngle::new(pf.p, pf.q)?;
    let mut terms = Vec::with_capacity(pf.coeffs.len());
    for c in &pf.coeffs {
        if c[0].fract() != 0.0 || c[1].fract() != 0.0 {
            return invalid("frequencies must be integers");
        }
        terms.push(([c[0] as i64, c[1] as i64], cplx::<T>(c[2], c[3])));
    }
    Ok(QTorusPoly::from_coeffs(angle, terms))
}

const GRID_MAGIC: &[u8; 8] = b"NCFGRID1";

/// Header `magic, G: u64, n: u64, domain: u8 (0 torus, 1 box), L: f64`, then
/// the samples row-major as little-endian `(f32 re, f32 im)`.
pub fn write_grid<T: Real>(w: &mut impl Write, f: &OpGrid<T>) -> Result<()> {
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(f.side() as u64).to_le_bytes())?;
    w.write_all(&(f.mat_dim() as u64).to_le_bytes())?;
    let (tag, l) = match f.domain() {
        Domain::Torus => (0u8, 1.0),
        Domain::Box { l } => (1u8, l),
    };
    w.write_all(&[tag])?;
    w.write_all(&l.to_le_bytes())?;
    let mut buf = Vec::with_capacity(f.raw().len() * 8);
    for z in f.raw() {
        buf.extend_from_slice(&(to_f64(z.re) as f32).to_le_bytes());
        buf.extend_from_slice(&(to_f64(z.im) as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_grid<T: Real>(r: &mut impl Read) -> Result<OpGrid<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return invalid("not a grid file");
    }
    let mut u = [0u8; 8];
    r.read_exact(&mut u)?;
    let g = u64::from_le_bytes(u) as usize;
    r.read_exact(&mut u)?;
    let n = u64::from_le_bytes(u) as usize;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    r.read_exact(&mut u)?;
    let l = f64::from_le_bytes(u);
    let domain = match tag[0] {
        0 => Domain::Torus,
        1 => Domain::Box { l },
        t => return invalid(format!("unknown domain tag {t}")),
    };
    let count = g.checked_mul(g).and_then(|v| v.checked_mul(n * n)).ok_or_else(|| LabError::InvalidInput("header overflows".into()))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return invalid("payload length does not match header");
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            cplx::<T>(re as f64, im as f64)
        })
        .collect();
    OpGrid::from_raw(g, n, domain, data)
}

pub fn save_grid<T: Real>(path: &Path, f: &OpGrid<T>) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_grid(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load_grid<T: Real>(path: &Path) -> Result<OpGrid<T>> {
    read_grid(&mut std::io::BufReader::new(fs::File::open(path)?))
}

/// Writes flat records as CSV with a header row.
pub fn write_csv<S: Serialize>(w: impl Write, rows: &[S]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| LabError::Io(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| LabError::Io(e.to_string()))
}

/// Complex number as `[re, im]` for JSON payloads.
pub fn complex_pair(z: Complex<f64>) -> [f64; 2] {
    [z.re, z.im]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn matrix_round_trip() {
        let mut r = rng::seeded(1);
        let m = rng::gaussian_matrix::<f64>(&mut r, 3);
        let back: MatElem<f64> = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(back, m);
        let list = matrices_from_json::<f64>(&Value::Array(vec![matrix_to_json(&m), matrix_to_json(&m)])).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(matrices_from_json::<f64>(&matrix_to_json(&m)).unwrap().len(), 1);
        assert!(matrix_from_json::<f64>(&serde_json::json!([[[1.0, 0.0], [2.0, 0.0]]])).is_err());
    }

    #[test]
    fn poly_round_trip() {
        let mut r = rng::seeded(2);
        let a = RationalAngle::new(1, 5).unwrap();
        let f = crate::qtorus::random_poly::<f64>(a, 3, &mut r);
        let v = poly_to_json(&f);
        assert_eq!(v["q"], 5);
        let back: QTorusPoly<f64> = poly_from_json(&v).unwrap();
        assert_eq!(back, f);
        assert!(poly_from_json::<f64>(&serde_json::json!({"p": 1, "q": 0, "coeffs": []})).is_err());
    }

    #[test]
    fn grid_round_trip() {
        let mut r = rng::seeded(3);
        let f = OpGrid::<f64>::from_fn(8, 2, Domain::Box { l: 4.0 }, |_| rng::gaussian_matrix(&mut r, 2)).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 8 + 1 + 8 + 8 * 8 * 4 * 8);
        let back: OpGrid<f64> = read_grid(&mut buf.as_slice()).unwrap();
        assert_eq!(back.domain(), f.domain());
        assert!(back.max_abs_diff(&f) < 1e-6);
        buf.truncate(buf.len() - 1);
        assert!(read_grid::<f64>(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_rows() {
        #[derive(Serialize)]
        struct Row {
            n: usize,
            v: f64,
        }
        let s = csv_string(&[Row { n: 8, v: 1.5 }, Row { n: 16, v: 2.0 }]).unwrap();
        assert_eq!(s, "n,v\n8,1.5\n16,2.0\n");
    }
}
