//! Sparse helpers: products, block-Jacobi preconditioned CG, coordinate dumps.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};

/// `y = A x`
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let offs = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in offs[i]..offs[i + 1] {
            s += vals[k] * x[cols[k]];
        }
        *yi = s;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `alpha A + beta B` for matrices with compatible shapes.
pub fn add_scaled(alpha: f64, a: &CsrMatrix<f64>, beta: f64, b: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = nalgebra_sparse::CooMatrix::new(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        coo.push(i, j, alpha * v);
    }
    for (i, j, v) in b.triplet_iter() {
        coo.push(i, j, beta * v);
    }
    CsrMatrix::from(&coo)
}

/// Dense copy, for small diagnostic problems.
pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

/// Inverses of the diagonal blocks `[offsets[k], offsets[k+1])`.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    offsets: Vec<usize>,
    inverses: Vec<DMatrix<f64>>,
}

impl BlockJacobi {
    pub fn new(a: &CsrMatrix<f64>, offsets: &[usize]) -> Result<Self> {
        let mut inverses = Vec::with_capacity(offsets.len() - 1);
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n = hi - lo;
            let mut block = DMatrix::zeros(n, n);
            for i in lo..hi {
                let row = a.row(i);
                for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                    if j >= lo && j < hi {
                        block[(i - lo, j - lo)] = v;
                    }
                }
            }
            let inv = block
                .clone()
                .cholesky()
                .map(|c| c.inverse())
                .or_else(|| block.try_inverse())
                .ok_or_else(|| Error::LinearSolver {
                    iterations: 0,
                    residual: f64::NAN,
                })?;
            inverses.push(inv);
        }
        Ok(Self {
            offsets: offsets.to_vec(),
            inverses,
        })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (k, inv) in self.inverses.iter().enumerate() {
            let lo = self.offsets[k];
            let n = inv.nrows();
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += inv[(i, j)] * r[lo + j];
                }
                z[lo + i] = s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for SPD `a`, starting from `x`.
/// Converged when `|r| <= tol |b|`.
pub fn pcg(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x: &mut [f64],
    precond: &BlockJacobi,
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    spmv(a, x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    if rel <= tol {
        return Ok(CgReport {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        spmv(a, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if !rel.is_finite() {
            break;
        }
        if rel <= tol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: rel,
            });
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: max_iter,
        residual: rel,
    })
}

/// Matrix Market coordinate file (1-based indices).
pub fn write_coordinate(a: &CsrMatrix<f64>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz()).map_err(io)?;
    for (i, j, v) in a.triplet_iter() {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_coordinate(path: &Path) -> Result<CsrMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, m: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: m.to_string(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('%') && !l.trim().is_empty());
    let (ln, hdr) = lines.next().ok_or_else(|| err(1, "missing size line"))?;
    let dims: Vec<usize> = hdr
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(ln + 1, "bad size line")))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(err(ln + 1, "size line needs rows cols nnz"));
    }
    let mut coo = nalgebra_sparse::CooMatrix::new(dims[0], dims[1]);
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(err(ln + 1, "entry needs row col value"));
        }
        let i: usize = t[0].parse().map_err(|_| err(ln + 1, "bad row"))?;
        let j: usize = t[1].parse().map_err(|_| err(ln + 1, "bad column"))?;
        let v: f64 = t[2].parse().map_err(|_| err(ln + 1, "bad value"))?;
        if i == 0 || j == 0 || i > dims[0] || j > dims[1] {
            return Err(err(ln + 1, "index out of range"));
        }
        coo.push(i - 1, j - 1, v);
    }
    Ok(CsrMatrix::from(&coo))
}

/// Smallest and largest eigenvalues of a small symmetric matrix.
pub fn symmetric_eigen_range(a: &DMatrix<f64>) -> (f64, f64) {
    let e = a.clone().symmetric_eigen();
    let lo = e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = e.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, 2.0);
            if i > 0 {
                coo.push(i, i - 1, -1.0);
                coo.push(i - 1, i, -1.0);
            }
        }
        CsrMatrix::from(&coo)
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let a = laplace_1d(50);
        let offsets: Vec<usize> = (0..=25).map(|k| 2 * k).collect();
        let pre = BlockJacobi::new(&a, &offsets).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; 50];
        let rep = pcg(&a, &b, &mut x, &pre, 1e-12, 500).unwrap();
        let mut ax = vec![0.0; 50];
        spmv(&a, &x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err} after {} its", rep.iterations);
    }

    #[test]
    fn pcg_reports_non_convergence() {
        let a = laplace_1d(200);
        let offsets: Vec<usize> = (0..=200).collect();
        let pre = BlockJacobi::new(&a, &offsets).unwrap();
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        match pcg(&a, &b, &mut x, &pre, 1e-14, 3) {
            Err(Error::LinearSolver { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coordinate_round_trip() {
        let a = laplace_1d(6);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        write_coordinate(&a, &p).unwrap();
        let b = read_coordinate(&p).unwrap();
        assert_eq!(to_dense(&a), to_dense(&b));
    }
}
