//! Scaled monomial bases on polygons, optionally orthonormalised.

use nalgebra::DMatrix;

use super::quadrature::Quadrature;
use crate::error::{Error, Result};
use crate::mesh::{dim_p, Point};

/// Exponents `(a, b)` of `xi^a eta^b` ordered by total degree.
pub fn monomial_exponents(p: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(dim_p(p));
    for d in 0..=p {
        for b in 0..=d {
            e.push((d - b, b));
        }
    }
    e
}

/// Basis of `P^p(K)` built from monomials in the bounding-box coordinates
/// `xi = (x - c_x)/h_x`, `eta = (y - c_y)/h_y`. With orthonormalisation the
/// `i`-th function is a combination of the first `i + 1` monomials, so the
/// basis of degree `p` is a prefix of the basis of degree `p + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBasis {
    pub degree: usize,
    pub center: Point,
    pub half: Point,
    exponents: Vec<(usize, usize)>,
    /// Lower-triangular change of basis from monomials, if orthonormalised.
    transform: Option<DMatrix<f64>>,
}

impl ElementBasis {
    pub fn monomial(poly: &[Point], degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("polynomial degree must be >= 1".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in poly {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Ok(Self {
            degree,
            center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
            half: [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])],
            exponents: monomial_exponents(degree),
            transform: None,
        })
    }

    /// Orthonormal in `L^2(K)` with respect to `quad`, which must integrate
    /// degree `2p` exactly.
    pub fn orthonormal(poly: &[Point], degree: usize, quad: &Quadrature) -> Result<Self> {
        let mut b = Self::monomial(poly, degree)?;
        let g = b.gram(quad);
        let chol = g.cholesky().ok_or_else(|| {
            Error::Quadrature("monomial Gram matrix is not positive definite".into())
        })?;
        let l = chol.l();
        let n = b.len();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Quadrature("singular Gram factor".into()))?;
        b.transform = Some(linv);
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.transform.is_some()
    }

    /// Values and gradients of the raw scaled monomials.
    fn monomials(&self, x: Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let xi = (x[0] - self.center[0]) / self.half[0];
        let eta = (x[1] - self.center[1]) / self.half[1];
        let p = self.degree;
        let mut px = vec![1.0; p + 1];
        let mut py = vec![1.0; p + 1];
        for k in 1..=p {
            px[k] = px[k - 1] * xi;
            py[k] = py[k - 1] * eta;
        }
        for (i, &(a, b)) in self.exponents.iter().enumerate() {
            vals[i] = px[a] * py[b];
            let dx = if a > 0 { a as f64 * px[a - 1] * py[b] / self.half[0] } else { 0.0 };
            let dy = if b > 0 { b as f64 * px[a] * py[b - 1] / self.half[1] } else { 0.0 };
            grads[i] = [dx, dy];
        }
    }

    /// Values and gradients of every basis function at `x`.
    pub fn eval(&self, x: Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        match &self.transform {
            None => self.monomials(x, vals, grads),
            Some(t) => {
                let n = self.len();
                let mut mv = vec![0.0; n];
                let mut mg = vec![[0.0; 2]; n];
                self.monomials(x, &mut mv, &mut mg);
                for i in 0..n {
                    let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                    for j in 0..=i {
                        let c = t[(i, j)];
                        v += c * mv[j];
                        gx += c * mg[j][0];
                        gy += c * mg[j][1];
                    }
                    vals[i] = v;
                    grads[i] = [gx, gy];
                }
            }
        }
    }

    pub fn values(&self, x: Point) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let mut g = vec![[0.0; 2]; self.len()];
        self.eval(x, &mut v, &mut g);
        v
    }

    /// Gram matrix of the raw monomials.
    pub fn gram(&self, quad: &Quadrature) -> DMatrix<f64> {
        let raw = Self {
            transform: None,
            ..self.clone()
        };
        raw.mass(quad)
    }

    /// Mass matrix of this basis.
    pub fn mass(&self, quad: &Quadrature) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        for (&x, &w) in quad.points.iter().zip(&quad.weights) {
            self.eval(x, &mut v, &mut g);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        m
    }

    /// Spectral condition number of the raw monomial Gram matrix.
    pub fn gram_condition(&self, quad: &Quadrature) -> f64 {
        let e = self.gram(quad).symmetric_eigen();
        let lo = e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = e.eigenvalues.iter().cloned().fold(0.0, f64::max);
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::super::quadrature::polygon_quadrature;
    use super::*;

    fn pentagon() -> Vec<Point> {
        vec![[0.0, 0.0], [1.2, 0.1], [1.4, 0.9], [0.6, 1.5], [-0.2, 0.8]]
    }

    #[test]
    fn dimensions_and_ordering() {
        assert_eq!(monomial_exponents(1), vec![(0, 0), (1, 0), (0, 1)]);
        assert_eq!(monomial_exponents(3).len(), 10);
    }

    #[test]
    fn orthonormal_mass_is_identity() {
        let poly = pentagon();
        for p in 1..=4 {
            let q = polygon_quadrature(&poly, 2 * p).unwrap();
            let b = ElementBasis::orthonormal(&poly, p, &q).unwrap();
            let m = b.mass(&q);
            let err = (m - DMatrix::identity(b.len(), b.len())).abs().max();
            assert!(err < 1e-11, "p={p}: {err}");
            assert!(b.gram_condition(&q).is_finite());
        }
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let poly = pentagon();
        let q = polygon_quadrature(&poly, 4).unwrap();
        for b in [
            ElementBasis::monomial(&poly, 2).unwrap(),
            ElementBasis::orthonormal(&poly, 2, &q).unwrap(),
        ] {
            let mut v = vec![0.0; 6];
            let mut g = vec![[1.0; 2]; 6];
            for &x in &q.points {
                b.eval(x, &mut v, &mut g);
                assert_eq!(g[0], [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let poly = pentagon();
        let q = polygon_quadrature(&poly, 6).unwrap();
        let b = ElementBasis::orthonormal(&poly, 3, &q).unwrap();
        let x = [0.5, 0.6];
        let h = 1e-6;
        let mut v = vec![0.0; 10];
        let mut g = vec![[0.0; 2]; 10];
        b.eval(x, &mut v, &mut g);
        let vx = b.values([x[0] + h, x[1]]);
        let vxm = b.values([x[0] - h, x[1]]);
        let vy = b.values([x[0], x[1] + h]);
        let vym = b.values([x[0], x[1] - h]);
        for i in 0..10 {
            assert!(((vx[i] - vxm[i]) / (2.0 * h) - g[i][0]).abs() < 1e-6);
            assert!(((vy[i] - vym[i]) / (2.0 * h) - g[i][1]).abs() < 1e-6);
        }
    }

    #[test]
    fn lower_degree_basis_is_prefix() {
        let poly = pentagon();
        let q = polygon_quadrature(&poly, 8).unwrap();
        let b2 = ElementBasis::orthonormal(&poly, 2, &q).unwrap();
        let b4 = ElementBasis::orthonormal(&poly, 4, &q).unwrap();
        let x = [0.3, 0.7];
        let (v2, v4) = (b2.values(x), b4.values(x));
        for i in 0..6 {
            assert!((v2[i] - v4[i]).abs() < 1e-10);
        }
    }
}
