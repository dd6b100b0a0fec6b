//! Gauss rules on segments, triangles and (by centroid fans) polygons.

use crate::error::{Error, Result};
use crate::mesh::{signed_area, Point};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Barycentric coordinates and weights summing to one, exact for total
/// degree `order` on any triangle.
pub fn triangle_rule(order: usize) -> Vec<([f64; 3], f64)> {
    let perm3 = |a: f64, b: f64, w: f64| vec![([a, b, b], w), ([b, a, b], w), ([b, b, a], w)];
    match order {
        0 | 1 => vec![([1.0 / 3.0; 3], 1.0)],
        2 => perm3(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
        3 | 4 => {
            let mut r = perm3(0.108103018168070, 0.445948490915965, 0.223381589678011);
            r.extend(perm3(0.816847572980459, 0.091576213509771, 0.109951743655322));
            r
        }
        5 => {
            let mut r = vec![([1.0 / 3.0; 3], 0.225)];
            r.extend(perm3(0.059715871789770, 0.470142064105115, 0.132394152788506));
            r.extend(perm3(0.797426985353087, 0.101286507323456, 0.125939180544827));
            r
        }
        _ => {
            // collapsed tensor Gauss rule
            let n = (order + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut r = Vec::with_capacity(n * n);
            for i in 0..n {
                let u = 0.5 * (x[i] + 1.0);
                for j in 0..n {
                    let v = 0.5 * (x[j] + 1.0);
                    let l1 = u;
                    let l2 = v * (1.0 - u);
                    let weight = 2.0 * (0.25 * w[i] * w[j]) * (1.0 - u);
                    r.push(([1.0 - l1 - l2, l1, l2], weight));
                }
            }
            r
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Quadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Rule on the triangle `(a, b, c)`; weights sum to its (unsigned) area.
pub fn triangle_quadrature(tri: [Point; 3], order: usize) -> Quadrature {
    let area = signed_area(&tri).abs();
    let mut q = Quadrature::default();
    for (l, w) in triangle_rule(order) {
        q.points.push([
            l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
            l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
        ]);
        q.weights.push(w * area);
    }
    q
}

/// Centroid-fan rule on a counterclockwise polygon. The fan must consist
/// of positively oriented triangles (star-shaped with respect to the
/// vertex average).
pub fn polygon_quadrature(poly: &[Point], order: usize) -> Result<Quadrature> {
    if order == 0 {
        return Err(Error::Quadrature("order must be >= 1".into()));
    }
    if !crate::mesh::is_simple(poly) {
        return Err(Error::Quadrature("polygon is not simple".into()));
    }
    let n = poly.len();
    let c = [
        poly.iter().map(|p| p[0]).sum::<f64>() / n as f64,
        poly.iter().map(|p| p[1]).sum::<f64>() / n as f64,
    ];
    let mut q = Quadrature::default();
    for i in 0..n {
        let tri = [c, poly[i], poly[(i + 1) % n]];
        if !(signed_area(&tri) > 0.0) {
            return Err(Error::Quadrature(format!(
                "fan triangle {i} is not positively oriented; polygon is not star-shaped about its vertex average"
            )));
        }
        let t = triangle_quadrature(tri, order);
        q.points.extend(t.points);
        q.weights.extend(t.weights);
    }
    Ok(q)
}

/// Gauss points on the segment `a -> b`, weights summing to its length.
pub fn segment_quadrature(a: Point, b: Point, n: usize) -> Quadrature {
    let (x, w) = gauss_legendre(n);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let mut q = Quadrature::default();
    for i in 0..n {
        let t = 0.5 * (x[i] + 1.0);
        q.points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        q.weights.push(0.5 * w[i] * len);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Integral of `l1^a l2^b l0^c` over a triangle of area `|T|`.
    fn barycentric_moment(area: f64, a: u32, b: u32, c: u32) -> f64 {
        2.0 * area * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact() {
        for order in 1..=12 {
            let rule = triangle_rule(order);
            assert!(rule.iter().all(|r| r.1 > 0.0));
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let c = order as u32 - a - b;
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32) * l[0].powi(c as i32))
                        .sum();
                    let exact = barycentric_moment(1.0, a, b, c);
                    assert!((q - exact).abs() < 1e-12 * exact.max(1e-3), "order {order} ({a},{b},{c}): {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn unit_square_moments() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let q = polygon_quadrature(&sq, 1).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let q = polygon_quadrature(&sq, 5).unwrap();
        let v = q.integrate(|p| p[0] * p[0] * p[1].powi(3));
        assert!((v - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn non_star_polygon_is_rejected() {
        // thin U shape whose vertex average lies outside the polygon
        let u = [
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [2.9, 3.0],
            [2.9, 0.1],
            [0.1, 0.1],
            [0.1, 3.0],
            [0.0, 3.0],
        ];
        assert!(polygon_quadrature(&u, 2).is_err());
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(polygon_quadrature(&bow, 2).is_err());
    }
}
