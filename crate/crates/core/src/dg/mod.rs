//! Symmetric interior-penalty discontinuous Galerkin discretisation of
//! `-div(Sigma grad u)` on polygonal meshes.

pub mod basis;
pub mod quadrature;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh::{dim_p, Point, PolyMesh};
pub use basis::ElementBasis;
pub use quadrature::{polygon_quadrature, segment_quadrature, Quadrature};

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub fn isotropic(s: f64) -> Self {
        Self { xx: s, xy: 0.0, yy: s }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        [m - r, m + r]
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        let [a, b] = self.eigenvalues();
        a.abs().max(b.abs())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            xx: s * self.xx,
            xy: s * self.xy,
            yy: s * self.yy,
        }
    }

    pub fn is_valid(&self) -> bool {
        let [lo, _] = self.eigenvalues();
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite() && lo >= -1e-14 * self.norm() && self.xx + self.yy > 0.0
    }
}

/// Per-element conductivity tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub tensors: Vec<SymTensor2>,
}

impl ConductivityField {
    pub fn uniform(n: usize, s: f64) -> Self {
        Self {
            tensors: vec![SymTensor2::isotropic(s); n],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            tensors: self.tensors.iter().map(|t| t.scaled(s)).collect(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.tensors.len() != n {
            return Err(Error::Config(format!(
                "conductivity field has {} tensors for {n} elements",
                self.tensors.len()
            )));
        }
        if let Some(k) = self.tensors.iter().position(|t| !t.is_valid()) {
            return Err(Error::Config(format!(
                "conductivity of element {k} is not symmetric positive semi-definite: {:?}",
                self.tensors[k]
            )));
        }
        Ok(())
    }
}

/// Interior-face penalty `eta0 {|Sigma|}_A {p^2}_A / {h}_H`.
pub fn penalty_interior(eta0: f64, p: [usize; 2], h: [f64; 2], sigma_norm: [f64; 2]) -> f64 {
    let s = 0.5 * (sigma_norm[0] + sigma_norm[1]);
    let p2 = 0.5 * ((p[0] * p[0]) as f64 + (p[1] * p[1]) as f64);
    let hh = 2.0 * h[0] * h[1] / (h[0] + h[1]);
    eta0 * s * p2 / hh
}

/// Boundary-face penalty `eta0 |Sigma_K| p_K^2 / h_K` (Dirichlet test harness).
pub fn penalty_boundary(eta0: f64, p: usize, h: f64, sigma_norm: f64) -> f64 {
    eta0 * sigma_norm * (p * p) as f64 / h
}

/// Geometry and neighbour data of one face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceData {
    pub length: f64,
    pub normal: Point,
    pub elements: (usize, Option<usize>),
    pub degrees: (usize, Option<usize>),
    pub diameters: (f64, Option<f64>),
    pub sigma_norms: (f64, Option<f64>),
}

pub fn face_geometry(mesh: &PolyMesh, conductivity: &ConductivityField) -> Vec<FaceData> {
    mesh.faces
        .iter()
        .map(|f| FaceData {
            length: f.length,
            normal: f.normal,
            elements: (f.plus, f.minus),
            degrees: (mesh.degree[f.plus], f.minus.map(|m| mesh.degree[m])),
            diameters: (mesh.diameter[f.plus], f.minus.map(|m| mesh.diameter[m])),
            sigma_norms: (
                conductivity.tensors[f.plus].norm(),
                f.minus.map(|m| conductivity.tensors[m].norm()),
            ),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Homogeneous Neumann (the tissue model).
    #[default]
    Neumann,
    /// Weakly imposed Dirichlet data (convergence harness).
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyOptions {
    pub eta0: f64,
    pub orthonormal: bool,
    /// Lower bound on the volume quadrature order (raised to `2 max p`).
    pub min_quad_order: usize,
    pub boundary: Boundary,
    /// Run the coercivity probe after assembly.
    pub stability_probe: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            eta0: 10.0,
            orthonormal: true,
            min_quad_order: 2,
            boundary: Boundary::Neumann,
            stability_probe: true,
        }
    }
}

/// Assembled operators with the per-element caches used by the solver.
#[derive(Debug, Clone)]
pub struct DgSystem {
    pub degrees: Vec<usize>,
    /// Element `k` owns global DoFs `offsets[k]..offsets[k+1]`.
    pub offsets: Vec<usize>,
    pub bases: Vec<ElementBasis>,
    pub quad: Vec<Quadrature>,
    /// Quadrature node `q` of element `k` is global node `node_offsets[k] + q`.
    pub node_offsets: Vec<usize>,
    /// Basis values at volume nodes, `[q * n_k + i]`.
    pub phi: Vec<Vec<f64>>,
    pub mass: CsrMatrix<f64>,
    pub mass_blocks: Vec<DMatrix<f64>>,
    pub stiffness: CsrMatrix<f64>,
    /// Penalty per mesh face.
    pub penalty: Vec<f64>,
    pub options: AssemblyOptions,
    pub quad_order: usize,
}

struct ElementCache {
    basis: ElementBasis,
    quad: Quadrature,
    phi: Vec<f64>,
    grad: Vec<[f64; 2]>,
}

fn element_cache(mesh: &PolyMesh, k: usize, p: usize, order: usize, orthonormal: bool) -> Result<ElementCache> {
    let poly = mesh.polygon(k);
    let quad = polygon_quadrature(&poly, order).map_err(|e| match e {
        Error::Quadrature(m) => Error::Quadrature(format!("element {k}: {m}")),
        other => other,
    })?;
    let basis = if orthonormal {
        ElementBasis::orthonormal(&poly, p, &quad)?
    } else {
        ElementBasis::monomial(&poly, p)?
    };
    let n = basis.len();
    let mut phi = vec![0.0; quad.len() * n];
    let mut grad = vec![[0.0; 2]; quad.len() * n];
    for (q, &x) in quad.points.iter().enumerate() {
        basis.eval(x, &mut phi[q * n..(q + 1) * n], &mut grad[q * n..(q + 1) * n]);
    }
    Ok(ElementCache { basis, quad, phi, grad })
}

impl DgSystem {
    pub fn ndofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn nnodes(&self) -> usize {
        *self.node_offsets.last().unwrap()
    }

    pub fn num_elements(&self) -> usize {
        self.degrees.len()
    }

    pub fn local_dim(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    /// `sum_q w_q v_q phi_i(x_q)` from values at the volume nodes.
    pub fn load_from_nodes(&self, values: &[f64], out: &mut [f64]) {
        for k in 0..self.num_elements() {
            let n = self.local_dim(k);
            let o = self.offsets[k];
            let phi = &self.phi[k];
            out[o..o + n].iter_mut().for_each(|v| *v = 0.0);
            for (q, &w) in self.quad[k].weights.iter().enumerate() {
                let wv = w * values[self.node_offsets[k] + q];
                for i in 0..n {
                    out[o + i] += wv * phi[q * n + i];
                }
            }
        }
    }

    /// Discrete function values at the volume nodes.
    pub fn eval_at_nodes(&self, coeffs: &[f64], out: &mut [f64]) {
        for k in 0..self.num_elements() {
            let n = self.local_dim(k);
            let o = self.offsets[k];
            let phi = &self.phi[k];
            for q in 0..self.quad[k].len() {
                let mut s = 0.0;
                for i in 0..n {
                    s += coeffs[o + i] * phi[q * n + i];
                }
                out[self.node_offsets[k] + q] = s;
            }
        }
    }

    /// Apply `M^{-1}` to a load vector.
    pub fn solve_mass(&self, load: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; load.len()];
        for k in 0..self.num_elements() {
            let (lo, hi) = (self.offsets[k], self.offsets[k + 1]);
            if self.options.orthonormal {
                out[lo..hi].copy_from_slice(&load[lo..hi]);
            } else {
                let b = DVector::from_column_slice(&load[lo..hi]);
                let x = self.mass_blocks[k]
                    .clone()
                    .cholesky()
                    .expect("element mass block is SPD")
                    .solve(&b);
                out[lo..hi].copy_from_slice(x.as_slice());
            }
        }
        out
    }

    /// L2 projection of a pointwise field `f(element, x)`.
    pub fn project(&self, f: impl Fn(usize, Point) -> f64) -> Vec<f64> {
        let mut load = vec![0.0; self.ndofs()];
        for k in 0..self.num_elements() {
            let n = self.local_dim(k);
            let o = self.offsets[k];
            for (q, (&x, &w)) in self.quad[k].points.iter().zip(&self.quad[k].weights).enumerate() {
                let v = w * f(k, x);
                for i in 0..n {
                    load[o + i] += v * self.phi[k][q * n + i];
                }
            }
        }
        self.solve_mass(&load)
    }

    /// Value of the discrete function at `x` using element `k`'s polynomial.
    pub fn evaluate(&self, coeffs: &[f64], k: usize, x: Point) -> f64 {
        let v = self.bases[k].values(x);
        let o = self.offsets[k];
        v.iter().enumerate().map(|(i, vi)| vi * coeffs[o + i]).sum()
    }

    /// Element averages of the discrete function.
    pub fn cell_averages(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut nodal = vec![0.0; self.nnodes()];
        self.eval_at_nodes(coeffs, &mut nodal);
        self.cell_averages_of_nodes(&nodal)
    }

    /// Element averages of node-collocated values.
    pub fn cell_averages_of_nodes(&self, nodal: &[f64]) -> Vec<f64> {
        (0..self.num_elements())
            .map(|k| {
                let w = &self.quad[k].weights;
                let o = self.node_offsets[k];
                let area: f64 = w.iter().sum();
                w.iter().enumerate().map(|(q, wq)| wq * nodal[o + q]).sum::<f64>() / area
            })
            .collect()
    }

    /// `integral of u = 1^T M U` computed by quadrature.
    pub fn integral(&self, coeffs: &[f64]) -> f64 {
        let mut nodal = vec![0.0; self.nnodes()];
        self.eval_at_nodes(coeffs, &mut nodal);
        (0..self.num_elements())
            .map(|k| {
                let o = self.node_offsets[k];
                self.quad[k].weights.iter().enumerate().map(|(q, w)| w * nodal[o + q]).sum::<f64>()
            })
            .sum()
    }

    /// `U^T A U`
    pub fn energy(&self, coeffs: &[f64]) -> f64 {
        let mut au = vec![0.0; coeffs.len()];
        linalg::spmv(&self.stiffness, coeffs, &mut au);
        linalg::dot(coeffs, &au)
    }

    /// Write `M` and `A` as coordinate files `<stem>_mass.mtx`, `<stem>_stiffness.mtx`.
    pub fn dump(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        let m = dir.join(format!("{stem}_mass.mtx"));
        let a = dir.join(format!("{stem}_stiffness.mtx"));
        linalg::write_coordinate(&self.mass, &m)?;
        linalg::write_coordinate(&self.stiffness, &a)?;
        Ok(vec![m, a])
    }
}

/// Assemble mass and SIPG stiffness matrices for the mesh's degree map.
pub fn assemble(mesh: &PolyMesh, conductivity: &ConductivityField, options: AssemblyOptions) -> Result<DgSystem> {
    if !(options.eta0 > 0.0) {
        return Err(Error::Config(format!("eta0 must be > 0, got {}", options.eta0)));
    }
    conductivity.validate(mesh.num_elements())?;
    let nel = mesh.num_elements();
    let degrees = mesh.degree.clone();
    if degrees.iter().any(|&p| p == 0) {
        return Err(Error::Config("polynomial degrees must be >= 1".into()));
    }
    let pmax = *degrees.iter().max().unwrap();
    let order = options.min_quad_order.max(2 * pmax);

    let caches: Vec<ElementCache> = (0..nel)
        .into_par_iter()
        .map(|k| element_cache(mesh, k, degrees[k], order, options.orthonormal))
        .collect::<Result<_>>()?;

    let mut offsets = Vec::with_capacity(nel + 1);
    let mut node_offsets = Vec::with_capacity(nel + 1);
    offsets.push(0);
    node_offsets.push(0);
    for c in &caches {
        offsets.push(offsets.last().unwrap() + c.basis.len());
        node_offsets.push(node_offsets.last().unwrap() + c.quad.len());
    }
    let ndofs = *offsets.last().unwrap();

    // volume blocks
    let volume: Vec<(DMatrix<f64>, DMatrix<f64>)> = caches
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let n = c.basis.len();
            let s = conductivity.tensors[k];
            let mut m = DMatrix::zeros(n, n);
            let mut a = DMatrix::zeros(n, n);
            for (q, &w) in c.quad.weights.iter().enumerate() {
                let phi = &c.phi[q * n..(q + 1) * n];
                let grad = &c.grad[q * n..(q + 1) * n];
                for j in 0..n {
                    let sg = s.apply(grad[j]);
                    for i in 0..n {
                        m[(i, j)] += w * phi[i] * phi[j];
                        a[(i, j)] += w * (sg[0] * grad[i][0] + sg[1] * grad[i][1]);
                    }
                }
            }
            (m, a)
        })
        .collect();

    // faces
    let penalty: Vec<f64> = mesh
        .faces
        .iter()
        .map(|f| match f.minus {
            Some(m) => penalty_interior(
                options.eta0,
                [degrees[f.plus], degrees[m]],
                [mesh.diameter[f.plus], mesh.diameter[m]],
                [conductivity.tensors[f.plus].norm(), conductivity.tensors[m].norm()],
            ),
            None => penalty_boundary(
                options.eta0,
                degrees[f.plus],
                mesh.diameter[f.plus],
                conductivity.tensors[f.plus].norm(),
            ),
        })
        .collect();

    let face_triplets: Vec<Vec<(usize, usize, f64)>> = mesh
        .faces
        .par_iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut out = Vec::new();
            let eta = penalty[fi];
            let nrm = f.normal;
            let a = mesh.vertices[f.vertices[0]];
            let b = mesh.vertices[f.vertices[1]];
            match f.minus {
                None if options.boundary == Boundary::Neumann => {}
                None => {
                    let k = f.plus;
                    let basis = &caches[k].basis;
                    let n = basis.len();
                    let s = conductivity.tensors[k];
                    let fq = segment_quadrature(a, b, degrees[k] + 1);
                    let mut v = vec![0.0; n];
                    let mut g = vec![[0.0; 2]; n];
                    let mut blk = DMatrix::zeros(n, n);
                    for (&x, &w) in fq.points.iter().zip(&fq.weights) {
                        basis.eval(x, &mut v, &mut g);
                        let flux: Vec<f64> = g
                            .iter()
                            .map(|gi| {
                                let sg = s.apply(*gi);
                                sg[0] * nrm[0] + sg[1] * nrm[1]
                            })
                            .collect();
                        for i in 0..n {
                            for j in 0..n {
                                blk[(i, j)] += w * (-flux[j] * v[i] - v[j] * flux[i] + eta * v[i] * v[j]);
                            }
                        }
                    }
                    let o = offsets[k];
                    for i in 0..n {
                        for j in 0..n {
                            out.push((o + i, o + j, blk[(i, j)]));
                        }
                    }
                }
                Some(m) => {
                    let sides = [f.plus, m];
                    let sign = [1.0, -1.0];
                    let npts = (degrees[f.plus] + degrees[m]) / 2 + 1;
                    let fq = segment_quadrature(a, b, npts);
                    let dims = [caches[f.plus].basis.len(), caches[m].basis.len()];
                    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(4);
                    for s in 0..2 {
                        for t in 0..2 {
                            blocks.push(DMatrix::zeros(dims[s], dims[t]));
                        }
                    }
                    let mut vals = [vec![0.0; dims[0]], vec![0.0; dims[1]]];
                    let mut grads = [vec![[0.0; 2]; dims[0]], vec![[0.0; 2]; dims[1]]];
                    let mut flux = [vec![0.0; dims[0]], vec![0.0; dims[1]]];
                    for (&x, &w) in fq.points.iter().zip(&fq.weights) {
                        for s in 0..2 {
                            caches[sides[s]].basis.eval(x, &mut vals[s], &mut grads[s]);
                            let sig = conductivity.tensors[sides[s]];
                            for i in 0..dims[s] {
                                let sg = sig.apply(grads[s][i]);
                                flux[s][i] = 0.5 * (sg[0] * nrm[0] + sg[1] * nrm[1]);
                            }
                        }
                        for s in 0..2 {
                            for t in 0..2 {
                                let blk = &mut blocks[2 * s + t];
                                for i in 0..dims[s] {
                                    let vi = sign[s] * vals[s][i];
                                    for j in 0..dims[t] {
                                        let uj = sign[t] * vals[t][j];
                                        blk[(i, j)] += w * (-flux[t][j] * vi - uj * flux[s][i] + eta * vi * uj);
                                    }
                                }
                            }
                        }
                    }
                    for s in 0..2 {
                        for t in 0..2 {
                            let (os, ot) = (offsets[sides[s]], offsets[sides[t]]);
                            let blk = &blocks[2 * s + t];
                            for i in 0..dims[s] {
                                for j in 0..dims[t] {
                                    out.push((os + i, ot + j, blk[(i, j)]));
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut mcoo = CooMatrix::new(ndofs, ndofs);
    let mut acoo = CooMatrix::new(ndofs, ndofs);
    for (k, (m, a)) in volume.iter().enumerate() {
        let o = offsets[k];
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                mcoo.push(o + i, o + j, m[(i, j)]);
                acoo.push(o + i, o + j, a[(i, j)]);
            }
        }
    }
    for list in &face_triplets {
        for &(i, j, v) in list {
            acoo.push(i, j, v);
        }
    }
    let mass = CsrMatrix::from(&mcoo);
    let mut stiffness = CsrMatrix::from(&acoo);
    symmetrize(&mut stiffness);

    let mut bases = Vec::with_capacity(nel);
    let mut quad = Vec::with_capacity(nel);
    let mut phi = Vec::with_capacity(nel);
    for c in caches {
        bases.push(c.basis);
        quad.push(c.quad);
        phi.push(c.phi);
    }
    let sys = DgSystem {
        degrees,
        offsets,
        bases,
        quad,
        node_offsets,
        phi,
        mass,
        mass_blocks: volume.into_iter().map(|(m, _)| m).collect(),
        stiffness,
        penalty,
        options,
        quad_order: order,
    };
    if options.stability_probe {
        let probe = stability_probe(&sys);
        if probe.negative_curvature {
            log::warn!(
                "SIPG stiffness shows negative curvature on the P1 subspace (min Rayleigh quotient {:.3e}); increase eta0 (currently {})",
                probe.min_rayleigh,
                options.eta0
            );
        }
    }
    Ok(sys)
}

/// Average `A` with its transpose to remove round-off asymmetry.
fn symmetrize(a: &mut CsrMatrix<f64>) {
    let t = a.transpose();
    let s = linalg::add_scaled(0.5, a, 0.5, &t);
    *a = s;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub negative_curvature: bool,
    /// Smallest `p^T A p / p^T p` seen along the CG search directions.
    pub min_rayleigh: f64,
}

/// Conjugate-gradient curvature scan of `A` restricted to the element-wise
/// affine functions, started in the range of `A` so the constant nullspace
/// is excluded.
pub fn stability_probe(sys: &DgSystem) -> StabilityReport {
    let idx: Vec<usize> = (0..sys.num_elements())
        .flat_map(|k| (0..3).map(move |i| sys.offsets[k] + i))
        .collect();
    let mut pos = vec![usize::MAX; sys.ndofs()];
    for (r, &i) in idx.iter().enumerate() {
        pos[i] = r;
    }
    let n = idx.len();
    let mut coo = CooMatrix::new(n, n);
    for (i, j, v) in sys.stiffness.triplet_iter() {
        if pos[i] != usize::MAX && pos[j] != usize::MAX {
            coo.push(pos[i], pos[j], *v);
        }
    }
    let a = CsrMatrix::from(&coo);
    let seed: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 12.9898).sin()).collect();
    let mut r = vec![0.0; n];
    linalg::spmv(&a, &seed, &mut r);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = linalg::dot(&r, &r);
    let r0 = rr.sqrt();
    let mut report = StabilityReport {
        negative_curvature: false,
        min_rayleigh: f64::INFINITY,
    };
    for _ in 0..n.min(500) {
        linalg::spmv(&a, &p, &mut ap);
        let pap = linalg::dot(&p, &ap);
        let pp = linalg::dot(&p, &p);
        report.min_rayleigh = report.min_rayleigh.min(pap / pp);
        if pap <= 0.0 {
            report.negative_curvature = true;
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            r[i] -= alpha * ap[i];
        }
        let rr_new = linalg::dot(&r, &r);
        if rr_new.sqrt() < 1e-10 * r0 {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    report
}

/// Smallest eigenvalue of `A` on the `M`-orthogonal complement of the
/// constants (dense; for small diagnostic systems).
pub fn mean_zero_min_eigenvalue(sys: &DgSystem) -> f64 {
    let a = linalg::to_dense(&sys.stiffness);
    let m = linalg::to_dense(&sys.mass);
    let l = m.cholesky().expect("mass matrix is SPD").l();
    let li = l.clone().try_inverse().unwrap();
    let b = &li * a * li.transpose();
    let b = 0.5 * (&b + b.transpose());
    let mut ev: Vec<f64> = b.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev[1]
}

/// Outcome of a degree update.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub degrees: Vec<usize>,
    /// Whether any degree changed (the system must then be reassembled).
    pub reassemble: bool,
    pub indicator: Vec<f64>,
}

/// Per-element `sum_F int_F [[u]]^2` over interior faces.
pub fn jump_indicator(sys: &DgSystem, mesh: &PolyMesh, coeffs: &[f64]) -> Vec<f64> {
    let mut ind = vec![0.0; sys.num_elements()];
    for f in mesh.interior_faces() {
        let m = f.minus.unwrap();
        let npts = sys.degrees[f.plus].max(sys.degrees[m]) + 1;
        let fq = segment_quadrature(mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]], npts);
        let j: f64 = fq
            .points
            .iter()
            .zip(&fq.weights)
            .map(|(&x, &w)| {
                let d = sys.evaluate(coeffs, f.plus, x) - sys.evaluate(coeffs, m, x);
                w * d * d
            })
            .sum();
        ind[f.plus] += j;
        ind[m] += j;
    }
    ind
}

/// Raise `p_K` where the jump indicator exceeds `threshold * median` and
/// lower it where the indicator is below `median / threshold`.
pub fn refine_degrees(
    sys: &DgSystem,
    mesh: &PolyMesh,
    coeffs: &[f64],
    threshold: f64,
    p_min: usize,
    p_max: usize,
) -> Refinement {
    let mut indicator = jump_indicator(sys, mesh, coeffs);
    // round-off jumps of globally smooth fields are not refined
    let mut mu = vec![0.0; coeffs.len()];
    linalg::spmv(&sys.mass, coeffs, &mut mu);
    let floor = 1e-14 * linalg::dot(coeffs, &mu);
    indicator.iter_mut().filter(|e| **e <= floor).for_each(|e| *e = 0.0);
    let mut sorted = indicator.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let mut degrees = sys.degrees.clone();
    for k in 0..degrees.len() {
        let e = indicator[k];
        if e > threshold * median && e > 0.0 && degrees[k] < p_max {
            degrees[k] += 1;
        } else if e < median / threshold && degrees[k] > p_min {
            degrees[k] -= 1;
        }
    }
    let reassemble = degrees != sys.degrees;
    Refinement {
        degrees,
        reassemble,
        indicator,
    }
}

/// Coefficients of `coeffs` (on `from`) expressed on `to`, which must share
/// the mesh and use orthonormal bases: truncation or zero padding per element.
pub fn transfer(from: &DgSystem, to: &DgSystem, coeffs: &[f64]) -> Vec<f64> {
    assert!(from.options.orthonormal && to.options.orthonormal);
    let mut out = vec![0.0; to.ndofs()];
    for k in 0..to.num_elements() {
        let n = from.local_dim(k).min(to.local_dim(k));
        out[to.offsets[k]..to.offsets[k] + n].copy_from_slice(&coeffs[from.offsets[k]..from.offsets[k] + n]);
    }
    out
}

/// Right-hand side `(f, v) + sum_{F boundary} (eta g v - g Sigma grad v . n)`
/// for the weakly imposed Dirichlet problem.
pub fn dirichlet_rhs(
    sys: &DgSystem,
    mesh: &PolyMesh,
    conductivity: &ConductivityField,
    f: impl Fn(Point) -> f64,
    g: impl Fn(Point) -> f64,
) -> Vec<f64> {
    let mut b = sys.project(|_, x| f(x));
    // project returns M^{-1} load; undo for the load itself
    let mut load = vec![0.0; b.len()];
    linalg::spmv(&sys.mass, &b, &mut load);
    b = load;
    for (fi, face) in mesh.faces.iter().enumerate().filter(|(_, f)| !f.is_interior()) {
        let k = face.plus;
        let basis = &sys.bases[k];
        let n = basis.len();
        let s = conductivity.tensors[k];
        let fq = segment_quadrature(
            mesh.vertices[face.vertices[0]],
            mesh.vertices[face.vertices[1]],
            sys.degrees[k] + 3,
        );
        let mut v = vec![0.0; n];
        let mut gr = vec![[0.0; 2]; n];
        for (&x, &w) in fq.points.iter().zip(&fq.weights) {
            basis.eval(x, &mut v, &mut gr);
            let gx = g(x);
            for i in 0..n {
                let sg = s.apply(gr[i]);
                let flux = sg[0] * face.normal[0] + sg[1] * face.normal[1];
                b[sys.offsets[k] + i] += w * (sys.penalty[fi] * gx * v[i] - gx * flux);
            }
        }
    }
    b
}

/// Solve `A U = b` with block-Jacobi PCG.
pub fn solve_stiffness(sys: &DgSystem, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let pre = linalg::BlockJacobi::new(&sys.stiffness, &sys.offsets)?;
    let mut x = vec![0.0; b.len()];
    linalg::pcg(&sys.stiffness, b, &mut x, &pre, tol, 20 * b.len() + 100)?;
    Ok(x)
}

/// L2 and broken-H1 seminorm errors against `exact` and its gradient,
/// using a quadrature of order `2 p_K + 4`.
pub fn errors(
    sys: &DgSystem,
    mesh: &PolyMesh,
    coeffs: &[f64],
    exact: impl Fn(Point) -> f64,
    exact_grad: impl Fn(Point) -> [f64; 2],
) -> Result<(f64, f64)> {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for k in 0..sys.num_elements() {
        let q = polygon_quadrature(&mesh.polygon(k), 2 * sys.degrees[k] + 4)?;
        let basis = &sys.bases[k];
        let n = basis.len();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        let o = sys.offsets[k];
        for (&x, &w) in q.points.iter().zip(&q.weights) {
            basis.eval(x, &mut v, &mut g);
            let mut uh = 0.0;
            let mut gh = [0.0; 2];
            for i in 0..n {
                uh += coeffs[o + i] * v[i];
                gh[0] += coeffs[o + i] * g[i][0];
                gh[1] += coeffs[o + i] * g[i][1];
            }
            let ge = exact_grad(x);
            l2 += w * (uh - exact(x)).powi(2);
            h1 += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Total DoFs for a degree map.
pub fn dof_count(degrees: &[usize]) -> usize {
    degrees.iter().map(|&p| dim_p(p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assign_degrees, generate_structured, DegreeRule};

    #[test]
    fn penalty_examples() {
        assert!((penalty_interior(1.0, [2, 2], [0.1, 0.1], [1.0, 1.0]) - 40.0).abs() < 1e-12);
        assert!((penalty_interior(1.0, [1, 3], [0.1, 0.1], [1.0, 1.0]) - 50.0).abs() < 1e-12);
        assert!((penalty_interior(7.0, [1, 3], [0.1, 0.1], [1.0, 1.0]) - 350.0).abs() < 1e-10);
    }

    #[test]
    fn tensor_norm_and_eigenvalues() {
        let t = SymTensor2 { xx: 2.0, xy: 1.0, yy: 2.0 };
        assert_eq!(t.eigenvalues(), [1.0, 3.0]);
        assert_eq!(t.norm(), 3.0);
        assert!(!SymTensor2 { xx: 1.0, xy: 2.0, yy: 1.0 }.is_valid());
    }

    #[test]
    fn single_element_has_volume_block_only() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 1, 1, 0.0).unwrap();
        let m = assign_degrees(&m, &DegreeRule::Uniform(2)).unwrap();
        let c = ConductivityField::uniform(1, 1.0);
        let sys = assemble(&m, &c, AssemblyOptions::default()).unwrap();
        let one = sys.project(|_, _| 1.0);
        let mut a1 = vec![0.0; one.len()];
        linalg::spmv(&sys.stiffness, &one, &mut a1);
        assert!(a1.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 3, 3, 0.2).unwrap();
        let m = assign_degrees(&m, &DegreeRule::Uniform(2)).unwrap();
        let c = ConductivityField::uniform(m.num_elements(), 1.0);
        let sys = assemble(&m, &c, AssemblyOptions::default()).unwrap();
        let f = |x: Point| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1] - x[1] * x[1];
        let u = sys.project(|_, x| f(x));
        for k in 0..m.num_elements() {
            let x = m.centroid[k];
            assert!((sys.evaluate(&u, k, x) - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_rules() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 8, 8, 0.0).unwrap();
        let c = ConductivityField::uniform(m.num_elements(), 1.0);
        let sys = assemble(&m, &c, AssemblyOptions::default()).unwrap();
        let constant = sys.project(|_, _| 3.0);
        let r = refine_degrees(&sys, &m, &constant, 2.0, 1, 3);
        assert!(!r.reassemble);
        let step = sys.project(|k, _| if m.centroid[k][0] < 0.5 { 0.0 } else { 1.0 });
        let r = refine_degrees(&sys, &m, &step, 2.0, 1, 3);
        for k in 0..m.num_elements() {
            let near = (m.centroid[k][0] - 0.5).abs() < 0.1;
            assert_eq!(r.degrees[k], if near { 2 } else { 1 }, "element {k}");
        }
        let r = refine_degrees(&sys, &m, &step, f64::INFINITY, 1, 3);
        assert!(!r.reassemble);
    }
}
