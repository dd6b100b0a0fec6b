//! Monodomain time stepping: Crank-Nicolson diffusion, two-step explicit
//! extrapolation of the ionic current and forward-Euler ionic states held
//! at the element quadrature nodes.
//!
//! Units: cm, ms, mV, uA/cm^2 for membrane currents, uF/cm^2 for `C_m`,
//! 1/cm for `chi_m` and mS/cm for the conductivity used in assembly
//! (inputs are given in S/m and multiplied by 10).

use std::io::Write;
use std::path::Path;

use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dg::{self, AssemblyOptions, ConductivityField, DgSystem};
use crate::error::{Error, Result};
use crate::ionic::{IonicModel, IonicState};
use crate::linalg::{self, BlockJacobi};
use crate::mesh::{self, Point, PolyMesh, RegionAttrs, RegionSpec};
use crate::params::ModelParams;

/// Forward Euler may step a fast gate slightly past 0 or 1 behind a steep
/// front; overshoots up to this size are projected back onto [0, 1], larger
/// ones are treated as divergence.
pub const GATE_SLACK: f64 = 0.05;

/// Conversion from S/m to mS/cm.
pub const S_PER_M_TO_MS_PER_CM: f64 = 10.0;

/// Applied current density `I_ext` (uA/cm^3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stimulus {
    None,
    /// Constant current on a disc during `[start, start + duration)`.
    Disc {
        center: Point,
        radius: f64,
        amplitude: f64,
        start: f64,
        duration: f64,
    },
}

impl Default for Stimulus {
    fn default() -> Self {
        Stimulus::None
    }
}

impl Stimulus {
    pub fn value(&self, t: f64, x: Point) -> f64 {
        match self {
            Stimulus::None => 0.0,
            Stimulus::Disc {
                center,
                radius,
                amplitude,
                start,
                duration,
            } => {
                let inside = (x[0] - center[0]).hypot(x[1] - center[1]) <= *radius;
                if inside && t >= *start && t < start + duration {
                    *amplitude
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Stimulus::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub id: String,
    pub point: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Apply the jump-indicator rule every this many steps.
    pub every: usize,
    pub threshold: f64,
    pub p_min: usize,
    pub p_max: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            every: 200,
            threshold: 4.0,
            p_min: 1,
            p_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Time step (ms).
    pub dt: f64,
    /// Final time (ms).
    pub t_end: f64,
    pub assembly: AssemblyOptions,
    pub stimulus: Stimulus,
    pub probes: Vec<Probe>,
    /// Store a cell-averaged frame every this many steps.
    pub frame_every: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// `false` drops the ionic term (`f = 0`) and freezes the ionic states.
    pub reaction: bool,
    pub refine: Option<RefineConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.025,
            t_end: 200.0,
            assembly: AssemblyOptions::default(),
            stimulus: Stimulus::None,
            probes: Vec::new(),
            frame_every: 8,
            linear_tol: 1e-9,
            linear_max_iter: 500,
            reaction: true,
            refine: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::Config(format!("T ({}) must be >= dt ({})", self.t_end, self.dt)));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::Config(format!(
                "linear solver tolerance must lie in (0, 1), got {}",
                self.linear_tol
            )));
        }
        if self.frame_every == 0 || self.linear_max_iter == 0 {
            return Err(Error::Config("frame_every and linear_max_iter must be >= 1".into()));
        }
        if let Some(r) = &self.refine {
            if r.every == 0 || r.p_min == 0 || r.p_max < r.p_min || !(r.threshold > 1.0) {
                return Err(Error::Config(format!("invalid refinement settings {r:?}")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Initial concentrations shared by every region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialIonic {
    pub ca_i: f64,
    pub k_o: f64,
    pub na_i: f64,
}

impl Default for InitialIonic {
    fn default() -> Self {
        Self {
            ca_i: 0.0,
            k_o: 8.5,
            na_i: 18.0,
        }
    }
}

/// Everything spatial: tagged mesh with degrees, region attributes,
/// conductivity (S/m) and the ionic parameters shared by all regions.
#[derive(Debug, Clone)]
pub struct Tissue {
    pub mesh: PolyMesh,
    pub regions: RegionSpec,
    pub conductivity: ConductivityField,
    pub params: ModelParams,
    pub initial: InitialIonic,
}

impl Tissue {
    /// Attributes of every region name present on the mesh.
    pub fn region_attrs(&self) -> Result<Vec<RegionAttrs>> {
        self.mesh
            .region_names
            .iter()
            .map(|n| {
                self.regions
                    .attrs(n)
                    .ok_or_else(|| Error::Config(format!("region '{n}' has no attributes")))
            })
            .collect()
    }
}

/// Solver state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub t: f64,
    pub step: usize,
    /// DG coefficients of `u`.
    pub u: Vec<f64>,
    /// Ionic states at the volume quadrature nodes.
    pub ionic: Vec<IonicState>,
    /// `u` at the probe points.
    pub probes: Vec<f64>,
}

/// Element averages at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFrame {
    pub t: f64,
    pub u: Vec<f64>,
    pub ca_i: Vec<f64>,
    pub k_o: Vec<f64>,
    pub na_i: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeTrace {
    pub ids: Vec<String>,
    pub t: Vec<f64>,
    /// `values[i][j]`: probe `j` at time `t[i]`.
    pub values: Vec<Vec<f64>>,
}

impl ProbeTrace {
    pub fn series(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "t,probe_id,u").map_err(io)?;
        for (i, t) in self.t.iter().enumerate() {
            for (j, id) in self.ids.iter().enumerate() {
                writeln!(w, "{t:.6},{id},{:.9e}", self.values[i][j]).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub frames: Vec<CellFrame>,
    pub probes: ProbeTrace,
    pub steps: usize,
    pub linear_iterations: usize,
}

struct ProbeLocation {
    element: usize,
    values: Vec<f64>,
}

pub struct Simulation {
    pub tissue: Tissue,
    pub config: SimConfig,
    pub sys: DgSystem,
    models: Vec<IonicModel>,
    node_region: Vec<usize>,
    node_points: Vec<Point>,
    system: CsrMatrix<f64>,
    precond: BlockJacobi,
    probes: Vec<ProbeLocation>,
    frame: FieldFrame,
    /// Ionic forcing `f` at the nodes for the previous step.
    f_prev: Vec<f64>,
    f_cur: Vec<f64>,
    u_nodes: Vec<f64>,
    linear_iterations: usize,
}

impl Simulation {
    pub fn frame(&self) -> &FieldFrame {
        &self.frame
    }

    pub fn mesh(&self) -> &PolyMesh {
        &self.tissue.mesh
    }

    fn chi_c(&self) -> f64 {
        self.tissue.params.model.chi_m * self.tissue.params.model.c_m
    }

    fn build_operators(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let s = linalg::add_scaled(self.chi_c(), &self.sys.mass, 0.5 * dt, &self.sys.stiffness);
        self.precond = BlockJacobi::new(&s, &self.sys.offsets)?;
        self.system = s;
        self.probes = locate_probes(&self.tissue.mesh, &self.sys, &self.config.probes);
        Ok(())
    }

    fn forcing_at_nodes(&mut self) -> Result<()> {
        let u = &self.u_nodes;
        let t = self.frame.t;
        if !self.config.reaction {
            self.f_cur.iter_mut().for_each(|f| *f = 0.0);
            return Ok(());
        }
        let models = &self.models;
        let regions = &self.node_region;
        let ionic = &self.frame.ionic;
        self.f_cur
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(q, f)| -> Result<()> {
                *f = models[regions[q]]
                    .rhs(u[q], &ionic[q])
                    .map_err(|e| Error::Diverged {
                        last_valid_time: t,
                        reason: format!("ionic node {q}: {e}"),
                    })?
                    .forcing;
                Ok(())
            })
    }

    /// One Crank-Nicolson / extrapolation step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let t = self.frame.t;
        let n = self.sys.ndofs();
        let chi = self.tissue.params.model.chi_m;
        let chi_c = self.chi_c();

        self.sys.eval_at_nodes(&self.frame.u, &mut self.u_nodes);
        if let Some(q) = self.u_nodes.iter().position(|u| !u.is_finite() || u.abs() >= crate::ode::MAX_ABS_POTENTIAL) {
            return Err(Error::Diverged {
                last_valid_time: t,
                reason: format!("potential {} mV at ionic node {q}", self.u_nodes[q]),
            });
        }
        self.forcing_at_nodes()?;
        if self.frame.step == 0 {
            self.f_prev.copy_from_slice(&self.f_cur);
        }

        // right-hand side
        let mut rhs = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        linalg::spmv(&self.sys.mass, &self.frame.u, &mut rhs);
        linalg::spmv(&self.sys.stiffness, &self.frame.u, &mut tmp);
        for i in 0..n {
            rhs[i] = chi_c * rhs[i] - 0.5 * dt * tmp[i];
        }
        let extrap: Vec<f64> = self
            .f_cur
            .iter()
            .zip(&self.f_prev)
            .map(|(c, p)| 3.0 * c - p)
            .collect();
        self.sys.load_from_nodes(&extrap, &mut tmp);
        for i in 0..n {
            rhs[i] -= 0.5 * chi * dt * tmp[i];
        }
        if !self.config.stimulus.is_none() {
            let stim = &self.config.stimulus;
            let both: Vec<f64> = self
                .node_points
                .iter()
                .map(|&x| stim.value(t, x) + stim.value(t + dt, x))
                .collect();
            self.sys.load_from_nodes(&both, &mut tmp);
            for i in 0..n {
                rhs[i] += 0.5 * dt * tmp[i];
            }
        }

        let mut u_new = self.frame.u.clone();
        let rep = linalg::pcg(
            &self.system,
            &rhs,
            &mut u_new,
            &self.precond,
            self.config.linear_tol,
            self.config.linear_max_iter,
        )?;
        self.linear_iterations += rep.iterations;
        if u_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                last_valid_time: t,
                reason: "non-finite potential coefficients".into(),
            });
        }

        // ionic states: Y^{k+1} = Y^k + dt dY/dt(u^k, Y^k)
        if self.config.reaction {
            let models = &self.models;
            let regions = &self.node_region;
            let u = &self.u_nodes;
            self.frame
                .ionic
                .par_iter_mut()
                .enumerate()
                .try_for_each(|(q, y)| -> Result<()> {
                    let r = models[regions[q]].rhs(u[q], y)?;
                    let d = r.dydt;
                    y.ca_i += dt * d.ca_i;
                    y.k_o += dt * d.k_o;
                    y.na_i += dt * d.na_i;
                    y.m += dt * d.m;
                    y.h += dt * d.h;
                    y.n += dt * d.n;
                    y.check(GATE_SLACK).map_err(|reason| Error::Diverged {
                        last_valid_time: t,
                        reason: format!("ionic node {q}: {reason}"),
                    })?;
                    y.clamp_gates();
                    Ok(())
                })?;
        }

        std::mem::swap(&mut self.f_prev, &mut self.f_cur);
        self.frame.u = u_new;
        self.frame.step += 1;
        self.frame.t = self.frame.step as f64 * dt;
        self.frame.probes = self.probe_values(&self.frame.u);

        if let Some(r) = self.config.refine {
            if self.frame.step % r.every == 0 {
                self.refine(r)?;
            }
        }
        Ok(())
    }

    fn probe_values(&self, u: &[f64]) -> Vec<f64> {
        self.probes
            .iter()
            .map(|p| {
                let o = self.sys.offsets[p.element];
                p.values.iter().enumerate().map(|(i, v)| v * u[o + i]).sum()
            })
            .collect()
    }

    fn refine(&mut self, r: RefineConfig) -> Result<()> {
        let mesh = &self.tissue.mesh;
        let upd = dg::refine_degrees(&self.sys, mesh, &self.frame.u, r.threshold, r.p_min, r.p_max);
        if !upd.reassemble {
            return Ok(());
        }
        let mut m = mesh.clone();
        m.degree = upd.degrees;
        let sys = dg::assemble(&m, &self.tissue.conductivity.scaled(S_PER_M_TO_MS_PER_CM), self.sys.options)?;
        debug_assert_eq!(sys.node_offsets, self.sys.node_offsets);
        self.frame.u = dg::transfer(&self.sys, &sys, &self.frame.u);
        self.tissue.mesh = m;
        self.sys = sys;
        self.build_operators()?;
        log::debug!("t = {} ms: degrees updated, {} DoFs", self.frame.t, self.sys.ndofs());
        Ok(())
    }

    /// Element averages of `u` and of the ionic concentrations.
    pub fn cell_frame(&self) -> CellFrame {
        let ionic = &self.frame.ionic;
        let col = |f: fn(&IonicState) -> f64| -> Vec<f64> {
            let nodal: Vec<f64> = ionic.iter().map(f).collect();
            self.sys.cell_averages_of_nodes(&nodal)
        };
        CellFrame {
            t: self.frame.t,
            u: self.sys.cell_averages(&self.frame.u),
            ca_i: col(|y| y.ca_i),
            k_o: col(|y| y.k_o),
            na_i: col(|y| y.na_i),
        }
    }

    /// Step to `T`, recording probes every step and cell frames at the
    /// configured cadence. `observer` sees every recorded frame.
    pub fn run(&mut self, mut observer: impl FnMut(&Simulation, &CellFrame) -> Result<()>) -> Result<RunOutput> {
        let steps = self.config.steps();
        let mut probes = ProbeTrace {
            ids: self.config.probes.iter().map(|p| p.id.clone()).collect(),
            ..Default::default()
        };
        let mut frames = Vec::new();
        let first = self.cell_frame();
        observer(self, &first)?;
        frames.push(first);
        probes.t.push(self.frame.t);
        probes.values.push(self.frame.probes.clone());
        for _ in 0..steps {
            self.step()?;
            probes.t.push(self.frame.t);
            probes.values.push(self.frame.probes.clone());
            if self.frame.step % self.config.frame_every == 0 || self.frame.step == steps {
                let cf = self.cell_frame();
                observer(self, &cf)?;
                frames.push(cf);
            }
        }
        Ok(RunOutput {
            frames,
            probes,
            steps,
            linear_iterations: self.linear_iterations,
        })
    }
}

fn locate_probes(mesh: &PolyMesh, sys: &DgSystem, probes: &[Probe]) -> Vec<ProbeLocation> {
    probes
        .iter()
        .map(|p| {
            let element = mesh.nearest_element(p.point);
            ProbeLocation {
                element,
                values: sys.bases[element].values(p.point),
            }
        })
        .collect()
}

/// Assemble the system and set the state at `t = 0`: `u` projected from
/// the per-region initial potentials, ionic nodes at the shared initial
/// concentrations with gates at steady state for the local `u0`.
pub fn initialize(tissue: Tissue, config: SimConfig) -> Result<Simulation> {
    config.validate()?;
    tissue.params.validate()?;
    tissue.mesh.validate()?;
    let attrs = tissue.region_attrs()?;
    let mut options = config.assembly;
    if let Some(r) = &config.refine {
        // fixed node set across degree changes
        options.min_quad_order = options.min_quad_order.max(2 * r.p_max);
        if tissue.mesh.degree.iter().any(|&p| p > r.p_max || p < r.p_min) {
            return Err(Error::Config("initial degrees outside [p_min, p_max]".into()));
        }
    }
    let sys = dg::assemble(
        &tissue.mesh,
        &tissue.conductivity.scaled(S_PER_M_TO_MS_PER_CM),
        options,
    )?;

    let mut models = Vec::with_capacity(attrs.len());
    for a in &attrs {
        let mut p = tissue.params.clone();
        p.abeta.abeta = a.abeta;
        models.push(IonicModel::new(&p)?);
    }
    let mesh = &tissue.mesh;
    let mut node_region = Vec::with_capacity(sys.nnodes());
    let mut node_points = Vec::with_capacity(sys.nnodes());
    let mut ionic = Vec::with_capacity(sys.nnodes());
    for k in 0..mesh.num_elements() {
        let r = mesh.region[k];
        for &x in &sys.quad[k].points {
            node_region.push(r);
            node_points.push(x);
            let i = tissue.initial;
            ionic.push(IonicState::at_rest(attrs[r].u0, i.ca_i, i.k_o, i.na_i, &tissue.params.model.gating));
        }
    }
    if let Some(q) = ionic.iter().position(|y| y.check(0.0).is_err()) {
        return Err(Error::Config(format!("invalid initial ionic state at node {q}: {:?}", ionic[q])));
    }
    let u = sys.project(|k, _| attrs[mesh.region[k]].u0);
    let nn = sys.nnodes();
    let mut sim = Simulation {
        tissue,
        config,
        precond: BlockJacobi::new(&sys.mass, &sys.offsets)?,
        system: sys.mass.clone(),
        sys,
        models,
        node_region,
        node_points,
        probes: Vec::new(),
        frame: FieldFrame {
            t: 0.0,
            step: 0,
            u,
            ionic,
            probes: Vec::new(),
        },
        f_prev: vec![0.0; nn],
        f_cur: vec![0.0; nn],
        u_nodes: vec![0.0; nn],
        linear_iterations: 0,
    };
    sim.build_operators()?;
    sim.frame.probes = sim.probe_values(&sim.frame.u);
    Ok(sim)
}

/// `initialize` followed by `run` without an observer.
pub fn run(tissue: Tissue, config: SimConfig) -> Result<RunOutput> {
    initialize(tissue, config)?.run(|_, _| Ok(()))
}

/// Tissue on a tagged mesh with isotropic conductivity `sigma` (S/m),
/// overridden per region where the region sets one.
pub fn isotropic_tissue(
    mesh: &PolyMesh,
    regions: RegionSpec,
    sigma: f64,
    params: ModelParams,
    initial: InitialIonic,
) -> Result<Tissue> {
    let tagged = mesh::tag_regions(mesh, &regions)?;
    let mut tissue = Tissue {
        conductivity: ConductivityField::uniform(tagged.num_elements(), sigma),
        mesh: tagged,
        regions,
        params,
        initial,
    };
    let attrs = tissue.region_attrs()?;
    for k in 0..tissue.mesh.num_elements() {
        let a = attrs[tissue.mesh.region[k]];
        if let Some(s) = a.sigma {
            tissue.conductivity.tensors[k] = dg::SymTensor2::isotropic(s);
        }
        if let Some(p) = a.degree {
            tissue.mesh.degree[k] = p;
        }
    }
    Ok(tissue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;

    fn small(u0_default: f64) -> Tissue {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 4, 4, 0.1).unwrap();
        let regions = RegionSpec::with_default(
            "healthy",
            RegionAttrs {
                u0: u0_default,
                ..Default::default()
            },
        );
        isotropic_tissue(&m, regions, 0.0735, ModelParams::default(), InitialIonic::default()).unwrap()
    }

    #[test]
    fn one_step_gives_two_frames() {
        let cfg = SimConfig {
            dt: 0.025,
            t_end: 0.025,
            frame_every: 1,
            ..Default::default()
        };
        let out = run(small(-67.0), cfg).unwrap();
        assert_eq!(out.steps, 1);
        assert_eq!(out.frames.len(), 2);
    }

    #[test]
    fn constant_state_stays_constant_without_reaction() {
        let cfg = SimConfig {
            t_end: 2.5,
            reaction: false,
            ..Default::default()
        };
        let mut sim = initialize(small(-67.0), cfg).unwrap();
        let u0 = sim.frame().u.clone();
        for _ in 0..100 {
            sim.step().unwrap();
        }
        let err = sim
            .frame()
            .u
            .iter()
            .zip(&u0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = SimConfig {
            linear_tol: 1.5,
            ..Default::default()
        };
        assert!(initialize(small(-67.0), cfg).is_err());
        let cfg = SimConfig {
            dt: 1.0,
            t_end: 0.5,
            ..Default::default()
        };
        assert!(initialize(small(-67.0), cfg).is_err());
    }
}
