//! Run configuration files, presets and `key=value` overrides.
//!
//! A run config is one TOML document with the sections `model`, `abeta`,
//! `mesh`, `regions`, `tissue`, `solver` and `output`. A parameter file
//! (`version`, `model`, `abeta`) is itself a valid partial run config and
//! can be pulled in with `parameters = "<path>"`; keys in the run config
//! take precedence over it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::analysis::Source;
use crate::dg::{AssemblyOptions, ConductivityField};
use crate::error::{Error, Result};
use crate::ingest::{self, ScalarRaster};
use crate::mesh::{self, AxisSpacing, Layout, Point, PolyMesh, RegionAttrs, RegionSpec, Shape, StructuredSpec};
use crate::ode::{OdeRun, OdeScheme, SpikeSettings};
use crate::params::{AbetaParams, BaseParams, ModelParams};
use crate::solver::{InitialIonic, Probe, RefineConfig, SimConfig, Stimulus, Tissue};

/// Names of the presets shipped in `presets/`.
pub const PRESETS: [&str; 6] = ["fig2", "fig5-attractor", "square-ab1", "square-ab10", "two-lesions", "raster-brain"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Sim0d,
    Sim2d,
}

/// A raster file placed on the rectangle `[lo, hi]` (the mesh bounding
/// box when omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterSpec {
    pub file: PathBuf,
    pub lo: Option<Point>,
    pub hi: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle { center: Point, radius: f64 },
    HalfPlane { normal: Point, offset: f64 },
    Rect { lo: Point, hi: Point },
    Mask {
        file: PathBuf,
        lo: Option<Point>,
        hi: Option<Point>,
        threshold: f64,
    },
    All { parts: Vec<ShapeSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub file: PathBuf,
    pub lo: Option<Point>,
    pub hi: Option<Point>,
    /// Elements whose centroid samples at least this value are kept.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Mesh text file; when set the structured-grid keys are ignored.
    pub file: Option<PathBuf>,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: AxisSpacing,
    pub ny: AxisSpacing,
    pub layout: Layout,
    pub perturbation: f64,
    pub seed: u64,
    /// Initial polynomial degree.
    pub degree: usize,
    /// Keep only elements inside a raster mask (e.g. a brain section).
    pub mask: Option<MaskSpec>,
}

impl Default for MeshSection {
    fn default() -> Self {
        let s = StructuredSpec::default();
        Self {
            file: None,
            x: s.x,
            y: s.y,
            nx: s.nx,
            ny: s.ny,
            layout: s.layout,
            perturbation: s.perturbation,
            seed: s.seed,
            degree: 1,
            mask: None,
        }
    }
}

/// One region; the single entry without a shape is the default region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    pub name: String,
    pub shape: Option<ShapeSpec>,
    #[serde(default)]
    pub priority: i32,
    #[serde(default)]
    pub abeta: f64,
    #[serde(default = "rest_potential")]
    pub u0: f64,
    pub sigma: Option<f64>,
    pub degree: Option<usize>,
}

fn rest_potential() -> f64 {
    RegionAttrs::default().u0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub cos: RasterSpec,
    pub sin: RasterSpec,
    /// White-matter mask; directions apply where it is >= 0.5.
    pub white: Option<RasterSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TissueSection {
    /// Isotropic conductivity (S/m).
    pub sigma_iso: f64,
    /// Axonal conductivity (S/m), used with `directions`.
    pub sigma_axn: f64,
    pub directions: Option<DirectionSpec>,
}

impl Default for TissueSection {
    fn default() -> Self {
        Self {
            sigma_iso: 0.0735,
            sigma_axn: 0.6,
            directions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Time step (ms); 0.01 for sim0d and 0.025 for sim2d when unset.
    pub dt: Option<f64>,
    /// Final time (ms); 60000 for sim0d and 200 for sim2d when unset.
    pub t_end: Option<f64>,
    /// Initial concentrations; (0, 6, 17) mM for sim0d and
    /// (0, 8.5, 18) mM for sim2d when unset.
    pub initial: Option<InitialIonic>,

    /// sim0d: amyloid-beta values of the sweep (uM).
    pub abeta: Vec<f64>,
    pub u0: f64,
    pub stride: usize,
    pub scheme: OdeScheme,
    /// sim0d: samples with `t > burn_in` form the attractor (ms).
    pub burn_in: f64,
    pub spike_threshold: f64,
    pub burst_gap: f64,

    /// sim2d
    pub assembly: AssemblyOptions,
    pub stimulus: Stimulus,
    pub probes: Vec<Probe>,
    pub frame_every: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub reaction: bool,
    pub refine: Option<RefineConfig>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SimConfig::default();
        let o = SpikeSettings::default();
        Self {
            dt: None,
            t_end: None,
            initial: None,
            abeta: vec![0.0],
            u0: rest_potential(),
            stride: 10,
            scheme: OdeScheme::Rk4,
            burn_in: 10_000.0,
            spike_threshold: o.threshold,
            burst_gap: o.burst_gap,
            assembly: s.assembly,
            stimulus: s.stimulus,
            probes: s.probes,
            frame_every: s.frame_every,
            linear_tol: s.linear_tol,
            linear_max_iter: s.linear_max_iter,
            reaction: s.reaction,
            refine: s.refine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// sim2d: write a VTK frame every this many steps (0 disables).
    pub vtk_every: usize,
    /// sim2d: write per-element CSV dumps at the frame cadence.
    pub cell_csv: bool,
    /// sim0d: write attractor CSVs.
    pub attractor: bool,
    /// Activation threshold (mV).
    pub u_cr: f64,
    /// Regions treated as wave sources; all non-default regions if empty.
    pub sources: Vec<String>,
    /// Wave origins within this distance (cm) of a source are attributed to it.
    pub source_tol: f64,
    /// Times (ms) at which regional calcium is summarised.
    pub sample_times: Vec<f64>,
    /// sim2d: write the mass and stiffness matrices in coordinate format.
    pub dump_matrices: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            vtk_every: 200,
            cell_csv: true,
            attractor: false,
            u_cr: crate::analysis::U_CR,
            sources: Vec::new(),
            source_tol: 0.25,
            sample_times: Vec::new(),
            dump_matrices: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub name: String,
    /// Selects a table under `scales`; `desk` applies nothing.
    pub scale: String,
    /// Parameter file merged underneath this config.
    pub parameters: Option<PathBuf>,
    pub version: u32,
    pub model: BaseParams,
    pub abeta: AbetaParams,
    pub mesh: MeshSection,
    pub regions: Vec<RegionEntry>,
    pub tissue: TissueSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    /// Named override sets: dotted keys to values.
    pub scales: BTreeMap<String, Table>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            name: "run".into(),
            scale: "desk".into(),
            parameters: None,
            version: ModelParams::default().version,
            model: BaseParams::default(),
            abeta: AbetaParams::default(),
            mesh: MeshSection::default(),
            regions: Vec::new(),
            tissue: TissueSection::default(),
            solver: SolverSection::default(),
            output: OutputSection::default(),
            scales: BTreeMap::new(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Directory holding the preset files.
pub fn presets_dir() -> PathBuf {
    std::env::var_os("ABSEIZ_PRESETS")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("presets"))
}

/// `name` or `name@scale` to the preset file and scale.
pub fn preset_path(preset: &str) -> Result<(PathBuf, Option<String>)> {
    let (name, scale) = match preset.split_once('@') {
        Some((n, s)) => (n, Some(s.to_string())),
        None => (preset, None),
    };
    if !PRESETS.contains(&name) {
        return Err(Error::Config(format!(
            "unknown preset '{name}' (available: {})",
            PRESETS.join(", ")
        )));
    }
    Ok((presets_dir().join(format!("{name}.toml")), scale))
}

fn parse_table(text: &str, path: &Path) -> Result<Table> {
    text.parse::<Table>().map_err(|e| toml_error(e, text, path))
}

fn toml_error(e: toml::de::Error, text: &str, path: &Path) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.message().to_string(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = parse_table(&text, path)?;
    // field and type errors with their line numbers
    RunConfig::deserialize(toml::Deserializer::new(&text)).map_err(|e| toml_error(e, &text, path))?;
    Ok(table)
}

/// Recursive merge: tables merge key by key, anything else is replaced.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parse `key=value`; the value is read as a TOML value and falls back to
/// a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not of the form key=value")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(Error::Config(format!("override '{s}' has an empty key")));
    }
    let value = format!("v = {v}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Set a dotted key; numeric segments index arrays.
pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let bad = || Error::Config(format!("cannot apply override to '{key}'"));
    let mut cur: &mut Value = table
        .entry(parts[0].to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    if parts.len() == 1 {
        *cur = value;
        return Ok(());
    }
    for (i, part) in parts.iter().enumerate().skip(1) {
        let last = i == parts.len() - 1;
        cur = match cur {
            Value::Table(t) => {
                let e = t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
                if last {
                    *e = value;
                    return Ok(());
                }
                e
            }
            Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| bad())?;
                let e = a.get_mut(idx).ok_or_else(bad)?;
                if last {
                    *e = value;
                    return Ok(());
                }
                e
            }
            _ => return Err(bad()),
        };
    }
    Err(bad())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// The merged document before deserialisation.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    /// Canonical TOML of the resolved config.
    pub snapshot: String,
    /// SHA-256 of `snapshot`, hex.
    pub hash: String,
}

/// Resolve preset, config file, parameter file, scale and overrides, in
/// that order of increasing precedence (explicit overrides win over the
/// scale table).
pub fn load(config: Option<&Path>, preset: Option<&str>, overrides: &[String]) -> Result<Loaded> {
    let mut doc = Table::new();
    let mut base_dir = PathBuf::from(".");
    let mut scale = None;
    if let Some(p) = preset {
        let (path, s) = preset_path(p)?;
        doc = read_table(&path)?;
        base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        scale = s;
    }
    if let Some(path) = config {
        let t = read_table(path)?;
        merge(&mut doc, t);
        base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    }
    if preset.is_none() && config.is_none() {
        return Err(Error::Config("either --config or --preset is required".into()));
    }
    if let Some(Value::String(p)) = doc.remove("parameters") {
        let path = resolve(&base_dir, Path::new(&p));
        let mut params = read_table(&path)?;
        merge(&mut params, doc);
        doc = params;
    }
    let ovr: Vec<(String, Value)> = overrides.iter().map(|s| parse_override(s)).collect::<Result<_>>()?;
    for (k, v) in &ovr {
        set_dotted(&mut doc, k, v.clone())?;
    }
    if let Some(s) = scale {
        doc.insert("scale".into(), Value::String(s));
    }
    let scale = match doc.get("scale") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::Config("scale must be a string".into())),
        None => "desk".into(),
    };
    if scale != "desk" {
        let table = doc
            .get("scales")
            .and_then(|s| s.get(&scale))
            .and_then(Value::as_table)
            .cloned()
            .ok_or_else(|| Error::Config(format!("config has no scale '{scale}'")))?;
        for (k, v) in table {
            set_dotted(&mut doc, &k, v)?;
        }
        for (k, v) in &ovr {
            set_dotted(&mut doc, k, v.clone())?;
        }
    }
    let mut cfg: RunConfig = Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("after overrides: {}", e.message())))?;
    cfg.base_dir = base_dir;
    cfg.resolve_paths();
    cfg.validate()?;
    let snapshot = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    let hash = hex(&Sha256::digest(snapshot.as_bytes()));
    Ok(Loaded { config: cfg, snapshot, hash })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(e, text, Path::new("<string>")))
    }

    fn resolve_paths(&mut self) {
        let b = self.base_dir.clone();
        let fix = |r: &mut RasterSpec| r.file = resolve(&b, &r.file);
        if let Some(f) = &mut self.mesh.file {
            *f = resolve(&b, f);
        }
        if let Some(m) = &mut self.mesh.mask {
            m.file = resolve(&b, &m.file);
        }
        if let Some(d) = &mut self.tissue.directions {
            fix(&mut d.cos);
            fix(&mut d.sin);
            if let Some(w) = &mut d.white {
                fix(w);
            }
        }
        fn fix_shape(s: &mut ShapeSpec, b: &Path) {
            match s {
                ShapeSpec::Mask { file, .. } => *file = resolve(b, file),
                ShapeSpec::All { parts } => parts.iter_mut().for_each(|p| fix_shape(p, b)),
                _ => {}
            }
        }
        for r in &mut self.regions {
            if let Some(s) = &mut r.shape {
                fix_shape(s, &b);
            }
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            version: self.version,
            model: self.model.clone(),
            abeta: self.abeta.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if self.mesh.degree == 0 {
            return Err(Error::Config("mesh.degree must be >= 1".into()));
        }
        let defaults = self.regions.iter().filter(|r| r.shape.is_none()).count();
        if !self.regions.is_empty() && defaults != 1 {
            return Err(Error::Config(format!(
                "exactly one region must omit `shape` (the default region), found {defaults}"
            )));
        }
        let mut names: Vec<&str> = self.regions.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("region names must be unique".into()));
        }
        for s in &self.output.sources {
            if !self.regions.iter().any(|r| &r.name == s) {
                return Err(Error::Config(format!("output.sources names unknown region '{s}'")));
            }
        }
        if !(self.tissue.sigma_iso > 0.0 && self.tissue.sigma_axn >= 0.0) {
            return Err(Error::Config("conductivities must be positive".into()));
        }
        Ok(())
    }

    pub fn initial(&self, command: Command) -> InitialIonic {
        self.solver.initial.unwrap_or(match command {
            Command::Sim0d => InitialIonic {
                ca_i: 0.0,
                k_o: 6.0,
                na_i: 17.0,
            },
            Command::Sim2d => InitialIonic::default(),
        })
    }

    /// Sweep values and the template run of a sim0d config.
    pub fn ode_run(&self) -> Result<(Vec<f64>, OdeRun)> {
        if self.solver.abeta.is_empty() {
            return Err(Error::Config("solver.abeta must list at least one concentration".into()));
        }
        let params = self.params();
        let i = self.initial(Command::Sim0d);
        let mut run = OdeRun::new(params.clone());
        run.u0 = self.solver.u0;
        run.initial = crate::ionic::IonicState::at_rest(run.u0, i.ca_i, i.k_o, i.na_i, &params.model.gating);
        run.dt = self.solver.dt.unwrap_or(run.dt);
        run.t_end = self.solver.t_end.unwrap_or(run.t_end);
        run.stride = self.solver.stride;
        run.scheme = self.solver.scheme;
        run.validate()?;
        Ok((self.solver.abeta.clone(), run))
    }

    pub fn spike_settings(&self) -> SpikeSettings {
        SpikeSettings {
            threshold: self.solver.spike_threshold,
            burst_gap: self.solver.burst_gap,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.solver;
        let d = SimConfig::default();
        SimConfig {
            dt: s.dt.unwrap_or(d.dt),
            t_end: s.t_end.unwrap_or(d.t_end),
            assembly: s.assembly,
            stimulus: s.stimulus.clone(),
            probes: s.probes.clone(),
            frame_every: s.frame_every,
            linear_tol: s.linear_tol,
            linear_max_iter: s.linear_max_iter,
            reaction: s.reaction,
            refine: s.refine,
        }
    }

    fn raster(&self, spec: &RasterSpec, lo: Point, hi: Point) -> Result<Arc<ScalarRaster>> {
        let r = ScalarRaster::read(&spec.file)?;
        Ok(Arc::new(r.fitted(spec.lo.unwrap_or(lo), spec.hi.unwrap_or(hi))?))
    }

    fn shape(&self, s: &ShapeSpec, lo: Point, hi: Point) -> Result<Shape> {
        Ok(match s {
            ShapeSpec::Circle { center, radius } => Shape::Circle {
                center: *center,
                radius: *radius,
            },
            ShapeSpec::HalfPlane { normal, offset } => Shape::HalfPlane {
                normal: *normal,
                offset: *offset,
            },
            ShapeSpec::Rect { lo, hi } => Shape::Rect { lo: *lo, hi: *hi },
            ShapeSpec::Mask {
                file,
                lo: rlo,
                hi: rhi,
                threshold,
            } => Shape::Mask {
                raster: self.raster(
                    &RasterSpec {
                        file: file.clone(),
                        lo: *rlo,
                        hi: *rhi,
                    },
                    lo,
                    hi,
                )?,
                threshold: *threshold,
            },
            ShapeSpec::All { parts } => {
                Shape::All(parts.iter().map(|p| self.shape(p, lo, hi)).collect::<Result<_>>()?)
            }
        })
    }

    /// Untagged mesh: generated or read, then masked.
    pub fn base_mesh(&self) -> Result<PolyMesh> {
        let m = &self.mesh;
        let mut mesh = match &m.file {
            Some(f) => mesh::read_mesh(f)?,
            None => mesh::generate(&StructuredSpec {
                x: m.x,
                y: m.y,
                nx: m.nx.clone(),
                ny: m.ny.clone(),
                layout: m.layout,
                perturbation: m.perturbation,
                seed: m.seed,
            })?,
        };
        if m.file.is_none() || mesh.degree.iter().all(|&p| p == 1) {
            mesh.degree = vec![m.degree; mesh.num_elements()];
        }
        if let Some(mask) = &m.mask {
            let (lo, hi) = mesh.bounding_box();
            let spec = RasterSpec {
                file: mask.file.clone(),
                lo: mask.lo,
                hi: mask.hi,
            };
            let r = self.raster(&spec, lo, hi)?;
            let keep: Vec<bool> = mesh
                .centroid
                .iter()
                .map(|&c| r.sample(c).map(|v| v >= mask.threshold))
                .collect::<Result<_>>()?;
            mesh = mesh.restrict(&keep)?;
        }
        Ok(mesh)
    }

    pub fn region_spec(&self, lo: Point, hi: Point) -> Result<RegionSpec> {
        if self.regions.is_empty() {
            return Ok(RegionSpec::with_default("tissue", RegionAttrs::default()));
        }
        let mut spec = RegionSpec::default();
        for r in &self.regions {
            let attrs = RegionAttrs {
                abeta: r.abeta,
                u0: r.u0,
                sigma: r.sigma,
                degree: r.degree,
            };
            match &r.shape {
                None => spec.default = Some((r.name.clone(), attrs)),
                Some(s) => spec = spec.add(&r.name, self.shape(s, lo, hi)?, r.priority, attrs),
            }
        }
        Ok(spec)
    }

    /// Mesh, regions, conductivity and ionic data of a sim2d config.
    pub fn tissue(&self) -> Result<Tissue> {
        let base = self.base_mesh()?;
        let (lo, hi) = base.bounding_box();
        let regions = self.region_spec(lo, hi)?;
        let t = &self.tissue;
        let mut tissue = crate::solver::isotropic_tissue(
            &base,
            regions,
            t.sigma_iso,
            self.params(),
            self.initial(Command::Sim2d),
        )?;
        if let Some(d) = &t.directions {
            let cos = self.raster(&d.cos, lo, hi)?;
            let sin = self.raster(&d.sin, lo, hi)?;
            let white = d.white.as_ref().map(|w| self.raster(w, lo, hi)).transpose()?;
            let dirs = ingest::directions_from_rasters(&tissue.mesh, &cos, &sin, white.as_deref())?;
            let field: ConductivityField = ingest::build_conductivity(t.sigma_iso, t.sigma_axn, &dirs)?;
            // region conductivity overrides stay isotropic
            let attrs = tissue.region_attrs()?;
            for k in 0..tissue.mesh.num_elements() {
                if attrs[tissue.mesh.region[k]].sigma.is_none() {
                    tissue.conductivity.tensors[k] = field.tensors[k];
                }
            }
        }
        Ok(tissue)
    }

    /// Wave sources for origin attribution.
    pub fn sources(&self, lo: Point, hi: Point) -> Result<Vec<Source>> {
        self.regions
            .iter()
            .filter(|r| r.shape.is_some())
            .filter(|r| self.output.sources.is_empty() || self.output.sources.contains(&r.name))
            .map(|r| {
                Ok(Source {
                    name: r.name.clone(),
                    shape: self.shape(r.shape.as_ref().unwrap(), lo, hi)?,
                })
            })
            .collect()
    }
}

/// Shorthand used by the examples: parse a preset at the given scale.
pub fn preset(name: &str, overrides: &[String]) -> Result<Loaded> {
    load(None, Some(name), overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_values() {
        assert_eq!(parse_override("solver.dt=0.5").unwrap().1, Value::Float(0.5));
        assert_eq!(parse_override("name = run1").unwrap().1, Value::String("run1".into()));
        assert_eq!(
            parse_override("solver.abeta=[0, 10]").unwrap().1,
            Value::Array(vec![Value::Integer(0), Value::Integer(10)])
        );
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn dotted_keys_create_and_index() {
        let mut t: Table = "[[regions]]\nname = \"a\"\n[[regions]]\nname = \"b\"".parse().unwrap();
        set_dotted(&mut t, "solver.dt", Value::Float(0.1)).unwrap();
        set_dotted(&mut t, "regions.1.abeta", Value::Float(10.0)).unwrap();
        assert_eq!(t["solver"]["dt"].as_float(), Some(0.1));
        assert_eq!(t["regions"][1]["abeta"].as_float(), Some(10.0));
        assert!(set_dotted(&mut t, "regions.7.abeta", Value::Float(1.0)).is_err());
    }

    #[test]
    fn unknown_keys_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "name = \"x\"\n\n[solver]\ndt = 0.1\nbogus = 3\n").unwrap();
        match load(Some(&p), None, &[]) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 5, "{message}");
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "command = \"sim0d\"\n[solver]\nabeta = [0.0, 10.0]\n").unwrap();
        let a = load(Some(&p), None, &[]).unwrap();
        let b = load(Some(&p), None, &[]).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash.len(), 64);
        let c = load(Some(&p), None, &["model.k_bath=9.0".into()]).unwrap();
        assert_ne!(a.hash, c.hash);
        assert_eq!(c.config.model.k_bath, 9.0);
        let again: RunConfig = RunConfig::from_toml_str(&a.snapshot).unwrap();
        assert_eq!(again.solver, a.config.solver);
    }

    #[test]
    fn empty_sweep_is_a_config_error() {
        let c = RunConfig {
            solver: SolverSection {
                abeta: vec![],
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(c.ode_run(), Err(Error::Config(_))));
    }

    #[test]
    fn region_rules() {
        let mut c = RunConfig::default();
        c.regions = vec![RegionEntry {
            name: "a".into(),
            shape: Some(ShapeSpec::Circle {
                center: [0.0, 0.0],
                radius: 1.0,
            }),
            priority: 0,
            abeta: 1.0,
            u0: -67.0,
            sigma: None,
            degree: None,
        }];
        assert!(c.validate().is_err());
        let mut d = c.regions[0].clone();
        d.name = "rest".into();
        d.shape = None;
        c.regions.push(d);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(preset_path("nope"), Err(Error::Config(_))));
        let (p, s) = preset_path("square-ab10@paper").unwrap();
        assert!(p.ends_with("square-ab10.toml"));
        assert_eq!(s.as_deref(), Some("paper"));
    }
}
