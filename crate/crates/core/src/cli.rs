//! Command-line front end: `sim0d`, `sim2d` and `activation`.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when the
//! integration diverges, 1 for anything else (I/O, mesh, solver).
//! `ABSEIZ_THREADS` sets the worker thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::config::{self, Command, Loaded};
use crate::error::{Error, Result};
use crate::ode;
use crate::output;
use crate::params::ModelParams;
use crate::solver;

pub const THREADS_ENV: &str = "ABSEIZ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "abseiz", version, about = "Amyloid-beta seizure simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Single-neuron amyloid-beta sweep.
    Sim0d(RunArgs),
    /// Tissue simulation on a polygonal mesh.
    Sim2d(RunArgs),
    /// Activation maps and summary from the cell frames of a sim2d run.
    Activation(ActivationArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run config (TOML); merged over the preset when both are given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Shipped preset, `name` or `name@paper`.
    #[arg(long)]
    pub preset: Option<String>,
    /// `key=value` with a dotted key, e.g. `solver.dt=0.01`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ActivationArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Directory of the sim2d run; defaults to `--out`.
    #[arg(long)]
    pub frames: Option<PathBuf>,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub name: String,
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    pub parameters: ModelParams,
}

/// Map an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Diverged { .. } => 3,
        _ => 1,
    }
}

/// Parse arguments, run, and return the exit code.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match run(&cli.command) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Some(v) = std::env::var_os(THREADS_ENV) {
        let n: usize = v
            .to_str()
            .and_then(|s| s.trim().parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Run a parsed command; returns the manifest.
pub fn run(cmd: &Cmd) -> Result<RunManifest> {
    match cmd {
        Cmd::Sim0d(a) => {
            let loaded = load(a, Command::Sim0d)?;
            sim0d(&loaded, &a.out)
        }
        Cmd::Sim2d(a) => {
            let loaded = load(a, Command::Sim2d)?;
            sim2d(&loaded, &a.out)
        }
        Cmd::Activation(a) => {
            let loaded = load(&a.run, Command::Sim2d)?;
            let frames = a.frames.clone().unwrap_or_else(|| a.run.out.clone());
            activation(&loaded, &frames, &a.run.out)
        }
    }
}

fn load(a: &RunArgs, expected: Command) -> Result<Loaded> {
    let loaded = config::load(a.config.as_deref(), a.preset.as_deref(), &a.overrides)?;
    if let Some(c) = loaded.config.command {
        if c != expected {
            return Err(Error::Config(format!("config is for {c:?}, not {expected:?}").to_lowercase()));
        }
    }
    Ok(loaded)
}

/// Seconds since the epoch as `YYYY-MM-DDThh:mm:ssZ`.
pub fn utc_timestamp(t: SystemTime) -> String {
    let secs = t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0) as i64;
    let (days, rem) = (secs.div_euclid(86_400), secs.rem_euclid(86_400));
    // civil-from-days
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        (rem / 60) % 60,
        rem % 60
    )
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.path(rel)?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn finish(mut self, command: &str, loaded: &Loaded, started: SystemTime) -> Result<RunManifest> {
        // activation may share the directory of the run it analyses
        let name = if command == "activation" {
            "activation_manifest.toml"
        } else {
            "manifest.toml"
        };
        self.files.push(name.into());
        let m = RunManifest {
            command: command.into(),
            name: loaded.config.name.clone(),
            config_hash: loaded.hash.clone(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            started: utc_timestamp(started),
            finished: utc_timestamp(SystemTime::now()),
            outputs: self.files.clone(),
            parameters: loaded.config.params(),
        };
        let text = toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))?;
        let p = self.dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(m)
    }
}

fn tag(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

/// Trace, metrics and attractor CSVs for every concentration of the sweep.
pub fn sim0d(loaded: &Loaded, out: &Path) -> Result<RunManifest> {
    let started = SystemTime::now();
    let cfg = &loaded.config;
    let (values, template) = cfg.ode_run()?;
    let mut o = Outputs::new(out)?;
    o.write("config.toml", &loaded.snapshot)?;
    let traces = ode::sweep(&values, &template)?;
    let mut metrics = String::from(
        "abeta_um,spikes,bursts,mean_intraburst_hz,duty_cycle,mean_ca_i_mm,max_k_o_mm,max_j_abeta_um_per_ms\n",
    );
    for (v, tr) in values.iter().zip(&traces) {
        tr.write_csv(&o.path(&format!("trace_ab{}.csv", tag(*v)))?)?;
        let m = ode::spike_burst_metrics(tr, cfg.spike_settings())?;
        let max_ko = tr.k_o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let max_j = tr.j_abeta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            metrics,
            "{v},{},{},{:.6},{:.6},{:.9e},{:.9e},{:.9e}",
            m.spike_times.len(),
            m.burst_count(),
            m.mean_intraburst_frequency,
            m.duty_cycle,
            tr.time_average(&tr.ca_i),
            max_ko,
            max_j
        );
        log::info!(
            "[Abeta] = {v} uM: {} spikes in {} bursts, duty {:.3}",
            m.spike_times.len(),
            m.burst_count(),
            m.duty_cycle
        );
        if cfg.output.attractor {
            let a = ode::attractor_export(tr, cfg.solver.burn_in);
            a.write_csv(&o.path(&format!("attractor_ab{}.csv", tag(*v)))?)?;
        }
    }
    o.write("metrics.csv", &metrics)?;
    o.finish("sim0d", loaded, started)
}

/// VTK and CSV frames, probe traces, activation maps and a summary.
pub fn sim2d(loaded: &Loaded, out: &Path) -> Result<RunManifest> {
    let started = SystemTime::now();
    let cfg = &loaded.config;
    let mut o = Outputs::new(out)?;
    o.write("config.toml", &loaded.snapshot)?;
    let tissue = cfg.tissue()?;
    log::info!("regions: {:?}", tissue.mesh.region_counts());
    let mesh_text = crate::mesh::mesh_to_string(&tissue.mesh);
    o.write("mesh.txt", &mesh_text)?;
    let sim_cfg = cfg.sim_config();
    let mut sim = solver::initialize(tissue, sim_cfg)?;
    if cfg.output.dump_matrices {
        for p in sim.sys.dump(&out.join("matrices"), "dg")? {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            o.files.push(format!("matrices/{name}"));
        }
    }
    let vtk_every = cfg.output.vtk_every;
    let cell_csv = cfg.output.cell_csv;
    for (sub, on) in [("cells", cell_csv), ("vtk", vtk_every > 0)] {
        let d = out.join(sub);
        if on {
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let mut index = String::from("frame,t_ms,file\n");
    let mut count = 0usize;
    let mut files = Vec::new();
    let run = sim.run(|s, f| {
        let step = s.frame().step;
        if cell_csv {
            let rel = format!("cells/cells_{count:05}.csv");
            output::write_cell_frame(&out.join(&rel), f)?;
            let _ = writeln!(index, "{count},{:.6},cells_{count:05}.csv", f.t);
            files.push(rel);
        }
        if vtk_every > 0 && step % vtk_every == 0 {
            let rel = format!("vtk/frame_{:06}.vtk", step);
            let p = out.join(&rel);
            output::write_vtk(
                &p,
                s.mesh(),
                &format!("t = {} ms", f.t),
                &[("u", &f.u), ("ca_i", &f.ca_i), ("k_o", &f.k_o)],
            )?;
            files.push(rel);
        }
        count += 1;
        Ok(())
    })?;
    o.files.extend(files);
    if cell_csv {
        o.write("cells/index.csv", &index)?;
    }
    run.probes.write_csv(&o.path("probes.csv")?)?;
    log::info!("{} steps, {} CG iterations", run.steps, run.linear_iterations);
    analyse(loaded, sim.mesh(), &run.frames, &mut o)?;
    o.finish("sim2d", loaded, started)
}

fn analyse(loaded: &Loaded, mesh: &crate::mesh::PolyMesh, frames: &[solver::CellFrame], o: &mut Outputs) -> Result<()> {
    let cfg = &loaded.config;
    let maps = analysis::activation_maps(frames, cfg.output.u_cr);
    if maps.is_empty() {
        log::warn!("no waves detected: no activation maps written");
    }
    analysis::write_activation_csv(&o.path("activation.csv")?, &maps)?;
    if !maps.is_empty() {
        analysis::write_activation_vtk(&o.path("activation.vtk")?, mesh, &maps)?;
    }
    let (lo, hi) = mesh.bounding_box();
    let sources = cfg.sources(lo, hi)?;
    let summary = analysis::summarize_run(
        &cfg.name,
        mesh,
        frames,
        &sources,
        cfg.output.source_tol,
        &cfg.output.sample_times,
        cfg.output.u_cr,
    );
    for w in &summary.waves {
        log::info!(
            "wave {} at {:.2} ms: origin {:?} ({})",
            w.index,
            w.t_min,
            w.origin_point,
            w.source.as_deref().unwrap_or("none")
        );
    }
    analysis::write_summary_csv(&o.path("summary.csv")?, &[summary])
}

/// Activation maps and summary recomputed from a run directory.
pub fn activation(loaded: &Loaded, run_dir: &Path, out: &Path) -> Result<RunManifest> {
    let started = SystemTime::now();
    let mesh_path = run_dir.join("mesh.txt");
    let mesh = crate::mesh::read_mesh(&mesh_path)?;
    let frames = output::read_cell_frames(&run_dir.join("cells"))?;
    if let Some(f) = frames.iter().find(|f| f.u.len() != mesh.num_elements()) {
        return Err(Error::Config(format!(
            "frame at t = {} ms has {} cells, mesh has {}",
            f.t,
            f.u.len(),
            mesh.num_elements()
        )));
    }
    let mut o = Outputs::new(out)?;
    analyse(loaded, &mesh, &frames, &mut o)?;
    o.finish("activation", loaded, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(utc_timestamp(UNIX_EPOCH), "1970-01-01T00:00:00Z");
        let t = UNIX_EPOCH + std::time::Duration::from_secs(951_782_400 + 3661);
        assert_eq!(utc_timestamp(t), "2000-02-29T01:01:01Z");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Diverged {
                last_valid_time: 1.0,
                reason: "x".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Mesh("x".into())), 1);
        assert_eq!(main_with_args(["abseiz", "sim0d"].map(Into::into)), 2);
    }
}
