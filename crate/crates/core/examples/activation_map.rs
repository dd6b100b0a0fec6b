//! Activation times of the first wave on a small square run, written as
//! CSV and VTK.
//!
//! usage: activation_map [out_dir]

use std::path::PathBuf;

use amyloid_seizure::analysis;
use amyloid_seizure::config;
use amyloid_seizure::solver;

fn main() -> amyloid_seizure::Result<()> {
    env_logger::init();
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("activation_map"));
    let overrides: Vec<String> = ["mesh.nx=20", "mesh.ny=20", "solver.t_end=40.0"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let loaded = config::preset("square-ab10", &overrides)?;
    let cfg = &loaded.config;
    let mut sim = solver::initialize(cfg.tissue()?, cfg.sim_config())?;
    let run = sim.run(|_, _| Ok(()))?;

    let maps = analysis::activation_maps(&run.frames, analysis::U_CR);
    for m in &maps {
        let reached: Vec<f64> = m.that.iter().cloned().filter(|t| t.is_finite()).collect();
        let latest = reached.iter().cloned().fold(0.0, f64::max);
        println!(
            "wave {} from t = {:.2} ms: origin element {:?}, {} of {} elements activated, last after {latest:.2} ms",
            m.wave,
            m.t_min,
            m.origin(),
            m.activated(),
            m.that.len()
        );
    }
    std::fs::create_dir_all(&out).map_err(|e| amyloid_seizure::Error::io(&out, e))?;
    analysis::write_activation_csv(&out.join("activation.csv"), &maps)?;
    if !maps.is_empty() {
        analysis::write_activation_vtk(&out.join("activation.vtk"), sim.mesh(), &maps)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
