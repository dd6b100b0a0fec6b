//! Post-transient trajectories in (Ca_i, K_o, Na_i) for a healthy cell and
//! one exposed to 10 uM amyloid-beta.
//!
//! usage: attractor [t_end_ms] [burn_in_ms] [out_dir]

use std::path::PathBuf;

use amyloid_seizure::ode::{self, OdeRun};
use amyloid_seizure::params::ModelParams;

fn main() -> amyloid_seizure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let t_end = arg(1, 60_000.0);
    let burn_in = arg(2, 10_000.0);
    let out = args.get(3).map(PathBuf::from);

    let mut run = OdeRun::new(ModelParams::default());
    run.t_end = t_end;
    let levels = [0.0, 10.0];
    let traces = ode::sweep(&levels, &run)?;
    for (a, tr) in levels.iter().zip(&traces) {
        let att = ode::attractor_export(tr, burn_in);
        let Some((lo, hi)) = att.bounding_box() else {
            println!("{a} uM: burn-in covers the whole run");
            continue;
        };
        let c = att.centroid().unwrap();
        println!("[Ab] = {a} uM, {} points", att.points.len());
        for (k, name) in ["Ca_i", "K_o", "Na_i"].iter().enumerate() {
            println!("  {name:5} {:9.4} .. {:9.4} mM, centroid {:9.4}", lo[k], hi[k], c[k]);
        }
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|e| amyloid_seizure::Error::io(dir, e))?;
            att.write_csv(&dir.join(format!("attractor_ab{a}.csv")))?;
        }
    }
    Ok(())
}
