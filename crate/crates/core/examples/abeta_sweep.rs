//! Space-clamped runs at several amyloid-beta levels with burst statistics.
//!
//! cargo run --release --example abeta_sweep -- [t_end_ms] [out_dir]

use std::path::PathBuf;

use amyloid_seizure::ode::{self, OdeRun, SpikeSettings};
use amyloid_seizure::params::ModelParams;

fn main() -> amyloid_seizure::Result<()> {
    let mut args = std::env::args().skip(1);
    let t_end: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(60_000.0);
    let out = args.next().map(PathBuf::from);

    let mut run = OdeRun::new(ModelParams::default());
    run.t_end = t_end;
    let levels = [0.0, 1.0, 5.0, 10.0];
    let traces = ode::sweep(&levels, &run)?;

    println!("abeta_uM spikes bursts freq_hz duty mean_ca_mM max_ko_mM");
    for (a, tr) in levels.iter().zip(&traces) {
        let m = ode::spike_burst_metrics(tr, SpikeSettings::default())?;
        let ko_max = tr.k_o.iter().cloned().fold(f64::MIN, f64::max);
        println!(
            "{a:8.1} {:6} {:6} {:7.2} {:5.3} {:10.4} {:9.3}",
            m.spike_times.len(),
            m.burst_count(),
            m.mean_intraburst_frequency,
            m.duty_cycle,
            tr.time_average(&tr.ca_i),
            ko_max
        );
        for b in &m.bursts {
            println!("    burst {:9.1} .. {:9.1} ms, {} spikes", b.start, b.end, b.spikes);
        }
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|e| amyloid_seizure::Error::io(dir, e))?;
            tr.write_csv(&dir.join(format!("trace_abeta_{a}.csv")))?;
        }
    }
    Ok(())
}
