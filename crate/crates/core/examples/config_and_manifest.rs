//! Load a preset with command-line style overrides, show the resolved
//! parameters and hash, then run it through the library CLI entry point.
//!
//! usage: config_and_manifest [preset] [out_dir] [key=value ...]

use std::path::PathBuf;

use amyloid_seizure::{cli, config};

fn main() -> amyloid_seizure::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "fig2".into());
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("abseiz-config-demo"));
    let mut overrides: Vec<String> = args.collect();
    if overrides.is_empty() {
        overrides.push("solver.t_end=2000.0".into());
    }

    let loaded = config::preset(&preset, &overrides)?;
    println!("preset {preset} ({} scale), hash {}", loaded.config.scale, loaded.hash);
    let p = loaded.config.params();
    println!("K_bath = {} mM, tau_Ca = {} ms, k_VGCC = {}", p.model.k_bath, p.model.tau_ca, p.abeta.k_vgcc);
    println!("--- resolved config ---\n{}", loaded.snapshot);

    let manifest = match loaded.config.command {
        Some(config::Command::Sim2d) => cli::sim2d(&loaded, &out)?,
        _ => cli::sim0d(&loaded, &out)?,
    };
    println!("{} files in {}:", manifest.outputs.len(), out.display());
    for f in manifest.outputs.iter().take(12) {
        println!("  {f}");
    }
    Ok(())
}
