//! Every preset runs end to end at reduced resolution and parses at paper scale.

use std::path::Path;

use amyloid_seizure::cli;
use amyloid_seizure::config::{self, Command, PRESETS};

fn run(command: &str, preset: &str, out: &Path, overrides: &[&str]) -> i32 {
    let mut args: Vec<String> = vec![
        "abseiz".into(),
        command.into(),
        "--preset".into(),
        preset.into(),
        "--out".into(),
        out.display().to_string(),
    ];
    for o in overrides {
        args.push("--override".into());
        args.push(o.to_string());
    }
    cli::main_with_args(args.into_iter().map(Into::into))
}

fn manifest_outputs(out: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    let m: cli::RunManifest = toml::from_str(&text).unwrap();
    assert_eq!(m.config_hash.len(), 64);
    for f in &m.outputs {
        assert!(out.join(f).exists(), "{f} listed but missing");
    }
    m.outputs
}

fn smoke_2d(preset: &str, extra: &[&str]) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let mut overrides = vec!["solver.t_end=1.0", "solver.frame_every=10", "output.vtk_every=20"];
    overrides.extend_from_slice(extra);
    assert_eq!(run("sim2d", preset, dir.path(), &overrides), 0);
    let outputs = manifest_outputs(dir.path());
    for f in ["probes.csv", "summary.csv", "activation.csv", "mesh.txt", "cells/index.csv"] {
        assert!(outputs.iter().any(|o| o == f), "{preset}: no {f}");
    }
    let probes = std::fs::read_to_string(dir.path().join("probes.csv")).unwrap();
    assert!(probes.starts_with("t,probe_id,u\n"));
    outputs
}

fn smoke_0d(preset: &str, extra: &[&str]) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let mut overrides = vec!["solver.t_end=200.0"];
    overrides.extend_from_slice(extra);
    assert_eq!(run("sim0d", preset, dir.path(), &overrides), 0);
    let outputs = manifest_outputs(dir.path());
    let trace = std::fs::read_to_string(dir.path().join("trace_ab0.csv")).unwrap();
    assert!(trace.starts_with("t,u,ca_i,k_o,na_i,j_abeta\n"));
    outputs
}

#[test]
fn fig2_smoke() {
    let out = smoke_0d("fig2", &[]);
    for a in [0, 1, 5, 10] {
        assert!(out.contains(&format!("trace_ab{a}.csv")));
    }
}

#[test]
fn fig5_attractor_smoke() {
    let out = smoke_0d("fig5-attractor", &["solver.burn_in=100.0"]);
    assert!(out.contains(&"attractor_ab0.csv".to_string()));
    assert!(out.contains(&"attractor_ab10.csv".to_string()));
}

#[test]
fn square_ab1_smoke() {
    smoke_2d("square-ab1", &["mesh.nx=8", "mesh.ny=8"]);
}

#[test]
fn square_ab10_smoke() {
    let out = smoke_2d("square-ab10", &["mesh.nx=8", "mesh.ny=8"]);
    assert!(out.iter().any(|f| f.starts_with("vtk/")));
}

#[test]
fn two_lesions_smoke() {
    smoke_2d("two-lesions", &["mesh.nx=14", "mesh.ny=8"]);
}

#[test]
fn raster_brain_smoke() {
    smoke_2d("raster-brain", &["mesh.nx=20", "mesh.ny=15"]);
}

#[test]
fn activation_reads_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let overrides = ["mesh.nx=6", "mesh.ny=6", "solver.t_end=2.0", "solver.frame_every=4"];
    assert_eq!(run("sim2d", "square-ab10", &run_dir, &overrides), 0);
    let config = run_dir.join("config.toml");
    let args = [
        "abseiz",
        "activation",
        "--config",
        config.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ];
    assert_eq!(cli::main_with_args(args.iter().map(Into::into)), 0);
    assert!(run_dir.join("activation_manifest.toml").exists());
    assert!(run_dir.join("manifest.toml").exists());
    let csv = std::fs::read_to_string(run_dir.join("activation.csv")).unwrap();
    assert!(csv.starts_with("element_id,wave,that_ms\n"));
}

#[test]
fn paper_scale_configs_load() {
    for name in PRESETS {
        let desk = config::preset(name, &[]).unwrap();
        let paper = config::preset(&format!("{name}@paper"), &[]).unwrap();
        assert_eq!(paper.config.scale, "paper");
        assert_ne!(desk.hash, paper.hash, "{name}");
        paper.config.validate().unwrap();
        let desk_dt = desk.config.solver.dt.unwrap();
        let paper_dt = paper.config.solver.dt.unwrap();
        assert!(paper_dt < desk_dt, "{name}: paper dt {paper_dt} vs desk {desk_dt}");
        if paper.config.command == Some(Command::Sim2d) {
            let t = paper.config.tissue().unwrap();
            assert!(t.mesh.num_elements() >= desk.config.tissue().unwrap().mesh.num_elements());
        }
    }
}

#[test]
fn presets_snapshot_round_trips() {
    for name in PRESETS {
        let loaded = config::preset(name, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(&path, &loaded.snapshot).unwrap();
        let again = config::load(Some(&path), None, &[]).unwrap();
        assert_eq!(again.config.name, loaded.config.name);
        assert_eq!(again.config.params(), loaded.config.params());
    }
}
