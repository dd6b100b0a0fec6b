use amyloid_seizure::analysis;
use amyloid_seizure::config;
use amyloid_seizure::dg::ConductivityField;
use amyloid_seizure::ingest;
use amyloid_seizure::mesh::{self, AxisSpacing, DegreeRule, RegionAttrs, RegionSpec, Shape, StructuredSpec};
use amyloid_seizure::params::ModelParams;
use amyloid_seizure::solver::{self, InitialIonic, SimConfig, Tissue};

fn bump_tissue(anisotropic: bool) -> Tissue {
    let m = mesh::generate(&StructuredSpec {
        nx: AxisSpacing::Uniform(8),
        ny: AxisSpacing::Uniform(8),
        perturbation: 0.2,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let marked = m.centroid.iter().map(|c| c[0] > 0.5).collect();
    let m = mesh::assign_degrees(&m, &DegreeRule::Indicator { base: 1, marked }).unwrap();
    let regions = RegionSpec::with_default("rest", RegionAttrs::default()).add(
        "hot",
        Shape::Circle {
            center: [0.3, 0.4],
            radius: 0.25,
        },
        1,
        RegionAttrs {
            u0: -20.0,
            ..Default::default()
        },
    );
    let mut t = solver::isotropic_tissue(&m, regions, 0.0735, ModelParams::default(), InitialIonic::default()).unwrap();
    if anisotropic {
        let dirs: Vec<_> = t.mesh.centroid.iter().map(|c| Some([c[1].cos(), c[1].sin()])).collect();
        t.conductivity = ingest::build_conductivity(0.0735, 0.6, &dirs).unwrap();
    }
    t
}

fn diffusion_only(steps: usize) -> SimConfig {
    SimConfig {
        t_end: steps as f64 * 0.025,
        reaction: false,
        linear_tol: 1e-15,
        linear_max_iter: 2000,
        ..Default::default()
    }
}

#[test]
fn pure_diffusion_conserves_the_mean_and_dissipates() {
    for anisotropic in [false, true] {
        let mut sim = solver::initialize(bump_tissue(anisotropic), diffusion_only(300)).unwrap();
        let mean0 = sim.sys.integral(&sim.frame().u);
        let mut energy = sim.sys.energy(&sim.frame().u);
        let start = energy;
        for _ in 0..300 {
            sim.step().unwrap();
            let e = sim.sys.energy(&sim.frame().u);
            assert!(e <= energy * (1.0 + 1e-12), "energy rose {energy} -> {e}");
            energy = e;
            let drift = ((sim.sys.integral(&sim.frame().u) - mean0) / mean0).abs();
            assert!(drift < 1e-10, "mean drift {drift}");
        }
        assert!(energy < 0.9 * start);
    }
}

#[test]
fn constant_conductivity_scaling_matches_time_scaling() {
    // doubling Sigma over T equals Sigma over 2T for pure diffusion
    let run = |scale: f64, steps: usize| {
        let mut t = bump_tissue(false);
        t.conductivity = ConductivityField::uniform(t.mesh.num_elements(), 0.0735 * scale);
        let mut cfg = diffusion_only(steps);
        cfg.dt = 0.025 / scale;
        cfg.t_end = steps as f64 * cfg.dt;
        let mut sim = solver::initialize(t, cfg).unwrap();
        for _ in 0..steps {
            sim.step().unwrap();
        }
        sim.frame().u.clone()
    };
    let a = run(1.0, 40);
    let b = run(2.0, 40);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");
}

fn far_probe_arrival(degree: usize) -> f64 {
    let overrides = [
        "mesh.nx=16".to_string(),
        "mesh.ny=16".into(),
        format!("mesh.degree={degree}"),
        "solver.t_end=30.0".into(),
        "solver.frame_every=40".into(),
    ];
    let loaded = config::preset("square-ab10", &overrides).unwrap();
    let cfg = &loaded.config;
    let mut sim = solver::initialize(cfg.tissue().unwrap(), cfg.sim_config()).unwrap();
    let run = sim.run(|_, _| Ok(())).unwrap();
    let j = run.probes.ids.iter().position(|p| p == "far").unwrap();
    analysis::first_crossing(&run.probes.t, &run.probes.series(j), 0.0, 0, run.probes.t.len() - 1)
        .expect("front reaches the far probe")
}

#[test]
fn front_arrival_is_robust_to_degree() {
    let (p1, p2) = (far_probe_arrival(1), far_probe_arrival(2));
    assert!((p1 - p2).abs() < 0.1 * p2, "p1 {p1} ms vs p2 {p2} ms");
}
