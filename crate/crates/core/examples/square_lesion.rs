//! Unit square with a depolarised corner zone at the origin and an
//! amyloid-beta lesion in the opposite corner, built directly in code.
//!
//! usage: square_lesion [abeta_uM] [t_end_ms] [k_o] [out_dir]

use std::path::PathBuf;

use amyloid_seizure::analysis::{self, Source};
use amyloid_seizure::mesh::{self, AxisSpacing, RegionAttrs, RegionSpec, Shape, StructuredSpec};
use amyloid_seizure::params::ModelParams;
use amyloid_seizure::solver::{self, InitialIonic, Probe, SimConfig};

fn main() -> amyloid_seizure::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let abeta = arg(1, 10.0);
    let t_end = arg(2, 200.0);
    let k_o = arg(3, InitialIonic::default().k_o);
    let out = args.get(4).map(PathBuf::from);

    let graded = AxisSpacing::Graded(vec![(0.8, 16), (1.0, 16)]);
    let grid = mesh::generate(&StructuredSpec {
        nx: graded.clone(),
        ny: graded,
        perturbation: 0.15,
        seed: 7,
        ..Default::default()
    })?;
    let omega0 = Shape::Circle {
        center: [0.0, 0.0],
        radius: 0.2,
    };
    let lesion = Shape::Circle {
        center: [1.0, 1.0],
        radius: 0.2,
    };
    let regions = RegionSpec::with_default("healthy", RegionAttrs::default())
        .add(
            "omega0",
            omega0.clone(),
            1,
            RegionAttrs {
                u0: -50.0,
                ..Default::default()
            },
        )
        .add(
            "lesion",
            lesion.clone(),
            2,
            RegionAttrs {
                abeta,
                ..Default::default()
            },
        );
    let initial = InitialIonic {
        k_o,
        ..Default::default()
    };
    let tissue = solver::isotropic_tissue(&grid, regions, 0.0735, ModelParams::default(), initial)?;
    println!("elements per region: {:?}", tissue.mesh.region_counts());

    let probes = [("near", [0.7, 0.7]), ("mid", [0.5, 0.5]), ("far", [0.3, 0.3])]
        .iter()
        .map(|(id, p)| Probe {
            id: id.to_string(),
            point: *p,
        })
        .collect();
    let config = SimConfig {
        t_end,
        probes,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let mut sim = solver::initialize(tissue, config)?;
    let run = sim.run(|_, _| Ok(()))?;
    println!(
        "{} steps, {} CG iterations, {:.1} s",
        run.steps,
        run.linear_iterations,
        start.elapsed().as_secs_f64()
    );

    let sources = vec![
        Source {
            name: "omega0".into(),
            shape: omega0,
        },
        Source {
            name: "lesion".into(),
            shape: lesion,
        },
    ];
    let summary = analysis::summarize_run("square", sim.mesh(), &run.frames, &sources, 0.25, &[118.0], analysis::U_CR);
    for w in &summary.waves {
        println!(
            "wave {} t = {:7.2}..{:7.2} ms origin {:?} ({}) cells {} K_o peak {:.2}",
            w.index,
            w.t_min,
            w.t_max,
            w.origin_point.map(|p| [(p[0] * 100.0).round() / 100.0, (p[1] * 100.0).round() / 100.0]),
            w.source.as_deref().unwrap_or("-"),
            w.activated,
            w.k_o_peak
        );
    }
    for s in &summary.samples {
        println!("t = {:.1} ms {:8} mean Ca_i {:.4e} mM max {:.4e}", s.t, s.region, s.mean_ca_i, s.max_ca_i);
    }
    let waves = analysis::detect_waves(&run.frames);
    for (i, w) in waves.iter().enumerate() {
        let (t, v) = (&run.probes.t, &run.probes.values);
        let lo = t.iter().position(|&x| x >= w.t_min - 1.0).unwrap_or(0);
        let hi = t.iter().rposition(|&x| x <= w.t_max).unwrap_or(t.len() - 1);
        let cross: Vec<String> = (0..run.probes.ids.len())
            .map(|j| {
                let s: Vec<f64> = v.iter().map(|r| r[j]).collect();
                analysis::first_crossing(t, &s, 0.0, lo, hi).map_or("-".into(), |x| format!("{x:.2}"))
            })
            .collect();
        println!("wave {i}: probe crossings {cross:?}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| amyloid_seizure::Error::io(&dir, e))?;
        run.probes.write_csv(&dir.join("probes.csv"))?;
        analysis::write_summary_csv(&dir.join("summary.csv"), &[summary])?;
    }
    Ok(())
}
