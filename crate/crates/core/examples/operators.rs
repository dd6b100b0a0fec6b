//! Assemble the DG mass and stiffness matrices on a mixed-degree
//! anisotropic mesh, check their algebraic properties and round-trip them
//! through the coordinate dump format.
//!
//! usage: operators [out_dir]

use amyloid_seizure::dg::{self, AssemblyOptions};
use amyloid_seizure::ingest;
use amyloid_seizure::linalg;
use amyloid_seizure::mesh::{self, AxisSpacing, DegreeRule, StructuredSpec};

fn main() -> amyloid_seizure::Result<()> {
    let m = mesh::generate(&StructuredSpec {
        nx: AxisSpacing::Uniform(10),
        ny: AxisSpacing::Uniform(10),
        perturbation: 0.25,
        seed: 9,
        ..Default::default()
    })?;
    let marked = m.centroid.iter().map(|c| c[0] > c[1]).collect();
    let m = mesh::assign_degrees(&m, &DegreeRule::Indicator { base: 2, marked })?;
    let dirs: Vec<_> = m.centroid.iter().map(|c| Some([(3.0 * c[1]).cos(), (3.0 * c[1]).sin()])).collect();
    let sigma = ingest::build_conductivity(0.0735, 0.6, &dirs)?;

    for eta0 in [10.0, 0.1] {
        let sys = dg::assemble(
            &m,
            &sigma,
            AssemblyOptions {
                eta0,
                stability_probe: false,
                ..Default::default()
            },
        )?;
        let a = linalg::to_dense(&sys.stiffness);
        let asym = (&a - a.transpose()).amax();
        let one = sys.project(|_, _| 1.0);
        let a1 = (&a * linalg::dvec(&one)).amax();
        let probe = dg::stability_probe(&sys);
        println!(
            "eta0 = {eta0:5}: {} DoFs, nnz(A) = {}, max|A - A^T| = {asym:.1e}, max|A 1| = {a1:.1e}, \
             min Rayleigh {:.3e}{}",
            sys.ndofs(),
            sys.stiffness.nnz(),
            probe.min_rayleigh,
            if probe.negative_curvature { " (not coercive)" } else { "" }
        );
    }

    let sys = dg::assemble(&m, &sigma, AssemblyOptions::default())?;
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("abseiz-operators"));
    std::fs::create_dir_all(&dir).map_err(|e| amyloid_seizure::Error::io(&dir, e))?;
    for path in sys.dump(&dir, "demo")? {
        let back = linalg::read_coordinate(&path)?;
        println!("{} round trip: {} nonzeros", path.display(), back.nnz());
    }
    Ok(())
}
