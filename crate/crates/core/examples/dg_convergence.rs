//! Manufactured-solution convergence study of the SIPG discretisation:
//! `-Laplace u = 2 pi^2 sin(pi x) sin(pi y)` on the unit square with
//! weakly imposed Dirichlet data.
//!
//! cargo run --release --example dg_convergence -- [quad|brick]

use std::f64::consts::PI;

use amyloid_seizure::dg::{self, AssemblyOptions, Boundary, ConductivityField};
use amyloid_seizure::mesh::{self, AxisSpacing, DegreeRule, Layout, StructuredSpec};

fn main() -> amyloid_seizure::Result<()> {
    let layout = match std::env::args().nth(1).as_deref() {
        Some("brick") => Layout::Brick,
        _ => Layout::Quad,
    };
    let exact = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let grad = |x: [f64; 2]| {
        [
            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ]
    };
    let source = |x: [f64; 2]| 2.0 * PI * PI * exact(x);
    for p in 1..=3 {
        println!("p = {p}");
        let mut prev: Option<(f64, f64, f64)> = None;
        for n in [4usize, 8, 16, 32] {
            let m = mesh::generate(&StructuredSpec {
                nx: AxisSpacing::Uniform(n),
                ny: AxisSpacing::Uniform(n),
                layout,
                ..Default::default()
            })?;
            let m = mesh::assign_degrees(&m, &DegreeRule::Uniform(p))?;
            let sigma = ConductivityField::uniform(m.num_elements(), 1.0);
            let opts = AssemblyOptions {
                boundary: Boundary::Dirichlet,
                ..Default::default()
            };
            let sys = dg::assemble(&m, &sigma, opts)?;
            let b = dg::dirichlet_rhs(&sys, &m, &sigma, source, |_| 0.0);
            let u = dg::solve_stiffness(&sys, &b, 1e-13)?;
            let (l2, h1) = dg::errors(&sys, &m, &u, exact, grad)?;
            let h = m.h();
            match prev {
                Some((h0, l0, e0)) => println!(
                    "  n={n:3} dofs={:6} L2={l2:.3e} rate={:.2}  H1={h1:.3e} rate={:.2}",
                    sys.ndofs(),
                    (l0 / l2).ln() / (h0 / h).ln(),
                    (e0 / h1).ln() / (h0 / h).ln()
                ),
                None => println!("  n={n:3} dofs={:6} L2={l2:.3e}            H1={h1:.3e}", sys.ndofs()),
            }
            prev = Some((h, l2, h1));
        }
    }
    Ok(())
}
