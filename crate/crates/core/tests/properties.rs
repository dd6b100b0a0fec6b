use amyloid_seizure::dg::SymTensor2;
use amyloid_seizure::ingest::{self, AbetaThresholds};
use amyloid_seizure::ionic::{self, baseline, IonicState};
use amyloid_seizure::mesh::{self, AxisSpacing, Layout, RegionAttrs, RegionSpec, Shape, StructuredSpec};
use amyloid_seizure::params::{AbetaParams, BaseParams};
use proptest::prelude::*;

// Na_o = 144 - 7 (Na_i - 18) stays positive for Na_i < 38.5
fn state() -> impl Strategy<Value = (f64, IonicState)> {
    (-100.0..50.0f64, 0.0..5.0f64, 2.0..20.0f64, 5.0..35.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(
        |(u, ca_i, k_o, na_i, m, h, n)| {
            (
                u,
                IonicState {
                    ca_i,
                    k_o,
                    na_i,
                    m,
                    h,
                    n,
                },
            )
        },
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

fn spec(seed: u64, perturbation: f64, nx: usize, ny: usize, brick: bool) -> StructuredSpec {
    StructuredSpec {
        x: (-0.5, 1.5),
        y: (0.0, 1.0),
        nx: AxisSpacing::Uniform(nx),
        ny: AxisSpacing::Uniform(ny),
        layout: if brick { Layout::Brick } else { Layout::Quad },
        perturbation,
        seed,
    }
}

type Entry = (&'static str, Shape, i32, RegionAttrs);

fn regions(first: &Entry, second: &Entry) -> RegionSpec {
    RegionSpec::with_default("healthy", RegionAttrs::default())
        .add(first.0, first.1.clone(), first.2, first.3)
        .add(second.0, second.1.clone(), second.2, second.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_abeta_is_the_base_model((u, y) in state()) {
        let base = BaseParams::default();
        let full = ionic::rhs(u, &y, &base, &AbetaParams::default()).unwrap();
        let (dy, f) = baseline::rhs(u, &y, &base).unwrap();
        for (a, b) in full.dydt.to_array().into_iter().zip(dy.to_array()) {
            prop_assert!(close(a, b), "{a} vs {b}");
        }
        prop_assert!(close(full.forcing, f));
        prop_assert_eq!(full.pore_flux, 0.0);
    }

    #[test]
    fn pathways_are_monotone_in_abeta(a in 0.0..50.0f64, da in 1e-3..10.0f64) {
        let base = BaseParams::default();
        let lo = AbetaParams::with_concentration(a);
        let hi = AbetaParams::with_concentration(a + da);
        prop_assert!(ionic::bk_scaling(&hi) < ionic::bk_scaling(&lo));
        prop_assert!(ionic::pmca_time_constant(&hi, &base) > ionic::pmca_time_constant(&lo, &base));
        prop_assert!(ionic::pore_flux_max(&hi) > ionic::pore_flux_max(&lo));
        prop_assert!(ionic::vgcc_shift(&hi) > ionic::vgcc_shift(&lo));
        prop_assert!(ionic::vgcc_shift(&hi) < 25.0);
        prop_assert!(ionic::fast_k_block(&hi) < ionic::fast_k_block(&lo));
    }

    #[test]
    fn pore_flux_falls_with_potential(u in -100.0..60.0f64, du in 0.1..50.0f64, a in 0.1..20.0f64) {
        let p = AbetaParams::with_concentration(a);
        let (j0, j1) = (ionic::abeta_pore_flux(u, &p), ionic::abeta_pore_flux(u + du, &p));
        prop_assert!(j1 < j0 && j0 < ionic::pore_flux_max(&p));
    }

    #[test]
    fn tensor_eigenvalues(iso in 0.01..1.0f64, axn in 0.0..2.0f64, theta in 0.0..6.3f64) {
        let t = ingest::conductivity_tensor(iso, axn, Some([theta.cos(), theta.sin()]));
        let e = t.eigenvalues();
        prop_assert!((e[0] - iso).abs() < 1e-12 && (e[1] - iso - axn).abs() < 1e-12);
        prop_assert!(t.is_valid());
        prop_assert_eq!(ingest::conductivity_tensor(iso, axn, None), SymTensor2::isotropic(iso));
    }

    #[test]
    fn generated_meshes_are_valid(
        seed in 0u64..1000,
        perturbation in 0.0..0.3f64,
        nx in 2usize..12,
        ny in 2usize..12,
        brick: bool,
    ) {
        let m = mesh::generate(&spec(seed, perturbation, nx, ny, brick)).unwrap();
        m.validate().unwrap();
        prop_assert!((m.total_area() - 2.0).abs() < 1e-12);
        prop_assert!(m.area.iter().all(|&a| a > 0.0));
        let text = mesh::mesh_to_string(&m);
        let back = mesh::parse_mesh(&text, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back.num_elements(), m.num_elements());
        prop_assert_eq!(back.vertices, m.vertices);
    }

    #[test]
    fn tagging_ignores_declaration_order(cx in 0.0..1.0f64, cy in 0.0..1.0f64, r in 0.05..0.5f64, seed in 0u64..50) {
        let m = mesh::generate(&spec(seed, 0.1, 10, 6, false)).unwrap();
        let a: Entry = (
            "a",
            Shape::Circle { center: [cx, cy], radius: r },
            2,
            RegionAttrs { abeta: 10.0, ..Default::default() },
        );
        let b: Entry = (
            "b",
            Shape::Circle { center: [1.0 - cx, cy], radius: r },
            1,
            RegionAttrs { abeta: 1.0, ..Default::default() },
        );
        let t1 = mesh::tag_regions(&m, &regions(&a, &b)).unwrap();
        let t2 = mesh::tag_regions(&m, &regions(&b, &a)).unwrap();
        for k in 0..m.num_elements() {
            prop_assert_eq!(&t1.region_names[t1.region[k]], &t2.region_names[t2.region[k]]);
        }
    }

    #[test]
    fn pet_mapping_is_monotone_and_idempotent(v in 0.0..1.0f64, dv in 0.0..0.5f64) {
        let th = AbetaThresholds::default();
        prop_assert!(th.map(v + dv) >= th.map(v));
        prop_assert!([0.0, th.low_value, th.high_value].contains(&th.map(v)));
        // re-quantising the threshold value of a tier gives the same tier
        let rep = |c: f64| if c == th.high_value { th.high } else if c == th.low_value { th.low } else { 0.0 };
        prop_assert_eq!(th.map(rep(th.map(v))), th.map(v));
    }
}
