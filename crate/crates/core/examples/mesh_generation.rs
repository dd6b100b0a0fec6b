//! Structured polygonal meshes: uniform and graded spacing, brick layout,
//! vertex jitter, region tagging, a degree map and the text mesh format.
//!
//! usage: mesh_generation [out.txt]

use amyloid_seizure::mesh::{self, AxisSpacing, DegreeRule, Layout, RegionAttrs, RegionSpec, Shape, StructuredSpec};

fn main() -> amyloid_seizure::Result<()> {
    let quad = mesh::generate(&StructuredSpec {
        nx: AxisSpacing::Uniform(12),
        ny: AxisSpacing::Uniform(12),
        perturbation: 0.2,
        seed: 1,
        ..Default::default()
    })?;
    let brick = mesh::generate(&StructuredSpec {
        x: (0.0, 2.0),
        nx: AxisSpacing::Graded(vec![(1.5, 6), (2.0, 12)]),
        ny: AxisSpacing::Uniform(8),
        layout: Layout::Brick,
        ..Default::default()
    })?;
    for (name, m) in [("quad", &quad), ("brick", &brick)] {
        let sides: Vec<usize> = m.elements.iter().map(Vec::len).collect();
        println!(
            "{name}: {} elements, {} faces ({} interior), h = {:.3}, area {:.6}, {}..{} sides",
            m.num_elements(),
            m.faces.len(),
            m.interior_faces().count(),
            m.h(),
            m.total_area(),
            sides.iter().min().unwrap(),
            sides.iter().max().unwrap()
        );
    }

    let spec = RegionSpec::with_default("healthy", RegionAttrs::default())
        .add(
            "focus",
            Shape::Circle {
                center: [0.2, 0.2],
                radius: 0.25,
            },
            1,
            RegionAttrs {
                u0: -50.0,
                ..Default::default()
            },
        )
        .add(
            "lesion",
            // x >= 0.7
            Shape::HalfPlane {
                normal: [-1.0, 0.0],
                offset: -0.7,
            },
            2,
            RegionAttrs {
                abeta: 5.0,
                ..Default::default()
            },
        );
    let tagged = mesh::tag_regions(&quad, &spec)?;
    println!("regions: {:?}", tagged.region_counts());

    // one degree higher where a front would be
    let front = mesh::front_crossing(&tagged, |p| p[0] + p[1] - 0.8);
    let p = mesh::assign_degrees(&tagged, &DegreeRule::Indicator { base: 1, marked: front })?;
    println!("{} DoFs with {} elements at p = 2", p.dof_count(), p.degree.iter().filter(|&&d| d == 2).count());

    let text = mesh::mesh_to_string(&p);
    let back = mesh::parse_mesh(&text, std::path::Path::new("<memory>"))?;
    assert_eq!(back.num_elements(), p.num_elements());
    if let Some(path) = std::env::args().nth(1) {
        mesh::write_mesh(&p, std::path::Path::new(&path))?;
        println!("wrote {path}");
    }
    Ok(())
}
