//! Synthetic brain section rasters: a tissue mask, a PET-like uptake map, a
//! white-matter mask and a two-channel fibre direction field. The files are
//! written to `dir` (the `raster-brain` preset reads them from
//! `presets/brain`) and then mapped onto a masked mesh.
//!
//! usage: raster_ingest [dir]

use std::path::PathBuf;

use amyloid_seizure::ingest::{self, AbetaThresholds, ScalarRaster};
use amyloid_seizure::mesh;

const W: usize = 80;
const H: usize = 60;
const LO: [f64; 2] = [0.0, 0.0];
const HI: [f64; 2] = [4.0, 3.0];
const CENTER: [f64; 2] = [2.0, 1.5];

fn ellipse(x: f64, y: f64, a: f64, b: f64) -> f64 {
    ((x - CENTER[0]) / a).powi(2) + ((y - CENTER[1]) / b).powi(2)
}

fn bump(x: f64, y: f64, c: [f64; 2], width: f64) -> f64 {
    (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (width * width)).exp()
}

fn main() -> amyloid_seizure::Result<()> {
    env_logger::init();
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets/brain"));
    std::fs::create_dir_all(&dir).map_err(|e| amyloid_seizure::Error::io(&dir, e))?;
    let spacing = [(HI[0] - LO[0]) / W as f64, (HI[1] - LO[1]) / H as f64];

    // outer boundary with a sulcus cut in from the top
    let tissue = |x: f64, y: f64| {
        let sulcus = (x - 2.3).abs() < 0.12 && y > 2.2;
        f64::from(ellipse(x, y, 1.9, 1.4) <= 1.0 && !sulcus)
    };
    let white = |x: f64, y: f64| f64::from(ellipse(x, y, 1.25, 0.8) <= 1.0);
    let pet = |x: f64, y: f64| {
        if tissue(x, y) < 0.5 {
            return 0.0;
        }
        0.45 + 0.35 * bump(x, y, [0.9, 2.1], 0.45) + 0.24 * bump(x, y, [3.1, 0.9], 0.4)
    };
    // fibres follow the ellipses
    let angle = |x: f64, y: f64| {
        let (dx, dy) = (x - CENTER[0], y - CENTER[1]);
        (dy / (0.8 * 0.8)).atan2(dx / (1.25 * 1.25)) + std::f64::consts::FRAC_PI_2
    };

    let mask = ScalarRaster::from_fn(W, H, LO, spacing, tissue)?;
    let wm = ScalarRaster::from_fn(W, H, LO, spacing, white)?;
    let uptake = ScalarRaster::from_fn(W, H, LO, spacing, pet)?;
    let (cos, sin) = ingest::direction_channels(W, H, LO, spacing, angle)?;
    for (name, r) in [
        ("mask.pgm", &mask),
        ("white.pgm", &wm),
        ("pet.pgm", &uptake),
        ("pet.csv", &uptake),
        ("dir_cos.pgm", &cos),
        ("dir_sin.pgm", &sin),
    ] {
        r.write(&dir.join(name))?;
        println!("wrote {}", dir.join(name).display());
    }

    // read back and map onto a masked 40 x 30 grid
    let read = |n: &str| -> amyloid_seizure::Result<ScalarRaster> { ScalarRaster::read(&dir.join(n))?.fitted(LO, HI) };
    let grid = mesh::generate_structured(LO, HI, 40, 30, 0.1)?;
    let mask = read("mask.pgm")?;
    let keep: Vec<bool> = grid
        .centroid
        .iter()
        .map(|&c| mask.sample(c).map(|v| v >= 0.5))
        .collect::<amyloid_seizure::Result<_>>()?;
    let section = grid.restrict(&keep)?;
    println!("section mesh: {} of {} elements", section.num_elements(), grid.num_elements());

    let abeta = ingest::pet_to_abeta(&read("pet.csv")?, &section, &AbetaThresholds::default())?;
    for level in [0.0, 1.0, 10.0] {
        println!("[Abeta] = {level:4} uM: {} elements", abeta.iter().filter(|&&a| a == level).count());
    }
    let dirs = ingest::directions_from_rasters(&section, &read("dir_cos.pgm")?, &read("dir_sin.pgm")?, Some(&read("white.pgm")?))?;
    let field = ingest::build_conductivity(0.0735, 0.6, &dirs)?;
    let anisotropic = field
        .tensors
        .iter()
        .filter(|t| {
            let e = t.eigenvalues();
            (e[1] - e[0]).abs() > 1e-6
        })
        .count();
    println!("{anisotropic} white-matter elements with fibre tensors");
    Ok(())
}
