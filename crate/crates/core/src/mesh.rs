//! Polygonal meshes: structured generation with jitter, region tagging,
//! polynomial-degree maps and a plain-text file format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ScalarRaster;

pub type Point = [f64; 2];

/// Edge shared by one (boundary) or two (interior) elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Endpoints, ordered counterclockwise with respect to `plus`.
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    /// Unit normal pointing out of `plus`.
    pub normal: Point,
    pub length: f64,
    pub midpoint: Point,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.minus.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex loops.
    pub elements: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    /// Per element: `(face index, element is the plus side)`.
    pub element_faces: Vec<Vec<(usize, bool)>>,
    pub area: Vec<f64>,
    pub centroid: Vec<Point>,
    /// Largest vertex-to-vertex distance.
    pub diameter: Vec<f64>,
    pub region: Vec<usize>,
    pub region_names: Vec<String>,
    pub degree: Vec<usize>,
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

pub fn polygon_centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
    // shift to the first vertex to limit cancellation
    let o = poly[0];
    for i in 0..n {
        let p = [poly[i][0] - o[0], poly[i][1] - o[1]];
        let q = [poly[(i + 1) % n][0] - o[0], poly[(i + 1) % n][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)]
}

pub fn polygon_diameter(poly: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..poly.len() {
        for j in i + 1..poly.len() {
            d = d.max((poly[i][0] - poly[j][0]).hypot(poly[i][1] - poly[j][1]));
        }
    }
    d
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Simple polygon test: distinct vertices, no two non-adjacent edges touching.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if poly[i] == poly[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

impl PolyMesh {
    /// Build topology and geometry from vertex loops. Clockwise loops are an
    /// error; every edge may be shared by at most two elements with opposite
    /// orientation.
    pub fn from_polygons(vertices: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        let mut area = Vec::with_capacity(elements.len());
        let mut centroid = Vec::with_capacity(elements.len());
        let mut diameter = Vec::with_capacity(elements.len());
        for (k, el) in elements.iter().enumerate() {
            if el.len() < 3 {
                return Err(Error::Mesh(format!("element {k} has {} vertices", el.len())));
            }
            if let Some(&v) = el.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("element {k} references missing vertex {v}")));
            }
            let poly: Vec<Point> = el.iter().map(|&v| vertices[v]).collect();
            if !is_simple(&poly) {
                return Err(Error::Mesh(format!("element {k} is not a simple polygon")));
            }
            let a = signed_area(&poly);
            if !(a > 0.0) {
                return Err(Error::Mesh(format!("element {k} is not counterclockwise (area {a})")));
            }
            area.push(a);
            centroid.push(polygon_centroid(&poly));
            diameter.push(polygon_diameter(&poly));
        }

        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut element_faces = vec![Vec::new(); elements.len()];
        for (k, el) in elements.iter().enumerate() {
            for i in 0..el.len() {
                let (a, b) = (el[i], el[(i + 1) % el.len()]);
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                        let length = dx.hypot(dy);
                        edge_map.insert(key, faces.len());
                        element_faces[k].push((faces.len(), true));
                        faces.push(Face {
                            vertices: [a, b],
                            plus: k,
                            minus: None,
                            normal: [dy / length, -dx / length],
                            length,
                            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                        });
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.minus.is_some() {
                            return Err(Error::Mesh(format!(
                                "edge ({a}, {b}) is shared by more than two elements"
                            )));
                        }
                        if face.vertices != [b, a] {
                            return Err(Error::Mesh(format!(
                                "elements {} and {k} traverse edge ({a}, {b}) in the same direction",
                                face.plus
                            )));
                        }
                        face.minus = Some(k);
                        element_faces[k].push((f, false));
                    }
                }
            }
        }
        let n = elements.len();
        let mesh = Self {
            vertices,
            elements,
            faces,
            element_faces,
            area,
            centroid,
            diameter,
            region: vec![0; n],
            region_names: vec!["domain".to_string()],
            degree: vec![1; n],
        };
        Ok(mesh)
    }

    /// Sub-mesh of the elements with `keep[k]`, vertices renumbered.
    /// Regions and degrees are carried over.
    pub fn restrict(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.num_elements() {
            return Err(Error::Mesh(format!(
                "mask has {} entries for {} elements",
                keep.len(),
                self.num_elements()
            )));
        }
        let mut map = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut elements = Vec::new();
        let mut kept = Vec::new();
        for (k, el) in self.elements.iter().enumerate().filter(|(k, _)| keep[*k]) {
            let loop_: Vec<usize> = el
                .iter()
                .map(|&v| {
                    if map[v] == usize::MAX {
                        map[v] = vertices.len();
                        vertices.push(self.vertices[v]);
                    }
                    map[v]
                })
                .collect();
            elements.push(loop_);
            kept.push(k);
        }
        let mut m = Self::from_polygons(vertices, elements)?;
        m.region = kept.iter().map(|&k| self.region[k]).collect();
        m.region_names = self.region_names.clone();
        m.degree = kept.iter().map(|&k| self.degree[k]).collect();
        Ok(m)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn polygon(&self, k: usize) -> Vec<Point> {
        self.elements[k].iter().map(|&v| self.vertices[v]).collect()
    }

    /// Mesh size `h = max h_K`.
    pub fn h(&self) -> f64 {
        self.diameter.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Area enclosed by the boundary faces alone.
    pub fn domain_area(&self) -> f64 {
        let mut a = 0.0;
        for f in self.faces.iter().filter(|f| !f.is_interior()) {
            let p = self.vertices[f.vertices[0]];
            let q = self.vertices[f.vertices[1]];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.is_interior())
    }

    /// Neighbours across interior faces.
    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_faces[k].iter().filter_map(move |&(f, plus)| {
            let face = &self.faces[f];
            if plus {
                face.minus
            } else {
                Some(face.plus)
            }
        })
    }

    /// Full validity suite: simple counterclockwise elements, two-sided
    /// interior faces, unit normals, area closure and at least degree 1.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.num_elements() {
            let poly = self.polygon(k);
            if !is_simple(&poly) || !(signed_area(&poly) > 0.0) {
                return Err(Error::Mesh(format!("element {k} is not a simple counterclockwise polygon")));
            }
        }
        let mut uses = vec![0usize; self.faces.len()];
        for (k, list) in self.element_faces.iter().enumerate() {
            for &(f, plus) in list {
                uses[f] += 1;
                let face = &self.faces[f];
                let owner = if plus { Some(face.plus) } else { face.minus };
                if owner != Some(k) {
                    return Err(Error::Mesh(format!("face {f} does not reference element {k}")));
                }
            }
        }
        for (f, face) in self.faces.iter().enumerate() {
            let expected = if face.is_interior() { 2 } else { 1 };
            if uses[f] != expected {
                return Err(Error::Mesh(format!("face {f} referenced {} times", uses[f])));
            }
            if (face.normal[0].hypot(face.normal[1]) - 1.0).abs() > 1e-12 {
                return Err(Error::Mesh(format!("face {f} normal not unit length")));
            }
        }
        let total = self.total_area();
        let domain = self.domain_area();
        if (total - domain).abs() > 1e-10 * domain.abs() {
            return Err(Error::Mesh(format!(
                "element areas sum to {total}, boundary encloses {domain}"
            )));
        }
        if self.degree.len() != self.num_elements() || self.degree.iter().any(|&p| p == 0) {
            return Err(Error::Mesh("every element needs a polynomial degree >= 1".into()));
        }
        if self.region.len() != self.num_elements() || self.region.iter().any(|&r| r >= self.region_names.len()) {
            return Err(Error::Mesh("region tags out of range".into()));
        }
        Ok(())
    }

    /// Total number of degrees of freedom `sum_K dim P^{p_K}`.
    pub fn dof_count(&self) -> usize {
        self.degree.iter().map(|&p| dim_p(p)).sum()
    }

    pub fn region_index(&self, name: &str) -> Option<usize> {
        self.region_names.iter().position(|n| n == name)
    }

    /// Number of elements per region name.
    pub fn region_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> =
            self.region_names.iter().map(|n| (n.clone(), 0)).collect();
        for &r in &self.region {
            *counts.get_mut(&self.region_names[r]).unwrap() += 1;
        }
        counts
    }

    /// Elements whose centroid lies closest to `p`.
    pub fn nearest_element(&self, p: Point) -> usize {
        self.locate(p).unwrap_or_else(|| {
            let mut best = (f64::INFINITY, 0);
            for (k, c) in self.centroid.iter().enumerate() {
                let d = (c[0] - p[0]).hypot(c[1] - p[1]);
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1
        })
    }

    /// Element containing `p` (boundary points resolve to the lowest index).
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.num_elements()).find(|&k| point_in_polygon(&self.polygon(k), p))
    }
}

/// Winding test, closed polygon (points on edges count as inside).
pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if orient(a, b, p) == 0.0 && on_segment(a, b, p) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Dimension of the complete polynomial space of degree `p` in two variables.
pub fn dim_p(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Cell distribution along one axis: either `n` equal cells or consecutive
/// segments given as `(segment end, cells)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpacing {
    Uniform(usize),
    Graded(Vec<(f64, usize)>),
}

impl AxisSpacing {
    pub fn nodes(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if !(hi > lo) {
            return Err(Error::Mesh(format!("empty interval [{lo}, {hi}]")));
        }
        match self {
            AxisSpacing::Uniform(n) => {
                if *n == 0 {
                    return Err(Error::Mesh("need at least one cell per axis".into()));
                }
                Ok((0..=*n).map(|i| lo + (hi - lo) * i as f64 / *n as f64).collect())
            }
            AxisSpacing::Graded(segs) => {
                if segs.is_empty() {
                    return Err(Error::Mesh("graded axis needs at least one segment".into()));
                }
                let mut nodes = vec![lo];
                let mut start = lo;
                for (i, &(end, cells)) in segs.iter().enumerate() {
                    let end = if i + 1 == segs.len() { hi } else { end };
                    if cells == 0 || !(end > start) || end > hi {
                        return Err(Error::Mesh(format!(
                            "bad graded segment {i}: end {end}, {cells} cells after {start}"
                        )));
                    }
                    for c in 1..=cells {
                        nodes.push(if c == cells { end } else { start + (end - start) * c as f64 / cells as f64 });
                    }
                    start = end;
                }
                if (segs.last().unwrap().0 - hi).abs() > 1e-9 * (1.0 + hi.abs()) {
                    return Err(Error::Mesh(format!(
                        "graded axis ends at {} but the domain ends at {hi}",
                        segs.last().unwrap().0
                    )));
                }
                Ok(nodes)
            }
        }
    }

    pub fn cells(&self) -> usize {
        match self {
            AxisSpacing::Uniform(n) => *n,
            AxisSpacing::Graded(s) => s.iter().map(|x| x.1).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Quadrilateral grid.
    #[default]
    Quad,
    /// Odd rows shifted by half a cell; cells become pentagons/hexagons.
    Brick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructuredSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: AxisSpacing,
    pub ny: AxisSpacing,
    pub layout: Layout,
    /// Interior-vertex jitter as a fraction of the local spacing, in [0, 0.3).
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for StructuredSpec {
    fn default() -> Self {
        Self {
            x: (0.0, 1.0),
            y: (0.0, 1.0),
            nx: AxisSpacing::Uniform(10),
            ny: AxisSpacing::Uniform(10),
            layout: Layout::Quad,
            perturbation: 0.0,
            seed: 0,
        }
    }
}

/// `nx` by `ny` uniform grid on `[x0, x1] x [y0, y1]`.
pub fn generate_structured(lo: Point, hi: Point, nx: usize, ny: usize, perturbation: f64) -> Result<PolyMesh> {
    generate(&StructuredSpec {
        x: (lo[0], hi[0]),
        y: (lo[1], hi[1]),
        nx: AxisSpacing::Uniform(nx),
        ny: AxisSpacing::Uniform(ny),
        perturbation,
        ..StructuredSpec::default()
    })
}

pub fn generate(spec: &StructuredSpec) -> Result<PolyMesh> {
    if !(0.0..0.3).contains(&spec.perturbation) {
        return Err(Error::Mesh(format!(
            "perturbation must lie in [0, 0.3), got {}",
            spec.perturbation
        )));
    }
    let xs = spec.nx.nodes(spec.x.0, spec.x.1)?;
    let ys = spec.ny.nodes(spec.y.0, spec.y.1)?;
    let mut jitter = spec.perturbation;
    let mut last_err = None;
    for _attempt in 0..4 {
        match build_grid(&xs, &ys, spec.layout, jitter, spec.seed) {
            Ok(mesh) => match mesh.validate() {
                Ok(()) => return Ok(mesh),
                Err(e) => last_err = Some(e),
            },
            Err(e) => last_err = Some(e),
        }
        if jitter == 0.0 {
            break;
        }
        log::warn!("degenerate element at jitter {jitter}; regenerating with {}", jitter / 2.0);
        jitter /= 2.0;
    }
    Err(last_err.unwrap())
}

fn build_grid(xs: &[f64], ys: &[f64], layout: Layout, jitter: f64, seed: u64) -> Result<PolyMesh> {
    let nrows = ys.len() - 1;
    // column breaks per row
    let mids: Vec<f64> = xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let shifted: Vec<f64> = std::iter::once(xs[0])
        .chain(mids.iter().cloned())
        .chain(std::iter::once(*xs.last().unwrap()))
        .collect();
    let row_breaks = |r: usize| -> &[f64] {
        if layout == Layout::Brick && r % 2 == 1 && xs.len() > 2 {
            &shifted
        } else {
            xs
        }
    };
    // vertices of each horizontal line: union of breaks of the rows it bounds
    let mut line_x: Vec<Vec<f64>> = Vec::with_capacity(ys.len());
    for j in 0..ys.len() {
        let mut v: Vec<f64> = Vec::new();
        if j > 0 {
            v.extend_from_slice(row_breaks(j - 1));
        }
        if j < nrows {
            v.extend_from_slice(row_breaks(j));
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        line_x.push(v);
    }
    let mut vertices = Vec::new();
    let mut line_offset = Vec::with_capacity(ys.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (j, xsj) in line_x.iter().enumerate() {
        line_offset.push(vertices.len());
        for (i, &x) in xsj.iter().enumerate() {
            let mut p = [x, ys[j]];
            let interior = j > 0 && j + 1 < ys.len() && i > 0 && i + 1 < xsj.len();
            if interior && jitter > 0.0 {
                let dx = (x - xsj[i - 1]).min(xsj[i + 1] - x);
                let dy = (ys[j] - ys[j - 1]).min(ys[j + 1] - ys[j]);
                p[0] += jitter * dx * rng.gen_range(-1.0..1.0);
                p[1] += jitter * dy * rng.gen_range(-1.0..1.0);
            }
            vertices.push(p);
        }
    }
    let index_of = |j: usize, x: f64| -> usize {
        let pos = line_x[j]
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
            .expect("break present on line");
        line_offset[j] + pos
    };
    let mut elements = Vec::new();
    for r in 0..nrows {
        let breaks = row_breaks(r);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut loop_ = Vec::new();
            for &x in line_x[r].iter().filter(|&&x| x >= a && x <= b) {
                loop_.push(index_of(r, x));
            }
            for &x in line_x[r + 1].iter().rev().filter(|&&x| x >= a && x <= b) {
                loop_.push(index_of(r + 1, x));
            }
            elements.push(loop_);
        }
    }
    PolyMesh::from_polygons(vertices, elements)
}

/// Point predicate used to define regions.
#[derive(Debug, Clone)]
pub enum Shape {
    /// Closed disc.
    Circle { center: Point, radius: f64 },
    /// `normal . x <= offset`.
    HalfPlane { normal: Point, offset: f64 },
    Rect { lo: Point, hi: Point },
    /// Raster pixels with value `>= threshold`.
    Mask { raster: Arc<ScalarRaster>, threshold: f64 },
    /// Intersection of shapes.
    All(Vec<Shape>),
}

impl Shape {
    pub fn contains(&self, p: Point) -> Result<bool> {
        Ok(match self {
            Shape::Circle { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy <= radius * radius * (1.0 + 1e-12)
            }
            Shape::HalfPlane { normal, offset } => normal[0] * p[0] + normal[1] * p[1] <= *offset,
            Shape::Rect { lo, hi } => p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1],
            Shape::Mask { raster, threshold } => raster.sample(p)? >= *threshold,
            Shape::All(parts) => {
                for s in parts {
                    if !s.contains(p)? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }
}

/// Per-region data consumed by the tissue solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionAttrs {
    /// Amyloid-beta concentration (uM).
    pub abeta: f64,
    /// Initial transmembrane potential (mV).
    pub u0: f64,
    /// Isotropic conductivity override (S/m).
    pub sigma: Option<f64>,
    /// Polynomial degree override.
    pub degree: Option<usize>,
}

impl Default for RegionAttrs {
    fn default() -> Self {
        Self {
            abeta: 0.0,
            u0: -67.0,
            sigma: None,
            degree: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Region {
    pub name: String,
    pub shape: Shape,
    /// Larger wins; ties go to the region listed first.
    pub priority: i32,
    pub attrs: RegionAttrs,
}

#[derive(Debug, Clone, Default)]
pub struct RegionSpec {
    pub regions: Vec<Region>,
    /// Name and attributes of elements matching no region.
    pub default: Option<(String, RegionAttrs)>,
}

impl RegionSpec {
    pub fn with_default(name: &str, attrs: RegionAttrs) -> Self {
        Self {
            regions: Vec::new(),
            default: Some((name.to_string(), attrs)),
        }
    }

    pub fn add(mut self, name: &str, shape: Shape, priority: i32, attrs: RegionAttrs) -> Self {
        self.regions.push(Region {
            name: name.to_string(),
            shape,
            priority,
            attrs,
        });
        self
    }

    /// Region names in tag order: default first, then listed regions.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        if let Some((n, _)) = &self.default {
            names.push(n.clone());
        }
        for r in &self.regions {
            if !names.contains(&r.name) {
                names.push(r.name.clone());
            }
        }
        names
    }

    pub fn attrs(&self, name: &str) -> Option<RegionAttrs> {
        if let Some((n, a)) = &self.default {
            if n == name {
                return Some(*a);
            }
        }
        self.regions.iter().find(|r| r.name == name).map(|r| r.attrs)
    }

    /// Name of the region owning point `p`.
    pub fn resolve(&self, p: Point) -> Result<Option<&str>> {
        let mut best: Option<&Region> = None;
        for r in &self.regions {
            if r.shape.contains(p)? && best.map_or(true, |b| r.priority > b.priority) {
                best = Some(r);
            }
        }
        Ok(match best {
            Some(r) => Some(r.name.as_str()),
            None => self.default.as_ref().map(|d| d.0.as_str()),
        })
    }
}

/// Tag every element by the region containing its centroid.
pub fn tag_regions(mesh: &PolyMesh, spec: &RegionSpec) -> Result<PolyMesh> {
    let names = spec.names();
    let mut out = mesh.clone();
    for k in 0..mesh.num_elements() {
        let c = mesh.centroid[k];
        let name = spec.resolve(c)?.ok_or_else(|| {
            Error::Mesh(format!(
                "element {k} (centroid {:.4}, {:.4}) matches no region and no default region is set",
                c[0], c[1]
            ))
        })?;
        out.region[k] = names.iter().position(|n| n == name).unwrap();
    }
    out.region_names = names;
    for (name, count) in out.region_counts() {
        log::info!("region {name}: {count} elements");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeRule {
    Uniform(usize),
    /// Degree by region name, `default` for unlisted regions.
    PerRegion { map: BTreeMap<String, usize>, default: usize },
    /// `base + 1` on marked elements, `base` elsewhere.
    Indicator { base: usize, marked: Vec<bool> },
}

pub fn assign_degrees(mesh: &PolyMesh, rule: &DegreeRule) -> Result<PolyMesh> {
    let mut out = mesh.clone();
    match rule {
        DegreeRule::Uniform(p) => out.degree = vec![*p; mesh.num_elements()],
        DegreeRule::PerRegion { map, default } => {
            for k in 0..mesh.num_elements() {
                let name = &mesh.region_names[mesh.region[k]];
                out.degree[k] = map.get(name).copied().unwrap_or(*default);
            }
        }
        DegreeRule::Indicator { base, marked } => {
            if marked.len() != mesh.num_elements() {
                return Err(Error::Mesh(format!(
                    "indicator has {} entries for {} elements",
                    marked.len(),
                    mesh.num_elements()
                )));
            }
            for k in 0..mesh.num_elements() {
                out.degree[k] = base + marked[k] as usize;
            }
        }
    }
    if out.degree.iter().any(|&p| p == 0) {
        return Err(Error::Mesh("polynomial degree must be >= 1".into()));
    }
    log::info!("degrees assigned: {} DoFs", out.dof_count());
    Ok(out)
}

/// Elements whose vertices see both signs of `level_set`.
pub fn front_crossing(mesh: &PolyMesh, level_set: impl Fn(Point) -> f64) -> Vec<bool> {
    mesh.elements
        .iter()
        .map(|el| {
            let vals: Vec<f64> = el.iter().map(|&v| level_set(mesh.vertices[v])).collect();
            vals.iter().any(|&v| v < 0.0) && vals.iter().any(|&v| v >= 0.0)
        })
        .collect()
}

/// Serialise in the plain-text mesh format (see `docs/mesh_format.md`).
pub fn write_mesh(mesh: &PolyMesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn mesh_to_string(mesh: &PolyMesh) -> String {
    let mut s = String::new();
    writeln!(s, "polymesh 1").unwrap();
    writeln!(s, "vertices {}", mesh.vertices.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(s, "{:?} {:?}", v[0], v[1]).unwrap();
    }
    writeln!(s, "elements {}", mesh.num_elements()).unwrap();
    for k in 0..mesh.num_elements() {
        let el = &mesh.elements[k];
        let ids: Vec<String> = el.iter().map(|v| v.to_string()).collect();
        writeln!(s, "{} {} region={} p={}", el.len(), ids.join(" "), mesh.region[k], mesh.degree[k]).unwrap();
    }
    writeln!(s, "regions {}", mesh.region_names.len()).unwrap();
    for (i, n) in mesh.region_names.iter().enumerate() {
        writeln!(s, "{i} {n}").unwrap();
    }
    s
}

pub fn read_mesh(path: &Path) -> Result<PolyMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<PolyMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")))
    };
    let header = |(line, l): (usize, &str), key: &str| -> Result<usize> {
        let mut t = l.split_whitespace();
        if t.next() != Some(key) {
            return Err(err(line, format!("expected '{key} <count>'")));
        }
        t.next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| err(line, format!("bad {key} count")))
    };
    let (line, magic) = next("header")?;
    if magic != "polymesh 1" {
        return Err(err(line, format!("expected 'polymesh 1', found '{magic}'")));
    }
    let nv = header(next("vertices")?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = next("vertex")?;
        let c: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(line, "bad vertex coordinate".into()))?;
        if c.len() != 2 {
            return Err(err(line, format!("vertex needs 2 coordinates, got {}", c.len())));
        }
        vertices.push([c[0], c[1]]);
    }
    let ne = header(next("elements")?, "elements")?;
    let mut elements = Vec::with_capacity(ne);
    let mut region = Vec::with_capacity(ne);
    let mut degree = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, l) = next("element")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let k: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(line, "bad vertex count".into()))?;
        if toks.len() < 1 + k {
            return Err(err(line, format!("element lists fewer than {k} vertices")));
        }
        let ids: Vec<usize> = toks[1..1 + k]
            .iter()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(line, "bad vertex index".into()))?;
        let (mut r, mut p) = (0usize, 1usize);
        for t in &toks[1 + k..] {
            let parsed = if let Some(v) = t.strip_prefix("region=") {
                v.parse().map(|v| r = v)
            } else if let Some(v) = t.strip_prefix("p=") {
                v.parse().map(|v| p = v)
            } else {
                return Err(err(line, format!("unknown element attribute '{t}'")));
            };
            parsed.map_err(|_| err(line, format!("bad attribute value '{t}'")))?;
        }
        elements.push(ids);
        region.push(r);
        degree.push(p);
    }
    let mut names = vec!["domain".to_string()];
    if let Some(h) = lines.next() {
        let nr = header(h, "regions")?;
        names = Vec::with_capacity(nr);
        for i in 0..nr {
            let (line, l) = lines
                .next()
                .ok_or_else(|| err(0, "unexpected end of file in regions".into()))?;
            let mut t = l.split_whitespace();
            if t.next().and_then(|v| v.parse::<usize>().ok()) != Some(i) {
                return Err(err(line, format!("expected region id {i}")));
            }
            names.push(t.next().ok_or_else(|| err(line, "missing region name".into()))?.to_string());
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(err(line, "trailing content".into()));
    }
    let mut mesh = PolyMesh::from_polygons(vertices, elements).map_err(|e| match e {
        Error::Mesh(m) => Error::Mesh(format!("{}: {m}", path.display())),
        other => other,
    })?;
    mesh.region = region;
    mesh.region_names = names;
    mesh.degree = degree;
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_squares() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 2, 2, 0.0).unwrap();
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.interior_faces().count(), 4);
        for f in m.interior_faces() {
            assert!((f.length - 0.5).abs() < 1e-15);
        }
        assert!(m.area.iter().all(|a| (a - 0.25).abs() < 1e-15));
        assert!((m.h() - 0.5f64.hypot(0.5)).abs() < 1e-15);
    }

    #[test]
    fn brick_layout_makes_polygons() {
        let m = generate(&StructuredSpec {
            nx: AxisSpacing::Uniform(4),
            ny: AxisSpacing::Uniform(3),
            layout: Layout::Brick,
            ..Default::default()
        })
        .unwrap();
        // even rows: 4 cells; odd row: 3 full + 2 half cells
        assert_eq!(m.num_elements(), 4 + 5 + 4);
        assert!(m.elements.iter().any(|e| e.len() == 6));
        assert!((m.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn graded_axis_nodes() {
        let a = AxisSpacing::Graded(vec![(0.8, 4), (1.0, 4)]);
        let n = a.nodes(0.0, 1.0).unwrap();
        assert_eq!(n.len(), 9);
        assert!((n[4] - 0.8).abs() < 1e-15 && n[8] == 1.0);
        assert!(AxisSpacing::Graded(vec![(0.8, 4), (0.9, 4)]).nodes(0.0, 1.0).is_err());
        assert!(AxisSpacing::Uniform(0).nodes(0.0, 1.0).is_err());
    }

    #[test]
    fn bad_polygons_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(PolyMesh::from_polygons(v.clone(), vec![vec![0, 3, 2, 1]]).is_err());
        assert!(PolyMesh::from_polygons(v.clone(), vec![vec![0, 2, 1, 3]]).is_err());
        assert!(PolyMesh::from_polygons(v, vec![vec![0, 1, 7]]).is_err());
    }

    #[test]
    fn perturbation_range_checked() {
        assert!(generate_structured([0.0, 0.0], [1.0, 1.0], 2, 2, 0.3).is_err());
        assert!(generate_structured([0.0, 0.0], [1.0, 1.0], 2, 2, -0.1).is_err());
    }

    #[test]
    fn tagging_requires_default() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 4, 4, 0.0).unwrap();
        let spec = RegionSpec::default().add(
            "lesion",
            Shape::Circle { center: [1.0, 1.0], radius: 0.5 },
            1,
            RegionAttrs::default(),
        );
        assert!(tag_regions(&m, &spec).is_err());
        let spec = RegionSpec { default: Some(("healthy".into(), RegionAttrs::default())), ..spec };
        let t = tag_regions(&m, &spec).unwrap();
        let c = t.region_counts();
        assert_eq!(c["lesion"], 3);
        assert_eq!(c["healthy"], 13);
    }

    #[test]
    fn restriction_keeps_attributes() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 4, 4, 0.0).unwrap();
        let spec = RegionSpec::with_default("healthy", RegionAttrs::default()).add(
            "lesion",
            Shape::Circle { center: [1.0, 1.0], radius: 0.5 },
            1,
            RegionAttrs::default(),
        );
        let t = tag_regions(&m, &spec).unwrap();
        let keep: Vec<bool> = t.centroid.iter().map(|c| c[0] > 0.5).collect();
        let r = t.restrict(&keep).unwrap();
        assert_eq!(r.num_elements(), 8);
        assert_eq!(r.vertices.len(), 15);
        assert_eq!(r.region_counts()["lesion"], 3);
        assert!((r.total_area() - 0.5).abs() < 1e-14);
        assert!(t.restrict(&[true]).is_err());
    }

    #[test]
    fn priority_breaks_overlaps() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 2, 2, 0.0).unwrap();
        let all = Shape::Rect { lo: [0.0, 0.0], hi: [1.0, 1.0] };
        let spec = RegionSpec::with_default("d", RegionAttrs::default())
            .add("low", all.clone(), 0, RegionAttrs::default())
            .add("high", all, 5, RegionAttrs::default());
        let t = tag_regions(&m, &spec).unwrap();
        assert_eq!(t.region_counts()["high"], 4);
    }

    #[test]
    fn degrees_and_dofs() {
        let m = generate_structured([0.0, 0.0], [1.0, 1.0], 3, 3, 0.0).unwrap();
        let m2 = assign_degrees(&m, &DegreeRule::Uniform(2)).unwrap();
        assert_eq!(m2.dof_count(), 9 * 6);
        let marked = front_crossing(&m, |p| p[0] - 0.5);
        assert_eq!(marked.iter().filter(|&&b| b).count(), 3);
        let m3 = assign_degrees(&m, &DegreeRule::Indicator { base: 1, marked }).unwrap();
        assert_eq!(m3.dof_count(), 6 * 3 + 3 * 6);
        assert!(assign_degrees(&m, &DegreeRule::Uniform(0)).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let m = generate(&StructuredSpec {
            nx: AxisSpacing::Uniform(3),
            ny: AxisSpacing::Uniform(2),
            layout: Layout::Brick,
            perturbation: 0.2,
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let back = parse_mesh(&mesh_to_string(&m), Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "polymesh 1\nvertices 3\n0 0\n1 0\n0 1\nelements 1\n3 0 1 x\n";
        match parse_mesh(text, Path::new("bad.mesh")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }
}
