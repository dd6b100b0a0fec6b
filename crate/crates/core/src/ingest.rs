//! Raster inputs: scalar images (PGM or CSV grids), the PET-style
//! amyloid-beta step map, and anisotropic conductivity from direction fields.

use std::path::Path;

use crate::dg::{ConductivityField, SymTensor2};
use crate::error::{Error, Result};
use crate::mesh::PolyMesh;

/// Grayscale image placed in physical space. Pixel `(0, 0)` is the top-left
/// pixel of the image; `origin` is the lower-left corner of the raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRaster {
    pub width: usize,
    pub height: usize,
    /// Physical position (cm) of the lower-left corner.
    pub origin: [f64; 2],
    /// Pixel size (cm) along x and y.
    pub spacing: [f64; 2],
    /// Row-major, top row first, values in [0, 1].
    pub values: Vec<f64>,
}

impl ScalarRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Raster(format!("empty raster {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::Raster(format!(
                "raster {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Raster("non-finite raster value".into()));
        }
        Ok(Self {
            width,
            height,
            origin: [0.0, 0.0],
            spacing: [1.0 / width as f64, 1.0 / height as f64],
            values: values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    /// Raster filled by evaluating `f` at pixel centres.
    pub fn from_fn(
        width: usize,
        height: usize,
        origin: [f64; 2],
        spacing: [f64; 2],
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            let y = origin[1] + (height - row) as f64 * spacing[1] - 0.5 * spacing[1];
            for col in 0..width {
                let x = origin[0] + (col as f64 + 0.5) * spacing[0];
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)?.placed(origin, spacing)
    }

    /// Same raster with a new physical placement.
    pub fn placed(mut self, origin: [f64; 2], spacing: [f64; 2]) -> Result<Self> {
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) {
            return Err(Error::Raster(format!("raster spacing must be > 0, got {spacing:?}")));
        }
        self.origin = origin;
        self.spacing = spacing;
        Ok(self)
    }

    /// Stretch the raster over the rectangle `[lo, hi]`.
    pub fn fitted(self, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let spacing = [
            (hi[0] - lo[0]) / self.width as f64,
            (hi[1] - lo[1]) / self.height as f64,
        ];
        self.placed(lo, spacing)
    }

    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        (
            self.origin,
            [
                self.origin[0] + self.width as f64 * self.spacing[0],
                self.origin[1] + self.height as f64 * self.spacing[1],
            ],
        )
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Value of the pixel containing `p`; points on the far edges belong to
    /// the last pixel.
    pub fn sample(&self, p: [f64; 2]) -> Result<f64> {
        let (lo, hi) = self.extent();
        let tol = 1e-12 * (1.0 + hi[0].abs().max(hi[1].abs()));
        if p[0] < lo[0] - tol || p[0] > hi[0] + tol || p[1] < lo[1] - tol || p[1] > hi[1] + tol {
            return Err(Error::Raster(format!(
                "point ({}, {}) outside raster extent [{}, {}]x[{}, {}]",
                p[0], p[1], lo[0], hi[0], lo[1], hi[1]
            )));
        }
        let col = (((p[0] - lo[0]) / self.spacing[0]).floor().max(0.0) as usize).min(self.width - 1);
        let from_bottom =
            (((p[1] - lo[1]) / self.spacing[1]).floor().max(0.0) as usize).min(self.height - 1);
        Ok(self.get(col, self.height - 1 - from_bottom))
    }

    pub fn covers(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        let (a, b) = self.extent();
        a[0] <= lo[0] && a[1] <= lo[1] && b[0] >= hi[0] && b[1] >= hi[1]
    }

    /// Read a PGM (P2 or P5) or CSV grid, chosen by extension.
    pub fn read(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let located = |e: Error| match e {
            Error::Raster(m) => Error::Raster(format!("{}: {m}", path.display())),
            other => other,
        };
        match ext.as_str() {
            "csv" | "txt" => {
                let text = String::from_utf8(bytes)
                    .map_err(|_| Error::Raster(format!("{}: not UTF-8", path.display())))?;
                parse_csv_grid(&text).map_err(located)
            }
            _ => parse_pgm(&bytes).map_err(located),
        }
    }

    /// Write as PGM (P5, 16 bit) or CSV, chosen by extension.
    pub fn write(&self, path: &Path) -> Result<()> {
        let is_csv = path.extension().and_then(|e| e.to_str()) == Some("csv");
        let bytes = if is_csv {
            self.to_csv_grid().into_bytes()
        } else {
            self.to_pgm(65535)
        };
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Binary PGM with the given maximum grey value.
    pub fn to_pgm(&self, maxval: u16) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, maxval).into_bytes();
        for &v in &self.values {
            let q = (v * maxval as f64).round() as u16;
            if maxval < 256 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&q.to_be_bytes());
            }
        }
        out
    }

    pub fn to_csv_grid(&self) -> String {
        let mut s = String::new();
        for row in 0..self.height {
            let line: Vec<String> = (0..self.width).map(|c| format!("{}", self.get(c, row))).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

fn pgm_tokens(bytes: &[u8], count: usize) -> Result<(Vec<usize>, usize)> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(count);
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Raster("truncated PGM header".into()));
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap_or("?");
        tokens.push(
            tok.parse()
                .map_err(|_| Error::Raster(format!("bad PGM header token '{tok}'")))?,
        );
    }
    Ok((tokens, pos))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<ScalarRaster> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(Error::Raster("not a PGM file (expected P2 or P5 magic)".into()));
    }
    let binary = bytes[1] == b'5';
    let (hdr, mut pos) = pgm_tokens(&bytes[2..], 3)?;
    pos += 2;
    let (w, h, maxval) = (hdr[0], hdr[1], hdr[2]);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Raster(format!("PGM maxval {maxval} out of range")));
    }
    let n = w * h;
    let raw: Vec<usize> = if binary {
        // exactly one whitespace byte separates the header from the data
        pos += 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let data = bytes.get(pos..pos + n * bpp).ok_or_else(|| {
            Error::Raster(format!("PGM data truncated: need {} bytes", n * bpp))
        })?;
        if bpp == 1 {
            data.iter().map(|&b| b as usize).collect()
        } else {
            data.chunks(2).map(|c| ((c[0] as usize) << 8) | c[1] as usize).collect()
        }
    } else {
        pgm_tokens(&bytes[pos..], n)?.0
    };
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(Error::Raster(format!("PGM value {v} exceeds maxval {maxval}")));
    }
    ScalarRaster::new(w, h, raw.into_iter().map(|v| v as f64 / maxval as f64).collect())
}

/// Comma-separated grid, one image row per line, top row first.
pub fn parse_csv_grid(text: &str) -> Result<ScalarRaster> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::Raster(format!("line {}: bad value '{}'", lineno + 1, t.trim()))
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Raster(format!(
                    "line {}: expected {w} columns, got {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    ScalarRaster::new(width.unwrap_or(0), height, values)
}

/// Step map from normalised PET uptake to amyloid-beta concentration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbetaThresholds {
    pub low: f64,
    pub high: f64,
    /// Concentration (uM) for `low <= v < high`.
    pub low_value: f64,
    /// Concentration (uM) for `v >= high`.
    pub high_value: f64,
}

impl Default for AbetaThresholds {
    fn default() -> Self {
        Self {
            low: 0.65,
            high: 0.70,
            low_value: 1.0,
            high_value: 10.0,
        }
    }
}

impl AbetaThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.low < self.high) || !(self.low_value >= 0.0) || !(self.high_value >= self.low_value) {
            return Err(Error::Config(format!("invalid PET thresholds {self:?}")));
        }
        Ok(())
    }

    pub fn map(&self, v: f64) -> f64 {
        if v >= self.high {
            self.high_value
        } else if v >= self.low {
            self.low_value
        } else {
            0.0
        }
    }
}

/// Per-element concentration from the raster value at the element centroid.
pub fn pet_to_abeta(raster: &ScalarRaster, mesh: &PolyMesh, thresholds: &AbetaThresholds) -> Result<Vec<f64>> {
    thresholds.validate()?;
    mesh.centroid
        .iter()
        .map(|&c| raster.sample(c).map(|v| thresholds.map(v)))
        .collect()
}

/// `sigma_iso I + sigma_axn a a^T`, with `a = None` meaning isotropic tissue.
pub fn conductivity_tensor(sigma_iso: f64, sigma_axn: f64, a: Option<[f64; 2]>) -> SymTensor2 {
    match a {
        None => SymTensor2::isotropic(sigma_iso),
        Some([x, y]) => SymTensor2 {
            xx: sigma_iso + sigma_axn * x * x,
            xy: sigma_axn * x * y,
            yy: sigma_iso + sigma_axn * y * y,
        },
    }
}

/// Per-element tensors. Non-unit directions are normalised (with one summary
/// warning) and zero directions fall back to isotropic tissue.
pub fn build_conductivity(sigma_iso: f64, sigma_axn: f64, directions: &[Option<[f64; 2]>]) -> Result<ConductivityField> {
    if !(sigma_iso > 0.0) || !(sigma_axn >= 0.0) {
        return Err(Error::Config(format!(
            "conductivities must satisfy sigma_iso > 0, sigma_axn >= 0 (got {sigma_iso}, {sigma_axn})"
        )));
    }
    let mut renormalised = 0usize;
    let mut zeroed = 0usize;
    let tensors = directions
        .iter()
        .map(|d| {
            let a = d.and_then(|[x, y]| {
                let norm = x.hypot(y);
                if !(norm > 1e-12) {
                    zeroed += 1;
                    None
                } else {
                    if (norm - 1.0).abs() > 1e-9 {
                        renormalised += 1;
                    }
                    Some([x / norm, y / norm])
                }
            });
            conductivity_tensor(sigma_iso, sigma_axn, a)
        })
        .collect();
    if renormalised > 0 {
        log::warn!("{renormalised} fibre directions were not unit length and have been normalised");
    }
    if zeroed > 0 {
        log::warn!("{zeroed} zero fibre directions treated as isotropic");
    }
    Ok(ConductivityField { tensors })
}

/// Fibre directions from two channels holding `(cos + 1)/2` and `(sin + 1)/2`
/// of the fibre angle, restricted to elements where `white_matter >= 0.5`.
pub fn directions_from_rasters(
    mesh: &PolyMesh,
    cos_channel: &ScalarRaster,
    sin_channel: &ScalarRaster,
    white_matter: Option<&ScalarRaster>,
) -> Result<Vec<Option<[f64; 2]>>> {
    mesh.centroid
        .iter()
        .map(|&c| {
            if let Some(mask) = white_matter {
                if mask.sample(c)? < 0.5 {
                    return Ok(None);
                }
            }
            let x = 2.0 * cos_channel.sample(c)? - 1.0;
            let y = 2.0 * sin_channel.sample(c)? - 1.0;
            Ok(Some([x, y]))
        })
        .collect()
}

/// Encode a unit direction field as the two channels read by
/// [`directions_from_rasters`].
pub fn direction_channels(
    width: usize,
    height: usize,
    origin: [f64; 2],
    spacing: [f64; 2],
    angle: impl Fn(f64, f64) -> f64,
) -> Result<(ScalarRaster, ScalarRaster)> {
    let c = ScalarRaster::from_fn(width, height, origin, spacing, |x, y| 0.5 * (angle(x, y).cos() + 1.0))?;
    let s = ScalarRaster::from_fn(width, height, origin, spacing, |x, y| 0.5 * (angle(x, y).sin() + 1.0))?;
    Ok((c, s))
}
