//! Wave detection, activation-time maps and scenario summaries computed
//! from cell-averaged frames.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Point, PolyMesh, Shape};
use crate::solver::CellFrame;

/// Default activation threshold (mV).
pub const U_CR: f64 = 0.0;

/// A maximal run of frames in which some cell has `u > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    /// First and last frame index with a positive cell.
    pub first_frame: usize,
    pub last_frame: usize,
    pub t_min: f64,
    pub t_max: f64,
}

/// Activation times of one wave.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub wave: usize,
    /// Absolute time (ms) of the earliest crossing; `that` is relative to it.
    pub t_min: f64,
    pub u_cr: f64,
    /// Per-element activation time (ms); NaN where the element never
    /// reached `u_cr` inside the window.
    pub that: Vec<f64>,
}

impl ActivationMap {
    /// Element with the smallest activation time (lowest index on ties).
    pub fn origin(&self) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (k, &t) in self.that.iter().enumerate() {
            if t.is_finite() && best.map_or(true, |(b, _)| t < b) {
                best = Some((t, k));
            }
        }
        best.map(|b| b.1)
    }

    pub fn activated(&self) -> usize {
        self.that.iter().filter(|t| t.is_finite()).count()
    }
}

fn frame_max(f: &CellFrame) -> f64 {
    f.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Waves as maximal runs of frames with `max u > 0`.
pub fn detect_waves(frames: &[CellFrame]) -> Vec<Wave> {
    let mut waves = Vec::new();
    let mut start: Option<usize> = None;
    for (i, f) in frames.iter().enumerate() {
        let active = frame_max(f) > 0.0;
        match (active, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                waves.push(make_wave(frames, s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        waves.push(make_wave(frames, s, frames.len() - 1));
    }
    waves
}

fn make_wave(frames: &[CellFrame], first: usize, last: usize) -> Wave {
    Wave {
        first_frame: first,
        last_frame: last,
        t_min: frames[first].t,
        t_max: frames[last].t,
    }
}

/// First time in `t[from..=to]` at which `v >= thr`, interpolated linearly
/// against the preceding sample when that one is below `thr`.
pub fn first_crossing(t: &[f64], v: &[f64], thr: f64, from: usize, to: usize) -> Option<f64> {
    (from..=to.min(t.len() - 1)).find(|&i| v[i] >= thr).map(|i| {
        if i == 0 || v[i - 1] >= thr {
            t[i]
        } else {
            let s = (thr - v[i - 1]) / (v[i] - v[i - 1]);
            t[i - 1] + s * (t[i] - t[i - 1])
        }
    })
}

/// Per-element activation times of `wave`. Crossings are searched from
/// the frame before the wave starts so that sub-frame interpolation is
/// possible, and the result is shifted so its minimum is zero.
pub fn activation_map(frames: &[CellFrame], wave: &Wave, index: usize, u_cr: f64) -> ActivationMap {
    let n = frames.first().map_or(0, |f| f.u.len());
    let from = wave.first_frame.saturating_sub(1);
    let t: Vec<f64> = frames[from..=wave.last_frame].iter().map(|f| f.t).collect();
    let mut cross: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let v: Vec<f64> = frames[from..=wave.last_frame].iter().map(|f| f.u[k]).collect();
            // the pre-wave frame only serves as interpolation anchor
            let lo = wave.first_frame - from;
            first_crossing(&t, &v, u_cr, lo, v.len() - 1).unwrap_or(f64::NAN)
        })
        .collect();
    let t_min = cross.iter().cloned().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let t_min = if t_min.is_finite() { t_min } else { wave.t_min };
    cross.iter_mut().for_each(|c| *c -= t_min);
    ActivationMap {
        wave: index,
        t_min,
        u_cr,
        that: cross,
    }
}

/// Activation maps for every detected wave.
pub fn activation_maps(frames: &[CellFrame], u_cr: f64) -> Vec<ActivationMap> {
    detect_waves(frames)
        .iter()
        .enumerate()
        .map(|(i, w)| activation_map(frames, w, i, u_cr))
        .collect()
}

/// CSV `element_id,wave,that_ms`; never-activated elements are written
/// as `nan`.
pub fn write_activation_csv(path: &Path, maps: &[ActivationMap]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "element_id,wave,that_ms").map_err(io)?;
    for m in maps {
        for (k, t) in m.that.iter().enumerate() {
            if t.is_finite() {
                writeln!(w, "{k},{},{t:.6}", m.wave).map_err(io)?;
            } else {
                writeln!(w, "{k},{},nan", m.wave).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// One VTK file holding every wave as a separate cell array `that_<i>`.
pub fn write_activation_vtk(path: &Path, mesh: &PolyMesh, maps: &[ActivationMap]) -> Result<()> {
    let names: Vec<String> = maps.iter().map(|m| format!("that_{}", m.wave)).collect();
    let data: Vec<(&str, &[f64])> = names
        .iter()
        .zip(maps)
        .map(|(n, m)| (n.as_str(), m.that.as_slice()))
        .collect();
    crate::output::write_vtk(path, mesh, "activation times (ms)", &data)
}

/// A named region that may act as a wave source.
#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub shape: Shape,
}

/// Distance from `p` to a source shape: zero inside, otherwise the
/// distance to the boundary for circles and to the nearest inside cell
/// centroid of `mesh` for other shapes.
pub fn distance_to(shape: &Shape, p: Point, mesh: &PolyMesh) -> f64 {
    match shape {
        Shape::Circle { center, radius } => ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).max(0.0),
        other => {
            if other.contains(p).unwrap_or(false) {
                return 0.0;
            }
            mesh.centroid
                .iter()
                .filter(|c| other.contains(**c).unwrap_or(false))
                .map(|c| (p[0] - c[0]).hypot(p[1] - c[1]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Name of the closest source within `tol` of `p`, if any.
pub fn attribute(p: Point, sources: &[Source], mesh: &PolyMesh, tol: f64) -> Option<String> {
    sources
        .iter()
        .map(|s| (distance_to(&s.shape, p, mesh), s))
        .filter(|(d, _)| *d <= tol)
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|(_, s)| s.name.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSummary {
    pub index: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub origin: Option<usize>,
    pub origin_point: Option<Point>,
    pub source: Option<String>,
    pub activated: usize,
    pub k_o_peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    pub t: f64,
    pub region: String,
    pub mean_ca_i: f64,
    pub max_ca_i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub waves: Vec<WaveSummary>,
    pub samples: Vec<RegionSample>,
}

impl RunSummary {
    pub fn count_source(&self, name: &str, after: f64) -> usize {
        self.waves
            .iter()
            .filter(|w| w.t_min > after && w.source.as_deref() == Some(name))
            .count()
    }

    pub fn sample(&self, region: &str) -> Option<&RegionSample> {
        self.samples.iter().find(|s| s.region == region)
    }
}

/// Index of the frame closest to `t`.
pub fn frame_at(frames: &[CellFrame], t: f64) -> Option<usize> {
    frames
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.t - t).abs().partial_cmp(&(b.1.t - t).abs()).unwrap())
        .map(|x| x.0)
}

/// Per-region area-weighted mean and maximum of the cell-averaged `Ca_i`.
pub fn region_calcium(mesh: &PolyMesh, frame: &CellFrame) -> Vec<RegionSample> {
    mesh.region_names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let (mut s, mut a, mut mx) = (0.0, 0.0, f64::NEG_INFINITY);
            for k in (0..mesh.num_elements()).filter(|&k| mesh.region[k] == r) {
                s += mesh.area[k] * frame.ca_i[k];
                a += mesh.area[k];
                mx = mx.max(frame.ca_i[k]);
            }
            RegionSample {
                t: frame.t,
                region: name.clone(),
                mean_ca_i: if a > 0.0 { s / a } else { f64::NAN },
                max_ca_i: mx,
            }
        })
        .collect()
}

/// Wave list with origins attributed to `sources` (within `tol` cm) and
/// regional calcium at the requested sample times.
pub fn summarize_run(
    name: &str,
    mesh: &PolyMesh,
    frames: &[CellFrame],
    sources: &[Source],
    tol: f64,
    sample_times: &[f64],
    u_cr: f64,
) -> RunSummary {
    let waves = detect_waves(frames);
    let waves = waves
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let map = activation_map(frames, w, i, u_cr);
            let origin = map.origin();
            let origin_point = origin.map(|k| mesh.centroid[k]);
            let k_o_peak = frames[w.first_frame..=w.last_frame]
                .iter()
                .flat_map(|f| f.k_o.iter().cloned())
                .fold(f64::NEG_INFINITY, f64::max);
            WaveSummary {
                index: i,
                t_min: map.t_min,
                t_max: w.t_max,
                origin,
                origin_point,
                source: origin.and_then(|k| {
                    // the origin's own region wins over overlapping shapes
                    let own = &mesh.region_names[mesh.region[k]];
                    match sources.iter().find(|s| &s.name == own) {
                        Some(s) => Some(s.name.clone()),
                        None => attribute(mesh.centroid[k], sources, mesh, tol),
                    }
                }),
                activated: map.activated(),
                k_o_peak,
            }
        })
        .collect();
    let samples = sample_times
        .iter()
        .filter_map(|&t| frame_at(frames, t))
        .flat_map(|i| region_calcium(mesh, &frames[i]))
        .collect();
    RunSummary {
        name: name.to_string(),
        waves,
        samples,
    }
}

/// Comparison table of several runs: one row per wave and one row per
/// regional calcium sample.
pub fn write_summary_csv(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        w,
        "run,kind,index,t_ms,t_end_ms,origin_element,origin_x,origin_y,source,activated,k_o_peak,region,mean_ca_i,max_ca_i"
    )
    .map_err(io)?;
    for r in runs {
        for s in &r.waves {
            let (ox, oy) = s.origin_point.map_or((f64::NAN, f64::NAN), |p| (p[0], p[1]));
            writeln!(
                w,
                "{},wave,{},{:.6},{:.6},{},{ox:.6},{oy:.6},{},{},{:.6},,,",
                r.name,
                s.index,
                s.t_min,
                s.t_max,
                s.origin.map_or(String::new(), |o| o.to_string()),
                s.source.as_deref().unwrap_or("none"),
                s.activated,
                s.k_o_peak,
            )
            .map_err(io)?;
        }
        for s in &r.samples {
            writeln!(
                w,
                "{},calcium,,{:.6},,,,,,,,{},{:.9e},{:.9e}",
                r.name, s.t, s.region, s.mean_ca_i, s.max_ca_i
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames_from(t: &[f64], u: impl Fn(f64, usize) -> f64, n: usize) -> Vec<CellFrame> {
        t.iter()
            .map(|&t| CellFrame {
                t,
                u: (0..n).map(|k| u(t, k)).collect(),
                ca_i: vec![0.0; n],
                k_o: vec![0.0; n],
                na_i: vec![0.0; n],
            })
            .collect()
    }

    #[test]
    fn quiescent_run_has_no_waves() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let f = frames_from(&t, |_, _| -67.0, 4);
        assert!(detect_waves(&f).is_empty());
        assert!(activation_maps(&f, U_CR).is_empty());
    }

    #[test]
    fn one_pulse_one_wave() {
        // pulse of width 3 ms travelling at 0.5 cell/ms over 10 cells
        let t: Vec<f64> = (0..200).map(|i| 0.25 * i as f64).collect();
        let f = frames_from(&t, |t, k| if (t - 2.0 * k as f64 - 1.0).abs() < 1.5 { 20.0 } else { -70.0 }, 10);
        let w = detect_waves(&f);
        assert_eq!(w.len(), 1);
        let m = activation_map(&f, &w[0], 0, U_CR);
        assert_eq!(m.origin(), Some(0));
        assert_eq!(m.activated(), 10);
    }

    #[test]
    fn plane_wave_slope() {
        let c = 0.05; // cm/ms
        let t: Vec<f64> = (0..400).map(|i| 0.2 * i as f64).collect();
        let x: Vec<f64> = (0..20).map(|k| 0.1 * k as f64 + 0.05).collect();
        let xs = x.clone();
        let f = frames_from(&t, move |t, k| 30.0 * ((t - xs[k] / c) / 2.0).tanh() - 10.0, 20);
        let w = detect_waves(&f);
        assert_eq!(w.len(), 1);
        let m = activation_map(&f, &w[0], 0, U_CR);
        let n = x.len() as f64;
        let (mx, mt) = (x.iter().sum::<f64>() / n, m.that.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(&m.that).map(|(a, b)| (a - mx) * (b - mt)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope * c - 1.0).abs() < 0.05, "{slope}");
        assert_eq!(m.that.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    }

    #[test]
    fn constantly_active_element_starts_at_zero() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = frames_from(&t, |t, k| if k == 0 || t > 5.0 { 10.0 } else { -60.0 }, 3);
        let m = &activation_maps(&f, U_CR)[0];
        assert_eq!(m.that[0], 0.0);
        assert!(m.that[1] > 4.0 && m.that[1] <= 6.0);
    }

    #[test]
    fn waves_are_disjoint_and_ordered() {
        let t: Vec<f64> = (0..1000).map(|i| 0.1 * i as f64).collect();
        let f = frames_from(&t, |t, k| if ((t + k as f64) % 25.0) < 3.0 { 5.0 } else { -70.0 }, 2);
        let w = detect_waves(&f);
        assert!(w.len() >= 3);
        for p in w.windows(2) {
            assert!(p[0].last_frame < p[1].first_frame);
            assert!(p[0].t_max < p[1].t_min);
        }
    }

    #[test]
    fn attribution_picks_nearest_source() {
        let m = crate::mesh::generate_structured([0.0, 0.0], [1.0, 1.0], 4, 4, 0.0).unwrap();
        let s = vec![
            Source {
                name: "a".into(),
                shape: Shape::Circle {
                    center: [0.0, 0.0],
                    radius: 0.2,
                },
            },
            Source {
                name: "b".into(),
                shape: Shape::Circle {
                    center: [1.0, 1.0],
                    radius: 0.2,
                },
            },
        ];
        assert_eq!(attribute([0.1, 0.1], &s, &m, 0.25).as_deref(), Some("a"));
        assert_eq!(attribute([0.8, 0.85], &s, &m, 0.25).as_deref(), Some("b"));
        assert_eq!(attribute([0.5, 0.5], &s, &m, 0.1), None);
    }
}
