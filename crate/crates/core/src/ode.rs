//! Space-clamped (0D) integration of the ionic model, amyloid-beta sweeps,
//! spike/burst statistics and attractor export.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ionic::{IonicModel, IonicState};
use crate::params::ModelParams;

/// Largest admissible |u| (mV) before a run is declared diverged.
pub const MAX_ABS_POTENTIAL: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeScheme {
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Forward Euler, matching the ionic update of the tissue solver.
    Euler,
}

impl OdeScheme {
    pub fn order(self) -> usize {
        match self {
            OdeScheme::Rk4 => 4,
            OdeScheme::Euler => 1,
        }
    }
}

/// Initial state used when a run does not specify one: quiescent phase of
/// the bursting cycle at `K_bath = 8 mM`, gates at rest for `u0`.
pub fn default_initial_state(u0: f64, params: &ModelParams) -> IonicState {
    IonicState::at_rest(u0, 0.0, 6.0, 17.0, &params.model.gating)
}

#[derive(Debug, Clone)]
pub struct OdeRun {
    pub initial: IonicState,
    /// Initial membrane potential (mV).
    pub u0: f64,
    /// Step size (ms).
    pub dt: f64,
    /// Final time (ms).
    pub t_end: f64,
    /// Record every `stride` steps.
    pub stride: usize,
    pub scheme: OdeScheme,
    pub params: ModelParams,
}

impl OdeRun {
    pub fn new(params: ModelParams) -> Self {
        let u0 = -67.0;
        Self {
            initial: default_initial_state(u0, &params),
            u0,
            dt: 0.01,
            t_end: 60_000.0,
            stride: 10,
            scheme: OdeScheme::Rk4,
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::Config(format!(
                "t_end ({}) must be >= dt ({})",
                self.t_end, self.dt
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        self.initial
            .check(0.0)
            .map_err(|e| Error::Config(format!("initial state: {e}")))?;
        self.params.validate()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Sampled 0D solution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub ca_i: Vec<f64>,
    pub k_o: Vec<f64>,
    pub na_i: Vec<f64>,
    /// Pore influx (uM/ms).
    pub j_abeta: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    fn push(&mut self, t: f64, u: f64, y: &IonicState, j: f64) {
        self.t.push(t);
        self.u.push(u);
        self.ca_i.push(y.ca_i);
        self.k_o.push(y.k_o);
        self.na_i.push(y.na_i);
        self.j_abeta.push(j);
    }

    /// Time average of `column` with the trapezoidal rule.
    pub fn time_average(&self, column: &[f64]) -> f64 {
        if column.len() < 2 {
            return column.first().copied().unwrap_or(f64::NAN);
        }
        let mut acc = 0.0;
        for i in 1..column.len() {
            acc += 0.5 * (column[i] + column[i - 1]) * (self.t[i] - self.t[i - 1]);
        }
        acc / self.duration()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 80);
        out.push_str("t,u,ca_i,k_o,na_i,j_abeta\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.4},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                self.t[i], self.u[i], self.ca_i[i], self.k_o[i], self.na_i[i], self.j_abeta[i]
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

type Vec7 = [f64; 7];

fn derivative(model: &IonicModel, c_m: f64, x: &Vec7) -> Result<(Vec7, f64)> {
    let y = IonicState {
        ca_i: x[1],
        k_o: x[2],
        na_i: x[3],
        m: x[4],
        h: x[5],
        n: x[6],
    };
    let r = model.rhs(x[0], &y)?;
    let d = r.dydt;
    Ok((
        [-r.forcing / c_m, d.ca_i, d.k_o, d.na_i, d.m, d.h, d.n],
        r.pore_flux,
    ))
}

fn axpy(x: &Vec7, a: f64, k: &Vec7) -> Vec7 {
    let mut out = *x;
    for i in 0..7 {
        out[i] += a * k[i];
    }
    out
}

fn advance(model: &IonicModel, c_m: f64, scheme: OdeScheme, x: &Vec7, dt: f64) -> Result<(Vec7, f64)> {
    match scheme {
        OdeScheme::Euler => {
            let (k1, j) = derivative(model, c_m, x)?;
            Ok((axpy(x, dt, &k1), j))
        }
        OdeScheme::Rk4 => {
            let (k1, j) = derivative(model, c_m, x)?;
            let (k2, _) = derivative(model, c_m, &axpy(x, 0.5 * dt, &k1))?;
            let (k3, _) = derivative(model, c_m, &axpy(x, 0.5 * dt, &k2))?;
            let (k4, _) = derivative(model, c_m, &axpy(x, dt, &k3))?;
            let mut out = *x;
            for i in 0..7 {
                out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            Ok((out, j))
        }
    }
}

fn check_state(x: &mut Vec7, t: f64) -> Result<()> {
    let mut y = IonicState {
        ca_i: x[1],
        k_o: x[2],
        na_i: x[3],
        m: x[4],
        h: x[5],
        n: x[6],
    };
    let diverged = |reason: String| Error::Diverged {
        last_valid_time: t,
        reason,
    };
    if !x[0].is_finite() || x[0].abs() >= MAX_ABS_POTENTIAL {
        return Err(diverged(format!("membrane potential {} mV", x[0])));
    }
    y.check(1e-9).map_err(diverged)?;
    y.clamp_gates();
    x[4] = y.m;
    x[5] = y.h;
    x[6] = y.n;
    Ok(())
}

/// Fixed-step integration of `C_m du/dt = -f`, `dy/dt = rhs`.
pub fn integrate(run: &OdeRun) -> Result<Trace> {
    run.validate()?;
    let model = IonicModel::new(&run.params)?;
    let c_m = run.params.model.c_m;
    let n_steps = run.steps();
    let mut trace = Trace::default();
    let cap = n_steps / run.stride + 2;
    for col in [
        &mut trace.t,
        &mut trace.u,
        &mut trace.ca_i,
        &mut trace.k_o,
        &mut trace.na_i,
        &mut trace.j_abeta,
    ] {
        col.reserve(cap);
    }

    let y0 = run.initial;
    let mut x: Vec7 = [run.u0, y0.ca_i, y0.k_o, y0.na_i, y0.m, y0.h, y0.n];
    let mut last_t = 0.0;
    for step in 0..n_steps {
        let t = step as f64 * run.dt;
        let (next, j) = advance(&model, c_m, run.scheme, &x, run.dt).map_err(|e| match e {
            Error::Domain(reason) => Error::Diverged {
                last_valid_time: t,
                reason,
            },
            other => other,
        })?;
        if step % run.stride == 0 {
            trace.push(t, x[0], &IonicState::from_array([x[1], x[2], x[3], x[4], x[5], x[6]]), j);
        }
        x = next;
        last_t = (step + 1) as f64 * run.dt;
        check_state(&mut x, t)?;
    }
    if n_steps % run.stride == 0 {
        let y = IonicState::from_array([x[1], x[2], x[3], x[4], x[5], x[6]]);
        let j = model.rhs(x[0], &y)?.pore_flux;
        trace.push(last_t, x[0], &y, j);
    }
    Ok(trace)
}

/// One run per amyloid-beta concentration, all on the template's time grid.
pub fn sweep(abeta_values: &[f64], template: &OdeRun) -> Result<Vec<Trace>> {
    if abeta_values.is_empty() {
        return Err(Error::Config("amyloid-beta sweep list is empty".into()));
    }
    if let Some(bad) = abeta_values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Config(format!(
            "amyloid-beta concentrations must be >= 0, got {bad}"
        )));
    }
    abeta_values
        .par_iter()
        .map(|&a| {
            let mut run = template.clone();
            run.params.abeta.abeta = a;
            integrate(&run)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSettings {
    /// Upward crossings of this potential count as spikes (mV).
    pub threshold: f64,
    /// Spikes separated by more than this gap start a new burst (ms).
    pub burst_gap: f64,
}

impl Default for SpikeSettings {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            burst_gap: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub start: f64,
    pub end: f64,
    pub spikes: usize,
}

impl Burst {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeMetrics {
    pub spike_times: Vec<f64>,
    pub bursts: Vec<Burst>,
    /// Mean spike frequency inside bursts with at least two spikes (Hz).
    pub mean_intraburst_frequency: f64,
    /// Fraction of the trace covered by bursts.
    pub duty_cycle: f64,
}

impl SpikeMetrics {
    pub fn burst_count(&self) -> usize {
        self.bursts.len()
    }
}

/// Times of upward crossings of `threshold`, linearly interpolated.
pub fn upward_crossings(t: &[f64], v: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..v.len() {
        if v[i - 1] < threshold && v[i] >= threshold {
            let s = (threshold - v[i - 1]) / (v[i] - v[i - 1]);
            out.push(t[i - 1] + s * (t[i] - t[i - 1]));
        }
    }
    out
}

pub fn spike_burst_metrics(trace: &Trace, settings: SpikeSettings) -> Result<SpikeMetrics> {
    if trace.is_empty() {
        return Err(Error::Config("cannot compute spike metrics of an empty trace".into()));
    }
    let spike_times = upward_crossings(&trace.t, &trace.u, settings.threshold);
    let mut bursts: Vec<Burst> = Vec::new();
    for &s in &spike_times {
        match bursts.last_mut() {
            Some(b) if s - b.end <= settings.burst_gap => {
                b.end = s;
                b.spikes += 1;
            }
            _ => bursts.push(Burst {
                start: s,
                end: s,
                spikes: 1,
            }),
        }
    }
    let freqs: Vec<f64> = bursts
        .iter()
        .filter(|b| b.spikes >= 2 && b.duration() > 0.0)
        .map(|b| (b.spikes - 1) as f64 / b.duration() * 1000.0)
        .collect();
    let mean_intraburst_frequency = if freqs.is_empty() {
        0.0
    } else {
        freqs.iter().sum::<f64>() / freqs.len() as f64
    };
    let total = trace.duration();
    let duty_cycle = if total > 0.0 {
        bursts.iter().map(Burst::duration).sum::<f64>() / total
    } else {
        0.0
    };
    Ok(SpikeMetrics {
        spike_times,
        bursts,
        mean_intraburst_frequency,
        duty_cycle,
    })
}

/// Post-transient trajectory in `(Ca_i, K_o, Na_i)` with `u` as colour.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Attractor {
    /// `[ca_i, k_o, na_i, u]`
    pub points: Vec<[f64; 4]>,
}

impl Attractor {
    /// Axis-aligned bounding box `(min, max)` of the concentration coordinates.
    pub fn bounding_box(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = self.points.first()?;
        let mut lo = [first[0], first[1], first[2]];
        let mut hi = lo;
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn centroid(&self) -> Option<[f64; 3]> {
        if self.points.is_empty() {
            return None;
        }
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        let n = self.points.len() as f64;
        Some(c.map(|v| v / n))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "ca_i,k_o,na_i,u").map_err(io)?;
        for p in &self.points {
            writeln!(w, "{:.6e},{:.6e},{:.6e},{:.6e}", p[0], p[1], p[2], p[3]).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Samples of `trace` strictly after `burn_in` ms.
pub fn attractor_export(trace: &Trace, burn_in: f64) -> Attractor {
    let points: Vec<[f64; 4]> = (0..trace.len())
        .filter(|&i| trace.t[i] > burn_in)
        .map(|i| [trace.ca_i[i], trace.k_o[i], trace.na_i[i], trace.u[i]])
        .collect();
    if points.is_empty() {
        log::warn!(
            "attractor burn-in {burn_in} ms covers the whole trace ({} ms); nothing exported",
            trace.duration()
        );
    }
    Attractor { points }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(u: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Trace {
        let mut tr = Trace::default();
        let n = (t_end / dt) as usize;
        for i in 0..=n {
            let t = i as f64 * dt;
            tr.t.push(t);
            tr.u.push(u(t));
            tr.ca_i.push(0.0);
            tr.k_o.push(4.0);
            tr.na_i.push(18.0);
            tr.j_abeta.push(0.0);
        }
        tr
    }

    #[test]
    fn constant_trace_has_no_spikes() {
        let tr = synthetic(|_| -67.0, 1000.0, 0.1);
        let m = spike_burst_metrics(&tr, SpikeSettings::default()).unwrap();
        assert!(m.spike_times.is_empty());
        assert_eq!(m.burst_count(), 0);
        assert_eq!(m.duty_cycle, 0.0);
    }

    #[test]
    fn pulse_train_counts_pulses() {
        // 10 pulses of 2 ms every 20 ms
        let tr = synthetic(
            |t| if t < 200.0 && (t % 20.0) >= 5.0 && (t % 20.0) < 7.0 { 30.0 } else { -70.0 },
            1000.0,
            0.1,
        );
        let m = spike_burst_metrics(&tr, SpikeSettings::default()).unwrap();
        assert_eq!(m.spike_times.len(), 10);
        assert_eq!(m.burst_count(), 1);
        assert!((m.mean_intraburst_frequency - 50.0).abs() < 0.5);
        assert!((m.duty_cycle - 0.18).abs() < 1e-3);
    }

    #[test]
    fn bursts_split_on_gaps() {
        let tr = synthetic(
            |t| {
                let in_burst = t < 100.0 || (t > 1000.0 && t < 1100.0);
                if in_burst && (t % 10.0) < 1.0 { 20.0 } else { -70.0 }
            },
            2000.0,
            0.1,
        );
        let m = spike_burst_metrics(&tr, SpikeSettings::default()).unwrap();
        assert_eq!(m.burst_count(), 2);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(spike_burst_metrics(&Trace::default(), SpikeSettings::default()).is_err());
    }

    #[test]
    fn attractor_burn_in_past_end_is_empty() {
        let tr = synthetic(|_| -67.0, 100.0, 1.0);
        let a = attractor_export(&tr, 100.0);
        assert!(a.points.is_empty());
        assert!(a.bounding_box().is_none());
        assert_eq!(attractor_export(&tr, 49.5).points.len(), 51);
    }

    #[test]
    fn run_validation() {
        let mut run = OdeRun::new(ModelParams::default());
        run.dt = 0.0;
        assert!(integrate(&run).is_err());
        let mut run = OdeRun::new(ModelParams::default());
        run.t_end = 0.001;
        assert!(integrate(&run).is_err());
        let mut run = OdeRun::new(ModelParams::default());
        run.stride = 0;
        assert!(integrate(&run).is_err());
    }

    #[test]
    fn short_run_records_on_grid() {
        let mut run = OdeRun::new(ModelParams::default());
        run.t_end = 10.0;
        run.stride = 100;
        let tr = integrate(&run).unwrap();
        assert_eq!(tr.len(), 11);
        assert_eq!(tr.t[0], 0.0);
        assert!((tr.t[10] - 10.0).abs() < 1e-12);
        assert!(tr.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn divergence_is_reported() {
        let mut run = OdeRun::new(ModelParams::default());
        run.dt = 5.0; // far beyond the explicit stability limit
        run.scheme = OdeScheme::Euler;
        run.t_end = 500.0;
        match integrate(&run) {
            Err(Error::Diverged { last_valid_time, .. }) => assert!(last_valid_time < 500.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sweep_rejects_empty_and_negative() {
        let run = OdeRun::new(ModelParams::default());
        assert!(sweep(&[], &run).is_err());
        assert!(sweep(&[1.0, -1.0], &run).is_err());
    }
}
