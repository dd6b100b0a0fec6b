//! Observed order of the 0D integrators against a fine RK4 reference over
//! the upstroke and repolarisation of a spike.

use amyloid_seizure::ode::{self, OdeRun, OdeScheme, Trace};
use amyloid_seizure::params::ModelParams;

const SAMPLE: f64 = 0.01;

fn trajectory(scheme: OdeScheme, dt: f64, abeta: f64) -> Trace {
    let mut run = OdeRun::new(ModelParams::with_abeta(abeta));
    run.u0 = -50.0;
    run.initial = ode::default_initial_state(-67.0, &run.params);
    run.dt = dt;
    run.t_end = 4.0;
    run.stride = (SAMPLE / dt).round() as usize;
    run.scheme = scheme;
    ode::integrate(&run).unwrap()
}

/// Largest potential error over the common sample times.
fn max_error(a: &Trace, b: &Trace) -> f64 {
    assert_eq!(a.len(), b.len());
    a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn observed_order(scheme: OdeScheme, dts: &[f64], abeta: f64) -> Vec<f64> {
    let reference = trajectory(OdeScheme::Rk4, 1e-4, abeta);
    let err: Vec<f64> = dts.iter().map(|&dt| max_error(&trajectory(scheme, dt, abeta), &reference)).collect();
    err.windows(2).zip(dts.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

#[test]
fn rk4_is_fourth_order() {
    for abeta in [0.0, 10.0] {
        let orders = observed_order(OdeScheme::Rk4, &[0.01, 0.005, 0.0025], abeta);
        for p in &orders {
            assert!((p - 4.0).abs() < 0.3, "Abeta {abeta}: orders {orders:?}");
        }
    }
}

#[test]
fn euler_is_first_order() {
    for abeta in [0.0, 10.0] {
        let orders = observed_order(OdeScheme::Euler, &[0.002, 0.001, 0.0005], abeta);
        for p in &orders {
            assert!((p - 1.0).abs() < 0.15, "Abeta {abeta}: orders {orders:?}");
        }
    }
}

#[test]
fn the_initial_spike_fires() {
    let tr = trajectory(OdeScheme::Rk4, 0.01, 0.0);
    assert!(tr.u.iter().cloned().fold(f64::MIN, f64::max) > 0.0);
}
