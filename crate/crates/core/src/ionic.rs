//! Pointwise evaluation of the amyloid-beta modified Barreto-Cressman model.
//!
//! The state `y = (Ca_i, K_o, Na_i, m, h, n)` evolves as `dy/dt = rhs(u, y)`
//! and the membrane potential obeys `C_m du/dt = -f(u, y)`. Amyloid-beta
//! enters through five pathways:
//!
//! - PMCA inhibition: clearance time `tau_Ca + k_PMCA [Ab]`
//! - calcium-permeable pores: influx `J_Ab(u)`
//! - VGCC activation shift `u_Ab` in the calcium source term
//! - block of the fast potassium conductance `G_K`
//! - suppression of the calcium-activated potassium (AHP/BK) conductance
//!
//! All functions are pure; the [`baseline`] submodule carries the
//! unmodified model, written out independently, for reduction checks.

use crate::error::{Error, Result};
use crate::params::{AbetaParams, BaseParams, GatingParams, ModelParams};

/// The six ionic unknowns at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonicState {
    /// Intracellular calcium (mM).
    pub ca_i: f64,
    /// Extracellular potassium (mM).
    pub k_o: f64,
    /// Intracellular sodium (mM).
    pub na_i: f64,
    pub m: f64,
    pub h: f64,
    pub n: f64,
}

impl IonicState {
    pub const LEN: usize = 6;

    pub fn to_array(self) -> [f64; 6] {
        [self.ca_i, self.k_o, self.na_i, self.m, self.h, self.n]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            ca_i: a[0],
            k_o: a[1],
            na_i: a[2],
            m: a[3],
            h: a[4],
            n: a[5],
        }
    }

    /// State with gates at their steady state for `u`.
    pub fn at_rest(u: f64, ca_i: f64, k_o: f64, na_i: f64, gating: &GatingParams) -> Self {
        let g = gating_rates(u, gating);
        Self {
            ca_i,
            k_o,
            na_i,
            m: g.m_inf,
            h: g.h_inf,
            n: g.n_inf,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Checks the state invariants; `gate_slack` tolerates round-off
    /// excursions of the gates outside `[0, 1]`.
    pub fn check(&self, gate_slack: f64) -> std::result::Result<(), String> {
        if !self.is_finite() {
            return Err(format!("non-finite ionic state {self:?}"));
        }
        if self.ca_i < 0.0 {
            return Err(format!("negative Ca_i = {}", self.ca_i));
        }
        if self.k_o <= 0.0 || self.na_i <= 0.0 {
            return Err(format!(
                "non-positive concentration (K_o = {}, Na_i = {})",
                self.k_o, self.na_i
            ));
        }
        for (name, g) in [("m", self.m), ("h", self.h), ("n", self.n)] {
            if g < -gate_slack || g > 1.0 + gate_slack {
                return Err(format!("gate {name} = {g} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn clamp_gates(&mut self) {
        self.m = self.m.clamp(0.0, 1.0);
        self.h = self.h.clamp(0.0, 1.0);
        self.n = self.n.clamp(0.0, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NernstPotentials {
    pub e_na: f64,
    pub e_k: f64,
    pub e_cl: f64,
}

/// Extracellular sodium from the conservation relation (mM).
pub fn na_o(na_i: f64, base: &BaseParams) -> f64 {
    base.na_o_ref - base.volume_ratio * (na_i - base.na_i_ref)
}

/// Intracellular potassium from the conservation relation (mM).
pub fn k_i(na_i: f64, base: &BaseParams) -> f64 {
    base.k_i_ref + (base.na_i_ref - na_i)
}

fn log_ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if num > 0.0 && den > 0.0 {
        Ok((num / den).ln())
    } else {
        Err(Error::Domain(format!(
            "{what}: non-positive concentration ratio {num}/{den}"
        )))
    }
}

pub fn nernst_potentials(state: &IonicState, base: &BaseParams) -> Result<NernstPotentials> {
    let z = base.nernst_factor;
    Ok(NernstPotentials {
        e_na: z * log_ratio(na_o(state.na_i, base), state.na_i, "E_Na")?,
        e_k: z * log_ratio(state.k_o, k_i(state.na_i, base), "E_K")?,
        e_cl: z * log_ratio(base.cl_i, base.cl_o, "E_Cl")?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingRates {
    pub m_inf: f64,
    pub h_inf: f64,
    pub n_inf: f64,
    pub tau_m: f64,
    pub tau_h: f64,
    pub tau_n: f64,
}

/// Steady states and time constants `1/(alpha + beta)` of the three gates.
pub fn gating_rates(u: f64, gating: &GatingParams) -> GatingRates {
    let pair = |k: &crate::params::GateKinetics| {
        let a = k.alpha.eval(u);
        let b = k.beta.eval(u);
        let s = a + b;
        (a / s, 1.0 / s)
    };
    let (m_inf, tau_m) = pair(&gating.m);
    let (h_inf, tau_h) = pair(&gating.h);
    let (n_inf, tau_n) = pair(&gating.n);
    GatingRates {
        m_inf,
        h_inf,
        n_inf,
        tau_m,
        tau_h,
        tau_n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportCurrents {
    pub pump: f64,
    pub glia: f64,
    pub diff: f64,
}

pub fn pump_glia_diff(state: &IonicState, base: &BaseParams) -> TransportCurrents {
    let pump = base.rho
        / ((1.0 + (5.5 - state.k_o).exp()) * (1.0 + ((25.0 - state.na_i) / 3.0).exp()));
    let glia = base.g_glia / (1.0 + ((18.0 - state.k_o) / 2.5).exp());
    let diff = base.epsilon * (state.k_o - base.k_bath);
    TransportCurrents { pump, glia, diff }
}

/// PMCA clearance time constant `tau_Ca + k_PMCA [Ab]` (ms).
pub fn pmca_time_constant(abeta: &AbetaParams, base: &BaseParams) -> f64 {
    base.tau_ca + abeta.k_pmca(base) * abeta.abeta
}

/// PMCA term of the calcium equation (mM/ms).
pub fn pmca_flux(ca_i: f64, abeta: &AbetaParams, base: &BaseParams) -> f64 {
    -ca_i / pmca_time_constant(abeta, base)
}

/// Maximal pore influx `J_asy [Ab] / (k_D + [Ab])` (uM/ms).
pub fn pore_flux_max(abeta: &AbetaParams) -> f64 {
    abeta.j_asy * abeta.abeta / (abeta.k_d + abeta.abeta)
}

/// Calcium influx through amyloid-beta pores (uM/ms).
pub fn abeta_pore_flux(u: f64, abeta: &AbetaParams) -> f64 {
    if abeta.abeta == 0.0 {
        return 0.0;
    }
    pore_flux_max(abeta) / (1.0 + ((u - abeta.q1) / abeta.q2).exp())
}

/// Amyloid-beta induced VGCC activation shift (mV), a Hill function in `[Ab]`.
pub fn vgcc_shift(abeta: &AbetaParams) -> f64 {
    if abeta.abeta == 0.0 {
        return 0.0;
    }
    let a = abeta.abeta.powf(abeta.alpha);
    abeta.u_max * a / (abeta.k_vgcc.powf(abeta.alpha) + a)
}

/// Open fraction of the L-type VGCC at `u` with activation shift `shift`.
pub fn vgcc_activation(u: f64, shift: f64) -> f64 {
    1.0 / (1.0 + (-(25.0 + u + shift) / 2.5).exp())
}

/// VGCC calcium source of the calcium equation (mM/ms).
pub fn vgcc_current(u: f64, shift: f64, base: &BaseParams) -> f64 {
    -0.002 * base.g_ca * (u - base.e_ca) * vgcc_activation(u, shift)
}

/// Scaling `S_Ab` of the calcium-activated potassium conductance.
pub fn bk_scaling(abeta: &AbetaParams) -> f64 {
    let raw = |a: f64| abeta.a_bk / (a + abeta.b_bk) + abeta.c_bk * (-abeta.d_bk * a).exp();
    if abeta.bk_normalize {
        raw(abeta.abeta) / raw(0.0)
    } else {
        raw(abeta.abeta)
    }
}

/// Fraction of fast potassium channels left available, `1 - [Ab]/(k_CaK + [Ab])`.
pub fn fast_k_block(abeta: &AbetaParams) -> f64 {
    1.0 - abeta.abeta / (abeta.k_cak + abeta.abeta)
}

/// Amyloid-beta factors that depend only on the concentration; evaluated
/// once per region instead of once per point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbetaFactors {
    pub pmca_tau: f64,
    pub pore_max: f64,
    pub vgcc_shift: f64,
    pub bk_scale: f64,
    pub fast_k: f64,
}

impl AbetaFactors {
    pub fn new(abeta: &AbetaParams, base: &BaseParams) -> Self {
        Self {
            pmca_tau: pmca_time_constant(abeta, base),
            pore_max: pore_flux_max(abeta),
            vgcc_shift: vgcc_shift(abeta),
            bk_scale: bk_scaling(abeta),
            fast_k: fast_k_block(abeta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneCurrents {
    pub i_na: f64,
    pub i_k: f64,
    pub i_cl: f64,
}

fn currents_with(
    u: f64,
    state: &IonicState,
    base: &BaseParams,
    factors: &AbetaFactors,
    e: &NernstPotentials,
) -> MembraneCurrents {
    let i_na = (base.g_nal + base.g_na * state.m.powi(3) * state.h) * (u - e.e_na);
    let ahp = factors.bk_scale * base.g_ahp * state.ca_i / (1.0 + state.ca_i);
    let i_k = (base.g_k * factors.fast_k * state.n.powi(4) + ahp + base.g_kl) * (u - e.e_k);
    let i_cl = base.g_cll * (u - e.e_cl);
    MembraneCurrents { i_na, i_k, i_cl }
}

pub fn membrane_currents(
    u: f64,
    state: &IonicState,
    base: &BaseParams,
    abeta: &AbetaParams,
) -> Result<MembraneCurrents> {
    let e = nernst_potentials(state, base)?;
    Ok(currents_with(u, state, base, &AbetaFactors::new(abeta, base), &e))
}

/// Time derivative of the ionic state together with the membrane forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonicRhs {
    pub dydt: IonicState,
    /// `f(u, y)` in uA/cm^2; the membrane obeys `C_m du/dt = -f`.
    pub forcing: f64,
    /// Pore influx `J_Ab` (uM/ms), reported for traces.
    pub pore_flux: f64,
}

/// Precomputed evaluator for one parameter set.
#[derive(Debug, Clone)]
pub struct IonicModel {
    pub base: BaseParams,
    pub abeta: AbetaParams,
    factors: AbetaFactors,
    e_cl: f64,
}

impl IonicModel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::new_unchecked(&params.model, &params.abeta))
    }

    pub(crate) fn new_unchecked(base: &BaseParams, abeta: &AbetaParams) -> Self {
        Self {
            factors: AbetaFactors::new(abeta, base),
            e_cl: base.nernst_factor * (base.cl_i / base.cl_o).ln(),
            base: base.clone(),
            abeta: abeta.clone(),
        }
    }

    pub fn factors(&self) -> &AbetaFactors {
        &self.factors
    }

    pub fn rhs(&self, u: f64, y: &IonicState) -> Result<IonicRhs> {
        let base = &self.base;
        let f = &self.factors;
        let nao = na_o(y.na_i, base);
        let ki = k_i(y.na_i, base);
        if !(y.na_i > 0.0 && nao > 0.0 && y.k_o > 0.0 && ki > 0.0) {
            return Err(Error::Domain(format!(
                "non-positive concentration: Na_i = {}, Na_o = {nao}, K_o = {}, K_i = {ki}",
                y.na_i, y.k_o
            )));
        }
        let e = NernstPotentials {
            e_na: base.nernst_factor * (nao / y.na_i).ln(),
            e_k: base.nernst_factor * (y.k_o / ki).ln(),
            e_cl: self.e_cl,
        };
        let cur = currents_with(u, y, base, f, &e);
        let tr = pump_glia_diff(y, base);

        let pore = if f.pore_max == 0.0 {
            0.0
        } else {
            f.pore_max / (1.0 + ((u - self.abeta.q1) / self.abeta.q2).exp())
        };
        let pore_mm = pore * self.abeta.pore_flux_to_mm;

        let dca = -y.ca_i / f.pmca_tau + vgcc_current(u, f.vgcc_shift, base) + pore_mm;
        let beta = base.volume_ratio;
        let dko = -(tr.diff + 2.0 * beta * tr.pump + tr.glia - beta * base.gamma * cur.i_k) / base.tau;
        let dna = -(base.gamma * cur.i_na + 3.0 * tr.pump) / base.tau;

        let g = gating_rates(u, &base.gating);
        let phi = base.gating.phi;
        let dm = phi / g.tau_m * (g.m_inf - y.m);
        let dh = phi / g.tau_h * (g.h_inf - y.h);
        let dn = phi / g.tau_n * (g.n_inf - y.n);

        let forcing = cur.i_na + cur.i_k + cur.i_cl + self.abeta.j_sign * pore_mm / base.gamma;
        Ok(IonicRhs {
            dydt: IonicState {
                ca_i: dca,
                k_o: dko,
                na_i: dna,
                m: dm,
                h: dh,
                n: dn,
            },
            forcing,
            pore_flux: pore,
        })
    }
}

/// Convenience wrapper around [`IonicModel::rhs`].
pub fn rhs(u: f64, state: &IonicState, base: &BaseParams, abeta: &AbetaParams) -> Result<IonicRhs> {
    IonicModel::new_unchecked(base, abeta).rhs(u, state)
}

/// The unmodified Barreto-Cressman model, written out term by term.
pub mod baseline {
    use super::*;

    pub fn membrane_currents(u: f64, y: &IonicState, base: &BaseParams) -> Result<MembraneCurrents> {
        let e = nernst_potentials(y, base)?;
        Ok(MembraneCurrents {
            i_na: (base.g_nal + base.g_na * y.m * y.m * y.m * y.h) * (u - e.e_na),
            i_k: (base.g_k * y.n * y.n * y.n * y.n + base.g_ahp * y.ca_i / (1.0 + y.ca_i) + base.g_kl)
                * (u - e.e_k),
            i_cl: base.g_cll * (u - e.e_cl),
        })
    }

    /// Returns `(dy/dt, f)`.
    pub fn rhs(u: f64, y: &IonicState, base: &BaseParams) -> Result<(IonicState, f64)> {
        let c = membrane_currents(u, y, base)?;
        let t = pump_glia_diff(y, base);
        let dca = -y.ca_i / base.tau_ca
            - 0.002 * base.g_ca * (u - base.e_ca) / (1.0 + (-(25.0 + u) / 2.5).exp());
        let dko = -(t.diff + 14.0 * t.pump + t.glia - 7.0 * base.gamma * c.i_k) / base.tau;
        let dna = -(base.gamma * c.i_na + 3.0 * t.pump) / base.tau;
        let g = gating_rates(u, &base.gating);
        let dm = 3.0 / g.tau_m * (g.m_inf - y.m);
        let dh = 3.0 / g.tau_h * (g.h_inf - y.h);
        let dn = 3.0 / g.tau_n * (g.n_inf - y.n);
        Ok((
            IonicState {
                ca_i: dca,
                k_o: dko,
                na_i: dna,
                m: dm,
                h: dh,
                n: dn,
            },
            c.i_na + c.i_k + c.i_cl,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> BaseParams {
        BaseParams::default()
    }

    fn ab(c: f64) -> AbetaParams {
        AbetaParams::with_concentration(c)
    }

    fn sample_state() -> IonicState {
        IonicState {
            ca_i: 0.05,
            k_o: 7.2,
            na_i: 17.5,
            m: 0.05,
            h: 0.6,
            n: 0.3,
        }
    }

    #[test]
    fn nernst_unit_ratio_gives_zero() {
        let b = base();
        // K_o = K_i at Na_i = Na_i_ref
        let s = IonicState {
            k_o: b.k_i_ref,
            na_i: b.na_i_ref,
            ..sample_state()
        };
        let e = nernst_potentials(&s, &b).unwrap();
        assert!(e.e_k.abs() < 1e-12);
    }

    #[test]
    fn nernst_e_ratio_gives_prefactor() {
        let mut b = base();
        // choose Na_o / Na_i = e by moving the reference
        let na_i = 10.0;
        b.na_o_ref = std::f64::consts::E * na_i + b.volume_ratio * (na_i - b.na_i_ref);
        let s = IonicState {
            na_i,
            ..sample_state()
        };
        let e = nernst_potentials(&s, &b).unwrap();
        assert_relative_eq!(e.e_na, 26.64, epsilon = 1e-12);
    }

    #[test]
    fn nernst_chloride_value() {
        let e = nernst_potentials(&sample_state(), &base()).unwrap();
        assert_relative_eq!(e.e_cl, 26.64 * (6.0f64 / 130.0).ln(), epsilon = 1e-12);
        assert!((e.e_cl + 81.93).abs() < 0.01, "{}", e.e_cl);
    }

    #[test]
    fn nernst_rejects_nonpositive() {
        let s = IonicState {
            k_o: 0.0,
            ..sample_state()
        };
        assert!(matches!(nernst_potentials(&s, &base()), Err(Error::Domain(_))));
        let s = IonicState {
            na_i: 40.0, // Na_o = 144 - 7*22 < 0
            ..sample_state()
        };
        assert!(nernst_potentials(&s, &base()).is_err());
    }

    #[test]
    fn gating_asymptotes_and_ranges() {
        let g = GatingParams::default();
        let hi = gating_rates(150.0, &g);
        assert!(hi.m_inf > 0.999 && hi.h_inf < 1e-3);
        for k in -100..=100 {
            let r = gating_rates(k as f64, &g);
            for v in [r.m_inf, r.h_inf, r.n_inf] {
                assert!(v > 0.0 && v < 1.0);
            }
            for t in [r.tau_m, r.tau_h, r.tau_n] {
                assert!(t > 0.0 && t.is_finite());
            }
        }
    }

    #[test]
    fn gate_relaxes_to_steady_state() {
        // integrate dm/dt at fixed u to convergence with small explicit steps
        let g = GatingParams::default();
        let u = -40.0;
        let r = gating_rates(u, &g);
        let mut h = 0.0;
        let dt = 0.01;
        for _ in 0..200_000 {
            h += dt * g.phi / r.tau_h * (r.h_inf - h);
        }
        assert_relative_eq!(h, r.h_inf, epsilon = 1e-10);
    }

    #[test]
    fn pump_glia_diff_limits() {
        let b = base();
        let s = IonicState {
            k_o: b.k_bath,
            ..sample_state()
        };
        assert_eq!(pump_glia_diff(&s, &b).diff, 0.0);
        let s = IonicState {
            k_o: 5.5,
            na_i: 25.0,
            ..sample_state()
        };
        assert_relative_eq!(pump_glia_diff(&s, &b).pump, b.rho / 4.0, epsilon = 1e-15);
        let s = IonicState {
            k_o: 1e3,
            na_i: 1e3,
            ..sample_state()
        };
        assert_relative_eq!(pump_glia_diff(&s, &b).pump, b.rho, epsilon = 1e-12);
    }

    #[test]
    fn pmca_reference_values() {
        let b = base();
        assert_relative_eq!(pmca_time_constant(&ab(0.0), &b), 80.0);
        let half = pmca_flux(1.0, &ab(2.312), &b) / pmca_flux(1.0, &ab(0.0), &b);
        assert_relative_eq!(half, 0.5, epsilon = 1e-14);
        assert_eq!(pmca_flux(0.0, &ab(7.0), &b), 0.0);
        // printed k_PMCA times k_I recovers tau_Ca
        assert!((34.602 * 2.312 - 80.0f64).abs() < 1e-3);
    }

    #[test]
    fn pore_flux_values() {
        assert_eq!(abeta_pore_flux(-67.0, &ab(0.0)), 0.0);
        assert_eq!(pore_flux_max(&ab(10.0)), 5.0);
        assert_eq!(abeta_pore_flux(30.0, &ab(10.0)), 2.5);
        for u in [-150.0, -67.0, 0.0, 150.0] {
            let j = abeta_pore_flux(u, &ab(1e6));
            assert!(j >= 0.0 && j < 10.0);
        }
    }

    #[test]
    fn vgcc_shift_values() {
        assert_eq!(vgcc_shift(&ab(0.0)), 0.0);
        assert!((vgcc_shift(&ab(1e12)) - 25.0).abs() < 1e-3);
        let expected = 25.0 * 0.1f64.sqrt() / (0.0444f64.sqrt() + 0.1f64.sqrt());
        assert_relative_eq!(vgcc_shift(&ab(0.1)), expected, epsilon = 1e-12);
        assert!((vgcc_shift(&ab(0.1)) - 15.0).abs() < 0.05);
        let refit = AbetaParams {
            k_vgcc: crate::params::K_VGCC_REFIT,
            ..ab(0.1)
        };
        assert_relative_eq!(vgcc_shift(&refit), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn vgcc_current_values() {
        let b = base();
        assert_eq!(vgcc_current(b.e_ca, 7.0, &b), 0.0);
        assert_eq!(vgcc_activation(-25.0, 0.0), 0.5);
        assert_eq!(vgcc_activation(-50.0, 25.0), 0.5);
        for u in [-100.0, -50.0, 0.0, 119.0] {
            assert!(vgcc_current(u, 3.0, &b) >= 0.0);
        }
    }

    #[test]
    fn bk_scaling_values() {
        assert!((bk_scaling(&ab(0.0)) - 1.0).abs() < 1e-3);
        assert!((bk_scaling(&ab(1.0)) - 0.9123).abs() < 1e-3);
        assert!((bk_scaling(&ab(5.0)) - 0.7920).abs() < 1e-3);
        let printed = AbetaParams {
            d_bk: crate::params::D_BK_PRINTED,
            bk_normalize: false,
            ..ab(1.0)
        };
        let raw = AbetaParams {
            bk_normalize: false,
            ..ab(0.0)
        };
        assert_relative_eq!(bk_scaling(&raw), 0.4498 / 1.9295 + 0.7669, epsilon = 1e-15);
        assert_eq!(bk_scaling(&ab(0.0)), 1.0);
        assert!((bk_scaling(&printed) - 0.154).abs() < 1e-3);
    }

    #[test]
    fn fast_k_block_values() {
        assert_eq!(fast_k_block(&ab(0.0)), 1.0);
        assert_eq!(fast_k_block(&ab(10.0)), 0.5);
        assert_relative_eq!(fast_k_block(&ab(90.0)), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn currents_special_cases() {
        let b = base();
        let s = sample_state();
        let e = nernst_potentials(&s, &b).unwrap();
        let c = membrane_currents(e.e_na, &s, &b, &ab(3.0)).unwrap();
        assert_eq!(c.i_na, 0.0);
        // saturated calcium: AHP term tends to S * G_AHP * (u - E_K)
        let u = -20.0;
        let big = IonicState {
            ca_i: 1e9,
            n: 0.0,
            ..s
        };
        let a = ab(5.0);
        let c = membrane_currents(u, &big, &b, &a).unwrap();
        let expected = (bk_scaling(&a) * b.g_ahp + b.g_kl) * (u - e.e_k);
        assert_relative_eq!(c.i_k, expected, max_relative = 1e-8);
    }

    #[test]
    fn forcing_sign_follows_j_sign() {
        let b = base();
        let s = sample_state();
        let neg = rhs(-60.0, &s, &b, &ab(10.0)).unwrap();
        let pos = rhs(-60.0, &s, &b, &AbetaParams { j_sign: 1.0, ..ab(10.0) }).unwrap();
        let expected = 2.0 * neg.pore_flux * 1e-3 / b.gamma;
        assert_relative_eq!(pos.forcing - neg.forcing, expected, max_relative = 1e-10);
        assert!(neg.pore_flux > 0.0);
    }

    #[test]
    fn reduces_to_baseline_at_zero_abeta() {
        let b = base();
        let s = sample_state();
        for u in [-80.0, -67.0, -30.0, 0.0, 40.0] {
            let m = rhs(u, &s, &b, &ab(0.0)).unwrap();
            let (dy, f) = baseline::rhs(u, &s, &b).unwrap();
            for (x, y) in m.dydt.to_array().iter().zip(dy.to_array()) {
                assert_relative_eq!(*x, y, max_relative = 1e-12, epsilon = 1e-300);
            }
            assert_relative_eq!(m.forcing, f, max_relative = 1e-12);
        }
    }
}
