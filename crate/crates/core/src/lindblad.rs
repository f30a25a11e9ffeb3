//! Spin-1/2 Lindblad dynamics with thermal (Gamma_T) and dephasing (Gamma_L)
//! reservoirs.
//!
//! The generator is
//!
//! ```text
//! d rho/dt = -i w [S_z, rho]
//!            - (G_T alpha / 2) ([S_-, [S_+, rho]] + [S_+, [S_-, rho]])
//!            - (G_T / 2) ([S_+, S_- rho] - [S_-, rho S_+])
//!            - G_L [S_z, [S_z, rho]]
//! ```
//!
//! which relaxes populations at `G_T (1 + 2 alpha)` towards
//! `rho11 = alpha/(1 + 2 alpha)` and damps the coherence at
//! `1/T2 = G_T (alpha + 1/2) + G_L`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{require_nonnegative, Error, Result};
use crate::mat2::Mat2;
use crate::spin::SpinHalfState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    pub gamma_t: f64,
    pub gamma_l: f64,
    pub alpha: f64,
    pub omega_p: f64,
}

impl ReservoirParams {
    pub fn new(gamma_t: f64, gamma_l: f64, alpha: f64, omega_p: f64) -> Result<Self> {
        if !omega_p.is_finite() {
            return Err(Error::invalid("omega_p", "must be finite"));
        }
        Ok(ReservoirParams {
            gamma_t: require_nonnegative("gamma_T", gamma_t)?,
            gamma_l: require_nonnegative("gamma_L", gamma_l)?,
            alpha: require_nonnegative("alpha", alpha)?,
            omega_p,
        })
    }

    /// Same reservoir, different local precession frequency.
    pub fn with_omega(&self, omega_p: f64) -> Self {
        ReservoirParams { omega_p, ..*self }
    }

    /// Population relaxation rate `1/T1 = G_T (1 + 2 alpha)`.
    pub fn longitudinal_rate(&self) -> f64 {
        self.gamma_t * (1.0 + 2.0 * self.alpha)
    }

    /// Coherence decay rate `1/T2 = G_T (alpha + 1/2) + G_L`.
    pub fn transverse_rate(&self) -> f64 {
        self.gamma_t * (self.alpha + 0.5) + self.gamma_l
    }

    /// Stationary `|+1/2>` population.
    pub fn equilibrium_up(&self) -> f64 {
        self.alpha / (1.0 + 2.0 * self.alpha)
    }
}

/// Right-hand side of the master equation as a 2x2 matrix.
pub fn lindblad_rhs_matrix(rho: &Mat2, params: &ReservoirParams) -> Mat2 {
    let (sz, sp, sm) = (Mat2::s_z(), Mat2::s_plus(), Mat2::s_minus());
    let hamiltonian = sz.commutator(rho).scale(C64::new(0.0, -params.omega_p));
    let thermal = (sm.commutator(&sp.commutator(rho)) + sp.commutator(&sm.commutator(rho)))
        .scale_re(-0.5 * params.gamma_t * params.alpha);
    let emission = (sp.commutator(&(sm * *rho)) - sm.commutator(&(*rho * sp))).scale_re(-0.5 * params.gamma_t);
    let dephasing = sz.commutator(&sz.commutator(rho)).scale_re(-params.gamma_l);
    hamiltonian + thermal + emission + dephasing
}

/// Time derivative of a state, in the same parametrization as [`SpinHalfState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub d_rho11: f64,
    pub d_rho00: f64,
    pub d_rho01: C64,
}

impl StateDerivative {
    pub fn trace(&self) -> f64 {
        self.d_rho11 + self.d_rho00
    }
}

pub fn lindblad_rhs(state: &SpinHalfState, params: &ReservoirParams) -> StateDerivative {
    let d = lindblad_rhs_matrix(&state.to_matrix(), params);
    StateDerivative { d_rho11: d.0[0][0].re, d_rho00: d.0[1][1].re, d_rho01: d.0[0][1] }
}

/// Closed-form solution of the master equation after time `t`.
pub fn evolve_analytic(state0: &SpinHalfState, t: f64, params: &ReservoirParams) -> Result<SpinHalfState> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    // keep the decaying factor as exp_m1 so short times stay accurate
    let relax = (-params.longitudinal_rate() * t).exp_m1();
    let eq = params.equilibrium_up();
    let rho11 = state0.rho11() + (state0.rho11() - eq) * relax;
    let coherence = state0.rho01() * C64::from_polar(1.0, -params.omega_p * t) * (-params.transverse_rate() * t).exp();
    Ok(SpinHalfState::new_unchecked(rho11, 1.0 - rho11, coherence))
}

fn rk4_step(rho: &Mat2, h: f64, params: &ReservoirParams) -> Mat2 {
    let f = |m: &Mat2| lindblad_rhs_matrix(m, params);
    let k1 = f(rho);
    let k2 = f(&(*rho + k1.scale_re(0.5 * h)));
    let k3 = f(&(*rho + k2.scale_re(0.5 * h)));
    let k4 = f(&(*rho + k3.scale_re(h)));
    *rho + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)
}

/// Fixed-step RK4 integration of [`lindblad_rhs`].
///
/// Takes `ceil(t/dt)` equal steps. The result satisfies the state invariants
/// only to integrator accuracy.
pub fn evolve_numeric(state0: &SpinHalfState, t: f64, dt: f64, params: &ReservoirParams) -> Result<SpinHalfState> {
    let mut last = *state0;
    integrate(state0, t, dt, params, |_, s| last = s)?;
    Ok(last)
}

/// Like [`evolve_numeric`] but returns `(t_k, rho(t_k))` after every step,
/// starting with the initial state at `t = 0`.
pub fn evolve_numeric_path(
    state0: &SpinHalfState,
    t: f64,
    dt: f64,
    params: &ReservoirParams,
) -> Result<Vec<(f64, SpinHalfState)>> {
    let mut path = vec![(0.0, *state0)];
    integrate(state0, t, dt, params, |tk, s| path.push((tk, s)))?;
    Ok(path)
}

fn integrate<F: FnMut(f64, SpinHalfState)>(
    state0: &SpinHalfState,
    t: f64,
    dt: f64,
    params: &ReservoirParams,
    mut record: F,
) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    if !(dt <= t) || !t.is_finite() {
        return Err(Error::invalid("dt", format!("must not exceed t = {t}, got {dt}")));
    }
    let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut rho = state0.to_matrix();
    for k in 1..=steps {
        rho = rk4_step(&rho, h, params);
        let hermitian_off = 0.5 * (rho.0[0][1] + rho.0[1][0].conj());
        record(k as f64 * h, SpinHalfState::new_unchecked(rho.0[0][0].re, rho.0[1][1].re, hermitian_off));
    }
    Ok(())
}

/// Extensive spin observables `M_i = N <S_i>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochObservables {
    pub m_z: f64,
    pub m_plus: C64,
    pub m_minus: C64,
}

impl BlochObservables {
    pub fn m_x(&self) -> f64 {
        self.m_plus.re
    }

    pub fn m_y(&self) -> f64 {
        self.m_plus.im
    }
}

pub fn bloch_observables(state: &SpinHalfState, particles: u64) -> Result<BlochObservables> {
    if particles == 0 {
        return Err(Error::invalid("N", "must be >= 1"));
    }
    let n = particles as f64;
    // <S_+> = Tr(rho S_+) = <-1/2|rho|+1/2>
    let s_plus = state.rho01().conj();
    Ok(BlochObservables {
        m_z: n * 0.5 * (state.rho11() - state.rho00()),
        m_plus: s_plus * n,
        m_minus: s_plus.conj() * n,
    })
}

/// `(T1, T2)`; a vanishing rate gives an infinite time.
pub fn relaxation_times(params: &ReservoirParams) -> (f64, f64) {
    let inv = |r: f64| if r > 0.0 { 1.0 / r } else { f64::INFINITY };
    (inv(params.longitudinal_rate()), inv(params.transverse_rate()))
}

/// Dephasing rate `G_L` that realises a requested `T1/T2` ratio.
pub fn gamma_l_for_ratio(ratio: f64, gamma_t: f64, alpha: f64) -> Result<f64> {
    if !(ratio >= 0.5) || !ratio.is_finite() {
        return Err(Error::Infeasible(format!("T1/T2 = {ratio} is below the floor 1/2 (would need gamma_L < 0)")));
    }
    require_nonnegative("gamma_T", gamma_t)?;
    require_nonnegative("alpha", alpha)?;
    let gl = gamma_t * (2.0 * alpha + 1.0) * ratio - gamma_t * (alpha + 0.5);
    Ok(gl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::tests::arb_state;
    use crate::spin::{thermal_state, BlochVector};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn params(gt: f64, gl: f64, alpha: f64, w: f64) -> ReservoirParams {
        ReservoirParams::new(gt, gl, alpha, w).unwrap()
    }

    fn sample_state() -> SpinHalfState {
        SpinHalfState::from_bloch(BlochVector { rx: 0.4, ry: -0.5, rz: 0.3 })
    }

    #[test]
    fn rhs_vanishes_on_the_thermal_state() {
        for &(gt, gl, alpha, w) in &[(0.05, 0.0, 0.2, 1.0), (1.0, 0.3, 0.0, 2.5), (0.3, 2.0, 4.0, -1.0)] {
            let p = params(gt, gl, alpha, w);
            let d = lindblad_rhs(&thermal_state(alpha).unwrap(), &p);
            assert!(d.d_rho11.abs() < 1e-15 && d.d_rho00.abs() < 1e-15 && d.d_rho01.norm() < 1e-15);
        }
    }

    #[test]
    fn rhs_unitary_limit_rotates_coherence() {
        let p = params(0.0, 0.0, 0.3, 1.7);
        let s = sample_state();
        let d = lindblad_rhs(&s, &p);
        assert_eq!((d.d_rho11, d.d_rho00), (0.0, 0.0));
        let want = s.rho01() * C64::new(0.0, -1.7);
        assert!((d.d_rho01 - want).norm() < 1e-15);
    }

    #[test]
    fn rhs_dephasing_leaves_mixed_state_alone() {
        let d = lindblad_rhs(&SpinHalfState::maximally_mixed(), &params(0.0, 0.8, 0.0, 0.0));
        assert_eq!((d.d_rho11, d.d_rho00, d.d_rho01), (0.0, 0.0, C64::new(0.0, 0.0)));
    }

    #[test]
    fn rhs_matches_closed_form_rates() {
        let p = params(0.3, 0.2, 0.7, 1.1);
        let s = sample_state();
        let d = lindblad_rhs(&s, &p);
        let want11 = -p.longitudinal_rate() * s.rho11() + p.gamma_t * p.alpha;
        assert!((d.d_rho11 - want11).abs() < 1e-15);
        let want01 = s.rho01() * C64::new(-p.transverse_rate(), -p.omega_p);
        assert!((d.d_rho01 - want01).norm() < 1e-15);
    }

    #[test]
    fn analytic_examples() {
        let p = params(0.1, 0.05, 0.4, 2.0);
        let s = sample_state();
        assert_eq!(evolve_analytic(&s, 0.0, &p).unwrap(), s);
        let late = evolve_analytic(&s, 1e4, &p).unwrap();
        assert!(late.max_abs_diff(&thermal_state(0.4).unwrap()) < 1e-14);
        let (_, t2) = relaxation_times(&p);
        for &t in &[0.3, 2.0, 17.0] {
            let ratio = evolve_analytic(&s, t, &p).unwrap().rho01().norm() / s.rho01().norm();
            assert!((ratio - (-t / t2).exp()).abs() < 1e-14);
        }
        assert!(evolve_analytic(&s, -1.0, &p).is_err());
    }

    #[test]
    fn numeric_examples() {
        let w = 1.3;
        let p = params(0.0, 0.0, 0.0, w);
        let s = sample_state();
        let period = TAU / w;
        let back = evolve_numeric(&s, period, period / 1e4, &p).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-10);
        assert!(evolve_numeric(&s, 1.0, 2.0, &p).is_err());
        assert!(evolve_numeric(&s, 1.0, 0.0, &p).is_err());
    }

    #[test]
    fn numeric_matches_analytic_with_fourth_order_convergence() {
        let p = params(0.2, 0.1, 0.3, 2.0);
        let (_, t2) = relaxation_times(&p);
        let s = sample_state();
        let t = 3.0 * t2;
        let exact = evolve_analytic(&s, t, &p).unwrap();
        let err = |dt: f64| evolve_numeric(&s, t, dt, &p).unwrap().max_abs_diff(&exact);
        assert!(err(t2 / 1e3) < 1e-6);
        let (coarse, fine) = (err(t2 / 20.0), err(t2 / 40.0));
        let order = (coarse / fine).log2();
        assert!((order - 4.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn bloch_observable_examples() {
        let m = bloch_observables(&SpinHalfState::maximally_mixed(), 17).unwrap();
        assert_eq!((m.m_z, m.m_x(), m.m_y()), (0.0, 0.0, 0.0));
        assert_eq!(bloch_observables(&SpinHalfState::spin_up(), 1).unwrap().m_z, 0.5);
        assert!(bloch_observables(&SpinHalfState::spin_up(), 0).is_err());
        let s = sample_state();
        let m = bloch_observables(&s, 2).unwrap();
        assert!((m.m_x() - s.bloch().rx).abs() < 1e-15 && (m.m_y() - s.bloch().ry).abs() < 1e-15);
    }

    #[test]
    fn transverse_observables_decay_at_t2_and_rotate_forward() {
        let p = params(0.1, 0.2, 0.5, 1.4);
        let s = sample_state();
        let (_, t2) = relaxation_times(&p);
        let m0 = bloch_observables(&s, 5).unwrap();
        for &t in &[0.5, 3.0, 8.0] {
            let m = bloch_observables(&evolve_analytic(&s, t, &p).unwrap(), 5).unwrap();
            let decay = (-t / t2).exp();
            let want_plus = m0.m_plus * C64::from_polar(decay, p.omega_p * t);
            let want_minus = m0.m_minus * C64::from_polar(decay, -p.omega_p * t);
            assert!((m.m_plus - want_plus).norm() < 1e-14);
            assert!((m.m_minus - want_minus).norm() < 1e-14);
        }
    }

    #[test]
    fn longitudinal_observable_follows_the_bloch_law() {
        // dM_z/dt = G_T [ -N/2 - (2 alpha + 1) M_z ]
        let p = params(0.3, 0.1, 0.6, 1.0);
        let n = 4;
        let s = sample_state();
        let h = 1e-5;
        for &t in &[0.2, 1.0, 4.0] {
            let mz = |t: f64| bloch_observables(&evolve_analytic(&s, t, &p).unwrap(), n).unwrap().m_z;
            let deriv = (mz(t + h) - mz(t - h)) / (2.0 * h);
            let want = p.gamma_t * (-0.5 * n as f64 - (2.0 * p.alpha + 1.0) * mz(t));
            assert!((deriv - want).abs() < 1e-8);
        }
    }

    #[test]
    fn relaxation_time_examples() {
        let (t1, t2) = relaxation_times(&params(0.2, 0.0, 0.0, 1.0));
        assert!((t1 / t2 - 0.5).abs() < 1e-15);
        let (t1, t2) = relaxation_times(&params(0.0, 0.25, 0.3, 1.0));
        assert_eq!(t1, f64::INFINITY);
        assert!((t2 - 4.0).abs() < 1e-15);
        assert_eq!(relaxation_times(&params(0.0, 0.0, 0.3, 1.0)), (f64::INFINITY, f64::INFINITY));
    }

    #[test]
    fn gamma_l_inversion() {
        assert_eq!(gamma_l_for_ratio(0.5, 0.3, 0.7).unwrap(), 0.0);
        assert!((gamma_l_for_ratio(1.5, 0.05, 0.0).unwrap() - 0.05).abs() < 1e-16);
        assert!(matches!(gamma_l_for_ratio(0.4, 0.05, 0.0), Err(Error::Infeasible(_))));
        for &(ratio, gt, alpha) in &[(3.0, 0.05, 0.2), (0.75, 1.0, 1.5), (10.0, 0.01, 0.0)] {
            let gl = gamma_l_for_ratio(ratio, gt, alpha).unwrap();
            let (t1, t2) = relaxation_times(&params(gt, gl, alpha, 1.0));
            assert!((t1 / t2 - ratio).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn analytic_output_is_a_valid_state(
            s in arb_state(), t in 0.0..50.0f64, gt in 0.0..2.0f64, gl in 0.0..2.0f64,
            alpha in 0.0..5.0f64, w in -3.0..3.0f64,
        ) {
            let out = evolve_analytic(&s, t, &params(gt, gl, alpha, w)).unwrap();
            prop_assert!(SpinHalfState::new(out.rho11(), out.rho00(), out.rho01()).is_ok());
        }

        #[test]
        fn rhs_is_traceless(s in arb_state(), gt in 0.0..2.0f64, gl in 0.0..2.0f64, alpha in 0.0..5.0f64, w in -3.0..3.0f64) {
            let d = lindblad_rhs(&s, &params(gt, gl, alpha, w));
            prop_assert_eq!(d.trace(), 0.0);
        }

        #[test]
        fn semigroup(s in arb_state(), t1 in 0.0..10.0f64, t2 in 0.0..10.0f64, gt in 0.0..1.0f64, gl in 0.0..1.0f64, alpha in 0.0..3.0f64) {
            let p = params(gt, gl, alpha, 1.3);
            let once = evolve_analytic(&s, t1 + t2, &p).unwrap();
            let twice = evolve_analytic(&evolve_analytic(&s, t1, &p).unwrap(), t2, &p).unwrap();
            prop_assert!(once.max_abs_diff(&twice) < 1e-12);
        }

        #[test]
        fn thermal_state_is_stationary(alpha in 0.0..10.0f64, t in 0.0..1e3f64, gt in 0.0..2.0f64, gl in 0.0..2.0f64) {
            let th = thermal_state(alpha).unwrap();
            let out = evolve_analytic(&th, t, &params(gt, gl, alpha, 0.9)).unwrap();
            prop_assert!(out.max_abs_diff(&th) < 1e-12);
        }

        #[test]
        fn dephasing_only_loses_coherence_monotonically(s in arb_state(), gl in 0.01..2.0f64, t in 0.01..5.0f64) {
            prop_assume!(s.rho01().norm() > 1e-6);
            let p = params(0.0, gl, 0.3, 1.0);
            let a = evolve_analytic(&s, t, &p).unwrap();
            let b = evolve_analytic(&s, 1.5 * t, &p).unwrap();
            prop_assert!(b.rho01().norm() < a.rho01().norm() && a.rho01().norm() < s.rho01().norm());
            prop_assert!((a.rho11() - s.rho11()).abs() < 1e-15 && (b.rho11() - s.rho11()).abs() < 1e-15);
        }
    }
}
