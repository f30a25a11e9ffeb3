//! The Hahn echo protocol over a set of field cells: excitation at `t = 0`,
//! refocusing at `t = tau`, echo at `t = 2 tau`.

use serde::{Deserialize, Serialize};

use crate::classical::{
    joint_spec, macrostate, net_magnetization, sample_thermal_ensemble, spin_only_spec, ClassicalDipole, FieldProfile,
    SpinStart,
};
use crate::entropy::{
    boltzmann_from_wehrl, histogram_entropy, mean_hamiltonian_analytic, wehrl_closed_form, MixingParameter,
};
use crate::error::{require_nonnegative, require_positive, Error, Result};
use crate::lindblad::{bloch_observables, evolve_analytic, gamma_l_for_ratio, relaxation_times, ReservoirParams};
use crate::spin::{
    excitation_pulse, thermal_alpha, thermal_state, PhysicalParams, Refocusing, SphereDirection, SpinHalfState,
};

/// Relative tolerance used to merge recording times with `tau` and `2 tau`.
const TIME_SNAP: f64 = 1e-9;

/// Recording times `0, dt, 2 dt, ...` up to `t_end`, always containing
/// `tau`, `2 tau` (when reachable) and `t_end` exactly.
pub fn recording_times(tau: f64, t_end: f64, dt_record: f64) -> Vec<f64> {
    let eps = TIME_SNAP * t_end.max(1.0);
    let mut special = vec![0.0, tau, t_end];
    if 2.0 * tau <= t_end + eps {
        special.push((2.0 * tau).min(t_end));
    }
    let steps = (t_end / dt_record + TIME_SNAP).floor() as usize;
    let mut out: Vec<f64> = (0..=steps)
        .map(|k| k as f64 * dt_record)
        .filter(|t| *t <= t_end && special.iter().all(|s| (t - s).abs() > eps))
        .collect();
    out.extend(special);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= eps);
    out
}

/// A fully specified quantum echo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoProtocol {
    tau: f64,
    t_end: f64,
    dt_record: f64,
    physical: PhysicalParams,
    field: FieldProfile,
    reservoir: ReservoirParams,
    particles: u64,
    refocusing: Refocusing,
    cell_omegas: Vec<f64>,
}

impl EchoProtocol {
    /// The reservoir template gets `alpha` at the mean field and
    /// `omega_p = g mu B_mean`; each cell then uses its own frequency.
    pub fn new(
        tau: f64,
        t_end: f64,
        dt_record: f64,
        physical: PhysicalParams,
        field: FieldProfile,
        gamma_t: f64,
        gamma_l: f64,
    ) -> Result<Self> {
        require_positive("tau", tau)?;
        require_positive("dt_record", dt_record)?;
        if !(t_end > tau) || !t_end.is_finite() {
            return Err(Error::invalid("t_end", format!("must exceed tau = {tau}, got {t_end}")));
        }
        let omega_mean = physical.precession_frequency(field.mean_b());
        let alpha = thermal_alpha(physical.beta, physical.g * physical.mu, field.mean_b())?;
        let reservoir = ReservoirParams::new(gamma_t, gamma_l, alpha, omega_mean)?;
        let cell_omegas = field.cell_fields().iter().map(|&b| physical.precession_frequency(b)).collect();
        Ok(EchoProtocol {
            tau,
            t_end,
            dt_record,
            physical,
            field,
            reservoir,
            particles: 1,
            refocusing: Refocusing::default(),
            cell_omegas,
        })
    }

    pub fn with_particles(mut self, particles: u64) -> Result<Self> {
        if particles == 0 {
            return Err(Error::invalid("N", "must be >= 1"));
        }
        self.particles = particles;
        Ok(self)
    }

    pub fn with_refocusing(mut self, refocusing: Refocusing) -> Self {
        self.refocusing = refocusing;
        self
    }

    pub fn with_gamma_l(mut self, gamma_l: f64) -> Result<Self> {
        self.reservoir.gamma_l = require_nonnegative("gamma_L", gamma_l)?;
        Ok(self)
    }

    /// Same protocol with a new `tau`; `t_end` and `dt_record` keep their
    /// ratios to `tau`.
    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        require_positive("tau", tau)?;
        let scale = tau / self.tau;
        self.t_end *= scale;
        self.dt_record *= scale;
        self.tau = tau;
        Ok(self)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt_record(&self) -> f64 {
        self.dt_record
    }

    pub fn beta(&self) -> f64 {
        self.physical.beta
    }

    pub fn physical(&self) -> &PhysicalParams {
        &self.physical
    }

    pub fn field(&self) -> &FieldProfile {
        &self.field
    }

    pub fn reservoir(&self) -> &ReservoirParams {
        &self.reservoir
    }

    pub fn particles(&self) -> u64 {
        self.particles
    }

    pub fn refocusing(&self) -> Refocusing {
        self.refocusing
    }

    pub fn cell_omegas(&self) -> &[f64] {
        &self.cell_omegas
    }

    /// Cell average of the precession frequency.
    pub fn omega_bar(&self) -> f64 {
        self.cell_omegas.iter().sum::<f64>() / self.cell_omegas.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        recording_times(self.tau, self.t_end, self.dt_record)
    }

    /// State right after the excitation pulse (same in every cell).
    pub fn initial_state(&self) -> SpinHalfState {
        excitation_pulse(&thermal_state(self.reservoir.alpha).expect("alpha validated"))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t_end * (1.0 + TIME_SNAP)) {
            return Err(Error::invalid("t", format!("must lie in [0, {}], got {t}", self.t_end)));
        }
        Ok(())
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.cell_omegas.len() {
            return Err(Error::invalid(
                "cell",
                format!("index {cell} out of range ({} cells)", self.cell_omegas.len()),
            ));
        }
        Ok(())
    }

    /// Density matrix of cell `cell` at time `t`. At `t = tau` this is the
    /// state just before the refocusing pulse.
    pub fn cell_state(&self, cell: usize, t: f64) -> Result<SpinHalfState> {
        self.check_time(t)?;
        self.check_cell(cell)?;
        let params = self.reservoir.with_omega(self.cell_omegas[cell]);
        let rho0 = self.initial_state();
        if t <= self.tau {
            return evolve_analytic(&rho0, t, &params);
        }
        let refocused = self.refocusing.apply(&evolve_analytic(&rho0, self.tau, &params)?);
        evolve_analytic(&refocused, t - self.tau, &params)
    }
}

/// Convenience parameter set with defaults for a single echo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumEchoSettings {
    pub g: f64,
    pub mu: f64,
    pub beta: f64,
    pub mean_b: f64,
    pub sigma_b: f64,
    pub cells: usize,
    pub seed: u64,
    pub gamma_t: f64,
    pub gamma_l: f64,
    pub tau: f64,
    /// Defaults to `2.5 tau`.
    pub t_end: Option<f64>,
    /// Defaults to `tau / 50`.
    pub dt_record: Option<f64>,
    pub particles: u64,
    pub refocusing: Refocusing,
}

impl Default for QuantumEchoSettings {
    fn default() -> Self {
        QuantumEchoSettings {
            g: 1.0,
            mu: 1.0,
            beta: 2.0,
            mean_b: 1.0,
            sigma_b: 0.1,
            cells: 1024,
            seed: 0,
            gamma_t: 0.005,
            gamma_l: 0.0,
            tau: 100.0,
            t_end: None,
            dt_record: None,
            particles: 1,
            refocusing: Refocusing::default(),
        }
    }
}

impl QuantumEchoSettings {
    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(2.5 * self.tau)
    }

    pub fn dt_record(&self) -> f64 {
        self.dt_record.unwrap_or(self.tau / 50.0)
    }

    pub fn build(&self) -> Result<EchoProtocol> {
        let physical = PhysicalParams::new(self.g, self.mu, 1.0, self.beta, 1.0)?;
        let field = FieldProfile::gaussian_random_cells(self.mean_b, self.sigma_b, self.cells, self.seed, 1.0)?;
        Ok(EchoProtocol::new(self.tau, self.t_end(), self.dt_record(), physical, field, self.gamma_t, self.gamma_l)?
            .with_particles(self.particles)?
            .with_refocusing(self.refocusing))
    }
}

/// One recorded instant of a quantum echo run. Extensive columns carry the
/// protocol's particle count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub t: f64,
    pub s_w: f64,
    pub s_b: f64,
    pub h_bar: f64,
    pub s_tot: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub m_z: f64,
    /// `M_x(2 tau)/M_x(0)`, only on the echo row.
    pub decay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTimeSeries {
    pub rows: Vec<EntropyRow>,
}

impl EntropyTimeSeries {
    /// Smallest row-to-row change of `S_tot` (`+inf` for fewer than two rows).
    pub fn min_s_tot_step(&self) -> f64 {
        min_step(self.rows.iter().map(|r| r.s_tot))
    }

    pub fn min_s_b_step(&self) -> f64 {
        min_step(self.rows.iter().map(|r| r.s_b))
    }

    pub fn is_time_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].t > w[0].t)
    }

    /// Row whose time equals `t` up to the snapping tolerance.
    pub fn row_at(&self, t: f64) -> Option<&EntropyRow> {
        let eps = TIME_SNAP * self.rows.last().map_or(1.0, |r| r.t.max(1.0));
        self.rows.iter().find(|r| (r.t - t).abs() <= eps)
    }

    pub fn echo_row(&self) -> Option<&EntropyRow> {
        self.rows.iter().find(|r| r.decay.is_some())
    }
}

fn min_step(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Printed Husimi function of cell `cell` at time `t`:
/// `u_t = 1/2 [1 + r_z(t) cos(theta) + e^{-t/T2} sin(theta) cos(phi - psi)/(1 + 2 alpha)]`
/// with `psi = omega_p t` before the refocusing pulse and `omega_p (t - 2 tau)`
/// after it.
pub fn u_t_analytic(dir: SphereDirection, cell: usize, t: f64, proto: &EchoProtocol) -> Result<f64> {
    proto.check_time(t)?;
    proto.check_cell(cell)?;
    let res = proto.reservoir.with_omega(proto.cell_omegas[cell]);
    let k = 1.0 + 2.0 * res.alpha;
    let rz_eq = -1.0 / k;
    let g1 = res.longitudinal_rate();
    let transverse = (-res.transverse_rate() * t).exp() / k;
    let (rz, psi) = if t <= proto.tau {
        // r_z starts at 0 right after the excitation pulse
        (rz_eq * -(-g1 * t).exp_m1(), res.omega_p * t)
    } else {
        let rz_tau = rz_eq * -(-g1 * proto.tau).exp_m1();
        let rz_after = match proto.refocusing {
            Refocusing::PhaseConjugate => rz_tau,
            Refocusing::RotationX => -rz_tau,
        };
        (rz_eq + (rz_after - rz_eq) * (-g1 * (t - proto.tau)).exp(), res.omega_p * (t - 2.0 * proto.tau))
    };
    let (theta, phi) = (dir.theta(), dir.phi());
    Ok(0.5 * (1.0 + rz * theta.cos() + transverse * theta.sin() * (phi - psi).cos()))
}

/// Computes one row from the per-cell states at time `t`.
pub fn echo_row(proto: &EchoProtocol, t: f64, m_x0: Option<f64>) -> Result<EntropyRow> {
    let k = proto.cell_omegas.len() as f64;
    let n = proto.particles;
    let (mut s_w, mut m) = (0.0, [0.0; 3]);
    for cell in 0..proto.cell_omegas.len() {
        let state = proto.cell_state(cell, t)?;
        s_w += wehrl_closed_form(MixingParameter::of_state(&state));
        let obs = bloch_observables(&state, n)?;
        m[0] += obs.m_x();
        m[1] += obs.m_y();
        m[2] += obs.m_z;
    }
    s_w /= k;
    let m = m.map(|c| c / k);
    let s_b = boltzmann_from_wehrl(s_w, n)?;
    let res = &proto.reservoir;
    let h_bar = n as f64 * mean_hamiltonian_analytic(t, proto.omega_bar(), res.alpha, res.gamma_t)?;
    let eps = TIME_SNAP * proto.t_end.max(1.0);
    let decay = match m_x0 {
        Some(m0) if (t - 2.0 * proto.tau).abs() <= eps => decay_from_magnetization(m0, m[0]).ok(),
        _ => None,
    };
    Ok(EntropyRow { t, s_w, s_b, h_bar, s_tot: s_b - proto.beta() * h_bar, m_x: m[0], m_y: m[1], m_z: m[2], decay })
}

/// Runs the full protocol on the recording grid.
pub fn run_quantum_echo(proto: &EchoProtocol) -> Result<EntropyTimeSeries> {
    let times = proto.times();
    let first = echo_row(proto, 0.0, None)?;
    let m_x0 = Some(first.m_x);
    let mut rows = Vec::with_capacity(times.len());
    rows.push(first);
    for &t in &times[1..] {
        rows.push(echo_row(proto, t, m_x0)?);
    }
    Ok(EntropyTimeSeries { rows })
}

/// Closed-form echo amplitude `M_x(2 tau)/M_x(0) = exp(-2 tau/T2)`.
pub fn echo_decay(tau: f64, reservoir: &ReservoirParams) -> Result<f64> {
    require_nonnegative("tau", tau)?;
    let (_, t2) = relaxation_times(reservoir);
    Ok(if t2.is_infinite() { 1.0 } else { (-2.0 * tau / t2).exp() })
}

/// Measured echo amplitude; undefined when there is no initial transverse
/// magnetization.
pub fn decay_from_magnetization(m_x0: f64, m_x_echo: f64) -> Result<f64> {
    if m_x0 == 0.0 || !m_x0.is_finite() {
        return Err(Error::UndefinedDecay);
    }
    Ok(m_x_echo / m_x0)
}

/// Net change `S_tot(inf) - S_tot(0)` once the spins have thermalized.
pub fn thermalization_plateau(proto: &EchoProtocol) -> Result<f64> {
    let res = &proto.reservoir;
    let n = proto.particles;
    let s0 = boltzmann_from_wehrl(wehrl_closed_form(MixingParameter::of_state(&proto.initial_state())), n)?;
    let s_inf = boltzmann_from_wehrl(wehrl_closed_form(MixingParameter::of_state(&thermal_state(res.alpha)?)), n)?;
    let h_inf = if res.gamma_t > 0.0 { -(n as f64) * proto.omega_bar() / (1.0 + 2.0 * res.alpha) } else { 0.0 };
    Ok(s_inf - s0 - proto.beta() * h_inf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub ratio: f64,
    pub tau: f64,
    pub decay: f64,
    pub delta_s_tot: f64,
}

/// For each `T1/T2` ratio and each `tau`: simulated echo amplitude and the
/// total entropy produced between `0` and `2 tau`. Rows of one ratio are
/// sorted by descending decay; ratios keep their input order.
pub fn entropy_vs_decay(taus: &[f64], template: &EchoProtocol, ratios: &[f64]) -> Result<Vec<DecayRow>> {
    if taus.is_empty() {
        return Err(Error::invalid("taus", "must be nonempty"));
    }
    let mut out = Vec::with_capacity(taus.len() * ratios.len());
    for &ratio in ratios {
        let res = template.reservoir();
        let gamma_l = gamma_l_for_ratio(ratio, res.gamma_t, res.alpha)?;
        let mut curve = Vec::with_capacity(taus.len());
        for &tau in taus {
            let proto = template.clone().with_gamma_l(gamma_l)?.with_tau(tau)?;
            let start = echo_row(&proto, 0.0, None)?;
            let end = echo_row(&proto, 2.0 * tau, Some(start.m_x))?;
            let decay = end.decay.ok_or(Error::UndefinedDecay)?;
            curve.push(DecayRow { ratio, tau, decay, delta_s_tot: end.s_tot - start.s_tot });
        }
        curve.sort_by(|a, b| b.decay.total_cmp(&a.decay));
        out.extend(curve);
    }
    Ok(out)
}

/// Classical counterpart of the protocol on a sampled dipole ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEchoProtocol {
    pub particles: usize,
    pub tau: f64,
    /// Defaults to `2 tau`.
    pub t_end: Option<f64>,
    /// Defaults to `tau / 50`.
    pub dt_record: Option<f64>,
    pub phi_bins: usize,
    pub seed: u64,
    /// Dipole moment multiplying the net magnetization.
    pub moment: f64,
}

impl Default for ClassicalEchoProtocol {
    fn default() -> Self {
        ClassicalEchoProtocol {
            particles: 10_000,
            tau: 100.0,
            t_end: None,
            dt_record: None,
            phi_bins: 64,
            seed: 0,
            moment: 1.0,
        }
    }
}

impl ClassicalEchoProtocol {
    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(2.0 * self.tau)
    }

    pub fn dt_record(&self) -> f64 {
        self.dt_record.unwrap_or(self.tau / 50.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEchoRow {
    pub t: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub m_z: f64,
    pub s_spin_only: f64,
    pub s_joint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEchoSeries {
    pub rows: Vec<ClassicalEchoRow>,
}

impl ClassicalEchoSeries {
    pub fn row_at(&self, t: f64) -> Option<&ClassicalEchoRow> {
        let eps = TIME_SNAP * self.rows.last().map_or(1.0, |r| r.t.max(1.0));
        self.rows.iter().find(|r| (r.t - t).abs() <= eps)
    }
}

fn classical_at(d: &ClassicalDipole, t: f64, tau: f64) -> ClassicalDipole {
    if t <= tau {
        d.precess(t)
    } else {
        d.precess(tau).pi_pulse().precess(t - tau)
    }
}

/// Samples a transverse ensemble and records magnetization plus spin-only
/// and joint (cell x phi) histogram entropies at every recording time.
pub fn run_classical_echo(
    proto: &ClassicalEchoProtocol,
    field: &FieldProfile,
    params: &PhysicalParams,
) -> Result<ClassicalEchoSeries> {
    require_positive("tau", proto.tau)?;
    require_positive("dt_record", proto.dt_record())?;
    if !(proto.t_end() >= proto.tau) {
        return Err(Error::invalid("t_end", "must be >= tau"));
    }
    let ensemble = sample_thermal_ensemble(proto.particles, params, field, SpinStart::Transverse, proto.seed)?;
    let spin_spec = spin_only_spec(proto.phi_bins)?;
    let joint = joint_spec(field, proto.phi_bins)?;
    let mut rows = Vec::new();
    for t in recording_times(proto.tau, proto.t_end(), proto.dt_record()) {
        let now: Vec<ClassicalDipole> = ensemble.iter().map(|d| classical_at(d, t, proto.tau)).collect();
        let m = net_magnetization(&now, proto.moment)?;
        rows.push(ClassicalEchoRow {
            t,
            m_x: m[0],
            m_y: m[1],
            m_z: m[2],
            s_spin_only: histogram_entropy(&macrostate(&spin_spec, &now))?,
            s_joint: histogram_entropy(&macrostate(&joint, &now))?,
        });
    }
    Ok(ClassicalEchoSeries { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{build_gauss_sphere_grid, wehrl_quadrature};
    use crate::spin::husimi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn settings(gamma_t: f64, gamma_l: f64, beta: f64) -> QuantumEchoSettings {
        QuantumEchoSettings { gamma_t, gamma_l, beta, cells: 256, ..Default::default() }
    }

    #[test]
    fn recording_grid_contains_the_pulse_times() {
        let t = recording_times(100.0, 250.0, 7.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        for s in [0.0, 100.0, 200.0, 250.0] {
            assert!(t.contains(&s));
        }
        let t = recording_times(0.3, 0.9, 0.1);
        assert_eq!(t.len(), 10);
        assert!(t.contains(&0.3) && t.contains(&0.6));
        // 2 tau beyond the end is not added
        assert!(!recording_times(1.0, 1.5, 0.5).contains(&2.0));
    }

    #[test]
    fn protocol_validation() {
        let s = QuantumEchoSettings::default();
        assert!(QuantumEchoSettings { tau: 0.0, ..s.clone() }.build().is_err());
        assert!(QuantumEchoSettings { t_end: Some(50.0), ..s.clone() }.build().is_err());
        assert!(QuantumEchoSettings { dt_record: Some(-1.0), ..s.clone() }.build().is_err());
        assert!(QuantumEchoSettings { particles: 0, ..s.clone() }.build().is_err());
        let p = s.build().unwrap();
        assert_eq!(p.cell_omegas().len(), 1024);
        assert!((p.reservoir().omega_p - 1.0).abs() < 1e-15);
        assert!((p.reservoir().alpha - 1.0 / 2f64.exp_m1()).abs() < 1e-15);
        assert!(p.cell_state(0, -1.0).is_err());
        assert!(p.cell_state(0, 1e6).is_err());
        assert!(p.cell_state(5000, 1.0).is_err());
    }

    #[test]
    fn u_t_examples() {
        let p = settings(0.005, 0.01, 2.0).build().unwrap();
        let alpha = p.reservoir().alpha;
        for &(th, ph) in &[(0.3, 0.0), (1.2, 2.0), (PI, 5.0)] {
            let dir = SphereDirection::new(th, ph).unwrap();
            let want = 0.5 * (1.0 + th.sin() * ph.cos() / (1.0 + 2.0 * alpha));
            assert!((u_t_analytic(dir, 3, 0.0, &p).unwrap() - want).abs() < 1e-15);
        }
        // rephasing: at 2 tau the phase is the same in every cell
        let dir = SphereDirection::new(1.0, 0.7).unwrap();
        let vals: Vec<f64> =
            (0..p.cell_omegas().len()).map(|c| u_t_analytic(dir, c, 2.0 * p.tau(), &p).unwrap()).collect();
        assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-12));
        assert!(u_t_analytic(dir, 0, -0.1, &p).is_err());
        // unitary limit: u_tau is u_0 rotated by omega tau, same Wehrl entropy
        let p = settings(0.0, 0.0, 2.0).build().unwrap();
        let w = p.cell_omegas()[9] * p.tau();
        let dir = SphereDirection::new(1.0, 0.4).unwrap();
        let shifted = SphereDirection::new(1.0, 0.4 - w).unwrap();
        assert!(
            (u_t_analytic(dir, 9, p.tau(), &p).unwrap() - u_t_analytic(shifted, 9, 0.0, &p).unwrap()).abs() < 1e-12
        );
        let grid = build_gauss_sphere_grid(64, 128).unwrap();
        let s0 = wehrl_quadrature(&p.cell_state(9, 0.0).unwrap(), &grid);
        let st = wehrl_quadrature(&p.cell_state(9, p.tau()).unwrap(), &grid);
        assert!((s0 - st).abs() < 1e-12);
    }

    #[test]
    fn u_t_matches_husimi_of_evolved_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for refocusing in [Refocusing::PhaseConjugate, Refocusing::RotationX] {
            let p = settings(0.01, 0.02, 1.5).build().unwrap().with_refocusing(refocusing);
            for _ in 0..20 {
                let t = rng.random::<f64>() * p.t_end();
                let cell = rng.random_range(0..p.cell_omegas().len());
                let state = p.cell_state(cell, t).unwrap();
                for i in 0..32 {
                    for j in 0..64 {
                        let dir = SphereDirection::new(PI * (i as f64 + 0.5) / 32.0, TAU * j as f64 / 64.0).unwrap();
                        let d = u_t_analytic(dir, cell, t, &p).unwrap() - husimi(&state, dir);
                        assert!(d.abs() < 1e-12, "{refocusing:?} t={t} cell={cell}: {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn pure_dephasing_keeps_entropy_and_echoes() {
        let p = settings(0.0, 0.0, 2.0).build().unwrap();
        let ts = run_quantum_echo(&p).unwrap();
        assert!(ts.is_time_increasing());
        let s0 = ts.rows[0].s_b;
        assert!(ts.rows.iter().all(|r| (r.s_b - s0).abs() < 1e-12));
        let m0 = ts.rows[0].m_x;
        assert!(ts.row_at(p.tau()).unwrap().m_x.abs() / m0 < 0.05);
        let echo = ts.row_at(2.0 * p.tau()).unwrap();
        assert!((echo.m_x / m0 - 1.0).abs() < 1e-12);
        assert_eq!(echo.decay, ts.echo_row().map(|r| r.decay).unwrap());
    }

    #[test]
    fn decay_examples_and_simulation_agree() {
        let res = ReservoirParams::new(0.02, 0.05, 0.3, 1.0).unwrap();
        assert_eq!(echo_decay(0.0, &res).unwrap(), 1.0);
        let (_, t2) = relaxation_times(&res);
        assert!((echo_decay(0.5 * t2, &res).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(echo_decay(-1.0, &res).is_err());
        assert!(matches!(decay_from_magnetization(0.0, 0.3), Err(Error::UndefinedDecay)));
        assert_eq!(decay_from_magnetization(2.0, 1.0).unwrap(), 0.5);
        for seed in 0..3 {
            let p = QuantumEchoSettings { seed, ..settings(0.02, 0.05, 1.0) }.build().unwrap();
            let ts = run_quantum_echo(&p).unwrap();
            let d = ts.echo_row().unwrap().decay.unwrap();
            assert!((d - echo_decay(p.tau(), p.reservoir()).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn total_entropy_is_monotone_over_grid() {
        for &gt in &[0.0, 0.02, 0.05] {
            for &gl in &[0.0, 0.05, 0.2] {
                for &beta in &[1.0 / 0.3, 2.0, 1.0] {
                    let p = QuantumEchoSettings { tau: 20.0, cells: 64, ..settings(gt, gl, beta) }.build().unwrap();
                    let ts = run_quantum_echo(&p).unwrap();
                    assert!(ts.min_s_tot_step() >= -1e-9, "{gt} {gl} {beta}: {}", ts.min_s_tot_step());
                }
            }
        }
    }

    #[test]
    fn fig2_curves_and_plateau() {
        let p = QuantumEchoSettings { beta: 2.0, gamma_t: 0.05, cells: 32, ..Default::default() }.build().unwrap();
        let taus: Vec<f64> = (0..50).map(|k| 0.05 * 1.15f64.powi(k)).collect();
        let rows = entropy_vs_decay(&taus, &p, &[0.75, 1.5, 3.0]).unwrap();
        assert_eq!(rows.len(), 150);
        for curve in rows.chunks(50) {
            for w in curve.windows(2) {
                assert!(w[1].decay < w[0].decay);
                assert!(w[1].delta_s_tot > w[0].delta_s_tot);
            }
        }
        let near = entropy_vs_decay(&[1e-10], &p, &[1.5]).unwrap()[0];
        assert!(near.delta_s_tot.abs() < 1e-9 && (near.decay - 1.0).abs() < 1e-9);
        let far = entropy_vs_decay(&[2000.0], &p, &[1.5]).unwrap()[0];
        let plateau = thermalization_plateau(&p).unwrap();
        assert!(far.decay < 1e-12);
        assert!((far.delta_s_tot - plateau).abs() < 1e-9, "{} vs {plateau}", far.delta_s_tot);
        assert!(matches!(entropy_vs_decay(&taus, &p, &[0.4]), Err(Error::Infeasible(_))));
        let floor = entropy_vs_decay(&taus[..5], &p, &[0.5]).unwrap();
        assert_eq!(floor.len(), 5);
    }

    #[test]
    fn classical_contrast() {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 2.0, 100.0).unwrap();
        let field = FieldProfile::gaussian_random_cells(1.0, 0.1, 100, 1, 1.0).unwrap();
        let proto = ClassicalEchoProtocol::default();
        let ts = run_classical_echo(&proto, &field, &params).unwrap();
        let (r0, r1, r2) =
            (ts.row_at(0.0).unwrap(), ts.row_at(proto.tau).unwrap(), ts.row_at(2.0 * proto.tau).unwrap());
        assert_eq!(r2.m_x, r0.m_x);
        assert!(r1.s_spin_only > r2.s_spin_only && r2.s_spin_only == r0.s_spin_only);
        assert!(ts.rows.iter().all(|r| r.s_joint == r0.s_joint));
        assert_eq!(ts, run_classical_echo(&proto, &field, &params).unwrap());
    }

    #[test]
    fn quantum_and_classical_agree_without_relaxation() {
        let s = QuantumEchoSettings { cells: 100, seed: 4, ..settings(0.0, 0.0, 2.0) };
        let p = s.build().unwrap();
        let q = run_quantum_echo(&p).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 2.0, 100.0).unwrap();
        let proto = ClassicalEchoProtocol { dt_record: Some(p.dt_record()), ..Default::default() };
        let c = run_classical_echo(&proto, p.field(), &params).unwrap();
        let q0 = q.rows[0].m_x;
        let c0 = c.rows[0].m_x;
        let n = proto.particles as f64;
        for row in &c.rows {
            let qr = q.row_at(row.t).unwrap();
            assert!((qr.m_x / q0 - row.m_x / c0).abs() < 5.0 / n.sqrt(), "t = {}", row.t);
        }
    }
}
