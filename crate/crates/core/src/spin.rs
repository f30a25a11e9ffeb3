//! Spin-1/2 states, spin coherent states and instantaneous pulses.
//!
//! Conventions used throughout the crate:
//!
//! * Basis order is (|+1/2>, |-1/2>); `rho11` is the |+1/2> population and
//!   `rho00` the |-1/2> population.
//! * The stored coherence is `rho01 = <+1/2| rho |-1/2>`. Under the free
//!   Hamiltonian `omega * S_z` it evolves as `exp(-i omega t)`, and the Bloch
//!   vector satisfies `rx + i ry = 2 conj(rho01)`, so the transverse Bloch
//!   component precesses counter-clockwise (azimuth `+omega t`), the same sense
//!   as the classical dipoles.
//! * The coherent state |theta, phi> points along
//!   `n = (sin theta cos phi, sin theta sin phi, cos theta)`; |0, 0> = |+1/2>.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::mat2::Mat2;

const STATE_TOL: f64 = 1e-12;

/// A point on the unit sphere in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDirection {
    theta: f64,
    phi: f64,
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl SphereDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(theta.is_finite() && (0.0..=PI).contains(&theta)) {
            return Err(Error::invalid("theta", format!("must lie in [0, pi], got {theta}")));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        Ok(SphereDirection { theta, phi: wrap_angle(phi) })
    }

    /// Direction of a nonzero 3-vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let r = norm3(v);
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid("vector", "must be finite and nonzero"));
        }
        let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
        SphereDirection::new(theta, v[1].atan2(v[0]))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Great-circle angle to another direction.
    pub fn angle_to(&self, other: &SphereDirection) -> f64 {
        let d = dot3(self.unit_vector(), other.unit_vector()).clamp(-1.0, 1.0);
        d.acos()
    }
}

/// Bloch vector `r = Tr(rho sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl BlochVector {
    pub fn new(rx: f64, ry: f64, rz: f64) -> Result<Self> {
        let b = BlochVector { rx, ry, rz };
        let len = b.length();
        if !len.is_finite() || len > 1.0 + STATE_TOL {
            return Err(Error::invalid("bloch vector", format!("length {len} exceeds 1")));
        }
        Ok(b)
    }

    pub fn length(&self) -> f64 {
        norm3(self.as_array())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rx, self.ry, self.rz]
    }
}

/// Single-particle spin-1/2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfState {
    rho11: f64,
    rho00: f64,
    rho01: C64,
}

impl SpinHalfState {
    /// Builds a state from its populations and the coherence
    /// `<+1/2|rho|-1/2>`, checking trace, nonnegativity and positivity.
    pub fn new(rho11: f64, rho00: f64, rho01: C64) -> Result<Self> {
        if !(rho11.is_finite() && rho00.is_finite() && rho01.re.is_finite() && rho01.im.is_finite()) {
            return Err(Error::invalid("density matrix", "entries must be finite"));
        }
        if (rho11 + rho00 - 1.0).abs() > STATE_TOL {
            return Err(Error::invalid("density matrix", format!("trace {} != 1", rho11 + rho00)));
        }
        if rho11 < -STATE_TOL || rho00 < -STATE_TOL {
            return Err(Error::invalid("density matrix", "negative population"));
        }
        if rho11 * rho00 - rho01.norm_sqr() < -STATE_TOL {
            return Err(Error::invalid("density matrix", "not positive semidefinite"));
        }
        Ok(SpinHalfState { rho11, rho00, rho01 })
    }

    /// Skips validation. Used for numerically integrated states, whose
    /// invariants hold only to integrator accuracy.
    pub(crate) fn new_unchecked(rho11: f64, rho00: f64, rho01: C64) -> Self {
        SpinHalfState { rho11, rho00, rho01 }
    }

    pub fn maximally_mixed() -> Self {
        SpinHalfState::new_unchecked(0.5, 0.5, C64::new(0.0, 0.0))
    }

    /// |+1/2><+1/2|.
    pub fn spin_up() -> Self {
        SpinHalfState::new_unchecked(1.0, 0.0, C64::new(0.0, 0.0))
    }

    /// |-1/2><-1/2|.
    pub fn spin_down() -> Self {
        SpinHalfState::new_unchecked(0.0, 1.0, C64::new(0.0, 0.0))
    }

    /// Projector onto the coherent state |dir>.
    pub fn coherent(dir: SphereDirection) -> Self {
        let n = dir.unit_vector();
        SpinHalfState::from_bloch(BlochVector { rx: n[0], ry: n[1], rz: n[2] })
    }

    pub fn from_bloch(b: BlochVector) -> Self {
        let rho11 = 0.5 * (1.0 + b.rz);
        SpinHalfState::new_unchecked(rho11, 1.0 - rho11, C64::new(0.5 * b.rx, -0.5 * b.ry))
    }

    pub fn from_matrix(m: &Mat2) -> Result<Self> {
        let off = m.0[0][1];
        if (m.0[1][0] - off.conj()).norm() > STATE_TOL
            || m.0[0][0].im.abs() > STATE_TOL
            || m.0[1][1].im.abs() > STATE_TOL
        {
            return Err(Error::invalid("density matrix", "not Hermitian"));
        }
        SpinHalfState::new(m.0[0][0].re, m.0[1][1].re, off)
    }

    pub fn to_matrix(&self) -> Mat2 {
        Mat2([[C64::new(self.rho11, 0.0), self.rho01], [self.rho01.conj(), C64::new(self.rho00, 0.0)]])
    }

    pub fn rho11(&self) -> f64 {
        self.rho11
    }

    pub fn rho00(&self) -> f64 {
        self.rho00
    }

    pub fn rho01(&self) -> C64 {
        self.rho01
    }

    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho00
    }

    pub fn bloch(&self) -> BlochVector {
        BlochVector { rx: 2.0 * self.rho01.re, ry: -2.0 * self.rho01.im, rz: self.rho11 - self.rho00 }
    }

    /// Eigenvalues `(larger, smaller)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_gap = 0.5 * self.bloch().length();
        let mean = 0.5 * self.trace();
        (mean + half_gap, mean - half_gap)
    }

    pub fn purity(&self) -> f64 {
        self.rho11 * self.rho11 + self.rho00 * self.rho00 + 2.0 * self.rho01.norm_sqr()
    }

    pub fn max_abs_diff(&self, other: &SpinHalfState) -> f64 {
        self.to_matrix().max_abs_diff(&other.to_matrix())
    }
}

/// Physical constants of the dipole model; `hbar` is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub g: f64,
    pub mu: f64,
    pub mass: f64,
    pub beta: f64,
    pub field_length: f64,
}

impl PhysicalParams {
    pub const HBAR: f64 = 1.0;

    pub fn new(g: f64, mu: f64, mass: f64, beta: f64, field_length: f64) -> Result<Self> {
        Ok(PhysicalParams {
            g: require_positive("g", g)?,
            mu: require_positive("mu", mu)?,
            mass: require_positive("mass", mass)?,
            beta: require_positive("beta", beta)?,
            field_length: require_positive("field_length", field_length)?,
        })
    }

    /// Precession frequency `g mu B`.
    pub fn precession_frequency(&self, field: f64) -> f64 {
        self.g * self.mu * field
    }
}

/// A spin quantum number stored as `2s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spin {
    two_s: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { two_s: 1 };

    pub fn from_twice(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::invalid("spin", "2s must be >= 1"));
        }
        Ok(Spin { two_s })
    }

    pub fn twice(&self) -> u32 {
        self.two_s
    }

    pub fn value(&self) -> f64 {
        0.5 * self.two_s as f64
    }
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Amplitudes `<m|theta, phi>` for m = s, s-1, ..., -s.
///
/// Uses the normalized convention
/// `sqrt(C(2s, s+m)) cos^{s+m}(theta/2) sin^{s-m}(theta/2) exp(-i m phi)`.
pub fn coherent_amplitudes(dir: SphereDirection, spin: Spin) -> Vec<C64> {
    let n = spin.twice();
    let (sh, ch) = (0.5 * dir.theta()).sin_cos();
    (0..=n)
        .rev()
        .map(|k| {
            // k = s + m
            let m = k as f64 - spin.value();
            let mag = (0.5 * ln_binomial(n, k)).exp() * ch.powi(k as i32) * sh.powi((n - k) as i32);
            C64::from_polar(mag, -m * dir.phi())
        })
        .collect()
}

/// Overlap `<a|b>` of two spin coherent states.
pub fn coherent_overlap(a: SphereDirection, b: SphereDirection, spin: Spin) -> C64 {
    coherent_amplitudes(a, spin).into_iter().zip(coherent_amplitudes(b, spin)).map(|(x, y)| x.conj() * y).sum()
}

/// Husimi function `<dir|rho|dir> = (1 + r.n)/2`.
pub fn husimi(state: &SpinHalfState, dir: SphereDirection) -> f64 {
    0.5 * (1.0 + dot3(state.bloch().as_array(), dir.unit_vector()))
}

/// Thermal occupation factor `1/(exp(beta g B) - 1)`.
pub fn thermal_alpha(beta: f64, g: f64, field: f64) -> Result<f64> {
    let x = beta * g * field;
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::invalid("beta*g*B", format!("must be > 0, got {x}")));
    }
    // exp_m1 overflows to +inf for large x, giving alpha = 0.
    Ok(1.0 / x.exp_m1())
}

/// Stationary state of the dissipator: `rho11 = alpha/(1+2 alpha)`.
///
/// Its Husimi function is `(alpha + sin^2(theta/2))/(1 + 2 alpha)`.
pub fn thermal_state(alpha: f64) -> Result<SpinHalfState> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid("alpha", format!("must be >= 0, got {alpha}")));
    }
    let up = if alpha.is_infinite() { 0.5 } else { alpha / (1.0 + 2.0 * alpha) };
    Ok(SpinHalfState::new_unchecked(up, 1.0 - up, C64::new(0.0, 0.0)))
}

/// SU(2) rotation `exp(-i angle n.sigma/2)`.
pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> Result<Mat2> {
    if (norm3(axis) - 1.0).abs() > STATE_TOL {
        return Err(Error::invalid("axis", format!("must be a unit vector, |axis| = {}", norm3(axis))));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("angle", "must be finite"));
    }
    let (s, c) = (0.5 * angle).sin_cos();
    let [nx, ny, nz] = axis;
    let i = C64::i();
    Ok(Mat2([
        [C64::new(c, 0.0) - i * s * nz, -i * s * C64::new(nx, -ny)],
        [-i * s * C64::new(nx, ny), C64::new(c, 0.0) + i * s * nz],
    ]))
}

/// Instantaneous ideal pulse: `rho -> U rho U^dagger`.
pub fn apply_pulse(state: &SpinHalfState, axis: [f64; 3], angle: f64) -> Result<SpinHalfState> {
    let u = rotation_matrix(axis, angle)?;
    let m = u * state.to_matrix() * u.dagger();
    let rho11 = m.0[0][0].re;
    Ok(SpinHalfState::new_unchecked(rho11, 1.0 - rho11, m.0[0][1]))
}

/// Excitation pulse: a pi/2 rotation about -y, which turns the thermal
/// polarization (along -z) onto +x.
pub fn excitation_pulse(state: &SpinHalfState) -> SpinHalfState {
    apply_pulse(state, [0.0, 1.0, 0.0], -0.5 * PI).expect("fixed unit axis")
}

/// Reflects the transverse Bloch component through the x-z plane
/// (`phi -> -phi` on the Husimi function) and leaves populations alone.
pub fn invert_transverse(state: &SpinHalfState) -> SpinHalfState {
    SpinHalfState::new_unchecked(state.rho11, state.rho00, state.rho01.conj())
}

/// How the refocusing pulse at `t = tau` acts on the spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Refocusing {
    /// Transverse inversion only, see [`invert_transverse`].
    #[default]
    PhaseConjugate,
    /// A physical pi rotation about x; also inverts the longitudinal component.
    RotationX,
}

impl Refocusing {
    pub fn apply(&self, state: &SpinHalfState) -> SpinHalfState {
        match self {
            Refocusing::PhaseConjugate => invert_transverse(state),
            Refocusing::RotationX => apply_pulse(state, [1.0, 0.0, 0.0], PI).expect("fixed unit axis"),
        }
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
