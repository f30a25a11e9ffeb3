//! Python bindings: `import spinecho`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spinecho_core as core;
use spinecho_core::classical::{self, FieldProfile, FrequencyDistribution};
use spinecho_core::echo::{self, ClassicalEchoProtocol, QuantumEchoSettings};
use spinecho_core::entropy::{self, MacrostateHistogram, MixingParameter};
use spinecho_core::lindblad;
use spinecho_core::spin::{self, BlochVector, PhysicalParams, Refocusing};

create_exception!(spinecho, InfeasibleError, PyValueError);
create_exception!(spinecho, UndefinedDecayError, PyArithmeticError);

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::InvalidInput { .. } => PyValueError::new_err(e.to_string()),
        core::Error::Infeasible(_) => InfeasibleError::new_err(e.to_string()),
        core::Error::UndefinedDecay => UndefinedDecayError::new_err(e.to_string()),
    }
}

trait PyResultExt<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> PyResultExt<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "SphereDirection", module = "spinecho", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySphereDirection(spin::SphereDirection);

#[pymethods]
impl PySphereDirection {
    #[new]
    fn new(theta: f64, phi: f64) -> PyResult<Self> {
        spin::SphereDirection::new(theta, phi).py_err().map(Self)
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.0.phi()
    }

    fn unit_vector(&self) -> (f64, f64, f64) {
        let [x, y, z] = self.0.unit_vector();
        (x, y, z)
    }

    fn __repr__(&self) -> String {
        format!("SphereDirection(theta={}, phi={})", self.0.theta(), self.0.phi())
    }
}

#[pyclass(name = "SpinHalfState", module = "spinecho", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySpinHalfState(spin::SpinHalfState);

#[pymethods]
impl PySpinHalfState {
    /// `rho11` is the +1/2 population, `rho01 = <+1/2|rho|-1/2>`.
    #[new]
    fn new(rho11: f64, rho00: f64, rho01: Complex64) -> PyResult<Self> {
        spin::SpinHalfState::new(rho11, rho00, rho01).py_err().map(Self)
    }

    #[staticmethod]
    fn maximally_mixed() -> Self {
        Self(spin::SpinHalfState::maximally_mixed())
    }

    #[staticmethod]
    fn coherent(direction: PySphereDirection) -> Self {
        Self(spin::SpinHalfState::coherent(direction.0))
    }

    #[staticmethod]
    fn from_bloch(rx: f64, ry: f64, rz: f64) -> PyResult<Self> {
        Ok(Self(spin::SpinHalfState::from_bloch(BlochVector::new(rx, ry, rz).py_err()?)))
    }

    #[staticmethod]
    fn thermal(alpha: f64) -> PyResult<Self> {
        spin::thermal_state(alpha).py_err().map(Self)
    }

    #[getter]
    fn rho11(&self) -> f64 {
        self.0.rho11()
    }

    #[getter]
    fn rho00(&self) -> f64 {
        self.0.rho00()
    }

    #[getter]
    fn rho01(&self) -> Complex64 {
        self.0.rho01()
    }

    fn bloch(&self) -> (f64, f64, f64) {
        let b = self.0.bloch();
        (b.rx, b.ry, b.rz)
    }

    fn eigenvalues(&self) -> (f64, f64) {
        self.0.eigenvalues()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn mixing_parameter(&self) -> f64 {
        MixingParameter::of_state(&self.0).value()
    }

    fn husimi(&self, direction: PySphereDirection) -> f64 {
        spin::husimi(&self.0, direction.0)
    }

    fn excite(&self) -> Self {
        Self(spin::excitation_pulse(&self.0))
    }

    /// `kind` is "phase-conjugate" or "rotation-x".
    #[pyo3(signature = (kind = "phase-conjugate"))]
    fn refocus(&self, kind: &str) -> PyResult<Self> {
        Ok(Self(parse_refocusing(kind)?.apply(&self.0)))
    }

    fn __repr__(&self) -> String {
        format!("SpinHalfState(rho11={}, rho00={}, rho01={})", self.0.rho11(), self.0.rho00(), self.0.rho01())
    }
}

fn parse_refocusing(kind: &str) -> PyResult<Refocusing> {
    match kind {
        "phase-conjugate" => Ok(Refocusing::PhaseConjugate),
        "rotation-x" => Ok(Refocusing::RotationX),
        other => Err(PyValueError::new_err(format!("refocusing must be phase-conjugate or rotation-x, got {other}"))),
    }
}

#[pyclass(name = "ReservoirParams", module = "spinecho", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyReservoirParams(lindblad::ReservoirParams);

#[pymethods]
impl PyReservoirParams {
    #[new]
    #[pyo3(signature = (gamma_t, gamma_l, alpha, omega_p = 1.0))]
    fn new(gamma_t: f64, gamma_l: f64, alpha: f64, omega_p: f64) -> PyResult<Self> {
        lindblad::ReservoirParams::new(gamma_t, gamma_l, alpha, omega_p).py_err().map(Self)
    }

    #[getter]
    fn gamma_t(&self) -> f64 {
        self.0.gamma_t
    }

    #[getter]
    fn gamma_l(&self) -> f64 {
        self.0.gamma_l
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn omega_p(&self) -> f64 {
        self.0.omega_p
    }

    /// `(T1, T2)`.
    fn relaxation_times(&self) -> (f64, f64) {
        lindblad::relaxation_times(&self.0)
    }

    fn __repr__(&self) -> String {
        let r = &self.0;
        format!(
            "ReservoirParams(gamma_t={}, gamma_l={}, alpha={}, omega_p={})",
            r.gamma_t, r.gamma_l, r.alpha, r.omega_p
        )
    }
}

#[pyfunction]
fn thermal_alpha(beta: f64, g: f64, field: f64) -> PyResult<f64> {
    spin::thermal_alpha(beta, g, field).py_err()
}

#[pyfunction]
fn wehrl_closed_form(x: f64) -> PyResult<f64> {
    Ok(entropy::wehrl_closed_form(MixingParameter::new(x).py_err()?))
}

#[pyfunction]
#[pyo3(signature = (state, n_theta = 128, n_phi = 256))]
fn wehrl_quadrature(state: PySpinHalfState, n_theta: usize, n_phi: usize) -> PyResult<f64> {
    let grid = entropy::build_gauss_sphere_grid(n_theta, n_phi).py_err()?;
    Ok(entropy::wehrl_quadrature(&state.0, &grid))
}

#[pyfunction]
#[pyo3(signature = (wehrl, particles = 1))]
fn boltzmann_from_wehrl(wehrl: f64, particles: u64) -> PyResult<f64> {
    entropy::boltzmann_from_wehrl(wehrl, particles).py_err()
}

#[pyfunction]
fn mean_hamiltonian_analytic(t: f64, omega_bar: f64, alpha: f64, gamma_t: f64) -> PyResult<f64> {
    entropy::mean_hamiltonian_analytic(t, omega_bar, alpha, gamma_t).py_err()
}

/// `ln(N! / prod n_a!)` of a list of occupation numbers.
#[pyfunction]
fn histogram_entropy(counts: Vec<u64>) -> PyResult<f64> {
    entropy::histogram_entropy(&MacrostateHistogram::from_counts(counts)).py_err()
}

#[pyfunction]
fn evolve_analytic(state: PySpinHalfState, t: f64, params: PyReservoirParams) -> PyResult<PySpinHalfState> {
    lindblad::evolve_analytic(&state.0, t, &params.0).py_err().map(PySpinHalfState)
}

#[pyfunction]
fn evolve_numeric(state: PySpinHalfState, t: f64, dt: f64, params: PyReservoirParams) -> PyResult<PySpinHalfState> {
    lindblad::evolve_numeric(&state.0, t, dt, &params.0).py_err().map(PySpinHalfState)
}

#[pyfunction]
fn gamma_l_for_ratio(ratio: f64, gamma_t: f64, alpha: f64) -> PyResult<f64> {
    lindblad::gamma_l_for_ratio(ratio, gamma_t, alpha).py_err()
}

#[pyfunction]
fn echo_decay(tau: f64, params: PyReservoirParams) -> PyResult<f64> {
    echo::echo_decay(tau, &params.0).py_err()
}

/// Label-averaged phase density on `n` equally spaced angles.
#[pyfunction]
#[pyo3(signature = (n, t, omega_bar, sigma_omega, n_max = None))]
fn averaged_f(n: usize, t: f64, omega_bar: f64, sigma_omega: f64, n_max: Option<usize>) -> PyResult<Vec<f64>> {
    let dist = FrequencyDistribution::new(omega_bar, sigma_omega).py_err()?;
    let n_max = n_max.unwrap_or_else(|| classical::default_fourier_cutoff(sigma_omega * t));
    Ok(classical::averaged_f_grid(n, t, &dist, n_max))
}

#[pyfunction]
fn diffusive_entropy_rate(samples: Vec<f64>, sigma_omega: f64, t: f64) -> PyResult<f64> {
    classical::diffusive_entropy_rate(&samples, sigma_omega, t).py_err()
}

#[pyfunction]
fn phi_density_entropy(samples: Vec<f64>) -> f64 {
    classical::phi_density_entropy(&samples)
}

#[allow(clippy::too_many_arguments)]
fn settings(
    tau: f64,
    beta: f64,
    gamma_t: f64,
    gamma_l: f64,
    sigma_b: f64,
    cells: usize,
    seed: u64,
    t_end: Option<f64>,
    dt_record: Option<f64>,
    refocusing: &str,
) -> PyResult<QuantumEchoSettings> {
    Ok(QuantumEchoSettings {
        tau,
        beta,
        gamma_t,
        gamma_l,
        sigma_b,
        cells,
        seed,
        t_end,
        dt_record,
        refocusing: parse_refocusing(refocusing)?,
        ..Default::default()
    })
}

/// Runs the quantum protocol and returns a dict of equal-length columns.
#[pyfunction]
#[pyo3(signature = (tau = 100.0, beta = 2.0, gamma_t = 0.005, gamma_l = 0.0, sigma_b = 0.1, cells = 1024, seed = 0, t_end = None, dt_record = None, refocusing = "phase-conjugate"))]
#[allow(clippy::too_many_arguments)]
fn run_quantum_echo<'py>(
    py: Python<'py>,
    tau: f64,
    beta: f64,
    gamma_t: f64,
    gamma_l: f64,
    sigma_b: f64,
    cells: usize,
    seed: u64,
    t_end: Option<f64>,
    dt_record: Option<f64>,
    refocusing: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let s = settings(tau, beta, gamma_t, gamma_l, sigma_b, cells, seed, t_end, dt_record, refocusing)?;
    let proto = s.build().py_err()?;
    let ts = echo::run_quantum_echo(&proto).py_err()?;
    let d = PyDict::new(py);
    let col = |f: fn(&echo::EntropyRow) -> f64| ts.rows.iter().map(f).collect::<Vec<f64>>();
    d.set_item("t", col(|r| r.t))?;
    d.set_item("S_W", col(|r| r.s_w))?;
    d.set_item("S_B", col(|r| r.s_b))?;
    d.set_item("H_bar", col(|r| r.h_bar))?;
    d.set_item("S_tot", col(|r| r.s_tot))?;
    d.set_item("M_x", col(|r| r.m_x))?;
    d.set_item("M_y", col(|r| r.m_y))?;
    d.set_item("M_z", col(|r| r.m_z))?;
    d.set_item("D", ts.echo_row().and_then(|r| r.decay))?;
    Ok(d)
}

/// Returns `(ratio, tau, D, delta_S_tot)` tuples, descending D within a ratio.
#[pyfunction]
#[pyo3(signature = (ratios, taus = None, beta = 2.0, gamma_t = 0.05, cells = 1024, seed = 0))]
fn entropy_vs_decay(
    ratios: Vec<f64>,
    taus: Option<Vec<f64>>,
    beta: f64,
    gamma_t: f64,
    cells: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let s = QuantumEchoSettings {
        tau: 1.0,
        ..settings(1.0, beta, gamma_t, 0.0, 0.1, cells, seed, None, None, "phase-conjugate")?
    };
    let template = s.build().py_err()?;
    let taus = taus.unwrap_or_else(|| {
        core::presets::fig2_taus(gamma_t, template.reservoir().alpha, &ratios, core::presets::FIG2_TAU_POINTS)
    });
    let rows = echo::entropy_vs_decay(&taus, &template, &ratios).py_err()?;
    Ok(rows.iter().map(|r| (r.ratio, r.tau, r.decay, r.delta_s_tot)).collect())
}

/// Classical dipole ensemble through the echo; dict of columns.
#[pyfunction]
#[pyo3(signature = (particles = 10_000, cells = 100, mean_b = 1.0, sigma_b = 0.1, tau = 100.0, phi_bins = 64, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_classical_echo<'py>(
    py: Python<'py>,
    particles: usize,
    cells: usize,
    mean_b: f64,
    sigma_b: f64,
    tau: f64,
    phi_bins: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = PhysicalParams::new(1.0, 1.0, 1.0, 2.0, 1000.0).py_err()?;
    let field = FieldProfile::gaussian_random_cells(mean_b, sigma_b, cells, seed, 1.0).py_err()?;
    let proto = ClassicalEchoProtocol { particles, tau, phi_bins, seed, ..Default::default() };
    let ts = echo::run_classical_echo(&proto, &field, &params).py_err()?;
    let d = PyDict::new(py);
    let col = |f: fn(&echo::ClassicalEchoRow) -> f64| ts.rows.iter().map(f).collect::<Vec<f64>>();
    d.set_item("t", col(|r| r.t))?;
    d.set_item("M_x", col(|r| r.m_x))?;
    d.set_item("M_y", col(|r| r.m_y))?;
    d.set_item("M_z", col(|r| r.m_z))?;
    d.set_item("S_spin_only", col(|r| r.s_spin_only))?;
    d.set_item("S_joint", col(|r| r.s_joint))?;
    Ok(d)
}

/// Oracle suite as a list of `(name, value, tolerance, passed)`.
#[pyfunction]
#[pyo3(signature = (tolerance_scale = 1.0, seed = 0))]
fn run_validation(tolerance_scale: f64, seed: u64) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let r = core::validate::run_validation(tolerance_scale, seed).py_err()?;
    Ok(r.checks.into_iter().map(|c| (c.name, c.value, c.tolerance, c.passed)).collect())
}

#[pymodule]
fn spinecho(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySphereDirection>()?;
    m.add_class::<PySpinHalfState>()?;
    m.add_class::<PyReservoirParams>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("UndefinedDecayError", m.py().get_type::<UndefinedDecayError>())?;
    m.add_function(wrap_pyfunction!(thermal_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(wehrl_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(wehrl_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(boltzmann_from_wehrl, m)?)?;
    m.add_function(wrap_pyfunction!(mean_hamiltonian_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(histogram_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_l_for_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(echo_decay, m)?)?;
    m.add_function(wrap_pyfunction!(averaged_f, m)?)?;
    m.add_function(wrap_pyfunction!(diffusive_entropy_rate, m)?)?;
    m.add_function(wrap_pyfunction!(phi_density_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(run_quantum_echo, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_vs_decay, m)?)?;
    m.add_function(wrap_pyfunction!(run_classical_echo, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    Ok(())
}
