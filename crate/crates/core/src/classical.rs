//! Classical precessing dipoles in an inhomogeneous field, the label-averaged
//! dephasing density and its diffusive entropy production.

use std::f64::consts::{FRAC_PI_2, TAU};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::entropy::{BinAxis, CellSpec, Coordinate, MacrostateHistogram};
use crate::error::{require_nonnegative, require_positive, Error, Result};
use crate::spin::{PhysicalParams, SphereDirection};

/// Spatial structure of the field magnitude; the field points along z.
///
/// The sample occupies the cube `[0, extent)^3` and is split into equal slabs
/// along x; slab `k` is field cell `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    mean_b: f64,
    extent: f64,
    kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Piecewise-constant field with Gaussian cell values.
    GaussianRandomCells { sigma_b: f64, seed: u64, cell_fields: Vec<f64> },
    /// `B(x) = mean_b + slope (x_0 - extent/2)`, binned into `cells` slabs.
    LinearGradient { slope: f64, cells: usize },
}

impl FieldProfile {
    /// Draws `cells` field values from N(mean_b, sigma_b^2) by stratified
    /// inverse-CDF sampling, then shuffles them over the slabs.
    pub fn gaussian_random_cells(mean_b: f64, sigma_b: f64, cells: usize, seed: u64, extent: f64) -> Result<Self> {
        require_positive("mean_b", mean_b)?;
        require_nonnegative("sigma_b", sigma_b)?;
        require_positive("extent", extent)?;
        if cells == 0 {
            return Err(Error::invalid("cells", "must be >= 1"));
        }
        let std = StdNormal::new(0.0, 1.0).expect("standard normal");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cell_fields: Vec<f64> = (0..cells)
            .map(|k| {
                let u: f64 = (k as f64 + rng.random::<f64>()) / cells as f64;
                mean_b + sigma_b * std.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16))
            })
            .collect();
        cell_fields.shuffle(&mut rng);
        if let Some(bad) = cell_fields.iter().find(|&&b| !(b > 0.0)) {
            return Err(Error::invalid("sigma_b", format!("sampled a nonpositive field {bad}")));
        }
        Ok(FieldProfile { mean_b, extent, kind: FieldKind::GaussianRandomCells { sigma_b, seed, cell_fields } })
    }

    pub fn linear_gradient(mean_b: f64, slope: f64, cells: usize, extent: f64) -> Result<Self> {
        require_positive("mean_b", mean_b)?;
        require_positive("extent", extent)?;
        if !slope.is_finite() {
            return Err(Error::invalid("slope", "must be finite"));
        }
        if cells == 0 {
            return Err(Error::invalid("cells", "must be >= 1"));
        }
        if mean_b - 0.5 * slope.abs() * extent <= 0.0 {
            return Err(Error::invalid("slope", "field must stay positive over the sample"));
        }
        Ok(FieldProfile { mean_b, extent, kind: FieldKind::LinearGradient { slope, cells } })
    }

    pub fn mean_b(&self) -> f64 {
        self.mean_b
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn cells(&self) -> usize {
        match &self.kind {
            FieldKind::GaussianRandomCells { cell_fields, .. } => cell_fields.len(),
            FieldKind::LinearGradient { cells, .. } => *cells,
        }
    }

    pub fn cell_edges(&self) -> Vec<f64> {
        let k = self.cells();
        (0..=k).map(|i| self.extent * i as f64 / k as f64).collect()
    }

    pub fn cell_of(&self, position: [f64; 3]) -> usize {
        let k = self.cells();
        let idx = (position[0] / self.extent * k as f64).floor();
        (idx.max(0.0) as usize).min(k - 1)
    }

    pub fn field_at(&self, position: [f64; 3]) -> f64 {
        match &self.kind {
            FieldKind::GaussianRandomCells { cell_fields, .. } => cell_fields[self.cell_of(position)],
            FieldKind::LinearGradient { slope, .. } => self.mean_b + slope * (position[0] - 0.5 * self.extent),
        }
    }

    /// Representative field per cell (cell centre for the gradient).
    pub fn cell_fields(&self) -> Vec<f64> {
        match &self.kind {
            FieldKind::GaussianRandomCells { cell_fields, .. } => cell_fields.clone(),
            FieldKind::LinearGradient { .. } => {
                let k = self.cells();
                (0..k).map(|i| self.field_at([self.extent * (i as f64 + 0.5) / k as f64, 0.0, 0.0])).collect()
            }
        }
    }
}

/// Gaussian spread of precession frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDistribution {
    pub omega_bar: f64,
    pub sigma_omega: f64,
}

impl FrequencyDistribution {
    pub fn new(omega_bar: f64, sigma_omega: f64) -> Result<Self> {
        if !omega_bar.is_finite() {
            return Err(Error::invalid("omega_bar", "must be finite"));
        }
        let d = FrequencyDistribution { omega_bar, sigma_omega: require_nonnegative("sigma_omega", sigma_omega)? };
        if !d.is_narrow() {
            warn!("sigma_omega = {sigma_omega} is not small compared to omega_bar = {omega_bar}");
        }
        Ok(d)
    }

    /// Empirical mean and standard deviation of a set of frequencies.
    pub fn from_samples(omegas: &[f64]) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::invalid("frequencies", "need at least one sample"));
        }
        let n = omegas.len() as f64;
        let mean = omegas.iter().sum::<f64>() / n;
        let var = omegas.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
        FrequencyDistribution::new(mean, var.sqrt())
    }

    /// `sigma_omega < omega_bar / 10`.
    pub fn is_narrow(&self) -> bool {
        self.sigma_omega < 0.1 * self.omega_bar.abs()
    }
}

/// A classical dipole: position, momentum, spin direction and its local
/// precession frequency `g mu B(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalDipole {
    position: [f64; 3],
    momentum: [f64; 3],
    spin: SphereDirection,
    omega: f64,
}

impl ClassicalDipole {
    pub fn new(
        position: [f64; 3],
        momentum: [f64; 3],
        spin: SphereDirection,
        field: &FieldProfile,
        params: &PhysicalParams,
    ) -> Self {
        ClassicalDipole { position, momentum, spin, omega: params.precession_frequency(field.field_at(position)) }
    }

    pub fn position(&self) -> [f64; 3] {
        self.position
    }

    pub fn momentum(&self) -> [f64; 3] {
        self.momentum
    }

    pub fn spin(&self) -> SphereDirection {
        self.spin
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Moves the dipole and refreshes the cached frequency.
    pub fn with_position(&self, position: [f64; 3], field: &FieldProfile, params: &PhysicalParams) -> Self {
        ClassicalDipole::new(position, self.momentum, self.spin, field, params)
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        self.momentum.iter().map(|p| p * p).sum::<f64>() / (2.0 * mass)
    }

    pub fn coordinate(&self, c: Coordinate) -> f64 {
        match c {
            Coordinate::Position(i) => self.position[i],
            Coordinate::Momentum(i) => self.momentum[i],
            Coordinate::Theta => self.spin.theta(),
            Coordinate::Phi => self.spin.phi(),
        }
    }

    /// Free precession about z for a time `dt`.
    pub fn precess(&self, dt: f64) -> Self {
        self.with_spin(self.spin.phi() + self.omega * dt)
    }

    /// The refocusing pulse: `phi -> -phi`.
    pub fn pi_pulse(&self) -> Self {
        self.with_spin(-self.spin.phi())
    }

    fn with_spin(&self, phi: f64) -> Self {
        ClassicalDipole { spin: SphereDirection::new(self.spin.theta(), phi).expect("theta unchanged"), ..*self }
    }
}

pub fn precess(dipole: &ClassicalDipole, dt: f64) -> Result<ClassicalDipole> {
    require_nonnegative("dt", dt)?;
    Ok(dipole.precess(dt))
}

pub fn pi_pulse(dipole: &ClassicalDipole) -> ClassicalDipole {
    dipole.pi_pulse()
}

/// `m sum_i n_i`, summed in ensemble order.
pub fn net_magnetization(ensemble: &[ClassicalDipole], moment: f64) -> Result<[f64; 3]> {
    if ensemble.is_empty() {
        return Err(Error::invalid("ensemble", "must be nonempty"));
    }
    let mut m = [0.0; 3];
    for d in ensemble {
        let n = d.spin.unit_vector();
        for i in 0..3 {
            m[i] += n[i];
        }
    }
    Ok(m.map(|c| moment * c))
}

/// Fourier cutoff large enough that the dropped Gaussian factors are below
/// `exp(-32)`: `ceil(8 / (sigma t + eps))`, capped at 512.
pub fn default_fourier_cutoff(sigma_t: f64) -> usize {
    let n = (8.0 / (sigma_t.abs() + 1e-9)).ceil();
    (n as usize).clamp(1, 512)
}

/// Label-averaged phi density of an initially aligned ensemble,
/// `(1/2pi) sum_{|n| <= n_max} exp(i n (phi - omega_bar t) - n^2 sigma^2 t^2 / 2)`.
///
/// Negative values from truncation ringing are clipped to zero.
pub fn averaged_f(phi: f64, t: f64, dist: &FrequencyDistribution, n_max: usize) -> f64 {
    let s2 = (dist.sigma_omega * t).powi(2);
    let arg = phi - dist.omega_bar * t;
    let series: f64 = (1..=n_max)
        .map(|n| {
            let nf = n as f64;
            (-0.5 * nf * nf * s2).exp() * (nf * arg).cos()
        })
        .sum();
    let f = (1.0 + 2.0 * series) / TAU;
    if f < 0.0 {
        if f < -1e-12 {
            warn!("averaged_f truncation ringing {f:e} at phi = {phi}, clipped to 0 (n_max = {n_max})");
        }
        0.0
    } else {
        f
    }
}

/// [`averaged_f`] sampled on `phi_j = 2 pi j / n`.
pub fn averaged_f_grid(n: usize, t: f64, dist: &FrequencyDistribution, n_max: usize) -> Vec<f64> {
    (0..n).map(|j| averaged_f(TAU * j as f64 / n as f64, t, dist, n_max)).collect()
}

/// `-int f ln f dphi` of a periodic density sampled on a uniform grid.
pub fn phi_density_entropy(f_samples: &[f64]) -> f64 {
    let h = TAU / f_samples.len() as f64;
    -h * f_samples.iter().map(|&f| if f > 0.0 { f * f.ln() } else { 0.0 }).sum::<f64>()
}

/// Spectral derivative of periodic samples on [0, 2pi).
pub fn spectral_derivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        let k = if 2 * j < n {
            j as f64
        } else if 2 * j == n {
            0.0
        } else {
            j as f64 - n as f64
        };
        *c *= Complex::new(0.0, k / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Entropy production of the diffusive phi equation,
/// `sigma^2 t int (1/f) (df/dphi)^2 dphi`.
pub fn diffusive_entropy_rate(f_samples: &[f64], sigma_omega: f64, t: f64) -> Result<f64> {
    if f_samples.len() < 2 {
        return Err(Error::invalid("f_samples", "need at least two samples"));
    }
    if let Some(bad) = f_samples.iter().find(|&&f| !(f > 0.0)) {
        return Err(Error::invalid("f_samples", format!("density must be > 0, found {bad}")));
    }
    let df = spectral_derivative(f_samples);
    let h = TAU / f_samples.len() as f64;
    let fisher: f64 = f_samples.iter().zip(&df).map(|(f, d)| d * d / f).sum::<f64>() * h;
    Ok(sigma_omega * sigma_omega * t * fisher)
}

/// Ratio of the neglected field-gradient force term to the precession term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleEstimate {
    pub ratio: f64,
    /// `ratio < 0.01`
    pub negligible: bool,
}

/// `sqrt(beta / M) / L`: thermal de Broglie wavelength over the
/// inhomogeneity length.
pub fn liouville_correction_ratio(beta: f64, mass: f64, length: f64) -> Result<LiouvilleEstimate> {
    require_positive("beta", beta)?;
    require_positive("mass", mass)?;
    if !(length > 0.0) {
        return Err(Error::invalid("L", "must be > 0"));
    }
    let ratio = (beta / mass).sqrt() / length;
    Ok(LiouvilleEstimate { ratio, negligible: ratio < 0.01 })
}

/// Spin configuration of a freshly sampled ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinStart {
    /// All spins along +x, as right after the excitation pulse.
    Transverse,
    /// All spins along the field (+z), the low-temperature equilibrium.
    FieldAligned,
}

/// Positions uniform over the sample, Maxwell-Boltzmann momenta at
/// `params.beta`. Deterministic for a given seed.
pub fn sample_thermal_ensemble(
    n: usize,
    params: &PhysicalParams,
    field: &FieldProfile,
    start: SpinStart,
    seed: u64,
) -> Result<Vec<ClassicalDipole>> {
    if n == 0 {
        return Err(Error::invalid("N", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let momentum = Normal::new(0.0, (params.mass / params.beta).sqrt())
        .map_err(|e| Error::invalid("momentum distribution", e.to_string()))?;
    let spin = match start {
        SpinStart::Transverse => SphereDirection::new(FRAC_PI_2, 0.0)?,
        SpinStart::FieldAligned => SphereDirection::new(0.0, 0.0)?,
    };
    let extent = field.extent();
    Ok((0..n)
        .map(|_| {
            let x = [0; 3].map(|_| rng.random::<f64>() * extent);
            let p = [0; 3].map(|_| momentum.sample(&mut rng));
            ClassicalDipole::new(x, p, spin, field, params)
        })
        .collect())
}

/// Histogram of an ensemble over an arbitrary cell partition.
pub fn macrostate(spec: &CellSpec, ensemble: &[ClassicalDipole]) -> MacrostateHistogram {
    let coords: Vec<Coordinate> = spec.axes.iter().map(BinAxis::coordinate).collect();
    MacrostateHistogram::from_points(
        spec.clone(),
        ensemble.iter().map(|d| coords.iter().map(|&c| d.coordinate(c)).collect()),
    )
}

/// Spin-only macrostate: phi bins alone.
pub fn spin_only_spec(phi_bins: usize) -> Result<CellSpec> {
    CellSpec::new(vec![BinAxis::periodic(Coordinate::Phi, phi_bins)?])
}

/// Joint macrostate: field cell (position bin) x phi bin.
pub fn joint_spec(field: &FieldProfile, phi_bins: usize) -> Result<CellSpec> {
    CellSpec::new(vec![
        BinAxis::edges(Coordinate::Position(0), field.cell_edges())?,
        BinAxis::periodic(Coordinate::Phi, phi_bins)?,
    ])
}
