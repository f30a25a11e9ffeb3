//! Cross-module oracle suite behind the `validate` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::echo::{echo_decay, run_quantum_echo, QuantumEchoSettings};
use crate::entropy::{build_gauss_sphere_grid, wehrl_closed_form, wehrl_quadrature, MixingParameter};
use crate::error::Result;
use crate::lindblad::{evolve_analytic, evolve_numeric, relaxation_times, ReservoirParams};
use crate::spin::{thermal_state, BlochVector, SpinHalfState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Worst observed error (or worst violation for monotonicity checks).
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &str, value: f64, tolerance: f64) -> Check {
    Check { name: name.to_string(), value, tolerance, passed: value <= tolerance }
}

fn random_state(rng: &mut ChaCha8Rng) -> SpinHalfState {
    loop {
        let v: [f64; 3] = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return SpinHalfState::from_bloch(BlochVector::new(v[0], v[1], v[2]).expect("inside ball"));
        }
    }
}

/// Runs every oracle. Tolerances are multiplied by `tolerance_scale`;
/// a scale of zero makes every inexact check fail.
pub fn run_validation(tolerance_scale: f64, seed: u64) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = tolerance_scale;
    let mut checks = Vec::new();

    let grid = build_gauss_sphere_grid(128, 256)?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let st = random_state(&mut rng);
        worst = worst.max((wehrl_quadrature(&st, &grid) - wehrl_closed_form(MixingParameter::of_state(&st))).abs());
    }
    checks.push(check("wehrl quadrature vs closed form", worst, 1e-8 * s));
    let endpoints = (wehrl_closed_form(MixingParameter::new(1.0)?) - 0.5)
        .abs()
        .max((wehrl_closed_form(MixingParameter::new(0.5)?) - std::f64::consts::LN_2).abs());
    checks.push(check("wehrl endpoints", endpoints, 1e-10 * s));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let res = ReservoirParams::new(
            rng.random_range(0.01..0.1),
            rng.random_range(0.0..0.2),
            rng.random_range(0.0..2.0),
            rng.random_range(0.5..1.5),
        )?;
        let (_, t2) = relaxation_times(&res);
        let st = random_state(&mut rng);
        let t = 3.0 * t2;
        let a = evolve_analytic(&st, t, &res)?;
        let n = evolve_numeric(&st, t, t2 / 1000.0, &res)?;
        worst = worst.max(a.max_abs_diff(&n));
    }
    checks.push(check("rk4 vs analytic", worst, 1e-6 * s));

    let mut worst: f64 = 0.0;
    for &(gt, gl, beta) in &[(0.01, 0.0, 2.0), (0.02, 0.05, 1.0), (0.05, 0.2, 3.0)] {
        let p = QuantumEchoSettings {
            gamma_t: gt,
            gamma_l: gl,
            beta,
            tau: 10.0,
            cells: 128,
            seed: rng.random(),
            ..Default::default()
        }
        .build()?;
        let ts = run_quantum_echo(&p)?;
        let sim = ts.echo_row().and_then(|r| r.decay).unwrap_or(f64::NAN);
        let d = (sim - echo_decay(p.tau(), p.reservoir())?).abs();
        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
    }
    checks.push(check("echo decay vs simulation", worst, 1e-10 * s));

    let mut worst: f64 = 0.0;
    for &gt in &[0.0, 0.02, 0.05] {
        for &gl in &[0.0, 0.05, 0.2] {
            for &beta in &[1.0 / 0.3, 2.0, 1.0] {
                let p =
                    QuantumEchoSettings { gamma_t: gt, gamma_l: gl, beta, tau: 20.0, cells: 64, ..Default::default() }
                        .build()?;
                worst = worst.max(-run_quantum_echo(&p)?.min_s_tot_step());
            }
        }
    }
    checks.push(check("total entropy monotone (grid)", worst.max(0.0), 1e-9 * s));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let res = ReservoirParams::new(
            rng.random_range(0.0..0.2),
            rng.random_range(0.0..0.2),
            rng.random_range(0.0..3.0),
            1.0,
        )?;
        let th = thermal_state(res.alpha)?;
        worst = worst.max(evolve_analytic(&th, rng.random_range(0.0..100.0), &res)?.max_abs_diff(&th));
    }
    checks.push(check("thermal state stationary", worst, 1e-12 * s));

    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_hook_breaks_it() {
        let r = run_validation(1.0, 1).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let broken = run_validation(0.0, 1).unwrap();
        assert!(!broken.all_passed());
    }
}
