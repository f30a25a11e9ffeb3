//! Parameter sets behind the two published figures, in units `g mu B = 1`.
//!
//! Only `gamma_T = 0.05`, the temperatures and the `T1/T2` ratios are fixed by
//! the figures; everything else below is a choice documented in the output.

use crate::echo::QuantumEchoSettings;
use crate::error::Result;
use crate::lindblad::{relaxation_times, ReservoirParams};
use crate::spin::thermal_alpha;

pub const FIG1_GAMMA_T: f64 = 0.05;
pub const FIG1_TEMPERATURES: [f64; 3] = [0.3, 0.5, 1.0];
pub const FIG2_GAMMA_T: f64 = 0.05;
pub const FIG2_TEMPERATURE: f64 = 0.5;
pub const FIG2_RATIOS: [f64; 3] = [0.75, 1.5, 3.0];
pub const FIG2_TAU_POINTS: usize = 50;

/// Parameters the figures leave open, as `(key, value)` pairs for output headers.
pub fn unstated_parameters(settings: &QuantumEchoSettings) -> Vec<(&'static str, String)> {
    vec![
        ("cells", settings.cells.to_string()),
        ("sigma_b", settings.sigma_b.to_string()),
        ("gamma_l", settings.gamma_l.to_string()),
        ("seed", settings.seed.to_string()),
        ("tau", settings.tau.to_string()),
    ]
}

/// One Fig. 1 curve: `tau = T2`, recorded up to `4 tau`.
pub fn fig1_settings(temperature: f64) -> Result<QuantumEchoSettings> {
    let beta = 1.0 / temperature;
    let alpha = thermal_alpha(beta, 1.0, 1.0)?;
    let (_, t2) = relaxation_times(&ReservoirParams::new(FIG1_GAMMA_T, 0.0, alpha, 1.0)?);
    Ok(QuantumEchoSettings {
        beta,
        gamma_t: FIG1_GAMMA_T,
        gamma_l: 0.0,
        tau: t2,
        t_end: Some(4.0 * t2),
        dt_record: Some(t2 / 50.0),
        ..Default::default()
    })
}

/// Template for Fig. 2; `gamma_L` is replaced per ratio.
pub fn fig2_settings() -> QuantumEchoSettings {
    QuantumEchoSettings {
        beta: 1.0 / FIG2_TEMPERATURE,
        gamma_t: FIG2_GAMMA_T,
        gamma_l: 0.0,
        tau: 1.0,
        ..Default::default()
    }
}

/// Geometric grid of `n` echo times from `T2_min / 100` to `4 T2_max` over
/// the requested ratios.
pub fn fig2_taus(gamma_t: f64, alpha: f64, ratios: &[f64], n: usize) -> Vec<f64> {
    let t1 = 1.0 / (gamma_t * (1.0 + 2.0 * alpha));
    let t2s = ratios.iter().map(|r| t1 / r);
    let lo = 0.01 * t2s.clone().fold(f64::INFINITY, f64::min);
    let hi = 4.0 * t2s.fold(0.0, f64::max);
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_uses_tau_equal_t2() {
        for &t in &FIG1_TEMPERATURES {
            let s = fig1_settings(t).unwrap();
            let p = s.build().unwrap();
            let (_, t2) = relaxation_times(p.reservoir());
            assert!((p.tau() - t2).abs() < 1e-12 * t2);
            assert!((p.t_end() - 4.0 * t2).abs() < 1e-12 * t2);
        }
    }

    #[test]
    fn fig2_grid_spans_all_curves() {
        let taus = fig2_taus(0.05, 0.2, &FIG2_RATIOS, 50);
        assert_eq!(taus.len(), 50);
        assert!(taus.windows(2).all(|w| w[1] > w[0]));
        let t1 = 1.0 / (0.05 * 1.4);
        assert!((taus[0] - 0.01 * t1 / 3.0).abs() < 1e-12);
        assert!((taus[49] - 4.0 * t1 / 0.75).abs() < 1e-9);
    }
}
