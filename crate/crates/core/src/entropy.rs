//! Entropy functionals: Wehrl entropy of spin-1/2 Husimi functions, the
//! Boltzmann entropy built from it, and multinomial entropies of classical
//! macrostate histograms.

use std::f64::consts::{LN_2, TAU};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spin::{husimi, wrap_angle, SphereDirection, SpinHalfState};

/// Total volume of the spin-1/2 sphere under `d^2 s = 2 sin(theta) dtheta dphi / 4 pi`.
pub const SPHERE_VOLUME: f64 = 2.0;

/// Product rule on the sphere: Gauss-Legendre in `cos(theta)`, uniform in `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<SphereDirection>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn nodes(&self) -> &[SphereDirection] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_k w_k f(node_k)`, reduced in node order.
    pub fn integrate<F: Fn(SphereDirection) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&n, &w)| w * f(n)).sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Builds the product grid with weights normalized to [`SPHERE_VOLUME`].
pub fn build_gauss_sphere_grid(n_theta: usize, n_phi: usize) -> Result<QuadratureGrid> {
    if n_theta < 2 {
        return Err(Error::invalid("n_theta", format!("must be >= 2, got {n_theta}")));
    }
    if n_phi < 2 {
        return Err(Error::invalid("n_phi", format!("must be >= 2, got {n_phi}")));
    }
    let (cos_nodes, gl_weights) = gauss_legendre(n_theta);
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (&c, &wc) in cos_nodes.iter().zip(&gl_weights) {
        let theta = c.clamp(-1.0, 1.0).acos();
        for j in 0..n_phi {
            let phi = TAU * j as f64 / n_phi as f64;
            nodes.push(SphereDirection::new(theta, phi)?);
            weights.push(wc / n_phi as f64);
        }
    }
    let total: f64 = weights.iter().sum();
    let scale = SPHERE_VOLUME / total;
    weights.iter_mut().for_each(|w| *w *= scale);
    Ok(QuadratureGrid { nodes, weights })
}

/// Larger eigenvalue `x` of a spin-1/2 density matrix, stored as `max(x, 1-x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingParameter(f64);

impl MixingParameter {
    pub fn new(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid("mixing parameter", format!("must lie in [0, 1], got {x}")));
        }
        Ok(MixingParameter(x))
    }

    pub fn of_state(state: &SpinHalfState) -> Self {
        MixingParameter(state.eigenvalues().0.clamp(0.5, 1.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn x_ln_x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Closed-form Wehrl entropy
/// `[(1-x)^2 (ln(1-x) - 1/2) - x^2 (ln x - 1/2)] / (2x - 1)`.
///
/// Near `x = 1/2` the quotient is replaced by its expansion
/// `ln 2 - r^2/6 - r^4/60` with `r = 2x - 1`.
pub fn wehrl_closed_form(x: MixingParameter) -> f64 {
    let x = x.value();
    let r = 2.0 * x - 1.0;
    if r.abs() < 1e-4 {
        let r2 = r * r;
        return LN_2 - r2 / 6.0 - r2 * r2 / 60.0;
    }
    let y = 1.0 - x;
    let num = y * (x_ln_x(y) - 0.5 * y) - x * (x_ln_x(x) - 0.5 * x);
    num / r
}

/// Wehrl entropy `-sum_k w_k f_k ln f_k` of the Husimi function on a grid.
pub fn wehrl_quadrature(state: &SpinHalfState, grid: &QuadratureGrid) -> f64 {
    -grid.integrate(|d| x_ln_x(husimi(state, d)))
}

/// Boltzmann entropy of N independent particles: `N S_W + N - N ln N`.
pub fn boltzmann_from_wehrl(wehrl: f64, particles: u64) -> Result<f64> {
    if particles == 0 {
        return Err(Error::invalid("N", "must be >= 1"));
    }
    let n = particles as f64;
    Ok(n * wehrl + n - n * n.ln())
}

/// Mean spin energy as a function of time after the excitation pulse:
/// `-(omega_bar/(1+2 alpha)) (1 - exp(-gamma_T (1+2 alpha) t))`.
pub fn mean_hamiltonian_analytic(t: f64, omega_bar: f64, alpha: f64, gamma_t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("must be >= 0, got {t}")));
    }
    let k = 1.0 + 2.0 * alpha;
    Ok(-(omega_bar / k) * -(-gamma_t * k * t).exp_m1())
}

/// Coordinate of the single-particle phase space that a histogram axis bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    Position(usize),
    Momentum(usize),
    Theta,
    Phi,
}

/// A single binned axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BinAxis {
    /// Ascending edges; values outside the outer edges are clamped into the
    /// first/last bin.
    Edges { coordinate: Coordinate, edges: Vec<f64> },
    /// Equal-width periodic bins on [0, 2pi) whose first bin is centred on 0,
    /// so values just below 2pi and just above 0 share a bin.
    PeriodicCentered { coordinate: Coordinate, bins: usize },
}

impl BinAxis {
    pub fn edges(coordinate: Coordinate, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("bin edges", "need >= 2 strictly ascending edges"));
        }
        Ok(BinAxis::Edges { coordinate, edges })
    }

    pub fn periodic(coordinate: Coordinate, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bins", "must be >= 1"));
        }
        Ok(BinAxis::PeriodicCentered { coordinate, bins })
    }

    pub fn coordinate(&self) -> Coordinate {
        match self {
            BinAxis::Edges { coordinate, .. } | BinAxis::PeriodicCentered { coordinate, .. } => *coordinate,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BinAxis::Edges { edges, .. } => edges.len() - 1,
            BinAxis::PeriodicCentered { bins, .. } => *bins,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, value: f64) -> usize {
        match self {
            BinAxis::Edges { edges, .. } => {
                let k = edges.partition_point(|&e| e <= value);
                k.saturating_sub(1).min(edges.len() - 2)
            }
            BinAxis::PeriodicCentered { bins, .. } => {
                let width = TAU / *bins as f64;
                let shifted = wrap_angle(value + 0.5 * width);
                ((shifted / width) as usize).min(bins - 1)
            }
        }
    }
}

/// Cell partition: the Cartesian product of the listed axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub axes: Vec<BinAxis>,
}

impl CellSpec {
    pub fn new(axes: Vec<BinAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("cell spec", "needs at least one axis"));
        }
        Ok(CellSpec { axes })
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(BinAxis::len).product()
    }

    /// Flattened (row-major) cell index of a point given its coordinate
    /// values in axis order.
    pub fn flat_index(&self, coords: &[f64]) -> usize {
        self.axes.iter().zip(coords).fold(0, |acc, (axis, &v)| acc * axis.len() + axis.index(v))
    }
}

/// Occupation numbers `n(C_a)` of a cell partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacrostateHistogram {
    cell_spec: Option<CellSpec>,
    counts: Vec<u64>,
    total: u64,
}

impl MacrostateHistogram {
    /// A histogram given directly by its counts.
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        MacrostateHistogram { cell_spec: None, counts, total }
    }

    /// Bins points described by their coordinate values (in the order of
    /// `spec.axes`).
    pub fn from_points<I>(spec: CellSpec, points: I) -> Self
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut counts = vec![0u64; spec.cell_count()];
        for p in points {
            counts[spec.flat_index(&p)] += 1;
        }
        let total = counts.iter().sum();
        MacrostateHistogram { cell_spec: Some(spec), counts, total }
    }

    pub fn cell_spec(&self) -> Option<&CellSpec> {
        self.cell_spec.as_ref()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Occupied-cell counts in ascending order; two macrostates related by a
    /// relabelling of cells share this multiset.
    pub fn sorted_counts(&self) -> Vec<u64> {
        let mut c: Vec<u64> = self.counts.iter().copied().filter(|&n| n > 0).collect();
        c.sort_unstable();
        c
    }
}

/// Exact multinomial log-count `ln N! - sum_a ln n_a!`.
///
/// The sum runs over the sorted occupation multiset, so histograms that
/// differ only by a permutation of cells give bit-identical results.
pub fn histogram_entropy(hist: &MacrostateHistogram) -> Result<f64> {
    if hist.total == 0 {
        return Err(Error::invalid("N", "histogram is empty"));
    }
    let cells: f64 = hist.sorted_counts().iter().map(|&n| ln_gamma(n as f64 + 1.0)).sum();
    Ok(ln_gamma(hist.total as f64 + 1.0) - cells)
}

/// Stirling form `-N sum_a p_a ln p_a`; agrees with [`histogram_entropy`] to O(ln N).
pub fn histogram_entropy_stirling(hist: &MacrostateHistogram) -> Result<f64> {
    if hist.total == 0 {
        return Err(Error::invalid("N", "histogram is empty"));
    }
    let n = hist.total as f64;
    let s: f64 = hist.sorted_counts().iter().map(|&c| x_ln_x(c as f64 / n)).sum();
    Ok(-n * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::tests::{arb_direction, arb_state};
    use crate::spin::{apply_pulse, BlochVector};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mp(x: f64) -> MixingParameter {
        MixingParameter::new(x).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 2..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
        let (x, _) = gauss_legendre(3);
        assert!((x[2] - 0.774_596_669_241_483_4).abs() < 1e-15);
    }

    #[test]
    fn grid_examples() {
        let g = build_gauss_sphere_grid(64, 128).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert!((g.integrate(|_| 0.5) - 1.0).abs() < 1e-12);
        assert!(g.integrate(|d| d.theta().cos()).abs() < 1e-14);
        assert!(build_gauss_sphere_grid(1, 8).is_err());
        assert!(build_gauss_sphere_grid(8, 1).is_err());
    }

    #[test]
    fn husimi_resolves_unity() {
        let g = build_gauss_sphere_grid(16, 32).unwrap();
        for b in [
            BlochVector { rx: 0.0, ry: 0.0, rz: 0.0 },
            BlochVector { rx: 0.6, ry: -0.3, rz: 0.7 },
            BlochVector { rx: 0.0, ry: 0.0, rz: -1.0 },
        ] {
            let s = SpinHalfState::from_bloch(b);
            assert!((g.integrate(|d| husimi(&s, d)) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!((wehrl_closed_form(mp(1.0)) - 0.5).abs() < 1e-15);
        assert!((wehrl_closed_form(mp(0.0)) - 0.5).abs() < 1e-15);
        assert!((wehrl_closed_form(mp(0.5)) - LN_2).abs() < 1e-15);
        assert!(MixingParameter::new(1.5).is_err());
    }

    #[test]
    fn closed_form_shape() {
        let xs: Vec<f64> = (0..=2000).map(|k| k as f64 / 2000.0).collect();
        let s: Vec<f64> = xs.iter().map(|&x| wehrl_closed_form(mp(x))).collect();
        for (i, &x) in xs.iter().enumerate() {
            let mirror = wehrl_closed_form(mp(1.0 - x));
            assert!((s[i] - mirror).abs() < 1e-13);
            assert!(s[i] >= 0.5 - 1e-15 && s[i] <= LN_2 + 1e-15);
        }
        // increasing on [0, 1/2], decreasing on [1/2, 1]
        for i in 0..2000 {
            if i < 1000 {
                assert!(s[i + 1] > s[i], "i={i}");
            } else {
                assert!(s[i + 1] < s[i], "i={i}");
            }
        }
    }

    #[test]
    fn closed_form_is_continuous_across_the_series_switch() {
        for &r in &[1e-4f64, -1e-4, 3e-4] {
            let x = 0.5 * (1.0 + r);
            let y = 1.0 - x;
            let direct = (y * y * (y.ln() - 0.5) - x * x * (x.ln() - 0.5)) / r;
            let series = LN_2 - r * r / 6.0 - r.powi(4) / 60.0;
            assert!((direct - series).abs() < 1e-11);
            assert!((wehrl_closed_form(mp(x)) - series).abs() < 1e-11);
        }
    }

    #[test]
    fn quadrature_examples() {
        let g = build_gauss_sphere_grid(128, 256).unwrap();
        let mixed = wehrl_quadrature(&SpinHalfState::maximally_mixed(), &g);
        assert!((mixed - LN_2).abs() < 1e-12);
        for &(t, p) in &[(0.0, 0.0), (0.8, 2.2), (PI, 0.0), (2.0, 5.5)] {
            let s = SpinHalfState::coherent(SphereDirection::new(t, p).unwrap());
            assert!((wehrl_quadrature(&s, &g) - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_state_oracle_from_one_dimensional_integral() {
        // -2 int_0^1 u ln u du with u = cos^2(theta/2), by Simpson on a fine grid
        let n = 200_000;
        let h = 1.0 / n as f64;
        let f = |u: f64| -2.0 * x_ln_x(u);
        let mut acc = f(0.0) + f(1.0);
        for k in 1..n {
            acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = acc * h / 3.0;
        assert!((oracle - wehrl_closed_form(mp(1.0))).abs() < 1e-9);
    }

    #[test]
    fn quadrature_converges_under_refinement() {
        let s = SpinHalfState::coherent(SphereDirection::new(0.7, 0.4).unwrap());
        let errs: Vec<f64> = [(32, 64), (64, 128), (128, 256)]
            .iter()
            .map(|&(a, b)| (wehrl_quadrature(&s, &build_gauss_sphere_grid(a, b).unwrap()) - 0.5).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn boltzmann_examples() {
        assert!((boltzmann_from_wehrl(LN_2, 1).unwrap() - (LN_2 + 1.0)).abs() < 1e-15);
        let want = 5.0 + 10.0 - 10.0 * 10f64.ln();
        assert!((boltzmann_from_wehrl(0.5, 10).unwrap() - want).abs() < 1e-13);
        let d = boltzmann_from_wehrl(0.6, 7).unwrap() - boltzmann_from_wehrl(0.55, 7).unwrap();
        assert!((d - 7.0 * 0.05).abs() < 1e-12);
        assert!(boltzmann_from_wehrl(0.5, 0).is_err());
    }

    #[test]
    fn mean_hamiltonian_examples() {
        assert_eq!(mean_hamiltonian_analytic(0.0, 1.3, 0.2, 0.05).unwrap(), 0.0);
        let inf = mean_hamiltonian_analytic(1e6, 1.3, 0.2, 0.05).unwrap();
        assert!((inf + 1.3 / 1.4).abs() < 1e-15);
        assert_eq!(mean_hamiltonian_analytic(12.0, 1.3, 0.2, 0.0).unwrap(), 0.0);
        assert!(mean_hamiltonian_analytic(-1.0, 1.0, 0.0, 0.1).is_err());
    }

    fn ln_multinomial_brute(counts: &[u64]) -> f64 {
        // count distinct arrangements by enumerating all cell assignments
        let n: u64 = counts.iter().sum();
        let k = counts.len() as u64;
        let mut arrangements = 0u64;
        for code in 0..k.pow(n as u32) {
            let mut c = vec![0u64; k as usize];
            let mut x = code;
            for _ in 0..n {
                c[(x % k) as usize] += 1;
                x /= k;
            }
            if c == counts {
                arrangements += 1;
            }
        }
        (arrangements as f64).ln()
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(histogram_entropy(&MacrostateHistogram::from_counts(vec![0, 9, 0])).unwrap(), 0.0);
        let h = MacrostateHistogram::from_counts(vec![2, 2]);
        assert!((histogram_entropy(&h).unwrap() - ln_multinomial_brute(&[2, 2])).abs() < 1e-12);
        assert!((histogram_entropy(&h).unwrap() - 6f64.ln()).abs() < 1e-12);

        // 1000 over 10 cells: exact value by summing logs of integers
        let h = MacrostateHistogram::from_counts(vec![100; 10]);
        let ln_fact = |n: u64| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
        let want = ln_fact(1000) - 10.0 * ln_fact(100);
        assert!((histogram_entropy(&h).unwrap() - want).abs() < 1e-9);
        let stirling = histogram_entropy_stirling(&h).unwrap();
        assert!((stirling - 1000.0 * 10f64.ln()).abs() < 1e-9);
        assert!(stirling - want > 0.0 && stirling - want < 10.0 * 1000f64.ln());
        assert!(histogram_entropy(&MacrostateHistogram::from_counts(vec![0, 0])).is_err());
    }

    #[test]
    fn histogram_entropy_brute_force_on_small_cases() {
        for counts in [vec![1, 2, 1], vec![3, 0, 2], vec![1, 1, 1, 1], vec![4, 1]] {
            let h = MacrostateHistogram::from_counts(counts.clone());
            assert!((histogram_entropy(&h).unwrap() - ln_multinomial_brute(&counts)).abs() < 1e-12);
        }
    }

    fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
        if k == 1 {
            return vec![vec![n]];
        }
        (0..=n)
            .flat_map(|first| {
                compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
            })
            .collect()
    }

    #[test]
    fn uniform_occupancy_maximizes_histogram_entropy() {
        for n in 1..=8u64 {
            for k in 1..=4usize {
                let all = compositions(n, k);
                let entropy = |c: &Vec<u64>| histogram_entropy(&MacrostateHistogram::from_counts(c.clone())).unwrap();
                let best = all.iter().map(entropy).fold(f64::MIN, f64::max);
                let spread = |c: &Vec<u64>| c.iter().max().unwrap() - c.iter().min().unwrap();
                for c in &all {
                    if spread(c) <= 1 {
                        assert!((entropy(c) - best).abs() < 1e-12, "n={n} k={k} {c:?}");
                    } else {
                        assert!(entropy(c) < best - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_axis_centres_first_bin_on_zero() {
        let a = BinAxis::periodic(Coordinate::Phi, 64).unwrap();
        assert_eq!(a.index(0.0), 0);
        assert_eq!(a.index(TAU - 1e-12), 0);
        assert_eq!(a.index(1e-12), 0);
        assert_eq!(a.index(TAU / 64.0), 1);
        assert_eq!(a.index(PI), 32);
        let e = BinAxis::edges(Coordinate::Position(0), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!((e.index(-1.0), e.index(0.5), e.index(1.0), e.index(9.0)), (0, 0, 1, 1));
        assert!(BinAxis::edges(Coordinate::Theta, vec![1.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn quadrature_matches_closed_form(s in arb_state()) {
            thread_local! {
                static GRID: QuadratureGrid = build_gauss_sphere_grid(128, 256).unwrap();
            }
            let q = GRID.with(|g| wehrl_quadrature(&s, g));
            let c = wehrl_closed_form(MixingParameter::of_state(&s));
            prop_assert!((q - c).abs() < 1e-8, "q={q} c={c}");
        }

        #[test]
        fn wehrl_is_rotation_invariant(s in arb_state(), axis in arb_direction(), angle in -PI..PI) {
            thread_local! {
                static GRID: QuadratureGrid = build_gauss_sphere_grid(96, 192).unwrap();
            }
            let rotated = apply_pulse(&s, axis.unit_vector(), angle).unwrap();
            let d = GRID.with(|g| wehrl_quadrature(&rotated, g) - wehrl_quadrature(&s, g));
            prop_assert!(d.abs() < 1e-7);
        }
    }
}
