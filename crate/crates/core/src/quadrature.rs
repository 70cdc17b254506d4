//! Quadrature rules used by the measure and density computations.
//!
//! Sphere integrals back the Busemann-Hausdorff density and indicatrix
//! measures: a periodic trapezoid rule for the circle (spectrally accurate
//! for smooth integrands), a Gauss-Legendre × azimuthal product design for
//! `S²`, and seeded Monte Carlo above that with a reported standard error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CIRCLE_NODES: usize = 512;
const S2_POLAR_ORDER: usize = 32;
const S2_AZIMUTH_NODES: usize = 64;
const HIGH_DIM_SAMPLES: usize = 8192;

/// Fixed quadrature design on the Euclidean unit sphere `S^{n-1}`.
pub struct SphereRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// True when the rule is Monte Carlo and estimates deserve error bars.
    pub stochastic: bool,
}

impl SphereRule {
    /// Builds the design for ambient dimension `n >= 2`. `seed` only
    /// matters for the stochastic high-dimensional rule.
    pub fn new(n: usize, seed: u64) -> Self {
        assert!(n >= 2, "sphere rule needs ambient dimension >= 2");
        match n {
            2 => {
                let w = 2.0 * std::f64::consts::PI / CIRCLE_NODES as f64;
                let nodes = (0..CIRCLE_NODES)
                    .map(|k| {
                        let th = w * k as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect();
                Self {
                    nodes,
                    weights: vec![w; CIRCLE_NODES],
                    stochastic: false,
                }
            }
            3 => {
                let (gl_nodes, gl_weights) = gauss_legendre(S2_POLAR_ORDER);
                let dphi = 2.0 * std::f64::consts::PI / S2_AZIMUTH_NODES as f64;
                let mut nodes = Vec::with_capacity(S2_POLAR_ORDER * S2_AZIMUTH_NODES);
                let mut weights = Vec::with_capacity(S2_POLAR_ORDER * S2_AZIMUTH_NODES);
                for (c, wc) in gl_nodes.iter().zip(&gl_weights) {
                    let s = (1.0 - c * c).sqrt();
                    for k in 0..S2_AZIMUTH_NODES {
                        let phi = dphi * k as f64;
                        nodes.push(vec![s * phi.cos(), s * phi.sin(), *c]);
                        weights.push(wc * dphi);
                    }
                }
                Self {
                    nodes,
                    weights,
                    stochastic: false,
                }
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let area = sphere_area(n);
                let w = area / HIGH_DIM_SAMPLES as f64;
                let nodes = (0..HIGH_DIM_SAMPLES)
                    .map(|_| random_unit_vector(&mut rng, n))
                    .collect();
                Self {
                    nodes,
                    weights: vec![w; HIGH_DIM_SAMPLES],
                    stochastic: true,
                }
            }
        }
    }

    /// Integrates `f` over the sphere; returns (value, standard error).
    /// The standard error is zero for the deterministic designs.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> (f64, f64) {
        let mut total = 0.0;
        let mut sum_sq = 0.0;
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(node);
            total += w * v;
            sum_sq += v * v;
        }
        if !self.stochastic {
            return (total, 0.0);
        }
        let m = self.nodes.len() as f64;
        let area = self.weights.iter().sum::<f64>();
        let mean = total / area;
        let var = (sum_sq / m - mean * mean).max(0.0);
        (total, area * (var / m).sqrt())
    }
}

/// Uniform random point on `S^{n-1}` via normalized Gaussians (Box-Muller,
/// so only `rand`'s uniform source is needed).
pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Surface area of the Euclidean unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    // A_{n-1} = n * V_n
    n as f64 * unit_ball_volume(n)
}

/// Volume of the Euclidean unit ball in `R^n`, by the two-step recurrence
/// `V_n = 2π V_{n-2} / n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI * unit_ball_volume(n - 2) / n as f64,
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Newton iteration from the Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_m` and its derivative at `x`.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive Simpson quadrature over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_step(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_rule_integrates_smooth_periodic_to_machine_precision() {
        let rule = SphereRule::new(2, 0);
        let (v, se) = rule.integrate(|th| (2.0 + th[0]).powi(-2));
        // ∮ (2+cosθ)^{-2} dθ = 2π·2/(3√3)
        let exact = 2.0 * PI * 2.0 / (3.0 * 3.0_f64.sqrt());
        assert!((v - exact).abs() < 1e-12);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn s2_rule_has_enough_nodes_and_integrates_polynomials() {
        let rule = SphereRule::new(3, 0);
        assert!(rule.nodes.len() >= 590);
        let (area, _) = rule.integrate(|_| 1.0);
        assert!((area - 4.0 * PI).abs() < 1e-10);
        let (second_moment, _) = rule.integrate(|u| u[2] * u[2]);
        assert!((second_moment - 4.0 * PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn high_dim_rule_reports_error_bars() {
        let rule = SphereRule::new(4, 7);
        let (area, se) = rule.integrate(|_| 1.0);
        assert!(se.abs() < 1e-12); // constant integrand has zero variance
        assert!((area - sphere_area(4)).abs() < 1e-9);
        let (m2, se2) = rule.integrate(|u| u[0] * u[0]);
        assert!(se2 > 0.0);
        assert!((m2 - sphere_area(4) / 4.0).abs() < 4.0 * se2 + 1e-2);
    }

    #[test]
    fn unit_ball_volumes_match_known_values() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn adaptive_simpson_handles_kinked_integrand() {
        // ∫₀² min(x, 1) dx = 1.5
        let v = adaptive_simpson(&|x: f64| x.min(1.0), 0.0, 2.0, 1e-12);
        assert!((v - 1.5).abs() < 1e-9);
    }

    #[test]
    fn gauss_legendre_exact_for_high_degree() {
        let (x, w) = gauss_legendre(8);
        let int: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert!((int - 2.0 / 15.0).abs() < 1e-14);
    }
}
