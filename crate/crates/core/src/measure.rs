//! Busemann-Hausdorff volumes of balls and annuli, comparison volumes,
//! the annuli volume-comparison check, volume growth, and ray-cone
//! volume splitting.
//!
//! General volumes are stratified Monte Carlo against the BH density,
//! presampled once per `(structure, center, max radius)` so a whole radii
//! grid reuses the same points. Flat quotients override Monte Carlo with
//! deterministic evaluators: a slice integral on the cylinder and
//! two-resolution grid coverage on the torus.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics;
use crate::linalg;
use crate::norm::{FinslerStructure, SampleSpec};
use crate::quadrature::{adaptive_simpson, sphere_area, unit_ball_volume};

/// Curvature/S-curvature bounds for the comparison space.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComparisonParams {
    pub kappa: f64,
    pub lambda: f64,
    pub n: usize,
}

impl ComparisonParams {
    pub fn new(kappa: f64, lambda: f64, n: usize) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::InvalidParameter("lambda must be >= 0".into()));
        }
        Ok(Self { kappa, lambda, n })
    }
}

/// The comparison function `s_κ`: `sin(√κ t)/... ` branchwise; the κ < 0
/// branch uses `sinh` (the comparison-function convention; see the crate
/// README for why the oscillatory alternative is rejected).
pub fn s_kappa(kappa: f64, t: f64) -> f64 {
    if kappa > 0.0 {
        (kappa.sqrt() * t).sin()
    } else if kappa < 0.0 {
        ((-kappa).sqrt() * t).sinh()
    } else {
        t
    }
}

/// Comparison volume `V^{κ,λ}_{r,R}(Σ) = H(Σ) ∫_r^R e^{λt} s_κ(t)^{n−1} dt`.
/// The κ = 0 integrand integrates in closed form; other κ use adaptive
/// quadrature.
pub fn comparison_volume(params: &ComparisonParams, r: f64, big_r: f64, sigma_measure: f64) -> f64 {
    assert!(r >= 0.0 && big_r >= r, "need 0 <= r <= R");
    assert!(sigma_measure > 0.0, "sigma measure must be positive");
    let m = (params.n - 1) as u32;
    let integral = if params.kappa == 0.0 {
        poly_exp_integral(m, params.lambda, big_r) - poly_exp_integral(m, params.lambda, r)
    } else {
        let k = params.kappa;
        let l = params.lambda;
        adaptive_simpson(
            &|t: f64| (l * t).exp() * s_kappa(k, t).powi(m as i32),
            r,
            big_r,
            1e-13 * (1.0 + big_r - r),
        )
    };
    sigma_measure * integral
}

/// `∫₀^R t^m e^{λt} dt` in closed form (integration by parts for λ > 0).
fn poly_exp_integral(m: u32, lambda: f64, upper: f64) -> f64 {
    if lambda == 0.0 {
        return upper.powi(m as i32 + 1) / (m as f64 + 1.0);
    }
    // I_m = t^m e^{λt}/λ − (m/λ) I_{m−1}
    let mut acc = ((lambda * upper).exp() - 1.0) / lambda; // I_0
    for j in 1..=m {
        acc = upper.powi(j as i32) * (lambda * upper).exp() / lambda - (j as f64 / lambda) * acc;
    }
    acc
}

/// Measurable set of indicatrix directions, identified by the Euclidean
/// angle of the direction (the radial-graph parametrization of the
/// indicatrix).
#[derive(Clone)]
pub enum Gamma {
    Full,
    /// Arc of Euclidean direction angles `[from, to]`, radians (n = 2).
    Arc { from: f64, to: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

impl Gamma {
    pub fn contains(&self, dir: &[f64]) -> bool {
        match self {
            Gamma::Full => true,
            Gamma::Arc { from, to } => {
                let tau = 2.0 * std::f64::consts::PI;
                let ang = dir[1].atan2(dir[0]).rem_euclid(tau);
                let a = from.rem_euclid(tau);
                let b = to.rem_euclid(tau);
                if a <= b {
                    (a..=b).contains(&ang)
                } else {
                    ang >= a || ang <= b
                }
            }
            Gamma::Custom(f) => f(dir),
        }
    }

    /// `(n−1)`-measure of the corresponding subset of the unit sphere.
    pub fn sphere_measure(&self, n: usize) -> f64 {
        match self {
            Gamma::Full => sphere_area(n),
            Gamma::Arc { from, to } => {
                assert!(n == 2, "arc sets are planar");
                (to - from).rem_euclid(2.0 * std::f64::consts::PI)
            }
            Gamma::Custom(f) => {
                let mut rng = ChaCha8Rng::seed_from_u64(0xaaaa);
                let m = 200_000;
                let hits = (0..m)
                    .filter(|_| f(&crate::quadrature::random_unit_vector(&mut rng, n)))
                    .count();
                sphere_area(n) * hits as f64 / m as f64
            }
        }
    }
}

/// Monte Carlo budget: sample count, radial strata, and the seed.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub samples: usize,
    pub shells: usize,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            shells: 32,
            seed: 0,
        }
    }
}

enum SampleRegion {
    Disc { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl SampleRegion {
    fn volume(&self, n: usize) -> f64 {
        match self {
            SampleRegion::Disc { radius, .. } => unit_ball_volume(n) * radius.powi(n as i32),
            SampleRegion::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
        }
    }
}

struct Stratum {
    lebesgue: f64,
    distances: Vec<f64>,
    densities: Vec<f64>,
    /// initial F-unit direction of a minimal geodesic from the center,
    /// flattened with stride n; NaN when unavailable
    directions: Vec<f64>,
}

/// Stratified sampler holding per-point distance, BH density, and minimal
/// initial direction, reused across every radius/`Γ` query.
pub struct VolumeSampler {
    n: usize,
    strata: Vec<Stratum>,
}

impl VolumeSampler {
    /// Samples the enclosing region of `B⁺(p, r_max)` once.
    pub fn new(
        s: &FinslerStructure,
        p: &[f64],
        r_max: f64,
        spec: &SamplerSpec,
    ) -> Result<Self> {
        let n = s.dim();
        let region = enclosing_region(s, p, r_max)?;
        let shells = spec.shells.max(1);
        let per = (spec.samples / shells).max(1);
        let density_const = if s.is_x_independent() {
            Some(s.bh_density(p)?)
        } else {
            None
        };
        let strata: Vec<Stratum> = (0..shells)
            .into_par_iter()
            .map(|shell| {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    spec.seed ^ (shell as u64).wrapping_mul(0x9e3779b97f4a7c15),
                );
                let total = region.volume(n);
                let lebesgue = total / shells as f64;
                let mut distances = Vec::with_capacity(per);
                let mut densities = Vec::with_capacity(per);
                let mut directions = Vec::with_capacity(per * n);
                for _ in 0..per {
                    let x = sample_in_stratum(&region, shell, shells, n, &mut rng);
                    let (d, dir) = distance_and_direction(s, p, &x);
                    distances.push(d);
                    densities.push(match density_const {
                        Some(c) => c,
                        None => density_for_sampling(s, &x),
                    });
                    match dir {
                        Some(u) => directions.extend_from_slice(&u),
                        None => directions.extend(std::iter::repeat(f64::NAN).take(n)),
                    }
                }
                Stratum {
                    lebesgue,
                    distances,
                    densities,
                    directions,
                }
            })
            .collect();
        Ok(Self { n, strata })
    }

    /// `μ_F(B⁺(p, r))` with its standard error.
    pub fn ball_volume(&self, r: f64) -> (f64, f64) {
        self.weighted(|d, _| d <= r)
    }

    /// Volume of the annulus `A^Γ_{r,R}(p)` with its standard error.
    pub fn annulus_volume(&self, gamma: &Gamma, r: f64, big_r: f64) -> (f64, f64) {
        match gamma {
            Gamma::Full => self.weighted(|d, _| d >= r && d <= big_r),
            _ => self.weighted(|d, dir| {
                d >= r && d <= big_r && !dir[0].is_nan() && gamma.contains(dir)
            }),
        }
    }

    fn weighted<F: Fn(f64, &[f64]) -> bool>(&self, member: F) -> (f64, f64) {
        let mut total = 0.0;
        let mut var = 0.0;
        for st in &self.strata {
            let m = st.distances.len();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for i in 0..m {
                let dir = &st.directions[i * self.n..(i + 1) * self.n];
                let f = if member(st.distances[i], dir) {
                    st.densities[i]
                } else {
                    0.0
                };
                sum += f;
                sum_sq += f * f;
            }
            let mean = sum / m as f64;
            let v = (sum_sq / m as f64 - mean * mean).max(0.0);
            total += st.lebesgue * mean;
            var += st.lebesgue * st.lebesgue * v / m as f64;
        }
        (total, var.sqrt())
    }
}

/// BH density with the fast paths used inside samplers: `√det g` for
/// Riemannian metrics, quadrature otherwise. Cross-checked against
/// `bh_density` in the tests.
pub fn density_for_sampling(s: &FinslerStructure, x: &[f64]) -> f64 {
    if s.is_riemannian_metric() {
        let n = s.dim();
        let mut y = vec![0.0; n];
        y[0] = 1.0;
        let g = crate::tensor::g_matrix::<f64>(s.norm_obj(), x, &y, n);
        linalg::determinant(&g, n).max(0.0).sqrt()
    } else {
        s.bh_density(x).unwrap_or(f64::NAN)
    }
}

fn sample_in_stratum<R: Rng>(
    region: &SampleRegion,
    shell: usize,
    shells: usize,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    match region {
        SampleRegion::Disc { center, radius } => {
            // equal-volume radial shells; radius from the shell-local CDF
            let lo = (shell as f64 / shells as f64).powf(1.0 / n as f64) * radius;
            let hi = ((shell as f64 + 1.0) / shells as f64).powf(1.0 / n as f64) * radius;
            let u: f64 = rng.gen_range(0.0..1.0);
            let r = (lo.powi(n as i32) + u * (hi.powi(n as i32) - lo.powi(n as i32)))
                .powf(1.0 / n as f64);
            let dir = crate::quadrature::random_unit_vector(rng, n);
            let mut x = center.clone();
            linalg::axpy(&mut x, r, &dir);
            x
        }
        SampleRegion::Box { lo, hi } => {
            // slice the first axis into equal strata
            let w = (hi[0] - lo[0]) / shells as f64;
            let mut x: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect();
            x[0] = lo[0] + w * shell as f64 + rng.gen_range(0.0..w);
            x
        }
    }
}

/// Forward distance together with the initial F-unit direction of a
/// minimal geodesic from `p` (when cheaply available).
fn distance_and_direction(
    s: &FinslerStructure,
    p: &[f64],
    x: &[f64],
) -> (f64, Option<Vec<f64>>) {
    if s.is_x_independent() {
        let delta = linalg::sub(x, p);
        if linalg::norm2(&delta) == 0.0 {
            return (0.0, None);
        }
        let mut best = f64::INFINITY;
        let mut best_dir = None;
        for d in deck_translates(s, &delta) {
            if linalg::norm2(&d) == 0.0 {
                continue;
            }
            let len = s.norm_value(p, &d);
            if len < best {
                best = len;
                best_dir = Some(linalg::scale(&d, 1.0 / len));
            }
        }
        return (best, best_dir);
    }
    if let Some(dist) = &s.solvers().distance {
        let d = dist(p, x);
        let dir = s
            .solvers()
            .log_map
            .as_ref()
            .and_then(|log| log(p, x))
            .map(|(y, _)| y);
        return (d, dir);
    }
    match geodesics::distance(s, p, x) {
        Ok(d) => (d, None),
        Err(_) => (f64::INFINITY, None),
    }
}

fn deck_translates(s: &FinslerStructure, delta: &[f64]) -> Vec<Vec<f64>> {
    let lattice = s.lattice();
    if lattice.is_empty() {
        return vec![delta.to_vec()];
    }
    let mut shifts = vec![delta.to_vec()];
    for gen in lattice {
        let len = linalg::norm2(gen);
        let bound = (linalg::norm2(delta) / len).ceil() as i64 + 2;
        let mut next = Vec::new();
        for base in &shifts {
            for k in -bound..=bound {
                let mut d = base.clone();
                linalg::axpy(&mut d, k as f64, gen);
                next.push(d);
            }
        }
        shifts = next;
    }
    shifts
}

/// Chart region guaranteed to contain the forward metric ball.
fn enclosing_region(s: &FinslerStructure, p: &[f64], r: f64) -> Result<SampleRegion> {
    let n = s.dim();
    // slowest unit direction bounds the chart reach of x-independent norms
    let slow = |at: &[f64]| -> f64 {
        let m = 256;
        let mut worst: f64 = f64::INFINITY;
        if n == 2 {
            for k in 0..m {
                let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                worst = worst.min(s.norm_value(at, &[th.cos(), th.sin()]));
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..m * 4 {
                let u = crate::quadrature::random_unit_vector(&mut rng, n);
                worst = worst.min(s.norm_value(at, &u));
            }
        }
        worst
    };
    if !s.lattice().is_empty() {
        // fundamental domain along lattice axes, metric bound elsewhere
        let reach = r / slow(p) * 1.0001;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let on_lattice = s
                .lattice()
                .iter()
                .find(|g| g[i] != 0.0)
                .map(|g| g[i].abs());
            match on_lattice {
                Some(period) => {
                    lo[i] = 0.0;
                    hi[i] = period;
                }
                None => {
                    lo[i] = p[i] - reach;
                    hi[i] = p[i] + reach;
                }
            }
        }
        return Ok(SampleRegion::Box { lo, hi });
    }
    if s.is_x_independent() {
        return Ok(SampleRegion::Disc {
            center: p.to_vec(),
            radius: r / slow(p) * 1.0001,
        });
    }
    if let Some(dist) = &s.solvers().distance {
        // grow a chart disc until its whole boundary is beyond distance r
        let mut radius = (linalg::norm2(p) + r / slow(p).max(1e-6)).max(1e-3);
        for _ in 0..200 {
            let mut min_d = f64::INFINITY;
            for k in 0..64 {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                let mut q = vec![0.0; n];
                q[0] = radius * th.cos();
                q[1] = radius * th.sin();
                if !s.contains(&q) {
                    min_d = f64::INFINITY;
                    break;
                }
                min_d = min_d.min(dist(p, &q));
            }
            if min_d > r {
                return Ok(SampleRegion::Disc {
                    center: vec![0.0; n],
                    radius,
                });
            }
            radius *= 1.3;
            let cap = match s.family() {
                "hyperbolic-disk" | "funk-disk" => 0.999999,
                _ => f64::INFINITY,
            };
            if radius > cap {
                radius = cap;
                return Ok(SampleRegion::Disc {
                    center: vec![0.0; n],
                    radius,
                });
            }
        }
        return Err(Error::ChartCoverage {
            point: p.to_vec(),
            radius: r,
        });
    }
    Err(Error::ChartCoverage {
        point: p.to_vec(),
        radius: r,
    })
}

/// `μ_F(B⁺(p, r))`: exact evaluators on flat quotients, stratified Monte
/// Carlo elsewhere. Returns `(volume, standard error)`; the deterministic
/// paths report their quadrature error estimate as the second component.
pub fn ball_volume(
    s: &FinslerStructure,
    p: &[f64],
    r: f64,
    spec: &SamplerSpec,
) -> Result<(f64, f64)> {
    if r <= 0.0 {
        return Ok((0.0, 0.0));
    }
    match s.lattice().len() {
        1 => exact_cylinder_ball(s, p, r),
        2 => exact_torus_ball(s, p, r),
        _ => Ok(VolumeSampler::new(s, p, r, spec)?.ball_volume(r)),
    }
}

/// Volume of `A^Γ_{r,R}(p)`: points at distance in `[r, R]` whose minimal
/// geodesic from `p` starts in `Γ`.
pub fn annulus_volume(
    s: &FinslerStructure,
    p: &[f64],
    gamma: &Gamma,
    r: f64,
    big_r: f64,
    spec: &SamplerSpec,
) -> Result<(f64, f64)> {
    if big_r <= 0.0 {
        return Ok((0.0, 0.0));
    }
    if matches!(gamma, Gamma::Full) && !s.lattice().is_empty() {
        let (vr, er) = ball_volume(s, p, r, spec)?;
        let (vr2, er2) = ball_volume(s, p, big_r, spec)?;
        return Ok((vr2 - vr, er.hypot(er2)));
    }
    Ok(VolumeSampler::new(s, p, big_r, spec)?.annulus_volume(gamma, r, big_r))
}

/// Exact cylinder ball volume: the quotient ball area is the integral over
/// the unbounded coordinate of `min(slice width, circumference)`.
fn exact_cylinder_ball(s: &FinslerStructure, p: &[f64], r: f64) -> Result<(f64, f64)> {
    let period = linalg::norm2(&s.lattice()[0]);
    let tau = s.bh_density(p)?;
    let nm = s.norm_obj();
    // slowest direction bounds the slice support
    let mut slow = f64::INFINITY;
    for k in 0..512 {
        let th = 2.0 * std::f64::consts::PI * k as f64 / 512.0;
        slow = slow.min(nm.f(p, &[th.cos(), th.sin()]));
    }
    let w_max = r / slow * 1.000001;
    let slice = |w: f64| -> f64 {
        // width of {u : F(u, w) <= r}; F is convex in u
        let fu = |u: f64| nm.f(p, &[u, w]);
        // golden-section minimum of F along the slice
        let (mut a, mut b) = (-w_max, w_max);
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
        for _ in 0..80 {
            if fu(c) < fu(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - phi * (b - a);
            d = a + phi * (b - a);
        }
        let u_star = 0.5 * (a + b);
        if fu(u_star) > r {
            return 0.0;
        }
        // bisect outward on both sides for F = r
        let edge = |mut lo: f64, mut hi: f64| -> f64 {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if fu(mid) <= r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let right = edge(u_star, u_star + 2.0 * w_max + r);
        let left = edge(u_star, u_star - 2.0 * w_max - r);
        (right - left).abs().min(period)
    };
    let vol = tau * adaptive_simpson(&slice, -w_max, w_max, 1e-10 * r.max(1.0));
    Ok((vol, 1e-8 * vol))
}

/// Torus ball volume by midpoint-grid coverage at two resolutions; the
/// difference between resolutions is reported as the error estimate.
fn exact_torus_ball(s: &FinslerStructure, p: &[f64], r: f64) -> Result<(f64, f64)> {
    let tau = s.bh_density(p)?;
    let (lx, ly) = (
        linalg::norm2(&s.lattice()[0]),
        linalg::norm2(&s.lattice()[1]),
    );
    let count_cover = |m: usize| -> f64 {
        let mut covered = 0usize;
        for i in 0..m {
            for j in 0..m {
                let x = [
                    (i as f64 + 0.5) / m as f64 * lx,
                    (j as f64 + 0.5) / m as f64 * ly,
                ];
                let delta = linalg::sub(&x, p);
                let mut best = f64::INFINITY;
                for d in deck_translates(s, &delta) {
                    best = best.min(s.norm_value(p, &d));
                }
                if best <= r {
                    covered += 1;
                }
            }
        }
        covered as f64 / (m * m) as f64 * lx * ly
    };
    let coarse = count_cover(256);
    let fine = count_cover(512);
    Ok((tau * fine, tau * (fine - coarse).abs().max(1e-12)))
}

/// One checked pair of nested annuli.
#[derive(Clone, Debug, Serialize)]
pub struct RatioEntry {
    pub r: f64,
    pub big_r: f64,
    pub volume: f64,
    pub se: f64,
    pub comparison: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonViolation {
    pub outer: (f64, f64),
    pub inner: (f64, f64),
    pub outer_ratio: f64,
    pub inner_ratio: f64,
    pub excess: f64,
    pub allowance: f64,
}

/// Output of [`volume_comparison_check`].
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub params: ComparisonParams,
    pub min_ricci_sampled: f64,
    pub max_s_curvature_sampled: f64,
    pub entries: Vec<RatioEntry>,
    pub violations: Vec<ComparisonViolation>,
}

impl ComparisonReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies the annuli volume-comparison monotonicity
/// `vol(A_{s,S})/V_{s,S} ≤ vol(A_{r,R})/V_{r,R}` over all admissible grid
/// pairs, after asserting the curvature hypotheses on samples.
pub fn volume_comparison_check(
    s: &FinslerStructure,
    p: &[f64],
    params: &ComparisonParams,
    radii: &[f64],
    gamma: &Gamma,
    spec: &SamplerSpec,
    hypothesis_samples: &SampleSpec,
) -> Result<ComparisonReport> {
    let (ric_min, s_max) = sample_curvature_bounds(s, hypothesis_samples)?;
    let tol = 1e-6;
    if ric_min < (params.n as f64 - 1.0) * params.kappa - tol * (1.0 + params.kappa.abs()) {
        return Err(Error::HypothesisFailed {
            detail: format!(
                "sampled Ricci minimum {ric_min} below (n-1)κ = {}",
                (params.n as f64 - 1.0) * params.kappa
            ),
        });
    }
    if s_max > params.lambda + tol {
        return Err(Error::HypothesisFailed {
            detail: format!(
                "sampled |S| maximum {s_max} above λ = {}",
                params.lambda
            ),
        });
    }

    let mut rs: Vec<f64> = radii.to_vec();
    rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let r_max = *rs.last().unwrap();
    let sigma = gamma.sphere_measure(params.n);

    // one sampler serves every annulus unless the quotient evaluators do
    let sampler = match (matches!(gamma, Gamma::Full), s.lattice().is_empty()) {
        (true, false) => None,
        _ => Some(VolumeSampler::new(s, p, r_max, spec)?),
    };

    let mut entries = Vec::new();
    for (i, &r) in rs.iter().enumerate() {
        for &big_r in rs.iter().skip(i + 1) {
            let (vol, se) = match &sampler {
                Some(sm) => sm.annulus_volume(gamma, r, big_r),
                None => annulus_volume(s, p, gamma, r, big_r, spec)?,
            };
            let comparison = comparison_volume(params, r, big_r, sigma);
            entries.push(RatioEntry {
                r,
                big_r,
                volume: vol,
                se,
                comparison,
                ratio: vol / comparison,
            });
        }
    }

    let mut violations = Vec::new();
    for low in &entries {
        // low = (r, R) bounds every nested-later pair high = (s, S) with
        // r ≤ s ≤ S and r ≤ R ≤ S: ratio(s,S) ≤ ratio(r,R)
        for high in &entries {
            let admissible = low.r <= high.r && low.big_r <= high.big_r;
            if !admissible {
                continue;
            }
            let allowance = 3.0
                * (high.se / high.comparison).hypot(low.se / low.comparison)
                + 1e-9 * (1.0 + low.ratio.abs());
            let excess = high.ratio - low.ratio;
            if excess > allowance {
                violations.push(ComparisonViolation {
                    outer: (low.r, low.big_r),
                    inner: (high.r, high.big_r),
                    outer_ratio: low.ratio,
                    inner_ratio: high.ratio,
                    excess,
                    allowance,
                });
            }
        }
    }
    Ok(ComparisonReport {
        params: *params,
        min_ricci_sampled: ric_min,
        max_s_curvature_sampled: s_max,
        entries,
        violations,
    })
}

fn sample_curvature_bounds(
    s: &FinslerStructure,
    spec: &SampleSpec,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = s.sample_points(spec.count.max(1), &mut rng);
    let mut ric_min = f64::INFINITY;
    let mut s_max = 0.0_f64;
    for x in &points {
        let dirs = s.indicatrix_sample(x, 2, rng.gen())?;
        for v in dirs {
            ric_min = ric_min.min(s.ricci_curvature(&v)?);
            s_max = s_max.max(s.s_curvature(&v)?.abs());
        }
    }
    Ok((ric_min, s_max))
}

/// Point of the volume-growth ratio curve.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthPoint {
    pub r: f64,
    pub volume: f64,
    pub se: f64,
    pub comparison: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

/// Ratio curve `vol(B(p,r)) / V^{0,λ}_{0,r}(S^{n−1})` and the tail
/// estimate of the volume growth `v_M`.
#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport {
    pub lambda: f64,
    pub points: Vec<GrowthPoint>,
    pub v_m: f64,
    pub v_m_se: f64,
    pub monotonicity_violations: usize,
}

impl VolumeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,volume,se,comparison,ratio,ratio_se\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.r, p.volume, p.se, p.comparison, p.ratio, p.ratio_se
            ));
        }
        out
    }
}

/// Estimates the asymptotic volume `v_M` from the ratio curve on
/// `(0, r_max]`; the estimate averages the last quarter of the grid.
pub fn volume_growth_estimate(
    s: &FinslerStructure,
    p: &[f64],
    lambda: f64,
    r_max: f64,
    grid: usize,
    spec: &SamplerSpec,
) -> Result<VolumeReport> {
    let n = s.dim();
    let params = ComparisonParams::new(0.0, lambda, n)?;
    let grid = grid.max(4);
    let radii: Vec<f64> = (1..=grid).map(|i| r_max * i as f64 / grid as f64).collect();
    let quotient = !s.lattice().is_empty();
    let sampler = if quotient {
        None
    } else {
        Some(VolumeSampler::new(s, p, r_max, spec)?)
    };
    let mut points = Vec::with_capacity(grid);
    for &r in &radii {
        let (volume, se) = match &sampler {
            Some(sm) => sm.ball_volume(r),
            None => ball_volume(s, p, r, spec)?,
        };
        let comparison = comparison_volume(&params, 0.0, r, sphere_area(n));
        points.push(GrowthPoint {
            r,
            volume,
            se,
            comparison,
            ratio: volume / comparison,
            ratio_se: se / comparison,
        });
    }
    let tail = grid.div_ceil(4);
    let v_m = points[grid - tail..].iter().map(|p| p.ratio).sum::<f64>() / tail as f64;
    let v_m_se = points[grid - tail..]
        .iter()
        .map(|p| p.ratio_se * p.ratio_se)
        .sum::<f64>()
        .sqrt()
        / tail as f64;
    let mut violations = 0;
    for w in points.windows(2) {
        let allowance = 3.0 * w[0].ratio_se.hypot(w[1].ratio_se) + 1e-9;
        if w[1].ratio > w[0].ratio + allowance {
            violations += 1;
        }
    }
    Ok(VolumeReport {
        lambda,
        points,
        v_m,
        v_m_se,
        monotonicity_violations: violations,
    })
}

/// Volumes of the ray cone, its complement cone, and the δ-tube shells.
#[derive(Clone, Debug, Serialize)]
pub struct RayConeReport {
    pub radius: f64,
    pub ray_cone_volume: f64,
    pub ray_cone_se: f64,
    pub non_ray_cone_volume: f64,
    pub non_ray_cone_se: f64,
    /// `(δ, vol(B(T_δ(Γ_ray) ∖ Γ_ray, r)) / V^{0,λ}_{0,r})` per requested δ.
    pub tube_ratios: Vec<(f64, f64)>,
    /// Lower-bound check `vol(B(Γ_ray, r)) ≥ v_M V^{0,λ}_{0,r} − 3·SE`.
    pub ray_lower_bound_ok: bool,
    pub v_m_reference: f64,
}

/// Splits ball volume along the cone over the finite-horizon ray
/// directions (planar structures). Cone membership uses every lift
/// direction of the point, matching `C(Γ) = {exp_p(t·y) : t ≥ 0, y ∈ Γ}`.
pub fn ray_cone_volume(
    s: &FinslerStructure,
    p: &[f64],
    rays: &crate::geodesics::RayReport,
    r: f64,
    deltas: &[f64],
    lambda: f64,
    v_m_reference: f64,
    spec: &SamplerSpec,
) -> Result<RayConeReport> {
    let n = s.dim();
    if n != 2 {
        return Err(Error::InvalidParameter(
            "ray-cone volumes are implemented for planar fixtures".into(),
        ));
    }
    // accepted directions as angular intervals on the direction circle
    let m = rays.directions.len();
    let tau = 2.0 * std::f64::consts::PI;
    let half_cell = 0.5 * tau / m as f64;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (k, acc) in rays.accepted.iter().enumerate() {
        if !acc {
            continue;
        }
        let ang = rays.directions[k][1].atan2(rays.directions[k][0]).rem_euclid(tau);
        intervals.push((ang - half_cell, ang + half_cell));
    }
    intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let merged = merge_intervals(intervals);
    let in_rays = |ang: f64| -> bool {
        let a = ang.rem_euclid(tau);
        merged
            .iter()
            .any(|(lo, hi)| (a >= *lo && a <= *hi) || (a + tau >= *lo && a + tau <= *hi))
    };
    let angular_gap = |ang: f64| -> f64 {
        let a = ang.rem_euclid(tau);
        let mut best = f64::INFINITY;
        for (lo, hi) in &merged {
            for cand in [a, a + tau, a - tau] {
                let gap = if cand < *lo {
                    lo - cand
                } else if cand > *hi {
                    cand - hi
                } else {
                    0.0
                };
                best = best.min(gap);
            }
        }
        best
    };

    let params = ComparisonParams::new(0.0, lambda, n)?;
    let v_ref = comparison_volume(&params, 0.0, r, sphere_area(n));

    // dedicated stratified pass: member flags depend on every lift
    let region = enclosing_region(s, p, r)?;
    let shells = spec.shells.max(1);
    let per = (spec.samples / shells).max(1);
    let density0 = s.bh_density(p)?;
    struct Acc {
        ray: f64,
        ray_sq: f64,
        non: f64,
        non_sq: f64,
        tubes: Vec<f64>,
        lebesgue: f64,
        count: usize,
    }
    let acc: Vec<Acc> = (0..shells)
        .into_par_iter()
        .map(|shell| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ shell_seed_mix(shell as u64));
            let mut a = Acc {
                ray: 0.0,
                ray_sq: 0.0,
                non: 0.0,
                non_sq: 0.0,
                tubes: vec![0.0; deltas.len()],
                lebesgue: region.volume(2) / shells as f64,
                count: per,
            };
            for _ in 0..per {
                let x = sample_in_stratum(&region, shell, shells, 2, &mut rng);
                let (d, _) = distance_and_direction(s, p, &x);
                if d > r {
                    continue;
                }
                let delta = linalg::sub(&x, p);
                if linalg::norm2(&delta) == 0.0 {
                    continue;
                }
                let mut hit_ray = false;
                let mut hit_non = false;
                let mut tube_gaps: Vec<bool> = vec![false; deltas.len()];
                for lift in deck_translates(s, &delta) {
                    if linalg::norm2(&lift) == 0.0 {
                        continue;
                    }
                    let ang = lift[1].atan2(lift[0]);
                    if in_rays(ang) {
                        hit_ray = true;
                    } else {
                        hit_non = true;
                        let gap = angular_gap(ang);
                        for (ti, dl) in deltas.iter().enumerate() {
                            if gap <= *dl {
                                tube_gaps[ti] = true;
                            }
                        }
                    }
                }
                let w = density0;
                if hit_ray {
                    a.ray += w;
                    a.ray_sq += w * w;
                }
                if hit_non {
                    a.non += w;
                    a.non_sq += w * w;
                }
                for (ti, hit) in tube_gaps.iter().enumerate() {
                    if *hit {
                        a.tubes[ti] += w;
                    }
                }
            }
            a
        })
        .collect();

    let mut ray_vol = 0.0;
    let mut ray_var = 0.0;
    let mut non_vol = 0.0;
    let mut non_var = 0.0;
    let mut tube_vols = vec![0.0; deltas.len()];
    for a in &acc {
        let m = a.count as f64;
        let mean_r = a.ray / m;
        let mean_n = a.non / m;
        ray_vol += a.lebesgue * mean_r;
        non_vol += a.lebesgue * mean_n;
        ray_var += a.lebesgue * a.lebesgue * ((a.ray_sq / m - mean_r * mean_r).max(0.0)) / m;
        non_var += a.lebesgue * a.lebesgue * ((a.non_sq / m - mean_n * mean_n).max(0.0)) / m;
        for (ti, t) in a.tubes.iter().enumerate() {
            tube_vols[ti] += a.lebesgue * t / m;
        }
    }
    let ray_se = ray_var.sqrt();
    Ok(RayConeReport {
        radius: r,
        ray_cone_volume: ray_vol,
        ray_cone_se: ray_se,
        non_ray_cone_volume: non_vol,
        non_ray_cone_se: non_var.sqrt(),
        tube_ratios: deltas
            .iter()
            .zip(&tube_vols)
            .map(|(d, v)| (*d, v / v_ref))
            .collect(),
        ray_lower_bound_ok: ray_vol >= v_m_reference * v_ref - 3.0 * ray_se,
        v_m_reference,
    })
}

fn shell_seed_mix(shell: u64) -> u64 {
    shell.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x5eed5eed
}

fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if iv.is_empty() {
        return iv;
    }
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out = vec![iv[0]];
    for (lo, hi) in iv.into_iter().skip(1) {
        let last = out.last_mut().unwrap();
        if lo <= last.1 + 1e-12 {
            last.1 = last.1.max(hi);
        } else {
            out.push((lo, hi));
        }
    }
    out
}

/// Hypothesis sampling exposed for the CLI probes: sampled minimum Ricci
/// curvature and maximum |S| over indicatrix directions.
pub fn curvature_bounds_probe(s: &FinslerStructure, spec: &SampleSpec) -> Result<(f64, f64)> {
    sample_curvature_bounds(s, spec)
}
