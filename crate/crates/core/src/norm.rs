//! Finsler structures and fiberwise tensor operations.
//!
//! A norm is provided once, generically over the dual scalar tower
//! ([`SmoothNorm`]), and the object-safe [`NormObj`] bridge exposes the
//! instantiations the tensor kernels need. Everything downstream
//! (fundamental tensor, Cartan tensor, Legendre transform, spray, Chern
//! connection, curvature) differentiates through that single evaluator.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::{Dual2, Scalar, D1, D2, D3};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::random_unit_vector;
use crate::tensor;

/// A Finsler norm evaluator, written once for every scalar level.
///
/// Implementations must be positively 1-homogeneous in `y` and smooth for
/// `y != 0` on their chart domain; [`FinslerStructure::validate`] probes
/// exactly these axioms.
pub trait SmoothNorm: Send + Sync {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T;
}

/// Object-safe view of a [`SmoothNorm`] at the scalar levels used by the
/// differentiation kernels. Blanket-implemented; do not implement directly.
pub trait NormObj: Send + Sync {
    fn f(&self, x: &[f64], y: &[f64]) -> f64;
    fn f_d1(&self, x: &[D1], y: &[D1]) -> D1;
    fn f_d2(&self, x: &[D2], y: &[D2]) -> D2;
    fn f_d3(&self, x: &[D3], y: &[D3]) -> D3;
    fn f_h0(&self, x: &[Dual2<f64>], y: &[Dual2<f64>]) -> Dual2<f64>;
    fn f_h1(&self, x: &[Dual2<D1>], y: &[Dual2<D1>]) -> Dual2<D1>;
    fn f_h2(&self, x: &[Dual2<D2>], y: &[Dual2<D2>]) -> Dual2<D2>;
    fn f_h3(&self, x: &[Dual2<D3>], y: &[Dual2<D3>]) -> Dual2<D3>;
}

impl<N: SmoothNorm> NormObj for N {
    fn f(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval(x, y)
    }
    fn f_d1(&self, x: &[D1], y: &[D1]) -> D1 {
        self.eval(x, y)
    }
    fn f_d2(&self, x: &[D2], y: &[D2]) -> D2 {
        self.eval(x, y)
    }
    fn f_d3(&self, x: &[D3], y: &[D3]) -> D3 {
        self.eval(x, y)
    }
    fn f_h0(&self, x: &[Dual2<f64>], y: &[Dual2<f64>]) -> Dual2<f64> {
        self.eval(x, y)
    }
    fn f_h1(&self, x: &[Dual2<D1>], y: &[Dual2<D1>]) -> Dual2<D1> {
        self.eval(x, y)
    }
    fn f_h2(&self, x: &[Dual2<D2>], y: &[Dual2<D2>]) -> Dual2<D2> {
        self.eval(x, y)
    }
    fn f_h3(&self, x: &[Dual2<D3>], y: &[Dual2<D3>]) -> Dual2<D3> {
        self.eval(x, y)
    }
}

/// Scalar levels at which a [`NormObj`] can be evaluated. The second method
/// evaluates under a hyper-dual layer on top of `Self`, which is how all
/// second fiber derivatives are taken.
pub trait Ad: Scalar {
    fn eval_norm(nm: &dyn NormObj, x: &[Self], y: &[Self]) -> Self;
    fn eval_norm_hyper(nm: &dyn NormObj, x: &[Dual2<Self>], y: &[Dual2<Self>]) -> Dual2<Self>;
}

impl Ad for f64 {
    fn eval_norm(nm: &dyn NormObj, x: &[Self], y: &[Self]) -> Self {
        nm.f(x, y)
    }
    fn eval_norm_hyper(nm: &dyn NormObj, x: &[Dual2<Self>], y: &[Dual2<Self>]) -> Dual2<Self> {
        nm.f_h0(x, y)
    }
}
impl Ad for D1 {
    fn eval_norm(nm: &dyn NormObj, x: &[Self], y: &[Self]) -> Self {
        nm.f_d1(x, y)
    }
    fn eval_norm_hyper(nm: &dyn NormObj, x: &[Dual2<Self>], y: &[Dual2<Self>]) -> Dual2<Self> {
        nm.f_h1(x, y)
    }
}
impl Ad for D2 {
    fn eval_norm(nm: &dyn NormObj, x: &[Self], y: &[Self]) -> Self {
        nm.f_d2(x, y)
    }
    fn eval_norm_hyper(nm: &dyn NormObj, x: &[Dual2<Self>], y: &[Dual2<Self>]) -> Dual2<Self> {
        nm.f_h2(x, y)
    }
}
impl Ad for D3 {
    fn eval_norm(nm: &dyn NormObj, x: &[Self], y: &[Self]) -> Self {
        nm.f_d3(x, y)
    }
    fn eval_norm_hyper(nm: &dyn NormObj, x: &[Dual2<Self>], y: &[Dual2<Self>]) -> Dual2<Self> {
        nm.f_h3(x, y)
    }
}

/// Base point plus fiber components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: Vec<f64>, fiber: Vec<f64>) -> Self {
        Self { base, fiber }
    }
}

/// A cotangent element `ω` at a chart point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

impl Covector {
    pub fn new(base: Vec<f64>, components: Vec<f64>) -> Self {
        Self { base, components }
    }
    pub fn pair(&self, y: &[f64]) -> f64 {
        linalg::dot(&self.components, y)
    }
}

/// The fundamental tensor `g_y` evaluated at one `(x, y)` site.
#[derive(Clone, Debug, Serialize)]
pub struct FundamentalTensor {
    /// Row-major n×n symmetric matrix.
    pub matrix: Vec<f64>,
    pub at: TangentVector,
}

impl FundamentalTensor {
    pub fn dim(&self) -> usize {
        self.at.base.len()
    }
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim() + j]
    }
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        linalg::bilinear_form(&self.matrix, u, v)
    }
    pub fn quad(&self, u: &[f64]) -> f64 {
        linalg::quadratic_form(&self.matrix, u)
    }
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::sym_eigenvalues(&self.matrix, self.dim())[0]
    }
}

/// Chart region on which the norm evaluator is trusted.
#[derive(Clone, Debug)]
pub enum Domain {
    All,
    /// Euclidean chart ball `|x| < radius` around the chart origin.
    ChartBall { radius: f64 },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::All => true,
            Domain::ChartBall { radius } => linalg::norm2(x) < *radius,
        }
    }
}

/// Optional closed-form solvers a fixture can register for its chart.
/// These accelerate distance-heavy operations (volume sampling, angle
/// probes); the generic deck-minimum / shooting paths stay available and
/// are cross-checked against these in the test suite.
#[derive(Clone, Default)]
pub struct ChartSolvers {
    /// Exact forward distance `d(p, q)`.
    pub distance: Option<Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>>,
    /// Initial F-unit velocity and length of the minimal geodesic `p → q`.
    pub log_map: Option<Arc<dyn Fn(&[f64], &[f64]) -> Option<(Vec<f64>, f64)> + Send + Sync>>,
}

/// A chart-based Finsler structure: dimension, norm evaluator, chart
/// domain, and an optional lattice of deck translations for flat quotients.
///
/// Immutable after construction; all operations are pure functions of
/// their arguments and safe to call concurrently.
#[derive(Clone)]
pub struct FinslerStructure {
    dim: usize,
    norm: Arc<dyn NormObj>,
    domain: Domain,
    lattice: Vec<Vec<f64>>,
    family_tag: String,
    x_independent: bool,
    riemannian: bool,
    solvers: ChartSolvers,
    sample_box: (Vec<f64>, Vec<f64>),
}

impl FinslerStructure {
    pub fn new(dim: usize, norm: Arc<dyn NormObj>, family_tag: impl Into<String>) -> Self {
        assert!(dim >= 2, "Finsler structures here have dimension >= 2");
        Self {
            dim,
            norm,
            domain: Domain::All,
            lattice: Vec::new(),
            family_tag: family_tag.into(),
            x_independent: false,
            riemannian: false,
            solvers: ChartSolvers::default(),
            sample_box: (vec![-2.0; dim], vec![2.0; dim]),
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }
    pub fn with_lattice(mut self, lattice: Vec<Vec<f64>>) -> Self {
        self.lattice = lattice;
        self
    }
    /// Marks the norm as independent of the base point (locally Minkowski
    /// chart); distances then reduce to deck-minimized norm evaluations.
    pub fn with_x_independent(mut self) -> Self {
        self.x_independent = true;
        self
    }
    /// Marks `F²` as quadratic in `y`, enabling the `√det g` density path.
    pub fn with_riemannian(mut self) -> Self {
        self.riemannian = true;
        self
    }
    pub fn with_solvers(mut self, solvers: ChartSolvers) -> Self {
        self.solvers = solvers;
        self
    }
    pub fn with_sample_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.sample_box = (lo, hi);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn family(&self) -> &str {
        &self.family_tag
    }
    pub fn lattice(&self) -> &[Vec<f64>] {
        &self.lattice
    }
    pub fn is_x_independent(&self) -> bool {
        self.x_independent
    }
    pub fn is_riemannian_metric(&self) -> bool {
        self.riemannian
    }
    pub fn solvers(&self) -> &ChartSolvers {
        &self.solvers
    }
    pub fn norm_obj(&self) -> &dyn NormObj {
        self.norm.as_ref()
    }
    pub fn contains(&self, x: &[f64]) -> bool {
        self.domain.contains(x)
    }
    pub fn sample_box(&self) -> (&[f64], &[f64]) {
        (&self.sample_box.0, &self.sample_box.1)
    }

    /// Raw norm value, no domain checks.
    pub fn norm_value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.norm.f(x, y)
    }

    /// `F(x, y)` with domain and finiteness checks.
    pub fn eval_norm(&self, v: &TangentVector) -> Result<f64> {
        if !self.contains(&v.base) {
            return Err(Error::OutsideDomain {
                family: self.family_tag.clone(),
                point: v.base.clone(),
            });
        }
        if linalg::norm2(&v.fiber) == 0.0 {
            return Ok(0.0);
        }
        let f = self.norm.f(&v.base, &v.fiber);
        if !f.is_finite() {
            return Err(Error::NonFiniteNorm {
                x: v.base.clone(),
                y: v.fiber.clone(),
            });
        }
        Ok(f)
    }

    /// Fundamental tensor `g_y`, the half fiber Hessian of `F²`, assembled
    /// from hyper-dual evaluations.
    pub fn fundamental_tensor(&self, v: &TangentVector) -> Result<FundamentalTensor> {
        self.require_nonzero_fiber(v)?;
        let matrix = tensor::g_matrix::<f64>(self.norm.as_ref(), &v.base, &v.fiber, self.dim);
        let t = FundamentalTensor {
            matrix,
            at: v.clone(),
        };
        let min_eig = t.min_eigenvalue();
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                x: v.base.clone(),
                y: v.fiber.clone(),
                min_eig,
            });
        }
        Ok(t)
    }

    /// Cartan tensor `C_y(u1, u2, u3) = ½ d/dt g_{y+t·u3}(u1, u2)`,
    /// computed exactly as a third directional derivative of `F²` through
    /// one extra dual layer under the hyper-dual pair.
    pub fn cartan_tensor(
        &self,
        v: &TangentVector,
        u1: &[f64],
        u2: &[f64],
        u3: &[f64],
    ) -> Result<f64> {
        self.require_nonzero_fiber(v)?;
        let n = self.dim;
        let x: Vec<Dual2<D1>> = v.base.iter().map(|&c| Dual2::constant(D1::constant(c))).collect();
        let y: Vec<Dual2<D1>> = (0..n)
            .map(|k| {
                Dual2::new(
                    D1::new(v.fiber[k], u3[k]),
                    D1::constant(u1[k]),
                    D1::constant(u2[k]),
                    D1::constant(0.0),
                )
            })
            .collect();
        let f = D1::eval_norm_hyper(self.norm.as_ref(), &x, &y);
        let f2 = f * f;
        // e12 of F² is 2·g_y(u1,u2) at the perturbed y; its dual part is
        // the u3 fiber derivative.
        Ok(0.25 * f2.e12.du)
    }

    /// Legendre transform: the unique `y` with `ω(y) = F*(ω)²` and
    /// `F(y) = F*(ω)`. A dense indicatrix scan seeds a Newton iteration on
    /// the stationarity system `g_y·y = ω`.
    pub fn legendre_transform(&self, omega: &Covector) -> Result<TangentVector> {
        let n = self.dim;
        if linalg::norm2(&omega.components) == 0.0 {
            return Err(Error::ZeroVector);
        }
        let x = &omega.base;
        // dense scan over indicatrix directions for F*(ω) = max ω(u), F(u)=1
        let mut best_dir = vec![0.0; n];
        let mut best_val = f64::NEG_INFINITY;
        let scan = directions_for_scan(n, 256);
        for d in &scan {
            let f = self.norm.f(x, d);
            if f <= 0.0 {
                continue;
            }
            let val = omega.pair(d) / f;
            if val > best_val {
                best_val = val;
                best_dir = d.clone();
            }
        }
        let fd = self.norm.f(x, &best_dir);
        let mut y: Vec<f64> = best_dir.iter().map(|c| c * best_val / fd).collect();
        // Newton on r(y) = g_y·y − ω with exact Jacobian g_y
        let tol = 1e-10 * (1.0 + linalg::norm2(&omega.components));
        let mut residual = f64::INFINITY;
        for _ in 0..60 {
            let g = tensor::g_matrix::<f64>(self.norm.as_ref(), x, &y, n);
            let mut r = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    r[i] += g[i * n + j] * y[j];
                }
                r[i] -= omega.components[i];
            }
            residual = linalg::norm2(&r);
            if residual <= tol {
                return Ok(TangentVector::new(x.clone(), y));
            }
            let delta = linalg::solve(&g, &r, n).ok_or(Error::SingularTensor {
                x: x.clone(),
                y: y.clone(),
            })?;
            for i in 0..n {
                y[i] -= delta[i];
            }
        }
        Err(Error::NoConvergence {
            context: "legendre transform".into(),
            residual,
            tolerance: tol,
        })
    }

    /// Finsler gradient: Legendre transform of the differential `Du(x)`,
    /// with `Du` from Richardson-extrapolated central differences. Returns
    /// the zero vector when `Du(x) = 0`.
    pub fn gradient_field(&self, u: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<TangentVector> {
        let n = self.dim;
        let h0 = 1e-5 * (1.0 + linalg::norm2(x));
        let mut du = vec![0.0; n];
        for i in 0..n {
            let central = |h: f64| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (u(&xp) - u(&xm)) / (2.0 * h)
            };
            let d1 = central(h0);
            let d2 = central(h0 * 0.5);
            du[i] = (4.0 * d2 - d1) / 3.0;
        }
        let scale: f64 = 1.0 + u(x).abs();
        if linalg::norm2(&du) <= 1e-9 * scale {
            return Ok(TangentVector::new(x.to_vec(), vec![0.0; n]));
        }
        self.legendre_transform(&Covector::new(x.to_vec(), du))
    }

    /// Reversibility constant `ρ = sup F(−y)/F(y)`, estimated over sampled
    /// sites and refined by golden-section search in the planar case.
    pub fn reversibility_constant(&self, spec: &SampleSpec) -> Result<f64> {
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut best = 1.0_f64;
        let points = self.sample_points(spec.count.max(1), &mut rng);
        for x in &points {
            let ratio_at = |dir: &[f64]| {
                let neg: Vec<f64> = dir.iter().map(|c| -c).collect();
                let f = self.norm.f(x, dir);
                let fneg = self.norm.f(x, &neg);
                let r = fneg / f;
                r.max(1.0 / r)
            };
            let mut best_theta = 0.0;
            for k in 0..64 {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                let dir = planar_dir(theta, n, &mut rng);
                let r = ratio_at(&dir);
                if r > best {
                    best = r;
                    best_theta = theta;
                }
            }
            if n == 2 {
                // golden-section refinement around the best angle
                let f = |theta: f64| ratio_at(&[theta.cos(), theta.sin()]);
                let refined = golden_max(f, best_theta - 0.2, best_theta + 0.2, 1e-10);
                best = best.max(refined);
            }
        }
        Ok(best)
    }

    /// Deterministic quasi-uniform sample of the indicatrix at `x`: each
    /// returned vector satisfies `F(x, y) = 1` up to rounding.
    pub fn indicatrix_sample(&self, x: &[f64], count: usize, seed: u64) -> Result<Vec<TangentVector>> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain {
                family: self.family_tag.clone(),
                point: x.to_vec(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let dir = random_unit_vector(&mut rng, self.dim);
            let f = self.norm.f(x, &dir);
            out.push(TangentVector::new(
                x.to_vec(),
                dir.iter().map(|c| c / f).collect(),
            ));
        }
        Ok(out)
    }

    /// Samples chart points inside the sample box, rejecting those outside
    /// the domain.
    pub fn sample_points<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let (lo, hi) = (&self.sample_box.0, &self.sample_box.1);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    /// Diagnostic axiom check: F2 positive homogeneity, fiber positivity,
    /// F3 positive definiteness of `g_y`, and a smoothness proxy comparing
    /// one-sided against central difference quotients of `F`.
    pub fn validate(&self, spec: &SampleSpec, tol: &Tolerances) -> ValidationReport {
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let points = self.sample_points(spec.count, &mut rng);

        let mut max_homog = 0.0_f64;
        let mut min_norm = f64::INFINITY;
        let mut positivity_witness = None;
        let mut min_eig = f64::INFINITY;
        let mut smooth_gap = 0.0_f64;

        for x in &points {
            let dir = random_unit_vector(&mut rng, n);
            let f1 = self.norm.f(x, &dir);
            if f1 < min_norm {
                min_norm = f1;
                positivity_witness = Some((x.clone(), dir.clone()));
            }
            for lambda in [0.5, 2.0, 10.0] {
                let scaled: Vec<f64> = dir.iter().map(|c| c * lambda).collect();
                let fl = self.norm.f(x, &scaled);
                let rel = (fl - lambda * f1).abs() / (lambda * f1).abs().max(1e-300);
                max_homog = max_homog.max(rel);
            }
            let g = tensor::g_matrix::<f64>(self.norm.as_ref(), x, &dir, n);
            let eig = linalg::sym_eigenvalues(&g, n)[0];
            min_eig = min_eig.min(eig);

            // smoothness proxy: forward vs central quotient along a random
            // fiber direction; a kink makes them disagree at O(1)
            let pert = random_unit_vector(&mut rng, n);
            let h = 1e-5;
            let at = |s: f64| {
                let yy: Vec<f64> = dir.iter().zip(&pert).map(|(a, b)| a + s * b).collect();
                self.norm.f(x, &yy)
            };
            let forward = (at(h) - at(0.0)) / h;
            let central = (at(h) - at(-h)) / (2.0 * h);
            smooth_gap = smooth_gap.max((forward - central).abs() / (1.0 + central.abs()));
        }

        ValidationReport {
            samples: spec.count,
            max_homogeneity_violation: max_homog,
            min_norm_on_unit_directions: min_norm,
            positivity_witness,
            min_g_eigenvalue: min_eig,
            smoothness_inconsistency: smooth_gap,
            f1_pass: smooth_gap <= tol.smoothness,
            f2_pass: max_homog <= tol.homogeneity && min_norm > 0.0,
            f3_pass: min_eig > tol.pd_min_eig,
        }
    }

    fn require_nonzero_fiber(&self, v: &TangentVector) -> Result<()> {
        if !self.contains(&v.base) {
            return Err(Error::OutsideDomain {
                family: self.family_tag.clone(),
                point: v.base.clone(),
            });
        }
        if linalg::norm2(&v.fiber) == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(())
    }
}

/// Sampling request: how many sites, and the RNG seed that makes the run
/// reproducible.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed }
    }
}

/// Default tolerances for the axiom checks; override per scenario.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub homogeneity: f64,
    pub euler: f64,
    pub pd_min_eig: f64,
    pub smoothness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            homogeneity: 1e-10,
            euler: 1e-9,
            pd_min_eig: 1e-10,
            smoothness: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub max_homogeneity_violation: f64,
    pub min_norm_on_unit_directions: f64,
    pub positivity_witness: Option<(Vec<f64>, Vec<f64>)>,
    pub min_g_eigenvalue: f64,
    pub smoothness_inconsistency: f64,
    pub f1_pass: bool,
    pub f2_pass: bool,
    pub f3_pass: bool,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.f1_pass && self.f2_pass && self.f3_pass
    }
}

fn planar_dir<R: Rng>(theta: f64, n: usize, rng: &mut R) -> Vec<f64> {
    if n == 2 {
        vec![theta.cos(), theta.sin()]
    } else {
        random_unit_vector(rng, n)
    }
}

fn directions_for_scan(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1d1c);
        (0..count * 4).map(|_| random_unit_vector(&mut rng, n)).collect()
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}
