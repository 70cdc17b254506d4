//! The fixture registry: seven concrete desk-scale Finsler structures.
//!
//! | key             | chart                         | character                         |
//! |-----------------|-------------------------------|-----------------------------------|
//! | euclidean       | R^n                           | reversible, Berwald, K≡0          |
//! | riemann-sphere  | stereographic chart of S²(R)  | Riemannian, K≡1/R²                |
//! | hyperbolic-disk | Poincaré disk                 | Riemannian, K≡−1                  |
//! | randers         | R^n, F = |y| + b(x)·y         | non-reversible; Berwald iff b const|
//! | funk-disk       | unit disk, Funk metric        | non-reversible, K≡−1/4            |
//! | flat-cylinder   | R²/(L·Z), Minkowski norm      | reversible, Berwald, K≡0          |
//! | flat-torus      | R²/(L₁Z×L₂Z), Minkowski norm  | reversible, Berwald, K≡0          |
//!
//! Curved charts register closed-form distance/log solvers; those are
//! cross-checked against the generic shooting solver in the test suite.

use std::sync::Arc;

use serde::Deserialize;

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::linalg;
use crate::norm::{ChartSolvers, Domain, FinslerStructure, SmoothNorm};

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

// ---------------------------------------------------------------------
// norm evaluators
// ---------------------------------------------------------------------

/// `F(y) = |y|`.
pub struct EuclideanNorm;

impl SmoothNorm for EuclideanNorm {
    fn eval<T: Scalar>(&self, _x: &[T], y: &[T]) -> T {
        dot(y, y).sqrt()
    }
}

/// Round sphere of radius `R` in the stereographic chart:
/// `F(x, y) = 2R²/(R² + |x|²) · |y|`.
pub struct SphereNorm {
    pub radius: f64,
}

impl SmoothNorm for SphereNorm {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        let r2 = T::from_f64(self.radius * self.radius);
        let lambda = T::from_f64(2.0) * r2 / (r2 + dot(x, x));
        lambda * dot(y, y).sqrt()
    }
}

/// Poincaré disk, curvature −1: `F(x, y) = 2|y|/(1 − |x|²)`.
pub struct HyperbolicNorm;

impl SmoothNorm for HyperbolicNorm {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        T::from_f64(2.0) * dot(y, y).sqrt() / (T::one() - dot(x, x))
    }
}

/// Randers norm `F(x, y) = |y| + b(x)·y` with
/// `b_i(x) = b0_i + wobble · sin(x_{(i+1) mod n})`. `wobble = 0` is the
/// translation-invariant (Berwald, locally Minkowski) case.
pub struct RandersNorm {
    pub b0: Vec<f64>,
    pub wobble: f64,
}

impl SmoothNorm for RandersNorm {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        let n = y.len();
        let mut beta = T::zero();
        for i in 0..n {
            let mut bi = T::from_f64(self.b0[i]);
            if self.wobble != 0.0 {
                bi += T::from_f64(self.wobble) * x[(i + 1) % n].sin();
            }
            beta += bi * y[i];
        }
        dot(y, y).sqrt() + beta
    }
}

/// Funk metric of the unit disk:
/// `F(x, y) = (√(|y|²(1−|x|²) + (x·y)²) + x·y)/(1 − |x|²)`.
pub struct FunkNorm;

impl SmoothNorm for FunkNorm {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        let one = T::one();
        let xy = dot(x, y);
        let denom = one - dot(x, x);
        ((dot(y, y) * denom + xy * xy).sqrt() + xy) / denom
    }
}

/// Smoothed quartic Minkowski norm
/// `F(y) = (Σ y_i⁴ + mix · Σ_{i<j} y_i² y_j²)^{1/4}`; `mix = 2` recovers the
/// Euclidean norm in the plane, `mix ∈ (0, 2)` interpolates toward the
/// (degenerate) pure quartic while keeping `g_y` positive definite.
pub struct QuarticNorm {
    pub mix: f64,
}

impl SmoothNorm for QuarticNorm {
    fn eval<T: Scalar>(&self, _x: &[T], y: &[T]) -> T {
        let n = y.len();
        let mut q = T::zero();
        for i in 0..n {
            q += y[i].powi(4);
        }
        for i in 0..n {
            for j in i + 1..n {
                q += T::from_f64(self.mix) * y[i].powi(2) * y[j].powi(2);
            }
        }
        q.sqrt().sqrt()
    }
}

// ---------------------------------------------------------------------
// fixture parameters
// ---------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EuclideanParams {
    #[serde(default = "default_dim")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereParams {
    #[serde(default = "default_one")]
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperbolicParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RandersParams {
    #[serde(default = "default_b")]
    b: Vec<f64>,
    #[serde(default)]
    wobble: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FunkParams {}

#[derive(Deserialize, Clone, Copy)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum MinkowskiNormParam {
    Euclidean,
    Quartic {
        #[serde(default = "default_one")]
        mix: f64,
    },
}

impl Default for MinkowskiNormParam {
    fn default() -> Self {
        MinkowskiNormParam::Euclidean
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CylinderParams {
    #[serde(default = "default_one")]
    circumference: f64,
    #[serde(default)]
    norm: MinkowskiNormParam,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusParams {
    #[serde(default = "default_one")]
    lx: f64,
    #[serde(default = "default_one")]
    ly: f64,
    #[serde(default)]
    norm: MinkowskiNormParam,
}

fn default_dim() -> usize {
    2
}
fn default_one() -> f64 {
    1.0
}
fn default_b() -> Vec<f64> {
    vec![0.5, 0.0]
}

fn parse<T: for<'de> Deserialize<'de>>(params: &serde_json::Value) -> Result<T> {
    let value = if params.is_null() {
        serde_json::json!({})
    } else {
        params.clone()
    };
    serde_json::from_value(value).map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn minkowski_norm(param: MinkowskiNormParam) -> Result<Arc<dyn crate::norm::NormObj>> {
    match param {
        MinkowskiNormParam::Euclidean => Ok(Arc::new(EuclideanNorm)),
        MinkowskiNormParam::Quartic { mix } => {
            if mix <= 0.0 {
                return Err(Error::InvalidParameter(
                    "quartic mix must be positive".into(),
                ));
            }
            Ok(Arc::new(QuarticNorm { mix }))
        }
    }
}

// ---------------------------------------------------------------------
// registry
// ---------------------------------------------------------------------

/// One row of the fixture listing.
pub struct FixtureInfo {
    pub key: &'static str,
    pub dim: &'static str,
    pub params_schema: &'static str,
    pub properties: &'static str,
}

pub const FIXTURE_KEYS: [&str; 7] = [
    "euclidean",
    "riemann-sphere",
    "hyperbolic-disk",
    "randers",
    "funk-disk",
    "flat-cylinder",
    "flat-torus",
];

pub fn registry() -> Vec<FixtureInfo> {
    vec![
        FixtureInfo {
            key: "euclidean",
            dim: "n (param)",
            params_schema: r#"{"dim": 2}"#,
            properties: "reversible, Berwald, K≡0",
        },
        FixtureInfo {
            key: "riemann-sphere",
            dim: "2",
            params_schema: r#"{"radius": 1.0}"#,
            properties: "reversible, Berwald (Riemannian), K≡1/R²",
        },
        FixtureInfo {
            key: "hyperbolic-disk",
            dim: "2",
            params_schema: r#"{}"#,
            properties: "reversible, Berwald (Riemannian), K≡-1",
        },
        FixtureInfo {
            key: "randers",
            dim: "len(b)",
            params_schema: r#"{"b": [0.5, 0.0], "wobble": 0.0}"#,
            properties: "non-reversible; Berwald iff wobble=0, then K≡0",
        },
        FixtureInfo {
            key: "funk-disk",
            dim: "2",
            params_schema: r#"{}"#,
            properties: "non-reversible, non-Berwald, K≡-1/4, isotropic S-curvature",
        },
        FixtureInfo {
            key: "flat-cylinder",
            dim: "2",
            params_schema: r#"{"circumference": 1.0, "norm": {"kind": "euclidean"} | {"kind": "quartic", "mix": 1.0}}"#,
            properties: "reversible, Berwald, K≡0, closed geodesics",
        },
        FixtureInfo {
            key: "flat-torus",
            dim: "2",
            params_schema: r#"{"lx": 1.0, "ly": 1.0, "norm": {"kind": "euclidean"} | {"kind": "quartic", "mix": 1.0}}"#,
            properties: "reversible, Berwald, K≡0, compact, closed geodesics",
        },
    ]
}

/// Builds a fixture from its registry key and JSON parameter object.
pub fn build(key: &str, params: &serde_json::Value) -> Result<FinslerStructure> {
    match key {
        "euclidean" => {
            let p: EuclideanParams = parse(params)?;
            if p.dim < 2 {
                return Err(Error::InvalidParameter("dim must be >= 2".into()));
            }
            Ok(
                FinslerStructure::new(p.dim, Arc::new(EuclideanNorm), "euclidean")
                    .with_x_independent()
                    .with_riemannian()
                    .with_sample_box(vec![-3.0; p.dim], vec![3.0; p.dim]),
            )
        }
        "riemann-sphere" => {
            let p: SphereParams = parse(params)?;
            if p.radius <= 0.0 {
                return Err(Error::InvalidParameter("radius must be positive".into()));
            }
            let radius = p.radius;
            Ok(FinslerStructure::new(
                2,
                Arc::new(SphereNorm { radius }),
                "riemann-sphere",
            )
            .with_riemannian()
            .with_domain(Domain::ChartBall { radius: 100.0 * radius })
            .with_sample_box(vec![-1.5 * radius; 2], vec![1.5 * radius; 2])
            .with_solvers(ChartSolvers {
                distance: Some(Arc::new(move |p, q| sphere_chart_distance(radius, p, q))),
                log_map: Some(Arc::new(move |p, q| sphere_chart_log(radius, p, q))),
            }))
        }
        "hyperbolic-disk" => {
            let _p: HyperbolicParams = parse(params)?;
            Ok(
                FinslerStructure::new(2, Arc::new(HyperbolicNorm), "hyperbolic-disk")
                    .with_riemannian()
                    .with_domain(Domain::ChartBall { radius: 1.0 })
                    .with_sample_box(vec![-0.7; 2], vec![0.7; 2])
                    .with_solvers(ChartSolvers {
                        distance: Some(Arc::new(hyperbolic_distance)),
                        log_map: Some(Arc::new(hyperbolic_log)),
                    }),
            )
        }
        "randers" => {
            let p: RandersParams = parse(params)?;
            let n = p.b.len();
            if n < 2 {
                return Err(Error::InvalidParameter("b must have length >= 2".into()));
            }
            let reach = linalg::norm2(&p.b) + p.wobble * (n as f64).sqrt();
            if reach >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "randers data must satisfy sup|b(x)| < 1 (got bound {reach:.3})"
                )));
            }
            let mut s = FinslerStructure::new(
                n,
                Arc::new(RandersNorm {
                    b0: p.b,
                    wobble: p.wobble,
                }),
                "randers",
            )
            .with_sample_box(vec![-3.0; n], vec![3.0; n]);
            if p.wobble == 0.0 {
                s = s.with_x_independent();
            }
            Ok(s)
        }
        "funk-disk" => {
            let _p: FunkParams = parse(params)?;
            Ok(FinslerStructure::new(2, Arc::new(FunkNorm), "funk-disk")
                .with_domain(Domain::ChartBall { radius: 1.0 })
                .with_sample_box(vec![-0.6; 2], vec![0.6; 2])
                .with_solvers(ChartSolvers {
                    distance: Some(Arc::new(funk_distance)),
                    log_map: Some(Arc::new(funk_log)),
                }))
        }
        "flat-cylinder" => {
            let p: CylinderParams = parse(params)?;
            if p.circumference <= 0.0 {
                return Err(Error::InvalidParameter(
                    "circumference must be positive".into(),
                ));
            }
            Ok(FinslerStructure::new(2, minkowski_norm(p.norm)?, "flat-cylinder")
                .with_x_independent()
                .with_lattice(vec![vec![p.circumference, 0.0]])
                .with_sample_box(
                    vec![0.0, -2.0 * p.circumference],
                    vec![p.circumference, 2.0 * p.circumference],
                ))
        }
        "flat-torus" => {
            let p: TorusParams = parse(params)?;
            if p.lx <= 0.0 || p.ly <= 0.0 {
                return Err(Error::InvalidParameter("lx, ly must be positive".into()));
            }
            Ok(FinslerStructure::new(2, minkowski_norm(p.norm)?, "flat-torus")
                .with_x_independent()
                .with_lattice(vec![vec![p.lx, 0.0], vec![0.0, p.ly]])
                .with_sample_box(vec![0.0, 0.0], vec![p.lx, p.ly]))
        }
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

// ---------------------------------------------------------------------
// closed-form chart solvers
// ---------------------------------------------------------------------

/// Lifts a stereographic chart point to the unit sphere in R³.
fn to_unit_sphere(radius: f64, x: &[f64]) -> [f64; 3] {
    let u = [x[0] / radius, x[1] / radius];
    let s = 1.0 + u[0] * u[0] + u[1] * u[1];
    [2.0 * u[0] / s, 2.0 * u[1] / s, (s - 2.0) / s]
}

pub fn sphere_chart_distance(radius: f64, p: &[f64], q: &[f64]) -> f64 {
    let a = to_unit_sphere(radius, p);
    let b = to_unit_sphere(radius, q);
    let c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    radius * c.acos()
}

/// Initial F-unit velocity and length of the minimal great-circle arc
/// between two chart points; `None` for antipodal pairs (direction is not
/// unique) or when the arc passes through the chart pole.
pub fn sphere_chart_log(radius: f64, p: &[f64], q: &[f64]) -> Option<(Vec<f64>, f64)> {
    let a = to_unit_sphere(radius, p);
    let b = to_unit_sphere(radius, q);
    let c: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    if c < -1.0 + 1e-9 {
        return None;
    }
    let d_unit = c.clamp(-1.0, 1.0).acos();
    if d_unit < 1e-14 {
        return None;
    }
    // unit tangent at a toward b
    let mut w = [0.0; 3];
    let mut wn = 0.0;
    for i in 0..3 {
        w[i] = b[i] - c * a[i];
        wn += w[i] * w[i];
    }
    let wn = wn.sqrt();
    if wn < 1e-14 {
        return None;
    }
    for wi in &mut w {
        *wi /= wn;
    }
    // chart velocity of s ↦ π(a·cos s + w·sin s) at s = 0, where
    // π(P) = R (P₁, P₂)/(1−P₃)
    let denom = 1.0 - a[2];
    if denom.abs() < 1e-12 {
        return None;
    }
    let vx = radius * (w[0] * denom + a[0] * w[2]) / (denom * denom);
    let vy = radius * (w[1] * denom + a[1] * w[2]) / (denom * denom);
    // the unit-sphere parametrization has F-speed R
    Some((vec![vx / radius, vy / radius], radius * d_unit))
}

pub fn hyperbolic_distance(p: &[f64], q: &[f64]) -> f64 {
    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    let denom = (1.0 - p[0] * p[0] - p[1] * p[1]) * (1.0 - q[0] * q[0] - q[1] * q[1]);
    (1.0 + 2.0 * d2 / denom).acosh()
}

pub fn hyperbolic_log(p: &[f64], q: &[f64]) -> Option<(Vec<f64>, f64)> {
    // Möbius-translate p to the origin: w = (q − p)/(1 − conj(p)·q)
    let (pr, pi, qr, qi) = (p[0], p[1], q[0], q[1]);
    let num = (qr - pr, qi - pi);
    let den = (1.0 - (pr * qr + pi * qi), pr * qi - pi * qr);
    let den_norm2 = den.0 * den.0 + den.1 * den.1;
    let w = (
        (num.0 * den.0 + num.1 * den.1) / den_norm2,
        (num.1 * den.0 - num.0 * den.1) / den_norm2,
    );
    let r = (w.0 * w.0 + w.1 * w.1).sqrt();
    if r < 1e-14 {
        return None;
    }
    let dist = 2.0 * r.atanh();
    // pull the unit ray direction back through the inverse translation;
    // its derivative at 0 scales by (1 − |p|²)
    let scale = (1.0 - pr * pr - pi * pi) / 2.0;
    Some((vec![w.0 / r * scale, w.1 / r * scale], dist))
}

pub fn funk_distance(p: &[f64], q: &[f64]) -> f64 {
    let delta = linalg::sub(q, p);
    let len = linalg::norm2(&delta);
    if len < 1e-300 {
        return 0.0;
    }
    let u = linalg::scale(&delta, 1.0 / len);
    let pu = linalg::dot(p, &u);
    let s_star = -pu + (pu * pu + 1.0 - linalg::dot(p, p)).sqrt();
    (s_star / (s_star - len)).ln()
}

pub fn funk_log(p: &[f64], q: &[f64]) -> Option<(Vec<f64>, f64)> {
    let delta = linalg::sub(q, p);
    if linalg::norm2(&delta) < 1e-14 {
        return None;
    }
    let f = FunkNorm.eval(p, delta.as_slice());
    Some((linalg::scale(&delta, 1.0 / f), funk_distance(p, q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_exactly_the_seven_fixtures() {
        let reg = registry();
        assert_eq!(reg.len(), 7);
        for info in &reg {
            assert!(FIXTURE_KEYS.contains(&info.key));
            build(info.key, &serde_json::Value::Null).unwrap();
        }
    }

    #[test]
    fn unknown_keys_and_bad_params_are_rejected() {
        assert!(build("moebius", &serde_json::Value::Null).is_err());
        assert!(build("euclidean", &serde_json::json!({"dim": 1})).is_err());
        assert!(build("euclidean", &serde_json::json!({"radius": 2.0})).is_err());
        assert!(build("randers", &serde_json::json!({"b": [0.9, 0.9]})).is_err());
    }

    #[test]
    fn sphere_solver_matches_small_chord() {
        // near the chart origin the sphere chart is nearly the 2R²-scaled
        // Euclidean plane
        let d = sphere_chart_distance(1.0, &[0.0, 0.0], &[1e-4, 0.0]);
        assert!((d - 2e-4).abs() < 1e-10);
        let (v, len) = sphere_chart_log(1.0, &[0.1, 0.2], &[0.4, -0.1]).unwrap();
        // log direction must be F-unit
        let f = SphereNorm { radius: 1.0 }.eval(&[0.1, 0.2], v.as_slice());
        assert!((f - 1.0).abs() < 1e-12);
        assert!(len > 0.0);
    }

    #[test]
    fn hyperbolic_distance_from_origin_is_two_atanh() {
        let d = hyperbolic_distance(&[0.0, 0.0], &[0.5, 0.0]);
        assert!((d - 2.0 * 0.5_f64.atanh()).abs() < 1e-13);
        let (v, len) = hyperbolic_log(&[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert!((len - d).abs() < 1e-13);
        let f = HyperbolicNorm.eval(&[0.0, 0.0], v.as_slice());
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn funk_distance_from_origin_is_log_reciprocal() {
        // d(0, z) = −ln(1 − |z|)
        let d = funk_distance(&[0.0, 0.0], &[0.5, 0.0]);
        assert!((d + 0.5_f64.ln()).abs() < 1e-13);
        let f = FunkNorm.eval(&[0.0, 0.0], &[1.0, 0.0]);
        assert!((f - 1.0).abs() < 1e-14);
    }
}
