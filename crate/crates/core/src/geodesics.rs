//! Geodesic integration, forward distances, rays, and angles.
//!
//! Geodesics solve `ẍ = −2G(x, ẋ)` with an adaptive Dormand-Prince 5(4)
//! pair. Distances dispatch on the structure: deck-minimized Minkowski
//! norms on flat quotients, a registered closed-form chart solver when the
//! fixture has one, and multi-start Gauss-Newton shooting on the
//! exponential map otherwise. Angles are measured twice: from the
//! one-sided limit quotient of the forward/backward angle definitions
//! (Richardson-extrapolated), and from the terminal-velocity pairing of
//! the generalized first variation formula.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::norm::{FinslerStructure, TangentVector};
use crate::tensor;

/// Adaptive step-size control for the spray integrator.
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            max_steps: 400_000,
        }
    }
}

/// Time-sampled geodesic with speed diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// `max_k |F(x, ẋ)(t_k) − F(x, ẋ)(0)|`.
    pub speed_drift: f64,
    pub initial_speed: f64,
    /// False when the path was truncated at the chart boundary.
    pub complete: bool,
}

impl GeodesicPath {
    /// Assembles a path from explicit samples (used for synthetic
    /// piecewise-geodesic test curves).
    pub fn from_samples(times: Vec<f64>, points: Vec<Vec<f64>>, velocities: Vec<Vec<f64>>) -> Self {
        assert!(times.len() == points.len() && times.len() == velocities.len());
        Self {
            times,
            points,
            velocities,
            speed_drift: 0.0,
            initial_speed: 1.0,
            complete: true,
        }
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap() - self.times[0]
    }
    pub fn start_point(&self) -> &[f64] {
        &self.points[0]
    }
    pub fn end_point(&self) -> &[f64] {
        self.points.last().unwrap()
    }
    pub fn start_velocity(&self) -> &[f64] {
        &self.velocities[0]
    }
    pub fn end_velocity(&self) -> &[f64] {
        self.velocities.last().unwrap()
    }

    /// Integrated F-length over the stored nodes (trapezoid; exact for the
    /// constant-speed paths the integrator produces).
    pub fn finsler_length(&self, s: &FinslerStructure) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.times.len() {
            let f0 = s.norm_value(&self.points[k - 1], &self.velocities[k - 1]);
            let f1 = s.norm_value(&self.points[k], &self.velocities[k]);
            acc += 0.5 * (f0 + f1) * (self.times[k] - self.times[k - 1]);
        }
        acc
    }

    /// Point and velocity at parameter `t`, re-integrated from the nearest
    /// stored node so the accuracy matches the integrator tolerance rather
    /// than an interpolation order.
    pub fn at(&self, s: &FinslerStructure, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let t0 = self.times[0];
        let t1 = *self.times.last().unwrap();
        if t < t0 - 1e-12 || t > t1 + 1e-9 * (1.0 + t1.abs()) {
            return Err(Error::InvalidParameter(format!(
                "path parameter {t} outside [{t0}, {t1}]"
            )));
        }
        let k = match self.times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let k = k.min(self.times.len() - 1);
        let dt = t - self.times[k];
        if dt.abs() < 1e-14 {
            return Ok((self.points[k].clone(), self.velocities[k].clone()));
        }
        if s.is_x_independent() {
            let mut x = self.points[k].clone();
            linalg::axpy(&mut x, dt, &self.velocities[k]);
            return Ok((x, self.velocities[k].clone()));
        }
        let seg = integrate_geodesic(
            s,
            &self.points[k],
            &self.velocities[k],
            dt,
            &StepControl::default(),
        )?;
        Ok((seg.end_point().to_vec(), seg.end_velocity().to_vec()))
    }

    /// CSV rows `t, x_1..x_n, v_1..v_n`.
    pub fn to_csv(&self) -> String {
        let n = self.points[0].len();
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",x{}", i + 1));
        }
        for i in 0..n {
            out.push_str(&format!(",v{}", i + 1));
        }
        out.push('\n');
        for k in 0..self.times.len() {
            out.push_str(&format!("{:.17e}", self.times[k]));
            for c in &self.points[k] {
                out.push_str(&format!(",{c:.17e}"));
            }
            for c in &self.velocities[k] {
                out.push_str(&format!(",{c:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Velocities at `x` of all near-minimal geodesics from `p`.
#[derive(Clone, Debug, Serialize)]
pub struct TerminalVelocitySet {
    pub vectors: Vec<Vec<f64>>,
    pub from: Vec<f64>,
    pub at: Vec<f64>,
    pub tolerance: f64,
}

/// Ordered vertex triple with its three forward geodesic sides.
#[derive(Clone, Debug)]
pub struct ForwardTriangle {
    pub p: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub side_pa: GeodesicPath,
    pub side_pb: GeodesicPath,
    pub side_ab: GeodesicPath,
    pub lengths: [f64; 3],
}

/// Which one-sided limit the angle measurement takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleSense {
    Forward,
    Backward,
}

/// Finite-horizon ray scan result.
#[derive(Clone, Debug, Serialize)]
pub struct RayReport {
    /// All scanned F-unit directions.
    pub directions: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    /// Fraction of the scanned indicatrix directions that pass.
    pub fraction: f64,
    pub horizon: f64,
    pub tolerance: f64,
}

impl RayReport {
    pub fn ray_directions(&self) -> Vec<Vec<f64>> {
        self.directions
            .iter()
            .zip(&self.accepted)
            .filter(|(_, &a)| a)
            .map(|(d, _)| d.clone())
            .collect()
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn spray_rhs(s: &FinslerStructure, z: &[f64], out: &mut [f64]) -> Result<()> {
    let n = s.dim();
    let (x, v) = z.split_at(n);
    let g = tensor::spray::<f64>(s.norm_obj(), x, v, n).ok_or(Error::SingularTensor {
        x: x.to_vec(),
        y: v.to_vec(),
    })?;
    out[..n].copy_from_slice(v);
    for i in 0..n {
        out[n + i] = -2.0 * g[i];
    }
    Ok(())
}

/// Integrates the spray ODE `ẍ = −2G(x, ẋ)` from `(x0, y0)` over
/// `[0, t_end]`. Domain exit truncates the path and clears `complete`;
/// excessive unit-speed drift is rejected as an error.
pub fn integrate_geodesic(
    s: &FinslerStructure,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    ctl: &StepControl,
) -> Result<GeodesicPath> {
    let n = s.dim();
    if linalg::norm2(y0) == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !s.contains(x0) {
        return Err(Error::OutsideDomain {
            family: s.family().to_string(),
            point: x0.to_vec(),
        });
    }
    if t_end <= 0.0 {
        return Err(Error::InvalidParameter("t_end must be positive".into()));
    }
    let initial_speed = s.norm_value(x0, y0);
    let dim2 = 2 * n;
    let mut z: Vec<f64> = x0.iter().chain(y0.iter()).copied().collect();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut points = vec![x0.to_vec()];
    let mut velocities = vec![y0.to_vec()];
    let mut drift = 0.0_f64;
    let mut complete = true;

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim2]; 7];
    spray_rhs(s, &z, &mut k[0])?;
    let mut h = (t_end / 64.0).min(0.25 / (1.0 + linalg::norm2(&k[0])));
    let min_step = 1e-13 * t_end.max(1.0);

    let mut steps = 0;
    while t < t_end {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::NoConvergence {
                context: "geodesic integration step budget".into(),
                residual: t_end - t,
                tolerance: 0.0,
            });
        }
        h = h.min(t_end - t);
        let mut ztmp = vec![0.0; dim2];
        let mut failed = false;
        for stage in 0..6 {
            for i in 0..dim2 {
                let mut acc = z[i];
                for (j, a) in DP_A[stage].iter().enumerate() {
                    acc += h * a * k[j][i];
                }
                ztmp[i] = acc;
            }
            let (_, tail) = k.split_at_mut(stage + 1);
            if spray_rhs(s, &ztmp, &mut tail[0]).is_err() {
                failed = true;
                break;
            }
        }
        if failed {
            h *= 0.25;
            if h < min_step {
                return Err(Error::StepCollapse { t, min_step });
            }
            continue;
        }
        let mut err = 0.0_f64;
        let mut znew = vec![0.0; dim2];
        for i in 0..dim2 {
            let mut acc5 = z[i];
            let mut acc4 = z[i];
            for j in 0..7 {
                acc5 += h * DP_B5[j] * k[j][i];
                acc4 += h * DP_B4[j] * k[j][i];
            }
            znew[i] = acc5;
            let sc = ctl.abs_tol + ctl.rel_tol * z[i].abs().max(acc5.abs());
            err = err.max(((acc5 - acc4) / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            z = znew;
            let x = z[..n].to_vec();
            let v = z[n..].to_vec();
            if !s.contains(&x) {
                complete = false;
                break;
            }
            drift = drift.max((s.norm_value(&x, &v) - initial_speed).abs());
            times.push(t);
            points.push(x);
            velocities.push(v);
            // first stage of the next step at the accepted point
            spray_rhs(s, &z, &mut k[0])?;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < min_step {
            return Err(Error::StepCollapse { t, min_step });
        }
    }

    if drift > 1e-6 * initial_speed.max(1e-12) {
        return Err(Error::NoConvergence {
            context: "geodesic unit-speed drift".into(),
            residual: drift,
            tolerance: 1e-6 * initial_speed,
        });
    }
    Ok(GeodesicPath {
        times,
        points,
        velocities,
        speed_drift: drift,
        initial_speed,
        complete,
    })
}

/// `exp_p(t·y)`: endpoint of the geodesic from `p` with initial velocity
/// `y` at parameter `t`. Locally Minkowski structures short-circuit to the
/// exact straight line.
pub fn exp_map(s: &FinslerStructure, p: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(p.to_vec());
    }
    if s.is_x_independent() {
        let mut x = p.to_vec();
        linalg::axpy(&mut x, t, y);
        return Ok(x);
    }
    let path = integrate_geodesic(s, p, y, t, &StepControl::default())?;
    if !path.complete {
        return Err(Error::DomainExit {
            t: *path.times.last().unwrap(),
        });
    }
    Ok(path.end_point().to_vec())
}

/// Deck translates of `delta` within the brute-force search window.
fn deck_range(s: &FinslerStructure, delta: &[f64]) -> Vec<Vec<f64>> {
    let lattice = s.lattice();
    if lattice.is_empty() {
        return vec![delta.to_vec()];
    }
    let mut shifts: Vec<Vec<f64>> = vec![delta.to_vec()];
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

/// Forward distance `d(p, q)`; not symmetric in general.
pub fn distance(s: &FinslerStructure, p: &[f64], q: &[f64]) -> Result<f64> {
    for x in [p, q] {
        if !s.contains(x) {
            return Err(Error::OutsideDomain {
                family: s.family().to_string(),
                point: x.to_vec(),
            });
        }
    }
    if s.is_x_independent() {
        let delta = linalg::sub(q, p);
        if linalg::norm2(&delta) == 0.0 {
            return Ok(0.0);
        }
        let mut best = f64::INFINITY;
        for d in deck_range(s, &delta) {
            if linalg::norm2(&d) == 0.0 {
                return Ok(0.0);
            }
            best = best.min(s.norm_value(p, &d));
        }
        return Ok(best);
    }
    if let Some(solver) = &s.solvers().distance {
        return Ok(solver(p, q));
    }
    shooting_distance(s, p, q, &ShootOpts::default()).map(|sols| sols[0].1)
}

/// `d_max(p, q) = max{d(p,q), d(q,p)}`; symmetric by construction.
pub fn d_max(s: &FinslerStructure, p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(distance(s, p, q)?.max(distance(s, q, p)?))
}

/// Options for the multi-start shooting solver.
#[derive(Clone, Copy, Debug)]
pub struct ShootOpts {
    pub starts: usize,
    pub position_tol: f64,
    pub max_iter: usize,
}

impl Default for ShootOpts {
    fn default() -> Self {
        Self {
            starts: 64,
            position_tol: 1e-10,
            max_iter: 40,
        }
    }
}

/// Multi-start Gauss-Newton shooting: solves `exp_p(z) = q` for the log
/// vector `z` (initial velocity times length, using that `exp_p(t·y)`
/// depends only on `t·y`). Returns converged solutions `(z, F(p, z))`
/// sorted by length, shortest first.
pub fn shooting_distance(
    s: &FinslerStructure,
    p: &[f64],
    q: &[f64],
    opts: &ShootOpts,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = s.dim();
    // chart straight-segment F-length: initial scale and fallback bound
    let delta = linalg::sub(q, p);
    let seg_len = {
        let m = 16;
        let mut acc = 0.0;
        for i in 0..m {
            let u = (i as f64 + 0.5) / m as f64;
            let mut x = p.to_vec();
            linalg::axpy(&mut x, u, &delta);
            acc += s.norm_value(&x, &delta) / m as f64;
        }
        acc
    };
    let residual = |z: &[f64]| -> Option<Vec<f64>> {
        let end = exp_map(s, p, z, 1.0).ok()?;
        Some(linalg::sub(&end, q))
    };
    let mut solutions: Vec<(Vec<f64>, f64)> = Vec::new();
    for dir in scan_directions(n, opts.starts) {
        let f = s.norm_value(p, &dir);
        let mut z: Vec<f64> = dir.iter().map(|c| c * seg_len / f).collect();
        let mut ok = false;
        for _ in 0..opts.max_iter {
            let Some(r) = residual(&z) else { break };
            let rn = linalg::norm2(&r);
            if rn <= opts.position_tol * (1.0 + linalg::norm2(q)) {
                ok = true;
                break;
            }
            // finite-difference Jacobian of the endpoint map
            let mut jac = vec![0.0; n * n];
            let fd = 1e-7 * (1.0 + linalg::norm2(&z));
            let mut jac_ok = true;
            for j in 0..n {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[j] += fd;
                zm[j] -= fd;
                let (Some(rp), Some(rm)) = (residual(&zp), residual(&zm)) else {
                    jac_ok = false;
                    break;
                };
                for i in 0..n {
                    jac[i * n + j] = (rp[i] - rm[i]) / (2.0 * fd);
                }
            }
            if !jac_ok {
                break;
            }
            let Some(step) = linalg::solve(&jac, &r, n) else {
                break;
            };
            // damped update, capped to keep the iterate on the chart
            let sn = linalg::norm2(&step);
            let cap = 0.5 * (1.0 + linalg::norm2(&z));
            let scale = if sn > cap { cap / sn } else { 1.0 };
            for i in 0..n {
                z[i] -= scale * step[i];
            }
        }
        if ok {
            let len = s.norm_value(p, &z);
            if len <= 0.0 {
                continue;
            }
            let dup = solutions
                .iter()
                .any(|(zs, _)| linalg::norm2(&linalg::sub(zs, &z)) < 1e-6 * (1.0 + len));
            if !dup {
                solutions.push((z, len));
            }
        }
    }
    if solutions.is_empty() {
        return Err(Error::ShootingFailed {
            from: p.to_vec(),
            to: q.to_vec(),
            upper_bound: seg_len,
        });
    }
    solutions.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(solutions)
}

fn scan_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    } else {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        (0..count)
            .map(|_| crate::quadrature::random_unit_vector(&mut rng, n))
            .collect()
    }
}

/// Minimal geodesic `u → v` as an integrated path.
pub fn minimal_geodesic(s: &FinslerStructure, u: &[f64], v: &[f64]) -> Result<GeodesicPath> {
    if s.is_x_independent() {
        let delta = linalg::sub(v, u);
        let mut best: Option<Vec<f64>> = None;
        let mut best_len = f64::INFINITY;
        for d in deck_range(s, &delta) {
            if linalg::norm2(&d) == 0.0 {
                continue;
            }
            let len = s.norm_value(u, &d);
            if len < best_len {
                best_len = len;
                best = Some(d);
            }
        }
        let d = best.ok_or(Error::ZeroVector)?;
        let y = linalg::scale(&d, 1.0 / best_len);
        return integrate_geodesic(s, u, &y, best_len, &StepControl::default());
    }
    if let Some(log) = &s.solvers().log_map {
        if let Some((y, len)) = log(u, v) {
            return integrate_geodesic(s, u, &y, len, &StepControl::default());
        }
    }
    let sols = shooting_distance(s, u, v, &ShootOpts::default())?;
    let (z, len) = &sols[0];
    let y = linalg::scale(z, 1.0 / len);
    integrate_geodesic(s, u, &y, *len, &StepControl::default())
}

/// Builds the forward triangle `△(→pa, →pb, →ab)` with integrated sides.
pub fn forward_triangle(
    s: &FinslerStructure,
    p: &[f64],
    a: &[f64],
    b: &[f64],
) -> Result<ForwardTriangle> {
    let side_pa = minimal_geodesic(s, p, a)?;
    let side_pb = minimal_geodesic(s, p, b)?;
    let side_ab = minimal_geodesic(s, a, b)?;
    let lengths = [
        side_pa.finsler_length(s),
        side_pb.finsler_length(s),
        side_ab.finsler_length(s),
    ];
    Ok(ForwardTriangle {
        p: p.to_vec(),
        a: a.to_vec(),
        b: b.to_vec(),
        side_pa,
        side_pb,
        side_ab,
        lengths,
    })
}

/// Terminal velocities at `x` of all geodesics from `p` whose length is
/// within `(1 + tol)` of minimal; representatives after clustering.
pub fn terminal_velocities(
    s: &FinslerStructure,
    p: &[f64],
    x: &[f64],
    tol: f64,
) -> Result<TerminalVelocitySet> {
    let delta = linalg::sub(x, p);
    if linalg::norm2(&delta) == 0.0 {
        return Err(Error::EmptyTerminalSet {
            from: p.to_vec(),
            to: x.to_vec(),
        });
    }
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    if s.is_x_independent() {
        let mut lens: Vec<(Vec<f64>, f64)> = deck_range(s, &delta)
            .into_iter()
            .filter(|d| linalg::norm2(d) > 0.0)
            .map(|d| {
                let len = s.norm_value(p, &d);
                (d, len)
            })
            .collect();
        lens.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let dmin = lens[0].1;
        for (d, len) in lens {
            if len <= (1.0 + tol) * dmin {
                push_unique(&mut vectors, linalg::scale(&d, 1.0 / len));
            }
        }
    } else if let Some(log) = &s.solvers().log_map {
        if let Some((y, len)) = log(p, x) {
            let path = integrate_geodesic(s, p, &y, len, &StepControl::default())?;
            let v_end = path.end_velocity().to_vec();
            let f = s.norm_value(x, &v_end);
            push_unique(&mut vectors, linalg::scale(&v_end, 1.0 / f));
        }
    }
    if vectors.is_empty() {
        let sols = shooting_distance(s, p, x, &ShootOpts::default())?;
        let dmin = sols[0].1;
        for (z, len) in sols {
            if len <= (1.0 + tol) * dmin {
                let y = linalg::scale(&z, 1.0 / len);
                let path = integrate_geodesic(s, p, &y, len, &StepControl::default())?;
                let v_end = path.end_velocity().to_vec();
                let f = s.norm_value(x, &v_end);
                push_unique(&mut vectors, linalg::scale(&v_end, 1.0 / f));
            }
        }
    }
    if vectors.is_empty() {
        return Err(Error::EmptyTerminalSet {
            from: p.to_vec(),
            to: x.to_vec(),
        });
    }
    Ok(TerminalVelocitySet {
        vectors,
        from: p.to_vec(),
        at: x.to_vec(),
        tolerance: tol,
    })
}

fn push_unique(vectors: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    if !vectors
        .iter()
        .any(|u| linalg::norm2(&linalg::sub(u, &v)) < 1e-6)
    {
        vectors.push(v);
    }
}

/// Measures the forward or backward angle at the point `along(t_at)`
/// toward `p` via the one-sided limit quotient of the definition,
/// Richardson-extrapolated over four halved offsets. Returns radians in
/// `[0, π]`.
pub fn measure_angle(
    s: &FinslerStructure,
    p: &[f64],
    along: &GeodesicPath,
    t_at: f64,
    sense: AngleSense,
) -> Result<f64> {
    let scale = along.duration() * along.initial_speed;
    let (b, _) = along.at(s, t_at)?;
    let d_pb = distance(s, p, &b)?;
    let room = match sense {
        AngleSense::Forward => along.times.last().unwrap() - t_at,
        AngleSense::Backward => t_at - along.times[0],
    };
    if room <= 0.0 {
        return Err(Error::InvalidParameter(
            "no room on the path for the one-sided angle limit".into(),
        ));
    }
    let h0 = (1e-2 * scale).min(room / 2.0);
    let mut quotients = [0.0_f64; 4];
    for (k, q) in quotients.iter_mut().enumerate() {
        let h = h0 / (1 << k) as f64;
        *q = match sense {
            AngleSense::Forward => {
                let (bh, _) = along.at(s, t_at + h)?;
                let num = distance(s, p, &bh)? - d_pb;
                let den = d_max(s, &b, &bh)?;
                -num / den
            }
            AngleSense::Backward => {
                let (bh, _) = along.at(s, t_at - h)?;
                let num = d_pb - distance(s, p, &bh)?;
                let den = d_max(s, &bh, &b)?;
                num / den
            }
        };
    }
    // Neville extrapolation in h (error series starts at O(h))
    let mut t = [[0.0_f64; 4]; 4];
    for i in 0..4 {
        t[i][0] = quotients[i];
    }
    for j in 1..4 {
        for i in j..4 {
            let w = (1 << j) as f64;
            t[i][j] = (w * t[i][j - 1] - t[i - 1][j - 1]) / (w - 1.0);
        }
    }
    let spread = (t[3][3] - t[2][2]).abs();
    if spread > 2e-3 {
        return Err(Error::AngleNotConverging { spread });
    }
    Ok(t[3][3].clamp(-1.0, 1.0).acos())
}

/// Predicts the forward angle at `x` from the generalized first variation
/// formula:
/// `cos = −min_{ω ∈ TV_p(x)} g_ω(y_var, ω) / max(1, F(x, −y_var))`,
/// the denominator matching the `d_max` normalization of the measured
/// angle. `y_var` must be F-unit.
pub fn first_variation_angle(
    s: &FinslerStructure,
    p: &[f64],
    x: &[f64],
    y_var: &[f64],
) -> Result<f64> {
    let tv = terminal_velocities(s, p, x, 1e-9)?;
    let mut min_pair = f64::INFINITY;
    for omega in &tv.vectors {
        let g = s.fundamental_tensor(&TangentVector::new(x.to_vec(), omega.clone()))?;
        min_pair = min_pair.min(g.inner(y_var, omega));
    }
    let neg: Vec<f64> = y_var.iter().map(|c| -c).collect();
    let den = s.norm_value(x, &neg).max(1.0);
    Ok((-min_pair / den).clamp(-1.0, 1.0).acos())
}

/// Scans indicatrix directions at `p` for the finite-horizon ray property
/// `d(p, exp_p(t·y)) ≥ t (1 − tol)` at sampled times `t ≤ horizon`.
pub fn find_rays(
    s: &FinslerStructure,
    p: &[f64],
    horizon: f64,
    tol: f64,
    resolution: usize,
    seed: u64,
) -> Result<RayReport> {
    let n = s.dim();
    let dirs: Vec<Vec<f64>> = if n == 2 {
        (0..resolution)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / resolution as f64;
                let d = vec![th.cos(), th.sin()];
                let f = s.norm_value(p, &d);
                linalg::scale(&d, 1.0 / f)
            })
            .collect()
    } else {
        s.indicatrix_sample(p, resolution, seed)?
            .into_iter()
            .map(|v| v.fiber)
            .collect()
    };
    let schedule = [horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon];
    let mut accepted = Vec::with_capacity(dirs.len());
    for y in &dirs {
        let mut ok = true;
        let mut cursor_x = p.to_vec();
        let mut cursor_v = y.clone();
        let mut cursor_t = 0.0;
        for &t in &schedule {
            let xt = if s.is_x_independent() {
                let mut x = p.to_vec();
                linalg::axpy(&mut x, t, y);
                x
            } else {
                // continue from the previous schedule stop
                match integrate_geodesic(
                    s,
                    &cursor_x,
                    &cursor_v,
                    t - cursor_t,
                    &StepControl::default(),
                ) {
                    Ok(path) if path.complete => {
                        cursor_x = path.end_point().to_vec();
                        cursor_v = path.end_velocity().to_vec();
                        cursor_t = t;
                        cursor_x.clone()
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            };
            let d = distance(s, p, &xt)?;
            if d < t * (1.0 - tol) {
                ok = false;
                break;
            }
        }
        accepted.push(ok);
    }
    let count = accepted.iter().filter(|&&a| a).count();
    Ok(RayReport {
        fraction: count as f64 / dirs.len() as f64,
        directions: dirs,
        accepted,
        horizon,
        tolerance: tol,
    })
}

/// True when the path closes up smoothly: endpoint matches the start point
/// modulo the lattice, and terminal velocity matches the initial one.
pub fn closed_geodesic_check(s: &FinslerStructure, path: &GeodesicPath, tol: f64) -> bool {
    let delta = linalg::sub(path.end_point(), path.start_point());
    let pos_gap = deck_range(s, &delta)
        .iter()
        .map(|d| linalg::norm2(d))
        .fold(f64::INFINITY, f64::min);
    let vel_gap = linalg::norm2(&linalg::sub(path.end_velocity(), path.start_velocity()));
    pos_gap <= tol && vel_gap <= tol
}

/// One entry of the terminal-velocity limit probe.
#[derive(Clone, Debug, Serialize)]
pub struct TerminalProbePoint {
    pub t: f64,
    pub hausdorff_distance: f64,
    pub set_size: usize,
}

/// Tracks the Hausdorff distance between `TV_{γ(t)}(p)` and `{−γ̇(0)}`
/// along the ray `γ(t) = exp_p(t·y)`.
pub fn terminal_velocity_limit_probe(
    s: &FinslerStructure,
    p: &[f64],
    y: &[f64],
    schedule: &[f64],
    tie_tol: f64,
) -> Result<Vec<TerminalProbePoint>> {
    let target: Vec<f64> = y.iter().map(|c| -c).collect();
    let mut out = Vec::with_capacity(schedule.len());
    for &t in schedule {
        let gamma_t = exp_map(s, p, y, t)?;
        let tv = terminal_velocities(s, &gamma_t, p, tie_tol)?;
        let mut worst = 0.0_f64;
        for v in &tv.vectors {
            worst = worst.max(linalg::norm2(&linalg::sub(v, &target)));
        }
        out.push(TerminalProbePoint {
            t,
            hausdorff_distance: worst,
            set_size: tv.vectors.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fixture(key: &str, params: serde_json::Value) -> FinslerStructure {
        fixtures::build(key, &params).unwrap()
    }

    #[test]
    fn euclidean_geodesics_are_straight_lines() {
        let s = fixture("euclidean", serde_json::json!({}));
        let path = integrate_geodesic(
            &s,
            &[0.0, 0.0],
            &[0.6, 0.8],
            2.0,
            &StepControl::default(),
        )
        .unwrap();
        let end = path.end_point();
        assert!((end[0] - 1.2).abs() < 1e-10 && (end[1] - 1.6).abs() < 1e-10);
        assert!(path.speed_drift < 1e-12);
    }

    #[test]
    fn sphere_geodesic_tracks_great_circle_and_closes() {
        let s = fixture("riemann-sphere", serde_json::json!({}));
        let p = [0.3, 0.1];
        // pick a direction that is not radial so the circle stays bounded
        let y = {
            let d = [0.2, 1.0];
            let f = s.norm_value(&p, &d);
            [d[0] / f, d[1] / f]
        };
        let path =
            integrate_geodesic(&s, &p, &y, 2.0 * std::f64::consts::PI, &StepControl::default())
                .unwrap();
        assert!(path.complete, "great circle should stay on the chart");
        let end = path.end_point();
        let gap = ((end[0] - p[0]).powi(2) + (end[1] - p[1]).powi(2)).sqrt();
        assert!(gap < 1e-6, "period-2π return gap {gap}");
        assert!(closed_geodesic_check(&s, &path, 1e-5));
        assert!(path.speed_drift < 1e-6 * path.initial_speed);
    }

    #[test]
    fn randers_distance_asymmetry_ratio() {
        let s = fixture("randers", serde_json::json!({"b": [0.5, 0.0]}));
        let d1 = distance(&s, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let d2 = distance(&s, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((d1 - 1.5).abs() < 1e-12);
        assert!((d2 - 0.5).abs() < 1e-12);
        let dm = d_max(&s, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((dm - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cylinder_wrap_distance_uses_deck_minimum() {
        let s = fixture("flat-cylinder", serde_json::json!({"circumference": 1.0}));
        let d = distance(&s, &[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let d = distance(&s, &[0.0, 0.0], &[0.9, 0.0]).unwrap();
        assert!((d - 0.1).abs() < 1e-12, "wrap should win: {d}");
    }

    #[test]
    fn shooting_matches_closed_form_on_sphere() {
        let s = fixture("riemann-sphere", serde_json::json!({}));
        let p = [0.2, -0.3];
        let q = [0.5, 0.4];
        let exact = fixtures::sphere_chart_distance(1.0, &p, &q);
        let sols = shooting_distance(&s, &p, &q, &ShootOpts::default()).unwrap();
        assert!(
            (sols[0].1 - exact).abs() < 1e-7,
            "shooting {} vs closed form {exact}",
            sols[0].1
        );
    }

    #[test]
    fn shooting_matches_closed_form_on_funk_and_hyperbolic() {
        let funk = fixture("funk-disk", serde_json::json!({}));
        let p = [0.1, 0.2];
        let q = [-0.3, 0.15];
        let exact = fixtures::funk_distance(&p, &q);
        let sols = shooting_distance(&funk, &p, &q, &ShootOpts::default()).unwrap();
        assert!((sols[0].1 - exact).abs() < 1e-7);

        let hyp = fixture("hyperbolic-disk", serde_json::json!({}));
        let exact = fixtures::hyperbolic_distance(&p, &q);
        let sols = shooting_distance(&hyp, &p, &q, &ShootOpts::default()).unwrap();
        assert!((sols[0].1 - exact).abs() < 1e-7);
    }

    #[test]
    fn euclidean_right_angle_measured() {
        let s = fixture("euclidean", serde_json::json!({}));
        // path along the x-axis through the origin
        let path = integrate_geodesic(
            &s,
            &[-1.0, 0.0],
            &[1.0, 0.0],
            2.0,
            &StepControl::default(),
        )
        .unwrap();
        let angle = measure_angle(&s, &[0.0, 1.0], &path, 1.0, AngleSense::Forward).unwrap();
        assert!(
            (angle - std::f64::consts::FRAC_PI_2).abs() < 1e-6,
            "angle {angle}"
        );
        // collinear: p behind b gives π, p ahead gives 0
        let behind = measure_angle(&s, &[-3.0, 0.0], &path, 1.0, AngleSense::Forward).unwrap();
        assert!((behind - std::f64::consts::PI).abs() < 1e-6);
        let ahead = measure_angle(&s, &[3.0, 0.0], &path, 1.0, AngleSense::Forward).unwrap();
        assert!(ahead.abs() < 1e-6);
    }

    #[test]
    fn first_variation_matches_euclidean_cosine() {
        let s = fixture("euclidean", serde_json::json!({}));
        let p = [0.0, 1.0];
        let x = [0.0, 0.0];
        let y_var = [1.0, 0.0];
        let angle = first_variation_angle(&s, &p, &x, &y_var).unwrap();
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn cylinder_cut_point_takes_min_of_two_branches() {
        let s = fixture("flat-cylinder", serde_json::json!({"circumference": 1.0}));
        // the wrap cut locus from p = (0, 0) sits at x1 = 0.5: two minimal
        // geodesics arrive there
        let tv = terminal_velocities(&s, &[0.0, 0.0], &[0.5, 0.3], 1e-9).unwrap();
        assert_eq!(tv.vectors.len(), 2, "expected both wrap branches");
        // measured forward angle along the vertical path through the cut
        // point must match the first-variation minimum
        let path = integrate_geodesic(
            &s,
            &[0.5, 0.3],
            &[0.0, 1.0],
            1.0,
            &StepControl::default(),
        )
        .unwrap();
        let measured = measure_angle(&s, &[0.0, 0.0], &path, 0.0, AngleSense::Forward).unwrap();
        let predicted = first_variation_angle(&s, &[0.0, 0.0], &[0.5, 0.3], &[0.0, 1.0]).unwrap();
        assert!(
            (measured - predicted).abs() < 1e-3,
            "measured {measured} vs first variation {predicted}"
        );
    }

    #[test]
    fn rays_on_cylinder_shrink_like_one_over_horizon() {
        let s = fixture("flat-cylinder", serde_json::json!({"circumference": 1.0}));
        // tight slack so the wrap criterion |a| ≤ 1/(2t) dominates the
        // t·tol allowance
        let tol = 1e-6;
        let r1 = find_rays(&s, &[0.0, 0.0], 20.0, tol, 512, 0).unwrap();
        let r2 = find_rays(&s, &[0.0, 0.0], 80.0, tol, 512, 0).unwrap();
        assert!(r1.fraction > 0.0 && r2.fraction > 0.0);
        assert!(r2.fraction < r1.fraction);
        // unwrapping oracle: direction (a, b) passes the check at time t
        // iff |a| ≤ 1/(2t) + t·tol; the binding time is the schedule min
        let oracle = |horizon: f64| {
            let cutoff = [horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon]
                .iter()
                .map(|t| 0.5 / t + t * tol)
                .fold(f64::INFINITY, f64::min);
            let m = 512;
            let count = (0..m)
                .filter(|k| {
                    let th = 2.0 * std::f64::consts::PI * *k as f64 / m as f64;
                    th.cos().abs() <= cutoff
                })
                .count();
            count as f64 / m as f64
        };
        assert!((r1.fraction - oracle(20.0)).abs() < 0.01);
        assert!((r2.fraction - oracle(80.0)).abs() < 0.01);
    }

    #[test]
    fn euclidean_every_direction_is_a_ray() {
        let s = fixture("euclidean", serde_json::json!({}));
        let r = find_rays(&s, &[0.0, 0.0], 100.0, 1e-3, 64, 0).unwrap();
        assert_eq!(r.fraction, 1.0);
    }

    #[test]
    fn terminal_velocity_probe_on_axial_cylinder_ray_is_zero() {
        let s = fixture("flat-cylinder", serde_json::json!({"circumference": 1.0}));
        let probe = terminal_velocity_limit_probe(
            &s,
            &[0.2, 0.0],
            &[0.0, 1.0],
            &[1.0, 5.0, 25.0, 100.0],
            1e-9,
        )
        .unwrap();
        for pt in &probe {
            assert!(
                pt.hausdorff_distance < 1e-9,
                "axial ray terminal set should be exactly the reversed velocity"
            );
        }
    }

    #[test]
    fn triangle_side_lengths_match_distances() {
        let s = fixture("riemann-sphere", serde_json::json!({}));
        let tri = forward_triangle(&s, &[0.1, 0.0], &[0.4, 0.2], &[0.2, 0.5]).unwrap();
        for (len, (u, v)) in tri.lengths.iter().zip([
            (&tri.p, &tri.a),
            (&tri.p, &tri.b),
            (&tri.a, &tri.b),
        ]) {
            let d = distance(&s, u, v).unwrap();
            assert!((len - d).abs() < 1e-6, "side length {len} vs distance {d}");
        }
    }
}
