//! Generic tensor kernels shared by the norm and curvature modules.
//!
//! All kernels are parametric in the scalar level `T`, so the same code
//! that assembles `g`, the spray, or the connection at plain `f64` also
//! runs one dual layer up to produce exact base- or fiber-derivatives of
//! those quantities.

use crate::dual::{Dual, Dual2};
use crate::linalg;
use crate::norm::{Ad, NormObj};

/// Fundamental tensor `g_ij(x, y) = ½ ∂²F²(y + s·e_i + t·e_j)/∂s∂t`,
/// row-major n×n.
pub fn g_matrix<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T], n: usize) -> Vec<T> {
    let xl: Vec<Dual2<T>> = x.iter().map(|&c| Dual2::constant(c)).collect();
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let ys: Vec<Dual2<T>> = (0..n)
                .map(|k| {
                    Dual2::seeded(
                        y[k],
                        if k == i { T::one() } else { T::zero() },
                        if k == j { T::one() } else { T::zero() },
                    )
                })
                .collect();
            let f = T::eval_norm_hyper(nm, &xl, &ys);
            let f2 = f * f;
            let gij = T::from_f64(0.5) * f2.e12;
            g[i * n + j] = gij;
            g[j * n + i] = gij;
        }
    }
    g
}

/// `∂g_ij/∂x_k`, laid out as `out[k*n*n + i*n + j]`.
pub fn g_dx<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T], n: usize) -> Vec<T>
where
    Dual<T>: Ad,
{
    let mut out = vec![T::zero(); n * n * n];
    for k in 0..n {
        let xk: Vec<Dual<T>> = x
            .iter()
            .enumerate()
            .map(|(m, &c)| Dual::new(c, if m == k { T::one() } else { T::zero() }))
            .collect();
        let yk: Vec<Dual<T>> = y.iter().map(|&c| Dual::constant(c)).collect();
        let g = g_matrix::<Dual<T>>(nm, &xk, &yk, n);
        for ij in 0..n * n {
            out[k * n * n + ij] = g[ij].du;
        }
    }
    out
}

/// `∂g_ij/∂y_r`, laid out as `out[r*n*n + i*n + j]`.
pub fn g_dy<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T], n: usize) -> Vec<T>
where
    Dual<T>: Ad,
{
    let mut out = vec![T::zero(); n * n * n];
    for r in 0..n {
        let xr: Vec<Dual<T>> = x.iter().map(|&c| Dual::constant(c)).collect();
        let yr: Vec<Dual<T>> = y
            .iter()
            .enumerate()
            .map(|(m, &c)| Dual::new(c, if m == r { T::one() } else { T::zero() }))
            .collect();
        let g = g_matrix::<Dual<T>>(nm, &xr, &yr, n);
        for ij in 0..n * n {
            out[r * n * n + ij] = g[ij].du;
        }
    }
    out
}

/// Geodesic spray coefficients from the Euler-Lagrange form of the energy
/// `E = ½F²`:
///
/// `G^i = ¼ g^{il} (2 ∂g_lj/∂x_k − ∂g_jk/∂x_l) y^j y^k`
///
/// Returns `None` when `g_y` is singular.
pub fn spray<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T], n: usize) -> Option<Vec<T>>
where
    Dual<T>: Ad,
{
    let g = g_matrix::<T>(nm, x, y, n);
    let ginv = linalg::invert(&g, n)?;
    let dgx = g_dx::<T>(nm, x, y, n);
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        let mut acc = T::zero();
        for l in 0..n {
            let mut inner = T::zero();
            for j in 0..n {
                for k in 0..n {
                    let term = T::from_f64(2.0) * dgx[k * n * n + l * n + j]
                        - dgx[l * n * n + j * n + k];
                    inner += term * y[j] * y[k];
                }
            }
            acc += ginv[i * n + l] * inner;
        }
        out[i] = T::from_f64(0.25) * acc;
    }
    Some(out)
}

/// Spray Jacobian `G^i_j = ∂G^i/∂y^j`, row-major n×n.
pub fn spray_jacobian<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T], n: usize) -> Option<Vec<T>>
where
    Dual<T>: Ad,
    Dual<Dual<T>>: Ad,
{
    let mut out = vec![T::zero(); n * n];
    let xl: Vec<Dual<T>> = x.iter().map(|&c| Dual::constant(c)).collect();
    for j in 0..n {
        let yj: Vec<Dual<T>> = y
            .iter()
            .enumerate()
            .map(|(m, &c)| Dual::new(c, if m == j { T::one() } else { T::zero() }))
            .collect();
        let gi = spray::<Dual<T>>(nm, &xl, &yj, n)?;
        for i in 0..n {
            out[i * n + j] = gi[i].du;
        }
    }
    Some(out)
}

/// Chern connection coefficients
///
/// `Γ^i_jk = ½ g^{il} { ∂g_lj/∂x_k − ∂g_jk/∂x_l + ∂g_kl/∂x_j
///                     − ∂g_lj/∂y^r G^r_k + ∂g_jk/∂y^r G^r_l − ∂g_kl/∂y^r G^r_j }`
///
/// laid out as `out[i*n*n + j*n + k]`.
pub fn chern_gamma<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T], n: usize) -> Option<Vec<T>>
where
    Dual<T>: Ad,
    Dual<Dual<T>>: Ad,
{
    let g = g_matrix::<T>(nm, x, y, n);
    let ginv = linalg::invert(&g, n)?;
    let dgx = g_dx::<T>(nm, x, y, n);
    let dgy = g_dy::<T>(nm, x, y, n);
    let gj = spray_jacobian::<T>(nm, x, y, n)?;
    let idx = |a: usize, b: usize, c: usize| a * n * n + b * n + c;
    let mut out = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = T::zero();
                for l in 0..n {
                    let mut bracket = dgx[idx(k, l, j)] - dgx[idx(l, j, k)] + dgx[idx(j, k, l)];
                    for r in 0..n {
                        bracket += -dgy[idx(r, l, j)] * gj[r * n + k]
                            + dgy[idx(r, j, k)] * gj[r * n + l]
                            - dgy[idx(r, k, l)] * gj[r * n + j];
                    }
                    acc += ginv[i * n + l] * bracket;
                }
                out[idx(i, j, k)] = T::from_f64(0.5) * acc;
            }
        }
    }
    Some(out)
}

/// `F²` at the given scalar level.
pub fn norm_squared<T: Ad>(nm: &dyn NormObj, x: &[T], y: &[T]) -> T {
    let f = T::eval_norm(nm, x, y);
    f * f
}
