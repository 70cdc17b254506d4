//! Dual and hyper-dual scalars for exact directional derivatives.
//!
//! Fiberwise tensors (fundamental tensor, Cartan tensor) are second
//! derivatives of `F²`; spray and connection coefficients add base-point
//! derivatives on top, and the curvature operator differentiates the
//! connection once more. All of these are obtained by evaluating the norm
//! on nested dual numbers instead of tuning finite-difference steps:
//!
//! * [`Dual<T>`] carries one nilpotent direction (`ε² = 0`) and yields a
//!   first derivative that is exact to rounding.
//! * [`Dual2<T>`] carries two independent nilpotent directions and yields
//!   the mixed second derivative `∂²/∂s∂t` in its `e12` component.
//!
//! Both are generic over the component scalar, so towers like
//! `Dual2<Dual<Dual<f64>>>` give exact third and fourth order mixed
//! derivatives. The tower is capped at [`D3`], which is as deep as the
//! connection-derivative computations need to go.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar arithmetic shared by `f64`, [`Dual`] and [`Dual2`].
///
/// Norm evaluators are written once, generically over `Scalar`, and then
/// instantiated at every level of the dual tower.
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// Leading real coefficient with every dual layer stripped.
    fn re(&self) -> f64;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// `|x|` with the one-sided convention `sign(0) = +1`.
    fn abs(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn abs(self) -> Self {
        if self >= 0.0 {
            self
        } else {
            -self
        }
    }
}

/// First-order dual number `re + du·ε`, `ε² = 0`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dual<T: Scalar> {
    pub re: T,
    pub du: T,
}

impl<T: Scalar> Dual<T> {
    #[inline]
    pub fn new(re: T, du: T) -> Self {
        Self { re, du }
    }
    #[inline]
    pub fn constant(re: T) -> Self {
        Self { re, du: T::zero() }
    }
    /// Variable seeded with unit derivative.
    #[inline]
    pub fn variable(re: T) -> Self {
        Self { re, du: T::one() }
    }
    /// Applies a smooth unary function given value and derivative at `re`.
    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        Self {
            re: f,
            du: df * self.du,
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.du + o.du)
    }
}
impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.du - o.du)
    }
}
impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.du + self.du * o.re)
    }
}
impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        Self::new(self.re * inv, (self.du - self.re * inv * o.du) * inv)
    }
}
impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.du)
    }
}
impl<T: Scalar> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Scalar> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Scalar> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re.re()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, T::from_f64(0.5) / s)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::from_f64(1.0),
            1 => self,
            _ if n < 0 => Self::from_f64(1.0) / self.powi(-n),
            _ => {
                // exponentiation by squaring keeps this exact for negatives
                let half = self.powi(n / 2);
                if n % 2 == 0 {
                    half * half
                } else {
                    half * half * self
                }
            }
        }
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        let f = self.re.powf(p);
        let df = self.re.powf(p - 1.0) * T::from_f64(p);
        self.chain(f, df)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), T::one() / self.re)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    #[inline]
    fn abs(self) -> Self {
        if self.re() >= 0.0 {
            self
        } else {
            -self
        }
    }
}

/// Hyper-dual number `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂` with
/// `ε₁² = ε₂² = 0`. The `e12` component of `f(x)` carries the exact mixed
/// second derivative when `x` is seeded in two directions.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dual2<T: Scalar> {
    pub re: T,
    pub e1: T,
    pub e2: T,
    pub e12: T,
}

impl<T: Scalar> Dual2<T> {
    #[inline]
    pub fn new(re: T, e1: T, e2: T, e12: T) -> Self {
        Self { re, e1, e2, e12 }
    }
    #[inline]
    pub fn constant(re: T) -> Self {
        Self::new(re, T::zero(), T::zero(), T::zero())
    }
    /// Component seeded in both differentiation directions.
    #[inline]
    pub fn seeded(re: T, d1: T, d2: T) -> Self {
        Self::new(re, d1, d2, T::zero())
    }
    /// Applies a smooth unary function given value, first and second
    /// derivative at `re`.
    #[inline]
    fn chain(self, f: T, df: T, d2f: T) -> Self {
        Self {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }
}

impl<T: Scalar> Add for Dual2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(
            self.re + o.re,
            self.e1 + o.e1,
            self.e2 + o.e2,
            self.e12 + o.e12,
        )
    }
}
impl<T: Scalar> Sub for Dual2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.re - o.re,
            self.e1 - o.e1,
            self.e2 - o.e2,
            self.e12 - o.e12,
        )
    }
}
impl<T: Scalar> Mul for Dual2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e12 * o.re + self.e1 * o.e2 + self.e2 * o.e1,
        )
    }
}
impl<T: Scalar> Div for Dual2<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let inv2 = inv * inv;
        // reciprocal of o, then multiply
        let r = Self::new(
            inv,
            -o.e1 * inv2,
            -o.e2 * inv2,
            (T::from_f64(2.0) * o.e1 * o.e2 * inv - o.e12) * inv2,
        );
        self * r
    }
}
impl<T: Scalar> Neg for Dual2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}
impl<T: Scalar> AddAssign for Dual2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Scalar> SubAssign for Dual2<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Scalar> MulAssign for Dual2<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual2<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }
    #[inline]
    fn re(&self) -> f64 {
        self.re.re()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let df = T::from_f64(0.5) / s;
        let d2f = -T::from_f64(0.25) / (s * self.re);
        self.chain(s, df, d2f)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::from_f64(1.0),
            1 => self,
            _ if n < 0 => Self::from_f64(1.0) / self.powi(-n),
            _ => {
                let half = self.powi(n / 2);
                if n % 2 == 0 {
                    half * half
                } else {
                    half * half * self
                }
            }
        }
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        let f = self.re.powf(p);
        let df = self.re.powf(p - 1.0) * T::from_f64(p);
        let d2f = self.re.powf(p - 2.0) * T::from_f64(p * (p - 1.0));
        self.chain(f, df, d2f)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        let inv = T::one() / self.re;
        self.chain(self.re.ln(), inv, -inv * inv)
    }
    #[inline]
    fn sin(self) -> Self {
        let (s, c) = (self.re.sin(), self.re.cos());
        self.chain(s, c, -s)
    }
    #[inline]
    fn cos(self) -> Self {
        let (s, c) = (self.re.sin(), self.re.cos());
        self.chain(c, -s, -c)
    }
    #[inline]
    fn abs(self) -> Self {
        if self.re() >= 0.0 {
            self
        } else {
            -self
        }
    }
}

/// One dual layer over `f64`.
pub type D1 = Dual<f64>;
/// Two nested dual layers.
pub type D2 = Dual<D1>;
/// Three nested dual layers; deepest level the tensor kernels require.
pub type D3 = Dual<D2>;

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    // f(x, y) = x²·sin(y) + √(x·y): handy mixed test function
    fn f<T: Scalar>(x: T, y: T) -> T {
        x * x * y.sin() + (x * y).sqrt()
    }

    #[test]
    fn dual_first_derivative_matches_analytic() {
        let (x0, y0) = (1.3, 0.7);
        let v = f(D1::variable(x0), D1::constant(y0));
        // ∂f/∂x = 2x sin y + y/(2√(xy))
        let dx = 2.0 * x0 * y0.sin() + y0 / (2.0 * (x0 * y0).sqrt());
        close(v.re, f(x0, y0), 1e-14);
        close(v.du, dx, 1e-14);
    }

    #[test]
    fn dual2_mixed_second_derivative_matches_analytic() {
        let (x0, y0) = (1.3, 0.7);
        let v = f(
            Dual2::seeded(x0, 1.0, 0.0),
            Dual2::seeded(y0, 0.0, 1.0),
        );
        // ∂²f/∂x∂y = 2x cos y + (∂/∂y)[y/(2√(xy))] = 2x cos y + 1/(4√(xy)) · ... computed below
        // d/dy [ y·(xy)^{-1/2}/2 ] = (xy)^{-1/2}/2 - y·x·(xy)^{-3/2}/4 = (xy)^{-1/2}/4
        let dxy = 2.0 * x0 * y0.cos() + 0.25 / (x0 * y0).sqrt();
        close(v.e12, dxy, 1e-13);
    }

    #[test]
    fn dual2_pure_second_derivative_via_equal_seeds() {
        // seeding both directions along the same variable gives ∂²f/∂x²
        let (x0, y0) = (1.3, 0.7);
        let v = f(
            Dual2::seeded(x0, 1.0, 1.0),
            Dual2::constant(y0),
        );
        let dxx = 2.0 * y0.sin() - y0 * y0 / (4.0 * (x0 * y0).powf(1.5));
        close(v.e12, dxx, 1e-13);
    }

    #[test]
    fn nested_tower_third_derivative() {
        // g(x) = x⁴ has g'''(x) = 24x; evaluate via Dual2<Dual<f64>>
        let x0 = 0.9_f64;
        let x = Dual2::<D1>::seeded(D1::variable(x0), D1::one(), D1::one());
        let v = x.powi(4);
        close(v.e12.du, 24.0 * x0, 1e-12);
    }

    #[test]
    fn division_and_ln_consistent() {
        let x0 = 2.1_f64;
        let a = Dual2::<f64>::seeded(x0, 1.0, 1.0);
        let q = Dual2::from_f64(1.0) / a;
        close(q.re, 1.0 / x0, 1e-15);
        close(q.e1, -1.0 / (x0 * x0), 1e-15);
        close(q.e12, 2.0 / (x0 * x0 * x0), 1e-14);
        let l = a.ln();
        close(l.e12, -1.0 / (x0 * x0), 1e-15);
    }

    #[test]
    fn powi_matches_powf_for_positive_base() {
        let a = Dual2::<f64>::seeded(1.7, 1.0, 0.5);
        let p3 = a.powi(3);
        let pf = a.powf(3.0);
        close(p3.re, pf.re, 1e-12);
        close(p3.e1, pf.e1, 1e-12);
        close(p3.e12, pf.e12, 1e-12);
    }
}
