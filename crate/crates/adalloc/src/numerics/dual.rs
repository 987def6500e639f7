//! Second-order forward-mode AD scalar.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

use super::scalar::{DomainError, Scalar};

/// Derivative payload of a seeded [`Dual2`]: gradient and dense symmetric
/// Hessian with respect to the `n` seeded variables.
#[derive(Debug, Clone, PartialEq)]
struct Derivs {
    /// n first partials.
    g: Vec<f64>,
    /// n x n second partials, row-major. Kept bitwise symmetric by building
    /// every update from symmetric expressions.
    h: Vec<f64>,
}

impl Derivs {
    fn zeros(n: usize) -> Self {
        Self {
            g: vec![0.0; n],
            h: vec![0.0; n * n],
        }
    }

    fn n(&self) -> usize {
        self.g.len()
    }
}

/// A scalar carrying its value together with first and second derivatives
/// with respect to a fixed set of seeded variables.
///
/// Constants (created by [`Dual2::constant`] or [`Scalar::from_real`]) carry
/// no derivative payload and are promoted on contact with seeded values, so
/// the seeding dimension never has to be threaded through model code.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    v: f64,
    d: Option<Box<Derivs>>,
}

impl Dual2 {
    /// A constant: zero first and second derivatives.
    pub fn constant(v: f64) -> Self {
        Self { v, d: None }
    }

    /// Seed `point` as the vector of independent variables: variable `i`
    /// starts with gradient `e_i` and zero Hessian.
    pub fn variables(point: &[f64]) -> Vec<Self> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut d = Derivs::zeros(n);
                d.g[i] = 1.0;
                Self {
                    v,
                    d: Some(Box::new(d)),
                }
            })
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    /// First partials with respect to the `n` seeded variables.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        match &self.d {
            Some(d) => {
                assert_eq!(d.n(), n, "dual seeded with {} variables, asked for {n}", d.n());
                d.g.clone()
            }
            None => vec![0.0; n],
        }
    }

    /// Second partials, row-major `n` x `n`.
    pub fn hessian_raw(&self, n: usize) -> Vec<f64> {
        match &self.d {
            Some(d) => {
                assert_eq!(d.n(), n, "dual seeded with {} variables, asked for {n}", d.n());
                d.h.clone()
            }
            None => vec![0.0; n * n],
        }
    }

    fn dims_match(a: &Option<Box<Derivs>>, b: &Option<Box<Derivs>>) {
        if let (Some(da), Some(db)) = (a, b) {
            assert_eq!(
                da.n(),
                db.n(),
                "mixed duals seeded over {} and {} variables",
                da.n(),
                db.n()
            );
        }
    }

    /// Chain rule for `w = f(a)` given `f(a)`, `f'(a)`, `f''(a)`.
    fn unary(&self, v: f64, f1: f64, f2: f64) -> Self {
        let d = self.d.as_ref().map(|da| {
            let n = da.n();
            let mut out = Derivs::zeros(n);
            for i in 0..n {
                out.g[i] = f1 * da.g[i];
            }
            for i in 0..n {
                for j in 0..n {
                    out.h[i * n + j] = f1 * da.h[i * n + j] + f2 * da.g[i] * da.g[j];
                }
            }
            Box::new(out)
        });
        Self { v, d }
    }

    /// Chain rule for `w = f(a, b)` given the value and the partials of `f`
    /// at `(a, b)`.
    #[allow(clippy::too_many_arguments)]
    fn binary(&self, rhs: &Self, v: f64, fa: f64, fb: f64, faa: f64, fab: f64, fbb: f64) -> Self {
        Self::dims_match(&self.d, &rhs.d);
        let d = match (&self.d, &rhs.d) {
            (None, None) => None,
            (Some(_), None) => {
                return self.unary(v, fa, faa);
            }
            (None, Some(_)) => {
                return rhs.unary(v, fb, fbb);
            }
            (Some(da), Some(db)) => {
                let n = da.n();
                let mut out = Derivs::zeros(n);
                for i in 0..n {
                    out.g[i] = fa * da.g[i] + fb * db.g[i];
                }
                for i in 0..n {
                    for j in 0..n {
                        out.h[i * n + j] = fa * da.h[i * n + j]
                            + fb * db.h[i * n + j]
                            + faa * da.g[i] * da.g[j]
                            + fab * (da.g[i] * db.g[j] + db.g[i] * da.g[j])
                            + fbb * db.g[i] * db.g[j];
                    }
                }
                Some(Box::new(out))
            }
        };
        Self { v, d }
    }
}

impl Add for Dual2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(&rhs, self.v + rhs.v, 1.0, 1.0, 0.0, 0.0, 0.0)
    }
}

impl Sub for Dual2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(&rhs, self.v - rhs.v, 1.0, -1.0, 0.0, 0.0, 0.0)
    }
}

impl Mul for Dual2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(&rhs, self.v * rhs.v, rhs.v, self.v, 0.0, 1.0, 0.0)
    }
}

impl Div for Dual2 {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let b = rhs.v;
        self.binary(
            &rhs,
            self.v / b,
            1.0 / b,
            -self.v / (b * b),
            0.0,
            -1.0 / (b * b),
            2.0 * self.v / (b * b * b),
        )
    }
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.v, -1.0, 0.0)
    }
}

impl AddAssign for Dual2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = self.clone() + rhs;
    }
}

impl SubAssign for Dual2 {
    fn sub_assign(&mut self, rhs: Self) {
        *self = self.clone() - rhs;
    }
}

impl Zero for Dual2 {
    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.v == 0.0
            && self
                .d
                .as_ref()
                .map_or(true, |d| d.g.iter().chain(d.h.iter()).all(|&x| x == 0.0))
    }
}

impl One for Dual2 {
    fn one() -> Self {
        Self::constant(1.0)
    }
}

impl Scalar for Dual2 {
    fn from_real(x: f64) -> Self {
        Self::constant(x)
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.unary(s, c, -s)
    }

    fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.unary(c, -s, -c)
    }

    fn tanh(&self) -> Self {
        let t = self.v.tanh();
        let sech2 = 1.0 - t * t;
        self.unary(t, sech2, -2.0 * t * sech2)
    }

    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.unary(e, e, e)
    }

    fn atan2(&self, den: &Self) -> Self {
        let (a, b) = (self.v, den.v);
        let r = a * a + b * b;
        self.binary(
            den,
            a.atan2(b),
            b / r,
            -a / r,
            -2.0 * a * b / (r * r),
            (a * a - b * b) / (r * r),
            2.0 * a * b / (r * r),
        )
    }

    fn powi(&self, n: i32) -> Self {
        let a = self.v;
        self.unary(
            a.powi(n),
            f64::from(n) * a.powi(n - 1),
            f64::from(n) * f64::from(n - 1) * a.powi(n - 2),
        )
    }

    fn abs(&self) -> Self {
        let s = if self.v > 0.0 {
            1.0
        } else if self.v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(self.v.abs(), s, 0.0)
    }

    fn ln(&self) -> Result<Self, DomainError> {
        if self.v <= 0.0 {
            return Err(DomainError::new(
                "ln",
                format!("non-positive argument {}", self.v),
            ));
        }
        Ok(self.unary(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v)))
    }

    fn sqrt(&self) -> Result<Self, DomainError> {
        if self.v < 0.0 {
            return Err(DomainError::new(
                "sqrt",
                format!("negative argument {}", self.v),
            ));
        }
        if self.v == 0.0 {
            return Err(DomainError::new("sqrt", "zero argument is not differentiable"));
        }
        let s = self.v.sqrt();
        Ok(self.unary(s, 0.5 / s, -0.25 / (s * self.v)))
    }

    fn try_div(&self, den: &Self) -> Result<Self, DomainError> {
        if den.v == 0.0 {
            return Err(DomainError::new("div", "division by zero"));
        }
        Ok(self.clone() / den.clone())
    }
}
