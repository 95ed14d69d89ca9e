//! Second-order jets: a value together with its exact gradient and Hessian.
//!
//! Catalog fields are written once as jet expressions, which gives analytic
//! first and second partials without hand-differentiating each metric.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest chart dimension a jet can carry.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    dim: usize,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        Jet {
            dim,
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x^axis` evaluated at `value`.
    pub fn variable(dim: usize, axis: usize, value: f64) -> Self {
        let mut j = Jet::constant(dim, value);
        j.grad[axis] = 1.0;
        j
    }

    /// Coordinate jets for every axis of `p`.
    pub fn variables(p: &[f64]) -> Vec<Jet> {
        (0..p.len()).map(|i| Jet::variable(p.len(), i, p[i])).collect()
    }

    /// Builds a jet from externally supplied partials. `hess` is row-major `dim*dim`.
    pub fn from_parts(value: f64, grad: &[f64], hess: &[f64]) -> Self {
        let dim = grad.len();
        assert_eq!(hess.len(), dim * dim);
        let mut j = Jet::constant(dim, value);
        for i in 0..dim {
            j.grad[i] = grad[i];
            for k in 0..dim {
                j.hess[i][k] = hess[i * dim + k];
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn hess(&self, i: usize, k: usize) -> f64 {
        self.hess[i][k]
    }

    pub fn grad_vec(&self) -> Vec<f64> {
        self.grad[..self.dim].to_vec()
    }

    /// Chain rule for a scalar function with derivatives `d0, d1, d2` at the current value.
    fn chain(&self, d0: f64, d1: f64, d2: f64) -> Self {
        let mut out = Jet::constant(self.dim, d0);
        for i in 0..self.dim {
            out.grad[i] = d1 * self.grad[i];
            for k in 0..self.dim {
                out.hess[i][k] = d1 * self.hess[i][k] + d2 * self.grad[i] * self.grad[k];
            }
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn recip(self) -> Self {
        let x = self.value;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn powi(self, n: i32) -> Self {
        let x = self.value;
        let nf = n as f64;
        let d1 = if n == 0 { 0.0 } else { nf * x.powi(n - 1) };
        let d2 = if n == 0 || n == 1 { 0.0 } else { nf * (nf - 1.0) * x.powi(n - 2) };
        self.chain(x.powi(n), d1, d2)
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.value;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn square(self) -> Self {
        self * self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.dim, rhs.dim);
        self.value += rhs.value;
        for i in 0..self.dim {
            self.grad[i] += rhs.grad[i];
            for k in 0..self.dim {
                self.hess[i][k] += rhs.hess[i][k];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.value = -self.value;
        for i in 0..self.dim {
            self.grad[i] = -self.grad[i];
            for k in 0..self.dim {
                self.hess[i][k] = -self.hess[i][k];
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.dim, rhs.dim);
        let (a, b) = (self.value, rhs.value);
        let mut out = Jet::constant(self.dim, a * b);
        for i in 0..self.dim {
            out.grad[i] = self.grad[i] * b + a * rhs.grad[i];
            for k in 0..self.dim {
                out.hess[i][k] = a * rhs.hess[i][k]
                    + b * self.hess[i][k]
                    + self.grad[i] * rhs.grad[k]
                    + rhs.grad[i] * self.grad[k];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.value *= rhs;
        for i in 0..self.dim {
            self.grad[i] *= rhs;
            for k in 0..self.dim {
                self.hess[i][k] *= rhs;
            }
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        (-rhs) + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}
