//! Forward-mode differentiation scalar used by the NLML gradient.
//!
//! Kernel evaluations are written generically over [`Scalar`] so the same
//! code path produces plain values (`f64`) and value-plus-partials
//! ([`Dual`]) without a separate hand-derived gradient per kernel family.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Sized
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    /// Raise to a constant power.
    fn powf_const(self, e: f64) -> Self;
    fn abs(self) -> Self;
    /// Multiply by a constant without building a `Scalar` for it.
    fn scale(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf_const(self, e: f64) -> Self {
        self.powf(e)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// First-order dual number carrying partials with respect to a fixed set of
/// free parameters. Arithmetic reuses the left operand's buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: Vec<f64>,
}

impl Dual {
    /// Seed variable `index` of `n` with value `v` (unit partial).
    pub fn var(v: f64, index: usize, n: usize) -> Self {
        let mut d = vec![0.0; n];
        d[index] = 1.0;
        Dual { v, d }
    }

    pub fn constant_of(v: f64, n: usize) -> Self {
        Dual { v, d: vec![0.0; n] }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, mut rhs: Dual) -> Dual {
        // An empty buffer is a width-agnostic constant (all partials zero).
        if self.d.is_empty() {
            rhs.v += self.v;
            return rhs;
        }
        self.v += rhs.v;
        for (a, b) in self.d.iter_mut().zip(&rhs.d) {
            *a += b;
        }
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: Dual) -> Dual {
        if self.d.is_empty() && !rhs.d.is_empty() {
            return -(rhs - self);
        }
        self.v -= rhs.v;
        for (a, b) in self.d.iter_mut().zip(&rhs.d) {
            *a -= b;
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(mut self, rhs: Dual) -> Dual {
        if self.d.is_empty() {
            return rhs.scale(self.v);
        }
        if rhs.d.is_empty() {
            return self.scale(rhs.v);
        }
        for (a, b) in self.d.iter_mut().zip(&rhs.d) {
            *a = *a * rhs.v + b * self.v;
        }
        self.v *= rhs.v;
        self
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(mut self, mut rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.v;
        if rhs.d.is_empty() {
            return self.scale(inv);
        }
        let q = self.v * inv;
        if self.d.is_empty() {
            let s = -q * inv;
            for b in rhs.d.iter_mut() {
                *b *= s;
            }
            rhs.v = q;
            return rhs;
        }
        for (a, b) in self.d.iter_mut().zip(&rhs.d) {
            *a = (*a - q * b) * inv;
        }
        self.v = q;
        self
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(mut self) -> Dual {
        self.v = -self.v;
        for a in self.d.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        // Width is fixed by the enclosing evaluation; a zero-width constant
        // broadcasts in the elementwise loops above.
        Dual { v, d: Vec::new() }
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn exp(mut self) -> Self {
        let e = self.v.exp();
        for a in self.d.iter_mut() {
            *a *= e;
        }
        self.v = e;
        self
    }

    fn cos(mut self) -> Self {
        let s = -self.v.sin();
        for a in self.d.iter_mut() {
            *a *= s;
        }
        self.v = self.v.cos();
        self
    }

    fn sqrt(mut self) -> Self {
        let r = self.v.sqrt();
        // at v = 0 the only consistent partials are the zero ones already
        // present (e.g. Matérn distance at τ = 0); avoid 0·∞ = NaN
        let g = if r > 0.0 { 0.5 / r } else { 0.0 };
        for a in self.d.iter_mut() {
            *a *= g;
        }
        self.v = r;
        self
    }

    fn powf_const(mut self, e: f64) -> Self {
        let g = e * self.v.powf(e - 1.0);
        for a in self.d.iter_mut() {
            *a *= g;
        }
        self.v = self.v.powf(e);
        self
    }

    fn abs(mut self) -> Self {
        let s = if self.v < 0.0 { -1.0 } else { 1.0 };
        self.v = self.v.abs();
        for a in self.d.iter_mut() {
            *a *= s;
        }
        self
    }

    fn scale(mut self, c: f64) -> Self {
        self.v *= c;
        for a in self.d.iter_mut() {
            *a *= c;
        }
        self
    }
}
