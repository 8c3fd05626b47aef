//! Truncated power series and the moment/free-cumulant conversion.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power series `c_0 + c_1 z + ... + c_N z^N`, truncated at order `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    /// Series from its coefficients. An empty list is the zero series of order 0.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        TruncatedSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        TruncatedSeries { coeffs: vec![0.0; order + 1] }
    }

    /// The series `z` at the given order.
    pub fn identity(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Same series re-truncated (or zero-padded) to `order`.
    pub fn truncate(&self, order: usize) -> Self {
        TruncatedSeries { coeffs: (0..=order).map(|k| self.coeff(k)).collect() }
    }

    pub fn scale(&self, a: f64) -> Self {
        TruncatedSeries { coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn derivative(&self) -> Self {
        let n = self.order();
        if n == 0 {
            return Self::zero(0);
        }
        TruncatedSeries { coeffs: (1..=n).map(|k| k as f64 * self.coeffs[k]).collect() }
    }

    /// `outer(inner(z))`; `inner` must have zero constant term.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        if inner.coeff(0) != 0.0 {
            return Err(Error::DegenerateSeries("inner series has nonzero constant term".into()));
        }
        let n = outer.order().min(inner.order());
        let inner = inner.truncate(n);
        let mut acc = Self::zero(n);
        for k in (0..=outer.order()).rev() {
            acc = &acc * &inner;
            acc.coeffs[0] += outer.coeffs[k];
        }
        Ok(acc.truncate(n))
    }

    /// Multiplicative inverse; requires `c_0 != 0`.
    pub fn reciprocal(&self) -> Result<Self> {
        let c0 = self.coeffs[0];
        if c0 == 0.0 {
            return Err(Error::DegenerateSeries("reciprocal needs c_0 != 0".into()));
        }
        let n = self.order();
        let mut b = vec![0.0; n + 1];
        b[0] = 1.0 / c0;
        for k in 1..=n {
            let s: f64 = (1..=k).map(|j| self.coeffs[j] * b[k - j]).sum();
            b[k] = -s / c0;
        }
        Ok(TruncatedSeries { coeffs: b })
    }

    /// Compositional inverse by Newton iteration; requires `c_0 = 0`, `c_1 != 0`.
    pub fn revert(&self) -> Result<Self> {
        if self.coeff(0) != 0.0 {
            return Err(Error::DegenerateSeries("reversion needs c_0 = 0".into()));
        }
        let c1 = self.coeff(1);
        if c1 == 0.0 {
            return Err(Error::DegenerateSeries("reversion needs c_1 != 0".into()));
        }
        let n = self.order();
        let z = Self::identity(n);
        let mut g = z.scale(1.0 / c1);
        let ds = self.derivative();
        // correct terms double per step
        let mut good = 1usize;
        while good < n {
            let sg = Self::compose(self, &g)?;
            let dsg = Self::compose(&ds, &g)?.truncate(n);
            let corr = &(&sg - &z) * &dsg.reciprocal()?;
            g = &g - &corr.truncate(n);
            good *= 2;
        }
        Ok(g)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }
}

impl Add for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, o: &TruncatedSeries) -> TruncatedSeries {
        let n = self.order().min(o.order());
        TruncatedSeries { coeffs: (0..=n).map(|k| self.coeffs[k] + o.coeffs[k]).collect() }
    }
}

impl Sub for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, o: &TruncatedSeries) -> TruncatedSeries {
        let n = self.order().min(o.order());
        TruncatedSeries { coeffs: (0..=n).map(|k| self.coeffs[k] - o.coeffs[k]).collect() }
    }
}

impl Mul for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, o: &TruncatedSeries) -> TruncatedSeries {
        let n = self.order().min(o.order());
        let mut c = vec![0.0; n + 1];
        for i in 0..=n {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            for j in 0..=(n - i) {
                c[i + j] += self.coeffs[i] * o.coeffs[j];
            }
        }
        TruncatedSeries { coeffs: c }
    }
}

/// Exact product of two polynomials (no truncation).
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut c = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            c[i + j] += x * y;
        }
    }
    c
}

/// Exact composition `a(b(z))` of two polynomials.
pub fn poly_compose(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut acc: Vec<f64> = vec![];
    for c in a.iter().rev() {
        acc = poly_mul(&acc, b);
        if acc.is_empty() {
            acc.push(0.0);
        }
        acc[0] += c;
    }
    acc
}

/// Free cumulants `k_1..k_p` from moments `m_1..m_p`.
///
/// Reverts `H(z) = z + sum m_j z^{j+1}`, forms `K = z/L` and reads off
/// `K(z) = 1 + sum k_j z^j`.
pub fn cumulants_from_moments(m: &[f64]) -> Vec<f64> {
    let p = m.len();
    if p == 0 {
        return vec![];
    }
    let mut h = vec![0.0, 1.0];
    h.extend_from_slice(m);
    let l = TruncatedSeries::new(h).revert().expect("H has unit linear term");
    let l_over_z = TruncatedSeries::new(l.coeffs()[1..].to_vec());
    let k = l_over_z.reciprocal().expect("L/z has unit constant term");
    k.coeffs()[1..=p].to_vec()
}

/// Inverse of [`cumulants_from_moments`].
pub fn moments_from_cumulants(k: &[f64]) -> Vec<f64> {
    let p = k.len();
    if p == 0 {
        return vec![];
    }
    let mut kk = vec![1.0];
    kk.extend_from_slice(k);
    let inv = TruncatedSeries::new(kk).reciprocal().expect("unit constant term");
    let mut l = vec![0.0];
    l.extend_from_slice(inv.coeffs());
    let h = TruncatedSeries::new(l).revert().expect("unit linear term");
    h.coeffs()[2..=p + 1].to_vec()
}
