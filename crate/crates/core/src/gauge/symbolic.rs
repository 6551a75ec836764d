//! Exact bookkeeping for the Cartesian expansion of the gauge series.
//!
//! A [`GradExpr`] is a rational linear combination of generalized gradients
//! `C_{m,kind}^[n]`; a [`Poly`] maps monomials `x^i y^j` to such combinations.
//! Rational arithmetic makes cancellation between series terms exact, so term
//! counts do not depend on a round-off threshold.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::harmonics::Kind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GradKey {
    pub m: u32,
    pub kind: Kind,
    pub order: u32,
}

impl GradKey {
    pub fn new(m: u32, kind: Kind, order: u32) -> Self {
        Self { m, kind, order }
    }
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `(-1)^ℓ m! / (4^ℓ ℓ! (ℓ+m+extra)!)`.
pub fn kappa(m: u32, l: u32, extra: u32) -> BigRational {
    let num = factorial(m);
    let den = BigInt::from(4u32).pow(l) * factorial(l) * factorial(l + m + extra);
    let r = BigRational::new(num, den);
    if l % 2 == 1 {
        -r
    } else {
        r
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradExpr(BTreeMap<GradKey, BigRational>);

impl GradExpr {
    pub fn single(key: GradKey, coef: BigRational) -> Self {
        let mut e = Self::default();
        e.add(key, coef);
        e
    }

    pub fn add(&mut self, key: GradKey, coef: BigRational) {
        if coef.is_zero() {
            return;
        }
        let entry = self.0.entry(key).or_insert_with(BigRational::zero);
        *entry += coef;
        if entry.is_zero() {
            self.0.remove(&key);
        }
    }

    pub fn add_scaled(&mut self, other: &GradExpr, factor: &BigRational) {
        for (k, v) in &other.0 {
            self.add(*k, v * factor);
        }
    }

    pub fn scaled(&self, factor: &BigRational) -> GradExpr {
        let mut e = GradExpr::default();
        e.add_scaled(self, factor);
        e
    }

    /// z-derivative of order `n`: every gradient order rises by `n`.
    pub fn shifted(&self, n: u32) -> GradExpr {
        GradExpr(
            self.0
                .iter()
                .map(|(k, v)| (GradKey::new(k.m, k.kind, k.order + n), v.clone()))
                .collect(),
        )
    }

    /// Drops every contribution referencing a gradient order above `nd`.
    pub fn truncated(&self, nd: u32) -> GradExpr {
        GradExpr(self.0.iter().filter(|(k, _)| k.order <= nd).map(|(k, v)| (*k, v.clone())).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GradKey, &BigRational)> {
        self.0.iter()
    }

    pub fn max_order(&self) -> Option<u32> {
        self.0.keys().map(|k| k.order).max()
    }

    /// Coefficients converted to `f64` and multiplied by `scale`.
    pub fn to_f64(&self, scale: f64) -> Vec<(GradKey, f64)> {
        self.0
            .iter()
            .map(|(k, v)| (*k, v.to_f64().unwrap_or(f64::NAN) * scale))
            .collect()
    }
}

/// Polynomial in `(x, y)` whose coefficients are gradient combinations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(BTreeMap<(u32, u32), GradExpr>);

impl Poly {
    pub fn add_expr(&mut self, i: u32, j: u32, expr: &GradExpr, factor: &BigRational) {
        let e = self.0.entry((i, j)).or_default();
        e.add_scaled(expr, factor);
        if e.is_zero() {
            self.0.remove(&(i, j));
        }
    }

    pub fn add_poly(&mut self, other: &Poly, factor: &BigRational) {
        for (&(i, j), e) in &other.0 {
            self.add_expr(i, j, e, factor);
        }
    }

    /// Adds `expr · factor · p(x, y)` for an integer polynomial `p`.
    pub fn add_product(&mut self, p: &IntPoly, expr: &GradExpr, factor: &BigRational) {
        for (&(i, j), &c) in &p.0 {
            let f = factor * BigRational::from_integer(BigInt::from(c));
            self.add_expr(i, j, expr, &f);
        }
    }

    pub fn d_dx(&self) -> Poly {
        let mut out = Poly::default();
        for (&(i, j), e) in &self.0 {
            if i > 0 {
                out.add_expr(i - 1, j, e, &rat(i as i64, 1));
            }
        }
        out
    }

    pub fn d_dy(&self) -> Poly {
        let mut out = Poly::default();
        for (&(i, j), e) in &self.0 {
            if j > 0 {
                out.add_expr(i, j - 1, e, &rat(j as i64, 1));
            }
        }
        out
    }

    pub fn d_dz(&self) -> Poly {
        Poly(self.0.iter().map(|(k, e)| (*k, e.shifted(1))).collect())
    }

    pub fn truncated(&self, nd: u32) -> Poly {
        Poly(
            self.0
                .iter()
                .map(|(k, e)| (*k, e.truncated(nd)))
                .filter(|(_, e)| !e.is_zero())
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of monomials with a non-vanishing coefficient.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &GradExpr)> {
        self.0.iter()
    }

    pub fn coefficient(&self, i: u32, j: u32) -> Option<&GradExpr> {
        self.0.get(&(i, j))
    }

    pub fn max_order(&self) -> Option<u32> {
        self.0.values().filter_map(GradExpr::max_order).max()
    }

    /// Evaluates at `(x, y)` given gradient values.
    pub fn eval(&self, x: f64, y: f64, grad: impl Fn(GradKey) -> f64) -> f64 {
        self.0
            .iter()
            .map(|(&(i, j), e)| {
                let c: f64 = e.iter().map(|(k, v)| v.to_f64().unwrap() * grad(*k)).sum();
                c * x.powi(i as i32) * y.powi(j as i32)
            })
            .sum()
    }

    pub fn negated(&self) -> Poly {
        let mut out = Poly::default();
        out.add_poly(self, &-BigRational::one());
        out
    }

    pub fn max_abs_coefficient(&self) -> BigRational {
        self.0
            .values()
            .flat_map(|e| e.iter().map(|(_, v)| v.abs()))
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

/// Integer-coefficient polynomial in `(x, y)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntPoly(pub BTreeMap<(u32, u32), i128>);

impl IntPoly {
    fn mul(&self, other: &IntPoly) -> IntPoly {
        let mut out = BTreeMap::new();
        for (&(i1, j1), &a) in &self.0 {
            for (&(i2, j2), &b) in &other.0 {
                *out.entry((i1 + i2, j1 + j2)).or_insert(0) += a * b;
            }
        }
        out.retain(|_, v| *v != 0);
        IntPoly(out)
    }

    pub fn shift(&self, di: u32, dj: u32) -> IntPoly {
        IntPoly(self.0.iter().map(|(&(i, j), &c)| ((i + di, j + dj), c)).collect())
    }
}

fn binomial(n: u32, k: u32) -> i128 {
    let mut r: i128 = 1;
    for t in 0..k {
        r = r * (n - t) as i128 / (t + 1) as i128;
    }
    r
}

/// `(Re, Im)` of `ρ^{2ℓ} (x + iy)^p` as integer polynomials.
pub fn harmonic_polys(l: u32, p: u32) -> (IntPoly, IntPoly) {
    let mut re = BTreeMap::new();
    let mut im = BTreeMap::new();
    // (x + iy)^p = Σ_k C(p,k) x^{p-k} (iy)^k
    for k in 0..=p {
        let c = binomial(p, k);
        let target = if k % 2 == 0 { &mut re } else { &mut im };
        let sign = if (k / 2) % 2 == 0 { 1 } else { -1 };
        target.insert((p - k, k), sign * c);
    }
    let mut rho = BTreeMap::new();
    for k in 0..=l {
        rho.insert((2 * (l - k), 2 * k), binomial(l, k));
    }
    let rho = IntPoly(rho);
    (rho.mul(&IntPoly(re)), rho.mul(&IntPoly(im)))
}
