//! Coefficient values at arbitrary `z` from gridded samples or exact closures.

use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{GradKey, PotentialTable};
use crate::profile::GradientProfile;

/// Relative distance (in grid spacings) within which a query snaps to a knot.
pub const KNOT_SNAP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpMode {
    /// Last grid value at or before `z`.
    Previous,
    /// Closest grid value; the lower knot wins ties.
    Nearest,
    /// Mean of the two bracketing grid values (exact at knots).
    Interval,
    /// Not-a-knot cubic spline.
    Spline,
    /// Analytic gradients evaluated at `z`.
    Exact,
}

impl InterpMode {
    pub const ALL: [InterpMode; 5] = [
        InterpMode::Previous,
        InterpMode::Nearest,
        InterpMode::Interval,
        InterpMode::Spline,
        InterpMode::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterpMode::Previous => "previous",
            InterpMode::Nearest => "nearest",
            InterpMode::Interval => "interval",
            InterpMode::Spline => "spline",
            InterpMode::Exact => "exact",
        }
    }
}

impl std::fmt::Display for InterpMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InterpMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown interpolation mode `{s}`")))
    }
}

/// Tridiagonal elimination factors for the uniform not-a-knot system.
#[derive(Clone, Debug)]
struct NotAKnot {
    n: usize,
    // modified super-diagonal of rows 2..n-3
    cp: Vec<f64>,
}

impl NotAKnot {
    fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::invalid(format!("spline needs at least 4 knots, got {n}")));
        }
        let rows = n.saturating_sub(4);
        let mut cp = Vec::with_capacity(rows);
        let mut prev = 0.0;
        for _ in 0..rows {
            let denom = 4.0 - prev;
            let c = 1.0 / denom;
            cp.push(c);
            prev = c;
        }
        Ok(Self { n, cp })
    }

    /// Second derivatives at the knots.
    fn second_derivatives(&self, y: &[f64], h: f64) -> Vec<f64> {
        let n = self.n;
        let r = |i: usize| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h);
        let mut m = vec![0.0; n];
        m[1] = r(1) / 6.0;
        m[n - 2] = r(n - 2) / 6.0;
        let rows = n - 4;
        if rows > 0 {
            // unknowns m[2..=n-3]
            let mut dp = vec![0.0; rows];
            for k in 0..rows {
                let i = k + 2;
                let mut rhs = r(i);
                if i == 2 {
                    rhs -= m[1];
                }
                if i == n - 3 {
                    rhs -= m[n - 2];
                }
                let prev_c = if k == 0 { 0.0 } else { self.cp[k - 1] };
                let prev_d = if k == 0 { 0.0 } else { dp[k - 1] };
                dp[k] = (rhs - prev_d) / (4.0 - prev_c);
            }
            m[rows + 1] = dp[rows - 1];
            for k in (0..rows - 1).rev() {
                m[k + 2] = dp[k] - self.cp[k] * m[k + 3];
            }
        }
        m[0] = 2.0 * m[1] - m[2];
        m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
        m
    }

    /// Per-interval cubic coefficients `[a, b, c, d]` in the local offset `t = z - z_k`.
    fn coefficients(&self, y: &[f64], h: f64) -> Vec<[f64; 4]> {
        let m = self.second_derivatives(y, h);
        (0..self.n - 1)
            .map(|k| {
                let a = y[k];
                let b = (y[k + 1] - y[k]) / h - h * (2.0 * m[k] + m[k + 1]) / 6.0;
                [a, b, 0.5 * m[k], (m[k + 1] - m[k]) / (6.0 * h)]
            })
            .collect()
    }
}

/// Not-a-knot cubic spline coefficients on a uniform grid.
pub fn spline_coefficients(y: &[f64], h: f64) -> Result<Vec<[f64; 4]>> {
    Ok(NotAKnot::new(y.len())?.coefficients(y, h))
}

/// First (`order = 1`) or second derivative of the not-a-knot spline at its knots.
pub fn spline_derivative_samples(y: &[f64], h: f64, order: usize) -> Result<Vec<f64>> {
    let c = spline_coefficients(y, h)?;
    let n = y.len();
    let mut out: Vec<f64> = c
        .iter()
        .map(|q| if order == 1 { q[1] } else { 2.0 * q[2] })
        .collect();
    let q = c[n - 2];
    out.push(if order == 1 {
        q[1] + 2.0 * q[2] * h + 3.0 * q[3] * h * h
    } else {
        2.0 * q[2] + 6.0 * q[3] * h
    });
    Ok(out)
}

/// Evaluation of each term's coefficient straight from an analytic profile.
struct ExactClosure {
    profile: Arc<dyn GradientProfile>,
    keys: Vec<GradKey>,
    // per term: (key index, coefficient)
    terms: Vec<Vec<(usize, f64)>>,
}

impl ExactClosure {
    fn new(pt: &PotentialTable, profile: Arc<dyn GradientProfile>) -> Self {
        let mut keys: Vec<GradKey> = Vec::new();
        let terms = pt
            .all_terms()
            .map(|t| {
                t.expr
                    .iter()
                    .map(|(k, c)| {
                        let idx = keys.iter().position(|q| q == k).unwrap_or_else(|| {
                            keys.push(*k);
                            keys.len() - 1
                        });
                        (idx, *c)
                    })
                    .collect()
            })
            .collect();
        Self { profile, keys, terms }
    }

    fn eval(&self, z: f64, shift: u32, buf: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
        buf.clear();
        buf.extend(
            self.keys
                .iter()
                .map(|k| self.profile.value(k.m, k.kind, k.order + shift, z)),
        );
        for (o, term) in out.iter_mut().zip(&self.terms) {
            *o = term.iter().map(|&(i, c)| c * buf[i]).sum();
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::UndefinedField(format!("analytic coefficients not finite at z = {z}")));
        }
        Ok(())
    }
}

enum Data {
    /// Row-major `[knot][term]` samples of the coefficients and their z-derivatives.
    Grid { values: Vec<f64>, derivs: Vec<f64> },
    /// `[interval][term][4]` cubic coefficients for values and z-derivatives.
    Spline { values: Vec<f64>, derivs: Vec<f64> },
    Exact(ExactClosure),
}

/// Per-term coefficient provider for one potential table.
pub struct CoefficientSource {
    mode: InterpMode,
    n_terms: usize,
    z0: f64,
    dz: f64,
    n: usize,
    data: Data,
    derivative_fallback: bool,
    out_of_range: AtomicU64,
}

impl std::fmt::Debug for CoefficientSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSource")
            .field("mode", &self.mode)
            .field("terms", &self.n_terms)
            .field("knots", &self.n)
            .finish()
    }
}

enum Locate {
    Outside,
    Knot(usize),
    Between(usize, f64),
}

fn transpose(series: &[Vec<f64>], n: usize) -> Vec<f64> {
    let nt = series.len();
    let mut out = vec![0.0; n * nt];
    for (t, s) in series.iter().enumerate() {
        for (k, v) in s.iter().enumerate() {
            out[k * nt + t] = *v;
        }
    }
    out
}

fn spline_layout(series: &[Vec<f64>], dz: f64, n: usize) -> Result<Vec<f64>> {
    let solver = NotAKnot::new(n)?;
    let nt = series.len();
    let mut out = vec![0.0; (n - 1) * nt * 4];
    for (t, s) in series.iter().enumerate() {
        for (k, c) in solver.coefficients(s, dz).into_iter().enumerate() {
            out[(k * nt + t) * 4..(k * nt + t) * 4 + 4].copy_from_slice(&c);
        }
    }
    Ok(out)
}

impl CoefficientSource {
    /// Builds a source for `pt`. `Exact` requires the table to carry an analytic profile.
    pub fn new(pt: &PotentialTable, mode: InterpMode) -> Result<Self> {
        let z = pt.z();
        let n = z.len();
        let values = pt.value_series();
        let derivs = pt.derivative_series(1);
        for (t, s) in values.iter().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                let (component, term) = pt.locate_term(t);
                return Err(Error::Data { component, term });
            }
        }
        let data = match mode {
            InterpMode::Previous | InterpMode::Nearest | InterpMode::Interval => Data::Grid {
                values: transpose(values, n),
                derivs: transpose(derivs, n),
            },
            InterpMode::Spline => Data::Spline {
                values: spline_layout(values, pt.dz(), n)?,
                derivs: spline_layout(derivs, pt.dz(), n)?,
            },
            InterpMode::Exact => {
                let profile = pt
                    .profile()
                    .cloned()
                    .ok_or_else(|| Error::invalid("exact coefficients need an analytic gradient profile"))?;
                Data::Exact(ExactClosure::new(pt, profile))
            }
        };
        Ok(Self {
            mode,
            n_terms: values.len(),
            z0: z[0],
            dz: pt.dz(),
            n,
            data,
            derivative_fallback: pt.derivative_fallback(1) && mode != InterpMode::Exact,
            out_of_range: AtomicU64::new(0),
        })
    }

    pub fn mode(&self) -> InterpMode {
        self.mode
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    /// True when z-derivatives come from spline differentiation of the values.
    pub fn derivative_fallback(&self) -> bool {
        self.derivative_fallback
    }

    /// Number of queries that fell outside the grid so far.
    pub fn out_of_range_count(&self) -> u64 {
        self.out_of_range.load(Ordering::Relaxed)
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z0, self.z0 + (self.n - 1) as f64 * self.dz)
    }

    fn locate(&self, z: f64) -> Locate {
        let u = (z - self.z0) / self.dz;
        let last = (self.n - 1) as f64;
        if !(u >= -KNOT_SNAP && u <= last + KNOT_SNAP) {
            return Locate::Outside;
        }
        let r = u.round();
        if (u - r).abs() <= KNOT_SNAP {
            return Locate::Knot(r as usize);
        }
        let k = u.floor() as usize;
        Locate::Between(k, u - k as f64)
    }

    /// Coefficient values `a_t(z)` for every term `t`, in table order.
    pub fn values(&self, z: f64, scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
        self.fill(z, 0, scratch, out)
    }

    /// Coefficient z-derivatives `a'_t(z)`.
    pub fn derivatives(&self, z: f64, scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
        self.fill(z, 1, scratch, out)
    }

    fn fill(&self, z: f64, which: u32, scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.n_terms);
        let loc = self.locate(z);
        if let Locate::Outside = loc {
            self.out_of_range.fetch_add(1, Ordering::Relaxed);
            out.fill(0.0);
            return Ok(());
        }
        let nt = self.n_terms;
        match &self.data {
            Data::Exact(closure) => closure.eval(z, which, scratch, out)?,
            Data::Grid { values, derivs } => {
                let src = if which == 0 { values } else { derivs };
                let row = |k: usize| &src[k * nt..(k + 1) * nt];
                match loc {
                    Locate::Knot(k) => out.copy_from_slice(row(k)),
                    Locate::Between(k, frac) => match self.mode {
                        InterpMode::Previous => out.copy_from_slice(row(k)),
                        InterpMode::Nearest => out.copy_from_slice(row(if frac > 0.5 { k + 1 } else { k })),
                        _ => {
                            for ((o, a), b) in out.iter_mut().zip(row(k)).zip(row(k + 1)) {
                                *o = 0.5 * (a + b);
                            }
                        }
                    },
                    Locate::Outside => unreachable!(),
                }
            }
            Data::Spline { values, derivs } => {
                let src = if which == 0 { values } else { derivs };
                let (k, t) = match loc {
                    Locate::Knot(k) if k == self.n - 1 => (k - 1, self.dz),
                    Locate::Knot(k) => (k, 0.0),
                    Locate::Between(k, frac) => (k, frac * self.dz),
                    Locate::Outside => unreachable!(),
                };
                let block = &src[k * nt * 4..(k + 1) * nt * 4];
                if t == 0.0 {
                    for (o, c) in out.iter_mut().zip(block.chunks_exact(4)) {
                        *o = c[0];
                    }
                } else {
                    for (o, c) in out.iter_mut().zip(block.chunks_exact(4)) {
                        *o = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_spline(c: &[[f64; 4]], z0: f64, h: f64, z: f64) -> f64 {
        let k = (((z - z0) / h).floor() as usize).min(c.len() - 1);
        let t = z - (z0 + k as f64 * h);
        let q = c[k];
        q[0] + t * (q[1] + t * (q[2] + t * q[3]))
    }

    #[test]
    fn spline_reproduces_cubics() {
        let f = |z: f64| 0.3 - 1.2 * z + 0.7 * z * z - 0.25 * z * z * z;
        for n in [4usize, 5, 6, 11, 40] {
            let h = 0.1;
            let y: Vec<f64> = (0..n).map(|k| f(k as f64 * h)).collect();
            let c = spline_coefficients(&y, h).unwrap();
            for s in 0..50 {
                let z = (n - 1) as f64 * h * s as f64 / 49.0;
                let got = eval_spline(&c, 0.0, h, z);
                assert!((got - f(z)).abs() < 1e-12, "n={n} z={z}: {got} vs {}", f(z));
            }
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        let y = [0.0, 1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let c = spline_coefficients(&y, 0.5).unwrap();
        for k in 0..y.len() - 1 {
            assert_eq!(c[k][0], y[k]);
        }
        let last = eval_spline(&c, 0.0, 0.5, 3.0);
        assert!((last - y[6]).abs() < 1e-12);
    }

    #[test]
    fn spline_derivatives_of_cubic() {
        let h = 0.05;
        let y: Vec<f64> = (0..30).map(|k| (k as f64 * h).powi(3)).collect();
        let d1 = spline_derivative_samples(&y, h, 1).unwrap();
        let d2 = spline_derivative_samples(&y, h, 2).unwrap();
        for k in 0..30 {
            let z = k as f64 * h;
            assert!((d1[k] - 3.0 * z * z).abs() < 1e-10);
            assert!((d2[k] - 6.0 * z).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_knots() {
        assert!(spline_coefficients(&[1.0, 2.0, 3.0], 0.1).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in InterpMode::ALL {
            assert_eq!(m.name().parse::<InterpMode>().unwrap(), m);
        }
        assert!("cubic".parse::<InterpMode>().is_err());
    }
}
