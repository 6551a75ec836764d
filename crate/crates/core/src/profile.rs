//! Analytic generalized-gradient profiles.
//!
//! The reference profile is the erf-of-tangent smooth step
//! `σ(x) = ½(1 + erf(tan(πx/2)))` on `(-1, 1)`, saturated outside. Its
//! derivatives of every order have the closed form
//! `σ^(n)(x) = (√π/2) P_n(t) exp(-t²)` with `t = tan(πx/2)`,
//! `P_1 = 1 + t²` and `P_{n+1} = (π/2)(1 + t²)(P_n' − 2t P_n)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::Kind;

/// Highest derivative order an [`ErfStep`] precomputes.
pub const MAX_PROFILE_ORDER: usize = 40;

/// An exact (callable) source of generalized gradients `C_{m,kind}^[n](z)`.
pub trait GradientProfile: Send + Sync {
    /// Harmonics with a non-zero profile.
    fn harmonics(&self) -> Vec<(u32, Kind)>;

    /// `C_{m,kind}^[order](z)`; zero for harmonics the profile does not carry.
    fn value(&self, m: u32, kind: Kind, order: u32, z: f64) -> f64;
}

/// The smooth step σ and its derivatives.
#[derive(Clone, Debug)]
pub struct ErfStep {
    // polys[n] holds the coefficients (ascending powers of t) of P_n; polys[0] is unused.
    polys: Vec<Vec<f64>>,
}

impl Default for ErfStep {
    fn default() -> Self {
        Self::new(MAX_PROFILE_ORDER)
    }
}

impl ErfStep {
    pub fn new(max_order: usize) -> Self {
        let mut polys = vec![Vec::new(), vec![1.0, 0.0, 1.0]];
        for _ in 2..=max_order {
            let p = polys.last().unwrap();
            // q = P' - 2tP
            let mut q = vec![0.0; p.len() + 1];
            for (k, &c) in p.iter().enumerate() {
                if k > 0 {
                    q[k - 1] += k as f64 * c;
                }
                q[k + 1] -= 2.0 * c;
            }
            // (π/2)(1 + t²) q
            let mut next = vec![0.0; q.len() + 2];
            for (k, &c) in q.iter().enumerate() {
                next[k] += 0.5 * PI * c;
                next[k + 2] += 0.5 * PI * c;
            }
            polys.push(next);
        }
        Self { polys }
    }

    pub fn max_order(&self) -> usize {
        self.polys.len() - 1
    }

    /// `σ^(n)(x)`.
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let t = (0.5 * PI * x).tan();
        if n == 0 {
            return 0.5 * (1.0 + libm::erf(t));
        }
        assert!(n <= self.max_order(), "derivative order {n} exceeds precomputed range");
        let t2 = t * t;
        if t2 > 700.0 {
            return 0.0;
        }
        let p = self.polys[n].iter().rev().fold(0.0, |acc, &c| acc * t + c);
        0.5 * PI.sqrt() * p * (-t2).exp()
    }
}

/// Geometry of the analytic quadrupole gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepGeometry {
    pub alpha: f64,
    pub l1: f64,
    pub l2: f64,
    pub z2: f64,
    pub zmax: f64,
}

impl StepGeometry {
    /// Plateau `6e-4`, fringe widths `0.9`, exit fringe at `3.1`, length `4`.
    pub const REFERENCE: StepGeometry = StepGeometry {
        alpha: 6e-4,
        l1: 0.9,
        l2: 0.9,
        z2: 3.1,
        zmax: 4.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha.is_finite()
            && self.l1 > 0.0
            && self.l2 > 0.0
            && self.z2 > 0.0
            && self.z2 < self.zmax
            && self.zmax.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid step geometry {self:?}")))
        }
    }
}

/// The analytic `C_2^[0]` step profile with all its z-derivatives.
#[derive(Clone, Debug)]
pub struct StepGradient {
    geom: StepGeometry,
    step: ErfStep,
}

impl StepGradient {
    pub fn new(geom: StepGeometry) -> Result<Self> {
        geom.validate()?;
        Ok(Self {
            geom,
            step: ErfStep::default(),
        })
    }

    pub fn geometry(&self) -> StepGeometry {
        self.geom
    }

    /// `d^n/dZ^n C_2^[0](Z)`.
    pub fn derivative(&self, n: usize, z: f64) -> f64 {
        let g = &self.geom;
        if !(z > 0.0 && z < g.zmax) {
            return 0.0;
        }
        let u1 = -1.0 + 2.0 * z / g.l1;
        let u2 = 1.0 - 2.0 * (z - g.z2) / g.l2;
        if n == 0 {
            return g.alpha * (self.step.eval(0, u1) + self.step.eval(0, u2)) - g.alpha;
        }
        let f1 = (2.0 / g.l1).powi(n as i32);
        let f2 = (-2.0 / g.l2).powi(n as i32);
        g.alpha * (f1 * self.step.eval(n, u1) + f2 * self.step.eval(n, u2))
    }
}

impl GradientProfile for StepGradient {
    fn harmonics(&self) -> Vec<(u32, Kind)> {
        vec![(2, Kind::Normal)]
    }

    fn value(&self, m: u32, kind: Kind, order: u32, z: f64) -> f64 {
        if m == 2 && kind == Kind::Normal {
            self.derivative(order as usize, z)
        } else {
            0.0
        }
    }
}

/// Several harmonics sharing the step shape with fixed relative weights:
/// `C_{m,kind}^[n] = w_{m,kind} · d^n/dZ^n C_2^[0]`.
#[derive(Clone, Debug)]
pub struct ScaledHarmonics {
    base: StepGradient,
    weights: Vec<(u32, Kind, f64)>,
}

impl ScaledHarmonics {
    pub fn new(base: StepGradient, weights: Vec<(u32, Kind, f64)>) -> Result<Self> {
        for &(m, _, w) in &weights {
            if m == 0 || !w.is_finite() {
                return Err(Error::invalid(format!("invalid harmonic weight ({m}, {w})")));
            }
        }
        Ok(Self { base, weights })
    }

    /// Weights from relative harmonic content `b_m = B_m(R)/B_2(R)` at radius `r`.
    pub fn from_relative_harmonics(base: StepGradient, r: f64, rel: &[(u32, Kind, f64)]) -> Result<Self> {
        let mut weights = vec![(2, Kind::Normal, 1.0)];
        for &(m, kind, b) in rel {
            // B_m(R) ≈ m R^(m-1) C_m on the plateau
            let w = b * 2.0 / (m as f64 * r.powi(m as i32 - 2));
            weights.push((m, kind, w));
        }
        Self::new(base, weights)
    }

    pub fn base(&self) -> &StepGradient {
        &self.base
    }
}

impl GradientProfile for ScaledHarmonics {
    fn harmonics(&self) -> Vec<(u32, Kind)> {
        self.weights.iter().map(|&(m, k, _)| (m, k)).collect()
    }

    fn value(&self, m: u32, kind: Kind, order: u32, z: f64) -> f64 {
        self.weights
            .iter()
            .find(|&&(wm, wk, _)| wm == m && wk == kind)
            .map_or(0.0, |&(_, _, w)| w * self.base.derivative(order as usize, z))
    }
}
