//! One-step maps for the transverse motion inside a magnet.

pub mod splitting;
pub mod tableau;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs, ParticleState};
use crate::error::{Error, Result};
use crate::field::{EvalCtx, Field};
pub use tableau::Tableau;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Midpoint,
    Gauss4,
    Gauss6,
    Rk4,
    Lie2,
    Lie4,
    Lie6,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Midpoint,
        Method::Gauss4,
        Method::Gauss6,
        Method::Rk4,
        Method::Lie2,
        Method::Lie4,
        Method::Lie6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Midpoint => "midpoint",
            Method::Gauss4 => "gauss4",
            Method::Gauss6 => "gauss6",
            Method::Rk4 => "rk4",
            Method::Lie2 => "lie2",
            Method::Lie4 => "lie4",
            Method::Lie6 => "lie6",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Method::Midpoint | Method::Lie2 => 2,
            Method::Gauss4 | Method::Rk4 | Method::Lie4 => 4,
            Method::Gauss6 | Method::Lie6 => 6,
        }
    }

    pub fn is_symplectic(self) -> bool {
        self != Method::Rk4
    }

    pub fn is_splitting(self) -> bool {
        matches!(self, Method::Lie2 | Method::Lie4 | Method::Lie6)
    }

    pub fn tableau(self) -> Option<Tableau> {
        match self {
            Method::Midpoint => Some(Tableau::midpoint()),
            Method::Gauss4 => Some(Tableau::gauss4()),
            Method::Gauss6 => Some(Tableau::gauss6()),
            Method::Rk4 => Some(Tableau::rk4()),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown integration method `{s}`")))
    }
}

/// Evaluation cost of one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepCost {
    /// Right-hand-side evaluations per step; implicit methods multiply by the
    /// number of fixed-point sweeps.
    Stages { stages: u32, implicit: bool },
    /// Second-order splitting maps per step.
    Maps(u32),
}

pub fn step_cost(method: Method) -> StepCost {
    match method {
        Method::Midpoint => StepCost::Stages { stages: 1, implicit: true },
        Method::Gauss4 => StepCost::Stages { stages: 2, implicit: true },
        Method::Gauss6 => StepCost::Stages { stages: 3, implicit: true },
        Method::Rk4 => StepCost::Stages { stages: 4, implicit: false },
        Method::Lie2 => StepCost::Maps(1),
        Method::Lie4 => StepCost::Maps(3),
        Method::Lie6 => StepCost::Maps(9),
    }
}

pub const DEFAULT_FP_TOL: f64 = 1e-14;
pub const DEFAULT_FP_MAX: u32 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub method: Method,
    /// Step `Δσ` in scaled `Z`.
    pub step: f64,
    /// Fixed-point stopping threshold on the max-norm of a stage update,
    /// relative to `max(1, |w|)`.
    pub fp_tol: f64,
    pub fp_max: u32,
}

impl IntegratorSpec {
    pub fn new(method: Method, step: f64) -> Self {
        Self {
            method,
            step,
            fp_tol: DEFAULT_FP_TOL,
            fp_max: DEFAULT_FP_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("step {} must be positive and finite", self.step)));
        }
        if !(self.fp_tol > 0.0) || self.fp_max == 0 {
            return Err(Error::invalid("fixed-point tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// A validated integrator ready to advance states through a [`Field`].
#[derive(Clone, Debug)]
pub struct Integrator {
    spec: IntegratorSpec,
    tableau: Option<Tableau>,
    explicit: bool,
}

impl Integrator {
    pub fn new(spec: IntegratorSpec) -> Result<Self> {
        spec.validate()?;
        let tableau = spec.method.tableau();
        let explicit = tableau.as_ref().is_some_and(Tableau::is_explicit);
        Ok(Self { spec, tableau, explicit })
    }

    pub fn spec(&self) -> &IntegratorSpec {
        &self.spec
    }

    /// Advances `s` by the configured step.
    pub fn advance(&self, field: &Field, ctx: &mut EvalCtx, s: &ParticleState) -> Result<ParticleState> {
        self.step(field, ctx, s, self.spec.step)
    }

    /// Advances `s` by `h`, which may be negative.
    pub fn step(&self, field: &Field, ctx: &mut EvalCtx, s: &ParticleState, h: f64) -> Result<ParticleState> {
        let d = self.increment(field, ctx, s, h)?;
        let w = s.coords();
        Ok(ParticleState {
            z: s.z + h,
            ..s.with_coords(std::array::from_fn(|i| w[i] + d[i]))
        })
    }

    /// Change of `(X, Y, P_x, P_y)` over one step of `h`, before it is added
    /// to the state; lets callers accumulate the state with compensation.
    pub fn increment(&self, field: &Field, ctx: &mut EvalCtx, s: &ParticleState, h: f64) -> Result<[f64; 4]> {
        ctx.counters.steps += 1;
        match &self.tableau {
            Some(t) if self.explicit => explicit_increment(t, field, ctx, s, h),
            Some(t) => implicit_increment(t, field, ctx, s, h, self.spec.fp_tol, self.spec.fp_max),
            None => {
                let w = splitting::composed(field, ctx, s, h, self.spec.method.order())?.coords();
                let w0 = s.coords();
                Ok(std::array::from_fn(|i| w[i] - w0[i]))
            }
        }
    }
}

fn weighted(t: &Tableau, h: f64, k: &[[f64; 4]]) -> [f64; 4] {
    let mut d = [0.0; 4];
    for (b, ki) in t.b.iter().zip(k) {
        for i in 0..4 {
            d[i] += h * b * ki[i];
        }
    }
    d
}

fn axpy(y: [f64; 4], h: f64, k: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|d| y[d] + h * k[d])
}

fn eval(field: &Field, ctx: &mut EvalCtx, base: &ParticleState, w: [f64; 4], z: f64) -> Result<[f64; 4]> {
    let st = ParticleState { z, ..base.with_coords(w) };
    let f = field.derivs(ctx, &st)?;
    Ok(rhs(&st, &f))
}

fn explicit_increment(t: &Tableau, field: &Field, ctx: &mut EvalCtx, s: &ParticleState, h: f64) -> Result<[f64; 4]> {
    let y = s.coords();
    let n = t.stages();
    let mut k = vec![[0.0; 4]; n];
    for i in 0..n {
        let mut u = y;
        for j in 0..i {
            u = axpy(u, h * t.a[i][j], &k[j]);
        }
        k[i] = eval(field, ctx, s, u, s.z + t.c[i] * h)?;
    }
    Ok(weighted(t, h, &k))
}

fn implicit_increment(
    t: &Tableau,
    field: &Field,
    ctx: &mut EvalCtx,
    s: &ParticleState,
    h: f64,
    tol: f64,
    max_iter: u32,
) -> Result<[f64; 4]> {
    let y = s.coords();
    let n = t.stages();
    let mut u = vec![y; n];
    let mut k = vec![[0.0; 4]; n];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iter {
        ctx.counters.fixed_point_iterations += 1;
        for i in 0..n {
            k[i] = eval(field, ctx, s, u[i], s.z + t.c[i] * h)?;
        }
        residual = 0.0;
        let mut scale = 1.0f64;
        for i in 0..n {
            let mut next = y;
            for j in 0..n {
                next = axpy(next, h * t.a[i][j], &k[j]);
            }
            for d in 0..4 {
                residual = residual.max((next[d] - u[i][d]).abs());
                scale = scale.max(next[d].abs());
            }
            u[i] = next;
        }
        if !residual.is_finite() {
            break;
        }
        if residual < tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FixedPoint {
            iterations: max_iter as usize,
            residual,
        });
    }
    Ok(weighted(t, h, &k))
}

/// `max |Jᵀ Ω J − Ω|` for the Jacobian `J` of one step from `s`, by central
/// differences with relative perturbation `eps`.
pub fn symplecticity_defect(
    integrator: &Integrator,
    field: &Field,
    ctx: &mut EvalCtx,
    s: &ParticleState,
    eps: f64,
) -> Result<f64> {
    let w = s.coords();
    let mut jac = [[0.0; 4]; 4];
    for col in 0..4 {
        let d = eps * w[col].abs().max(1e-3);
        let mut plus = w;
        plus[col] += d;
        let mut minus = w;
        minus[col] -= d;
        let fp = integrator.advance(field, ctx, &s.with_coords(plus))?.coords();
        let fm = integrator.advance(field, ctx, &s.with_coords(minus))?.coords();
        for row in 0..4 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * d);
        }
    }
    // Ω for (X, Y, P_x, P_y)
    let omega = |i: usize, j: usize| -> f64 {
        match (i, j) {
            (0, 2) | (1, 3) => 1.0,
            (2, 0) | (3, 1) => -1.0,
            _ => 0.0,
        }
    };
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let mut v = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    v += jac[a][i] * omega(a, b) * jac[b][j];
                }
            }
            worst = worst.max((v - omega(i, j)).abs());
        }
    }
    Ok(worst)
}
