//! Fast evaluation of a sampled potential inside one magnet, with instrumentation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{FieldDerivs, ParticleState};
use crate::error::{Error, Result};
use crate::gauge::{antiderivatives, PotentialTable};
use crate::sampling::{CoefficientSource, InterpMode};

/// Work counters accumulated by an [`EvalCtx`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Right-hand-side evaluations of the equations of motion.
    pub rhs: u64,
    /// Second-order splitting maps applied.
    pub m2: u64,
    /// Evaluations of `A_x`, `A_y`, `A_z` or one of their partial derivatives.
    pub component_evals: [u64; 3],
    /// Monomial coefficient products, per component.
    pub coefficient_evals: [u64; 3],
    pub fixed_point_iterations: u64,
    pub steps: u64,
    /// Coefficient vectors fetched from the source (cache misses).
    pub coefficient_loads: u64,
}

impl Counters {
    pub fn merge(&mut self, o: &Counters) {
        self.rhs += o.rhs;
        self.m2 += o.m2;
        for c in 0..3 {
            self.component_evals[c] += o.component_evals[c];
            self.coefficient_evals[c] += o.coefficient_evals[c];
        }
        self.fixed_point_iterations += o.fixed_point_iterations;
        self.steps += o.steps;
        self.coefficient_loads += o.coefficient_loads;
    }

    pub fn total_coefficient_evals(&self) -> u64 {
        self.coefficient_evals.iter().sum()
    }
}

#[derive(Clone, Copy, Debug)]
struct Mono {
    i: usize,
    j: usize,
    fi: f64,
    fj: f64,
}

#[derive(Clone, Copy, Debug)]
struct AuxMono {
    i: usize,
    j: usize,
    parent: usize,
    factor: f64,
}

struct FieldData {
    table: Arc<PotentialTable>,
    source: Arc<CoefficientSource>,
    mono: [Vec<Mono>; 3],
    aux_x: Vec<AuxMono>,
    aux_y: Vec<AuxMono>,
    offsets: [usize; 3],
    degree: usize,
}

/// A potential table with its coefficient source and a sign.
///
/// Focusing and defocusing magnets of a lattice share one table and differ
/// only in `polarity`.
#[derive(Clone)]
pub struct Field {
    data: Arc<FieldData>,
    polarity: f64,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("gauge", &self.data.table.gauge())
            .field("mode", &self.data.source.mode())
            .field("polarity", &self.polarity)
            .finish()
    }
}

const CACHE_SLOTS: usize = 4;

struct Slot {
    key: (usize, u64),
    values: Vec<f64>,
}

/// Per-thread scratch space: coefficient cache, power tables and counters.
#[derive(Default)]
pub struct EvalCtx {
    slots: Vec<Slot>,
    next: usize,
    scratch: Vec<f64>,
    xp: Vec<f64>,
    yp: Vec<f64>,
    pub counters: Counters,
}

impl EvalCtx {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the counters accumulated so far and resets them.
    pub fn take_counters(&mut self) -> Counters {
        std::mem::take(&mut self.counters)
    }
}

/// `out[k + 1] = v^k` for `k = 0..=n`, with `out[0] = 0`.
fn powers(v: f64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let mut p = 1.0;
    for _ in 0..=n {
        out.push(p);
        p *= v;
    }
}

impl Field {
    pub fn new(table: Arc<PotentialTable>, mode: InterpMode) -> Result<Self> {
        let source = Arc::new(CoefficientSource::new(&table, mode)?);
        Self::with_source(table, source)
    }

    pub fn with_source(table: Arc<PotentialTable>, source: Arc<CoefficientSource>) -> Result<Self> {
        if source.n_terms() != table.n_terms() {
            return Err(Error::invalid("coefficient source does not match the potential table"));
        }
        let mono = std::array::from_fn(|c| {
            table
                .terms(c)
                .iter()
                .map(|t| Mono {
                    i: t.i as usize,
                    j: t.j as usize,
                    fi: t.i as f64,
                    fj: t.j as f64,
                })
                .collect()
        });
        let aux = antiderivatives(&table);
        let conv = |v: &[crate::gauge::AuxTerm]| -> Vec<AuxMono> {
            v.iter()
                .map(|a| AuxMono {
                    i: a.i as usize,
                    j: a.j as usize,
                    parent: a.parent,
                    factor: a.factor,
                })
                .collect()
        };
        let offsets = [table.range(0).start, table.range(1).start, table.range(2).start];
        let degree = table.max_degree() as usize + 1;
        Ok(Self {
            data: Arc::new(FieldData {
                aux_x: conv(&aux.int_dy_ax_dx),
                aux_y: conv(&aux.int_dx_ay_dy),
                table,
                source,
                mono,
                offsets,
                degree,
            }),
            polarity: 1.0,
        })
    }

    /// The same field with its sign set to `polarity` (±1).
    pub fn with_polarity(&self, polarity: f64) -> Self {
        Self {
            data: Arc::clone(&self.data),
            polarity,
        }
    }

    pub fn polarity(&self) -> f64 {
        self.polarity
    }

    pub fn table(&self) -> &Arc<PotentialTable> {
        &self.data.table
    }

    pub fn source(&self) -> &Arc<CoefficientSource> {
        &self.data.source
    }

    pub fn mode(&self) -> InterpMode {
        self.data.source.mode()
    }

    /// Longitudinal extent `(z_start, z_end)`.
    pub fn z_range(&self) -> (f64, f64) {
        self.data.source.z_range()
    }

    /// Number of monomials in each component.
    pub fn term_counts(&self) -> [usize; 3] {
        std::array::from_fn(|c| self.data.mono[c].len())
    }

    fn slot(&self, ctx: &mut EvalCtx, z: f64) -> Result<usize> {
        let key = (Arc::as_ptr(&self.data.source) as usize, z.to_bits());
        if let Some(k) = ctx.slots.iter().position(|s| s.key == key) {
            return Ok(k);
        }
        ctx.counters.coefficient_loads += 1;
        let n = self.data.source.n_terms();
        let k = if ctx.slots.len() < CACHE_SLOTS {
            ctx.slots.push(Slot {
                key,
                values: vec![0.0; n],
            });
            ctx.slots.len() - 1
        } else {
            let k = ctx.next;
            ctx.next = (ctx.next + 1) % CACHE_SLOTS;
            ctx.slots[k].key = key;
            ctx.slots[k].values.resize(n, 0.0);
            k
        };
        let EvalCtx { slots, scratch, .. } = ctx;
        if let Err(e) = self.data.source.values(z, scratch, &mut slots[k].values) {
            slots[k].key = (0, u64::MAX);
            return Err(e);
        }
        Ok(k)
    }

    fn prepare(&self, ctx: &mut EvalCtx, x: f64, y: f64, z: f64) -> Result<usize> {
        let k = self.slot(ctx, z)?;
        powers(x, self.data.degree, &mut ctx.xp);
        powers(y, self.data.degree, &mut ctx.yp);
        Ok(k)
    }

    fn count(&self, ctx: &mut EvalCtx, c: usize, evals: u64) {
        ctx.counters.component_evals[c] += evals;
        ctx.counters.coefficient_evals[c] += evals * self.data.mono[c].len() as u64;
    }

    /// `(value, ∂_x, ∂_y)` of component `c`, unsigned.
    fn component(&self, ctx: &EvalCtx, slot: usize, c: usize) -> (f64, f64, f64) {
        let coef = &ctx.slots[slot].values[self.data.offsets[c]..];
        let (xp, yp) = (&ctx.xp, &ctx.yp);
        let (mut v, mut dx, mut dy) = (0.0, 0.0, 0.0);
        for (m, a) in self.data.mono[c].iter().zip(coef) {
            let px = xp[m.i + 1];
            let py = yp[m.j + 1];
            v += a * px * py;
            dx += a * m.fi * xp[m.i] * py;
            dy += a * m.fj * px * yp[m.j];
        }
        (v, dx, dy)
    }

    fn gradient(&self, ctx: &EvalCtx, slot: usize, c: usize) -> (f64, f64) {
        let coef = &ctx.slots[slot].values[self.data.offsets[c]..];
        let (xp, yp) = (&ctx.xp, &ctx.yp);
        let (mut dx, mut dy) = (0.0, 0.0);
        for (m, a) in self.data.mono[c].iter().zip(coef) {
            dx += a * m.fi * xp[m.i] * yp[m.j + 1];
            dy += a * m.fj * xp[m.i + 1] * yp[m.j];
        }
        (dx, dy)
    }

    fn value(&self, ctx: &EvalCtx, slot: usize, c: usize) -> f64 {
        let coef = &ctx.slots[slot].values[self.data.offsets[c]..];
        self.data.mono[c]
            .iter()
            .zip(coef)
            .map(|(m, a)| a * ctx.xp[m.i + 1] * ctx.yp[m.j + 1])
            .sum()
    }

    fn aux(&self, ctx: &EvalCtx, slot: usize, terms: &[AuxMono]) -> f64 {
        let coef = &ctx.slots[slot].values;
        terms
            .iter()
            .map(|t| t.factor * coef[t.parent] * ctx.xp[t.i + 1] * ctx.yp[t.j + 1])
            .sum()
    }

    /// Everything the equations of motion need at `s`.
    pub fn derivs(&self, ctx: &mut EvalCtx, s: &ParticleState) -> Result<FieldDerivs> {
        let k = self.prepare(ctx, s.x, s.y, s.z)?;
        ctx.counters.rhs += 1;
        self.count(ctx, 0, 3);
        self.count(ctx, 1, 3);
        self.count(ctx, 2, 2);
        let p = self.polarity;
        let (ax, dx_ax, dy_ax) = self.component(ctx, k, 0);
        let (ay, dx_ay, dy_ay) = self.component(ctx, k, 1);
        let (dx_az, dy_az) = self.gradient(ctx, k, 2);
        Ok(FieldDerivs {
            ax: p * ax,
            ay: p * ay,
            dx_ax: p * dx_ax,
            dy_ax: p * dy_ax,
            dx_ay: p * dx_ay,
            dy_ay: p * dy_ay,
            dx_az: p * dx_az,
            dy_az: p * dy_az,
        })
    }

    /// `(∂A_z/∂X, ∂A_z/∂Y)`.
    pub fn kick(&self, ctx: &mut EvalCtx, x: f64, y: f64, z: f64) -> Result<(f64, f64)> {
        let k = self.prepare(ctx, x, y, z)?;
        self.count(ctx, 2, 2);
        let (dx, dy) = self.gradient(ctx, k, 2);
        Ok((self.polarity * dx, self.polarity * dy))
    }

    /// `(A_x, ∫ ∂A_x/∂Y dX)`: the momentum shift conjugating the horizontal drift.
    pub fn x_shift(&self, ctx: &mut EvalCtx, x: f64, y: f64, z: f64) -> Result<(f64, f64)> {
        let k = self.prepare(ctx, x, y, z)?;
        self.count(ctx, 0, 2);
        let ax = self.value(ctx, k, 0);
        let int = self.aux(ctx, k, &self.data.aux_x);
        Ok((self.polarity * ax, self.polarity * int))
    }

    /// `(∫ ∂A_y/∂X dY, A_y)`.
    pub fn y_shift(&self, ctx: &mut EvalCtx, x: f64, y: f64, z: f64) -> Result<(f64, f64)> {
        let k = self.prepare(ctx, x, y, z)?;
        self.count(ctx, 1, 2);
        let ay = self.value(ctx, k, 1);
        let int = self.aux(ctx, k, &self.data.aux_y);
        Ok((self.polarity * int, self.polarity * ay))
    }

    /// `(Ã_x, Ã_y, Ã_z)`.
    pub fn potential(&self, ctx: &mut EvalCtx, x: f64, y: f64, z: f64) -> Result<[f64; 3]> {
        let k = self.prepare(ctx, x, y, z)?;
        for c in 0..3 {
            self.count(ctx, c, 1);
        }
        let p = self.polarity;
        Ok(std::array::from_fn(|c| p * self.value(ctx, k, c)))
    }
}
