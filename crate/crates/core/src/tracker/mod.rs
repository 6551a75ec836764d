//! Tracking through sequences of magnets and the diagnostics built on it.

pub mod analysis;
pub mod studies;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{energy_components, Energy, ParticleState};
use crate::error::{Error, Result};
use crate::field::{Counters, EvalCtx, Field};
use crate::integrators::{Integrator, IntegratorSpec};

/// Relative tolerance for a step to divide an element length.
const STEP_FIT_TOL: f64 = 1e-9;

/// Transverse amplitude (scaled units) beyond which a particle is declared lost.
pub const DEFAULT_APERTURE: f64 = 1.0;

/// An ordered list of magnets traversed back to back, each in its own local `Z`.
#[derive(Clone, Debug)]
pub struct Lattice {
    elements: Vec<Field>,
    cell: usize,
}

impl Lattice {
    pub fn single(field: Field) -> Self {
        Self {
            elements: vec![field],
            cell: 1,
        }
    }

    /// `pairs` focusing/defocusing couples sharing `field`, the second with opposite sign.
    pub fn fodo(field: &Field, pairs: usize) -> Result<Self> {
        if pairs == 0 {
            return Err(Error::invalid("a FODO lattice needs at least one pair"));
        }
        let f = field.with_polarity(1.0);
        let d = field.with_polarity(-1.0);
        let elements = (0..pairs).flat_map(|_| [f.clone(), d.clone()]).collect();
        Ok(Self { elements, cell: 2 })
    }

    pub fn elements(&self) -> &[Field] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Elements per repeating cell (2 for FODO).
    pub fn cell(&self) -> usize {
        self.cell
    }

    pub fn cells(&self) -> usize {
        self.elements.len() / self.cell
    }
}

/// When to record the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    None,
    EveryStep,
    /// At the exit of every cell.
    CellExit,
    /// At the exit of every `n`-th cell.
    EveryCells(usize),
}

#[derive(Clone, Debug)]
pub struct TrackOptions {
    pub spec: IntegratorSpec,
    pub checkpoints: Checkpoints,
    /// Evaluate kinetic energies at each checkpoint.
    pub energy: bool,
    pub aperture: f64,
}

impl TrackOptions {
    pub fn new(spec: IntegratorSpec) -> Self {
        Self {
            spec,
            checkpoints: Checkpoints::None,
            energy: false,
            aperture: DEFAULT_APERTURE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub element: usize,
    /// Path length from the lattice entrance.
    pub s: f64,
    pub state: ParticleState,
    pub energy: Option<Energy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReason {
    NonFinite,
    Aperture,
    FixedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub element: usize,
    pub s: f64,
    pub reason: LossReason,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackRecord {
    pub initial: ParticleState,
    /// Last state before a loss, or the exit state.
    pub last: ParticleState,
    pub checkpoints: Vec<Checkpoint>,
    /// Per cell: maximum of `|X|` and `|Y|` over every step inside the cell.
    pub cell_max: Vec<[f64; 2]>,
    pub loss: Option<Loss>,
    pub counters: Counters,
    pub wall_seconds: f64,
}

impl TrackRecord {
    pub fn lost(&self) -> bool {
        self.loss.is_some()
    }
}

/// Number of steps of length `h` covering `span`, if they fit.
pub fn steps_for(span: f64, h: f64) -> Result<usize> {
    let ratio = span / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > STEP_FIT_TOL * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "step {h} does not divide the element length {span}"
        )));
    }
    Ok(n as usize)
}

/// Tracks `initial` (its `z` is ignored) through `lattice`.
pub fn track(lattice: &Lattice, initial: &ParticleState, opts: &TrackOptions) -> Result<TrackRecord> {
    let integrator = Integrator::new(opts.spec)?;
    let h = opts.spec.step;
    let plans: Vec<(f64, usize)> = lattice
        .elements()
        .iter()
        .map(|f| {
            let (z0, z1) = f.z_range();
            steps_for(z1 - z0, h).map(|n| (z0, n))
        })
        .collect::<Result<_>>()?;

    let start = Instant::now();
    let mut ctx = EvalCtx::new();
    let mut diag = EvalCtx::new();
    let mut state = *initial;
    let mut record = TrackRecord {
        initial: *initial,
        last: *initial,
        checkpoints: Vec::new(),
        cell_max: Vec::with_capacity(lattice.cells()),
        loss: None,
        counters: Counters::default(),
        wall_seconds: 0.0,
    };
    let mut s_path = 0.0;
    let mut cell_max = [0.0f64; 2];
    // Low-order bits of the state lost when increments are added (Kahan).
    let mut carry = [0.0f64; 4];
    'outer: for (e, (field, &(z0, n))) in lattice.elements().iter().zip(&plans).enumerate() {
        for k in 0..n {
            state.z = z0 + k as f64 * h;
            let next = match integrator.increment(field, &mut ctx, &state, h) {
                Ok(d) => {
                    let w = state.coords();
                    let mut out = w;
                    for i in 0..4 {
                        let inc = d[i] + carry[i];
                        out[i] = w[i] + inc;
                        carry[i] = inc - (out[i] - w[i]);
                    }
                    ParticleState {
                        z: state.z + h,
                        ..state.with_coords(out)
                    }
                }
                Err(Error::FixedPoint { .. }) => {
                    record.loss = Some(Loss {
                        element: e,
                        s: s_path + k as f64 * h,
                        reason: LossReason::FixedPoint,
                    });
                    break 'outer;
                }
                Err(err) => return Err(err),
            };
            let reason = if !next.is_finite() {
                Some(LossReason::NonFinite)
            } else if next.x.abs() > opts.aperture || next.y.abs() > opts.aperture {
                Some(LossReason::Aperture)
            } else {
                None
            };
            if let Some(reason) = reason {
                record.loss = Some(Loss {
                    element: e,
                    s: s_path + (k + 1) as f64 * h,
                    reason,
                });
                break 'outer;
            }
            state = next;
            cell_max[0] = cell_max[0].max(state.x.abs());
            cell_max[1] = cell_max[1].max(state.y.abs());
            if opts.checkpoints == Checkpoints::EveryStep {
                let cp = checkpoint(field, &mut diag, e, s_path + (k + 1) as f64 * h, &state, opts.energy)?;
                record.checkpoints.push(cp);
            }
        }
        s_path += n as f64 * h;
        state.z = z0 + n as f64 * h;
        if (e + 1) % lattice.cell() == 0 {
            let cell = e / lattice.cell();
            record.cell_max.push(cell_max);
            cell_max = [0.0; 2];
            let due = match opts.checkpoints {
                Checkpoints::CellExit => true,
                Checkpoints::EveryCells(m) => m > 0 && (cell + 1) % m == 0,
                _ => false,
            };
            if due {
                let cp = checkpoint(field, &mut diag, e, s_path, &state, opts.energy)?;
                record.checkpoints.push(cp);
            }
        }
    }
    record.last = state;
    record.counters = ctx.take_counters();
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

fn checkpoint(field: &Field, ctx: &mut EvalCtx, element: usize, s: f64, state: &ParticleState, energy: bool) -> Result<Checkpoint> {
    let energy = if energy {
        let a = field.potential(ctx, state.x, state.y, state.z)?;
        Some(energy_components(state, a))
    } else {
        None
    };
    Ok(Checkpoint {
        element,
        s,
        state: *state,
        energy,
    })
}
