//! Second-order splitting map and its symmetric compositions.
//!
//! The map is a Strang composition of four exactly solvable flows: the kick
//! from `Ã_z`, the horizontal and vertical kinetic parts (each solved as a
//! drift conjugated by the momentum shift that removes the potential), and
//! the advance of `Z`. The shifts use the same `Z` before and after their drift.

use crate::dynamics::ParticleState;
use crate::error::Result;
use crate::field::{EvalCtx, Field};

fn kick(field: &Field, ctx: &mut EvalCtx, s: &mut ParticleState, tau: f64) -> Result<()> {
    let (gx, gy) = field.kick(ctx, s.x, s.y, s.z)?;
    s.px += tau * gx;
    s.py += tau * gy;
    Ok(())
}

/// Flow of `(P_x − Ã_x)²/(2(1+δ))` for `tau`.
fn x_block(field: &Field, ctx: &mut EvalCtx, s: &mut ParticleState, tau: f64) -> Result<()> {
    let (ax, ix) = field.x_shift(ctx, s.x, s.y, s.z)?;
    s.px -= ax;
    s.py -= ix;
    s.x += tau * s.px / (1.0 + s.delta);
    let (ax, ix) = field.x_shift(ctx, s.x, s.y, s.z)?;
    s.px += ax;
    s.py += ix;
    Ok(())
}

fn y_block(field: &Field, ctx: &mut EvalCtx, s: &mut ParticleState, tau: f64) -> Result<()> {
    let (iy, ay) = field.y_shift(ctx, s.x, s.y, s.z)?;
    s.px -= iy;
    s.py -= ay;
    s.y += tau * s.py / (1.0 + s.delta);
    let (iy, ay) = field.y_shift(ctx, s.x, s.y, s.z)?;
    s.px += iy;
    s.py += ay;
    Ok(())
}

/// One second-order step of length `h` (may be negative) starting at `s.z`.
pub fn m2(field: &Field, ctx: &mut EvalCtx, s: &ParticleState, h: f64) -> Result<ParticleState> {
    ctx.counters.m2 += 1;
    let z0 = s.z;
    let mut w = *s;
    let half = 0.5 * h;
    kick(field, ctx, &mut w, half)?;
    x_block(field, ctx, &mut w, half)?;
    w.z = z0 + half;
    y_block(field, ctx, &mut w, h)?;
    w.z = z0 + h;
    x_block(field, ctx, &mut w, half)?;
    kick(field, ctx, &mut w, half)?;
    Ok(w)
}

/// `(α₀, α₁)` raising a symmetric method of order `2n` to `2n + 2`.
pub fn yoshida_weights(n: u32) -> (f64, f64) {
    let r = 2f64.powf(1.0 / (2 * n + 1) as f64);
    let a1 = 1.0 / (2.0 - r);
    (-r * a1, a1)
}

/// Symmetric composition of order `order` (2, 4 or 6).
pub fn composed(field: &Field, ctx: &mut EvalCtx, s: &ParticleState, h: f64, order: u32) -> Result<ParticleState> {
    if order <= 2 {
        return m2(field, ctx, s, h);
    }
    let (a0, a1) = yoshida_weights(order / 2 - 1);
    let w = composed(field, ctx, s, a1 * h, order - 2)?;
    let w = composed(field, ctx, &w, a0 * h, order - 2)?;
    composed(field, ctx, &w, a1 * h, order - 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for n in 1..4 {
            let (a0, a1) = yoshida_weights(n);
            assert!((a0 + 2.0 * a1 - 1.0).abs() < 1e-15);
            // odd-order error terms cancel: a0^(2n+1) + 2 a1^(2n+1) = 0
            let p = (2 * n + 1) as i32;
            assert!((a0.powi(p) + 2.0 * a1.powi(p)).abs() < 1e-13);
        }
        let (a0, a1) = yoshida_weights(1);
        let c = 2f64.cbrt();
        assert!((a1 - 1.0 / (2.0 - c)).abs() < 1e-15);
        assert!((a0 + c / (2.0 - c)).abs() < 1e-15);
    }
}
