//! Reference configurations used by the studies, the CLI and the test suites.

use std::sync::Arc;

use crate::dynamics::{reference_constants, ParticleState};
use crate::error::Result;
use crate::field::Field;
use crate::gauge::{build, Gauge, PotentialTable};
use crate::harmonics::{harmonic_from_gradients, GradientTable, HarmonicSet, Kind};
use crate::profile::{GradientProfile, ScaledHarmonics, StepGeometry, StepGradient};
use crate::sampling::InterpMode;

/// Length of the benchmark magnet in scaled units.
pub const MAGNET_LENGTH: f64 = 4.0;

/// Initial transverse state `(X, Y, P_x, P_y)` of the analytic benchmark.
pub const BENCH_INITIAL: [f64; 4] = [0.02, -0.04, 0.0, 0.0];

/// Grid spacing of the sampled analytic benchmark.
pub const BENCH_DATA_DZ: f64 = 0.002;

/// Truncation order of the analytic benchmark (only `C_2^[0]` and its derivatives).
pub const BENCH_ND: usize = 2;

/// Radius of analysis of the realistic surrogate.
pub const REALISTIC_RADIUS: f64 = 0.05;

/// Body gradient of the realistic surrogate in T/m (a large-aperture Nb3Sn
/// interaction-region quadrupole).
pub const REALISTIC_GRADIENT: f64 = 132.2;

/// Reference particle: 7 TeV protons.
pub const REFERENCE_ENERGY_EV: f64 = 7e12;
pub const PROTON_MASS_EV: f64 = 938.272_088_16e6;

/// Grid spacing of the realistic surrogate data.
pub const REALISTIC_DATA_DZ: f64 = 0.02;

pub const REALISTIC_ND: usize = 16;

/// Relative harmonic content `B_m(R)/B_2(R)` on the plateau.
pub const REALISTIC_HARMONICS: [(u32, Kind, f64); 3] = [
    (6, Kind::Normal, 3e-4),
    (10, Kind::Normal, -2e-4),
    (14, Kind::Normal, 1e-4),
];

pub fn bench_initial() -> ParticleState {
    let w = BENCH_INITIAL;
    ParticleState::new(w[0], w[1], w[2], w[3])
}

/// Uniform grid over `[0, MAGNET_LENGTH]`.
pub fn grid(dz: f64) -> Result<Vec<f64>> {
    let n = crate::tracker::steps_for(MAGNET_LENGTH, dz)?;
    Ok((0..=n).map(|k| k as f64 * dz).collect())
}

pub fn analytic_profile() -> Arc<StepGradient> {
    Arc::new(StepGradient::new(StepGeometry::REFERENCE).expect("reference geometry is valid"))
}

/// The analytic step gradient sampled on a grid of spacing `dz` with orders `0..=max_order`.
pub fn analytic_gradients(dz: f64, max_order: usize) -> Result<GradientTable> {
    GradientTable::from_profile(analytic_profile(), grid(dz)?, max_order)
}

/// Benchmark potential in `gauge` truncated at `nd`.
pub fn analytic_table(gauge: Gauge, nd: usize, dz: f64) -> Result<PotentialTable> {
    build(&analytic_gradients(dz, nd + 2)?, gauge, nd, 1.0)
}

/// Benchmark field (AF gauge, `ND = 2`) with coefficients obtained by `mode`.
pub fn analytic_field(mode: InterpMode) -> Result<Field> {
    Field::new(Arc::new(analytic_table(Gauge::Af, BENCH_ND, BENCH_DATA_DZ)?), mode)
}

/// Strongly nonlinear single magnet: the benchmark shape scaled up a
/// thousandfold with a large dodecapole, exact coefficients.
pub fn nonlinear_field() -> Result<Field> {
    let profile = ScaledHarmonics::new(
        StepGradient::new(StepGeometry::REFERENCE)?,
        vec![(2, Kind::Normal, 1.0), (6, Kind::Normal, 200.0)],
    )?;
    let gt = GradientTable::from_profile(Arc::new(profile), grid(BENCH_DATA_DZ)?, 8)?;
    Field::new(Arc::new(build(&gt, Gauge::Af, 6, 1000.0)?), InterpMode::Exact)
}

/// Off-axis state in the body of [`nonlinear_field`].
pub fn nonlinear_probe() -> ParticleState {
    ParticleState {
        z: 1.4,
        ..ParticleState::new(0.1, -0.15, 0.001, 0.002)
    }
}

/// `Q L / p⁰` of the reference particle.
pub fn reference_potential_scale() -> Result<f64> {
    Ok(reference_constants(REFERENCE_ENERGY_EV, PROTON_MASS_EV)?.potential_scale(1.0))
}

/// Normal quadrupole with the benchmark step shape, the realistic body
/// gradient and weak allowed harmonics, in T/m^(m-1).
pub fn realistic_profile() -> Result<Arc<ScaledHarmonics>> {
    let base = StepGradient::new(StepGeometry {
        alpha: REALISTIC_GRADIENT / 2.0,
        ..StepGeometry::REFERENCE
    })?;
    Ok(Arc::new(ScaledHarmonics::from_relative_harmonics(
        base,
        REALISTIC_RADIUS,
        &REALISTIC_HARMONICS,
    )?))
}

pub fn realistic_gradients(nd: usize) -> Result<GradientTable> {
    GradientTable::from_profile(realistic_profile()?, grid(REALISTIC_DATA_DZ)?, nd + 2)
}

/// Realistic surrogate potential, scaled for the reference particle.
pub fn realistic_table(gauge: Gauge, nd: usize) -> Result<PotentialTable> {
    build(&realistic_gradients(nd)?, gauge, nd, reference_potential_scale()?)
}

/// Realistic surrogate field with spline coefficients.
pub fn realistic_field(gauge: Gauge) -> Result<Field> {
    Field::new(Arc::new(realistic_table(gauge, REALISTIC_ND)?), InterpMode::Spline)
}

/// Radial harmonics of the realistic surrogate at its radius of analysis,
/// as a measurement would provide them, on a grid of spacing `dz`.
pub fn realistic_harmonics(dz: f64, terms: usize) -> Result<HarmonicSet> {
    let profile = realistic_profile()?;
    let z = grid(dz)?;
    let mut normal = std::collections::BTreeMap::new();
    for (m, kind) in profile.harmonics() {
        let orders: Vec<Vec<f64>> = (0..=2 * terms as u32)
            .map(|n| z.iter().map(|&zz| profile.value(m, kind, n, zz)).collect())
            .collect();
        normal.insert(m, harmonic_from_gradients(m, REALISTIC_RADIUS, &orders));
    }
    HarmonicSet::new(REALISTIC_RADIUS, z, normal, Default::default(), true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_shapes() {
        let pt = analytic_table(Gauge::Af, BENCH_ND, BENCH_DATA_DZ).unwrap();
        assert_eq!(pt.z().len(), 2001);
        assert!((pt.span() - MAGNET_LENGTH).abs() < 1e-12);
        let pt = realistic_table(Gauge::Hfc, REALISTIC_ND).unwrap();
        assert_eq!(pt.count_coefficients(), ([0, 119, 135], 254));
    }

    #[test]
    fn realistic_harmonic_ratios_on_plateau() {
        let hs = realistic_harmonics(0.02, 6).unwrap();
        let k = 100; // z = 2, on the plateau
        let b2 = hs.series(Kind::Normal)[&2][k];
        for (m, _, rel) in REALISTIC_HARMONICS {
            let bm = hs.series(Kind::Normal)[&m][k];
            assert!((bm / b2 - rel).abs() < 1e-12 * rel.abs().max(1.0), "m={m}: {}", bm / b2);
        }
    }
}
