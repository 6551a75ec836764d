//! Gradient tables, potential tables and fields from the field options.

use std::fs;
use std::sync::Arc;

use quadtrack::field::Field;
use quadtrack::gauge::{build, Gauge, PotentialTable};
use quadtrack::harmonics::{compute_gradients, load_harmonics_with, GradientTable};
use quadtrack::profile::StepGradient;
use quadtrack::scenarios;
use quadtrack::{Error, Result};

use crate::args::{FieldArgs, Source};

/// Gradients of orders `0..=order` on the source grid.
pub fn gradient_table(f: &FieldArgs, order: usize) -> Result<GradientTable> {
    match f.source() {
        Source::Analytic => {
            let geom = f.geometry();
            let profile = StepGradient::new(geom)?;
            let dz = f.dz.unwrap_or(scenarios::BENCH_DATA_DZ);
            if !(dz > 0.0) {
                return Err(Error::Invalid(format!("grid spacing {dz} must be positive")));
            }
            let n = quadtrack::tracker::steps_for(geom.zmax, dz)?;
            let z = (0..=n).map(|k| k as f64 * dz).collect();
            GradientTable::from_profile(Arc::new(profile), z, order)
        }
        Source::Realistic => {
            let z = scenarios::grid(scenarios::REALISTIC_DATA_DZ)?;
            GradientTable::from_profile(scenarios::realistic_profile()?, z, order)
        }
        Source::Harmonics => {
            let path = f.input.as_ref().expect("harmonics source has a path");
            let mut hs = load_harmonics_with(path, f.radius, f.any_order != Some(true))?;
            if let Some(pad) = f.pad.filter(|&p| p > 0.0) {
                hs = hs.zero_pad(pad)?;
            }
            compute_gradients(&hs, order)
        }
        Source::Gradients => {
            let path = f.gradients.as_ref().expect("gradient source has a path");
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let gt = GradientTable::from_csv(&text)?;
            if gt.max_order() < order {
                eprintln!(
                    "warning: {} holds orders up to {}; higher orders are taken from splines",
                    path.display(),
                    gt.max_order()
                );
            }
            Ok(gt)
        }
    }
}

fn nd(f: &FieldArgs) -> usize {
    f.nd.unwrap_or(scenarios::BENCH_ND)
}

/// Potential tables for each of `gauges`, sharing one gradient table.
pub fn tables_for(f: &FieldArgs, gauges: &[Gauge], nd: usize) -> Result<Vec<PotentialTable>> {
    let gt = gradient_table(f, nd + 2)?;
    for w in gt.warnings() {
        eprintln!("warning: {w}");
    }
    let scale = f.scale.unwrap_or(1.0);
    gauges.iter().map(|&g| build(&gt, g, nd, scale)).collect()
}

pub fn table(f: &FieldArgs) -> Result<PotentialTable> {
    let gauge = f.gauge.unwrap_or(Gauge::Af);
    Ok(tables_for(f, &[gauge], nd(f))?.remove(0))
}

pub fn field_from(f: &FieldArgs, table: PotentialTable) -> Result<Field> {
    Field::new(Arc::new(table), f.mode.unwrap_or(quadtrack::sampling::InterpMode::Spline))
}

pub fn field(f: &FieldArgs) -> Result<Field> {
    field_from(f, table(f)?)
}
