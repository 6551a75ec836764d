//! Convergence, efficiency and long-term energy studies.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{envelope_trend, order_fit, EnvelopeTrend};
use super::{track, Checkpoints, Lattice, TrackOptions, TrackRecord};
use crate::dynamics::ParticleState;
use crate::error::{Error, Result};
use crate::field::{Counters, Field};
use crate::integrators::{IntegratorSpec, Method};

/// Runs `f` over `items` on a pool of `jobs` threads (`jobs ≤ 1` runs inline).
pub fn par_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    if jobs <= 1 {
        return items.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

fn max_abs_diff(a: &ParticleState, b: &ParticleState) -> [f64; 4] {
    let (a, b) = (a.coords(), b.coords());
    std::array::from_fn(|i| (a[i] - b[i]).abs())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub method: Method,
    pub step: f64,
    /// Per-coordinate maxima over the trajectory of the absolute error.
    pub errors: [f64; 4],
    /// Max-norm of `errors`.
    pub error: f64,
    /// Per-coordinate absolute errors at the magnet exit.
    pub exit_errors: [f64; 4],
    pub seconds: f64,
    pub counters: Counters,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference_spec: IntegratorSpec,
    pub reference: ParticleState,
    pub rows: Vec<ConvergenceRow>,
}

/// Trajectory errors through one magnet for every `(method, step)` against a
/// reference run whose step divides every step in `steps`.
///
/// The error of a run is the largest deviation from the reference over all of
/// its step points, per coordinate.
pub fn convergence_study(
    field: &Field,
    initial: &ParticleState,
    reference: IntegratorSpec,
    methods: &[Method],
    steps: &[f64],
    base: IntegratorSpec,
    jobs: usize,
) -> Result<ConvergenceReport> {
    let lattice = Lattice::single(field.clone());
    let ratios: Vec<usize> = steps
        .iter()
        .map(|&h| super::steps_for(h, reference.step))
        .collect::<Result<_>>()?;
    let mut opts = TrackOptions::new(reference);
    opts.checkpoints = Checkpoints::EveryStep;
    let ref_run = track(&lattice, initial, &opts)?;
    if ref_run.lost() {
        return Err(Error::Domain("reference particle was lost".into()));
    }
    let ref_states: Vec<ParticleState> = ref_run.checkpoints.iter().map(|c| c.state).collect();
    let cases: Vec<(Method, f64, usize)> = methods
        .iter()
        .flat_map(|&m| steps.iter().zip(&ratios).map(move |(&h, &r)| (m, h, r)))
        .collect();
    let rows = par_map(jobs, cases, |(method, step, ratio)| {
        let spec = IntegratorSpec {
            method,
            step,
            ..base
        };
        let mut opts = TrackOptions::new(spec);
        opts.checkpoints = Checkpoints::EveryStep;
        let r = track(&lattice, initial, &opts)?;
        let (errors, exit_errors) = if r.lost() {
            ([f64::INFINITY; 4], [f64::INFINITY; 4])
        } else {
            let mut worst = [0.0f64; 4];
            for (k, c) in r.checkpoints.iter().enumerate() {
                let d = max_abs_diff(&c.state, &ref_states[(k + 1) * ratio - 1]);
                for i in 0..4 {
                    worst[i] = worst[i].max(d[i]);
                }
            }
            (worst, max_abs_diff(&r.last, &ref_run.last))
        };
        Ok(ConvergenceRow {
            method,
            step,
            errors,
            error: errors.iter().copied().fold(0.0, f64::max),
            exit_errors,
            seconds: r.wall_seconds,
            counters: r.counters,
        })
    })?;
    Ok(ConvergenceReport {
        reference_spec: reference,
        reference: ref_run.last,
        rows,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub method: Method,
    pub steps: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

/// Fits `log error` against `log step` for `method` over steps in `[lo, hi]`,
/// walking down from `hi` and stopping at the first error that is not above
/// `floor` (round-off has taken over from there on). The slope is undefined
/// with fewer than two usable points.
pub fn fit_orders(report: &ConvergenceReport, lo: f64, hi: f64, floor: f64, method: Method) -> OrderEstimate {
    let mut rows: Vec<&ConvergenceRow> = report
        .rows
        .iter()
        .filter(|r| r.method == method && r.step >= lo * (1.0 - 1e-12) && r.step <= hi * (1.0 + 1e-12))
        .collect();
    rows.sort_by(|a, b| b.step.total_cmp(&a.step));
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .take_while(|r| r.error > floor && r.error.is_finite())
        .map(|r| (r.step, r.error))
        .collect();
    let steps: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let errs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = if pts.len() >= 2 { order_fit(&steps, &errs).ok() } else { None };
    OrderEstimate {
        method,
        steps,
        slope: fit.map(|f| f.slope),
        slope_stderr: fit.map(|f| f.slope_stderr),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingRow {
    pub label: String,
    pub method: Method,
    pub step: f64,
    /// Median over repeats of the time for `passes` traversals.
    pub seconds: f64,
    pub counters: Counters,
}

/// Single-threaded wall-clock time of `passes` traversals of each labelled
/// field per `(method, step)`, median over `repeats`. The fields are timed in
/// turn within every repeat so that drifts in machine load hit all of them.
pub fn time_fields(
    fields: &[(&str, &Field)],
    initial: &ParticleState,
    methods: &[Method],
    steps: &[f64],
    passes: usize,
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    let lattices: Vec<Lattice> = fields.iter().map(|(_, f)| Lattice::single((*f).clone())).collect();
    let mut rows = Vec::new();
    for &method in methods {
        for &step in steps {
            let opts = TrackOptions::new(IntegratorSpec::new(method, step));
            let mut times = vec![Vec::with_capacity(repeats); fields.len()];
            let mut counters = vec![Counters::default(); fields.len()];
            for rep in 0..repeats.max(1) {
                for (i, lattice) in lattices.iter().enumerate() {
                    let t = Instant::now();
                    for _ in 0..passes.max(1) {
                        let r = track(lattice, initial, &opts)?;
                        if rep == 0 {
                            counters[i].merge(&r.counters);
                        }
                    }
                    times[i].push(t.elapsed().as_secs_f64());
                }
            }
            for (i, (label, _)) in fields.iter().enumerate() {
                times[i].sort_by(f64::total_cmp);
                rows.push(TimingRow {
                    label: label.to_string(),
                    method,
                    step,
                    seconds: times[i][times[i].len() / 2],
                    counters: counters[i],
                });
            }
        }
    }
    Ok(rows)
}

/// Rows of `rows` carrying `label`.
pub fn rows_for<'a>(rows: &'a [TimingRow], label: &str) -> Vec<TimingRow> {
    rows.iter().filter(|r| r.label == label).cloned().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpeedRatio {
    pub method: Method,
    /// Per-step ratios in the order of the step list.
    pub ratios: Vec<f64>,
    pub mean: f64,
}

/// `numerator / denominator` timing ratios per method, averaged over steps.
pub fn speed_ratios(numerator: &[TimingRow], denominator: &[TimingRow], methods: &[Method]) -> Vec<SpeedRatio> {
    methods
        .iter()
        .map(|&method| {
            let ratios: Vec<f64> = numerator
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|n| {
                    denominator
                        .iter()
                        .find(|d| d.method == method && d.step == n.step)
                        .map(|d| n.seconds / d.seconds)
                })
                .collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
            SpeedRatio { method, ratios, mean }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyRun {
    pub method: Method,
    /// `K_X` at each cell exit.
    pub kx: Vec<f64>,
    pub trend: Option<EnvelopeTrend>,
    pub lost: bool,
    pub record: TrackRecord,
}

/// Tracks through `pairs` FODO couples with each method, recording `K_X` per couple.
pub fn energy_study(
    field: &Field,
    initial: &ParticleState,
    methods: &[Method],
    step: f64,
    pairs: usize,
    block: usize,
    jobs: usize,
) -> Result<Vec<EnergyRun>> {
    let lattice = Lattice::fodo(field, pairs)?;
    par_map(jobs, methods.to_vec(), |method| {
        let mut opts = TrackOptions::new(IntegratorSpec::new(method, step));
        opts.checkpoints = Checkpoints::CellExit;
        opts.energy = true;
        let mut record = track(&lattice, initial, &opts)?;
        let kx: Vec<f64> = record
            .checkpoints
            .iter()
            .filter_map(|c| c.energy.map(|e| e.kx))
            .collect();
        record.checkpoints.clear();
        let lost = record.lost();
        let trend = if lost { None } else { envelope_trend(&kx, block).ok() };
        Ok(EnergyRun {
            method,
            kx,
            trend,
            lost,
            record,
        })
    })
}

/// `|a − b|` per couple together with the trend of its envelope.
pub fn deviation(a: &EnergyRun, b: &EnergyRun, block: usize) -> Result<(Vec<f64>, EnvelopeTrend)> {
    let n = a.kx.len().min(b.kx.len());
    let d: Vec<f64> = a.kx[..n].iter().zip(&b.kx[..n]).map(|(x, y)| (x - y).abs()).collect();
    let t = envelope_trend(&d, block)?;
    Ok((d, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::InterpMode;
    use crate::scenarios::{analytic_field, bench_initial};

    #[test]
    fn convergence_rows_and_fit() {
        let field = analytic_field(InterpMode::Exact).unwrap();
        let reference = IntegratorSpec::new(Method::Gauss6, 0.002);
        let report = convergence_study(
            &field,
            &bench_initial(),
            reference,
            &[Method::Lie2, Method::Rk4],
            &[0.02, 0.01, 0.004],
            IntegratorSpec::new(Method::Lie2, 1.0),
            2,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 6);
        let lie2 = fit_orders(&report, 0.004, 0.02, 0.0, Method::Lie2);
        assert_eq!(lie2.steps, vec![0.02, 0.01, 0.004]);
        assert!((lie2.slope.unwrap() - 2.0).abs() < 0.1, "{lie2:?}");
        let none = fit_orders(&report, 0.004, 0.02, 1.0, Method::Rk4);
        assert!(none.slope.is_none());
        // the window ends at the first error under the floor
        let rk4: Vec<f64> = report.rows.iter().filter(|r| r.method == Method::Rk4).map(|r| r.error).collect();
        let cut = fit_orders(&report, 0.004, 0.02, rk4[1], Method::Rk4);
        assert_eq!(cut.steps, vec![0.02]);
    }

    #[test]
    fn energy_runs_share_lattice() {
        let field = analytic_field(InterpMode::Spline).unwrap();
        let runs = energy_study(&field, &bench_initial(), &[Method::Lie4, Method::Rk4], 0.08, 60, 20, 1).unwrap();
        assert_eq!(runs.len(), 2);
        assert!(runs.iter().all(|r| r.kx.len() == 60 && !r.lost && r.trend.is_some()));
        let (d, _) = deviation(&runs[0], &runs[1], 20).unwrap();
        assert!(d.iter().all(|v| *v < 1e-8));
    }

    #[test]
    fn timing_ratio_plumbing() {
        let field = analytic_field(InterpMode::Spline).unwrap();
        let rows = time_fields(&[("a", &field), ("b", &field)], &bench_initial(), &[Method::Lie2], &[0.16], 1, 3).unwrap();
        assert_eq!(rows.len(), 2);
        let a = rows_for(&rows, "a");
        let r = speed_ratios(&a, &a, &[Method::Lie2]);
        assert_eq!(r[0].ratios, vec![1.0]);
        assert!(a[0].counters.m2 == 25);
    }
}
