//! One function per subcommand. Each fills the defaults of its resolved
//! options (recorded in the manifest) and writes its artifacts.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use quadtrack::dynamics::ParticleState;
use quadtrack::gauge::{curl, maxwell_residual, Gauge};
use quadtrack::integrators::{IntegratorSpec, Method};
use quadtrack::sampling::InterpMode;
use quadtrack::tracker::analysis::detect_instability;
use quadtrack::tracker::studies::{
    convergence_study, deviation, energy_study, fit_orders, rows_for, speed_ratios, time_fields, ConvergenceReport,
};
use quadtrack::tracker::{track, Checkpoints, Lattice, TrackOptions};
use quadtrack::{Error, Result};

use crate::args::*;
use crate::output::{Artifacts, Csv};
use crate::source;

fn initial(s: &StateArgs) -> Result<ParticleState> {
    ParticleState::new(s.x0.unwrap(), s.y0.unwrap(), s.px0.unwrap(), s.py0.unwrap()).with_delta(s.delta.unwrap())
}

fn names<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
}

pub fn gradients(a: &mut GradientsArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Spline);
    let nd = a.field.nd.unwrap();
    let gt = source::gradient_table(&a.field, nd)?;
    for w in gt.warnings() {
        eprintln!("warning: {w}");
    }
    out.write("gradients.csv", &gt.to_csv())?;
    let keys: Vec<String> = gt.keys().iter().map(|(m, k)| format!("{m}{}", k.tag())).collect();
    out.json(
        "gradients.meta.json",
        &json!({
            "max_order": gt.max_order(),
            "samples": gt.len(),
            "dz": gt.dz(),
            "z_start": gt.z()[0],
            "harmonics": keys,
            "warnings": gt.warnings(),
        }),
    )?;
    println!("{} harmonics, orders 0..={}, {} samples", keys.len(), gt.max_order(), gt.len());
    Ok(())
}

pub fn build(a: &mut BuildArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Spline);
    let pt = source::table(&a.field)?;
    out.write("potential.csv", &pt.to_csv())?;
    out.write("provenance.json", &(pt.provenance_json()? + "\n"))?;
    let (c, total) = pt.count_coefficients();
    println!("{} ND={}: A_x {} A_y {} A_z {} total {total}", pt.gauge(), a.field.nd.unwrap(), c[0], c[1], c[2]);
    Ok(())
}

pub fn track_cmd(a: &mut TrackArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Spline);
    a.state.fill();
    a.solver.fill();
    let method = *a.method.get_or_insert(Method::Lie4);
    let step = *a.step.get_or_insert(0.04);
    let pairs = *a.pairs.get_or_insert(0);
    let every = *a.every.get_or_insert(1);
    let field = source::field(&a.field)?;
    let lattice = if pairs == 0 {
        Lattice::single(field)
    } else {
        Lattice::fodo(&field, pairs)?
    };
    let mut opts = TrackOptions::new(IntegratorSpec {
        fp_tol: a.solver.fp_tol.unwrap(),
        fp_max: a.solver.fp_max.unwrap(),
        ..IntegratorSpec::new(method, step)
    });
    opts.energy = true;
    opts.checkpoints = if pairs == 0 {
        Checkpoints::EveryStep
    } else {
        Checkpoints::EveryCells(every.max(1))
    };
    let s0 = initial(&a.state)?;
    let r = track(&lattice, &s0, &opts)?;

    let mut csv = Csv::new(&["Z", "X", "Y", "Px", "Py", "KX", "KY"]);
    let mut ctx = quadtrack::field::EvalCtx::new();
    let a0 = lattice.elements()[0].potential(&mut ctx, s0.x, s0.y, lattice.elements()[0].z_range().0)?;
    let e0 = quadtrack::dynamics::energy_components(&s0, a0);
    csv.row(&[], &[0.0, s0.x, s0.y, s0.px, s0.py, e0.kx, e0.ky]);
    for c in &r.checkpoints {
        let e = c.energy.unwrap_or_default();
        csv.row(&[], &[c.s, c.state.x, c.state.y, c.state.px, c.state.py, e.kx, e.ky]);
    }
    out.write("track.csv", csv.as_str())?;
    let mut envelope = Csv::new(&["pair", "max_abs_x", "max_abs_y"]);
    for (k, m) in r.cell_max.iter().enumerate() {
        envelope.row(&[&(k + 1).to_string()], m);
    }
    out.write("envelope.csv", envelope.as_str())?;
    let xs: Vec<f64> = r.cell_max.iter().map(|m| m[0]).collect();
    let instability = if pairs >= 4 { detect_instability(&xs).ok() } else { None };
    out.json(
        "summary.json",
        &json!({
            "lost": r.loss,
            "last": r.last,
            "counters": r.counters,
            "wall_seconds": r.wall_seconds,
            "instability": instability,
        }),
    )?;
    match r.loss {
        Some(l) => println!("lost in element {} at s = {} ({:?})", l.element, l.s, l.reason),
        None => println!(
            "exit X={:.16e} Y={:.16e} Px={:.16e} Py={:.16e}",
            r.last.x, r.last.y, r.last.px, r.last.py
        ),
    }
    if let Some(i) = instability {
        println!("envelope growth: {} (last/first quarter max {:.3e}/{:.3e})", i.unstable, i.last_quarter_max, i.first_quarter_max);
    }
    Ok(())
}

fn error_rows(report: &ConvergenceReport, label: &str, csv: &mut Csv) {
    for r in &report.rows {
        let c = &r.counters;
        csv.row(
            &[label, r.method.name()],
            &[
                r.step,
                r.errors[0],
                r.errors[1],
                r.errors[2],
                r.errors[3],
                r.error,
                r.exit_errors.iter().copied().fold(0.0, f64::max),
                r.seconds,
                c.rhs as f64,
                c.m2 as f64,
                c.fixed_point_iterations as f64,
                c.total_coefficient_evals() as f64,
            ],
        );
    }
}

const ERROR_HEADER: [&str; 14] = [
    "gauge", "method", "step", "err_x", "err_y", "err_px", "err_py", "error", "exit_error", "seconds", "rhs", "m2",
    "fp_iterations", "coefficient_evals",
];

/// Reference spec for `steps`, checked to be at least ten times finer.
fn reference_spec(method: Method, step: f64, fp_tol: f64, steps: &[f64]) -> Result<IntegratorSpec> {
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    if step > min / 10.0 * (1.0 + 1e-9) {
        return Err(Error::Invalid(format!(
            "reference step {step} must be at most a tenth of the smallest step {min}"
        )));
    }
    Ok(IntegratorSpec {
        fp_tol,
        ..IntegratorSpec::new(method, step)
    })
}

pub fn converge(a: &mut ConvergeArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Exact);
    a.state.fill();
    a.solver.fill();
    let methods = a.methods.get_or_insert_with(|| Method::ALL.to_vec()).clone();
    let steps = a
        .steps
        .get_or_insert_with(|| vec![0.02, 0.016, 0.01, 0.008, 0.0064, 0.005, 0.004, 0.002])
        .clone();
    let ref_method = *a.ref_method.get_or_insert(Method::Gauss6);
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let ref_step = *a.ref_step.get_or_insert(min / 10.0);
    let ref_fp_tol = *a.ref_fp_tol.get_or_insert(1e-14);
    let floor = *a.floor.get_or_insert(1e-15);
    let jobs = a.common.jobs.unwrap();

    let field = source::field(&a.field)?;
    let reference = reference_spec(ref_method, ref_step, ref_fp_tol, &steps)?;
    let base = IntegratorSpec {
        fp_tol: a.solver.fp_tol.unwrap(),
        fp_max: a.solver.fp_max.unwrap(),
        ..IntegratorSpec::new(Method::Rk4, 1.0)
    };
    let report = convergence_study(&field, &initial(&a.state)?, reference, &methods, &steps, base, jobs)?;
    let mut csv = Csv::new(&ERROR_HEADER);
    error_rows(&report, field.table().gauge().name(), &mut csv);
    out.write("errors.csv", csv.as_str())?;

    let max = steps.iter().copied().fold(0.0, f64::max);
    let fits: Vec<_> = methods.iter().map(|&m| fit_orders(&report, min, max, floor, m)).collect();
    out.json("slopes.json", &json!({ "reference": report.reference_spec, "floor": floor, "fits": fits }))?;
    println!("{:<10} {:>8} {:>8}  steps", "method", "slope", "stderr");
    for f in &fits {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<10} {:>8} {:>8}  {}", f.method.name(), fmt(f.slope), fmt(f.slope_stderr), names(&f.steps));
    }
    Ok(())
}

pub fn efficiency(a: &mut EfficiencyArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Spline);
    a.state.fill();
    let gauges = a.gauges.get_or_insert_with(|| vec![Gauge::Af, Gauge::Hfc]).clone();
    let methods = a.methods.get_or_insert_with(|| vec![Method::Rk4, Method::Lie4]).clone();
    let steps = a.steps.get_or_insert_with(|| vec![0.02, 0.04, 0.08, 0.16]).clone();
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let ref_step = *a.ref_step.get_or_insert(min / 10.0);
    let passes = *a.passes.get_or_insert(20);
    let repeats = *a.repeats.get_or_insert(5);
    let jobs = a.common.jobs.unwrap();
    let nd = a.field.nd.unwrap();
    let s0 = initial(&a.state)?;

    let fields = source::tables_for(&a.field, &gauges, nd)?
        .into_iter()
        .map(|t| source::field_from(&a.field, t))
        .collect::<Result<Vec<_>>>()?;
    let reference = reference_spec(Method::Gauss6, ref_step, 1e-14, &steps)?;
    let mut csv = Csv::new(&ERROR_HEADER);
    for (g, f) in gauges.iter().zip(&fields) {
        let base = IntegratorSpec::new(Method::Rk4, 1.0);
        let report = convergence_study(f, &s0, reference, &methods, &steps, base, jobs)?;
        error_rows(&report, g.name(), &mut csv);
    }
    out.write("efficiency.csv", csv.as_str())?;

    // timings always run on this thread, one field after the other per repeat
    let labelled: Vec<(&str, &quadtrack::field::Field)> = gauges.iter().map(|g| g.name()).zip(&fields).collect();
    let rows = time_fields(&labelled, &s0, &methods, &steps, passes, repeats)?;
    let mut timing = Csv::new(&["gauge", "method", "step", "seconds", "coefficient_evals"]);
    for r in &rows {
        timing.row(&[&r.label, r.method.name()], &[r.step, r.seconds, r.counters.total_coefficient_evals() as f64]);
    }
    out.write("timing.csv", timing.as_str())?;
    let base_rows = rows_for(&rows, gauges[0].name());
    let ratios: Vec<_> = gauges[1..]
        .iter()
        .map(|g| {
            let r = speed_ratios(&rows_for(&rows, g.name()), &base_rows, &methods);
            for s in &r {
                println!("{}/{} {}: mean {:.3} per step {:?}", g, gauges[0], s.method, s.mean, s.ratios);
            }
            json!({ "numerator": g, "denominator": gauges[0], "ratios": r })
        })
        .collect();
    out.json("ratios.json", &ratios)?;
    Ok(())
}

pub fn energy(a: &mut EnergyArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Spline);
    a.state.fill();
    let baseline = *a.baseline.get_or_insert(Method::Gauss6);
    let mut methods = a.methods.get_or_insert_with(|| Method::ALL.to_vec()).clone();
    if !methods.contains(&baseline) {
        methods.push(baseline);
    }
    let step = *a.step.get_or_insert(0.08);
    let pairs = *a.pairs.get_or_insert(8000);
    let block = *a.block.get_or_insert(500);
    let jobs = a.common.jobs.unwrap();

    let field = source::field(&a.field)?;
    let runs = energy_study(&field, &initial(&a.state)?, &methods, step, pairs, block, jobs)?;
    let base = runs.iter().find(|r| r.method == baseline).expect("baseline was added");

    let names: Vec<&str> = runs.iter().map(|r| r.method.name()).collect();
    let header: Vec<&str> = std::iter::once("pair").chain(names.iter().copied()).collect();
    let mut kx = Csv::new(&header);
    let mut dev = Csv::new(&header);
    let n = runs.iter().map(|r| r.kx.len()).max().unwrap_or(0);
    for k in 0..n {
        let pick = |r: &quadtrack::tracker::studies::EnergyRun| r.kx.get(k).copied().unwrap_or(f64::NAN);
        let row: Vec<f64> = runs.iter().map(pick).collect();
        let b = pick(base);
        let d: Vec<f64> = row.iter().map(|v| (v - b).abs()).collect();
        let label = (k + 1).to_string();
        kx.row(&[&label], &row);
        dev.row(&[&label], &d);
    }
    out.write("kx.csv", kx.as_str())?;
    out.write("deviation.csv", dev.as_str())?;

    let mut summary = Vec::new();
    for r in &runs {
        let dtrend = if r.method == baseline || r.lost {
            None
        } else {
            deviation(r, base, block).ok().map(|(_, t)| t)
        };
        let flat = r.trend.map(|t| t.statistically_flat);
        println!(
            "{:<9} lost {:<5} K_X envelope flat {:<5} deviation flat {}",
            r.method.name(),
            r.lost,
            flat.map_or("-".into(), |f| f.to_string()),
            dtrend.map_or("-".into(), |t| t.statistically_flat.to_string())
        );
        summary.push(json!({
            "method": r.method,
            "lost": r.lost,
            "loss": r.record.loss,
            "kx_trend": r.trend,
            "deviation_trend": dtrend,
            "counters": r.record.counters,
            "wall_seconds": r.record.wall_seconds,
        }));
    }
    out.json("summary.json", &json!({ "baseline": baseline, "runs": summary }))?;
    Ok(())
}

pub fn maxwell(a: &mut MaxwellArgs, out: &mut Artifacts) -> Result<()> {
    a.field.fill(Gauge::Af, InterpMode::Exact);
    let x0 = *a.x0.get_or_insert(0.0);
    let y0 = *a.y0.get_or_insert(0.01);
    let (lo, hi) = parse_range(a.nd_range.get_or_insert_with(|| "2..16".into()))?;
    let gauges = a.gauges.get_or_insert_with(|| Gauge::ALL.to_vec()).clone();
    let probes = *a.probes.get_or_insert(0);
    let seed = a.common.seed.unwrap();

    let header: Vec<&str> = std::iter::once("nd").chain(gauges.iter().map(|g| g.name())).collect();
    let mut csv = Csv::new(&header);
    let mut top = Vec::new();
    for nd in lo..=hi {
        let tables = source::tables_for(&a.field, &gauges, nd)?;
        let res: Vec<f64> = tables.iter().map(|t| maxwell_residual(t, x0, y0)).collect::<Result<_>>()?;
        println!("ND={nd:>2} {}", res.iter().map(|r| format!("{r:.6e}")).collect::<Vec<_>>().join(" "));
        csv.row(&[&nd.to_string()], &res);
        if nd == hi {
            top = tables;
        }
    }
    out.write("residual.csv", csv.as_str())?;

    if probes > 0 {
        let fields = top
            .into_iter()
            .map(|t| source::field_from(&a.field, t))
            .collect::<Result<Vec<_>>>()?;
        let (z0, z1) = fields[0].z_range();
        let mut rng = StdRng::seed_from_u64(seed);
        let header: Vec<String> = ["x", "y", "z"]
            .into_iter()
            .map(String::from)
            .chain(gauges.iter().flat_map(|g| ["x", "y", "z"].map(|c| format!("b{c}_{}", g.name()))))
            .chain(std::iter::once("max_rel_diff".to_string()))
            .collect();
        let mut pc = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        let mut worst = 0.0f64;
        for _ in 0..probes {
            let (x, y, z) = (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), rng.gen_range(z0..z1));
            let b: Vec<[f64; 3]> = fields
                .iter()
                .map(|f| curl(f.table(), x, y, z, f.source()))
                .collect::<Result<_>>()?;
            let norm = b[0].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let b0 = b[0];
            let diff = b[1..]
                .iter()
                .flat_map(|bi| (0..3).map(move |c| (bi[c] - b0[c]).abs()))
                .fold(0.0f64, f64::max)
                / norm;
            worst = worst.max(diff);
            let mut row = vec![x, y, z];
            row.extend(b.iter().flatten());
            row.push(diff);
            pc.row(&[], &row);
        }
        out.write("curl_probes.csv", pc.as_str())?;
        println!("curl agreement over {probes} probes at ND={hi}: max relative difference {worst:.3e}");
    }
    Ok(())
}
