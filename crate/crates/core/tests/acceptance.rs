//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion with the measured numbers.
//!
//! Failing criteria are reported, not hidden; the process exits non-zero on a
//! failure only when `QUADTRACK_ACCEPTANCE_STRICT` is set, so that the known
//! conflicts with the published tables do not break `cargo test`.

use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use quadtrack::dynamics::ParticleState;
use quadtrack::field::{EvalCtx, Field};
use quadtrack::gauge::{build, curl, curl_curl_at, maxwell_residual, Gauge, PotentialTable};
use quadtrack::harmonics::{GradientTable, Kind};
use quadtrack::integrators::splitting::m2;
use quadtrack::integrators::{symplecticity_defect, Integrator, IntegratorSpec, Method};
use quadtrack::profile::{ScaledHarmonics, StepGeometry, StepGradient};
use quadtrack::sampling::InterpMode;
use quadtrack::scenarios::{self, bench_initial};
use quadtrack::tracker::analysis::{detect_instability, order_fit};
use quadtrack::tracker::studies::{
    convergence_study, deviation, energy_study, fit_orders, rows_for, speed_ratios, time_fields,
};
use quadtrack::tracker::{track, Checkpoints, Lattice, TrackOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("coefficient counts", counts),
        ("evaluation-count ratios", eval_ratios),
        ("convergence orders", convergence),
        ("symplecticity defect", symplecticity),
        ("gauge equivalence", gauge_equivalence),
        ("spurious current", spurious_current),
        ("interpolation ordering", interpolation),
        ("HFC speedup", speedup),
        ("long-term stability", stability),
        ("energy behavior", energy),
        ("fixed-point iterations", fixed_point),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name} ({:.1} s)", k + 1, t.elapsed().as_secs_f64());
        for line in o.detail.lines() {
            println!("         {line}");
        }
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("QUADTRACK_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}

/// Four harmonics of one kind sharing the benchmark shape.
fn multipole_table(kind: Kind, gauge: Gauge, nd: usize) -> PotentialTable {
    let weights = [2, 6, 10, 14].iter().map(|&m| (m, kind, 1.0)).collect();
    let p = ScaledHarmonics::new(StepGradient::new(StepGeometry::REFERENCE).unwrap(), weights).unwrap();
    let gt = GradientTable::from_profile(Arc::new(p), scenarios::grid(0.1).unwrap(), nd + 2).unwrap();
    build(&gt, gauge, nd, 1.0).unwrap()
}

fn counts() -> Outcome {
    // (gauge, kind, ND, A_x, A_y, A_z)
    let table: [(Gauge, Kind, usize, [usize; 3]); 8] = [
        (Gauge::Af, Kind::Normal, 2, [20, 20, 40]),
        (Gauge::Af, Kind::Skew, 2, [16, 16, 36]),
        (Gauge::Hfc, Kind::Normal, 2, [0, 20, 44]),
        (Gauge::Hfc, Kind::Skew, 2, [0, 20, 32]),
        (Gauge::Af, Kind::Normal, 16, [112, 112, 128]),
        (Gauge::Af, Kind::Skew, 16, [105, 105, 120]),
        (Gauge::Hfc, Kind::Normal, 16, [0, 119, 135]),
        (Gauge::Hfc, Kind::Skew, 16, [0, 112, 113]),
    ];
    let t = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    let mut totals = std::collections::HashMap::new();
    for (g, kind, nd, want) in table {
        let (got, total) = multipole_table(kind, g, nd).count_coefficients();
        ok &= got == want;
        totals.insert((g, kind, nd), total);
        detail += &format!("{g} {kind:?} ND={nd}: {got:?} total {total} (table {want:?})\n");
    }
    let ratio = totals[&(Gauge::Hfc, Kind::Normal, 16)] as f64 / totals[&(Gauge::Af, Kind::Normal, 16)] as f64;
    let secs = t.elapsed().as_secs_f64();
    detail += &format!("HFC/AF normal ND=16 total ratio {ratio:.2}; {secs:.2} s");
    outcome(ok && (ratio - 0.72).abs() < 0.005 && secs < 1.0, detail)
}

fn eval_ratios() -> Outcome {
    let s = ParticleState {
        z: 0.5,
        ..ParticleState::new(0.01, -0.02, 0.0, 0.0)
    };
    let evals = |kind: Kind, g: Gauge| {
        let f = Field::new(Arc::new(multipole_table(kind, g, 16)), InterpMode::Spline).unwrap();
        let mut ctx = EvalCtx::new();
        f.derivs(&mut ctx, &s).unwrap();
        let rhs = ctx.take_counters().total_coefficient_evals();
        m2(&f, &mut ctx, &s, 0.02).unwrap();
        let map = ctx.take_counters().total_coefficient_evals();
        (rhs as f64, map as f64)
    };
    let mut ok = true;
    let mut detail = String::new();
    for (kind, rhs_paper, m2_paper) in [(Kind::Normal, 0.666, 0.539), (Kind::Skew, 0.646, 0.517)] {
        let (ra, ma) = evals(kind, Gauge::Af);
        let (rh, mh) = evals(kind, Gauge::Hfc);
        let (r, m) = (rh / ra, mh / ma);
        let hit = |v: f64, p: f64| (v - p).abs() < 5e-4;
        ok &= hit(r, rhs_paper) && hit(m, m2_paper);
        detail += &format!(
            "{kind:?}: rhs {rh}/{ra} = {r:.3} (table {rhs_paper}), M2 {mh}/{ma} = {m:.3} (table {m2_paper})\n"
        );
    }
    detail += "the table's normal column is not consistent with its own coefficient counts";
    outcome(ok, detail)
}

fn convergence() -> Outcome {
    let field = scenarios::analytic_field(InterpMode::Exact).unwrap();
    let steps = [0.02, 0.016, 0.01, 0.008, 0.0064, 0.005, 0.004, 0.002];
    let reference = IntegratorSpec {
        fp_tol: 1e-14,
        ..IntegratorSpec::new(Method::Gauss6, 0.0002)
    };
    let base = IntegratorSpec {
        fp_tol: 1e-16,
        ..IntegratorSpec::new(Method::Rk4, 1.0)
    };
    let report = convergence_study(&field, &bench_initial(), reference, &Method::ALL, &steps, base, 1).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for m in Method::ALL {
        let fit = fit_orders(&report, 0.002, 0.02, 1e-15, m);
        let (want, tol) = match m.order() {
            2 => (2.0, 0.3),
            4 => (4.0, 0.3),
            _ => (6.0, 0.5),
        };
        let pass = fit.slope.is_some_and(|s| (s - want).abs() <= tol);
        ok &= pass;
        detail += &format!(
            "{m}: slope {} over {:?} (want {want}±{tol})\n",
            fit.slope.map_or("-".into(), |s| format!("{s:.3}")),
            fit.steps
        );
    }
    outcome(ok, detail.trim_end())
}

fn symplecticity() -> Outcome {
    let field = scenarios::nonlinear_field().unwrap();
    let s = scenarios::nonlinear_probe();
    let defect = |m: Method, h: f64| {
        let it = Integrator::new(IntegratorSpec::new(m, h)).unwrap();
        symplecticity_defect(&it, &field, &mut EvalCtx::new(), &s, 1e-5).unwrap()
    };
    let mut ok = true;
    let mut detail = String::new();
    for m in [Method::Gauss4, Method::Gauss6, Method::Lie2, Method::Lie4] {
        let d = defect(m, 0.02);
        ok &= d < 1e-8;
        detail += &format!("{m}: defect {d:.3e} at 0.02\n");
    }
    let hs = [0.32, 0.16, 0.08, 0.04, 0.02];
    let ds: Vec<f64> = hs.iter().map(|&h| defect(Method::Rk4, h)).collect();
    let slope = order_fit(&hs, &ds).unwrap().slope;
    ok &= (slope - 5.0).abs() <= 0.5;
    let list: Vec<String> = ds.iter().map(|d| format!("{d:.2e}")).collect();
    detail += &format!("rk4 defects {} at {hs:?}: slope {slope:.3} (want 5±0.5)", list.join(" "));
    outcome(ok, detail)
}

fn gauge_equivalence() -> Outcome {
    let nd = scenarios::REALISTIC_ND;
    let fields: Vec<Field> = Gauge::ALL
        .iter()
        .map(|&g| Field::new(Arc::new(scenarios::realistic_table(g, nd).unwrap()), InterpMode::Exact).unwrap())
        .collect();
    let (z0, z1) = fields[0].z_range();
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (x, y, z) = (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), rng.gen_range(z0..z1));
        let b: Vec<[f64; 3]> = fields
            .iter()
            .map(|f| curl(f.table(), x, y, z, f.source()).unwrap())
            .collect();
        let norm = b[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for bi in &b[1..] {
            for c in 0..3 {
                worst = worst.max((bi[c] - b[0][c]).abs() / norm);
            }
        }
    }
    let curl_ok = worst <= 1e-9;
    let mut detail = format!("curl A over 100 probes, ND={nd}: max relative difference {worst:.2e} (want 1e-9)\n");

    let mut spread = [0.0f64; 2];
    let probes = [(0.0, 0.01), (0.0, 0.04)];
    detail += "residual curves, relative spread across gauges at r=0.01 / r=0.04 (want 1e-10):\n";
    for nd in (2..=16).step_by(2) {
        let tables: Vec<PotentialTable> = Gauge::ALL
            .iter()
            .map(|&g| scenarios::analytic_table(g, nd, scenarios::BENCH_DATA_DZ).unwrap())
            .collect();
        let mut at = [0.0f64; 2];
        for (p, &(x0, y0)) in probes.iter().enumerate() {
            let r: Vec<f64> = tables.iter().map(|t| maxwell_residual(t, x0, y0).unwrap()).collect();
            let hi = r.iter().copied().fold(f64::MIN, f64::max);
            let lo = r.iter().copied().fold(f64::MAX, f64::min);
            at[p] = (hi - lo) / r[0].abs();
            spread[p] = spread[p].max(at[p]);
        }
        detail += &format!("  ND={nd:>2}: {:.2e} / {:.2e}\n", at[0], at[1]);
    }
    let residual_ok = spread.iter().all(|&s| s <= 1e-10);
    detail += "max|A| in the denominator is reached in the fringe, where it depends on the gauge";
    outcome(curl_ok && residual_ok, detail)
}

fn spurious_current() -> Outcome {
    let pt = scenarios::analytic_table(Gauge::Af, 2, 0.002).unwrap();
    let profile = scenarios::analytic_profile();
    let mut rng = StdRng::seed_from_u64(11);
    let samples = [pt.value_series(), pt.derivative_series(1), pt.derivative_series(2)];
    let n = pt.z().len();
    let mut worst = 0.0f64;
    let mut worst_printed = 0.0f64;
    for p in 0..20 {
        // knots inside the two fringes, where the third derivative is non-zero
        let z_want = if p % 2 == 0 {
            rng.gen_range(0.1..0.8)
        } else {
            rng.gen_range(3.2..3.9)
        };
        let k = ((z_want - pt.z()[0]) / pt.dz()).round() as usize;
        let k = k.min(n - 1);
        let col: [Vec<f64>; 3] = std::array::from_fn(|d| samples[d].iter().map(|s| s[k]).collect());
        let (x, y) = (rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03));
        let cc = curl_curl_at(&pt, &col, x, y);
        let c3 = profile.derivative(3, pt.z()[k]);
        let want = [
            (x * x * x + 3.0 * x * y * y) * c3 / 6.0,
            -(y * y * y + 3.0 * y * x * x) * c3 / 6.0,
            0.0,
        ];
        let printed_x = (x * x * x - 3.0 * x * y * y) * c3 / 6.0;
        let norm = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = (0..3).map(|c| (cc[c] - want[c]).abs()).fold(0.0, f64::max) / norm;
        worst = worst.max(err);
        worst_printed = worst_printed.max((cc[0] - printed_x).abs() / norm);
    }
    outcome(
        worst <= 1e-6,
        format!(
            "20 probes: max relative difference {worst:.2e} against x-component (X³+3XY²)C'''/6 (want 1e-6)\n\
             with the x-component written as (X³−3XY²)C'''/6 the difference would be {worst_printed:.2e}"
        ),
    )
}

fn interpolation() -> Outcome {
    let s0 = bench_initial();
    let reference = IntegratorSpec {
        fp_tol: 1e-14,
        ..IntegratorSpec::new(Method::Gauss6, 0.0002)
    };
    let exact = scenarios::analytic_field(InterpMode::Exact).unwrap();
    let mut opts = TrackOptions::new(reference);
    opts.checkpoints = Checkpoints::EveryStep;
    let r = track(&Lattice::single(exact), &s0, &opts).unwrap();
    let ratio = 40;
    let spec = IntegratorSpec {
        fp_tol: 1e-16,
        ..IntegratorSpec::new(Method::Gauss6, 0.008)
    };
    let modes = [InterpMode::Exact, InterpMode::Spline, InterpMode::Interval, InterpMode::Nearest];
    let mut exit = Vec::new();
    let mut detail = String::new();
    for mode in modes {
        let f = scenarios::analytic_field(mode).unwrap();
        let mut o = TrackOptions::new(spec);
        o.checkpoints = Checkpoints::EveryStep;
        let run = track(&Lattice::single(f), &s0, &o).unwrap();
        let diff = |a: &ParticleState, b: &ParticleState| {
            a.coords().iter().zip(b.coords()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
        };
        let e = diff(&run.last, &r.last);
        let linf = run
            .checkpoints
            .iter()
            .enumerate()
            .map(|(k, c)| diff(&c.state, &r.checkpoints[(k + 1) * ratio - 1].state))
            .fold(0.0, f64::max);
        detail += &format!("{}: exit error {e:.3e}, trajectory max error {linf:.3e}\n", mode.name());
        exit.push(e);
    }
    let ordered = exit[1] <= exit[2] && exit[2] <= exit[3];
    let close = exit[1] <= 10.0 * exit[0];
    detail += &format!("spline ≤ interval ≤ nearest at exit: {ordered}; spline within 10× of exact: {close}");
    outcome(ordered && close, detail)
}

fn speedup() -> Outcome {
    let af = scenarios::realistic_field(Gauge::Af).unwrap();
    let hfc = scenarios::realistic_field(Gauge::Hfc).unwrap();
    let methods = [Method::Rk4, Method::Lie4];
    let steps = [0.02, 0.04, 0.08, 0.16];
    let rows = time_fields(&[("af", &af), ("hfc", &hfc)], &bench_initial(), &methods, &steps, 20, 5).unwrap();
    let ratios = speed_ratios(&rows_for(&rows, "hfc"), &rows_for(&rows, "af"), &methods);
    let mut ok = true;
    let mut detail = String::new();
    for (r, paper) in ratios.iter().zip([0.606, 0.557]) {
        ok &= (0.50..=0.75).contains(&r.mean);
        let per: Vec<String> = r.ratios.iter().map(|v| format!("{v:.3}")).collect();
        detail += &format!("{}: mean {:.3} per step [{}] (paper {paper}, band 0.50..0.75)\n", r.method, r.mean, per.join(" "));
    }
    outcome(ok, detail.trim_end())
}

fn stability() -> Outcome {
    let field = scenarios::analytic_field(InterpMode::Spline).unwrap();
    let lattice = Lattice::fodo(&field, 3000).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for m in Method::ALL {
        let r = track(&lattice, &bench_initial(), &TrackOptions::new(IntegratorSpec::new(m, 0.08))).unwrap();
        let plane = |i: usize| {
            let v: Vec<f64> = r.cell_max.iter().map(|c| c[i]).collect();
            detect_instability(&v).unwrap()
        };
        let (x, y) = (plane(0), plane(1));
        let pass = !r.lost() && r.cell_max.len() == 3000 && !x.unstable && !y.unstable;
        ok &= pass;
        detail += &format!(
            "{m}: lost {}, max|X| first/last quarter {:.4e}/{:.4e}, max|Y| {:.4e}/{:.4e}\n",
            r.lost(),
            x.first_quarter_max,
            x.last_quarter_max,
            y.first_quarter_max,
            y.last_quarter_max
        );
    }
    outcome(ok, detail.trim_end())
}

fn energy() -> Outcome {
    let field = scenarios::realistic_field(Gauge::Hfc).unwrap();
    let s0 = bench_initial();
    let block = 500;
    let runs = energy_study(&field, &s0, &Method::ALL, 0.08, 8000, block, 1).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for r in &runs {
        let flat = r.trend.is_some_and(|t| t.statistically_flat);
        ok &= flat && !r.lost;
        match r.trend {
            Some(t) => {
                detail += &format!(
                    "{}: K_X envelope slope {:.2e} ± {:.2e} per couple, relative change {:.2e}\n",
                    r.method, t.slope, t.slope_stderr, t.relative_change
                )
            }
            None => detail += &format!("{}: lost\n", r.method),
        }
    }
    let long = energy_study(&field, &s0, &[Method::Rk4, Method::Lie4], 0.08, 16000, block, 1).unwrap();
    let (_, t) = deviation(&long[0], &long[1], block).unwrap();
    ok &= t.statistically_flat;
    detail += &format!(
        "rk4 vs lie4 over 16000 couples: |ΔK_X| envelope slope {:.2e} ± {:.2e}, flat {}",
        t.slope, t.slope_stderr, t.statistically_flat
    );
    outcome(ok, detail)
}

fn fixed_point() -> Outcome {
    let field = scenarios::realistic_field(Gauge::Hfc).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for m in [Method::Midpoint, Method::Gauss4, Method::Gauss6] {
        let r = track(&Lattice::single(field.clone()), &bench_initial(), &TrackOptions::new(IntegratorSpec::new(m, 0.02)))
            .unwrap();
        let n = r.counters.fixed_point_iterations as f64 / r.counters.steps as f64;
        if m != Method::Midpoint {
            ok &= (5.0..=8.0).contains(&n);
        }
        detail += &format!("{m}: {n:.2} iterations per step at fp_tol 1e-14\n");
    }
    detail += "want 5..8 for the Gauss methods";
    outcome(ok, detail)
}
