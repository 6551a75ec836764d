//! Harmonic files to gradients to potentials to tracks, against independent references.

use std::fs;
use std::sync::Arc;

use quadtrack::field::Field;
use quadtrack::gauge::{build, Gauge};
use quadtrack::harmonics::{compute_gradients, load_harmonics, GradientTable, Kind};
use quadtrack::integrators::{IntegratorSpec, Method};
use quadtrack::profile::GradientProfile;
use quadtrack::sampling::InterpMode;
use quadtrack::scenarios::{self, REALISTIC_RADIUS};
use quadtrack::tracker::{track, Lattice, TrackOptions};
use quadtrack::Error;

fn write_harmonics(dir: &std::path::Path) -> std::path::PathBuf {
    let hs = scenarios::realistic_harmonics(0.02, 8).unwrap();
    let series = hs.series(Kind::Normal);
    let mut text = String::from("z");
    for m in series.keys() {
        text.push_str(&format!(",B{m}"));
    }
    text.push('\n');
    for (k, z) in hs.z().iter().enumerate() {
        text.push_str(&format!("{z:.16e}"));
        for s in series.values() {
            text.push_str(&format!(",{:.16e}", s[k]));
        }
        text.push('\n');
    }
    let path = dir.join("quad.csv");
    fs::write(&path, text).unwrap();
    fs::write(dir.join("quad.meta.json"), format!("{{\"radius_of_analysis\": {REALISTIC_RADIUS}}}")).unwrap();
    path
}

#[test]
fn inverted_gradients_match_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_harmonics(dir.path());
    let hs = load_harmonics(&path).unwrap().zero_pad(2.0).unwrap();
    let gt = compute_gradients(&hs, 3).unwrap();
    let profile = scenarios::realistic_profile().unwrap();
    for (m, kind) in profile.harmonics() {
        for n in 0..=3u32 {
            let got = gt.get(m, kind, n as usize).unwrap();
            let want: Vec<f64> = gt.z().iter().map(|&z| profile.value(m, kind, n, z)).collect();
            let peak = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // the step's fringe is resolved by only ~45 samples, so accuracy drops per order
            let tol = [2e-4, 2e-3, 1.5e-2, 5e-2][n as usize];
            assert!(err < tol * peak, "m={m} n={n}: {:e} of peak", err / peak);
        }
    }
}

#[test]
fn reconstructed_field_tracks_like_the_analytic_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_harmonics(dir.path());
    let hs = load_harmonics(&path).unwrap();
    let nd = 6;
    let measured = compute_gradients(&hs.zero_pad(2.0).unwrap(), nd + 2).unwrap();
    let exact = scenarios::realistic_gradients(nd).unwrap();
    let scale = scenarios::reference_potential_scale().unwrap();
    let spec = IntegratorSpec::new(Method::Gauss4, 0.04);
    let s0 = scenarios::bench_initial();
    let run = |gt: &GradientTable| {
        let f = Field::new(Arc::new(build(gt, Gauge::Hfc, nd, scale).unwrap()), InterpMode::Spline).unwrap();
        track(&Lattice::single(f), &s0, &TrackOptions::new(spec)).unwrap().last
    };
    let (a, b) = (run(&measured), run(&exact));
    // the padded table ends two units later: free drift after the magnet
    assert!((a.z - 6.0).abs() < 1e-12 && (b.z - 4.0).abs() < 1e-12);
    assert!((a.x - (b.x + 2.0 * b.px)).abs() < 1e-6 * b.x.abs(), "{a:?} {b:?}");
    assert!((a.y - (b.y + 2.0 * b.py)).abs() < 1e-6 * b.y.abs(), "{a:?} {b:?}");
    assert!((a.px - b.px).abs() < 1e-4 * b.px.abs(), "{a:?} {b:?}");
}

#[test]
fn missing_sidecar_and_bad_rows_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    fs::write(&path, "z,B2\n0,1\n0.1,2\n0.2,x\n").unwrap();
    match load_harmonics(&path) {
        Err(Error::Io { path: p, .. }) => assert!(p.ends_with("h.meta.json")),
        other => panic!("{other:?}"),
    }
    match quadtrack::harmonics::load_harmonics_with(&path, Some(0.05), true) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn body_field_only_table_is_gauge_independent_at_exit() {
    // the potential vanishes at the magnet ends, so canonical exit states agree
    let s0 = scenarios::bench_initial();
    let spec = IntegratorSpec::new(Method::Gauss6, 0.01);
    let exits: Vec<_> = Gauge::ALL
        .iter()
        .map(|&g| {
            let t = scenarios::analytic_table(g, 2, 0.002).unwrap();
            let f = Field::new(Arc::new(t), InterpMode::Exact).unwrap();
            track(&Lattice::single(f), &s0, &TrackOptions::new(spec)).unwrap().last.coords()
        })
        .collect();
    for e in &exits[1..] {
        for i in 0..4 {
            assert!((e[i] - exits[0][i]).abs() < 1e-12 * exits[0][i].abs().max(1e-6), "{exits:?}");
        }
    }
}
