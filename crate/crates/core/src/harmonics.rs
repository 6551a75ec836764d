//! Sampled field harmonics and their inversion into generalized gradients.
//!
//! The radial field harmonics `B_m(R, z)` (normal) and `A_m(R, z)` (skew) are
//! measured on a cylinder of radius `R`. Each harmonic determines the on-axis
//! functions `C_m^[n](z)` through a spectral division by `I_m'(R k)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::GradientProfile;

/// Relative endpoint magnitude above which a harmonic is reported as not decayed.
pub const ENDPOINT_DECAY_THRESHOLD: f64 = 1e-10;

const GRID_TOLERANCE: f64 = 1e-12;

/// Normal (`s`, paired with `sin mφ` in the scalar potential) or skew (`c`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    Normal,
    Skew,
}

impl Kind {
    pub fn tag(self) -> char {
        match self {
            Kind::Normal => 's',
            Kind::Skew => 'c',
        }
    }
}

/// True when `m` belongs to the quadrupole-allowed set `m = 2(2j+1)`.
pub fn is_quadrupole_order(m: u32) -> bool {
    m >= 2 && m % 4 == 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSet {
    radius: f64,
    z: Vec<f64>,
    dz: f64,
    normal: BTreeMap<u32, Vec<f64>>,
    skew: BTreeMap<u32, Vec<f64>>,
}

/// Sidecar metadata stored next to a harmonic CSV as `<stem>.meta.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicMeta {
    pub radius_of_analysis: f64,
    #[serde(default)]
    pub units: Option<String>,
}

fn check_uniform(z: &[f64]) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::invalid("z grid needs at least two samples"));
    }
    let dz = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
    if !(dz > 0.0) {
        return Err(Error::invalid("z grid must be strictly increasing"));
    }
    for (k, w) in z.windows(2).enumerate() {
        let step = w[1] - w[0];
        let tol = GRID_TOLERANCE * dz.max(w[0].abs()).max(w[1].abs());
        if !(step > 0.0) || (step - dz).abs() > tol.max(GRID_TOLERANCE * dz) {
            return Err(Error::invalid(format!(
                "non-uniform z grid at sample {}: spacing {step} differs from {dz}",
                k + 1
            )));
        }
    }
    Ok(dz)
}

impl HarmonicSet {
    /// Builds a validated set. With `strict`, only quadrupole-allowed orders are accepted.
    pub fn new(
        radius: f64,
        z: Vec<f64>,
        normal: BTreeMap<u32, Vec<f64>>,
        skew: BTreeMap<u32, Vec<f64>>,
        strict: bool,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius of analysis must be positive"));
        }
        let dz = check_uniform(&z)?;
        for (kind, map) in [(Kind::Normal, &normal), (Kind::Skew, &skew)] {
            for (&m, series) in map {
                if m == 0 || (strict && !is_quadrupole_order(m)) {
                    return Err(Error::invalid(format!(
                        "harmonic order {m} ({kind:?}) is not allowed for a quadrupole"
                    )));
                }
                if series.len() != z.len() {
                    return Err(Error::invalid(format!(
                        "harmonic {m} ({kind:?}) has {} samples, grid has {}",
                        series.len(),
                        z.len()
                    )));
                }
                if series.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("harmonic {m} has non-finite samples")));
                }
            }
        }
        Ok(Self {
            radius,
            z,
            dz,
            normal,
            skew,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normal.is_empty() && self.skew.is_empty()
    }

    pub fn series(&self, kind: Kind) -> &BTreeMap<u32, Vec<f64>> {
        match kind {
            Kind::Normal => &self.normal,
            Kind::Skew => &self.skew,
        }
    }

    /// Extends the grid by `pad_len` on both sides with exact zeros.
    pub fn zero_pad(&self, pad_len: f64) -> Result<Self> {
        if !(pad_len >= 0.0) {
            return Err(Error::invalid(format!("negative pad length {pad_len}")));
        }
        let ratio = pad_len / self.dz;
        let n_pad = ratio.round();
        if (ratio - n_pad).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "pad length {pad_len} is not a multiple of the grid spacing {}",
                self.dz
            )));
        }
        let n_pad = n_pad as usize;
        if n_pad == 0 {
            return Ok(self.clone());
        }
        let z0 = self.z[0];
        let zn = self.z[self.z.len() - 1];
        let mut z = Vec::with_capacity(self.z.len() + 2 * n_pad);
        z.extend((0..n_pad).map(|k| z0 - (n_pad - k) as f64 * self.dz));
        z.extend_from_slice(&self.z);
        z.extend((1..=n_pad).map(|k| zn + k as f64 * self.dz));
        let pad = |map: &BTreeMap<u32, Vec<f64>>| {
            map.iter()
                .map(|(&m, s)| {
                    let mut v = vec![0.0; n_pad];
                    v.extend_from_slice(s);
                    v.extend(std::iter::repeat(0.0).take(n_pad));
                    (m, v)
                })
                .collect()
        };
        Ok(Self {
            radius: self.radius,
            dz: self.dz,
            normal: pad(&self.normal),
            skew: pad(&self.skew),
            z,
        })
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Reads a harmonic CSV and its `.meta.json` sidecar.
pub fn load_harmonics(path: &Path) -> Result<HarmonicSet> {
    load_harmonics_with(path, None, true)
}

/// Like [`load_harmonics`]; `radius` overrides (or replaces a missing) sidecar.
pub fn load_harmonics_with(path: &Path, radius: Option<f64>, strict: bool) -> Result<HarmonicSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let radius = match radius {
        Some(r) => r,
        None => {
            let mp = meta_path(path);
            let meta_text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
            let meta: HarmonicMeta = serde_json::from_str(&meta_text)?;
            meta.radius_of_analysis
        }
    };
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first().map(|c| c.eq_ignore_ascii_case("z")) != Some(true) {
        return Err(parse_err(hline + 1, "first column must be `z`".into()));
    }
    let mut targets = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for c in &cols[1..] {
        let (kind, rest) = match c.chars().next() {
            Some('B') => (Kind::Normal, &c[1..]),
            Some('A') => (Kind::Skew, &c[1..]),
            _ => return Err(parse_err(hline + 1, format!("unrecognized column `{c}`"))),
        };
        let m: u32 = rest
            .parse()
            .map_err(|_| parse_err(hline + 1, format!("bad harmonic order in column `{c}`")))?;
        if !seen.insert((kind, m)) {
            return Err(parse_err(hline + 1, format!("duplicate harmonic column `{c}`")));
        }
        targets.push((kind, m));
    }

    let mut z = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); targets.len()];
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                ln + 1,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let mut vals = fields.iter().map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_err(ln + 1, format!("cannot parse `{f}` as a number")))
        });
        z.push(vals.next().unwrap()?);
        for (col, v) in data.iter_mut().zip(vals) {
            col.push(v?);
        }
        if let Some(w) = z.len().checked_sub(2).map(|i| (z[i], z[i + 1])) {
            if !(w.1 > w.0) {
                return Err(parse_err(ln + 1, "z column must be strictly increasing".into()));
            }
        }
    }
    if let Err(Error::Invalid(msg)) = check_uniform(&z) {
        // locate the offending row for the message
        let line = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .nth(1 + msg_sample_index(&msg).unwrap_or(0))
            .map(|(i, _)| i + 1)
            .unwrap_or(1);
        return Err(parse_err(line, msg));
    }
    let mut normal = BTreeMap::new();
    let mut skew = BTreeMap::new();
    for ((kind, m), series) in targets.into_iter().zip(data) {
        match kind {
            Kind::Normal => normal.insert(m, series),
            Kind::Skew => skew.insert(m, series),
        };
    }
    HarmonicSet::new(radius, z, normal, skew, strict)
}

fn msg_sample_index(msg: &str) -> Option<usize> {
    let rest = msg.split("at sample ").nth(1)?;
    rest.split(':').next()?.trim().parse().ok()
}

/// `I_m(x) / x^m`-style even series used by both the Bessel derivative and
/// the spectral factor: returns `g(x)` with `I_m'(x) = x^(m-1) g(x)`.
fn bessel_ip_reduced(m: u32, x: f64) -> f64 {
    let mf = m as f64;
    let q = 0.25 * x * x;
    // j = 0 term: m / (2^m m!)
    let mut base = 1.0;
    for k in 1..=m {
        base *= 2.0 * k as f64;
    }
    let mut t = 1.0 / base; // (1/2^m m!) * q^j / (j! (m+j)!/m!)
    let mut sum = mf * t;
    let mut j = 0u32;
    loop {
        j += 1;
        t *= q / (j as f64 * (mf + j as f64));
        let term = (mf + 2.0 * j as f64) * t;
        sum += term;
        if !sum.is_finite() {
            return f64::INFINITY;
        }
        if term <= 1e-17 * sum && (j as f64) > x.abs() {
            break;
        }
        if j > 5000 {
            break;
        }
    }
    sum
}

/// Derivative of the modified Bessel function of the first kind, `I_m'(x)`, for `m >= 1`.
pub fn bessel_i_derivative(m: u32, x: f64) -> f64 {
    assert!(m >= 1, "bessel_i_derivative requires m >= 1");
    let g = bessel_ip_reduced(m, x);
    if m == 1 {
        g
    } else {
        x.powi(m as i32 - 1) * g
    }
}

/// Spectral multiplier `(ik)^n k^(m-1) / (2^m m! I_m'(R k))` written without the
/// removable singularity at `k = 0`.
fn spectral_factor(m: u32, n: u32, radius: f64, k: f64) -> Complex64 {
    let mut denom = radius.powi(m as i32 - 1) * bessel_ip_reduced(m, radius * k);
    for j in 1..=m {
        denom *= 2.0 * j as f64;
    }
    if !denom.is_finite() {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, k).powu(n) / denom
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientSeries {
    pub m: u32,
    pub kind: Kind,
    /// `orders[n][k]` is `C_m^[n](z_k)`.
    pub orders: Vec<Vec<f64>>,
}

/// Generalized gradients `C_{m,s/c}^[n](z_k)` for `n <= max_order`.
#[derive(Clone)]
pub struct GradientTable {
    z: Vec<f64>,
    dz: f64,
    max_order: usize,
    series: Vec<GradientSeries>,
    profile: Option<Arc<dyn GradientProfile>>,
    warnings: Vec<String>,
}

impl std::fmt::Debug for GradientTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradientTable")
            .field("len", &self.z.len())
            .field("dz", &self.dz)
            .field("max_order", &self.max_order)
            .field("harmonics", &self.keys())
            .field("analytic", &self.profile.is_some())
            .finish()
    }
}

impl GradientTable {
    pub fn from_series(z: Vec<f64>, max_order: usize, mut series: Vec<GradientSeries>) -> Result<Self> {
        let dz = check_uniform(&z)?;
        for s in &series {
            if s.orders.len() != max_order + 1 || s.orders.iter().any(|o| o.len() != z.len()) {
                return Err(Error::invalid(format!(
                    "gradient series for m={} has inconsistent shape",
                    s.m
                )));
            }
        }
        series.sort_by_key(|s| (s.m, s.kind));
        for w in series.windows(2) {
            if (w[0].m, w[0].kind) == (w[1].m, w[1].kind) {
                return Err(Error::invalid(format!("duplicate gradient series m={}", w[0].m)));
            }
        }
        Ok(Self {
            z,
            dz,
            max_order,
            series,
            profile: None,
            warnings: Vec::new(),
        })
    }

    /// Samples an analytic profile on `z` for every harmonic it provides.
    pub fn from_profile(profile: Arc<dyn GradientProfile>, z: Vec<f64>, max_order: usize) -> Result<Self> {
        let series = profile
            .harmonics()
            .into_iter()
            .map(|(m, kind)| GradientSeries {
                m,
                kind,
                orders: (0..=max_order)
                    .map(|n| z.iter().map(|&zz| profile.value(m, kind, n as u32, zz)).collect())
                    .collect(),
            })
            .collect();
        let mut table = Self::from_series(z, max_order, series)?;
        table.profile = Some(profile);
        Ok(table)
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn series(&self) -> &[GradientSeries] {
        &self.series
    }

    pub fn keys(&self) -> Vec<(u32, Kind)> {
        self.series.iter().map(|s| (s.m, s.kind)).collect()
    }

    pub fn get(&self, m: u32, kind: Kind, order: usize) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.m == m && s.kind == kind)
            .and_then(|s| s.orders.get(order))
            .map(Vec::as_slice)
    }

    pub fn profile(&self) -> Option<&Arc<dyn GradientProfile>> {
        self.profile.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// CSV dump with columns `z,C<m>_<s|c>_<n>,...`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z");
        for s in &self.series {
            for n in 0..=self.max_order {
                let _ = write!(out, ",C{}_{}_{}", s.m, s.kind.tag(), n);
            }
        }
        out.push('\n');
        for (k, z) in self.z.iter().enumerate() {
            let _ = write!(out, "{z:.16e}");
            for s in &self.series {
                for o in &s.orders {
                    let _ = write!(out, ",{:.16e}", o[k]);
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses a dump written by [`GradientTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::invalid("empty gradient dump"))?;
        let cols: Vec<&str> = header.split(',').collect();
        let mut keys = Vec::new();
        for c in &cols[1..] {
            let parts: Vec<&str> = c.trim_start_matches('C').split('_').collect();
            let bad = || Error::invalid(format!("bad gradient column `{c}`"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let m: u32 = parts[0].parse().map_err(|_| bad())?;
            let kind = match parts[1] {
                "s" => Kind::Normal,
                "c" => Kind::Skew,
                _ => return Err(bad()),
            };
            let n: usize = parts[2].parse().map_err(|_| bad())?;
            keys.push((m, kind, n));
        }
        let max_order = keys.iter().map(|k| k.2).max().unwrap_or(0);
        let mut z = Vec::new();
        let mut cols_data: Vec<Vec<f64>> = vec![Vec::new(); keys.len()];
        for line in lines {
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse()).collect();
            let vals = vals.map_err(|_| Error::invalid(format!("bad gradient row `{line}`")))?;
            if vals.len() != cols.len() {
                return Err(Error::invalid("gradient row length mismatch"));
            }
            z.push(vals[0]);
            for (c, v) in cols_data.iter_mut().zip(&vals[1..]) {
                c.push(*v);
            }
        }
        let mut map: BTreeMap<(u32, Kind), Vec<Vec<f64>>> = BTreeMap::new();
        for ((m, kind, n), data) in keys.into_iter().zip(cols_data) {
            let e = map.entry((m, kind)).or_insert_with(|| vec![Vec::new(); max_order + 1]);
            e[n] = data;
        }
        let series = map
            .into_iter()
            .map(|((m, kind), orders)| GradientSeries { m, kind, orders })
            .collect();
        Self::from_series(z, max_order, series)
    }
}

/// Inverts every harmonic of `hs` into gradients of orders `0..=nd`.
///
/// Uses the periodic DFT on the (already padded) grid. Harmonics that do not
/// decay at both grid ends are reported in [`GradientTable::warnings`].
pub fn compute_gradients(hs: &HarmonicSet, nd: usize) -> Result<GradientTable> {
    if hs.is_empty() {
        return Err(Error::invalid("harmonic set is empty"));
    }
    let n = hs.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let span = n as f64 * hs.dz();
    let wavenumbers: Vec<f64> = (0..n)
        .map(|j| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * std::f64::consts::PI * jj / span
        })
        .collect();

    let mut warnings = Vec::new();
    let mut series = Vec::new();
    for kind in [Kind::Normal, Kind::Skew] {
        for (&m, samples) in hs.series(kind) {
            let peak = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let ends = samples[0].abs().max(samples[n - 1].abs());
            if peak > 0.0 && ends > ENDPOINT_DECAY_THRESHOLD * peak {
                warnings.push(format!(
                    "harmonic {m} ({kind:?}) does not decay at the grid ends ({:.3e} relative); pad the input",
                    ends / peak
                ));
            }
            let mut spectrum: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fwd.process(&mut spectrum);
            let mut orders = Vec::with_capacity(nd + 1);
            for order in 0..=nd {
                let mut buf: Vec<Complex64> = spectrum
                    .iter()
                    .zip(&wavenumbers)
                    .map(|(s, &k)| s * spectral_factor(m, order as u32, hs.radius(), k))
                    .collect();
                if n % 2 == 0 && order % 2 == 1 {
                    buf[n / 2] = Complex64::new(0.0, 0.0);
                }
                inv.process(&mut buf);
                let scale = 1.0 / n as f64;
                orders.push(buf.iter().map(|c| c.re * scale).collect());
            }
            series.push(GradientSeries { m, kind, orders });
        }
    }
    let mut table = GradientTable::from_series(hs.z().to_vec(), nd, series)?;
    table.warnings = warnings;
    Ok(table)
}

/// Forward model: radial harmonic at radius `r` from gradients of orders `0..=max_order`.
///
/// `B_m(r, z) = Σ_ℓ (-1)^ℓ m! (2ℓ+m) / (4^ℓ ℓ! (ℓ+m)!) r^(2ℓ+m-1) C_m^[2ℓ](z)`.
pub fn harmonic_from_gradients(m: u32, r: f64, orders: &[Vec<f64>]) -> Vec<f64> {
    let len = orders.first().map_or(0, Vec::len);
    let mut out = vec![0.0; len];
    let mut coeff = m as f64 * r.powi(m as i32 - 1); // ℓ = 0: m! m / m! = m
    for (l, series) in orders.iter().step_by(2).enumerate() {
        if l > 0 {
            let lf = l as f64;
            let mf = m as f64;
            // ratio of consecutive ℓ terms
            coeff *= -(2.0 * lf + mf) / (2.0 * lf + mf - 2.0) * r * r / (4.0 * lf * (lf + mf));
        }
        for (o, v) in out.iter_mut().zip(series) {
            *o += coeff * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_ip(m: u32, x: f64, terms: usize) -> f64 {
        // direct term formula, independent of the recurrence
        let fact = |n: u32| (1..=n).map(|v| v as f64).product::<f64>();
        (0..terms as u32)
            .map(|j| {
                (m + 2 * j) as f64 * (x / 2.0).powi((m + 2 * j) as i32 - 1) / (2.0 * fact(j) * fact(m + j))
            })
            .sum()
    }

    #[test]
    fn bessel_derivative_small_values() {
        assert_eq!(bessel_i_derivative(2, 0.0), 0.0);
        assert_eq!(bessel_i_derivative(1, 0.0), 0.5);
        // I_2'(1) = (I_1(1) + I_3(1)) / 2
        let expected = 0.5 * (0.565_159_103_992_485_1 + 0.022_168_424_924_331_9);
        let got = bessel_i_derivative(2, 1.0);
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        assert!((got - series_ip(2, 1.0, 40)).abs() < 1e-15);
    }

    #[test]
    fn bessel_derivative_matches_term_series() {
        for m in [1u32, 2, 6, 10, 14] {
            for x in [-3.0, 0.3, 2.5, 7.85, 12.0] {
                let a = bessel_i_derivative(m, x);
                let b = series_ip(m, x, 80);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "m={m} x={x}: {a} {b}");
            }
        }
    }

    fn grid(n: usize, dz: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dz).collect()
    }

    #[test]
    fn zero_pad_construction() {
        let mut normal = BTreeMap::new();
        normal.insert(2, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let hs = HarmonicSet::new(0.05, grid(5, 0.1), normal, BTreeMap::new(), true).unwrap();
        assert_eq!(hs.zero_pad(0.0).unwrap(), hs);
        let p = hs.zero_pad(0.2).unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(p.series(Kind::Normal)[&2], vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0]);
        assert_eq!(&p.z()[2..7], hs.z());
        assert!(hs.zero_pad(-0.1).is_err());
        assert!(hs.zero_pad(0.15).is_err());
    }

    #[test]
    fn rejects_bad_orders_and_lengths() {
        let mut normal = BTreeMap::new();
        normal.insert(4, vec![0.0; 3]);
        assert!(HarmonicSet::new(0.05, grid(3, 0.1), normal.clone(), BTreeMap::new(), true).is_err());
        assert!(HarmonicSet::new(0.05, grid(3, 0.1), normal, BTreeMap::new(), false).is_ok());
        let mut short = BTreeMap::new();
        short.insert(2, vec![0.0; 2]);
        assert!(HarmonicSet::new(0.05, grid(3, 0.1), short, BTreeMap::new(), true).is_err());
    }

    #[test]
    fn zero_harmonics_give_zero_gradients() {
        let mut normal = BTreeMap::new();
        normal.insert(2, vec![0.0; 16]);
        let hs = HarmonicSet::new(0.05, grid(16, 0.1), normal, BTreeMap::new(), true).unwrap();
        let gt = compute_gradients(&hs, 4).unwrap();
        for n in 0..=4 {
            assert!(gt.get(2, Kind::Normal, n).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_mode_closed_form() {
        let n = 64;
        let lambda = 1.6;
        let dz = lambda / 8.0; // 8 periods over the grid
        let r = 0.05;
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let z = grid(n, dz);
        let mut normal = BTreeMap::new();
        normal.insert(2, z.iter().map(|z| (k0 * z).cos()).collect());
        let hs = HarmonicSet::new(r, z.clone(), normal, BTreeMap::new(), true).unwrap();
        let gt = compute_gradients(&hs, 1).unwrap();
        let amp = k0 / (4.0 * 2.0 * bessel_i_derivative(2, r * k0));
        for (k, zz) in z.iter().enumerate() {
            let c0 = gt.get(2, Kind::Normal, 0).unwrap()[k];
            let c1 = gt.get(2, Kind::Normal, 1).unwrap()[k];
            assert!((c0 - amp * (k0 * zz).cos()).abs() < 1e-12 * amp);
            assert!((c1 + amp * k0 * (k0 * zz).sin()).abs() < 1e-11 * amp * k0);
        }
    }

    #[test]
    fn csv_dump_round_trip() {
        let mut normal = BTreeMap::new();
        normal.insert(2, (0..12).map(|k| (k as f64 * 0.3).sin()).collect());
        let hs = HarmonicSet::new(0.05, grid(12, 0.1), normal, BTreeMap::new(), true).unwrap();
        let gt = compute_gradients(&hs, 2).unwrap();
        let back = GradientTable::from_csv(&gt.to_csv()).unwrap();
        assert_eq!(back.series(), gt.series());
        assert_eq!(back.z(), gt.z());
    }
}
