//! Gauge-specific vector potentials as Cartesian monomial expansions.
//!
//! A [`PotentialTable`] stores, for each component, terms `a_{i,j}(z) x^i y^j`
//! with the coefficient sampled on the gradient grid together with its first
//! and second z-derivatives.

pub mod series;
pub mod symbolic;

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{GradientTable, Kind};
use crate::profile::GradientProfile;
use crate::sampling::{spline_derivative_samples, CoefficientSource};

pub use symbolic::GradKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// Azimuthal-free, `A_φ = 0`.
    Af,
    /// Symmetric Coulomb, `∇·A = 0`.
    Coulomb,
    /// Horizontal-free Coulomb, `A_x = 0`.
    Hfc,
}

impl Gauge {
    pub const ALL: [Gauge; 3] = [Gauge::Af, Gauge::Coulomb, Gauge::Hfc];

    pub fn name(self) -> &'static str {
        match self {
            Gauge::Af => "af",
            Gauge::Coulomb => "coulomb",
            Gauge::Hfc => "hfc",
        }
    }
}

impl std::fmt::Display for Gauge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Gauge::ALL
            .into_iter()
            .find(|g| g.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown gauge `{s}`")))
    }
}

/// One monomial `a(z) x^i y^j`; `expr` lists the (scaled) gradient combination of `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub i: u32,
    pub j: u32,
    pub expr: Vec<(GradKey, f64)>,
}

/// Build-time record of how a table was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gauge: Gauge,
    pub nd: u32,
    pub harmonics: Vec<(u32, Kind)>,
    pub scale: f64,
    /// Per derivative order 1 and 2: true when the z-derivative samples come
    /// from spline differentiation instead of higher gradient orders.
    pub derivative_fallback: [bool; 2],
    pub counts: [usize; 3],
}

#[derive(Clone)]
pub struct PotentialTable {
    provenance: Provenance,
    z: Vec<f64>,
    dz: f64,
    components: [Vec<Term>; 3],
    offsets: [usize; 4],
    // samples[d][t][k]: d-th z-derivative of term t at z_k
    samples: [Vec<Vec<f64>>; 3],
    profile: Option<Arc<dyn GradientProfile>>,
    max_degree: u32,
}

impl std::fmt::Debug for PotentialTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialTable")
            .field("provenance", &self.provenance)
            .field("knots", &self.z.len())
            .finish()
    }
}

/// Symbolic components for a gauge, truncated at `nd`.
pub fn symbolic_components(gauge: Gauge, harmonics: &[(u32, Kind)], nd: u32) -> series::Components {
    match gauge {
        Gauge::Af => series::azimuthal_free(harmonics, nd),
        Gauge::Coulomb => series::coulomb(harmonics, nd),
        Gauge::Hfc => series::horizontal_free(harmonics, nd).0,
    }
}

/// Builds `gauge` from `gt` with truncation order `nd` and coefficient scale `scale`.
pub fn build(gt: &GradientTable, gauge: Gauge, nd: usize, scale: f64) -> Result<PotentialTable> {
    if gt.series().is_empty() {
        return Err(Error::invalid("gradient table is empty"));
    }
    if nd > gt.max_order() {
        return Err(Error::invalid(format!(
            "truncation order {nd} exceeds the gradient table's maximum order {}",
            gt.max_order()
        )));
    }
    if !(scale.is_finite() && scale != 0.0) {
        return Err(Error::invalid("coefficient scale must be finite and non-zero"));
    }
    let harmonics = gt.keys();
    let symbolic = symbolic_components(gauge, &harmonics, nd as u32);
    let components: [Vec<Term>; 3] = std::array::from_fn(|c| {
        symbolic[c]
            .terms()
            .map(|(&(i, j), e)| Term {
                i,
                j,
                expr: e.to_f64(scale),
            })
            .collect()
    });
    let counts = [components[0].len(), components[1].len(), components[2].len()];
    let offsets = [0, counts[0], counts[0] + counts[1], counts[0] + counts[1] + counts[2]];
    let n = gt.len();
    let profile = gt.profile().cloned();

    let lookup = |key: &GradKey, shift: usize| -> Option<Vec<f64>> {
        let order = key.order as usize + shift;
        if let Some(s) = gt.get(key.m, key.kind, order) {
            return Some(s.to_vec());
        }
        profile
            .as_ref()
            .map(|p| gt.z().iter().map(|&z| p.value(key.m, key.kind, order as u32, z)).collect())
    };

    let mut samples: [Vec<Vec<f64>>; 3] = Default::default();
    let mut fallback = [false; 2];
    for term in components.iter().flatten() {
        for d in 0..3 {
            let mut acc = vec![0.0; n];
            let mut ok = true;
            for (key, c) in &term.expr {
                match lookup(key, d) {
                    Some(s) => {
                        for (a, v) in acc.iter_mut().zip(&s) {
                            *a += c * v;
                        }
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                fallback[d - 1] = true;
                acc = spline_derivative_samples(&samples[0][samples[d].len()], gt.dz(), d)?;
            }
            samples[d].push(acc);
        }
    }
    let max_degree = components.iter().flatten().map(|t| t.i.max(t.j)).max().unwrap_or(0);
    Ok(PotentialTable {
        provenance: Provenance {
            gauge,
            nd: nd as u32,
            harmonics,
            scale,
            derivative_fallback: fallback,
            counts,
        },
        z: gt.z().to_vec(),
        dz: gt.dz(),
        components,
        offsets,
        samples,
        profile,
        max_degree,
    })
}

/// Azimuthal-free table truncated at the gradient table's maximum order, unscaled.
pub fn build_af(gt: &GradientTable) -> Result<PotentialTable> {
    build(gt, Gauge::Af, gt.max_order(), 1.0)
}

pub fn build_coulomb(gt: &GradientTable) -> Result<PotentialTable> {
    build(gt, Gauge::Coulomb, gt.max_order(), 1.0)
}

pub fn build_hfc(gt: &GradientTable) -> Result<PotentialTable> {
    build(gt, Gauge::Hfc, gt.max_order(), 1.0)
}

impl PotentialTable {
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn gauge(&self) -> Gauge {
        self.provenance.gauge
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// z-extent of the table.
    pub fn span(&self) -> f64 {
        self.z[self.z.len() - 1] - self.z[0]
    }

    pub fn profile(&self) -> Option<&Arc<dyn GradientProfile>> {
        self.profile.as_ref()
    }

    /// Terms of component `c` (0 = x, 1 = y, 2 = z).
    pub fn terms(&self, c: usize) -> &[Term] {
        &self.components[c]
    }

    pub fn all_terms(&self) -> impl Iterator<Item = &Term> {
        self.components.iter().flatten()
    }

    /// Index range of component `c` in the global term order.
    pub fn range(&self, c: usize) -> std::ops::Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn n_terms(&self) -> usize {
        self.offsets[3]
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub(crate) fn locate_term(&self, t: usize) -> (char, usize) {
        let c = (0..3).find(|&c| self.range(c).contains(&t)).unwrap_or(2);
        (['x', 'y', 'z'][c], t - self.offsets[c])
    }

    /// Coefficient samples per global term.
    pub fn value_series(&self) -> &[Vec<f64>] {
        &self.samples[0]
    }

    /// `order`-th z-derivative samples per global term (`order` ∈ {1, 2}).
    pub fn derivative_series(&self, order: usize) -> &[Vec<f64>] {
        &self.samples[order]
    }

    pub fn derivative_fallback(&self, order: usize) -> bool {
        self.provenance.derivative_fallback[order - 1]
    }

    /// Per-component and total term counts.
    pub fn count_coefficients(&self) -> ([usize; 3], usize) {
        let c = self.provenance.counts;
        (c, c.iter().sum())
    }

    /// CSV rows `component,i,j,z,a,a_prime`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,i,j,z,a,a_prime\n");
        for (c, name) in ['x', 'y', 'z'].iter().enumerate() {
            for (local, term) in self.components[c].iter().enumerate() {
                let t = self.offsets[c] + local;
                for (k, z) in self.z.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{name},{},{},{z:.16e},{:.16e},{:.16e}",
                        term.i, term.j, self.samples[0][t][k], self.samples[1][t][k]
                    );
                }
            }
        }
        out
    }

    pub fn provenance_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.provenance)?)
    }
}

/// One `L_{m,kind}^[2ℓ]` coefficient of the horizontal-free gauge function.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaEntry {
    pub m: u32,
    pub kind: Kind,
    pub l: u32,
    pub expr: Vec<(GradKey, f64)>,
    /// `L^[2ℓ](z_k)`.
    pub values: Vec<f64>,
    /// `L^[2ℓ+1](z_k)`.
    pub dz_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaTable {
    pub nd: u32,
    pub entries: Vec<LambdaEntry>,
}

impl LambdaTable {
    pub fn get(&self, m: u32, kind: Kind, l: u32) -> Option<&LambdaEntry> {
        self.entries.iter().find(|e| e.m == m && e.kind == kind && e.l == l)
    }
}

/// Coefficients of the gauge function `λ` taking the symmetric Coulomb gauge
/// to the horizontal-free one, truncated at the table's maximum order.
pub fn build_lambda(gt: &GradientTable) -> LambdaTable {
    let nd = gt.max_order() as u32;
    let harmonics = gt.keys();
    let sample = |expr: &[(GradKey, f64)], shift: u32| -> Vec<f64> {
        let mut acc = vec![0.0; gt.len()];
        for (k, c) in expr {
            let order = (k.order + shift) as usize;
            let series: Vec<f64> = match (gt.get(k.m, k.kind, order), gt.profile()) {
                (Some(s), _) => s.to_vec(),
                (None, Some(p)) => gt.z().iter().map(|&z| p.value(k.m, k.kind, order as u32, z)).collect(),
                (None, None) => continue,
            };
            for (a, v) in acc.iter_mut().zip(series) {
                *a += c * v;
            }
        }
        acc
    };
    let mut entries = Vec::new();
    for kind in [Kind::Normal, Kind::Skew] {
        for (m, base) in series::lambda_coefficients(&harmonics, kind, nd).iter().enumerate() {
            let mut l = 0;
            loop {
                let e = base.shifted(2 * l).truncated(nd);
                if e.is_zero() {
                    break;
                }
                let expr = e.to_f64(1.0);
                entries.push(LambdaEntry {
                    m: m as u32,
                    kind,
                    l,
                    values: sample(&expr, 0),
                    dz_values: sample(&expr, 1),
                    expr,
                });
                l += 1;
            }
        }
    }
    LambdaTable { nd, entries }
}

/// Potential components and their first partial derivatives at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PotentialValues {
    pub a: [f64; 3],
    pub dx: [f64; 3],
    pub dy: [f64; 3],
    pub dz: [f64; 3],
}

/// `Σ c_t ∂^{nx}_x ∂^{ny}_y (x^i y^j)` over `terms`.
pub fn eval_monomials(terms: &[Term], coeffs: &[f64], x: f64, y: f64, nx: u32, ny: u32) -> f64 {
    terms
        .iter()
        .zip(coeffs)
        .map(|(t, c)| {
            if t.i < nx || t.j < ny {
                return 0.0;
            }
            let fx: f64 = (0..nx).map(|k| (t.i - k) as f64).product();
            let fy: f64 = (0..ny).map(|k| (t.j - k) as f64).product();
            c * fx * fy * x.powi((t.i - nx) as i32) * y.powi((t.j - ny) as i32)
        })
        .sum()
}

/// Potential and its first derivatives at `(x, y, z)` from `src`.
pub fn evaluate(pt: &PotentialTable, x: f64, y: f64, z: f64, src: &CoefficientSource) -> Result<PotentialValues> {
    let mut scratch = Vec::new();
    let mut a = vec![0.0; pt.n_terms()];
    let mut da = vec![0.0; pt.n_terms()];
    src.values(z, &mut scratch, &mut a)?;
    src.derivatives(z, &mut scratch, &mut da)?;
    let mut pv = PotentialValues::default();
    for c in 0..3 {
        let r = pt.range(c);
        let terms = pt.terms(c);
        pv.a[c] = eval_monomials(terms, &a[r.clone()], x, y, 0, 0);
        pv.dx[c] = eval_monomials(terms, &a[r.clone()], x, y, 1, 0);
        pv.dy[c] = eval_monomials(terms, &a[r.clone()], x, y, 0, 1);
        pv.dz[c] = eval_monomials(terms, &da[r], x, y, 0, 0);
    }
    Ok(pv)
}

/// Monomial of an antiderivative polynomial, referencing its parent term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxTerm {
    pub i: u32,
    pub j: u32,
    /// Global index of the parent term in the potential table.
    pub parent: usize,
    pub factor: f64,
}

/// `∫ ∂A_x/∂y dx` and `∫ ∂A_y/∂x dy` with zero integration constants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuxTable {
    pub int_dy_ax_dx: Vec<AuxTerm>,
    pub int_dx_ay_dy: Vec<AuxTerm>,
}

pub fn antiderivatives(pt: &PotentialTable) -> AuxTable {
    let ix = pt.terms(0)
        .iter()
        .enumerate()
        .filter(|(_, t)| t.j > 0)
        .map(|(k, t)| AuxTerm {
            i: t.i + 1,
            j: t.j - 1,
            parent: pt.range(0).start + k,
            factor: t.j as f64 / (t.i + 1) as f64,
        })
        .collect();
    let iy = pt.terms(1)
        .iter()
        .enumerate()
        .filter(|(_, t)| t.i > 0)
        .map(|(k, t)| AuxTerm {
            i: t.i - 1,
            j: t.j + 1,
            parent: pt.range(1).start + k,
            factor: t.i as f64 / (t.j + 1) as f64,
        })
        .collect();
    AuxTable {
        int_dy_ax_dx: ix,
        int_dx_ay_dy: iy,
    }
}

/// `max_Z |∇×∇×A(x0, y0, Z)| / max_Z |A(x0, y0, Z)|` over the table's grid,
/// using the stored coefficient derivatives.
pub fn maxwell_residual(pt: &PotentialTable, x0: f64, y0: f64) -> Result<f64> {
    let (num, den) = maxwell_profile(pt, x0, y0)
        .into_iter()
        .fold((0.0f64, 0.0f64), |(n, d), (cc, a)| (n.max(cc), d.max(a)));
    if !(den > 1e-300) {
        return Err(Error::UndefinedField(format!(
            "vector potential vanishes along ({x0}, {y0}); residual undefined"
        )));
    }
    Ok(num / den)
}

/// Per-grid-point `(|∇×∇×A|, |A|)` at `(x0, y0)`.
pub fn maxwell_profile(pt: &PotentialTable, x0: f64, y0: f64) -> Vec<(f64, f64)> {
    let nt = pt.n_terms();
    let mut col = [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
    (0..pt.z.len())
        .map(|k| {
            for d in 0..3 {
                for t in 0..nt {
                    col[d][t] = pt.samples[d][t][k];
                }
            }
            let cc = curl_curl_at(pt, &col, x0, y0);
            let a: Vec<f64> = (0..3)
                .map(|c| eval_monomials(pt.terms(c), &col[0][pt.range(c)], x0, y0, 0, 0))
                .collect();
            (norm(&cc), norm(&a))
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `∇×∇×A = ∇(∇·A) − ∇²A` from value, first and second z-derivative coefficients.
pub fn curl_curl_at(pt: &PotentialTable, coef: &[Vec<f64>; 3], x: f64, y: f64) -> [f64; 3] {
    // d(c, order_z, nx, ny)
    let d = |c: usize, oz: usize, nx: u32, ny: u32| {
        eval_monomials(pt.terms(c), &coef[oz][pt.range(c)], x, y, nx, ny)
    };
    [
        d(1, 0, 1, 1) + d(2, 1, 1, 0) - d(0, 0, 0, 2) - d(0, 2, 0, 0),
        d(0, 0, 1, 1) + d(2, 1, 0, 1) - d(1, 0, 2, 0) - d(1, 2, 0, 0),
        d(0, 1, 1, 0) + d(1, 1, 0, 1) - d(2, 0, 2, 0) - d(2, 0, 0, 2),
    ]
}

/// `∇×A` at `(x, y, z)` from `src`.
pub fn curl(pt: &PotentialTable, x: f64, y: f64, z: f64, src: &CoefficientSource) -> Result<[f64; 3]> {
    let pv = evaluate(pt, x, y, z, src)?;
    Ok([pv.dy[2] - pv.dz[1], pv.dz[0] - pv.dx[2], pv.dx[1] - pv.dy[0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::GradientSeries;

    fn constant_table(c2: f64, n: usize) -> GradientTable {
        let z: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let orders = vec![vec![c2; n], vec![0.0; n], vec![0.0; n]];
        GradientTable::from_series(z, 2, vec![GradientSeries { m: 2, kind: Kind::Normal, orders }]).unwrap()
    }

    #[test]
    fn hfc_has_no_horizontal_terms() {
        let pt = build_hfc(&constant_table(1.0, 8)).unwrap();
        assert!(pt.terms(0).is_empty());
        assert_eq!(pt.range(0), 0..0);
    }

    #[test]
    fn af_body_field_coefficients() {
        let pt = build(&constant_table(0.5, 8), Gauge::Af, 0, 1.0).unwrap();
        assert_eq!(pt.count_coefficients(), ([0, 0, 2], 2));
        let t = pt.terms(2);
        assert_eq!((t[0].i, t[0].j), (0, 2));
        assert_eq!(pt.value_series()[0], vec![0.5; 8]);
        assert_eq!(pt.value_series()[1], vec![-0.5; 8]);
        assert!(pt.derivative_series(1)[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn body_field_is_curl_curl_free() {
        let pt = build(&constant_table(0.5, 8), Gauge::Af, 2, 1.0).unwrap();
        let r = maxwell_profile(&pt, 0.01, -0.02);
        assert!(r.iter().all(|&(cc, a)| cc == 0.0 && a > 0.0));
        assert_eq!(maxwell_residual(&pt, 0.01, -0.02).unwrap(), 0.0);
        assert!(maxwell_residual(&pt, 0.0, 0.0).is_err());
    }

    #[test]
    fn antiderivative_terms() {
        let pt = build(&constant_table(1.0, 8), Gauge::Af, 2, 1.0).unwrap();
        let aux = antiderivatives(&pt);
        for a in &aux.int_dy_ax_dx {
            let p = &pt.terms(0)[a.parent];
            assert_eq!((a.i, a.j + 1), (p.i + 1, p.j));
        }
        assert_eq!(aux.int_dy_ax_dx.len(), pt.terms(0).iter().filter(|t| t.j > 0).count());
    }

    #[test]
    fn monomial_calculus() {
        let terms = [Term { i: 2, j: 0, expr: vec![] }];
        assert_eq!(eval_monomials(&terms, &[3.0], 2.0, 5.0, 0, 0), 12.0);
        assert_eq!(eval_monomials(&terms, &[3.0], 2.0, 5.0, 1, 0), 12.0);
        assert_eq!(eval_monomials(&terms, &[3.0], 2.0, 5.0, 2, 0), 6.0);
        assert_eq!(eval_monomials(&terms, &[3.0], 2.0, 5.0, 0, 1), 0.0);
    }

    #[test]
    fn rejects_excess_truncation_order() {
        assert!(build(&constant_table(1.0, 8), Gauge::Af, 3, 1.0).is_err());
    }

    #[test]
    fn gauge_names() {
        for g in Gauge::ALL {
            assert_eq!(g.name().parse::<Gauge>().unwrap(), g);
        }
    }
}
