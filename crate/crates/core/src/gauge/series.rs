//! Series for the three gauges, expanded into Cartesian monomials.

use num_rational::BigRational;
use num_traits::One;

use super::symbolic::{harmonic_polys, kappa, rat, GradExpr, GradKey, Poly};
use crate::harmonics::Kind;

/// Symbolic components `[A_x, A_y, A_z]`.
pub type Components = [Poly; 3];

fn grad(m: u32, kind: Kind, order: u32) -> GradExpr {
    GradExpr::single(GradKey::new(m, kind, order), BigRational::one())
}

/// Adds `expr · factor · ρ^{2ℓ} {Re|Im} (x+iy)^p`, optionally multiplied by `x` or `y`.
fn add_harmonic(target: &mut Poly, l: u32, p: u32, imag: bool, times: Option<char>, expr: &GradExpr, factor: &BigRational) {
    let (re, im) = harmonic_polys(l, p);
    let base = if imag { im } else { re };
    let base = match times {
        Some('x') => base.shift(1, 0),
        Some('y') => base.shift(0, 1),
        _ => base,
    };
    target.add_product(&base, expr, factor);
}

/// Azimuthal-free gauge.
pub fn azimuthal_free(harmonics: &[(u32, Kind)], nd: u32) -> Components {
    let mut out: Components = Default::default();
    for &(m, kind) in harmonics {
        let inv_m = rat(1, m as i64);
        // normal: cos mφ terms; skew: sin mφ with flipped signs
        let (imag, sign) = match kind {
            Kind::Normal => (false, rat(1, 1)),
            Kind::Skew => (true, rat(-1, 1)),
        };
        let mut l = 0;
        while 2 * l <= nd {
            let k = kappa(m, l, 0);
            if 2 * l + 1 <= nd {
                let f = &sign * &inv_m * &k;
                let e = grad(m, kind, 2 * l + 1);
                add_harmonic(&mut out[0], l, m, imag, Some('x'), &e, &f);
                add_harmonic(&mut out[1], l, m, imag, Some('y'), &e, &f);
            }
            let f = -&sign * &inv_m * rat((2 * l + m) as i64, 1) * &k;
            add_harmonic(&mut out[2], l, m, imag, None, &grad(m, kind, 2 * l), &f);
            l += 1;
        }
    }
    out
}

/// Symmetric Coulomb gauge.
pub fn coulomb(harmonics: &[(u32, Kind)], nd: u32) -> Components {
    let mut out: Components = Default::default();
    let half = rat(1, 2);
    for &(m, kind) in harmonics {
        let mut l = 0;
        while 2 * l <= nd {
            if 2 * l + 1 <= nd {
                let kp = kappa(m, l, 1);
                let e = grad(m, kind, 2 * l + 1);
                let f = &half * &kp;
                match kind {
                    Kind::Normal => {
                        add_harmonic(&mut out[0], l, m + 1, false, None, &e, &f);
                        add_harmonic(&mut out[1], l, m + 1, true, None, &e, &f);
                    }
                    Kind::Skew => {
                        add_harmonic(&mut out[0], l, m + 1, true, None, &e, &-f.clone());
                        add_harmonic(&mut out[1], l, m + 1, false, None, &e, &f);
                    }
                }
            }
            let k = kappa(m, l, 0);
            let e = grad(m, kind, 2 * l);
            match kind {
                Kind::Normal => add_harmonic(&mut out[2], l, m, false, None, &e, &-k),
                Kind::Skew => add_harmonic(&mut out[2], l, m, true, None, &e, &k),
            }
            l += 1;
        }
    }
    out
}

/// Base coefficients `L_{m,kind}^[0]` of the horizontal-free gauge function,
/// indexed by `m`, truncated at gradient order `nd`.
pub fn lambda_coefficients(harmonics: &[(u32, Kind)], kind: Kind, nd: u32) -> Vec<GradExpr> {
    let present: Vec<u32> = harmonics.iter().filter(|h| h.1 == kind).map(|h| h.0).collect();
    let max_m = present.iter().copied().max().unwrap_or(0);
    // L_0 = L_1 = L_2 = 0
    let mut l: Vec<GradExpr> = vec![GradExpr::default(); 3];
    let mut m = 2u32;
    loop {
        // B_m^[0] = ±C_{m-1}^[1] / (2m)
        let mut b = GradExpr::default();
        if present.contains(&(m - 1)) {
            let s = if kind == Kind::Normal { 1 } else { -1 };
            b.add(GradKey::new(m - 1, kind, 1), rat(s, 2 * m as i64));
        }
        let mut next = l[(m - 1) as usize].shifted(2).scaled(&rat(1, 4 * m as i64));
        next.add_scaled(&b, &rat(-1, 1));
        let next = next.scaled(&rat(1, (m + 1) as i64)).truncated(nd);
        l.push(next);
        m += 1;
        let tail_empty = l[m as usize].is_zero() && l[(m - 1) as usize].is_zero();
        if m > max_m + 1 && tail_empty {
            break;
        }
    }
    while l.last().is_some_and(GradExpr::is_zero) && l.len() > 3 {
        l.pop();
    }
    l
}

/// The gauge function `λ` as a polynomial.
pub fn lambda_poly(harmonics: &[(u32, Kind)], nd: u32) -> Poly {
    let mut out = Poly::default();
    for kind in [Kind::Normal, Kind::Skew] {
        let coeffs = lambda_coefficients(harmonics, kind, nd);
        for (m, base) in coeffs.iter().enumerate() {
            if base.is_zero() {
                continue;
            }
            let m = m as u32;
            let mut l = 0;
            loop {
                let e = base.shifted(2 * l).truncated(nd);
                if e.is_zero() {
                    break;
                }
                // normal gradients pair with cos mφ, skew with sin mφ
                add_harmonic(&mut out, l, m, kind == Kind::Skew, None, &e, &kappa(m, l, 0));
                l += 1;
            }
        }
    }
    out
}

/// Horizontal-free Coulomb gauge together with the residual `Â_x + ∂_x λ`,
/// which vanishes identically when the recursion is consistent.
pub fn horizontal_free(harmonics: &[(u32, Kind)], nd: u32) -> (Components, Poly) {
    let hat = coulomb(harmonics, nd);
    let lambda = lambda_poly(harmonics, nd);
    let one = BigRational::one();
    let mut residual = hat[0].clone();
    residual.add_poly(&lambda.d_dx(), &one);
    let residual = residual.truncated(nd);
    let mut ay = hat[1].clone();
    ay.add_poly(&lambda.d_dy(), &one);
    let mut az = hat[2].clone();
    az.add_poly(&lambda.d_dz(), &one);
    ([Poly::default(), ay.truncated(nd), az.truncated(nd)], residual)
}

/// Symbolic curl `(∂_y A_z − ∂_z A_y, ∂_z A_x − ∂_x A_z, ∂_x A_y − ∂_y A_x)`.
pub fn curl(c: &Components) -> Components {
    let neg = -BigRational::one();
    let mut bx = c[2].d_dy();
    bx.add_poly(&c[1].d_dz(), &neg);
    let mut by = c[0].d_dz();
    by.add_poly(&c[2].d_dx(), &neg);
    let mut bz = c[1].d_dx();
    bz.add_poly(&c[0].d_dy(), &neg);
    [bx, by, bz]
}

/// Symbolic divergence.
pub fn divergence(c: &Components) -> Poly {
    let one = BigRational::one();
    let mut d = c[0].d_dx();
    d.add_poly(&c[1].d_dy(), &one);
    d.add_poly(&c[2].d_dz(), &one);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    const REAL: [u32; 4] = [2, 6, 10, 14];

    fn set(kind: Kind) -> Vec<(u32, Kind)> {
        REAL.iter().map(|&m| (m, kind)).collect()
    }

    fn counts(c: &Components) -> [usize; 3] {
        [c[0].len(), c[1].len(), c[2].len()]
    }

    #[test]
    fn af_single_term_body_field() {
        let c = azimuthal_free(&[(2, Kind::Normal)], 0);
        assert!(c[0].is_zero() && c[1].is_zero());
        let k = GradKey::new(2, Kind::Normal, 0);
        assert_eq!(c[2].coefficient(2, 0), Some(&GradExpr::single(k, rat(-1, 1))));
        assert_eq!(c[2].coefficient(0, 2), Some(&GradExpr::single(k, rat(1, 1))));
        assert_eq!(c[2].len(), 2);
    }

    #[test]
    fn table_counts_nd2() {
        assert_eq!(counts(&azimuthal_free(&set(Kind::Normal), 2)), [20, 20, 40]);
        assert_eq!(counts(&azimuthal_free(&set(Kind::Skew), 2)), [16, 16, 36]);
        assert_eq!(counts(&horizontal_free(&set(Kind::Normal), 2).0), [0, 20, 44]);
        assert_eq!(counts(&horizontal_free(&set(Kind::Skew), 2).0), [0, 20, 32]);
    }

    #[test]
    fn table_counts_nd16() {
        assert_eq!(counts(&azimuthal_free(&set(Kind::Normal), 16)), [112, 112, 128]);
        assert_eq!(counts(&azimuthal_free(&set(Kind::Skew), 16)), [105, 105, 120]);
        assert_eq!(counts(&horizontal_free(&set(Kind::Normal), 16).0), [0, 119, 135]);
        assert_eq!(counts(&horizontal_free(&set(Kind::Skew), 16).0), [0, 112, 113]);
    }

    #[test]
    fn lambda_cancels_horizontal_component() {
        for kind in [Kind::Normal, Kind::Skew] {
            for nd in [2, 5, 8, 16] {
                let (_, residual) = horizontal_free(&set(kind), nd);
                assert!(residual.is_zero(), "{kind:?} nd={nd}");
            }
        }
    }

    #[test]
    fn lambda_base_cases() {
        let l = lambda_coefficients(&set(Kind::Normal), Kind::Normal, 16);
        assert!(l[0].is_zero() && l[1].is_zero() && l[2].is_zero());
        // L_3 needs a C_1 harmonic; L_4 = -C_2^[1] / 24
        assert!(l[3].is_zero());
        assert_eq!(l[4], GradExpr::single(GradKey::new(2, Kind::Normal, 1), rat(-1, 24)));
        // L_6 = L_4^[2] / 120
        assert_eq!(l[6], GradExpr::single(GradKey::new(2, Kind::Normal, 3), rat(-1, 2880)));
        assert!(lambda_coefficients(&[], Kind::Normal, 16).iter().all(GradExpr::is_zero));
    }

    #[test]
    fn gauges_share_the_field_for_even_nd() {
        for kind in [Kind::Normal, Kind::Skew] {
            for nd in [2, 4, 6] {
                let h = set(kind);
                let b_af: Vec<Poly> = curl(&azimuthal_free(&h, nd)).iter().map(|p| p.truncated(nd + 1)).collect();
                let b_c: Vec<Poly> = curl(&coulomb(&h, nd)).iter().map(|p| p.truncated(nd + 1)).collect();
                let b_h: Vec<Poly> = curl(&horizontal_free(&h, nd).0).iter().map(|p| p.truncated(nd + 1)).collect();
                assert_eq!(b_af, b_c, "{kind:?} nd={nd}");
                assert_eq!(b_af, b_h, "{kind:?} nd={nd}");
            }
        }
    }

    #[test]
    fn coulomb_is_divergence_free_up_to_truncation() {
        let h = set(Kind::Normal);
        for nd in [2, 3, 6] {
            let d = divergence(&coulomb(&h, nd)).truncated(nd);
            assert!(d.is_zero(), "nd={nd}");
        }
    }
}
