//! Reduced paraxial Hamiltonian system in scaled variables.
//!
//! `K = (P_x − Ã_x)²/(2(1+δ₀)) + (P_y − Ã_y)²/(2(1+δ₀)) − Ã_z`, with `Z` as the
//! independent variable and `δ₀` a constant parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
    pub z: f64,
    pub delta: f64,
}

impl ParticleState {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self {
            x,
            y,
            px,
            py,
            z: 0.0,
            delta: 0.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > -1.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("momentum deviation {delta} must exceed -1")));
        }
        self.delta = delta;
        Ok(self)
    }

    /// `(X, Y, P_x, P_y)`.
    pub fn coords(&self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    pub fn with_coords(mut self, w: [f64; 4]) -> Self {
        self.x = w[0];
        self.y = w[1];
        self.px = w[2];
        self.py = w[3];
        self
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite()) && self.z.is_finite()
    }
}

/// Potential components and the transverse derivatives the equations of motion need.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldDerivs {
    pub ax: f64,
    pub ay: f64,
    pub dx_ax: f64,
    pub dy_ax: f64,
    pub dx_ay: f64,
    pub dy_ay: f64,
    pub dx_az: f64,
    pub dy_az: f64,
}

/// `(dX, dY, dP_x, dP_y)/dZ`.
pub fn rhs(s: &ParticleState, f: &FieldDerivs) -> [f64; 4] {
    let inv = 1.0 / (1.0 + s.delta);
    let dx = (s.px - f.ax) * inv;
    let dy = (s.py - f.ay) * inv;
    [
        dx,
        dy,
        f.dx_ax * dx + f.dx_ay * dy + f.dx_az,
        f.dy_ax * dx + f.dy_ay * dy + f.dy_az,
    ]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub kx: f64,
    pub ky: f64,
    pub total: f64,
}

/// Kinetic parts and the reduced Hamiltonian value for potential `a = (Ã_x, Ã_y, Ã_z)`.
pub fn energy_components(s: &ParticleState, a: [f64; 3]) -> Energy {
    let d = 2.0 * (1.0 + s.delta);
    let kx = (s.px - a[0]).powi(2) / d;
    let ky = (s.py - a[1]).powi(2) / d;
    Energy {
        kx,
        ky,
        total: kx + ky - a[2] - 2.0 * s.delta,
    }
}

/// `δ = sqrt(1 − 2P_τ/β⁰ + P_τ²) − 1`.
pub fn delta_from_ptau(ptau: f64, beta0: f64) -> Result<f64> {
    if !(beta0 > 0.0 && beta0 <= 1.0) {
        return Err(Error::Domain(format!("reference beta {beta0} outside (0, 1]")));
    }
    let radicand = 1.0 - 2.0 * ptau / beta0 + ptau * ptau;
    if !(radicand >= 0.0) {
        return Err(Error::Domain(format!("negative radicand {radicand} for P_tau = {ptau}")));
    }
    Ok(radicand.sqrt() - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicConstants {
    /// Reference momentum in kg·m/s.
    pub p0: f64,
    pub beta0: f64,
    pub gamma0: f64,
    /// Total energy in J.
    pub energy: f64,
    /// Rest mass in kg.
    pub mass: f64,
    /// Reference length in m.
    pub length: f64,
}

impl KinematicConstants {
    /// Reference momentum in eV/c.
    pub fn p0_ev(&self) -> f64 {
        self.p0 * SPEED_OF_LIGHT / ELEMENTARY_CHARGE
    }

    /// `Q L / p⁰` for a particle of `charge` elementary charges: multiplies a
    /// vector potential in T·m to give the dimensionless scaled potential.
    pub fn potential_scale(&self, charge: f64) -> f64 {
        charge * ELEMENTARY_CHARGE * self.length / self.p0
    }
}

/// Reference constants from total energy and rest mass, both in eV (mass as `m c²`).
pub fn reference_constants(energy_ev: f64, mass_ev: f64) -> Result<KinematicConstants> {
    if !(mass_ev > 0.0 && energy_ev > mass_ev && energy_ev.is_finite()) {
        return Err(Error::Domain(format!(
            "energy {energy_ev} eV must exceed the rest energy {mass_ev} eV"
        )));
    }
    let c = SPEED_OF_LIGHT;
    let e = energy_ev * ELEMENTARY_CHARGE;
    let m = mass_ev * ELEMENTARY_CHARGE / (c * c);
    // (E/c)² − m²c² written as a product to avoid cancellation
    let p0 = ((e / c - m * c) * (e / c + m * c)).sqrt();
    Ok(KinematicConstants {
        p0,
        beta0: p0 * c / e,
        gamma0: energy_ev / mass_ev,
        energy: e,
        mass: m,
        length: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_drift() {
        let s = ParticleState::new(0.1, 0.2, 0.3, -0.4);
        assert_eq!(rhs(&s, &FieldDerivs::default()), [0.3, -0.4, 0.0, 0.0]);
        let s = s.with_delta(1.0).unwrap();
        assert_eq!(rhs(&s, &FieldDerivs::default())[0], 0.15);
    }

    #[test]
    fn body_quadrupole_focusing() {
        // Ã_z = −c (X² − Y²)
        let c = 0.7;
        let s = ParticleState::new(0.02, -0.03, 0.0, 0.0);
        let f = FieldDerivs {
            dx_az: -2.0 * c * s.x,
            dy_az: 2.0 * c * s.y,
            ..Default::default()
        };
        let d = rhs(&s, &f);
        assert_eq!(d[2], -2.0 * c * s.x);
        assert_eq!(d[3], 2.0 * c * s.y);
    }

    #[test]
    fn energy_components_basics() {
        let e = energy_components(&ParticleState::new(0.0, 0.0, 0.0, 0.0), [0.0; 3]);
        assert_eq!(e, Energy::default());
        let s = ParticleState::new(0.3, 0.1, 0.25, 0.5);
        let e = energy_components(&s, [0.25, 0.0, 0.1]);
        assert_eq!(e.kx, 0.0);
        assert_eq!(e.ky, 0.125);
        assert_eq!(e.total, 0.125 - 0.1);
    }

    #[test]
    fn delta_relation() {
        assert_eq!(delta_from_ptau(0.0, 0.9).unwrap(), 0.0);
        assert!((delta_from_ptau(0.1, 1.0).unwrap() + 0.1).abs() < 1e-15);
        assert!(delta_from_ptau(0.5, 0.1).is_err());
        assert!(delta_from_ptau(0.1, 0.0).is_err());
    }

    #[test]
    fn reference_constants_cases() {
        let k = reference_constants(7e12, 0.938e9).unwrap();
        assert!((k.p0 - 3.7410e-15).abs() < 1e-18, "{}", k.p0);
        assert!((1.0 - k.beta0 - 8.98e-9).abs() < 2e-11, "{}", 1.0 - k.beta0);
        let m = 0.938e9;
        let k = reference_constants(m * 2f64.sqrt(), m).unwrap();
        let mc = m * ELEMENTARY_CHARGE / SPEED_OF_LIGHT;
        assert!((k.p0 / mc - 1.0).abs() < 1e-12);
        assert!((k.beta0 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(reference_constants(0.5e9, m).is_err());
        // 7 TeV protons: Q/p0 ≈ 1/23349 per T·m
        let k = reference_constants(7e12, 0.938_272e9).unwrap();
        assert!((1.0 / k.potential_scale(1.0) - 23349.0).abs() < 2.0);
    }
}
