//! Closed-form capacities and weights for the planar, radial and monomial models.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below this distance between `p` and `n` the radial formula switches to its log branch.
pub const BRANCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `θ = x₁` on `D × (a, b)` with cross-section measure `area`.
    Planar { area: f64, a: f64, b: f64 },
    /// `θ = |x|` in dimension `n`, plates at radii `r_e < r_f`.
    Radial { n: usize, r_e: f64, r_f: f64 },
    /// `θ = |x₁|^γ` with cross-section measure `area`, levels in `window`.
    Monomial { gamma: f64, area: f64, window: (f64, f64) },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub p: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must be in (1, ∞), got {p}")));
        }
        match kind {
            ModelKind::Planar { area, a, b } if !(a < b && area > 0.0) => {
                Err(Error::InvalidParameter(format!("planar model needs a < b and |D| > 0, got a={a}, b={b}, |D|={area}")))
            }
            ModelKind::Radial { n, r_e, r_f } if !(0.0 < r_e && r_e < r_f) || !(2..=3).contains(&n) => {
                Err(Error::InvalidParameter(format!("radial model needs n ∈ {{2,3}} and 0 < r_E < r_F, got n={n}, ({r_e}, {r_f})")))
            }
            ModelKind::Monomial { gamma, area, window } if !(gamma > 1.0 && area > 0.0 && window.0 < window.1) => {
                Err(Error::InvalidParameter(format!("monomial model needs γ > 1, |D| > 0 and a nonempty window, got γ={gamma}")))
            }
            _ => Ok(Self { kind, p }),
        }
    }
}

/// `Γ(m/2)` for a positive integer `m`.
fn gamma_half(m: usize) -> f64 {
    match m {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (m as f64 / 2.0 - 1.0) * gamma_half(m - 2),
    }
}

/// `ω_{n-1}`, the measure of the unit sphere in `ℝⁿ`.
pub fn sphere_measure(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

pub fn planar_capacity(spec: &ModelSpec) -> Result<f64> {
    match spec.kind {
        ModelKind::Planar { area, a, b } => Ok(area * (b - a).powf(1.0 - spec.p)),
        _ => Err(Error::InvalidParameter("planar_capacity needs a planar model".into())),
    }
}

pub fn radial_capacity(spec: &ModelSpec) -> Result<f64> {
    let ModelKind::Radial { n, r_e, r_f } = spec.kind else {
        return Err(Error::InvalidParameter("radial_capacity needs a radial model".into()));
    };
    let p = spec.p;
    let nf = n as f64;
    let resistance = if (p - nf).abs() < BRANCH_TOL {
        (r_f / r_e).ln()
    } else {
        let e = (p - nf) / (p - 1.0);
        (p - 1.0) / (p - nf) * (r_f.powf(e) - r_e.powf(e))
    };
    Ok(sphere_measure(n) * resistance.powf(1.0 - p))
}

/// Exponent `(γ-1)(p-1)/γ` of the monomial energy weight.
pub fn monomial_exponent(gamma: f64, p: f64) -> f64 {
    (gamma - 1.0) * (p - 1.0) / gamma
}

/// `A(t) = 2 |D| γ^{p-1} t^{(γ-1)(p-1)/γ}` (two sections `x₁ = ±t^{1/γ}`).
pub fn monomial_weight(spec: &ModelSpec, t: f64) -> Result<f64> {
    let ModelKind::Monomial { gamma, area, window } = spec.kind else {
        return Err(Error::InvalidParameter("monomial_weight needs a monomial model".into()));
    };
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("monomial weight needs t > 0, got {t}")));
    }
    if t < window.0 || t > window.1 {
        return Err(Error::InvalidParameter(format!("t = {t} outside the window [{}, {}]", window.0, window.1)));
    }
    let p = spec.p;
    Ok(2.0 * area * gamma.powf(p - 1.0) * t.powf(monomial_exponent(gamma, p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar(area: f64, a: f64, b: f64, p: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::Planar { area, a, b }, p).unwrap()
    }

    fn radial(n: usize, r_e: f64, r_f: f64, p: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::Radial { n, r_e, r_f }, p).unwrap()
    }

    #[test]
    fn sphere_measures() {
        assert!((sphere_measure(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn planar_examples() {
        assert_eq!(planar_capacity(&planar(1.0, 0.0, 1.0, 2.0)).unwrap(), 1.0);
        assert_eq!(planar_capacity(&planar(3.0, 0.0, 1.0, 2.0)).unwrap(), 3.0);
        assert_eq!(planar_capacity(&planar(1.0, 0.0, 2.0, 2.0)).unwrap(), 0.5);
        assert!(ModelSpec::new(ModelKind::Planar { area: 1.0, a: 1.0, b: 0.0 }, 2.0).is_err());
    }

    #[test]
    fn radial_examples() {
        let c = radial_capacity(&radial(2, 1.0, std::f64::consts::E, 2.0)).unwrap();
        assert!((c - 2.0 * PI).abs() < 1e-12);
        let c = radial_capacity(&radial(2, 1.0, 4.0, 3.0)).unwrap();
        assert!((c - PI / 2.0).abs() < 1e-12);
        let caps: Vec<f64> = [2.0, 1.5, 1.1, 1.01]
            .iter()
            .map(|&rf| radial_capacity(&radial(2, 1.0, rf, 2.0)).unwrap())
            .collect();
        assert!(caps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn radial_branches_meet() {
        for (n, rf) in [(2, 3.0), (3, 2.5)] {
            let log = radial_capacity(&radial(n, 1.0, rf, n as f64)).unwrap();
            for dp in [-1e-6, 1e-6] {
                let pow = radial_capacity(&radial(n, 1.0, rf, n as f64 + dp)).unwrap();
                assert!(((pow - log) / log).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn monomial_examples() {
        let spec = ModelSpec::new(ModelKind::Monomial { gamma: 2.0, area: 1.0, window: (0.0, 1.0) }, 2.0).unwrap();
        assert!((monomial_weight(&spec, 0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(monomial_weight(&spec, 0.0).is_err());
        assert_eq!(monomial_exponent(2.0, 2.0), 0.5);
        assert!((monomial_exponent(3.0, 2.0) - 2.0 / 3.0).abs() < 1e-15);
    }
}
