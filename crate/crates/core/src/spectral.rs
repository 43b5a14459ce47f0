//! Spectral shifts `λ`, sector membership and the sector constant.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// A complex shift `λ ∈ ℂ \ (0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParameter {
    value: Complex64,
}

impl SpectralParameter {
    /// Rejects values on the open positive real axis.
    pub fn new(value: Complex64) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::param(format!("non-finite lambda {value}")));
        }
        if value.im == 0.0 && value.re > 0.0 {
            return Err(Error::SpectralDomain {
                re: value.re,
                im: value.im,
            });
        }
        Ok(Self { value })
    }

    pub fn zero() -> Self {
        Self {
            value: Complex64::new(0.0, 0.0),
        }
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(Complex64::new(re, 0.0))
    }

    /// `modulus · e^{i angle}`.
    pub fn from_polar(modulus: f64, angle: f64) -> Result<Self> {
        if modulus < 0.0 {
            return Err(Error::param(format!("negative modulus {modulus}")));
        }
        if modulus == 0.0 {
            return Ok(Self::zero());
        }
        // exact values on the axes
        let a = normalize_angle(angle);
        let value = if a == PI {
            Complex64::new(-modulus, 0.0)
        } else if a == FRAC_PI_2 {
            Complex64::new(0.0, modulus)
        } else if a == 1.5 * PI {
            Complex64::new(0.0, -modulus)
        } else {
            Complex64::from_polar(modulus, a)
        };
        Self::new(value)
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.value.re == 0.0 && self.value.im == 0.0
    }

    pub fn is_real(&self) -> bool {
        self.value.im == 0.0
    }

    /// `arg λ` in `[0, 2π)`; `None` for `λ = 0`.
    pub fn argument(&self) -> Option<f64> {
        if self.is_zero() {
            None
        } else {
            Some(normalize_angle(self.value.im.atan2(self.value.re)))
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            value: self.value.conj(),
        }
    }

    /// `λ` rescaled by a real positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
        }
    }
}

/// Map an angle into `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// The sector constant: 1 on the closed left half-plane and at 0, `1/|sin θ|` otherwise.
pub fn c_of(p: &SpectralParameter) -> Result<f64> {
    let v = p.value();
    if v.im == 0.0 && v.re > 0.0 {
        return Err(Error::SpectralDomain { re: v.re, im: v.im });
    }
    if v.re <= 0.0 {
        Ok(1.0)
    } else {
        Ok(p.modulus() / v.im.abs())
    }
}

/// Angle between `λ` and the positive real axis, in `[0, π]`.
pub fn angle_from_positive_axis(p: &SpectralParameter) -> Option<f64> {
    p.argument().map(|t| if t > PI { TAU - t } else { t })
}

/// `λ ≠ 0` with angular distance to the positive real axis above `π − θ0`.
pub fn in_sector(p: &SpectralParameter, theta0: f64) -> bool {
    match angle_from_positive_axis(p) {
        None => false,
        Some(a) => a > PI - theta0,
    }
}

fn check_aperture(theta0: f64) -> Result<()> {
    if theta0 > 0.0 && theta0 < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::param(format!("sector aperture {theta0} outside (0, π/2)")))
    }
}

/// Moduli-major product grid of shifts; every nonzero entry must lie in the sector.
pub fn sweep_grid(moduli: &[f64], angles: &[f64], theta0: f64) -> Result<Vec<SpectralParameter>> {
    check_aperture(theta0)?;
    let mut out = Vec::new();
    let mut offenders = Vec::new();
    for (i, &r) in moduli.iter().enumerate() {
        if r == 0.0 {
            out.push(SpectralParameter::zero());
            continue;
        }
        if !(r > 0.0) || !r.is_finite() {
            offenders.push(format!("moduli[{i}] = {r}"));
            continue;
        }
        for (j, &a) in angles.iter().enumerate() {
            match SpectralParameter::from_polar(r, a) {
                Ok(p) if in_sector(&p, theta0) => out.push(p),
                _ => offenders.push(format!("(moduli[{i}], angles[{j}]) = ({r}, {a})")),
            }
        }
    }
    if offenders.is_empty() {
        Ok(out)
    } else {
        Err(Error::config(
            "lambda",
            format!("outside the sector of aperture {theta0}: {}", offenders.join(", ")),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sector_constant_branches() {
        assert_eq!(c_of(&SpectralParameter::zero()).unwrap(), 1.0);
        let i = SpectralParameter::new(Complex64::new(0.0, 1.0)).unwrap();
        assert_eq!(c_of(&i).unwrap(), 1.0);
        let p = SpectralParameter::from_polar(1.0, PI / 6.0).unwrap();
        assert!((c_of(&p).unwrap() - 2.0).abs() < 1e-12);
        assert!(SpectralParameter::real(2.0).is_err());
    }

    #[test]
    fn sector_membership() {
        let t0 = PI / 4.0;
        assert!(in_sector(&SpectralParameter::real(-1.0).unwrap(), t0));
        assert!(in_sector(&SpectralParameter::from_polar(1.0, 7.0 * PI / 8.0).unwrap(), t0));
        let i = SpectralParameter::new(Complex64::new(0.0, 1.0)).unwrap();
        assert!(!in_sector(&i, t0));
        assert!(!in_sector(&SpectralParameter::zero(), t0));
    }

    #[test]
    fn sweep_grid_examples() {
        let t0 = PI / 4.0;
        let g = sweep_grid(&[0.0], &[PI], t0).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g[0].is_zero());
        let g = sweep_grid(&[1.0, 10.0], &[PI], t0).unwrap();
        assert_eq!(g[0].value(), Complex64::new(-1.0, 0.0));
        assert_eq!(g[1].value(), Complex64::new(-10.0, 0.0));
        let err = sweep_grid(&[1.0], &[FRAC_PI_2], t0).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    proptest! {
        #[test]
        fn conjugation_and_lower_bound(r in 1e-3f64..1e3, a in 0.0f64..TAU) {
            prop_assume!(a.sin().abs() > 1e-9 || a.cos() < 0.0);
            let p = SpectralParameter::from_polar(r, a).unwrap();
            let c = c_of(&p).unwrap();
            prop_assert!(c >= 1.0);
            prop_assert!((c_of(&p.conj()).unwrap() - c).abs() <= 1e-12 * c);
        }

        #[test]
        fn sector_is_monotone(r in 1e-3f64..1e3, a in 0.0f64..TAU, t0 in 0.01f64..1.5, dt in 0.0f64..0.06) {
            let p = SpectralParameter::from_polar(r, a).unwrap();
            let t1 = (t0 + dt).min(FRAC_PI_2 - 1e-6);
            if in_sector(&p, t0) {
                prop_assert!(in_sector(&p, t1));
            }
        }

        #[test]
        fn sector_constant_bounded_on_sector(r in 1e-3f64..1e3, a in 0.0f64..TAU, t0 in 0.05f64..1.5) {
            let p = SpectralParameter::from_polar(r, a).unwrap();
            if in_sector(&p, t0) {
                prop_assert!(c_of(&p).unwrap() <= 1.0 / t0.sin() + 1e-12);
            }
        }
    }
}
