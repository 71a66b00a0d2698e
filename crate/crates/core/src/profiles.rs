//! Named profiles shared by the command-line harness and the test
//! suites: 1D fields for norm/Hardy diagnostics, space-time sources,
//! boundary lifts and height functions.

use crate::error::{Error, Result};
use crate::geometry::HeightProfile;

/// 1D field profile by name. `xexp` and `bump` vanish at the boundary
/// and are admissible for Hardy quotients.
pub fn field_profile(name: &str) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    match name {
        "exp" => Ok(Box::new(|x| (-x).exp())),
        "xexp" => Ok(Box::new(|x| x * (-x).exp())),
        "x2exp" => Ok(Box::new(|x| x * x * (-1.5 * x).exp())),
        "bump" => Ok(Box::new(|x| {
            if x > 1.0 && x < 2.0 {
                let u = 2.0 * (x - 1.0) - 1.0;
                (-1.0 / (1.0 - u * u)).exp()
            } else {
                0.0
            }
        })),
        other => Err(Error::argument(format!(
            "unknown field profile '{other}' (expected exp, xexp, x2exp, bump)"
        ))),
    }
}

/// Space-time source `f(t, x)` on the unit interval by name.
pub fn source_profile(name: &str) -> Result<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
    match name {
        "zero" => Ok(Box::new(|_, _| 0.0)),
        "sin_poly" => Ok(Box::new(|t: f64, x: f64| t.sin() * x * x * (1.0 - x) * (1.0 - x))),
        "ramp_poly" => Ok(Box::new(|t: f64, x: f64| t * x * (1.0 - x))),
        "cos_bump" => Ok(Box::new(|t: f64, x: f64| {
            (2.0 * t).cos() * (std::f64::consts::PI * x).sin().powi(2)
        })),
        other => Err(Error::argument(format!(
            "unknown source profile '{other}' (expected zero, sin_poly, ramp_poly, cos_bump)"
        ))),
    }
}

/// Smooth cutoff equal to 1 near the boundary of the unit interval and
/// 0 in the middle; its normal derivative vanishes at both endpoints.
pub fn boundary_cutoff(x: f64) -> f64 {
    let edge = x.min(1.0 - x);
    if edge >= 0.25 {
        0.0
    } else if edge <= 0.05 {
        1.0
    } else {
        let u = (edge - 0.05) / 0.2;
        // C^2 step from 1 down to 0.
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

/// Height profile by name with a scale knob (the boundary seminorm)
/// and Hölder exponent for the cusp family.
pub fn height_profile(name: &str, scale: f64, kappa: f64) -> Result<HeightProfile> {
    match name {
        "zero" => Ok(HeightProfile::Zero),
        "hat" => Ok(HeightProfile::Hat { amplitude: scale, radius: 1.0 }),
        "bump" => Ok(HeightProfile::Bump { amplitude: scale, radius: 1.0 }),
        "cusp" => Ok(HeightProfile::Cusp { amplitude: scale, kappa, radius: 1.0 }),
        other => Err(Error::argument(format!(
            "unknown height profile '{other}' (expected zero, hat, bump, cusp)"
        ))),
    }
}
