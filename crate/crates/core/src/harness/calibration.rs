//! Constants measured on the reference configuration and the probes that reproduce them.

use super::MaxPrincipleSample;
use crate::error::{Error, Result};

/// Bound `C*` in `‖u‖_∞ ≤ C* ‖g‖_∞` for constant boundary data.
pub const MAX_PRINCIPLE_C_STAR: f64 = 1.5;

/// Spread ceiling of the gradient ratio for a constant tensor.
pub const CONSTANT_TENSOR_SPREAD: f64 = 2.0;

/// A measured constant next to the bound it is checked against.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibrated {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
}

impl Calibrated {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }
}

/// Largest `‖u‖_∞ / ‖g‖_∞` of the probe.
pub fn calibrate_max_principle(samples: &[MaxPrincipleSample]) -> Result<Calibrated> {
    if samples.is_empty() {
        return Err(Error::param("no maximum principle samples"));
    }
    let measured = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(Calibrated {
        name: "max_principle_c_star",
        measured,
        bound: MAX_PRINCIPLE_C_STAR,
    })
}
