//! Werner-state quality algebra.
//!
//! A two-qubit Werner state `w |Φ+⟩⟨Φ+| + (1 - w) I/4` is described by the
//! single parameter `w`. Its Bell fidelity is `F = (1 + 3w) / 4`, and it is
//! entangled exactly when `w > 1/3` (`F > 1/2`). Ideal swapping over a path of
//! `ℓ` elementary links multiplies Werner parameters, so the raw end-to-end
//! state has parameter `w0^ℓ`.
//!
//! Only the non-negative branch `w ∈ [0, 1]` is represented; every map the
//! crate works with acts there.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Werner parameter of a separable/entangled crossover.
pub const ENTANGLEMENT_THRESHOLD: f64 = 1.0 / 3.0;

/// Slack tolerated when snapping map outputs back into `[0, 1]`.
pub(crate) const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WernerParameter(f64);

impl WernerParameter {
    pub const PERFECT: WernerParameter = WernerParameter(1.0);

    pub fn new(w: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&w) {
            Ok(WernerParameter(w))
        } else {
            Err(Error::domain("Werner parameter", w, 0.0, 1.0))
        }
    }

    /// Accepts values that overshoot `[0, 1]` by floating-point noise only.
    pub(crate) fn snapped(w: f64) -> Result<Self> {
        if w.is_finite() && w > -ROUNDING_SLACK && w < 1.0 + ROUNDING_SLACK {
            Ok(WernerParameter(w.clamp(0.0, 1.0)))
        } else {
            Err(Error::domain("Werner parameter", w, 0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_entangled(self) -> bool {
        self.0 > ENTANGLEMENT_THRESHOLD
    }

    pub fn fidelity(self) -> Fidelity {
        Fidelity((1.0 + 3.0 * self.0) / 4.0)
    }
}

impl TryFrom<f64> for WernerParameter {
    type Error = Error;

    fn try_from(w: f64) -> Result<Self> {
        WernerParameter::new(w)
    }
}

impl From<WernerParameter> for f64 {
    fn from(w: WernerParameter) -> f64 {
        w.0
    }
}

impl fmt::Display for WernerParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Bell-state fidelity of a Werner state, in `[1/4, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Fidelity(f64);

impl Fidelity {
    pub fn new(f: f64) -> Result<Self> {
        if (0.25..=1.0).contains(&f) {
            Ok(Fidelity(f))
        } else {
            Err(Error::domain("fidelity", f, 0.25, 1.0))
        }
    }

    pub(crate) fn snapped(f: f64) -> Result<Self> {
        if f.is_finite() && f > 0.25 - ROUNDING_SLACK && f < 1.0 + ROUNDING_SLACK {
            Ok(Fidelity(f.clamp(0.25, 1.0)))
        } else {
            Err(Error::domain("fidelity", f, 0.25, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn werner(self) -> WernerParameter {
        WernerParameter(((4.0 * self.0 - 1.0) / 3.0).clamp(0.0, 1.0))
    }
}

impl TryFrom<f64> for Fidelity {
    type Error = Error;

    fn try_from(f: f64) -> Result<Self> {
        Fidelity::new(f)
    }
}

impl From<Fidelity> for f64 {
    fn from(f: Fidelity) -> f64 {
        f.0
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Number of elementary links on an end-to-end path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathSpec {
    links: u32,
}

impl PathSpec {
    pub fn new(links: u32) -> Result<Self> {
        if links == 0 {
            return Err(Error::domain("path length", 0.0, 1.0, f64::INFINITY));
        }
        Ok(PathSpec { links })
    }

    pub fn links(self) -> u32 {
        self.links
    }
}

pub fn fidelity_from_werner(w: f64) -> Result<Fidelity> {
    Ok(WernerParameter::new(w)?.fidelity())
}

pub fn werner_from_fidelity(f: f64) -> Result<WernerParameter> {
    Ok(Fidelity::new(f)?.werner())
}

/// Raw end-to-end Werner parameter after ideal swapping: `w0^ℓ`.
pub fn raw_werner(w0: WernerParameter, path: PathSpec) -> WernerParameter {
    WernerParameter(w0.0.powi(path.links as i32))
}

/// Smallest elementary-link quality whose raw end-to-end state is still
/// entangled: `3^(-1/ℓ)`.
pub fn boundary_w0(path: PathSpec) -> WernerParameter {
    WernerParameter(3f64.powf(-1.0 / f64::from(path.links)))
}
