//! Fingertip forces, finger identities and grasp phase labels.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Fingertip force in the nail frame, newtons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceVector {
    /// Shear along x.
    pub fx: f64,
    /// Shear along y.
    pub fy: f64,
    /// Normal.
    pub fz: f64,
}

impl ForceVector {
    pub const ZERO: ForceVector = ForceVector {
        fx: 0.0,
        fy: 0.0,
        fz: 0.0,
    };

    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        ForceVector { fx, fy, fz }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.fx, self.fy, self.fz]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ForceVector::new(a[0], a[1], a[2])
    }

    pub fn shear_magnitude(self) -> f64 {
        self.fx.hypot(self.fy)
    }

    pub fn is_finite(self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.fz.is_finite()
    }
}

impl Add for ForceVector {
    type Output = ForceVector;
    fn add(self, o: ForceVector) -> ForceVector {
        ForceVector::new(self.fx + o.fx, self.fy + o.fy, self.fz + o.fz)
    }
}

impl AddAssign for ForceVector {
    fn add_assign(&mut self, o: ForceVector) {
        *self = *self + o;
    }
}

impl Sub for ForceVector {
    type Output = ForceVector;
    fn sub(self, o: ForceVector) -> ForceVector {
        ForceVector::new(self.fx - o.fx, self.fy - o.fy, self.fz - o.fz)
    }
}

impl Mul<f64> for ForceVector {
    type Output = ForceVector;
    fn mul(self, s: f64) -> ForceVector {
        ForceVector::new(self.fx * s, self.fy * s, self.fz * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FingerId {
    Thumb,
    Index,
    Middle,
    Ring,
}

impl FingerId {
    pub const ALL: [FingerId; 4] = [
        FingerId::Thumb,
        FingerId::Index,
        FingerId::Middle,
        FingerId::Ring,
    ];
    /// The three fingers opposing the thumb, top to bottom in the finger camera.
    pub const FINGERS: [FingerId; 3] = [FingerId::Index, FingerId::Middle, FingerId::Ring];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FingerId::Thumb => "thumb",
            FingerId::Index => "index",
            FingerId::Middle => "middle",
            FingerId::Ring => "ring",
        }
    }
}

impl fmt::Display for FingerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FingerId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        FingerId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown finger {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "pre-contact")]
    PreContact,
    #[serde(rename = "grasp")]
    Grasp,
    #[serde(rename = "lift")]
    Lift,
    #[serde(rename = "hold")]
    Hold,
    #[serde(rename = "replace")]
    Replace,
    /// Phase not known, e.g. for forces estimated from frames alone.
    #[serde(rename = "unknown")]
    Unknown,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreContact => "pre-contact",
            Phase::Grasp => "grasp",
            Phase::Lift => "lift",
            Phase::Hold => "hold",
            Phase::Replace => "replace",
            Phase::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "pre-contact" => Phase::PreContact,
            "grasp" => Phase::Grasp,
            "lift" => Phase::Lift,
            "hold" => Phase::Hold,
            "replace" => Phase::Replace,
            "unknown" => Phase::Unknown,
            other => return Err(Error::domain(format!("unknown phase {other:?}"))),
        })
    }
}
