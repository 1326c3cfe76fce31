//! Serde adapters for scenario keys stored in degrees while the simulator works
//! in radians.

use serde::{Deserialize, Deserializer, Serializer};

/// `f64` radians in memory, degrees on disk. Also used for deg/s rates.
pub mod deg {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(to_degrees(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(f64::deserialize(d)?.to_radians())
    }
}

/// Radians to degrees, rounded to 12 significant digits so that a value read
/// from a file as degrees is written back unchanged.
pub fn to_degrees(rad: f64) -> f64 {
    let d = rad.to_degrees();
    if d == 0.0 || !d.is_finite() {
        return d;
    }
    format!("{d:.11e}").parse().expect("formatted float parses")
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}
