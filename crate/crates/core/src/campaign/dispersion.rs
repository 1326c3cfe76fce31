//! Monte Carlo perturbations of scenario parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scenario::Scenario;

/// Parameters that may be dispersed, named by their scenario key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispersedParameter {
    #[serde(rename = "launch.exit_speed_mps")]
    ExitSpeed,
    #[serde(rename = "launch.angle_of_attack_deg")]
    LaunchAngleOfAttack,
    #[serde(rename = "launch.heading_deg")]
    LaunchHeading,
    #[serde(rename = "launch.lateral_offset_m")]
    LaunchLateralOffset,
    #[serde(rename = "launch.rail_height_m")]
    RailHeight,
    #[serde(rename = "vehicle.mass_kg")]
    Mass,
    #[serde(rename = "vehicle.flap_thrust_coeff_ns2")]
    FlapThrustCoeff,
    #[serde(rename = "branch.center_z_m")]
    BranchHeight,
}

impl DispersedParameter {
    /// File units are degrees for angle keys; everything else is SI already.
    fn to_internal(self, file_value: f64) -> f64 {
        match self {
            DispersedParameter::LaunchAngleOfAttack | DispersedParameter::LaunchHeading => file_value.to_radians(),
            _ => file_value,
        }
    }

    fn slot(self, s: &mut Scenario) -> &mut f64 {
        match self {
            DispersedParameter::ExitSpeed => &mut s.launch.exit_speed,
            DispersedParameter::LaunchAngleOfAttack => &mut s.launch.angle_of_attack,
            DispersedParameter::LaunchHeading => &mut s.launch.heading,
            DispersedParameter::LaunchLateralOffset => &mut s.launch.lateral_offset,
            DispersedParameter::RailHeight => &mut s.launch.rail_height,
            DispersedParameter::Mass => &mut s.vehicle.mass,
            DispersedParameter::FlapThrustCoeff => &mut s.vehicle.flap_thrust_coeff,
            DispersedParameter::BranchHeight => &mut s.branch.center.z,
        }
    }
}

/// One perturbation: exactly one of `gaussian_std` or `uniform_half_width`,
/// in the units of the parameter key, centred on the nominal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dispersion {
    pub parameter: DispersedParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_half_width: Option<f64>,
}

impl Dispersion {
    pub fn validate(&self, index: usize) -> Result<()> {
        let key = |field: &str| format!("dispersions[{index}].{field}");
        match (self.gaussian_std, self.uniform_half_width) {
            (Some(v), None) if v.is_finite() && v >= 0.0 => Ok(()),
            (None, Some(v)) if v.is_finite() && v >= 0.0 => Ok(()),
            (Some(_), None) => Err(Error::config(key("gaussian_std"), "must be finite and >= 0")),
            (None, Some(_)) => Err(Error::config(key("uniform_half_width"), "must be finite and >= 0")),
            _ => Err(Error::config(
                key("gaussian_std"),
                "exactly one of gaussian_std or uniform_half_width is required",
            )),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let offset = match (self.gaussian_std, self.uniform_half_width) {
            (Some(sd), _) => sd * rng.sample::<f64, _>(StandardNormal),
            (None, Some(hw)) => hw * (2.0 * rng.random::<f64>() - 1.0),
            (None, None) => 0.0,
        };
        self.parameter.to_internal(offset)
    }
}

/// Copy of `scenario` with every dispersion applied once, in file order.
pub fn apply_dispersions<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Scenario> {
    let mut out = scenario.clone();
    for d in &scenario.dispersions {
        let offset = d.sample(rng);
        *d.parameter.slot(&mut out) += offset;
    }
    out.validate()?;
    Ok(out)
}
