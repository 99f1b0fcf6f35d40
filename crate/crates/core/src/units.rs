//! Unit systems of the INP format and their conversion to SI.
//!
//! Every quantity inside [`crate::network::NetworkModel`] is SI: meters for
//! lengths, elevations and heads, meters for diameters, m³/s for flows. The
//! conversion happens exactly once, when a file is parsed, and is undone when
//! a model is serialized.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const FOOT: f64 = 0.3048;
const INCH: f64 = 0.0254;
const US_GALLON: f64 = 0.003_785_411_784;
const IMPERIAL_GALLON: f64 = 0.004_546_09;
const ACRE_FOOT: f64 = 1_233.481_837_547_52;
const DAY: f64 = 86_400.0;

/// Flow units accepted in `[OPTIONS] Units`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FlowUnits {
    Cfs,
    Gpm,
    Mgd,
    Imgd,
    Afd,
    Lps,
    Lpm,
    Mld,
    Cmh,
    Cmd,
}

impl FlowUnits {
    /// Cubic meters per second in one unit of this flow.
    pub fn to_si(self) -> f64 {
        match self {
            FlowUnits::Cfs => FOOT * FOOT * FOOT,
            FlowUnits::Gpm => US_GALLON / 60.0,
            FlowUnits::Mgd => 1.0e6 * US_GALLON / DAY,
            FlowUnits::Imgd => 1.0e6 * IMPERIAL_GALLON / DAY,
            FlowUnits::Afd => ACRE_FOOT / DAY,
            FlowUnits::Lps => 1.0e-3,
            FlowUnits::Lpm => 1.0e-3 / 60.0,
            FlowUnits::Mld => 1.0e3 / DAY,
            FlowUnits::Cmh => 1.0 / 3600.0,
            FlowUnits::Cmd => 1.0 / DAY,
        }
    }

    /// US customary flow units imply feet/inches for every other quantity.
    pub fn is_us_customary(self) -> bool {
        matches!(
            self,
            FlowUnits::Cfs | FlowUnits::Gpm | FlowUnits::Mgd | FlowUnits::Imgd | FlowUnits::Afd
        )
    }

    /// Meters per unit of length, elevation and head.
    pub fn length_to_si(self) -> f64 {
        if self.is_us_customary() {
            FOOT
        } else {
            1.0
        }
    }

    /// Meters per unit of pipe and valve diameter (inches or millimeters).
    pub fn diameter_to_si(self) -> f64 {
        if self.is_us_customary() {
            INCH
        } else {
            1.0e-3
        }
    }

    /// Meters per unit of Darcy-Weisbach roughness (millifeet or millimeters).
    pub fn dw_roughness_to_si(self) -> f64 {
        if self.is_us_customary() {
            1.0e-3 * FOOT
        } else {
            1.0e-3
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FlowUnits::Cfs => "CFS",
            FlowUnits::Gpm => "GPM",
            FlowUnits::Mgd => "MGD",
            FlowUnits::Imgd => "IMGD",
            FlowUnits::Afd => "AFD",
            FlowUnits::Lps => "LPS",
            FlowUnits::Lpm => "LPM",
            FlowUnits::Mld => "MLD",
            FlowUnits::Cmh => "CMH",
            FlowUnits::Cmd => "CMD",
        }
    }
}

impl fmt::Display for FlowUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowUnits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "CFS" => FlowUnits::Cfs,
            "GPM" => FlowUnits::Gpm,
            "MGD" => FlowUnits::Mgd,
            "IMGD" => FlowUnits::Imgd,
            "AFD" => FlowUnits::Afd,
            "LPS" => FlowUnits::Lps,
            "LPM" => FlowUnits::Lpm,
            "MLD" => FlowUnits::Mld,
            "CMH" => FlowUnits::Cmh,
            "CMD" => FlowUnits::Cmd,
            other => return Err(format!("unknown flow units {other:?}")),
        })
    }
}
