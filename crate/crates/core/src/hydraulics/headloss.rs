//! Headloss laws of pipes, pumps and valves.
//!
//! Every law returns the head drop `h` from the upstream (`from`) to the
//! downstream (`to`) node for a signed flow `q` together with `dh/dq`. Pumps
//! therefore report negative headloss while they add energy.

use super::pump::{PumpCurve, PumpCurveError};
use crate::network::{HeadlossFormula, Pipe};
use std::f64::consts::PI;
use thiserror::Error;

pub const GRAVITY: f64 = 9.80665;
pub const HAZEN_WILLIAMS_EXPONENT: f64 = 1.852;
/// Kinematic viscosity of water at 20 °C, m²/s.
pub const WATER_VISCOSITY: f64 = 1.1e-5 * 0.092_903_04;
/// Linear resistance of an open valve without a loss coefficient, m per m³/s.
pub const OPEN_VALVE_RESISTANCE: f64 = 1.0e-3;
/// Slope applied to reverse flow through a pump, m per m³/s. Pumps act as
/// check valves; the steep branch keeps reverse flow negligible.
pub const PUMP_REVERSE_RESISTANCE: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadlossError {
    #[error("link {0} has non-positive length, diameter or roughness")]
    NonPositiveGeometry(String),
    #[error("link {0} is closed")]
    ClosedLink(String),
    #[error("pump {pump}: {source}")]
    BadPumpCurve {
        pump: String,
        #[source]
        source: PumpCurveError,
    },
    #[error("pump {pump} references unknown curve {curve}")]
    UnknownCurve { pump: String, curve: String },
}

/// Resistance `r` of a pipe.
///
/// Hazen-Williams: `r = 10.667 C^-1.852 D^-4.871 L` so that `h = r q^1.852`.
/// Darcy-Weisbach: the geometric factor `8 L / (π² g D⁵)`; the friction
/// factor is applied per flow by [`darcy_friction`].
pub fn headloss_coefficient(pipe: &Pipe, formula: HeadlossFormula) -> Result<f64, HeadlossError> {
    if !(pipe.length > 0.0 && pipe.diameter > 0.0 && pipe.roughness > 0.0) {
        return Err(HeadlossError::NonPositiveGeometry(pipe.id.clone()));
    }
    Ok(match formula {
        HeadlossFormula::HazenWilliams => {
            10.667
                * pipe.roughness.powf(-HAZEN_WILLIAMS_EXPONENT)
                * pipe.diameter.powf(-4.871)
                * pipe.length
        }
        HeadlossFormula::DarcyWeisbach => {
            8.0 * pipe.length / (PI * PI * GRAVITY * pipe.diameter.powi(5))
        }
    })
}

/// Minor loss coefficient `m` such that `h = m q|q|` for a loss factor `k`.
pub fn minor_loss_coefficient(k: f64, diameter: f64) -> f64 {
    if k <= 0.0 {
        0.0
    } else {
        8.0 * k / (PI * PI * GRAVITY * diameter.powi(4))
    }
}

/// Darcy friction factor and its derivative with respect to the Reynolds
/// number. Laminar below 2000, Swamee-Jain above 4000, linear in between.
pub fn darcy_friction(reynolds: f64, relative_roughness: f64) -> (f64, f64) {
    const LAMINAR_END: f64 = 2000.0;
    const TURBULENT_START: f64 = 4000.0;
    let swamee_jain = |re: f64| -> (f64, f64) {
        let x = relative_roughness / 3.7 + 5.74 * re.powf(-0.9);
        let l = x.log10();
        let f = 0.25 / (l * l);
        let dx = -0.9 * 5.74 * re.powf(-1.9);
        let dl = dx / (x * std::f64::consts::LN_10);
        (f, -0.5 * dl / (l * l * l))
    };
    if reynolds < LAMINAR_END {
        (64.0 / reynolds, -64.0 / (reynolds * reynolds))
    } else if reynolds < TURBULENT_START {
        let f_lo = 64.0 / LAMINAR_END;
        let (f_hi, _) = swamee_jain(TURBULENT_START);
        let slope = (f_hi - f_lo) / (TURBULENT_START - LAMINAR_END);
        (f_lo + slope * (reynolds - LAMINAR_END), slope)
    } else {
        swamee_jain(reynolds)
    }
}

/// A link's headloss law, compiled from the model once per solver.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkLaw {
    HazenWilliams {
        r: f64,
        minor: f64,
    },
    DarcyWeisbach {
        r: f64,
        minor: f64,
        diameter: f64,
        relative_roughness: f64,
        viscosity: f64,
    },
    Pump(PumpCurve),
    Valve {
        minor: f64,
    },
}

impl LinkLaw {
    /// Headloss and derivative for flow `q`.
    ///
    /// Pipe and valve laws are replaced by their secant through `±q_min`
    /// when `|q| < q_min`, so the derivative never vanishes and the law stays
    /// continuous. `speed` only matters for pumps.
    pub fn eval(&self, q: f64, speed: f64, q_min: f64) -> (f64, f64) {
        let aq = q.abs();
        match *self {
            LinkLaw::HazenWilliams { r, minor } => {
                let n = HAZEN_WILLIAMS_EXPONENT;
                if aq < q_min {
                    let slope = r * q_min.powf(n - 1.0) + minor * q_min;
                    (slope * q, slope)
                } else {
                    let t = r * aq.powf(n - 1.0);
                    (t * q + minor * aq * q, n * t + 2.0 * minor * aq)
                }
            }
            LinkLaw::DarcyWeisbach {
                r,
                minor,
                diameter,
                relative_roughness,
                viscosity,
            } => {
                let re_per_q = 4.0 / (PI * diameter * viscosity);
                if aq * re_per_q < 2000.0 {
                    // f|q| is constant in the laminar regime: a linear law.
                    let lam = 64.0 / re_per_q;
                    let slope = r * lam + minor * q_min;
                    if aq < q_min {
                        return (slope * q, slope);
                    }
                    return (r * lam * q + minor * aq * q, r * lam + 2.0 * minor * aq);
                }
                let re = aq * re_per_q;
                let (f, df) = darcy_friction(re, relative_roughness);
                let h = (r * f + minor) * aq * q;
                let dh = 2.0 * (r * f + minor) * aq + r * df * re_per_q * aq * aq;
                (h, dh)
            }
            LinkLaw::Pump(curve) => {
                let shutoff = speed * speed * curve.shutoff_head;
                if q < 0.0 {
                    (-shutoff + PUMP_REVERSE_RESISTANCE * q, PUMP_REVERSE_RESISTANCE)
                } else {
                    let c = curve.coefficient * speed.powf(2.0 - curve.exponent);
                    let m = curve.exponent;
                    if q < q_min {
                        let slope = c * q_min.powf(m - 1.0);
                        (-shutoff + slope * q, slope)
                    } else {
                        (-shutoff + c * q.powf(m), m * c * q.powf(m - 1.0))
                    }
                }
            }
            LinkLaw::Valve { minor } => {
                let slope_at = |a: f64| OPEN_VALVE_RESISTANCE + minor * a;
                if aq < q_min {
                    let s = slope_at(q_min);
                    (s * q, s)
                } else {
                    (slope_at(aq) * q, OPEN_VALVE_RESISTANCE + 2.0 * minor * aq)
                }
            }
        }
    }
}
