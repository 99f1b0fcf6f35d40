//! Demand-driven steady-state hydraulics.
//!
//! Heads at junctions are found by Newton iteration on the nodal mass
//! balance (the global gradient formulation): each step linearizes every
//! link law, solves a sparse SPD system for junction heads and updates the
//! link flows from those heads.

mod balance;
mod headloss;
mod pump;
mod solver;

pub use balance::{check_balance, BalanceReport};
pub use headloss::{
    darcy_friction, headloss_coefficient, minor_loss_coefficient, HeadlossError, LinkLaw,
    GRAVITY, HAZEN_WILLIAMS_EXPONENT, OPEN_VALVE_RESISTANCE, PUMP_REVERSE_RESISTANCE,
    WATER_VISCOSITY,
};
pub use pump::{PumpCurve, PumpCurveError};
pub use solver::{
    link_headloss, link_law, solve_steady_state, ControlSettings, HydraulicSolver,
    HydraulicState, SolverConfig, SolverError,
};
