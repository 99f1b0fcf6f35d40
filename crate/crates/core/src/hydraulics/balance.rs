use super::solver::{link_headloss, ControlSettings, HydraulicState, SolverConfig};
use crate::network::NetworkModel;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Residuals of a state recomputed from the model alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// Net inflow minus demand per junction, m³/s.
    pub mass_residuals: Vec<f64>,
    /// `(H_from - H_to) - h(q)` per link, m. Zero for closed links.
    pub energy_residuals: Vec<f64>,
    pub max_mass_residual: f64,
    pub max_energy_residual: f64,
}

/// Mass and energy residuals of `state`. Incidence is rebuilt from the link
/// endpoint ids and link laws are evaluated afresh, so nothing computed by
/// the solver is trusted apart from the heads and flows themselves.
pub fn check_balance(
    model: &NetworkModel,
    controls: &ControlSettings,
    state: &HydraulicState,
) -> BalanceReport {
    let q_min = SolverConfig::default().q_min;
    let junction_of: HashMap<&str, usize> = model
        .junctions
        .iter()
        .enumerate()
        .map(|(i, j)| (j.id.as_str(), i))
        .collect();
    let node_of = model.node_index();

    let mut mass: Vec<f64> = controls.demands.iter().map(|d| -d).collect();
    let mut energy = Vec::with_capacity(model.link_count());
    for (l, link) in model.links().enumerate() {
        let q = state.flows[l];
        if let Some(&j) = junction_of.get(link.from) {
            mass[j] -= q;
        }
        if let Some(&j) = junction_of.get(link.to) {
            mass[j] += q;
        }
        let residual = match link_headloss(model, l, q, controls, q_min) {
            Ok((h, _)) => state.heads[node_of[link.from]] - state.heads[node_of[link.to]] - h,
            Err(_) => 0.0,
        };
        energy.push(residual);
    }
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    BalanceReport {
        max_mass_residual: max_abs(&mass),
        max_energy_residual: max_abs(&energy),
        mass_residuals: mass,
        energy_residuals: energy,
    }
}
