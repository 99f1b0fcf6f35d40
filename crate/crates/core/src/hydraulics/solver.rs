use super::headloss::{headloss_coefficient, minor_loss_coefficient, HeadlossError, LinkLaw};
use super::headloss::WATER_VISCOSITY;
use super::pump::PumpCurve;
use crate::network::{HeadlossFormula, LinkKind, LinkRef, LinkStatus, NetworkModel};
use crate::sparse::ProfileMatrix;
use crate::validate::{validate, ValidationReport};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Boundary conditions of one steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSettings {
    /// Demand per junction, m³/s, in model order.
    pub demands: Vec<f64>,
    /// Total head per reservoir, m.
    pub reservoir_heads: Vec<f64>,
    /// Relative speed per pump.
    pub pump_speeds: Vec<f64>,
    /// Optional status override per link in canonical order (pipes, pumps,
    /// valves). An empty list means no overrides.
    #[serde(default)]
    pub link_status: Vec<Option<LinkStatus>>,
}

impl ControlSettings {
    /// The file's own values: base demands times the global multiplier,
    /// reservoir heads and pump speeds as written.
    pub fn base(model: &NetworkModel) -> Self {
        let mult = model.options.demand_multiplier;
        ControlSettings {
            demands: model
                .junctions
                .iter()
                .map(|j| j.total_base_demand() * mult)
                .collect(),
            reservoir_heads: model.reservoirs.iter().map(|r| r.head).collect(),
            pump_speeds: model.pumps.iter().map(|p| p.speed).collect(),
            link_status: Vec::new(),
        }
    }

    /// Flatten into one vector: demands, reservoir heads, pump speeds.
    pub fn to_vector(&self) -> Vec<f64> {
        self.demands
            .iter()
            .chain(&self.reservoir_heads)
            .chain(&self.pump_speeds)
            .copied()
            .collect()
    }

    fn is_open(&self, link_index: usize, link: &LinkRef) -> bool {
        let status = self
            .link_status
            .get(link_index)
            .copied()
            .flatten()
            .unwrap_or(link.status);
        let running = match link.kind {
            LinkKind::Pump => self.pump_speeds.get(link.index).is_some_and(|&w| w > 0.0),
            _ => true,
        };
        status == LinkStatus::Open && running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Largest admissible nodal mass imbalance, m³/s.
    pub tol_flow: f64,
    /// Largest admissible energy residual across a link, m.
    pub tol_head: f64,
    pub max_iterations: usize,
    /// Below this flow magnitude link laws are linearized, m³/s.
    pub q_min: f64,
    /// Starting flow of every open link, m³/s, oriented from→to.
    pub initial_flow: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_flow: 1e-6,
            tol_head: 1e-4,
            max_iterations: 200,
            q_min: 1e-8,
            initial_flow: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState {
    /// Total head per node in canonical order, m.
    pub heads: Vec<f64>,
    /// `head - elevation` per node, mH₂O.
    pub pressures: Vec<f64>,
    /// Signed flow per link in canonical order, m³/s.
    pub flows: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_nodal_residual: f64,
    pub max_energy_residual: f64,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("model failed validation with {} issue(s)", .0.issues.len())]
    InvalidModel(ValidationReport),
    #[error(transparent)]
    Headloss(#[from] HeadlossError),
    #[error("junction {0} is not connected to any fixed-head node")]
    SingularSystem(String),
    #[error("controls do not match the model: {0}")]
    ControlMismatch(String),
    #[error(
        "no convergence after {} iterations (mass residual {:e}, energy residual {:e})",
        .0.iterations, .0.max_nodal_residual, .0.max_energy_residual
    )]
    NotConverged(Box<HydraulicState>),
}

/// Headloss law of one link as described by the model.
pub fn link_law(model: &NetworkModel, link: &LinkRef) -> Result<LinkLaw, HeadlossError> {
    Ok(match link.kind {
        LinkKind::Pipe => {
            let pipe = &model.pipes[link.index];
            let r = headloss_coefficient(pipe, model.options.headloss)?;
            let minor = minor_loss_coefficient(pipe.minor_loss, pipe.diameter);
            match model.options.headloss {
                HeadlossFormula::HazenWilliams => LinkLaw::HazenWilliams { r, minor },
                HeadlossFormula::DarcyWeisbach => LinkLaw::DarcyWeisbach {
                    r,
                    minor,
                    diameter: pipe.diameter,
                    relative_roughness: pipe.roughness / pipe.diameter,
                    viscosity: WATER_VISCOSITY * model.options.viscosity,
                },
            }
        }
        LinkKind::Pump => {
            let pump = &model.pumps[link.index];
            let points = model
                .curves
                .get(&pump.curve)
                .ok_or_else(|| HeadlossError::UnknownCurve {
                    pump: pump.id.clone(),
                    curve: pump.curve.clone(),
                })?;
            let curve = PumpCurve::fit(points).map_err(|source| HeadlossError::BadPumpCurve {
                pump: pump.id.clone(),
                source,
            })?;
            LinkLaw::Pump(curve)
        }
        LinkKind::Valve => {
            let valve = &model.valves[link.index];
            LinkLaw::Valve {
                minor: minor_loss_coefficient(valve.minor_loss, valve.diameter),
            }
        }
    })
}

/// Headloss `h` (from→to) and `dh/dq` of link `link_index` (canonical
/// order) at flow `q` under the given controls.
pub fn link_headloss(
    model: &NetworkModel,
    link_index: usize,
    q: f64,
    controls: &ControlSettings,
    q_min: f64,
) -> Result<(f64, f64), HeadlossError> {
    let link = model
        .links()
        .nth(link_index)
        .expect("link index within the model");
    if !controls.is_open(link_index, &link) {
        return Err(HeadlossError::ClosedLink(link.id.to_string()));
    }
    let speed = match link.kind {
        LinkKind::Pump => controls.pump_speeds[link.index],
        _ => 1.0,
    };
    Ok(link_law(model, &link)?.eval(q, speed, q_min))
}

/// A network compiled for repeated solves: link laws, incidence and the
/// symbolic factorization are built once and shared by every snapshot.
#[derive(Debug, Clone)]
pub struct HydraulicSolver {
    config: SolverConfig,
    node_ids: Vec<String>,
    elevations: Vec<f64>,
    junctions: usize,
    reservoirs: usize,
    tank_heads: Vec<f64>,
    laws: Vec<LinkLaw>,
    ends: Vec<(usize, usize)>,
    kinds: Vec<(LinkKind, usize)>,
    base_status: Vec<LinkStatus>,
    template: ProfileMatrix,
}

impl HydraulicSolver {
    pub fn new(model: &NetworkModel, config: SolverConfig) -> Result<Self, SolverError> {
        let report = validate(model);
        if !report.is_empty() {
            return Err(SolverError::InvalidModel(report));
        }
        let index = model.node_index();
        let junctions = model.junctions.len();
        let mut laws = Vec::with_capacity(model.link_count());
        let mut ends = Vec::with_capacity(model.link_count());
        let mut kinds = Vec::with_capacity(model.link_count());
        let mut base_status = Vec::with_capacity(model.link_count());
        let mut pairs = Vec::new();
        for link in model.links() {
            laws.push(link_law(model, &link)?);
            let (a, b) = (index[link.from], index[link.to]);
            ends.push((a, b));
            kinds.push((link.kind, link.index));
            base_status.push(link.status);
            if a < junctions && b < junctions && a != b {
                pairs.push((a, b));
            }
        }
        Ok(HydraulicSolver {
            config,
            node_ids: model.node_ids().map(str::to_string).collect(),
            elevations: model.node_elevations(),
            junctions,
            reservoirs: model.reservoirs.len(),
            tank_heads: model.tanks.iter().map(|t| t.fixed_head()).collect(),
            laws,
            ends,
            kinds,
            base_status,
            template: ProfileMatrix::new(junctions, &pairs),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn check_controls(&self, controls: &ControlSettings) -> Result<(), SolverError> {
        let pumps = self.kinds.iter().filter(|k| k.0 == LinkKind::Pump).count();
        let mismatch = |what: &str, got: usize, want: usize| {
            SolverError::ControlMismatch(format!("{got} {what} given, {want} expected"))
        };
        if controls.demands.len() != self.junctions {
            return Err(mismatch("demands", controls.demands.len(), self.junctions));
        }
        if controls.reservoir_heads.len() != self.reservoirs {
            return Err(mismatch(
                "reservoir heads",
                controls.reservoir_heads.len(),
                self.reservoirs,
            ));
        }
        if controls.pump_speeds.len() != pumps {
            return Err(mismatch("pump speeds", controls.pump_speeds.len(), pumps));
        }
        if !controls.link_status.is_empty() && controls.link_status.len() != self.laws.len() {
            return Err(mismatch(
                "link statuses",
                controls.link_status.len(),
                self.laws.len(),
            ));
        }
        Ok(())
    }

    fn open_links(&self, controls: &ControlSettings) -> Vec<bool> {
        (0..self.laws.len())
            .map(|l| {
                let status = controls
                    .link_status
                    .get(l)
                    .copied()
                    .flatten()
                    .unwrap_or(self.base_status[l]);
                let running = match self.kinds[l] {
                    (LinkKind::Pump, i) => controls.pump_speeds[i] > 0.0,
                    _ => true,
                };
                status == LinkStatus::Open && running
            })
            .collect()
    }

    /// Every junction must reach a fixed-head node through open links.
    fn check_supply(&self, open: &[bool]) -> Result<(), SolverError> {
        let n = self.node_ids.len();
        let mut adjacency = vec![Vec::new(); n];
        for (l, &(a, b)) in self.ends.iter().enumerate() {
            if open[l] {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        let mut reached = vec![false; n];
        let mut queue: VecDeque<usize> = (self.junctions..n).collect();
        for &s in &queue {
            reached[s] = true;
        }
        while let Some(v) = queue.pop_front() {
            for &u in &adjacency[v] {
                if !reached[u] {
                    reached[u] = true;
                    queue.push_back(u);
                }
            }
        }
        match reached[..self.junctions].iter().position(|r| !r) {
            Some(j) => Err(SolverError::SingularSystem(self.node_ids[j].clone())),
            None => Ok(()),
        }
    }

    fn speed(&self, link: usize, controls: &ControlSettings) -> f64 {
        match self.kinds[link] {
            (LinkKind::Pump, i) => controls.pump_speeds[i],
            _ => 1.0,
        }
    }

    pub fn solve(&self, controls: &ControlSettings) -> Result<HydraulicState, SolverError> {
        self.check_controls(controls)?;
        let open = self.open_links(controls);
        self.check_supply(&open)?;

        let cfg = &self.config;
        let nj = self.junctions;
        let n = self.node_ids.len();
        let mut heads = vec![0.0; n];
        heads[nj..nj + self.reservoirs].copy_from_slice(&controls.reservoir_heads);
        heads[nj + self.reservoirs..].copy_from_slice(&self.tank_heads);
        let mut flows: Vec<f64> = open
            .iter()
            .map(|&o| if o { cfg.initial_flow } else { 0.0 })
            .collect();

        let links = self.laws.len();
        let mut matrix = self.template.clone();
        let mut rhs = vec![0.0; nj];
        let mut p = vec![0.0; links];
        let mut x = vec![0.0; links];
        let mut balance = vec![0.0; nj];
        let mut state = HydraulicState {
            heads: Vec::new(),
            pressures: Vec::new(),
            flows: Vec::new(),
            converged: false,
            iterations: 0,
            max_nodal_residual: f64::INFINITY,
            max_energy_residual: f64::INFINITY,
        };

        for iteration in 1..=cfg.max_iterations {
            matrix.clear();
            for (r, d) in rhs.iter_mut().zip(&controls.demands) {
                *r = -d;
            }
            for l in 0..links {
                if !open[l] {
                    continue;
                }
                let (h, dh) = self.laws[l].eval(flows[l], self.speed(l, controls), cfg.q_min);
                let pl = 1.0 / dh;
                p[l] = pl;
                x[l] = flows[l] - pl * h;
                let (a, b) = self.ends[l];
                if a < nj {
                    matrix.add(a, a, pl);
                    rhs[a] -= x[l];
                } else if b < nj {
                    rhs[b] += pl * heads[a];
                }
                if b < nj {
                    matrix.add(b, b, pl);
                    rhs[b] += x[l];
                    if a < nj && a != b {
                        matrix.add(a, b, -pl);
                    }
                } else if a < nj {
                    rhs[a] += pl * heads[b];
                }
            }
            if let Err(e) = matrix.factor_solve(&mut rhs) {
                return Err(SolverError::SingularSystem(self.node_ids[e.0].clone()));
            }
            heads[..nj].copy_from_slice(&rhs);

            balance.copy_from_slice(&controls.demands);
            balance.iter_mut().for_each(|v| *v = -*v);
            let mut energy: f64 = 0.0;
            for l in 0..links {
                if !open[l] {
                    continue;
                }
                let (a, b) = self.ends[l];
                let q = x[l] + p[l] * (heads[a] - heads[b]);
                flows[l] = q;
                if a < nj {
                    balance[a] -= q;
                }
                if b < nj {
                    balance[b] += q;
                }
                let (h, _) = self.laws[l].eval(q, self.speed(l, controls), cfg.q_min);
                energy = energy.max((heads[a] - heads[b] - h).abs());
            }
            let mass = balance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            state.iterations = iteration;
            state.max_nodal_residual = mass;
            state.max_energy_residual = energy;
            if mass <= cfg.tol_flow && energy <= cfg.tol_head {
                state.converged = true;
                break;
            }
        }

        state.pressures = heads
            .iter()
            .zip(&self.elevations)
            .map(|(h, z)| h - z)
            .collect();
        state.heads = heads;
        state.flows = flows;
        if state.converged {
            Ok(state)
        } else {
            Err(SolverError::NotConverged(Box::new(state)))
        }
    }
}

/// One-shot convenience around [`HydraulicSolver`].
pub fn solve_steady_state(
    model: &NetworkModel,
    controls: &ControlSettings,
    config: &SolverConfig,
) -> Result<HydraulicState, SolverError> {
    HydraulicSolver::new(model, *config)?.solve(controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inp::parse_inp;

    fn two_node(demand_lps: f64) -> NetworkModel {
        parse_inp(&format!(
            "[JUNCTIONS]\nJ1 10 {demand_lps}\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 300 100\n\
             [OPTIONS]\nUnits LPS\n"
        ))
        .unwrap()
    }

    #[test]
    fn zero_demand_is_hydrostatic() {
        let m = two_node(0.0);
        let s = solve_steady_state(&m, &ControlSettings::base(&m), &SolverConfig::default())
            .unwrap();
        assert!((s.pressures[0] - 40.0).abs() < 1e-9);
        assert!(s.flows[0].abs() < 1e-6);
    }

    #[test]
    fn single_pipe_matches_hazen_williams() {
        let m = two_node(50.0);
        let s = solve_steady_state(&m, &ControlSettings::base(&m), &SolverConfig::default())
            .unwrap();
        // 742.9928994276828 * 0.05^1.852, computed independently.
        assert!((s.pressures[0] - (40.0 - 2.893_857_298_109_181_5)).abs() < 1e-6);
        assert!((s.flows[0] - 0.05).abs() < 1e-9);
    }

    #[test]
    fn closing_the_only_pipe_is_singular() {
        let m = two_node(1.0);
        let mut c = ControlSettings::base(&m);
        c.link_status = vec![Some(LinkStatus::Closed)];
        assert!(matches!(
            solve_steady_state(&m, &c, &SolverConfig::default()),
            Err(SolverError::SingularSystem(id)) if id == "J1"
        ));
    }

    #[test]
    fn mismatched_controls() {
        let m = two_node(1.0);
        let mut c = ControlSettings::base(&m);
        c.demands.push(0.0);
        assert!(matches!(
            solve_steady_state(&m, &c, &SolverConfig::default()),
            Err(SolverError::ControlMismatch(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_state() {
        let m = two_node(50.0);
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        match solve_steady_state(&m, &ControlSettings::base(&m), &cfg) {
            Err(SolverError::NotConverged(s)) => {
                assert!(!s.converged);
                assert_eq!(s.iterations, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
