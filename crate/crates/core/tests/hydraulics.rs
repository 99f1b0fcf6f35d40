mod common;

use common::{bundled, random_net, RandomNet};
use gatres_core::hydraulics::*;
use gatres_core::inp::parse_inp;
use gatres_core::network::NetworkModel;
use proptest::prelude::*;

/// Hazen-Williams headloss written out from the SI formula.
fn hw_headloss(q: f64, c: f64, d: f64, l: f64) -> f64 {
    10.667 * c.powf(-1.852) * d.powf(-4.871) * l * q.powf(1.852)
}

fn solve(model: &NetworkModel) -> HydraulicState {
    solve_steady_state(model, &ControlSettings::base(model), &SolverConfig::default()).unwrap()
}

#[test]
fn single_pipe_matches_hand_calculation() {
    let text = "[JUNCTIONS]\nJ1 10 50\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 1000 300 100 0 Open\n[OPTIONS]\nUnits LPS\n[END]\n";
    let state = solve(&parse_inp(text).unwrap());
    let expected = 40.0 - hw_headloss(0.05, 100.0, 0.3, 1000.0);
    assert!((state.pressures[0] - expected).abs() < 1e-6);
    // Frozen value of the same formula.
    assert!((expected - 37.10614270189082).abs() < 1e-12);
    assert!((state.flows[0] - 0.05).abs() < 1e-9);
}

#[test]
fn series_pair_matches_hand_calculation() {
    let text = "[JUNCTIONS]\nJ1 5 30\nJ2 8 20\n[RESERVOIRS]\nR1 60\n[PIPES]\nP1 R1 J1 800 250 120 0 Open\nP2 J1 J2 600 200 110 0 Open\n[OPTIONS]\nUnits LPS\n[END]\n";
    let state = solve(&parse_inp(text).unwrap());
    // Flows follow from continuity in a tree.
    let h1 = 60.0 - hw_headloss(0.05, 120.0, 0.25, 800.0);
    let h2 = h1 - hw_headloss(0.02, 110.0, 0.2, 600.0);
    assert!((state.pressures[0] - (h1 - 5.0)).abs() < 1e-6);
    assert!((state.pressures[1] - (h2 - 8.0)).abs() < 1e-6);
    assert!((h1 - 5.0 - 50.98564957977427).abs() < 1e-9);
    assert!((h2 - 8.0 - 46.06377635786766).abs() < 1e-9);
}

#[test]
fn parallel_pipes_split_evenly() {
    let text = "[JUNCTIONS]\nJ1 0 40\n[RESERVOIRS]\nR1 30\n[PIPES]\nA R1 J1 500 200 100 0 Open\nB R1 J1 500 200 100 0 Open\n[OPTIONS]\nUnits LPS\n[END]\n";
    let state = solve(&parse_inp(text).unwrap());
    assert!((state.flows[0] - 0.02).abs() < 1e-9);
    assert!((state.flows[0] - state.flows[1]).abs() < 1e-12);
}

#[test]
fn perturbed_flow_shows_in_the_residual() {
    let model = bundled("anytown");
    let controls = ControlSettings::base(&model);
    let mut state = solve(&model);
    let clean = check_balance(&model, &controls, &state);
    assert!(clean.max_mass_residual <= 1e-6);
    // Pipe 0 of the file leaves its from-node; pick a pipe between two
    // junctions so both ends see the change.
    let idx: std::collections::HashMap<&str, usize> = model.node_index();
    let (k, pipe) = model
        .pipes
        .iter()
        .enumerate()
        .find(|(_, p)| idx[p.from.as_str()] < model.junctions.len() && idx[p.to.as_str()] < model.junctions.len())
        .unwrap();
    state.flows[k] += 0.01;
    let report = check_balance(&model, &controls, &state);
    let from = idx[pipe.from.as_str()];
    let to = idx[pipe.to.as_str()];
    assert!((report.mass_residuals[from] - clean.mass_residuals[from] + 0.01).abs() < 1e-12);
    assert!((report.mass_residuals[to] - clean.mass_residuals[to] - 0.01).abs() < 1e-12);
}

#[test]
fn bundled_base_states_balance() {
    for name in ["anytown", "net1", "net3", "ltown"] {
        let model = bundled(name);
        let controls = ControlSettings::base(&model);
        let state = solve(&model);
        let report = check_balance(&model, &controls, &state);
        assert!(report.max_mass_residual <= 1e-6, "{name}: {}", report.max_mass_residual);
        assert!(report.max_energy_residual <= 1e-4, "{name}: {}", report.max_energy_residual);
    }
}

fn relabeled(net: &RandomNet) -> (String, Vec<usize>) {
    // Reverse junction and pipe order in the file.
    let mut rev = net.clone();
    rev.junctions.reverse();
    let r = net.reservoir_heads.len();
    let n = net.junctions.len();
    let map = |i: usize| if i < r { i } else { r + (n - 1 - (i - r)) };
    rev.pipes = net.pipes.iter().rev().map(|&(a, b, l, d, c)| (map(a), map(b), l, d, c)).collect();
    let text = rev.to_inp();
    // Junction k of the original is junction n-1-k of the relabeled file.
    (text, (0..n).map(|k| n - 1 - k).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_networks_satisfy_mass_and_energy(net in random_net(15), scale in 0.0f64..3.0) {
        let model = net.model();
        let mut controls = ControlSettings::base(&model);
        controls.demands.iter_mut().for_each(|d| *d *= scale);
        let state = solve_steady_state(&model, &controls, &SolverConfig::default()).unwrap();
        prop_assert!(state.converged);
        let report = check_balance(&model, &controls, &state);
        prop_assert!(report.max_mass_residual <= 1e-6, "mass {}", report.max_mass_residual);
        prop_assert!(report.max_energy_residual <= 1e-4, "energy {}", report.max_energy_residual);
        for (i, z) in model.node_elevations().iter().enumerate() {
            prop_assert_eq!(state.pressures[i], state.heads[i] - z);
        }
        // Fixed heads are imposed exactly.
        let nj = model.junctions.len();
        for (k, h) in controls.reservoir_heads.iter().enumerate() {
            prop_assert_eq!(state.heads[nj + k], *h);
        }
        // Same inputs, same bits.
        let again = solve_steady_state(&model, &controls, &SolverConfig::default()).unwrap();
        prop_assert_eq!(again, state);
    }

    #[test]
    fn zero_demand_gives_static_heads(net in random_net(10)) {
        prop_assume!(net.reservoir_heads.len() == 1);
        let h = net.reservoir_heads[0];
        let model = net.model();
        let mut controls = ControlSettings::base(&model);
        controls.demands.iter_mut().for_each(|d| *d = 0.0);
        let state = solve_steady_state(&model, &controls, &SolverConfig::default()).unwrap();
        // Loops may keep a circulation too small to register against the
        // head tolerance; a tree has none.
        let tree = net.pipes.len() == net.junctions.len();
        for q in &state.flows {
            if tree {
                prop_assert!(q.abs() < 1e-7, "flows {:?}", state.flows);
            }
        }
        for (i, j) in model.junctions.iter().enumerate() {
            prop_assert!((state.pressures[i] - (h - j.elevation)).abs() < 1e-4);
        }
    }

    #[test]
    fn more_demand_means_less_pressure(d1 in 1.0f64..40.0, extra in 0.5f64..40.0, c in 80.0f64..140.0) {
        let text = |d: f64| format!("[JUNCTIONS]\nJ1 10 {d}\n[RESERVOIRS]\nR1 60\n[PIPES]\nP1 R1 J1 800 250 {c} 0 Open\n[OPTIONS]\nUnits LPS\n[END]\n");
        let low = solve(&parse_inp(&text(d1)).unwrap());
        let high = solve(&parse_inp(&text(d1 + extra)).unwrap());
        prop_assert!(high.pressures[0] < low.pressures[0]);
    }

    #[test]
    fn relabeling_permutes_the_solution(net in random_net(12)) {
        let a = solve(&net.model());
        let (text, perm) = relabeled(&net);
        let b = solve(&parse_inp(&text).unwrap());
        for (k, &pk) in perm.iter().enumerate() {
            prop_assert!((a.pressures[k] - b.pressures[pk]).abs() < 1e-6);
        }
        let m = net.pipes.len();
        for k in 0..m {
            prop_assert!((a.flows[k] - b.flows[m - 1 - k]).abs() < 1e-6);
        }
    }
}
