//! Shared fixtures for integration tests.
#![allow(dead_code)]

pub mod gnn;

use gatres_core::inp::parse_inp;
use gatres_core::network::NetworkModel;
use proptest::prelude::*;
use std::fmt::Write;

pub fn bundled(name: &str) -> NetworkModel {
    let path = format!("{}/data/networks/{name}.inp", env!("CARGO_MANIFEST_DIR"));
    parse_inp(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// A connected network described in SI-flavoured INP units (LPS, mm, m).
#[derive(Debug, Clone)]
pub struct RandomNet {
    pub reservoir_heads: Vec<f64>,
    /// `(elevation m, demand LPS)`
    pub junctions: Vec<(f64, f64)>,
    /// `(from, to, length m, diameter mm, roughness)` with nodes numbered
    /// reservoirs first.
    pub pipes: Vec<(usize, usize, f64, f64, f64)>,
    pub darcy: bool,
}

impl RandomNet {
    fn node_name(&self, i: usize) -> String {
        if i < self.reservoir_heads.len() {
            format!("R{i}")
        } else {
            format!("J{}", i - self.reservoir_heads.len())
        }
    }

    pub fn to_inp(&self) -> String {
        let mut s = String::from("[TITLE]\nrandom\n[JUNCTIONS]\n");
        for (k, (z, d)) in self.junctions.iter().enumerate() {
            writeln!(s, "J{k} {z} {d}").unwrap();
        }
        s.push_str("[RESERVOIRS]\n");
        for (k, h) in self.reservoir_heads.iter().enumerate() {
            writeln!(s, "R{k} {h}").unwrap();
        }
        s.push_str("[PIPES]\n");
        for (k, (a, b, l, d, c)) in self.pipes.iter().enumerate() {
            writeln!(s, "P{k} {} {} {l} {d} {c} 0 Open", self.node_name(*a), self.node_name(*b)).unwrap();
        }
        let hl = if self.darcy { "D-W" } else { "H-W" };
        writeln!(s, "[OPTIONS]\nUnits LPS\nHeadloss {hl}\n[END]").unwrap();
        s
    }

    /// Same network expressed in US customary units (GPM, in, ft).
    pub fn to_inp_gpm(&self) -> String {
        const FT: f64 = 0.3048;
        const GPM_IN_LPS: f64 = 3.785411784 / 60.0;
        let mut s = String::from("[TITLE]\nrandom\n[JUNCTIONS]\n");
        for (k, (z, d)) in self.junctions.iter().enumerate() {
            writeln!(s, "J{k} {:e} {:e}", z / FT, d / GPM_IN_LPS).unwrap();
        }
        s.push_str("[RESERVOIRS]\n");
        for (k, h) in self.reservoir_heads.iter().enumerate() {
            writeln!(s, "R{k} {:e}", h / FT).unwrap();
        }
        s.push_str("[PIPES]\n");
        for (k, (a, b, l, d, c)) in self.pipes.iter().enumerate() {
            // Darcy roughness is in mm under SI and 1e-3 ft under US units.
            let rough = if self.darcy { c / FT } else { *c };
            writeln!(
                s,
                "P{k} {} {} {:e} {:e} {:e} 0 Open",
                self.node_name(*a),
                self.node_name(*b),
                l / FT,
                d / 25.4,
                rough
            )
            .unwrap();
        }
        let hl = if self.darcy { "D-W" } else { "H-W" };
        writeln!(s, "[OPTIONS]\nUnits GPM\nHeadloss {hl}\n[END]").unwrap();
        s
    }

    pub fn model(&self) -> NetworkModel {
        parse_inp(&self.to_inp()).unwrap()
    }
}

prop_compose! {
    pub fn random_net(max_junctions: usize)(
        reservoirs in 1usize..=2,
        n in 1usize..=max_junctions,
        darcy in any::<bool>(),
    )(
        heads in prop::collection::vec(50.0f64..90.0, reservoirs),
        junctions in prop::collection::vec((0.0f64..25.0, 0.0f64..6.0), n),
        parents in prop::collection::vec(any::<prop::sample::Index>(), n),
        extra in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..=n / 2),
        props in prop::collection::vec((100.0f64..1500.0, 100.0f64..400.0, 0.0f64..1.0), n + n / 2 + 1),
        reservoirs in Just(reservoirs),
        darcy in Just(darcy),
    ) -> RandomNet {
        let roughness = |t: f64| if darcy { 0.01 + t } else { 80.0 + 60.0 * t };
        let mut pipes = Vec::new();
        // Spanning tree: junction k hangs off an earlier node, so every
        // junction reaches reservoir 0.
        for (k, p) in parents.iter().enumerate() {
            let node = reservoirs + k;
            let parent = if k == 0 { 0 } else { p.index(node) };
            let parent = if parent < reservoirs { 0 } else { parent };
            let (l, d, t) = props[k];
            pipes.push((parent, node, l, d, roughness(t)));
        }
        let n = junctions.len();
        let total = reservoirs + n;
        for (k, (a, b)) in extra.iter().enumerate() {
            let (a, b) = (a.index(total), b.index(total));
            if a != b && (a >= reservoirs || b >= reservoirs) {
                let (l, d, t) = props[n + k];
                pipes.push((a, b, l, d, roughness(t)));
            }
        }
        // A second reservoir must be connected too.
        if reservoirs == 2 {
            let (l, d, t) = props[props.len() - 1];
            pipes.push((1, reservoirs, l, d, roughness(t)));
        }
        RandomNet { reservoir_heads: heads, junctions, pipes, darcy }
    }
}
