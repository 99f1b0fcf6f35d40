mod common;

use common::{bundled, random_net};
use gatres_core::inp::{parse_inp, serialize_inp, InpError};
use gatres_core::units::FlowUnits;
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Data lines per section counted straight from the text.
fn section_counts(text: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    let mut current = String::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').to_uppercase();
            continue;
        }
        *counts.entry(current.clone()).or_default() += 1;
    }
    counts
}

#[test]
fn bundled_counts_match_file_contents() {
    for name in ["anytown", "net1", "net3", "ltown"] {
        let path = format!("{}/data/networks/{name}.inp", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(path).unwrap();
        let counts = section_counts(&text);
        let m = parse_inp(&text).unwrap();
        let get = |s: &str| counts.get(s).copied().unwrap_or(0);
        assert_eq!(m.junctions.len(), get("JUNCTIONS"), "{name}");
        assert_eq!(m.reservoirs.len(), get("RESERVOIRS"), "{name}");
        assert_eq!(m.tanks.len(), get("TANKS"), "{name}");
        assert_eq!(m.pipes.len(), get("PIPES"), "{name}");
        assert_eq!(m.pumps.len(), get("PUMPS"), "{name}");
        assert_eq!(m.valves.len(), get("VALVES"), "{name}");
    }
}

#[test]
fn anytown_topology() {
    let m = bundled("anytown");
    assert_eq!(
        (m.junctions.len(), m.reservoirs.len(), m.tanks.len()),
        (19, 3, 0)
    );
    assert_eq!((m.pipes.len(), m.pumps.len(), m.valves.len()), (40, 1, 0));
}

#[test]
fn bundled_networks_round_trip() {
    for name in ["anytown", "net1", "net3", "ltown"] {
        let m = bundled(name);
        let again = parse_inp(&serialize_inp(&m)).unwrap();
        assert_eq!(m.difference(&again, 1e-12), None, "{name}");
    }
}

#[test]
fn missing_node_reference_is_reported() {
    let text = "[JUNCTIONS]\nJ1 0 0\n[RESERVOIRS]\nR1 10\n[PIPES]\nP1 R1 J9 10 100 100\n[END]\n";
    assert!(matches!(parse_inp(text), Err(InpError::UnknownNodeReference { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(net in random_net(12)) {
        let m = net.model();
        let again = parse_inp(&serialize_inp(&m)).unwrap();
        prop_assert_eq!(m.difference(&again, 1e-12), None);
    }

    #[test]
    fn us_and_si_files_give_the_same_model(net in random_net(10)) {
        let si = parse_inp(&net.to_inp()).unwrap();
        let mut us = parse_inp(&net.to_inp_gpm()).unwrap();
        prop_assert_eq!(us.options.flow_units, FlowUnits::Gpm);
        // Only the declared display units may differ.
        us.options.flow_units = si.options.flow_units;
        prop_assert_eq!(si.difference(&us, 1e-9), None);
    }
}
