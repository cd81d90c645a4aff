mod support;

use macc_core::bounds::upper_bound_uf;
use macc_core::instance::parse_instance;
use macc_core::oracle::brute_force_plan;
use macc_core::validate::{pad_with_waits, validate_plan};
use macc_core::{DurationSpec, Instance, Plan};

use support::mutations::CATALOG;

const E1: &str = include_str!("../../../instances/e1.json");
const E2: &str = include_str!("../../../instances/e2.json");

/// Valid plans from the exhaustive search plus wait-padded variants.
fn corpus() -> Vec<(String, Instance, Plan)> {
    let mut out = Vec::new();
    let e1 = parse_instance(E1).unwrap();
    let e2 = parse_instance(E2).unwrap();
    let unit = DurationSpec::unit().scale().unwrap();
    for (name, inst) in [("e1", &e1), ("e2", &e2)] {
        let base = brute_force_plan(inst, &unit, 20).unwrap().unwrap().plan;
        for preset in ["1-2", "1-2-3", "termes", "height_linear"] {
            let sd = DurationSpec::preset(preset).unwrap().scale().unwrap();
            out.push((
                format!("{name}/padded-{preset}"),
                inst.clone(),
                pad_with_waits(inst, &base, &sd),
            ));
        }
        out.push((format!("{name}/unit"), inst.clone(), base));
    }
    for preset in ["1-2", "termes"] {
        let sd = DurationSpec::preset(preset).unwrap().scale().unwrap();
        let plan = brute_force_plan(&e1, &sd, 20).unwrap().unwrap().plan;
        out.push((format!("e1/{preset}"), e1.clone(), plan));
    }
    out
}

fn scaled_for(plan: &Plan, name: &str) -> macc_core::ScaledDurations {
    let preset = name
        .rsplit('/')
        .next()
        .unwrap()
        .trim_start_matches("padded-");
    let sd = DurationSpec::preset(preset).unwrap().scale().unwrap();
    assert_eq!(sd.multiple, plan.multiple);
    sd
}

#[test]
fn catalog_has_at_least_twelve_kinds() {
    assert!(CATALOG.len() >= 12);
    let mut names: Vec<_> = CATALOG.iter().map(|m| m.name).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), CATALOG.len());
}

#[test]
fn every_mutation_is_rejected_and_originals_pass() {
    let corpus = corpus();
    let mut applied = vec![0usize; CATALOG.len()];
    for (name, inst, plan) in &corpus {
        let sd = scaled_for(plan, name);
        let report = validate_plan(inst, &sd, plan);
        assert!(report.is_valid(), "{name}: {}", report.to_text());
        for (k, m) in CATALOG.iter().enumerate() {
            let Some(bad) = (m.apply)(inst, plan) else {
                continue;
            };
            applied[k] += 1;
            let report = validate_plan(inst, &sd, &bad);
            assert!(!report.is_valid(), "{name}: mutation {} accepted", m.name);
            assert!(
                m.expect.iter().any(|&r| report.has(r)),
                "{name}: mutation {} flagged {}",
                m.name,
                report.to_text()
            );
        }
    }
    for (k, m) in CATALOG.iter().enumerate() {
        assert!(applied[k] > 0, "mutation {} never applied", m.name);
    }
}

#[test]
fn padded_plans_reach_uf_exactly() {
    let e2 = parse_instance(E2).unwrap();
    let unit = DurationSpec::unit().scale().unwrap();
    let base = brute_force_plan(&e2, &unit, 20).unwrap().unwrap().plan;
    for preset in ["1-2", "1-2-3", "termes", "height_linear"] {
        let sd = DurationSpec::preset(preset).unwrap().scale().unwrap();
        let padded = pad_with_waits(&e2, &base, &sd);
        assert_eq!(padded.horizon, upper_bound_uf(&base, &sd), "{preset}");
        assert!(validate_plan(&e2, &sd, &padded).is_valid(), "{preset}");
    }
}
