use macc_core::instance::parse_instance;
use macc_core::model::build_model;
use macc_core::oracle::{brute_force_fixed, brute_force_plan};
use macc_core::plan::extract_itineraries;
use macc_core::validate::{validate_plan, validate_with_itineraries};
use macc_core::{Catalog, DurationSpec, Instance, Plan, ScaledDurations};
use proptest::prelude::*;

const E1: &str = include_str!("../../../instances/e1.json");
const E2: &str = include_str!("../../../instances/e2.json");

fn scaled(preset: &str) -> ScaledDurations {
    DurationSpec::preset(preset).unwrap().scale().unwrap()
}

/// The witness must satisfy every model row and score its own sum-of-costs.
fn assert_model_accepts(inst: &Instance, sd: &ScaledDurations, plan: &Plan) {
    let cat = Catalog::build(inst, sd, plan.horizon).unwrap();
    let model = build_model(inst, &cat);
    let values = model
        .assignment(&cat, &plan.actions, &plan.blocks)
        .expect("every witness action is in the catalog");
    let broken = model.check(&values);
    assert!(
        broken.is_empty(),
        "rows violated: {:?}",
        &broken[..broken.len().min(5)]
    );
    let picked = |v| values[model.column(v)];
    assert_eq!(model.objective_value(picked), plan.sum_of_costs as i64);
}

fn assert_witness_valid(inst: &Instance, sd: &ScaledDurations, plan: &Plan) {
    let its = extract_itineraries(plan).unwrap();
    let report = validate_with_itineraries(inst, sd, plan, Some(&its));
    assert!(report.is_valid(), "{}", report.to_text());
}

#[test]
fn e1_witnesses_are_valid_and_model_feasible() {
    let inst = parse_instance(E1).unwrap();
    let expected = [
        ("unit", 4, 3),
        ("1-2", 6, 5),
        ("1-2-3", 9, 8),
        ("termes", 10, 9),
    ];
    for (preset, makespan, soc) in expected {
        let sd = scaled(preset);
        let r = brute_force_plan(&inst, &sd, 20).unwrap().unwrap();
        assert_eq!((r.makespan, r.sum_of_costs), (makespan, soc), "{preset}");
        assert_witness_valid(&inst, &sd, &r.plan);
        assert_model_accepts(&inst, &sd, &r.plan);
    }
}

#[test]
fn e2_unit_witness_is_valid_and_model_feasible() {
    let inst = parse_instance(E2).unwrap();
    let sd = scaled("unit");
    let r = brute_force_plan(&inst, &sd, 20).unwrap().unwrap();
    assert_eq!((r.makespan, r.sum_of_costs), (9, 11));
    assert_witness_valid(&inst, &sd, &r.plan);
    assert_model_accepts(&inst, &sd, &r.plan);
}

#[test]
fn longer_horizons_stay_feasible_and_never_cost_more() {
    let inst = parse_instance(E1).unwrap();
    let sd = scaled("termes");
    assert!(brute_force_fixed(&inst, &sd, 9).unwrap().is_none());
    let mut last = u64::MAX;
    for horizon in 10..=14 {
        let plan = brute_force_fixed(&inst, &sd, horizon)
            .unwrap()
            .expect("feasible");
        assert!(plan.sum_of_costs <= last, "T={horizon}");
        assert!(validate_plan(&inst, &sd, &plan).is_valid());
        last = plan.sum_of_costs;
    }
}

fn small_instance() -> impl Strategy<Value = Instance> {
    // Interior of a 4x4 grid is the 2x2 block at (1..=2, 1..=2).
    (proptest::collection::vec(0usize..=2, 4), 1u32..=2).prop_filter_map(
        "at most 3 blocks",
        |(hs, agents)| {
            if hs.iter().sum::<usize>() > 3 {
                return None;
            }
            let mut map = vec![vec![0usize; 4]; 4];
            map[1][1] = hs[0];
            map[1][2] = hs[1];
            map[2][1] = hs[2];
            map[2][2] = hs[3];
            Instance::new(4, 4, 3, agents, &map).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_witnesses_pass_validator_and_model(inst in small_instance()) {
        let sd = scaled("unit");
        let r = brute_force_plan(&inst, &sd, 24).unwrap().expect("small worlds are buildable");
        assert_witness_valid(&inst, &sd, &r.plan);
        assert_model_accepts(&inst, &sd, &r.plan);
        prop_assert!(brute_force_fixed(&inst, &sd, r.makespan - 1).unwrap().is_none());
    }
}
