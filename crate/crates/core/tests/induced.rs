//! Chains and sub-MDPs induced by policies.

mod common;

use rlcheck::checker::{check, check_policy, parse_property, CheckOptions, PolicyCheckOptions};
use rlcheck::induced::{build_induced_dtmc, build_induced_mdp, EmptyIntersectionRule, InvalidActionRule};
use rlcheck::lang::{ActionId, SymbolicModel};
use rlcheck::model::{build_mdp, to_bytes, BuildLimits, ExplicitMdp, ModelError};
use rlcheck::policy::{FnPolicy, Policy};
use rlcheck::transforms::{permissive, tail_lumping_partition, PermissiveSource, Singleton};

use common::{builder_view, load, random_policy, small_taxi_policy};

fn assert_substructure(sub: &ExplicitMdp, full: &ExplicitMdp) {
    let full = builder_view(full);
    for (state, choices) in builder_view(sub) {
        let whole = full.get(&state).expect("induced state exists in the full model");
        for (action, support) in choices {
            assert_eq!(whole.get(&action), Some(&support));
        }
    }
}

fn value(model: &SymbolicModel, mdp: &ExplicitMdp, prop: &str) -> f64 {
    check(model, mdp, &parse_property(prop).unwrap(), &CheckOptions::default()).unwrap().value
}

#[test]
fn random_policies_sit_between_the_bounds() {
    let model = load("frozen_lake", "");
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    let lo = value(&model, &mdp, r#"Pmin=? [ F "frisbee" ]"#);
    let hi = value(&model, &mdp, r#"Pmax=? [ F "frisbee" ]"#);
    let prop = parse_property(r#"P=? [ F "frisbee" ]"#).unwrap();
    for seed in 0..50 {
        let p = check_policy(&model, &random_policy(&mdp, seed), &prop, &PolicyCheckOptions::default()).unwrap().value;
        assert!(lo - 1e-9 <= p && p <= hi + 1e-9, "seed {seed}: {p} outside [{lo}, {hi}]");
    }
}

#[test]
fn permissive_bounds_bracket_the_policy_on_taxi() {
    let model = load("taxi", "");
    let policy = small_taxi_policy(&model, 2000);
    let opts = PolicyCheckOptions { invalid_action: InvalidActionRule::FallbackFirst, ..Default::default() };
    for label in ["empty", "done"] {
        let p = check_policy(&model, &policy, &parse_property(&format!("P=? [ F \"{label}\" ]")).unwrap(), &opts)
            .unwrap()
            .value;
        for start in [10, 7, 3] {
            let tau = permissive(&policy, tail_lumping_partition(&model, "fuel", start).unwrap(), &model).unwrap();
            let sub = build_induced_mdp(&model, &tau, BuildLimits::default(), EmptyIntersectionRule::FullAct).unwrap().mdp;
            let lo = value(&model, &sub, &format!("Pmin=? [ F \"{label}\" ]"));
            let hi = value(&model, &sub, &format!("Pmax=? [ F \"{label}\" ]"));
            assert!(lo - 1e-9 <= p && p <= hi + 1e-9, "{label} tail {start}: {p} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn induced_models_are_substructures() {
    for (name, consts) in [("frozen_lake", ""), ("taxi", ""), ("collision_avoidance", "slickness=0.1")] {
        let model = load(name, consts);
        let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
        let policy = random_policy(&mdp, 4);
        let dtmc = build_induced_dtmc(&model, &policy, BuildLimits::default(), InvalidActionRule::Error).unwrap();
        assert!(dtmc.mdp.is_deterministic());
        assert_substructure(&dtmc.mdp, &mdp);
        for (s, a) in dtmc.chosen.iter().enumerate() {
            if !dtmc.mdp.deadlocks[s] {
                assert_eq!(*a, policy.act(&dtmc.mdp.states[s]));
            }
        }
        if let Some(var) = model.variables.iter().find(|v| v.bounds().1 > v.bounds().0 + 2) {
            let (lo, hi) = var.bounds();
            let tau = permissive(&policy, tail_lumping_partition(&model, &var.name, (lo + hi) / 2).unwrap(), &model).unwrap();
            let sub = build_induced_mdp(&model, &tau, BuildLimits::default(), EmptyIntersectionRule::FullAct).unwrap();
            assert_substructure(&sub.mdp, &mdp);
        }
    }
}

#[test]
fn induced_builds_are_byte_identical() {
    let model = load("taxi", "");
    let policy = small_taxi_policy(&model, 500);
    let build = || {
        to_bytes(&build_induced_dtmc(&model, &policy, BuildLimits::default(), InvalidActionRule::FallbackFirst).unwrap().mdp)
    };
    assert_eq!(build(), build());
}

#[test]
fn singleton_permissive_equals_the_chain() {
    let model = load("frozen_lake", "");
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    let policy = random_policy(&mdp, 8);
    let dtmc = build_induced_dtmc(&model, &policy, BuildLimits::default(), InvalidActionRule::Error).unwrap().mdp;
    let sub = build_induced_mdp(&model, &Singleton(&policy), BuildLimits::default(), EmptyIntersectionRule::Error)
        .unwrap()
        .mdp;
    assert_eq!(to_bytes(&dtmc), to_bytes(&sub));
}

#[test]
fn disabled_actions_error_or_fall_back() {
    let model = load("coin", "");
    let done = model.action_id("done").unwrap();
    let policy = FnPolicy(move |_: &_| done);
    let err = build_induced_dtmc(&model, &policy, BuildLimits::default(), InvalidActionRule::Error).err().unwrap();
    assert!(matches!(err, ModelError::InvalidAction { .. }));
    let dtmc = build_induced_dtmc(&model, &policy, BuildLimits::default(), InvalidActionRule::FallbackFirst).unwrap();
    assert_eq!(dtmc.fallback_count, 1);
    assert_eq!(dtmc.chosen[0], model.action_id("flip").unwrap());
}

struct Nothing;

impl PermissiveSource for Nothing {
    fn actions(&self, _: &rlcheck::model::StateValuation) -> Vec<ActionId> {
        vec![ActionId(99)]
    }
}

#[test]
fn empty_permissive_sets_follow_the_rule() {
    let model = load("frozen_lake", "");
    let full = build_induced_mdp(&model, &Nothing, BuildLimits::default(), EmptyIntersectionRule::FullAct).unwrap();
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    assert_eq!(to_bytes(&full.mdp), to_bytes(&mdp));
    assert_eq!(full.fallback_count, mdp.num_states() - mdp.deadlocks.count_ones());
    let err = build_induced_mdp(&model, &Nothing, BuildLimits::default(), EmptyIntersectionRule::Error).err().unwrap();
    assert!(matches!(err, ModelError::EmptyPermissive { .. }));
}

#[test]
fn induced_limits_apply() {
    let model = load("frozen_lake", "");
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    let policy = random_policy(&mdp, 0);
    let tight = BuildLimits { max_states: 1, ..BuildLimits::default() };
    let err = build_induced_dtmc(&model, &policy, tight, InvalidActionRule::Error).err().unwrap();
    assert!(matches!(err, ModelError::LimitExceeded { .. }));
}
