//! Permissive and remapped policies derived from a base policy.

mod common;

use std::collections::BTreeMap;

use rlcheck::checker::{check_policy, parse_property, PolicyCheckOptions};
use rlcheck::lang::{parse_model, ActionId, ConstOverrides};
use rlcheck::model::{build_mdp, BuildLimits, ExplicitMdp, StateValuation};
use rlcheck::policy::{FnPolicy, Policy, TabularPolicy};
use rlcheck::transforms::{
    clamp_remap, parse_short_spec, permissive, remap, tail_lumping_partition, PartitionSpec, PermissiveSource, RemapSpec,
    TransformError, TransformSpec,
};

use common::{load, random_policy, small_taxi_policy};

fn taxi() -> (rlcheck::lang::SymbolicModel, ExplicitMdp, TabularPolicy) {
    let model = load("taxi", "");
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    let policy = small_taxi_policy(&model, 2000);
    (model, mdp, policy)
}

fn fuel(model: &rlcheck::lang::SymbolicModel) -> usize {
    model.variable_index("fuel").unwrap()
}

#[test]
fn tail_partitions_have_the_documented_blocks() {
    let model = load("taxi", "");
    let p = tail_lumping_partition(&model, "fuel", 8).unwrap();
    assert_eq!(p.blocks.len(), 9);
    assert_eq!(*p.blocks.last().unwrap(), (8, 10));
    let all_single = tail_lumping_partition(&model, "fuel", 10).unwrap();
    assert_eq!(all_single, PartitionSpec::singletons(&model, "fuel").unwrap());
    let whole = tail_lumping_partition(&model, "fuel", 0).unwrap();
    assert_eq!(whole.blocks, vec![(0, 10)]);
    assert_eq!(whole, PartitionSpec::coarsest(&model, "fuel").unwrap());
    assert!(matches!(tail_lumping_partition(&model, "fuel", 11), Err(TransformError::Partition { .. })));
    assert!(matches!(tail_lumping_partition(&model, "nope", 3), Err(TransformError::UnknownVariable(_))));
}

#[test]
fn partitions_must_cover_the_domain() {
    let model = load("taxi", "");
    assert!(PartitionSpec::new(&model, "fuel", vec![(0, 4), (6, 10)]).is_err());
    assert!(PartitionSpec::new(&model, "fuel", vec![(0, 5), (5, 10)]).is_err());
    assert!(PartitionSpec::new(&model, "fuel", vec![(0, 9)]).is_err());
    assert!(PartitionSpec::new(&model, "fuel", vec![(0, 7), (8, 10)]).is_ok());
}

#[test]
fn singleton_partition_gives_the_base_action() {
    let (model, mdp, policy) = taxi();
    let tau = permissive(&policy, PartitionSpec::singletons(&model, "fuel").unwrap(), &model).unwrap();
    for s in &mdp.states {
        assert_eq!(tau.actions(s), vec![policy.act(s)]);
    }
}

#[test]
fn lumped_block_unions_the_base_actions() {
    let (model, mdp, policy) = taxi();
    let spec = PartitionSpec::new(&model, "fuel", vec![(0, 7), (8, 10)]).unwrap();
    let tau = permissive(&policy, spec, &model).unwrap();
    let slot = fuel(&model);
    for s in mdp.states.iter().filter(|s| s[slot] == 9) {
        let mut want: Vec<ActionId> = (8..=10).map(|k| policy.act(&s.with(slot, k))).collect();
        want.sort_unstable();
        want.dedup();
        assert_eq!(tau.actions(s), want);
    }
}

#[test]
fn policy_constant_in_the_lumped_variable_stays_deterministic() {
    let src = "mdp
module m
  a : [0..1] init 0;
  b : [0..3] init 0;
  [x] true -> (b'=mod(b+1, 4));
  [y] true -> (a'=1-a);
endmodule
";
    let model = parse_model(src, &ConstOverrides::new()).unwrap();
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    let base = FnPolicy(|s: &StateValuation| ActionId(s[0] as u16));
    let tau = permissive(&base, PartitionSpec::coarsest(&model, "b").unwrap(), &model).unwrap();
    for s in &mdp.states {
        assert_eq!(tau.actions(s).len(), 1);
    }
}

#[test]
fn refinement_shrinks_the_allowed_sets() {
    let (model, mdp, policy) = taxi();
    let specs: Vec<PartitionSpec> = [10, 8, 6, 4, 0].iter().map(|&k| tail_lumping_partition(&model, "fuel", k).unwrap()).collect();
    for w in specs.windows(2) {
        assert!(w[0].refines(&w[1]));
        assert!(!w[1].refines(&w[0]) || w[0] == w[1]);
    }
    let taus: Vec<_> = specs.into_iter().map(|p| permissive(&policy, p, &model).unwrap()).collect();
    let coarsest = permissive(&policy, PartitionSpec::coarsest(&model, "fuel").unwrap(), &model).unwrap();
    for s in &mdp.states {
        let sets: Vec<Vec<ActionId>> = taus.iter().map(|t| t.actions(s)).collect();
        for w in sets.windows(2) {
            assert!(w[0].iter().all(|a| w[1].contains(a)), "{:?} not within {:?}", w[0], w[1]);
        }
        let all = coarsest.actions(s);
        assert!(sets.iter().all(|set| set.iter().all(|a| all.contains(a))));
        assert_eq!(taus[0].actions(s), sets[0], "queries are pure");
    }
}

#[test]
fn identity_remap_reproduces_the_policy_and_its_value() {
    let prop = parse_property(r#"P=? [ F "frisbee" ]"#).unwrap();
    let lake = load("frozen_lake", "");
    let lake_mdp = build_mdp(&lake, BuildLimits::default()).unwrap();
    for seed in 0..5 {
        let base = random_policy(&lake_mdp, seed);
        let id = remap(&base, RemapSpec::identity(&lake, "pos").unwrap(), &lake).unwrap();
        for s in &lake_mdp.states {
            assert_eq!(id.act(s), base.act(s));
        }
        let opts = PolicyCheckOptions::default();
        let a = check_policy(&lake, &base, &prop, &opts).unwrap().value;
        let b = check_policy(&lake, &id, &prop, &opts).unwrap().value;
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn identity_remap_commutes_with_permissive() {
    let (model, mdp, policy) = taxi();
    let spec = tail_lumping_partition(&model, "fuel", 6).unwrap();
    let plain = permissive(&policy, spec.clone(), &model).unwrap();
    let id = remap(&policy, RemapSpec::identity(&model, "fuel").unwrap(), &model).unwrap();
    let via_remap = permissive(&id, spec, &model).unwrap();
    for s in &mdp.states {
        assert_eq!(plain.actions(s), via_remap.actions(s));
    }
}

#[test]
fn clamp_answers_high_fuel_as_the_cap() {
    let (model, mdp, policy) = taxi();
    let slot = fuel(&model);
    let clamped = remap(&policy, clamp_remap(&model, "fuel", 6).unwrap(), &model).unwrap();
    for s in &mdp.states {
        let seen = s.with(slot, s[slot].min(6));
        assert_eq!(clamped.act(s), policy.act(&seen));
    }
}

#[test]
fn clamp_composition_holds_on_all_taxi_states() {
    let (model, mdp, policy) = taxi();
    let c6 = clamp_remap(&model, "fuel", 6).unwrap();
    let c4 = clamp_remap(&model, "fuel", 4).unwrap();
    assert_eq!(c6.compose(&c4).unwrap(), c4);
    assert_eq!(c4.compose(&c6).unwrap(), c4);
    let nested = remap(remap(&policy, c6, &model).unwrap(), c4.clone(), &model).unwrap();
    let direct = remap(&policy, c4, &model).unwrap();
    for s in &mdp.states {
        assert_eq!(nested.act(s), direct.act(s));
    }
}

#[test]
fn remap_images_must_stay_in_bounds() {
    let model = load("taxi", "");
    let mut map: BTreeMap<i64, i64> = (0..=10).map(|i| (i, i)).collect();
    map.insert(3, 11);
    assert!(RemapSpec::new(&model, "fuel", map.clone()).is_err());
    map.remove(&3);
    assert!(RemapSpec::new(&model, "fuel", map).is_err());
}

#[test]
fn short_and_file_specs() {
    let model = load("taxi", "");
    match parse_short_spec("fuel:tail=8", &model).unwrap() {
        TransformSpec::Partition(p) => assert_eq!(p, tail_lumping_partition(&model, "fuel", 8).unwrap()),
        other => panic!("{other:?}"),
    }
    match parse_short_spec("fuel:clamp=6", &model).unwrap() {
        TransformSpec::Remap(r) => assert_eq!(r, clamp_remap(&model, "fuel", 6).unwrap()),
        other => panic!("{other:?}"),
    }
    assert!(parse_short_spec("fuel:rotate=2", &model).is_err());
    assert!(parse_short_spec("fuel", &model).is_err());
}
