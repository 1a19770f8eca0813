//! Explicit-state builder, simulator and export format.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlcheck::lang::{parse_model, ActionId, ConstOverrides};
use rlcheck::model::{
    build_mdp, read_model, step, to_bytes, BuildLimits, ModelError, ScriptedUniforms, Simulator, StateValuation,
};

use common::{builder_view, load, simulator_bfs};

const FIXTURES: &[(&str, &str)] = &[
    ("coin", ""),
    ("frozen_lake", ""),
    ("taxi", ""),
    ("collision_avoidance", "slickness=0.1"),
];

#[test]
fn builds_are_byte_identical() {
    for (name, consts) in FIXTURES {
        let model = load(name, consts);
        let a = to_bytes(&build_mdp(&model, BuildLimits::default()).unwrap());
        let b = to_bytes(&build_mdp(&model, BuildLimits::default()).unwrap());
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn builder_matches_simulator_bfs_exactly() {
    for (name, consts) in FIXTURES {
        let model = load(name, consts);
        let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
        assert!(mdp.num_states() <= 10_000, "{name} too large for the exhaustive oracle");
        assert_eq!(builder_view(&mdp), simulator_bfs(&model), "{name}");
    }
}

#[test]
fn every_state_keeps_a_choice_after_deadlock_repair() {
    for (name, consts) in FIXTURES {
        let model = load(name, consts);
        let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
        let sim = Simulator::new(&model);
        for s in 0..mdp.num_states() {
            assert!(!mdp.choice_range(s).is_empty());
            let dead = sim.enabled_actions(&mdp.states[s]).unwrap().is_empty();
            assert_eq!(mdp.deadlocks[s], dead);
            if dead {
                let c = mdp.choice(mdp.state_start[s]);
                assert_eq!(c.action, ActionId::DEADLOCK);
                assert_eq!((c.succ, c.prob), (&[s as u32][..], &[1.0][..]));
            }
        }
    }
}

#[test]
fn initial_state_is_zero_and_probabilities_sum_to_one() {
    for (name, consts) in FIXTURES {
        let model = load(name, consts);
        let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
        assert_eq!(mdp.states[0], StateValuation::initial(&model));
        for c in 0..mdp.num_choices() {
            let total: f64 = mdp.choice(c).prob.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{name} choice {c} sums to {total}");
        }
    }
}

#[test]
fn sampled_steps_stay_in_the_built_support() {
    for (name, consts) in FIXTURES {
        let model = load(name, consts);
        let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
        let sim = Simulator::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = sim.reset();
        for _ in 0..3000 {
            let s = mdp.state_index(&state).expect("sampled state was built");
            let enabled = sim.enabled_actions(&state).unwrap();
            if enabled.is_empty() {
                state = sim.reset();
                continue;
            }
            let a = enabled[rng.random_range(0..enabled.len())];
            let next = sim.step(&state, a, &mut rng).unwrap().next_state;
            let c = mdp.choice(mdp.choice_for(s, a).unwrap());
            let t = mdp.state_index(&next).unwrap() as u32;
            assert!(c.succ.contains(&t), "{name}: step left the support");
            state = next;
        }
    }
}

#[test]
fn coin_step_follows_the_scripted_uniform() {
    let model = load("coin", "");
    let flip = model.action_id("flip").unwrap();
    let init = StateValuation::initial(&model);
    let out = step(&model, &init, flip, &mut ScriptedUniforms::new(vec![0.3])).unwrap();
    assert_eq!(out.next_state.0, vec![1]);
    let out = step(&model, &init, flip, &mut ScriptedUniforms::new(vec![0.7])).unwrap();
    assert_eq!(out.next_state.0, vec![0]);
    assert!(!out.terminal);
}

#[test]
fn export_round_trips() {
    for (name, consts) in FIXTURES {
        let model = load(name, consts);
        let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
        let bytes = to_bytes(&mdp);
        assert_eq!(read_model(&bytes[..]).unwrap(), mdp, "{name}");
    }
}

#[test]
fn truncated_export_is_rejected() {
    let model = load("frozen_lake", "");
    let bytes = to_bytes(&build_mdp(&model, BuildLimits::default()).unwrap());
    assert!(read_model(&bytes[..bytes.len() / 2]).is_err());
}

#[test]
fn limits_abort_the_build() {
    let model = load("frozen_lake", "");
    let tight = BuildLimits { max_states: 4, ..BuildLimits::default() };
    assert!(matches!(build_mdp(&model, tight), Err(ModelError::LimitExceeded { .. })));
    let tight = BuildLimits { max_transitions: 10, ..BuildLimits::default() };
    assert!(matches!(build_mdp(&model, tight), Err(ModelError::LimitExceeded { .. })));
}

#[test]
fn synchronized_updates_multiply() {
    let src = "mdp
module a
  x : [0..1] init 0;
  [go] x = 0 -> 0.5 : (x'=1) + 0.5 : true;
endmodule
module b
  y : [0..1] init 0;
  [go] y = 0 -> 0.25 : (y'=1) + 0.75 : true;
endmodule
";
    let model = parse_model(src, &ConstOverrides::new()).unwrap();
    let mdp = build_mdp(&model, BuildLimits::default()).unwrap();
    let c = mdp.choice(0);
    let mut atoms: Vec<(Vec<i64>, f64)> =
        c.succ.iter().zip(c.prob).map(|(t, p)| (mdp.states[*t as usize].0.clone(), *p)).collect();
    atoms.sort_by(|a, b| a.0.cmp(&b.0));
    assert_eq!(
        atoms,
        vec![(vec![0, 0], 0.375), (vec![0, 1], 0.125), (vec![1, 0], 0.375), (vec![1, 1], 0.125)]
    );
}

#[test]
fn disabled_step_errors_or_self_loops() {
    let model = load("coin", "");
    let done = model.action_id("done").unwrap();
    let init = StateValuation::initial(&model);
    let mut u = ScriptedUniforms::new(vec![0.5]);
    assert!(matches!(Simulator::new(&model).step(&init, done, &mut u), Err(ModelError::InvalidAction { .. })));
    let sim = Simulator::new(&model).with_handler(rlcheck::model::InvalidActionHandler::SelfLoopZeroReward);
    let out = sim.step(&init, done, &mut u).unwrap();
    assert_eq!((out.next_state, out.reward), (init, 0.0));
}
