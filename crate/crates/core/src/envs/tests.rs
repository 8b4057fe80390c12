use proptest::prelude::*;

use super::*;

fn reach_at(q: [f64; 3], goal: [f64; 2], faults: Vec<FaultSpec>) -> Env {
    let mut env = Env::new(EnvConfig { faults, ..EnvConfig::reach_arm() }).unwrap();
    env.set_state(EnvState { q: q.to_vec(), body_x: 0.0, goal, step: 0, prev_dx: 0.0 }).unwrap();
    env
}

#[test]
fn reset_is_deterministic() {
    for cfg in [EnvConfig::reach_arm(), EnvConfig::quad_crawler()] {
        let mut a = Env::new(cfg.clone()).unwrap();
        let mut b = Env::new(cfg).unwrap();
        assert_eq!(a.reset(17), b.reset(17));
        assert_eq!(a.state(), b.state());
    }
}

#[test]
fn reset_respects_ranges_and_goal_annulus() {
    let mut arm = Env::new(EnvConfig::reach_arm()).unwrap();
    let mut crawler = Env::new(apply_fault(&EnvConfig::quad_crawler(), FaultSpec::ankle_rom()).unwrap()).unwrap();
    for seed in 0..500 {
        arm.reset(seed);
        let r = arm.state().goal[0].hypot(arm.state().goal[1]);
        assert!((0.3..=1.1).contains(&r));
        assert!(arm.state().q.iter().all(|q| q.abs() <= 0.1));
        crawler.reset(seed);
        for (q, r) in crawler.state().q.iter().zip(crawler.effective_ranges()) {
            assert!(r.contains(*q));
        }
    }
}

#[test]
fn null_action_changes_nothing() {
    let mut arm = reach_at([0.1, -0.2, 0.3], [0.4, 0.4], vec![]);
    let ee = arm.end_effector().unwrap();
    let dist = ((ee[0] - 0.4f64).powi(2) + (ee[1] - 0.4f64).powi(2)).sqrt();
    let res = arm.step(&[0.0; 3]).unwrap();
    assert_eq!(arm.state().q, vec![0.1, -0.2, 0.3]);
    assert_eq!(res.reward, -dist);

    let mut crawler = Env::new(EnvConfig::quad_crawler()).unwrap();
    crawler.reset(3);
    let q = crawler.state().q.clone();
    let res = crawler.step(&[0.0; 8]).unwrap();
    assert_eq!(crawler.state().q, q);
    assert_eq!(res.diagnostics.body_displacement, 0.0);
    assert_eq!(res.reward, 0.0);
}

#[test]
fn fully_extended_arm_on_goal_has_zero_reward() {
    let mut arm = reach_at([0.0; 3], [1.2, 0.0], vec![]);
    let res = arm.step(&[0.0; 3]).unwrap();
    assert!(res.reward.abs() < 1e-12);
}

#[test]
fn single_stance_leg_pushes_body_forward() {
    let mut env = Env::new(EnvConfig::quad_crawler()).unwrap();
    // Leg 0 planted (hip 10°, ankle 35°), the others lifted (ankle 70°).
    let mut q = vec![0.0, 70f64.to_radians()].repeat(4);
    q[0] = 10f64.to_radians();
    q[1] = 35f64.to_radians();
    env.set_state(EnvState { q: q.clone(), body_x: 0.0, goal: [0.0; 2], step: 0, prev_dx: 0.0 }).unwrap();
    let g = CrawlerGeometry::default();
    let before = crawler_foot(&g, 0, q[0], q[1], &[]);
    assert!(before.height <= 0.0);
    let mut action = vec![0.0; 8];
    action[0] = -1.0;
    let res = env.step(&action).unwrap();
    let after = crawler_foot(&g, 0, env.state().q[0], env.state().q[1], &[]);
    assert!(after.height <= 0.0);
    let expect = -(after.rel_x - before.rel_x);
    assert!(expect > 0.0);
    assert!((res.diagnostics.body_displacement - expect).abs() < 1e-15);
    assert!((res.reward - (expect - 0.01)).abs() < 1e-15);
    assert_eq!(env.state().body_x, expect);
}

#[test]
fn body_displacement_sign_convention() {
    // rel_x of the only stance foot moves by -0.02 => body moves +0.02.
    let g = CrawlerGeometry::default();
    let f0 = crawler_foot(&g, 0, 0.2, 0.5236, &[]);
    let mut hip1 = 0.2;
    // find hip that moves rel_x by exactly -0.02 via bisection
    let (mut lo, mut hi) = (0.0, 0.2);
    for _ in 0..200 {
        hip1 = 0.5 * (lo + hi);
        if crawler_foot(&g, 0, hip1, 0.5236, &[]).rel_x - f0.rel_x > -0.02 {
            hi = hip1;
        } else {
            lo = hip1;
        }
    }
    let mut env = Env::new(EnvConfig { action_scale: 1.0, ..EnvConfig::quad_crawler() }).unwrap();
    let mut q = vec![0.0, 70f64.to_radians()].repeat(4);
    q[0] = 0.2;
    q[1] = 0.5236;
    env.set_state(EnvState { q, body_x: 0.0, goal: [0.0; 2], step: 0, prev_dx: 0.0 }).unwrap();
    let mut action = vec![0.0; 8];
    action[0] = hip1 - 0.2;
    let res = env.step(&action).unwrap();
    assert!((res.diagnostics.body_displacement - 0.02).abs() < 1e-12);
}

#[test]
fn done_exactly_at_horizon() {
    let mut env = Env::new(EnvConfig::reach_arm()).unwrap();
    env.reset(0);
    for t in 1..=50 {
        let res = env.step(&[0.3, -0.3, 0.1]).unwrap();
        assert_eq!(res.done, t == 50);
    }
}

#[test]
fn preset_fault_literals() {
    let hip = FaultSpec::hip_rom();
    let FaultSpec::RomRestriction { min, max, .. } = hip else { unreachable!() };
    assert!((min + 0.0873).abs() < 1e-4 && (max - 0.0873).abs() < 1e-4);
    let FaultSpec::RomRestriction { min, max, .. } = FaultSpec::ankle_rom() else { unreachable!() };
    assert!((min - 1.1345).abs() < 1e-4 && (max - 1.2217).abs() < 1e-4);
    assert_eq!(FaultSpec::frozen_shoulder(), FaultSpec::FrozenSensor { joint: 1, value: -1.5 });
    assert_eq!(FaultSpec::elbow_slippage(), FaultSpec::PositionSlippage { joint: 2, offset: 0.05 });
}

#[test]
fn frozen_sensor_corrupts_observation_only() {
    let mut arm = reach_at([0.0; 3], [0.5, 0.5], vec![FaultSpec::frozen_shoulder()]);
    let obs = arm.observe();
    assert_eq!(obs[1], -1.5);
    let sensed_ee = forward_kinematics(&[0.0, -1.5, 0.0], &[0.5, 0.4, 0.3]);
    assert_eq!(&obs[3..5], &sensed_ee);
    assert_ne!(sensed_ee, [1.2, 0.0]);
    assert_eq!(arm.end_effector().unwrap(), [1.2, 0.0]);
    // dynamics unchanged
    let mut healthy = reach_at([0.0; 3], [0.5, 0.5], vec![]);
    for _ in 0..10 {
        let a = arm.step(&[0.2, 0.7, -0.4]).unwrap();
        let b = healthy.step(&[0.2, 0.7, -0.4]).unwrap();
        assert_eq!(a.reward, b.reward);
        assert_eq!(a.observation[1], -1.5);
        assert_eq!(a.diagnostics.joint_angles, b.diagnostics.joint_angles);
    }
}

#[test]
fn slippage_adds_constant() {
    let mut arm = reach_at([0.0, 0.0, 0.5], [0.5, 0.5], vec![FaultSpec::elbow_slippage()]);
    for a in [0.3, -0.6, 0.0] {
        let before = arm.state().q[2];
        arm.step(&[0.0, 0.0, a]).unwrap();
        let achieved = arm.state().q[2] - before;
        assert!((achieved - (a * 0.1 + 0.05)).abs() < 1e-15);
    }
}

#[test]
fn rom_fault_clamps_at_activation() {
    let mut env = Env::new(EnvConfig::quad_crawler()).unwrap();
    env.reset(1);
    env.apply_fault(FaultSpec::ankle_rom()).unwrap();
    assert!(env.state().q[1] >= 65f64.to_radians());
    assert_eq!(env.observe().len(), 13);
}

#[test]
fn malformed_faults_rejected() {
    let arm = EnvConfig::reach_arm();
    assert!(apply_fault(&arm, FaultSpec::FrozenSensor { joint: 9, value: 0.0 }).is_err());
    assert!(apply_fault(&arm, FaultSpec::severed_limb()).is_err());
    let crawler = EnvConfig::quad_crawler();
    assert!(apply_fault(&crawler, FaultSpec::RomRestriction { joint: 0, min: -1.0, max: 0.0 }).is_err());
    assert!(apply_fault(&crawler, FaultSpec::RomRestriction { joint: 0, min: 0.1, max: 0.1 }).is_err());
    assert!(apply_fault(&crawler, FaultSpec::LinkShortenSevered { leg: 4, factor: 0.5 }).is_err());
}

#[test]
fn non_finite_action_is_an_error() {
    let mut env = Env::new(EnvConfig::reach_arm()).unwrap();
    env.reset(0);
    assert!(matches!(env.step(&[0.0, f64::NAN, 0.0]), Err(Error::NonFinite(_))));
}

fn any_fault(kind: EnvKind) -> impl Strategy<Value = Vec<FaultSpec>> {
    let faults = match kind {
        EnvKind::ReachArm => vec![vec![], vec![FaultSpec::frozen_shoulder()], vec![FaultSpec::elbow_slippage()]],
        EnvKind::QuadCrawler => vec![
            vec![],
            vec![FaultSpec::hip_rom()],
            vec![FaultSpec::ankle_rom()],
            vec![FaultSpec::severed_limb()],
            vec![FaultSpec::unsevered_limb()],
        ],
    };
    proptest::sample::select(faults)
}

fn rollout(cfg: EnvConfig, seed: u64, actions: &[Vec<f64>]) -> Vec<(Vec<f64>, f64, Vec<f64>)> {
    let mut env = Env::new(cfg).unwrap();
    env.reset(seed);
    actions
        .iter()
        .map(|a| {
            let r = env.step(a).unwrap();
            (r.observation, r.reward, r.diagnostics.joint_angles)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crawler_invariants(faults in any_fault(EnvKind::QuadCrawler), seed in 0u64..1000,
                          actions in proptest::collection::vec(proptest::collection::vec(-1.5f64..1.5, 8), 1..60)) {
        let cfg = EnvConfig { faults, ..EnvConfig::quad_crawler() };
        let a = rollout(cfg.clone(), seed, &actions);
        let b = rollout(cfg.clone(), seed, &actions);
        prop_assert_eq!(&a, &b);
        let ranges = cfg.effective_ranges();
        for (obs, reward, q) in &a {
            prop_assert_eq!(obs.len(), 13);
            prop_assert!(reward.is_finite());
            for (x, r) in q.iter().zip(&ranges) {
                prop_assert!(r.contains(*x));
            }
        }
    }

    #[test]
    fn arm_invariants(faults in any_fault(EnvKind::ReachArm), seed in 0u64..1000,
                      actions in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..50)) {
        let cfg = EnvConfig { faults: faults.clone(), ..EnvConfig::reach_arm() };
        let traj = rollout(cfg, seed, &actions);
        for (obs, _, _) in &traj {
            prop_assert_eq!(obs.len(), 7);
            if !faults.is_empty() {
                if let FaultSpec::FrozenSensor { joint, value } = faults[0] {
                    prop_assert_eq!(obs[joint], value);
                }
            }
        }
    }

    #[test]
    fn empty_fault_list_matches_untouched(seed in 0u64..1000,
                                          actions in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 8), 1..40)) {
        let base = EnvConfig::quad_crawler();
        let touched = EnvConfig { faults: vec![], ..apply_fault(&base, FaultSpec::hip_rom()).unwrap() };
        prop_assert_eq!(rollout(base, seed, &actions), rollout(touched, seed, &actions));
    }

    #[test]
    fn airborne_crawler_never_moves(seed in 0u64..1000,
                                    ankle_actions in proptest::collection::vec(0.0f64..1.0, 1..30)) {
        // Hips fixed at 0, ankles only bend further: every foot stays above ground.
        let mut env = Env::new(EnvConfig::quad_crawler()).unwrap();
        env.reset(seed);
        let mut q = env.state().q.clone();
        for leg in 0..4 {
            q[2 * leg] = 0.0;
            q[2 * leg + 1] = 60f64.to_radians();
        }
        env.set_state(EnvState { q, ..env.state().clone() }).unwrap();
        for a in ankle_actions {
            let act = [0.0, a, 0.0, a, 0.0, a, 0.0, a];
            env.step(&act).unwrap();
            prop_assert_eq!(env.state().body_x, 0.0);
        }
    }
}

#[test]
fn fault_labels() {
    for name in ["hip_rom", "ankle_rom", "severed_limb", "unsevered_limb", "frozen_shoulder", "elbow_slippage"] {
        assert_eq!(FaultSpec::preset(name).unwrap().label(), name);
    }
    let custom = FaultSpec::FrozenSensor { joint: 0, value: 0.2 };
    assert_eq!(custom.label(), "frozen_sensor");
    assert!(FaultSpec::preset("nope").is_none());
}
