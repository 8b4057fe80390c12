use faultadapt::checkpoint::{load_checkpoint, save_checkpoint};
use faultadapt::config::ExperimentConfig;
use faultadapt::continual::{run_adaptation, run_three_phase, AlgorithmConfig, PhasePlan, TransferApproach};
use faultadapt::envs::{apply_fault, Env, EnvConfig, FaultSpec};
use faultadapt::ppo::PpoConfig;
use faultadapt::Error;
use proptest::prelude::*;

fn small_ppo() -> AlgorithmConfig {
    AlgorithmConfig::Ppo(PpoConfig {
        n_steps: 100,
        minibatch_size: 20,
        epochs: 2,
        ..PpoConfig::reach()
    })
}

fn plan() -> PhasePlan {
    PhasePlan {
        train_steps: 200,
        train_eval_every: 100,
        fault: FaultSpec::elbow_slippage(),
        adapt_steps: 150,
        adapt_eval_every: 50,
    }
}

#[test]
fn adaptation_from_a_saved_checkpoint_matches_the_in_memory_protocol() {
    let env = EnvConfig::reach_arm();
    let full = run_three_phase(&small_ppo(), &env, &plan(), TransferApproach::RetainAll, 3, 11).unwrap();
    assert_eq!(full.phase1.steps(), [0, 100, 200]);
    assert_eq!(full.phase3.steps(), [0, 50, 100, 150]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.ftrl");
    save_checkpoint(&path, &full.snapshot, "digest-x").unwrap();
    let ck = load_checkpoint(&path).unwrap();
    assert_eq!(ck.meta.config_digest, "digest-x");
    assert_eq!(ck.meta.captured_at, 200);

    let resumed = run_adaptation(&ck.snapshot, TransferApproach::RetainAll, &env, &plan(), 3, 11).unwrap();
    assert_eq!(resumed.curve, full.phase3);
}

#[test]
fn minimal_config_fills_defaults_and_rejects_typos() {
    let text = r#"{"schema_version":1,"experiment_id":"x","environment":{"kind":"reach_arm"},"algorithm":{"ppo":{}},"seeds":"0-2"}"#;
    let cfg = ExperimentConfig::from_json_str(text).unwrap();
    assert_eq!(cfg.seeds, [0, 1, 2]);
    assert_eq!(cfg.environment, EnvConfig::reach_arm());
    assert_eq!(cfg.digest(), ExperimentConfig::from_json_str(text).unwrap().digest());

    let typo = text.replace(r#""seeds""#, r#""seedz""#);
    match ExperimentConfig::from_json_str(&typo) {
        Err(Error::Parse { key, .. }) => assert_eq!(key, "seedz"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

fn crawler_fault() -> impl Strategy<Value = FaultSpec> {
    prop_oneof![
        Just(FaultSpec::hip_rom()),
        Just(FaultSpec::ankle_rom()),
        Just(FaultSpec::severed_limb()),
        Just(FaultSpec::unsevered_limb()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn true_angles_stay_in_effective_ranges(
        fault in crawler_fault(),
        seed in 0u64..1000,
        actions in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 8), 1..60),
    ) {
        let cfg = apply_fault(&EnvConfig::quad_crawler(), fault).unwrap();
        let ranges = cfg.effective_ranges();
        let mut env = Env::new(cfg).unwrap();
        env.reset(seed);
        for a in &actions {
            let r = env.step(a).unwrap();
            for (q, range) in r.diagnostics.joint_angles.iter().zip(&ranges) {
                prop_assert!(range.contains(*q), "{q} outside [{}, {}]", range.min, range.max);
            }
        }
    }
}
