//! Cross-module pipeline checks: the state-oracle encoder, the exactly-fit
//! level-1 probe, and the trained probe's homomorphism sanity.

use ndarray::{Array1, Array2};

use lsa_core::embed::{
    train_probe, Encoder, EncoderSpec, ProbeParams, TrainConfig, NUM_ACTIONS,
    ORACLE_D_MODEL,
};
use lsa_core::evalrec::recursive_rollout;
use lsa_core::experiment::{build_memory_dataset, ExperimentConfig};
use lsa_core::scene::{
    apply, level_generators, Level, PoseState, FRAME_SIZE, L1_STEP_PX,
};

fn oracle_l1_dataset(train: usize, test: usize) -> lsa_core::experiment::MemoryDataset {
    let cfg = ExperimentConfig {
        level: 1,
        objects: 7,
        train_trajectories: train,
        test_trajectories: test,
        walk_length: 20,
        encoder: EncoderSpec::OracleHomomorphic,
        ..ExperimentConfig::default()
    };
    build_memory_dataset(&cfg, false).unwrap()
}

/// The exact linear probe for level 1 in oracle coordinates: one-hot action
/// embeddings routed through the right half of W add the per-action
/// translation offset (scaled by the frame size) via the homogeneous slot.
fn exact_l1_oracle_probe() -> ProbeParams {
    let d = ORACLE_D_MODEL;
    let mut p = ProbeParams::identity(d);
    let mut table = Array2::zeros((NUM_ACTIONS, d));
    for a in 0..NUM_ACTIONS {
        table[(a, a)] = 1.0;
    }
    p.action_table = table;
    let generators = level_generators(Level::L1);
    for (a, g) in generators.iter().enumerate() {
        let v = match &g.kind {
            lsa_core::scene::ActionKind::Translate2D { v } => v,
            other => panic!("level 1 has only translations, got {other:?}"),
        };
        // Slots 9 and 10 hold the normalized translation offset.
        p.w[(9, d + a)] = v[0] / FRAME_SIZE as f64;
        p.w[(10, d + a)] = v[1] / FRAME_SIZE as f64;
    }
    p
}

#[test]
fn exact_fit_oracle_probe_tracks_20_steps() {
    let probe = exact_l1_oracle_probe();
    let encoder = Encoder::from_spec(&EncoderSpec::OracleHomomorphic).unwrap();
    let generators = level_generators(Level::L1);

    // A fixed 20-step walk mixing all generators.
    let actions: Vec<usize> = (0..20).map(|k| [0, 3, 4, 1, 2, 5][k % 6]).collect();
    let mut state = PoseState::initial(Level::L1);
    let z0 = encoder.encode_state(&state).unwrap();
    let rollout = recursive_rollout(&probe, &z0, &actions).unwrap();
    for (k, &a) in actions.iter().enumerate() {
        state = apply(&state, &generators[a]).unwrap();
        let truth = encoder.encode_state(&state).unwrap();
        let diff = &rollout[k] - &truth;
        let err = diff.dot(&diff).sqrt();
        assert!(err < 1e-3, "step {}: drift {err}", k + 1);
    }
}

#[test]
fn oracle_l1_training_reaches_linear_fit() {
    let ds = oracle_l1_dataset(800, 4);
    let encoder = Encoder::from_spec(&EncoderSpec::OracleHomomorphic).unwrap();
    let tuples = ds.train_tuples(&encoder).unwrap();
    let cfg = TrainConfig::default();
    assert_eq!((cfg.learning_rate, cfg.batch_size, cfg.epochs, cfg.seed), (1e-4, 1024, 50, 42));
    let (params, curve) = train_probe(&tuples, &cfg).unwrap();
    let final_loss = curve.last().unwrap().loss;
    // The translation action is exactly linear in oracle coordinates.
    let threshold = 1e-4 * ORACLE_D_MODEL as f64;
    assert!(final_loss < threshold, "final {final_loss} ≥ {threshold}");

    // Homomorphism sanity: the learned per-action update is
    // state-independent — its variance across states is a vanishing
    // fraction of the embedding variance.
    let generators = level_generators(Level::L1);
    let mut states = vec![PoseState::initial(Level::L1)];
    for k in 0..40 {
        let prev = states.last().unwrap().clone();
        states.push(apply(&prev, &generators[k % 6]).unwrap());
    }
    let embeddings: Vec<Array1<f64>> = states
        .iter()
        .map(|s| encoder.encode_state(s).unwrap())
        .collect();
    let mean_z = embeddings.iter().fold(Array1::<f64>::zeros(ORACLE_D_MODEL), |acc, z| acc + z)
        / embeddings.len() as f64;
    let signal_var = embeddings
        .iter()
        .map(|z| {
            let d = z - &mean_z;
            d.dot(&d)
        })
        .sum::<f64>()
        / embeddings.len() as f64;

    for action in 0..NUM_ACTIONS {
        let updates: Vec<Array1<f64>> = embeddings
            .iter()
            .map(|z| {
                let next = lsa_core::embed::probe_forward(&params, z, action).unwrap();
                next - z
            })
            .collect();
        let mean_u = updates.iter().fold(Array1::<f64>::zeros(ORACLE_D_MODEL), |acc, u| acc + u)
            / updates.len() as f64;
        let update_var = updates
            .iter()
            .map(|u| {
                let d = u - &mean_u;
                d.dot(&d)
            })
            .sum::<f64>()
            / updates.len() as f64;
        assert!(
            update_var < 1e-6 * signal_var,
            "action {action}: update variance {update_var:.3e} vs signal {signal_var:.3e}"
        );
        // And the mean update matches the true generator offset.
        let g = &generators[action];
        if let lsa_core::scene::ActionKind::Translate2D { v } = &g.kind {
            assert!((mean_u[9] - v[0] / FRAME_SIZE as f64).abs() < 0.1 * (L1_STEP_PX / FRAME_SIZE as f64));
            assert!((mean_u[10] - v[1] / FRAME_SIZE as f64).abs() < 0.1 * (L1_STEP_PX / FRAME_SIZE as f64));
        }
    }
}
