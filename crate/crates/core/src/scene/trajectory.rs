use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::mat3_mul;

use super::{
    apply, level_generators, render, sphere_mesh, Frame, Level, Mesh, PoseState, Result,
    SceneError, ACTIONS_PER_LEVEL,
};

/// Maximum random-walk length.
pub const MAX_WALK_LENGTH: usize = 20;

/// A recorded random walk: the canonical start, the sampled generator
/// indices, every intermediate pose, and (when rendered) one frame per pose.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub object_id: usize,
    pub level: Level,
    pub initial_state: PoseState,
    pub actions: Vec<usize>,
    pub states: Vec<PoseState>,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_rendered(&self) -> bool {
        self.frames.len() == self.states.len()
    }
}

/// Sample a uniform random walk of `length` generators and record every
/// intermediate step. `render_frames` controls whether frames are produced;
/// state-only trajectories are enough for the state-oracle encoder.
pub fn random_walk(
    mesh: &Mesh,
    object_id: usize,
    level: Level,
    length: usize,
    rng_seed: u64,
    render_frames: bool,
) -> Result<Trajectory> {
    if length == 0 || length > MAX_WALK_LENGTH {
        return Err(SceneError::InvalidWalkLength(length));
    }
    let generators = level_generators(level);
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let initial = PoseState::initial(level);
    let mut states = vec![initial.clone()];
    let mut actions = Vec::with_capacity(length);
    for _ in 0..length {
        let idx = rng.gen_range(0..ACTIONS_PER_LEVEL);
        let next = apply(states.last().unwrap(), &generators[idx])?;
        actions.push(idx);
        states.push(next);
    }
    let frames = if render_frames {
        states.iter().map(|s| render(s, mesh)).collect()
    } else {
        Vec::new()
    };
    Ok(Trajectory { object_id, level, initial_state: initial, actions, states, frames })
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InjectivityViolation {
    /// (trajectory index, step) of the two compared samples.
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub distance: f64,
}

/// Result of the visual-injectivity check: distinct latent states must map
/// to frames farther apart than the threshold.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InjectivityReport {
    pub threshold: f64,
    pub pairs_checked: usize,
    pub skipped_identical_states: usize,
    pub violations: Vec<InjectivityViolation>,
}

impl InjectivityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default distance threshold τ: 0.5% of the maximum possible L2 distance
/// between two frames, calibrated once against the sphere control case.
pub fn default_injectivity_threshold() -> f64 {
    0.005 * 255.0 * (super::FRAME_SIZE as f64)
}

/// Sample `pairs` random (trajectory, step) pairs with distinct states and
/// assert their frames are farther apart than `threshold`. Pairs with
/// identical states are skipped (and counted), not violations.
pub fn check_injectivity(
    trajectories: &[Trajectory],
    pairs: usize,
    seed: u64,
    threshold: f64,
) -> InjectivityReport {
    let rendered: Vec<&Trajectory> = trajectories.iter().filter(|t| t.is_rendered()).collect();
    let mut report = InjectivityReport {
        threshold,
        pairs_checked: 0,
        skipped_identical_states: 0,
        violations: Vec::new(),
    };
    if rendered.is_empty() {
        return report;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    while report.pairs_checked < pairs && attempts < pairs * 20 {
        attempts += 1;
        let ti = rng.gen_range(0..rendered.len());
        let tj = rng.gen_range(0..rendered.len());
        let (ta, tb) = (rendered[ti], rendered[tj]);
        if ta.object_id != tb.object_id {
            // Injectivity is per object: different meshes are trivially apart.
            continue;
        }
        let si = rng.gen_range(0..ta.states.len());
        let sj = rng.gen_range(0..tb.states.len());
        if std::ptr::eq(ta, tb) && si == sj {
            continue;
        }
        if ta.states[si] == tb.states[sj] {
            report.skipped_identical_states += 1;
            continue;
        }
        let distance = ta.frames[si].l2_distance(&tb.frames[sj]);
        report.pairs_checked += 1;
        if distance <= threshold {
            report.violations.push(InjectivityViolation {
                a: (ti, si),
                b: (tj, sj),
                distance,
            });
        }
    }
    report
}

/// The control case showing why a rotationally symmetric object defeats
/// injectivity: pair random level-3 sphere states with the same state
/// rotated by 180° about the z axis — a word in the level-3 generators
/// (rot-z six times) and a symmetry of the sphere — so the states differ
/// but the renders coincide.
pub fn sphere_control_report(pairs: usize, seed: u64, threshold: f64) -> Result<InjectivityReport> {
    let mesh = sphere_mesh();
    let generators = level_generators(Level::L3);
    let half_turn = super::Axis::Z.rotation(180.0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut report = InjectivityReport {
        threshold,
        pairs_checked: 0,
        skipped_identical_states: 0,
        violations: Vec::new(),
    };
    for k in 0..pairs {
        // A short random rotation-only walk keeps the sphere centered.
        let mut state = PoseState::initial(Level::L3);
        for _ in 0..rng.gen_range(0..4usize) {
            let idx = rng.gen_range(0..3usize);
            state = apply(&state, &generators[idx])?;
        }
        let mut rotated = state.clone();
        rotated.rotation = mat3_mul(&half_turn, &state.rotation);
        if state == rotated {
            report.skipped_identical_states += 1;
            continue;
        }
        let fa = render(&state, &mesh);
        let fb = render(&rotated, &mesh);
        let distance = fa.l2_distance(&fb);
        report.pairs_checked += 1;
        if distance <= threshold {
            report.violations.push(InjectivityViolation {
                a: (k, 0),
                b: (k, 1),
                distance,
            });
        }
    }
    Ok(report)
}
