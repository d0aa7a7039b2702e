//! LSA benchmark generation: latent pose states, the three six-generator
//! action sets, procedural asymmetric meshes, a deterministic software
//! rasterizer, and random-walk trajectory sampling.

mod mesh;
mod render;
mod trajectory;

pub use mesh::{generate_mesh, is_asymmetric, load_mesh, save_obj, sphere_mesh, Mesh};
pub use render::{read_pgm, render, Frame, CAMERA_DEPTH, FOCAL_PX, FRAME_SIZE};
pub use trajectory::{
    check_injectivity, default_injectivity_threshold, random_walk, sphere_control_report,
    InjectivityReport, InjectivityViolation, Trajectory, MAX_WALK_LENGTH,
};

use thiserror::Error;

use crate::linalg::{mat3_is_rotation, mat3_mul, rot_x, rot_y, rot_z, Mat3, Vec3, MAT3_IDENTITY};

/// Translation step size in pixels for the Level-1 generators.
pub const L1_STEP_PX: f64 = 20.0;
/// Isotropic scale factor for the Level-2/Level-3 scaling generators.
pub const SCALE_FACTOR: f64 = 1.2;
/// Atomic rotation angle in degrees for the Level-3 rotation generators.
pub const ROTATION_DEG: f64 = 30.0;
/// Fixed Level-3 translation vector in normalized camera space.
pub const L3_TRANSLATION: Vec3 = [0.15, 0.15, 0.0];
/// Every level exposes exactly this many generators.
pub const ACTIONS_PER_LEVEL: usize = 6;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid level {0}; expected 1, 2 or 3")]
    InvalidLevel(u8),
    #[error("action level {action} does not match state level {state}")]
    LevelMismatch { action: u8, state: u8 },
    #[error("action index {0} out of range (6 generators per level)")]
    InvalidAction(usize),
    #[error("walk length {0} out of range [1, {max}]", max = MAX_WALK_LENGTH)]
    InvalidWalkLength(usize),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SceneError>;

/// Benchmark difficulty level, keyed by the algebraic structure of its
/// generator set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    /// 2D translations (abelian).
    L1,
    /// Centered scaling + translations (solvable, non-abelian).
    L2,
    /// 3D rotations + scaling + translation (non-solvable).
    L3,
}

impl Level {
    pub fn from_index(i: u8) -> Result<Level> {
        match i {
            1 => Ok(Level::L1),
            2 => Ok(Level::L2),
            3 => Ok(Level::L3),
            other => Err(SceneError::InvalidLevel(other)),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Level::L1 => 1,
            Level::L2 => 2,
            Level::L3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn rotation(self, angle_deg: f64) -> Mat3 {
        let rad = angle_deg.to_radians();
        match self {
            Axis::X => rot_x(rad),
            Axis::Y => rot_y(rad),
            Axis::Z => rot_z(rad),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    /// Shift the object in the image plane by `v` pixels (+x right, +y down).
    Translate2D { v: [f64; 2] },
    /// Homothety about the image center by `factor`.
    Scale2D { factor: f64 },
    /// Extrinsic rotation about a world axis.
    Rotate3D { axis: Axis, angle_deg: f64 },
    /// Uniform 3D scaling about the canonical object position.
    Scale3D { factor: f64 },
    /// Shift in normalized camera space.
    Translate3D { v: Vec3 },
}

/// One generator of a level's action set.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorAction {
    pub level: Level,
    pub index: usize,
    pub name: &'static str,
    pub kind: ActionKind,
}

/// The six generators of a level, in their canonical order.
pub fn level_generators(level: Level) -> Vec<GeneratorAction> {
    let d = L1_STEP_PX;
    let mk = |index, name, kind| GeneratorAction { level, index, name, kind };
    match level {
        Level::L1 => vec![
            mk(0, "right", ActionKind::Translate2D { v: [d, 0.0] }),
            mk(1, "left", ActionKind::Translate2D { v: [-d, 0.0] }),
            mk(2, "up", ActionKind::Translate2D { v: [0.0, -d] }),
            mk(3, "down", ActionKind::Translate2D { v: [0.0, d] }),
            mk(4, "down-right", ActionKind::Translate2D { v: [d, d] }),
            mk(5, "up-left", ActionKind::Translate2D { v: [-d, -d] }),
        ],
        Level::L2 => vec![
            mk(0, "scale-up", ActionKind::Scale2D { factor: SCALE_FACTOR }),
            mk(1, "scale-down", ActionKind::Scale2D { factor: 1.0 / SCALE_FACTOR }),
            mk(2, "right", ActionKind::Translate2D { v: [d, 0.0] }),
            mk(3, "left", ActionKind::Translate2D { v: [-d, 0.0] }),
            mk(4, "up", ActionKind::Translate2D { v: [0.0, -d] }),
            mk(5, "down", ActionKind::Translate2D { v: [0.0, d] }),
        ],
        Level::L3 => vec![
            mk(0, "rot-x", ActionKind::Rotate3D { axis: Axis::X, angle_deg: ROTATION_DEG }),
            mk(1, "rot-y", ActionKind::Rotate3D { axis: Axis::Y, angle_deg: ROTATION_DEG }),
            mk(2, "rot-z", ActionKind::Rotate3D { axis: Axis::Z, angle_deg: ROTATION_DEG }),
            mk(3, "scale-up", ActionKind::Scale3D { factor: SCALE_FACTOR }),
            mk(4, "scale-down", ActionKind::Scale3D { factor: 1.0 / SCALE_FACTOR }),
            mk(5, "translate", ActionKind::Translate3D { v: L3_TRANSLATION }),
        ],
    }
}

/// Latent object pose. Level 1 touches only `translation_2d`; level 2 adds
/// the screen-space `scale`; level 3 acts in camera space through
/// `rotation`, `scale` and `translation_3d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseState {
    pub level: Level,
    /// Pixel offset of the object from the image center (+x right, +y down).
    pub translation_2d: [f64; 2],
    /// Screen-space scale for L2, object scale for L3.
    pub scale: f64,
    /// Object orientation (orthogonal, det +1).
    pub rotation: Mat3,
    /// Offset from the canonical object position, camera-space units.
    pub translation_3d: Vec3,
}

impl PoseState {
    /// The canonical initial pose.
    pub fn initial(level: Level) -> PoseState {
        PoseState {
            level,
            translation_2d: [0.0, 0.0],
            scale: 1.0,
            rotation: MAT3_IDENTITY,
            translation_3d: [0.0, 0.0, 0.0],
        }
    }

    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if self.scale <= 0.0 {
            return Err(SceneError::Mesh(format!("non-positive scale {}", self.scale)));
        }
        if !mat3_is_rotation(&self.rotation, tol) {
            return Err(SceneError::Mesh("rotation is not orthogonal/det+1".into()));
        }
        if self.level == Level::L1
            && (self.scale != 1.0
                || self.rotation != MAT3_IDENTITY
                || self.translation_3d != [0.0, 0.0, 0.0])
        {
            return Err(SceneError::Mesh("level-1 state moved non-translation fields".into()));
        }
        Ok(())
    }
}

/// Apply a generator to a pose state.
pub fn apply(state: &PoseState, action: &GeneratorAction) -> Result<PoseState> {
    if state.level != action.level {
        return Err(SceneError::LevelMismatch {
            action: action.level.index(),
            state: state.level.index(),
        });
    }
    let mut next = state.clone();
    match &action.kind {
        ActionKind::Translate2D { v } => {
            next.translation_2d[0] += v[0];
            next.translation_2d[1] += v[1];
        }
        ActionKind::Scale2D { factor } => {
            // Homothety about the image center: the object offset and the
            // screen scale both multiply, so rendered pixels follow
            // x' = s·(x − c) + c.
            next.translation_2d[0] *= factor;
            next.translation_2d[1] *= factor;
            next.scale *= factor;
        }
        ActionKind::Rotate3D { axis, angle_deg } => {
            // Extrinsic: the new rotation is applied in world axes, after
            // whatever the object has already accumulated.
            next.rotation = mat3_mul(&axis.rotation(*angle_deg), &state.rotation);
        }
        ActionKind::Scale3D { factor } => {
            // Homothety about the canonical object position.
            next.scale *= factor;
            next.translation_3d = crate::linalg::scale(&state.translation_3d, *factor);
        }
        ActionKind::Translate3D { v } => {
            next.translation_3d = crate::linalg::add(&state.translation_3d, v);
        }
    }
    Ok(next)
}

/// Apply a sequence of generator indices starting from `state`.
pub fn apply_sequence(
    state: &PoseState,
    generators: &[GeneratorAction],
    actions: &[usize],
) -> Result<PoseState> {
    let mut cur = state.clone();
    for &idx in actions {
        let action = generators.get(idx).ok_or(SceneError::InvalidAction(idx))?;
        cur = apply(&cur, action)?;
    }
    Ok(cur)
}
