//! Experiment orchestration: one config drives dataset generation, probe
//! training, and recursive evaluation, so a single `repro` run replays the
//! whole pipeline for a level deterministically.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{
    Encoder, EncoderSpec, EpochLoss, LossKind, ProbeParams, TrainConfig, TransitionSample,
    write_loss_curve_csv,
};
use crate::evalrec::{evaluate_split, EvalMetadata, EvalReport, RolloutCase};
use crate::scene::{
    apply_sequence, generate_mesh, level_generators, random_walk, ActionKind, Frame,
    GeneratorAction, InjectivityReport, InjectivityViolation, Level, Mesh, PoseState,
    default_injectivity_threshold, FRAME_SIZE, L1_STEP_PX, L3_TRANSLATION, MAX_WALK_LENGTH,
    ROTATION_DEG, SCALE_FACTOR, Trajectory,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Eval(#[from] crate::evalrec::EvalError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Everything one level's pipeline needs. Split contract: training
/// trajectories contribute atomic (N = 1) tuples only; test trajectories
/// contribute prefix tuples with N up to the walk length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub level: u8,
    pub global_seed: u64,
    /// Number of procedural object classes (mesh seeds 0..objects).
    pub objects: usize,
    pub train_trajectories: usize,
    pub test_trajectories: usize,
    pub walk_length: usize,
    pub encoder: EncoderSpec,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub injectivity_pairs: usize,
    /// 0 = use all available parallelism.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            level: 1,
            global_seed: 42,
            objects: 7,
            train_trajectories: 24,
            test_trajectories: 8,
            walk_length: MAX_WALK_LENGTH,
            encoder: EncoderSpec::DownsampleFlatten,
            train: TrainConfig::default(),
            out_dir: PathBuf::from("lsa-out"),
            injectivity_pairs: 100,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.level) {
            return Err(ExperimentError::InvalidConfig(format!(
                "level {} out of range 1..=3",
                self.level
            )));
        }
        if self.walk_length == 0 || self.walk_length > MAX_WALK_LENGTH {
            return Err(ExperimentError::InvalidConfig(format!(
                "walk_length {} out of range 1..={MAX_WALK_LENGTH}",
                self.walk_length
            )));
        }
        if self.objects == 0 || self.train_trajectories == 0 {
            return Err(ExperimentError::InvalidConfig(
                "need at least one object and one training trajectory".into(),
            ));
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return Err(ExperimentError::InvalidConfig("empty training schedule".into()));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<ExperimentConfig> {
        let data = std::fs::read(path).map_err(io_err(path))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&data)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn level_enum(&self) -> Level {
        Level::from_index(self.level).expect("validated")
    }
}

/// Seed for trajectory `index`: a splitmix64 mix of the global seed and the
/// index, so each walk owns an independent deterministic stream.
pub fn trajectory_seed(global_seed: u64, index: u64) -> u64 {
    let mut x = global_seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

// ── manifest ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionEntry {
    pub index: usize,
    pub name: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    pub values: Vec<f64>,
}

/// Generator parameterization block recorded in every manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorBlock {
    pub delta_px: f64,
    pub sigma: f64,
    pub theta_deg: f64,
    pub translation_3d: [f64; 3],
    pub actions: Vec<ActionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: usize,
    pub mesh_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub index: usize,
    pub object_id: usize,
    pub split: String,
    pub seed: u64,
    pub actions: Vec<usize>,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub level: u8,
    pub global_seed: u64,
    pub image_size: usize,
    pub generators: GeneratorBlock,
    pub objects: Vec<ObjectEntry>,
    pub trajectories: Vec<TrajectoryEntry>,
}

fn action_entry(g: &GeneratorAction) -> ActionEntry {
    let (kind, axis, values) = match &g.kind {
        ActionKind::Translate2D { v } => ("translate2d", None, v.to_vec()),
        ActionKind::Scale2D { factor } => ("scale2d", None, vec![*factor]),
        ActionKind::Rotate3D { axis, angle_deg } => {
            ("rotate3d", Some(axis.label().to_string()), vec![*angle_deg])
        }
        ActionKind::Scale3D { factor } => ("scale3d", None, vec![*factor]),
        ActionKind::Translate3D { v } => ("translate3d", None, v.to_vec()),
    };
    ActionEntry { index: g.index, name: g.name.to_string(), kind: kind.to_string(), axis, values }
}

pub fn generator_block(level: Level) -> GeneratorBlock {
    GeneratorBlock {
        delta_px: L1_STEP_PX,
        sigma: SCALE_FACTOR,
        theta_deg: ROTATION_DEG,
        translation_3d: L3_TRANSLATION,
        actions: level_generators(level).iter().map(action_entry).collect(),
    }
}

// ── generate ────────────────────────────────────────────────────────────

pub struct GenerateOutput {
    pub manifest_path: PathBuf,
    pub injectivity_path: PathBuf,
    pub injectivity: InjectivityReport,
}

/// Render the configured dataset to disk: PGM frames, a JSON manifest, and
/// an injectivity report.
pub fn run_generate(cfg: &ExperimentConfig) -> Result<GenerateOutput> {
    cfg.validate()?;
    let level = cfg.level_enum();
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out.join("frames")).map_err(io_err(out))?;

    let meshes: Vec<Mesh> = (0..cfg.objects).map(|i| generate_mesh(i as u64)).collect();
    let total = cfg.train_trajectories + cfg.test_trajectories;

    let trajectories: Vec<TrajectoryEntry> = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<TrajectoryEntry> {
            let object_id = idx % cfg.objects;
            let seed = trajectory_seed(cfg.global_seed, idx as u64);
            let traj = random_walk(&meshes[object_id], object_id, level, cfg.walk_length, seed, true)?;
            let dir = out.join("frames").join(format!("t{idx:05}"));
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let mut frames = Vec::with_capacity(traj.frames.len());
            for (k, frame) in traj.frames.iter().enumerate() {
                let rel = format!("frames/t{idx:05}/s{k:02}.pgm");
                let path = out.join(&rel);
                frame.save_pgm(&path)?;
                frames.push(rel);
            }
            let split = if idx < cfg.train_trajectories { "train" } else { "test" };
            Ok(TrajectoryEntry {
                index: idx,
                object_id,
                split: split.to_string(),
                seed,
                actions: traj.actions,
                frames,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        level: cfg.level,
        global_seed: cfg.global_seed,
        image_size: FRAME_SIZE,
        generators: generator_block(level),
        objects: (0..cfg.objects).map(|id| ObjectEntry { id, mesh_seed: id as u64 }).collect(),
        trajectories,
    };
    let manifest_path = out.join("manifest.json");
    write_json(&manifest_path, &manifest)?;

    let injectivity = disk_injectivity_check(
        out,
        &manifest,
        cfg.injectivity_pairs,
        trajectory_seed(cfg.global_seed, 0xF00D),
        default_injectivity_threshold(),
    )?;
    let injectivity_path = out.join("injectivity.json");
    write_json(&injectivity_path, &injectivity)?;

    Ok(GenerateOutput { manifest_path, injectivity_path, injectivity })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(io_err(path))?;
    Ok(())
}

/// Visual-injectivity check over an on-disk dataset: sampled pairs of
/// distinct states on the same object must render at least the threshold
/// apart. Identical-state pairs are skipped, not violations.
pub fn disk_injectivity_check(
    dir: &Path,
    manifest: &Manifest,
    pairs: usize,
    seed: u64,
    threshold: f64,
) -> Result<InjectivityReport> {
    let level = Level::from_index(manifest.level)?;
    let generators = level_generators(level);
    let states: Vec<Vec<PoseState>> = manifest
        .trajectories
        .iter()
        .map(|t| -> Result<Vec<PoseState>> {
            let mut states = vec![PoseState::initial(level)];
            for k in 1..=t.actions.len() {
                states.push(apply_sequence(&PoseState::initial(level), &generators, &t.actions[..k])?);
            }
            Ok(states)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = InjectivityReport {
        threshold,
        pairs_checked: 0,
        skipped_identical_states: 0,
        violations: Vec::new(),
    };
    if manifest.trajectories.is_empty() {
        return Ok(report);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    while report.pairs_checked < pairs && attempts < pairs * 20 {
        attempts += 1;
        let ti = rng.gen_range(0..manifest.trajectories.len());
        let tj = rng.gen_range(0..manifest.trajectories.len());
        let (ta, tb) = (&manifest.trajectories[ti], &manifest.trajectories[tj]);
        if ta.object_id != tb.object_id {
            continue;
        }
        let si = rng.gen_range(0..ta.frames.len());
        let sj = rng.gen_range(0..tb.frames.len());
        if ti == tj && si == sj {
            continue;
        }
        if states[ti][si] == states[tj][sj] {
            report.skipped_identical_states += 1;
            continue;
        }
        let fa = Frame::load_pgm(&dir.join(&ta.frames[si]))?;
        let fb = Frame::load_pgm(&dir.join(&tb.frames[sj]))?;
        let distance = fa.l2_distance(&fb);
        report.pairs_checked += 1;
        if distance <= threshold {
            report.violations.push(InjectivityViolation {
                a: (ti, si),
                b: (tj, sj),
                distance,
            });
        }
    }
    Ok(report)
}

// ── dataset loading / encoding ──────────────────────────────────────────

pub struct LoadedDataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub level: Level,
    /// Reconstructed per-step pose states, one vec per trajectory.
    pub states: Vec<Vec<PoseState>>,
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let manifest_path = dir.join("manifest.json");
    let data = std::fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_slice(&data)?;
    let level = Level::from_index(manifest.level)?;
    let generators = level_generators(level);
    let states = manifest
        .trajectories
        .iter()
        .map(|t| -> Result<Vec<PoseState>> {
            let initial = PoseState::initial(level);
            let mut acc = vec![initial.clone()];
            let mut cur = initial;
            for &a in &t.actions {
                cur = crate::scene::apply(&cur, &generators[a])?;
                acc.push(cur.clone());
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset { dir: dir.to_path_buf(), manifest, level, states })
}

impl LoadedDataset {
    fn entries(&self, split: &str) -> Vec<(usize, &TrajectoryEntry)> {
        self.manifest
            .trajectories
            .iter()
            .enumerate()
            .filter(|(_, t)| t.split == split)
            .collect()
    }

    fn load_frames(&self, entry: &TrajectoryEntry) -> Result<Vec<Frame>> {
        entry
            .frames
            .iter()
            .map(|rel| Ok(Frame::load_pgm(&self.dir.join(rel))?))
            .collect()
    }
}

/// Cap on frames used to fit the PCA basis; keeps the sample matrix small.
const PCA_FIT_FRAME_CAP: usize = 512;

/// Realize the configured encoder against a dataset (fits PCA on training
/// frames when required).
pub fn build_encoder(spec: &EncoderSpec, ds: &LoadedDataset) -> Result<Encoder> {
    if let EncoderSpec::Pca { d_model, .. } = spec {
        let mut frames = Vec::new();
        'outer: for (_, entry) in ds.entries("train") {
            for rel in &entry.frames {
                frames.push(Frame::load_pgm(&ds.dir.join(rel))?);
                if frames.len() >= PCA_FIT_FRAME_CAP.max(*d_model) {
                    break 'outer;
                }
            }
        }
        let refs: Vec<&Frame> = frames.iter().collect();
        return Ok(Encoder::fit(spec, &refs)?);
    }
    Ok(Encoder::from_spec(spec)?)
}

/// Atomic (N = 1) tuples from the training split: every adjacent pair of a
/// training trajectory in embedding space.
pub fn encode_training_tuples(ds: &LoadedDataset, enc: &Encoder) -> Result<Vec<TransitionSample>> {
    let oracle = matches!(enc, Encoder::Oracle);
    let entries = ds.entries("train");
    let per_traj: Vec<Vec<TransitionSample>> = entries
        .par_iter()
        .map(|(ti, entry)| -> Result<Vec<TransitionSample>> {
            let states = &ds.states[*ti];
            let frames = if oracle { Vec::new() } else { ds.load_frames(entry)? };
            let mut embeddings = Vec::with_capacity(states.len());
            for (k, state) in states.iter().enumerate() {
                let frame = if oracle { None } else { Some(&frames[k]) };
                embeddings.push(enc.encode_sample(state, frame)?);
            }
            Ok(entry
                .actions
                .iter()
                .enumerate()
                .map(|(k, &action)| TransitionSample {
                    z_from: embeddings[k].clone(),
                    action,
                    z_to: embeddings[k + 1].clone(),
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_traj.into_iter().flatten().collect())
}

/// Rollout cases from the test split: `z0`, the action sequence, and the
/// encoder output after every prefix.
pub fn encode_rollout_cases(ds: &LoadedDataset, enc: &Encoder) -> Result<Vec<RolloutCase>> {
    let oracle = matches!(enc, Encoder::Oracle);
    let entries = ds.entries("test");
    entries
        .par_iter()
        .map(|(ti, entry)| -> Result<RolloutCase> {
            let states = &ds.states[*ti];
            let frames = if oracle { Vec::new() } else { ds.load_frames(entry)? };
            let encode = |k: usize| {
                let frame = if oracle { None } else { Some(&frames[k]) };
                enc.encode_sample(&states[k], frame)
            };
            let z0 = encode(0)?;
            let targets = (1..states.len()).map(encode).collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(RolloutCase { z0, actions: entry.actions.clone(), targets })
        })
        .collect()
}

// ── train / eval / repro ────────────────────────────────────────────────

pub struct TrainOutput {
    pub probe_path: PathBuf,
    pub curve_path: PathBuf,
    pub final_loss: f64,
    pub params: ProbeParams,
    pub curve: Vec<EpochLoss>,
}

pub fn run_train(cfg: &ExperimentConfig, dataset_dir: &Path, loss_kind: LossKind) -> Result<TrainOutput> {
    cfg.validate()?;
    let ds = load_dataset(dataset_dir)?;
    let encoder = build_encoder(&cfg.encoder, &ds)?;
    let samples = encode_training_tuples(&ds, &encoder)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.loss_kind = loss_kind;
    let (params, curve) = crate::embed::train_probe(&samples, &train_cfg)?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let probe_path = cfg.out_dir.join(format!("probe_{}.json", loss_kind.label()));
    params.save_json(&probe_path)?;
    let curve_path = cfg.out_dir.join(format!("loss_curve_{}.csv", loss_kind.label()));
    let mut file = std::fs::File::create(&curve_path).map_err(io_err(&curve_path))?;
    write_loss_curve_csv(&curve, &mut file).map_err(io_err(&curve_path))?;
    let final_loss = curve.last().map_or(f64::NAN, |e| e.loss);
    Ok(TrainOutput { probe_path, curve_path, final_loss, params, curve })
}

pub struct EvalOutput {
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
    pub report: EvalReport,
}

pub fn run_eval(
    cfg: &ExperimentConfig,
    dataset_dir: &Path,
    probe_path: &Path,
    loss_kind: LossKind,
) -> Result<EvalOutput> {
    cfg.validate()?;
    let ds = load_dataset(dataset_dir)?;
    let encoder = build_encoder(&cfg.encoder, &ds)?;
    let params = ProbeParams::load_json(probe_path)?;
    let cases = encode_rollout_cases(&ds, &encoder)?;
    let metadata = EvalMetadata {
        level: cfg.level,
        encoder: cfg.encoder.label().to_string(),
        loss_kind,
        global_seed: cfg.global_seed,
        train_seed: cfg.train.seed,
    };
    let report = evaluate_split(&cases, &params, loss_kind, metadata, MAX_WALK_LENGTH)?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let report_path = cfg.out_dir.join(format!("report_{}.json", loss_kind.label()));
    std::fs::write(&report_path, report.to_json_string()?).map_err(io_err(&report_path))?;
    let csv_path = cfg.out_dir.join(format!("report_{}.csv", loss_kind.label()));
    let mut file = std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    report.write_csv(&mut file).map_err(io_err(&csv_path))?;
    Ok(EvalOutput { report_path, csv_path, report })
}

pub struct ReproOutput {
    pub generate: GenerateOutput,
    pub trains: Vec<TrainOutput>,
    pub evals: Vec<EvalOutput>,
}

/// Full pipeline for one config: generate, then train + eval for both loss
/// kinds.
pub fn run_repro(cfg: &ExperimentConfig) -> Result<ReproOutput> {
    let generate = run_generate(cfg)?;
    let mut trains = Vec::new();
    let mut evals = Vec::new();
    for kind in [LossKind::Mse, LossKind::Cosine] {
        let t = run_train(cfg, &cfg.out_dir, kind)?;
        let e = run_eval(cfg, &cfg.out_dir, &t.probe_path, kind)?;
        trains.push(t);
        evals.push(e);
    }
    Ok(ReproOutput { generate, trains, evals })
}

// ── in-memory pipeline (no disk round trip) ─────────────────────────────

/// A dataset held in memory; used by tests and sanity pipelines where the
/// PGM round trip adds nothing.
pub struct MemoryDataset {
    pub level: Level,
    pub trajectories: Vec<Trajectory>,
    pub train_count: usize,
}

pub fn build_memory_dataset(cfg: &ExperimentConfig, render_frames: bool) -> Result<MemoryDataset> {
    cfg.validate()?;
    let level = cfg.level_enum();
    let meshes: Vec<Mesh> = (0..cfg.objects).map(|i| generate_mesh(i as u64)).collect();
    let total = cfg.train_trajectories + cfg.test_trajectories;
    let trajectories: Vec<Trajectory> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let object_id = idx % cfg.objects;
            let seed = trajectory_seed(cfg.global_seed, idx as u64);
            Ok(random_walk(&meshes[object_id], object_id, level, cfg.walk_length, seed, render_frames)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MemoryDataset { level, trajectories, train_count: cfg.train_trajectories })
}

impl MemoryDataset {
    pub fn train_tuples(&self, enc: &Encoder) -> Result<Vec<TransitionSample>> {
        let oracle = matches!(enc, Encoder::Oracle);
        let per_traj: Vec<Vec<TransitionSample>> = self.trajectories[..self.train_count]
            .par_iter()
            .map(|traj| -> Result<Vec<TransitionSample>> {
                let mut embeddings = Vec::with_capacity(traj.states.len());
                for (k, state) in traj.states.iter().enumerate() {
                    let frame = if oracle { None } else { Some(&traj.frames[k]) };
                    embeddings.push(enc.encode_sample(state, frame)?);
                }
                Ok(traj
                    .actions
                    .iter()
                    .enumerate()
                    .map(|(k, &action)| TransitionSample {
                        z_from: embeddings[k].clone(),
                        action,
                        z_to: embeddings[k + 1].clone(),
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(per_traj.into_iter().flatten().collect())
    }

    pub fn rollout_cases(&self, enc: &Encoder) -> Result<Vec<RolloutCase>> {
        let oracle = matches!(enc, Encoder::Oracle);
        self.trajectories[self.train_count..]
            .par_iter()
            .map(|traj| -> Result<RolloutCase> {
                let encode = |k: usize| {
                    let frame = if oracle { None } else { Some(&traj.frames[k]) };
                    enc.encode_sample(&traj.states[k], frame)
                };
                let z0 = encode(0)?;
                let targets = (1..traj.states.len())
                    .map(encode)
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(RolloutCase { z0, actions: traj.actions.clone(), targets })
            })
            .collect()
    }
}
