//! Frame encoders, the linear transition probe, and its training loop.
//!
//! The probe fuses a state embedding with a learned action embedding
//! through one linear map: `ẑ = W·[z; e_a] + b` with `W : d×2d`. Training
//! minimizes MSE (summed over dimensions, averaged over the batch) or
//! cosine distance with plain Adam and a seed-derived shuffle order, so a
//! fixed seed reproduces bit-identical parameters.

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Frame, PoseState, FRAME_SIZE};

/// Output dimension of the default downsample-flatten pixel encoder.
pub const DOWNSAMPLE_D_MODEL: usize = 784;
/// Output dimension of the state-oracle encoder.
pub const ORACLE_D_MODEL: usize = 12;
/// Default output dimension of the random-projection encoder.
pub const RANDOM_PROJECTION_D_MODEL: usize = 128;
/// Number of actions every level exposes.
pub const NUM_ACTIONS: usize = 6;

pub type Embedding = Array1<f64>;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("action index {0} out of range (6 actions)")]
    InvalidAction(usize),
    #[error("pca encoder used before fitting (call Encoder::fit with training frames)")]
    PcaNotFitted,
    #[error("pca requires at least {needed} frames, got {got}")]
    PcaInsufficientSamples { needed: usize, got: usize },
    #[error("the oracle encoder embeds pose states, not pixels")]
    OracleNeedsState,
    #[error("pixel encoder needs a frame")]
    NeedsFrame,
    #[error("degenerate input: near-zero norm in cosine loss")]
    DegenerateNorm,
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EmbedError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Cosine,
}

impl LossKind {
    pub fn label(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "cosine" => Ok(LossKind::Cosine),
            other => Err(format!("unknown loss kind {other:?} (expected mse|cosine)")),
        }
    }
}

/// Encoder configuration. `Pca` must be fitted before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EncoderSpec {
    /// 28×28 average pooling of the frame, flattened (d = 784).
    DownsampleFlatten,
    /// Seeded fixed Gaussian matrix times the flattened pixels.
    RandomProjection { seed: u64, d_model: usize },
    /// Projection onto a PCA basis fitted on training frames.
    Pca { seed: u64, d_model: usize },
    /// Embeds the true pose state through a fixed faithful linear
    /// representation, bypassing pixels. Sanity channel only.
    OracleHomomorphic,
}

impl EncoderSpec {
    pub fn parse(name: &str) -> std::result::Result<EncoderSpec, String> {
        match name {
            "downsample" | "downsample-flatten" => Ok(EncoderSpec::DownsampleFlatten),
            "randproj" | "random-projection" => Ok(EncoderSpec::RandomProjection {
                seed: 42,
                d_model: RANDOM_PROJECTION_D_MODEL,
            }),
            "pca" => Ok(EncoderSpec::Pca { seed: 42, d_model: 64 }),
            "oracle" | "oracle-homomorphic" => Ok(EncoderSpec::OracleHomomorphic),
            other => Err(format!(
                "unknown encoder {other:?} (expected downsample|randproj|pca|oracle)"
            )),
        }
    }

    pub fn d_model(&self) -> usize {
        match self {
            EncoderSpec::DownsampleFlatten => DOWNSAMPLE_D_MODEL,
            EncoderSpec::RandomProjection { d_model, .. } => *d_model,
            EncoderSpec::Pca { d_model, .. } => *d_model,
            EncoderSpec::OracleHomomorphic => ORACLE_D_MODEL,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EncoderSpec::DownsampleFlatten => "downsample",
            EncoderSpec::RandomProjection { .. } => "randproj",
            EncoderSpec::Pca { .. } => "pca",
            EncoderSpec::OracleHomomorphic => "oracle",
        }
    }

    /// True when encoding reads the pose state instead of pixels.
    pub fn is_state_oracle(&self) -> bool {
        matches!(self, EncoderSpec::OracleHomomorphic)
    }
}

/// Fitted PCA basis: row-major components over flattened pixel space.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub mean: Array1<f64>,
    /// d_model × input_dim, orthonormal rows.
    pub components: Array2<f64>,
    /// Variance captured per component, non-increasing.
    pub explained_variance: Vec<f64>,
}

/// A realized (usable) encoder.
pub enum Encoder {
    DownsampleFlatten,
    RandomProjection { matrix: Array2<f64> },
    Pca(PcaBasis),
    Oracle,
}

impl Encoder {
    /// Realize a spec that needs no fitting; `Pca` is rejected here.
    pub fn from_spec(spec: &EncoderSpec) -> Result<Encoder> {
        match spec {
            EncoderSpec::DownsampleFlatten => Ok(Encoder::DownsampleFlatten),
            EncoderSpec::RandomProjection { seed, d_model } => {
                Ok(Encoder::RandomProjection { matrix: gaussian_matrix(*seed, *d_model) })
            }
            EncoderSpec::Pca { .. } => Err(EmbedError::PcaNotFitted),
            EncoderSpec::OracleHomomorphic => Ok(Encoder::Oracle),
        }
    }

    /// Realize a spec, fitting the PCA basis on `frames` when needed.
    pub fn fit(spec: &EncoderSpec, frames: &[&Frame]) -> Result<Encoder> {
        match spec {
            EncoderSpec::Pca { seed, d_model } => {
                Ok(Encoder::Pca(fit_pca(frames, *d_model, *seed)?))
            }
            other => Encoder::from_spec(other),
        }
    }

    pub fn d_model(&self) -> usize {
        match self {
            Encoder::DownsampleFlatten => DOWNSAMPLE_D_MODEL,
            Encoder::RandomProjection { matrix } => matrix.nrows(),
            Encoder::Pca(basis) => basis.components.nrows(),
            Encoder::Oracle => ORACLE_D_MODEL,
        }
    }

    pub fn encode_frame(&self, frame: &Frame) -> Result<Embedding> {
        match self {
            Encoder::DownsampleFlatten => Ok(downsample_flatten(frame)),
            Encoder::RandomProjection { matrix } => {
                let x = frame_to_f64(frame);
                Ok(matrix.dot(&x))
            }
            Encoder::Pca(basis) => {
                let x = frame_to_f64(frame);
                Ok(basis.components.dot(&(&x - &basis.mean)))
            }
            Encoder::Oracle => Err(EmbedError::OracleNeedsState),
        }
    }

    pub fn encode_state(&self, state: &PoseState) -> Result<Embedding> {
        match self {
            Encoder::Oracle => Ok(oracle_embedding(state)),
            _ => Err(EmbedError::NeedsFrame),
        }
    }

    /// Encode one dataset sample through whichever channel this encoder
    /// reads.
    pub fn encode_sample(&self, state: &PoseState, frame: Option<&Frame>) -> Result<Embedding> {
        match self {
            Encoder::Oracle => self.encode_state(state),
            _ => self.encode_frame(frame.ok_or(EmbedError::NeedsFrame)?),
        }
    }
}

fn frame_to_f64(frame: &Frame) -> Array1<f64> {
    Array1::from_iter(frame.pixels().iter().map(|&p| p as f64 / 255.0))
}

/// 8×8 average pooling to 28×28, flattened row-major.
fn downsample_flatten(frame: &Frame) -> Embedding {
    const POOL: usize = FRAME_SIZE / 28;
    let mut out = Array1::zeros(DOWNSAMPLE_D_MODEL);
    for by in 0..28 {
        for bx in 0..28 {
            let mut sum = 0.0;
            for dy in 0..POOL {
                for dx in 0..POOL {
                    sum += frame.get(bx * POOL + dx, by * POOL + dy) as f64 / 255.0;
                }
            }
            out[by * 28 + bx] = sum / (POOL * POOL) as f64;
        }
    }
    out
}

fn gaussian_matrix(seed: u64, d_model: usize) -> Array2<f64> {
    let input = FRAME_SIZE * FRAME_SIZE;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = 1.0 / (input as f64).sqrt();
    Array2::from_shape_fn((d_model, input), |_| {
        let g: f64 = rng.sample(StandardNormal);
        g * scale
    })
}

/// Fixed faithful linear embedding of the pose state (d = 12):
/// the scaled rotation block `scale·R` flattened row-major (9), the
/// translation offset (2D pixels normalized by the frame size, plus the xy
/// camera-space offset — at most one is nonzero per level), and a constant
/// homogeneous 1. Every level generator acts on this vector as a fixed
/// linear map, independent of the visual content.
fn oracle_embedding(state: &PoseState) -> Embedding {
    let mut z = Array1::zeros(ORACLE_D_MODEL);
    for i in 0..3 {
        for j in 0..3 {
            z[i * 3 + j] = state.scale * state.rotation[i][j];
        }
    }
    z[9] = state.translation_2d[0] / FRAME_SIZE as f64 + state.translation_3d[0];
    z[10] = state.translation_2d[1] / FRAME_SIZE as f64 + state.translation_3d[1];
    z[11] = 1.0;
    z
}

/// Mean-centered top-`d_model` principal basis, fitted by power iteration
/// with deflation on the sample Gram matrix. Deterministic given `seed`.
pub fn fit_pca(frames: &[&Frame], d_model: usize, seed: u64) -> Result<PcaBasis> {
    let n = frames.len();
    if n < d_model.max(2) {
        return Err(EmbedError::PcaInsufficientSamples { needed: d_model.max(2), got: n });
    }
    let input = FRAME_SIZE * FRAME_SIZE;
    let mut x = Array2::zeros((n, input));
    for (i, f) in frames.iter().enumerate() {
        x.row_mut(i).assign(&frame_to_f64(f));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let xc = &x - &mean.view().insert_axis(Axis(0));
    let mut gram = xc.dot(&xc.t());

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut dual_vectors: Vec<Array1<f64>> = Vec::with_capacity(d_model);
    let mut eigenvalues = Vec::with_capacity(d_model);
    for _ in 0..d_model {
        let mut v = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        normalize_in_place(&mut v);
        for _ in 0..200 {
            let mut next = gram.dot(&v);
            for prev in &dual_vectors {
                let proj = next.dot(prev);
                next.scaled_add(-proj, prev);
            }
            if normalize_in_place(&mut next) < 1e-300 {
                break;
            }
            v = next;
        }
        let lambda = v.dot(&gram.dot(&v)).max(0.0);
        // Deflate so the next iteration converges to the next eigenpair.
        let outer = outer_product(&v, &v);
        gram.scaled_add(-lambda, &outer);
        dual_vectors.push(v);
        eigenvalues.push(lambda);
    }

    let mut components = Array2::zeros((d_model, input));
    for (k, v) in dual_vectors.iter().enumerate() {
        let mut w = xc.t().dot(v);
        // Re-orthogonalize in pixel space; two passes keep near-degenerate
        // directions orthonormal too.
        for _ in 0..2 {
            for prev in 0..k {
                let proj = w.dot(&components.row(prev));
                let prev_row = components.row(prev).to_owned();
                w.scaled_add(-proj, &prev_row);
            }
        }
        normalize_in_place(&mut w);
        components.row_mut(k).assign(&w);
    }
    let explained_variance = eigenvalues.iter().map(|l| l / (n as f64 - 1.0)).collect();
    Ok(PcaBasis { mean, components, explained_variance })
}

fn normalize_in_place(v: &mut Array1<f64>) -> f64 {
    let n = v.dot(v).sqrt();
    if n > 0.0 {
        v.mapv_inplace(|x| x / n);
    }
    n
}

fn outer_product(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    Array2::from_shape_fn((n, m), |(i, j)| a[i] * b[j])
}

/// Linear transition probe parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    /// d × 2d fused map over `[z; e_a]`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// 6 × d learned action embeddings.
    pub action_table: Array2<f64>,
}

impl ProbeParams {
    pub fn d_model(&self) -> usize {
        self.w.nrows()
    }

    /// Training initialization: `W = [I | 0]` plus 1e-3 seeded noise,
    /// zero bias, action embeddings from a standard normal scaled by
    /// 1/√d_model.
    pub fn init(d_model: usize, seed: u64) -> ProbeParams {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut w = Array2::zeros((d_model, 2 * d_model));
        for i in 0..d_model {
            w[(i, i)] = 1.0;
        }
        for i in 0..d_model {
            for j in 0..2 * d_model {
                let g: f64 = rng.sample(StandardNormal);
                w[(i, j)] += 1e-3 * g;
            }
        }
        let b = Array1::zeros(d_model);
        let scale = 1.0 / (d_model as f64).sqrt();
        let action_table = Array2::from_shape_fn((NUM_ACTIONS, d_model), |_| {
            let g: f64 = rng.sample(StandardNormal);
            g * scale
        });
        ProbeParams { w, b, action_table }
    }

    /// The identity configuration: `W = [I | 0]`, zero bias and action
    /// embeddings. `probe_forward` returns its input unchanged.
    pub fn identity(d_model: usize) -> ProbeParams {
        let mut w = Array2::zeros((d_model, 2 * d_model));
        for i in 0..d_model {
            w[(i, i)] = 1.0;
        }
        ProbeParams {
            w,
            b: Array1::zeros(d_model),
            action_table: Array2::zeros((NUM_ACTIONS, d_model)),
        }
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = ProbeFile::from(self);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut out, &file)?;
        use std::io::Write;
        out.flush()?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<ProbeParams> {
        let data = std::fs::read(path)?;
        let file: ProbeFile = serde_json::from_slice(&data)?;
        file.into_params()
    }
}

/// On-disk probe format: shape headers plus row-major decimal arrays.
#[derive(Serialize, Deserialize)]
struct ProbeFile {
    d_model: usize,
    w: MatrixJson,
    b: Vec<f64>,
    action_table: MatrixJson,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixJson {
    fn from_array(a: &Array2<f64>) -> MatrixJson {
        MatrixJson {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn into_array(self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| EmbedError::Shape(e.to_string()))
    }
}

impl From<&ProbeParams> for ProbeFile {
    fn from(p: &ProbeParams) -> Self {
        ProbeFile {
            d_model: p.d_model(),
            w: MatrixJson::from_array(&p.w),
            b: p.b.to_vec(),
            action_table: MatrixJson::from_array(&p.action_table),
        }
    }
}

impl ProbeFile {
    fn into_params(self) -> Result<ProbeParams> {
        let p = ProbeParams {
            w: self.w.into_array()?,
            b: Array1::from_vec(self.b),
            action_table: self.action_table.into_array()?,
        };
        validate_probe_shapes(&p)?;
        Ok(p)
    }
}

fn validate_probe_shapes(p: &ProbeParams) -> Result<()> {
    let d = p.w.nrows();
    if p.w.ncols() != 2 * d || p.b.len() != d || p.action_table.shape() != [NUM_ACTIONS, d] {
        return Err(EmbedError::Shape(format!(
            "probe shapes inconsistent: w {:?}, b {}, action_table {:?}",
            p.w.shape(),
            p.b.len(),
            p.action_table.shape()
        )));
    }
    Ok(())
}

/// One probe step: `W·[z; e_action] + b`.
pub fn probe_forward(p: &ProbeParams, z: &Embedding, action: usize) -> Result<Embedding> {
    let d = p.d_model();
    if z.len() != d {
        return Err(EmbedError::Shape(format!(
            "embedding length {} does not match probe d_model {d}",
            z.len()
        )));
    }
    if action >= NUM_ACTIONS {
        return Err(EmbedError::InvalidAction(action));
    }
    let mut x = Array1::zeros(2 * d);
    x.slice_mut(s![..d]).assign(z);
    x.slice_mut(s![d..]).assign(&p.action_table.row(action));
    Ok(p.w.dot(&x) + &p.b)
}

/// Loss between a prediction and a target.
///
/// MSE is the squared Euclidean norm summed over dimensions; cosine is
/// `1 − cos(ẑ, z)` and rejects near-zero norms.
pub fn loss(kind: LossKind, predicted: &Embedding, target: &Embedding) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(EmbedError::Shape(format!(
            "loss over mismatched lengths {} vs {}",
            predicted.len(),
            target.len()
        )));
    }
    match kind {
        LossKind::Mse => {
            let diff = predicted - target;
            Ok(diff.dot(&diff))
        }
        LossKind::Cosine => {
            let np = predicted.dot(predicted).sqrt();
            let nt = target.dot(target).sqrt();
            if np < 1e-12 || nt < 1e-12 {
                return Err(EmbedError::DegenerateNorm);
            }
            Ok(1.0 - predicted.dot(target) / (np * nt))
        }
    }
}

/// Loss value plus its gradient with respect to the prediction.
pub fn loss_grad(
    kind: LossKind,
    predicted: &Embedding,
    target: &Embedding,
) -> Result<(f64, Array1<f64>)> {
    let value = loss(kind, predicted, target)?;
    let grad = match kind {
        LossKind::Mse => (predicted - target) * 2.0,
        LossKind::Cosine => {
            let np = predicted.dot(predicted).sqrt();
            let nt = target.dot(target).sqrt();
            let cos = predicted.dot(target) / (np * nt);
            // d/dẑ (1 − cos) = −t/(‖ẑ‖‖t‖) + cos·ẑ/‖ẑ‖²
            target * (-1.0 / (np * nt)) + predicted * (cos / (np * np))
        }
    };
    Ok((value, grad))
}

/// One atomic training tuple in embedding space.
#[derive(Debug, Clone)]
pub struct TransitionSample {
    pub z_from: Embedding,
    pub action: usize,
    pub z_to: Embedding,
}

/// Adam and loop hyperparameters. Defaults: lr 1e-4, batch 1024,
/// 50 epochs, seed 42, MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 1024,
            epochs: 50,
            seed: 42,
            loss_kind: LossKind::Mse,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
}

struct AdamState {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
    m_e: Array2<f64>,
    v_e: Array2<f64>,
    step: usize,
}

impl AdamState {
    fn new(d: usize) -> AdamState {
        AdamState {
            m_w: Array2::zeros((d, 2 * d)),
            v_w: Array2::zeros((d, 2 * d)),
            m_b: Array1::zeros(d),
            v_b: Array1::zeros(d),
            m_e: Array2::zeros((NUM_ACTIONS, d)),
            v_e: Array2::zeros((NUM_ACTIONS, d)),
            step: 0,
        }
    }
}

/// Gradients are reduced over a fixed number of batch chunks so results are
/// bit-identical for any worker count.
const GRAD_CHUNKS: usize = 8;

struct BatchGrads {
    loss_sum: f64,
    valid: usize,
    g_w: Array2<f64>,
    g_b: Array1<f64>,
    g_e: Array2<f64>,
}

/// Train the probe on atomic transitions. Returns the final parameters and
/// the per-epoch mean loss curve.
pub fn train_probe(
    samples: &[TransitionSample],
    cfg: &TrainConfig,
) -> Result<(ProbeParams, Vec<EpochLoss>)> {
    if samples.is_empty() {
        return Err(EmbedError::EmptyDataset);
    }
    let d = samples[0].z_from.len();
    for s in samples {
        if s.z_from.len() != d || s.z_to.len() != d {
            return Err(EmbedError::Shape("inconsistent embedding lengths".into()));
        }
        if s.action >= NUM_ACTIONS {
            return Err(EmbedError::InvalidAction(s.action));
        }
    }
    let mut params = ProbeParams::init(d, cfg.seed);
    let mut adam = AdamState::new(d);
    // Shuffle order is derived from the seed on a separate stream.
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        fisher_yates(&mut order, &mut shuffle_rng);
        let mut loss_total = 0.0;
        let mut valid_total = 0usize;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let grads = batch_gradients(samples, batch, &params, cfg.loss_kind);
            if !grads.loss_sum.is_finite() {
                return Err(EmbedError::Diverged { epoch });
            }
            if grads.valid == 0 {
                // Every sample in the batch was cosine-degenerate.
                return Err(EmbedError::DegenerateNorm);
            }
            loss_total += grads.loss_sum;
            valid_total += grads.valid;
            let inv = 1.0 / grads.valid as f64;
            adam_update(&mut params, &mut adam, cfg, &grads, inv);
        }
        let epoch_loss = loss_total / valid_total as f64;
        if !epoch_loss.is_finite() {
            return Err(EmbedError::Diverged { epoch });
        }
        curve.push(EpochLoss { epoch, loss: epoch_loss });
    }
    Ok((params, curve))
}

fn fisher_yates(order: &mut [usize], rng: &mut ChaCha20Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

fn batch_gradients(
    samples: &[TransitionSample],
    batch: &[usize],
    params: &ProbeParams,
    kind: LossKind,
) -> BatchGrads {
    let d = params.d_model();
    let chunk_size = batch.len().div_ceil(GRAD_CHUNKS).max(1);
    let partials: Vec<BatchGrads> = batch
        .par_chunks(chunk_size)
        .map(|chunk| chunk_gradients(samples, chunk, params, kind))
        .collect();
    // Sequential fold in chunk order keeps float sums deterministic.
    let mut total = BatchGrads {
        loss_sum: 0.0,
        valid: 0,
        g_w: Array2::zeros((d, 2 * d)),
        g_b: Array1::zeros(d),
        g_e: Array2::zeros((NUM_ACTIONS, d)),
    };
    for p in partials {
        total.loss_sum += p.loss_sum;
        total.valid += p.valid;
        total.g_w += &p.g_w;
        total.g_b += &p.g_b;
        total.g_e += &p.g_e;
    }
    total
}

fn chunk_gradients(
    samples: &[TransitionSample],
    chunk: &[usize],
    params: &ProbeParams,
    kind: LossKind,
) -> BatchGrads {
    let d = params.d_model();
    let b = chunk.len();
    let mut x = Array2::zeros((b, 2 * d));
    let mut t = Array2::zeros((b, d));
    for (row, &idx) in chunk.iter().enumerate() {
        let s = &samples[idx];
        x.slice_mut(s![row, ..d]).assign(&s.z_from);
        x.slice_mut(s![row, d..]).assign(&params.action_table.row(s.action));
        t.row_mut(row).assign(&s.z_to);
    }
    let pred = x.dot(&params.w.t()) + &params.b.view().insert_axis(Axis(0));

    let mut loss_sum = 0.0;
    let mut valid = 0usize;
    let mut grad_pred = Array2::zeros((b, d));
    for row in 0..b {
        let p = pred.row(row).to_owned();
        let tr = t.row(row).to_owned();
        match loss_grad(kind, &p, &tr) {
            Ok((value, grad)) => {
                loss_sum += value;
                valid += 1;
                grad_pred.row_mut(row).assign(&grad);
            }
            Err(EmbedError::DegenerateNorm) => {
                // Dropped: a clipped-out object renders black and embeds to
                // zero, leaving the cosine loss undefined. Its gradient row
                // stays zero.
            }
            Err(_) => unreachable!("shapes validated"),
        }
    }

    let g_w = grad_pred.t().dot(&x);
    let g_b = grad_pred.sum_axis(Axis(0));
    // Gradient through the action rows of x: dL/de = dL/dpred · W_right.
    let w_right = params.w.slice(s![.., d..]);
    let g_x_right = grad_pred.dot(&w_right);
    let mut g_e = Array2::zeros((NUM_ACTIONS, d));
    for (row, &idx) in chunk.iter().enumerate() {
        let action = samples[idx].action;
        let mut dst = g_e.row_mut(action);
        dst += &g_x_right.row(row);
    }
    BatchGrads { loss_sum, valid, g_w, g_b, g_e }
}

fn adam_update(
    params: &mut ProbeParams,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    grads: &BatchGrads,
    batch_inv: f64,
) {
    adam.step += 1;
    let t = adam.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.learning_rate;

    fn update_tensor<D: ndarray::Dimension>(
        param: &mut ndarray::Array<f64, D>,
        m: &mut ndarray::Array<f64, D>,
        v: &mut ndarray::Array<f64, D>,
        grad: &ndarray::Array<f64, D>,
        scale: f64,
        cfg: &TrainConfig,
        bc1: f64,
        bc2: f64,
        lr: f64,
    ) {
        ndarray::Zip::from(param)
            .and(m)
            .and(v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                let g = g * scale;
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            });
    }

    update_tensor(&mut params.w, &mut adam.m_w, &mut adam.v_w, &grads.g_w, batch_inv, cfg, bc1, bc2, lr);
    update_tensor(&mut params.b, &mut adam.m_b, &mut adam.v_b, &grads.g_b, batch_inv, cfg, bc1, bc2, lr);
    update_tensor(
        &mut params.action_table,
        &mut adam.m_e,
        &mut adam.v_e,
        &grads.g_e,
        batch_inv,
        cfg,
        bc1,
        bc2,
        lr,
    );
}

/// Write a loss curve as `epoch,loss` CSV.
pub fn write_loss_curve_csv<W: std::io::Write>(curve: &[EpochLoss], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,loss")?;
    for e in curve {
        writeln!(w, "{},{}", e.epoch, e.loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{apply, generate_mesh, level_generators, render, Level, PoseState};

    #[test]
    fn zero_frame_projects_to_zero() {
        let spec = EncoderSpec::RandomProjection { seed: 1, d_model: 16 };
        let enc = Encoder::from_spec(&spec).unwrap();
        let z = enc.encode_frame(&Frame::zero()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoding_is_deterministic() {
        let mesh = generate_mesh(0);
        let frame = render(&PoseState::initial(Level::L1), &mesh);
        for spec in [
            EncoderSpec::DownsampleFlatten,
            EncoderSpec::RandomProjection { seed: 3, d_model: 8 },
        ] {
            let e1 = Encoder::from_spec(&spec).unwrap();
            let e2 = Encoder::from_spec(&spec).unwrap();
            assert_eq!(
                e1.encode_frame(&frame).unwrap(),
                e2.encode_frame(&frame).unwrap()
            );
        }
    }

    #[test]
    fn oracle_difference_is_state_independent_on_l1() {
        let enc = Encoder::from_spec(&EncoderSpec::OracleHomomorphic).unwrap();
        let gens = level_generators(Level::L1);
        let right = &gens[0];
        let mut deltas = Vec::new();
        for walk in 0..5 {
            let mut s = PoseState::initial(Level::L1);
            for k in 0..walk {
                s = apply(&s, &gens[k % 6]).unwrap();
            }
            let z = enc.encode_state(&s).unwrap();
            let z2 = enc.encode_state(&apply(&s, right).unwrap()).unwrap();
            deltas.push(&z2 - &z);
        }
        for d in &deltas[1..] {
            let diff = d - &deltas[0];
            assert!(diff.dot(&diff).sqrt() < 1e-12);
        }
    }

    #[test]
    fn pca_rank_one_reconstruction() {
        // Frames exactly proportional to a single pattern (240 divides by
        // 1..4 without remainder): one component captures everything.
        let base: Vec<u8> = (0..FRAME_SIZE * FRAME_SIZE)
            .map(|i| if (i / 97) % 3 == 0 { 240 } else { 0 })
            .collect();
        let mut frames = Vec::new();
        for k in 1..=4u8 {
            let scaled: Vec<u8> = base.iter().map(|&p| p / k).collect();
            frames.push(Frame::from_pixels(scaled).unwrap());
        }
        let refs: Vec<&Frame> = frames.iter().collect();
        let basis = fit_pca(&refs, 1, 7).unwrap();
        // Residual after projecting a centered sample onto the basis.
        let x = Array1::from_iter(frames[0].pixels().iter().map(|&p| p as f64 / 255.0));
        let centered = &x - &basis.mean;
        let coeff = basis.components.dot(&centered);
        let recon = basis.components.t().dot(&coeff);
        let resid = &centered - &recon;
        let rel = resid.dot(&resid).sqrt() / centered.dot(&centered).sqrt().max(1e-12);
        assert!(rel < 1e-6, "rank-1 data should reconstruct, rel={rel}");
    }

    #[test]
    fn pca_basis_is_orthonormal_and_variance_sorted() {
        let mesh = generate_mesh(1);
        let gens = level_generators(Level::L1);
        let mut frames = Vec::new();
        let mut s = PoseState::initial(Level::L1);
        for k in 0..12 {
            frames.push(render(&s, &mesh));
            s = apply(&s, &gens[k % 6]).unwrap();
        }
        let refs: Vec<&Frame> = frames.iter().collect();
        let basis = fit_pca(&refs, 5, 11).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let d = basis.components.row(i).dot(&basis.components.row(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-6, "gram[{i}][{j}] = {d}");
            }
        }
        for w in basis.explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-9, "variance must be non-increasing: {w:?}");
        }
    }

    #[test]
    fn pca_needs_enough_samples() {
        let frames = [Frame::zero()];
        let refs: Vec<&Frame> = frames.iter().collect();
        assert!(matches!(
            fit_pca(&refs, 4, 0),
            Err(EmbedError::PcaInsufficientSamples { .. })
        ));
    }

    #[test]
    fn unfitted_pca_is_an_error() {
        assert!(matches!(
            Encoder::from_spec(&EncoderSpec::Pca { seed: 0, d_model: 4 }),
            Err(EmbedError::PcaNotFitted)
        ));
    }

    #[test]
    fn identity_probe_returns_input() {
        let p = ProbeParams::identity(6);
        let z = Array1::from_vec(vec![0.3, -1.0, 2.5, 0.0, 4.0, -0.25]);
        let out = probe_forward(&p, &z, 2).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn zero_state_uses_action_pathway() {
        let d = 4;
        let mut p = ProbeParams::identity(d);
        p.action_table = Array2::from_shape_fn((NUM_ACTIONS, d), |(a, j)| (a + j) as f64);
        p.w.slice_mut(s![.., d..]).assign(&Array2::from_shape_fn((d, d), |(i, j)| {
            if i == j { 2.0 } else { 0.0 }
        }));
        let z = Array1::zeros(d);
        let out = probe_forward(&p, &z, 1).unwrap();
        let expected = p.action_table.row(1).to_owned() * 2.0;
        assert_eq!(out, expected);
    }

    #[test]
    fn probe_affine_identity() {
        let p = ProbeParams::init(5, 9);
        let z1 = Array1::from_vec(vec![0.1, 0.2, -0.3, 1.0, 0.5]);
        let z2 = Array1::from_vec(vec![-1.0, 0.7, 0.0, 2.0, -0.5]);
        let zero = Array1::zeros(5);
        let lhs = &probe_forward(&p, &(&z1 + &z2), 3).unwrap()
            + &probe_forward(&p, &zero, 3).unwrap();
        let rhs = &probe_forward(&p, &z1, 3).unwrap() + &probe_forward(&p, &z2, 3).unwrap();
        let diff = &lhs - &rhs;
        assert!(diff.dot(&diff).sqrt() < 1e-9);
    }

    #[test]
    fn loss_examples() {
        let a = Array1::from_vec(vec![1.0, 0.0]);
        let b = Array1::from_vec(vec![0.0, 1.0]);
        assert_eq!(loss(LossKind::Mse, &a, &a).unwrap(), 0.0);
        assert_eq!(loss(LossKind::Cosine, &a, &a).unwrap(), 0.0);
        assert_eq!(loss(LossKind::Mse, &a, &b).unwrap(), 2.0);
        assert_eq!(loss(LossKind::Cosine, &a, &b).unwrap(), 1.0);
        let neg = -a.clone();
        assert_eq!(loss(LossKind::Cosine, &a, &neg).unwrap(), 2.0);
        assert!(matches!(
            loss(LossKind::Cosine, &Array1::zeros(2), &b),
            Err(EmbedError::DegenerateNorm)
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Central finite differences over every parameter of a small probe.
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for case in 0..20 {
            let d = 3;
            let kind = if case % 2 == 0 { LossKind::Mse } else { LossKind::Cosine };
            let params = ProbeParams {
                w: Array2::from_shape_fn((d, 2 * d), |_| rng.gen::<f64>() - 0.5),
                b: Array1::from_shape_fn(d, |_| rng.gen::<f64>() - 0.5),
                action_table: Array2::from_shape_fn((NUM_ACTIONS, d), |_| rng.gen::<f64>() - 0.5),
            };
            let z = Array1::from_shape_fn(d, |_| rng.gen::<f64>() + 0.5);
            let t = Array1::from_shape_fn(d, |_| rng.gen::<f64>() + 0.5);
            let action = rng.gen_range(0..NUM_ACTIONS);
            let sample = TransitionSample { z_from: z, action, z_to: t };
            let grads = chunk_gradients(std::slice::from_ref(&sample), &[0], &params, kind);
            let eps = 1e-6;
            let f = |p: &ProbeParams| {
                let out = probe_forward(p, &sample.z_from, action).unwrap();
                loss(kind, &out, &sample.z_to).unwrap()
            };
            for i in 0..d {
                for j in 0..2 * d {
                    let mut plus = params.clone();
                    plus.w[(i, j)] += eps;
                    let mut minus = params.clone();
                    minus.w[(i, j)] -= eps;
                    let fd = (f(&plus) - f(&minus)) / (2.0 * eps);
                    let an = grads.g_w[(i, j)];
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                    assert!(rel < 1e-4, "dW[{i}][{j}] rel={rel}");
                }
            }
        }
    }

    fn linear_task(n: usize, d: usize, seed: u64) -> Vec<TransitionSample> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z = Array1::from_shape_fn(d, |_| rng.gen::<f64>() - 0.5);
                let action = rng.gen_range(0..NUM_ACTIONS);
                let shift = Array1::from_shape_fn(d, |j| (action as f64 + 1.0) * 0.05 * (j as f64 + 1.0));
                TransitionSample { z_from: z.clone(), action, z_to: z + shift }
            })
            .collect()
    }

    #[test]
    fn identity_task_trains_to_tiny_loss() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let samples: Vec<TransitionSample> = (0..256)
            .map(|_| {
                let z = Array1::from_shape_fn(6, |_| rng.gen::<f64>() - 0.5);
                TransitionSample { z_from: z.clone(), action: rng.gen_range(0..6), z_to: z }
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 400,
            batch_size: 64,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let (_, curve) = train_probe(&samples, &cfg).unwrap();
        let last = curve.last().unwrap().loss;
        assert!(last < 1e-6, "identity task should fit, final={last}");
    }

    #[test]
    fn training_is_bit_deterministic() {
        let samples = linear_task(300, 5, 3);
        let cfg = TrainConfig { epochs: 5, batch_size: 64, ..TrainConfig::default() };
        let (p1, c1) = train_probe(&samples, &cfg).unwrap();
        let (p2, c2) = train_probe(&samples, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(
            c1.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>(),
            c2.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn convex_mse_loss_is_non_increasing() {
        let samples = linear_task(512, 4, 9);
        let cfg = TrainConfig {
            epochs: 60,
            batch_size: 512,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let (_, curve) = train_probe(&samples, &cfg).unwrap();
        for w in curve.windows(2) {
            assert!(
                w[1].loss <= w[0].loss * 1.01,
                "epoch {} rose: {} -> {}",
                w[1].epoch,
                w[0].loss,
                w[1].loss
            );
        }
    }

    #[test]
    fn probe_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProbeParams::init(4, 77);
        let path = dir.path().join("probe.json");
        p.save_json(&path).unwrap();
        let q = ProbeParams::load_json(&path).unwrap();
        assert_eq!(p, q);
    }
}
