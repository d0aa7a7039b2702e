//! Recursive rollout evaluation: identity-baseline normalization, collapse
//! detection, growth-rate statistics, and the error-compounding simulator.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{loss, probe_forward, EmbedError, Embedding, LossKind, ProbeParams};
use crate::groups::MatrixElement;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rollout diverged at step {step}: non-finite embedding")]
    Divergence { step: usize },
    #[error("reports were produced under different settings: {0}")]
    ConfigMismatch(String),
    #[error("epsilon {0} out of range [0, 0.5)")]
    InvalidEpsilon(f64),
    #[error("step count {0} out of range [1, 100]")]
    InvalidSteps(usize),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Strict recursion `ẑ_t = T(ẑ_{t-1}, s_t)` from `z0`; the rollout sees no
/// ground truth beyond the initial embedding.
pub fn recursive_rollout(
    params: &ProbeParams,
    z0: &Embedding,
    actions: &[usize],
) -> Result<Vec<Embedding>> {
    let mut out = Vec::with_capacity(actions.len());
    let mut current = z0.clone();
    for (t, &action) in actions.iter().enumerate() {
        current = probe_forward(params, &current, action)?;
        if !current.iter().all(|v| v.is_finite()) {
            return Err(EvalError::Divergence { step: t + 1 });
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// One test trajectory in embedding space: the initial embedding, the full
/// action sequence, and the ground-truth embedding after each prefix.
#[derive(Debug, Clone)]
pub struct RolloutCase {
    pub z0: Embedding,
    pub actions: Vec<usize>,
    /// `targets[k]` is the encoder output after `k + 1` actions.
    pub targets: Vec<Embedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub level: u8,
    pub encoder: String,
    pub loss_kind: LossKind,
    pub global_seed: u64,
    pub train_seed: u64,
}

/// Per-N aggregate: mean recursive loss, the identity-baseline loss of
/// predicting `z0`, and their ratio. Buckets whose baseline is numerically
/// zero (a walk returned to its start) are excluded from ratio and
/// collapse computations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepStats {
    pub n: usize,
    pub count: usize,
    pub mean_loss: f64,
    pub baseline_loss: f64,
    pub ratio: Option<f64>,
    pub excluded_zero_baseline: bool,
    /// Samples dropped at this N because the cosine loss was undefined.
    pub skipped_degenerate: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: EvalMetadata,
    pub per_step: Vec<StepStats>,
    /// Requested steps with no samples, reported as missing rather than zero.
    pub missing_steps: Vec<usize>,
    /// First N whose ratio reaches 1.0, if any.
    pub collapse_step: Option<usize>,
    /// Least-squares slope of mean loss against N.
    pub growth_rate: f64,
}

impl EvalReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,n,mean_loss,baseline,ratio")?;
        for s in &self.per_step {
            let ratio = s.ratio.map_or(String::new(), |r| r.to_string());
            writeln!(
                w,
                "{},{},{},{},{}",
                self.metadata.level, s.n, s.mean_loss, s.baseline_loss, ratio
            )?;
        }
        Ok(())
    }

    pub fn step(&self, n: usize) -> Option<&StepStats> {
        self.per_step.iter().find(|s| s.n == n)
    }
}

const ZERO_BASELINE_GUARD: f64 = 1e-12;

/// Evaluate rollout cases bucketed by sequence length N; `max_n` bounds the
/// reported range (missing buckets are listed, not zero-filled).
pub fn evaluate_split(
    cases: &[RolloutCase],
    params: &ProbeParams,
    loss_kind: LossKind,
    metadata: EvalMetadata,
    max_n: usize,
) -> Result<EvalReport> {
    #[derive(Default, Clone)]
    struct Bucket {
        count: usize,
        loss_sum: f64,
        baseline_sum: f64,
        degenerate: usize,
    }
    let mut buckets = vec![Bucket::default(); max_n + 1];
    for case in cases {
        debug_assert_eq!(case.actions.len(), case.targets.len());
        let rollout = recursive_rollout(params, &case.z0, &case.actions)?;
        for (k, target) in case.targets.iter().enumerate() {
            let n = k + 1;
            if n > max_n {
                break;
            }
            let predicted = &rollout[k];
            match (loss(loss_kind, predicted, target), loss(loss_kind, &case.z0, target)) {
                (Ok(l), Ok(bl)) => {
                    buckets[n].count += 1;
                    buckets[n].loss_sum += l;
                    buckets[n].baseline_sum += bl;
                }
                (Err(EmbedError::DegenerateNorm), _) | (_, Err(EmbedError::DegenerateNorm)) => {
                    buckets[n].degenerate += 1;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
    }

    let mut per_step = Vec::new();
    let mut missing_steps = Vec::new();
    for n in 1..=max_n {
        let b = &buckets[n];
        if b.count == 0 {
            missing_steps.push(n);
            continue;
        }
        let mean_loss = b.loss_sum / b.count as f64;
        let baseline_loss = b.baseline_sum / b.count as f64;
        let excluded = baseline_loss < ZERO_BASELINE_GUARD;
        per_step.push(StepStats {
            n,
            count: b.count,
            mean_loss,
            baseline_loss,
            ratio: (!excluded).then(|| mean_loss / baseline_loss),
            excluded_zero_baseline: excluded,
            skipped_degenerate: b.degenerate,
        });
    }
    let collapse_step = detect_collapse(&per_step);
    let growth_rate = least_squares_slope(
        per_step.iter().map(|s| (s.n as f64, s.mean_loss)),
    );
    Ok(EvalReport { metadata, per_step, missing_steps, collapse_step, growth_rate })
}

/// First N with ratio ≥ 1.0 among non-excluded buckets.
pub fn detect_collapse(per_step: &[StepStats]) -> Option<usize> {
    per_step
        .iter()
        .find(|s| s.ratio.is_some_and(|r| r >= 1.0))
        .map(|s| s.n)
}

fn least_squares_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points.collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Noise model for the compounding simulator. The default multiplicative
/// model perturbs each entry by `1 + ε·u` with the noise vector renormalized
/// so the per-step relative error is exactly ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    MultiplicativeRandom,
    /// Every entry multiplies by exactly (1 + ε); the scalar closed form.
    MultiplicativeSystematic,
    Additive,
}

/// Simulate recursive application of exact group matrices with a per-step
/// relative perturbation of magnitude ε; returns the mean relative
/// divergence `‖ẑ_t − z_t‖ / ‖z_t‖` per step over `trials` runs.
pub fn compounding_sim(
    epsilon: f64,
    steps: usize,
    generators: &[MatrixElement],
    trials: usize,
    rng_seed: u64,
    model: NoiseModel,
) -> Result<Vec<f64>> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(EvalError::InvalidEpsilon(epsilon));
    }
    if steps == 0 || steps > 100 {
        return Err(EvalError::InvalidSteps(steps));
    }
    assert!(!generators.is_empty(), "need at least one generator");
    let d = generators[0].dim();
    let z0 = Array1::from_elem(d, 1.0 / (d as f64).sqrt());

    let mut totals = vec![0.0f64; steps];
    for trial in 0..trials {
        let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
        rng.set_stream(trial as u64);
        let mut exact = z0.clone();
        let mut noisy = z0.clone();
        for t in 0..steps {
            let g = &generators[rng.gen_range(0..generators.len())];
            exact = Array1::from_vec(g.apply(exact.as_slice().unwrap()).expect("dims match"));
            noisy = Array1::from_vec(g.apply(noisy.as_slice().unwrap()).expect("dims match"));
            perturb(&mut noisy, epsilon, model, &mut rng);
            let diff = &noisy - &exact;
            let denom = exact.dot(&exact).sqrt().max(1e-300);
            totals[t] += diff.dot(&diff).sqrt() / denom;
        }
    }
    Ok(totals.into_iter().map(|s| s / trials as f64).collect())
}

fn perturb(z: &mut Array1<f64>, epsilon: f64, model: NoiseModel, rng: &mut ChaCha20Rng) {
    if epsilon == 0.0 {
        return;
    }
    match model {
        NoiseModel::MultiplicativeSystematic => {
            z.mapv_inplace(|v| v * (1.0 + epsilon));
        }
        NoiseModel::MultiplicativeRandom => {
            let u = Array1::from_shape_fn(z.len(), |_| rng.gen::<f64>() * 2.0 - 1.0);
            let weighted = &*z * &u;
            let wn = weighted.dot(&weighted).sqrt();
            if wn == 0.0 {
                return;
            }
            let zn = z.dot(z).sqrt();
            let scale = epsilon * zn / wn;
            for (zi, ui) in z.iter_mut().zip(u.iter()) {
                *zi *= 1.0 + scale * ui;
            }
        }
        NoiseModel::Additive => {
            let mut u = Array1::from_shape_fn(z.len(), |_| rng.gen::<f64>() * 2.0 - 1.0);
            let un = u.dot(&u).sqrt();
            if un == 0.0 {
                return;
            }
            let zn = z.dot(z).sqrt();
            u.mapv_inplace(|v| v / un * epsilon * zn);
            *z += &u;
        }
    }
}

/// Reference ratios reported for large pretrained backbones, recorded for
/// context only; they are not reproducible with the built-in lightweight
/// encoders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackboneReferenceContext {
    pub l3_over_l1_error_range: [f64; 2],
    pub dinov2_mse_l3_over_l1: f64,
    pub dinov2_cosine_collapse_l3: usize,
    pub dinov2_cosine_collapse_l1: usize,
    pub reproducible_at_this_scale: bool,
}

impl Default for BackboneReferenceContext {
    fn default() -> Self {
        BackboneReferenceContext {
            l3_over_l1_error_range: [3.0, 3.8],
            dinov2_mse_l3_over_l1: 3.56,
            dinov2_cosine_collapse_l3: 9,
            dinov2_cosine_collapse_l1: 15,
            reproducible_at_this_scale: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseRatio {
    pub numerator_level: u8,
    pub denominator_level: u8,
    pub n: usize,
    pub ratio: Option<f64>,
}

/// Cross-level summary: loss-curve areas, their ordering, pairwise loss
/// ratios at N = 10 and N = 20, and collapse steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub encoder: String,
    pub loss_kind: LossKind,
    pub global_seed: u64,
    pub levels: Vec<u8>,
    /// (level, sum of mean loss over N).
    pub auc: Vec<(u8, f64)>,
    /// Levels sorted by descending loss-curve area.
    pub ordering: Vec<u8>,
    pub pairwise_ratios: Vec<PairwiseRatio>,
    pub collapse_steps: Vec<(u8, Option<usize>)>,
    pub backbone_reference: BackboneReferenceContext,
}

/// Combine per-level reports produced under identical settings.
pub fn compare_levels(reports: &[&EvalReport]) -> Result<HierarchySummary> {
    let first = reports
        .first()
        .ok_or_else(|| EvalError::ConfigMismatch("no reports given".into()))?;
    for r in &reports[1..] {
        let a = &first.metadata;
        let b = &r.metadata;
        if a.encoder != b.encoder
            || a.loss_kind != b.loss_kind
            || a.global_seed != b.global_seed
            || a.train_seed != b.train_seed
        {
            return Err(EvalError::ConfigMismatch(format!(
                "level {} vs level {}: encoder/loss/seed settings differ",
                a.level, b.level
            )));
        }
    }
    let levels: Vec<u8> = reports.iter().map(|r| r.metadata.level).collect();
    let auc: Vec<(u8, f64)> = reports
        .iter()
        .map(|r| {
            (
                r.metadata.level,
                r.per_step.iter().map(|s| s.mean_loss).sum::<f64>(),
            )
        })
        .collect();
    let mut ordering: Vec<u8> = levels.clone();
    ordering.sort_by(|a, b| {
        let fa = auc.iter().find(|(l, _)| l == a).unwrap().1;
        let fb = auc.iter().find(|(l, _)| l == b).unwrap().1;
        fb.partial_cmp(&fa).unwrap()
    });
    let mut pairwise_ratios = Vec::new();
    for n in [10usize, 20] {
        for (i, ra) in reports.iter().enumerate() {
            for rb in reports.iter().skip(i + 1) {
                let (num, den) = if ra.metadata.level >= rb.metadata.level {
                    (ra, rb)
                } else {
                    (rb, ra)
                };
                let ratio = match (num.step(n), den.step(n)) {
                    (Some(a), Some(b)) if b.mean_loss > 0.0 => Some(a.mean_loss / b.mean_loss),
                    _ => None,
                };
                pairwise_ratios.push(PairwiseRatio {
                    numerator_level: num.metadata.level,
                    denominator_level: den.metadata.level,
                    n,
                    ratio,
                });
            }
        }
    }
    let collapse_steps = reports
        .iter()
        .map(|r| (r.metadata.level, r.collapse_step))
        .collect();
    Ok(HierarchySummary {
        encoder: first.metadata.encoder.clone(),
        loss_kind: first.metadata.loss_kind,
        global_seed: first.metadata.global_seed,
        levels,
        auc,
        ordering,
        pairwise_ratios,
        collapse_steps,
        backbone_reference: BackboneReferenceContext::default(),
    })
}
