//! Joint refinement of screw axes and per-frame motion quantities.
//!
//! Each candidate part carries an axis (raw direction, position) and two
//! per-frame increment sequences: `delta_alpha` (slide along the axis) and
//! `delta_phi` (rotation about it). The state of frame `A` relative to frame
//! 1 is the screw motion with the prefix sums of both sequences. Each
//! iteration samples a frame pair `(A, B)` and descends the loss between the
//! observed frame-`A` points carried to `B` and the observed frame-`B`
//! points. At `iter_judge` every part is typed from its accumulated motion,
//! and parts without motion are pruned.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    centroid, enclosing_radius, register, screw_decompose, screw_to_transform, NearestIndex,
    PointCloud, Rotation, RigidTransform, ScrewAxis, ScrewMotion, UnitVec3, Vec3,
};
use crate::init::{select_max_motion_pair, MotionInit, DEFAULT_THETA_MIN};
use crate::ingest::{MotionType, SceneSequence};

/// Raw directions shorter than this cannot be normalized.
const MIN_DIRECTION_NORM: f64 = 1e-8;

/// Residuals at or below this length take the zero subgradient of `‖e‖`;
/// exact fits otherwise leave rounding-level residuals with unit gradients.
const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub direction: f64,
    pub position: f64,
    pub delta_alpha: f64,
    pub delta_phi: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            direction: 1e-3,
            position: 1e-3,
            delta_alpha: 3e-3,
            delta_phi: 3e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub total_iters: usize,
    pub iter_judge: usize,
    /// Translation threshold as a fraction of the part's enclosing radius.
    pub alpha_min_factor: f64,
    /// Rotation threshold in radians.
    pub phi_min: f64,
    /// Initialization branch threshold in radians.
    pub theta_min: f64,
    pub lambda_motion: f64,
    /// Weight of the chamfer alignment term. `None` selects 0 for
    /// corresponded sequences and 1 otherwise.
    pub lambda_align: Option<f64>,
    pub learning_rates: LearningRates,
    /// Learning rates follow a cosine from their base value down to this
    /// fraction at `iter_judge` and stay there; 1 disables decay.
    pub lr_final_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            total_iters: 7500,
            iter_judge: 2000,
            alpha_min_factor: 0.1,
            phi_min: 0.05 * std::f64::consts::PI,
            theta_min: DEFAULT_THETA_MIN,
            lambda_motion: 10.0,
            lambda_align: None,
            learning_rates: LearningRates::default(),
            lr_final_fraction: 0.01,
            beta1: 0.5,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iter_judge >= self.total_iters {
            return Err(Error::Config(format!(
                "iter_judge ({}) must be below total_iters ({})",
                self.iter_judge, self.total_iters
            )));
        }
        let lr = &self.learning_rates;
        let non_negative = [
            ("alpha_min_factor", self.alpha_min_factor),
            ("phi_min", self.phi_min),
            ("theta_min", self.theta_min),
            ("lambda_motion", self.lambda_motion),
            ("lambda_align", self.lambda_align.unwrap_or(0.0)),
            ("learning_rates.direction", lr.direction),
            ("learning_rates.position", lr.position),
            ("learning_rates.delta_alpha", lr.delta_alpha),
            ("learning_rates.delta_phi", lr.delta_phi),
            ("adam_epsilon", self.adam_epsilon),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "lr_final_fraction must lie in (0, 1], got {}",
                self.lr_final_fraction
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Learning-rate multiplier at 1-based iteration `it`: a cosine from 1
    /// down to `lr_final_fraction` at the judgment, held there afterwards.
    pub fn lr_scale(&self, it: usize) -> f64 {
        let f = self.lr_final_fraction;
        if it >= self.iter_judge {
            return f;
        }
        let progress = (it - 1) as f64 / (self.iter_judge - 1).max(1) as f64;
        f + (1.0 - f) * (1.0 + (std::f64::consts::PI * progress).cos()) / 2.0
    }

    fn align_weight(&self, corresponded: bool) -> f64 {
        self.lambda_align
            .unwrap_or(if corresponded { 0.0 } else { 1.0 })
    }
}

/// Optimizable motion attributes of one part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartParams {
    /// Normalized on use.
    pub direction_raw: Vec3,
    pub position: Vec3,
    /// `delta_alpha[i]` is the slide from frame `i + 1` to frame `i + 2`.
    pub delta_alpha: Vec<f64>,
    /// `delta_phi[i]` is the rotation from frame `i + 1` to frame `i + 2`.
    pub delta_phi: Vec<f64>,
}

impl PartParams {
    /// Axis from initialization, zero motion in every frame.
    pub fn from_init(init: &MotionInit, num_frames: usize) -> Self {
        PartParams {
            direction_raw: init.axis.direction.into_inner(),
            position: init.axis.position,
            delta_alpha: vec![0.0; num_frames - 1],
            delta_phi: vec![0.0; num_frames - 1],
        }
    }

    pub fn num_frames(&self) -> usize {
        self.delta_alpha.len() + 1
    }

    pub fn direction(&self) -> UnitVec3 {
        let n = self.direction_raw.norm();
        debug_assert!(n > MIN_DIRECTION_NORM, "degenerate axis direction");
        Unit::new_unchecked(self.direction_raw / n)
    }

    pub fn axis(&self) -> ScrewAxis {
        ScrewAxis::new(self.direction(), self.position)
    }

    /// Sum of absolute slides.
    pub fn total_alpha(&self) -> f64 {
        self.delta_alpha.iter().map(|d| d.abs()).sum()
    }

    /// Sum of absolute rotations.
    pub fn total_phi(&self) -> f64 {
        self.delta_phi.iter().map(|d| d.abs()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(6 + 2 * self.delta_alpha.len());
        v.extend(self.direction_raw.iter());
        v.extend(self.position.iter());
        v.extend(&self.delta_alpha);
        v.extend(&self.delta_phi);
        v
    }

    fn set_flat(&mut self, v: &[f64]) {
        let m = self.delta_alpha.len();
        self.direction_raw = Vec3::new(v[0], v[1], v[2]);
        self.position = Vec3::new(v[3], v[4], v[5]);
        self.delta_alpha.copy_from_slice(&v[6..6 + m]);
        self.delta_phi.copy_from_slice(&v[6 + m..6 + 2 * m]);
    }
}

/// State of frame `frame` (1-based) relative to frame 1.
pub fn cumulative_motion(params: &PartParams, frame: usize) -> ScrewMotion {
    assert!(
        (1..=params.num_frames()).contains(&frame),
        "frame {frame} out of range"
    );
    ScrewMotion {
        axis: params.axis(),
        angle: params.delta_phi[..frame - 1].iter().sum(),
        distance: params.delta_alpha[..frame - 1].iter().sum(),
    }
}

/// Two distinct 1-based frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatePair {
    pub a: usize,
    pub b: usize,
}

impl StatePair {
    pub fn new(a: usize, b: usize) -> Self {
        assert!(a != b && a >= 1 && b >= 1, "invalid state pair ({a}, {b})");
        StatePair { a, b }
    }

    /// Uniform over unordered pairs of `1..=n`, returned with `a < b`.
    pub fn sample<R: Rng>(rng: &mut R, n: usize) -> Self {
        let a = rng.gen_range(1..=n);
        let mut b = rng.gen_range(1..n);
        if b >= a {
            b += 1;
        }
        StatePair::new(a.min(b), a.max(b))
    }

    /// Signed delta-index range whose prefix sums differ between `a` and `b`.
    fn span(&self) -> (std::ops::Range<usize>, f64) {
        if self.a < self.b {
            (self.a - 1..self.b - 1, 1.0)
        } else {
            (self.b - 1..self.a - 1, -1.0)
        }
    }
}

/// Rotation angle and slide carrying frame `a` to frame `b`.
fn relative_motion(params: &PartParams, pair: StatePair) -> (f64, f64) {
    let (range, sign) = pair.span();
    let angle: f64 = params.delta_phi[range.clone()].iter().sum();
    let distance: f64 = params.delta_alpha[range].iter().sum();
    (sign * angle, sign * distance)
}

/// `Mat_B · Mat_A⁻¹` for one part.
pub fn transform_between(params: &PartParams, pair: StatePair) -> RigidTransform {
    let (angle, distance) = relative_motion(params, pair);
    screw_to_transform(&ScrewMotion {
        axis: params.axis(),
        angle,
        distance,
    })
}

/// Per-frame clouds of one part, with nearest-neighbor indices when the
/// chamfer term is active.
pub struct PartFrames<'a> {
    pub clouds: Vec<&'a PointCloud>,
    indices: Option<Vec<NearestIndex>>,
    pub corresponded: bool,
}

impl<'a> PartFrames<'a> {
    pub fn new(clouds: Vec<&'a PointCloud>, corresponded: bool, with_indices: bool) -> Self {
        let indices =
            with_indices.then(|| clouds.iter().map(|c| NearestIndex::new(&c.points)).collect());
        PartFrames {
            clouds,
            indices,
            corresponded,
        }
    }

    fn index(&self, frame: usize) -> &NearestIndex {
        &self.indices.as_ref().expect("nearest-neighbor indices were not built")[frame - 1]
    }
}

/// Gradient of one part's loss with respect to its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGradient {
    pub direction_raw: Vec3,
    pub position: Vec3,
    pub delta_alpha: Vec<f64>,
    pub delta_phi: Vec<f64>,
}

impl PartGradient {
    fn zeros(m: usize) -> Self {
        PartGradient {
            direction_raw: Vec3::zeros(),
            position: Vec3::zeros(),
            delta_alpha: vec![0.0; m],
            delta_phi: vec![0.0; m],
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(6 + 2 * self.delta_alpha.len());
        v.extend(self.direction_raw.iter());
        v.extend(self.position.iter());
        v.extend(&self.delta_alpha);
        v.extend(&self.delta_phi);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Accumulates `Σ w·‖M·x − y‖` and its gradient with respect to the screw
/// parameters of `M` (direction, position, relative angle, relative slide).
struct ScrewResidual {
    r: Vec3,
    q: Vec3,
    rot: Matrix3<f64>,
    sin: f64,
    one_minus_cos: f64,
    distance: f64,
    loss: f64,
    grad_r: Vec3,
    grad_q: Vec3,
    grad_angle: f64,
    grad_distance: f64,
}

impl ScrewResidual {
    fn new(axis: &ScrewAxis, angle: f64, distance: f64) -> Self {
        let rot = *Rotation::from_axis_angle(&axis.direction, angle).matrix();
        let (sin, cos) = angle.sin_cos();
        ScrewResidual {
            r: axis.direction.into_inner(),
            q: axis.position,
            rot,
            sin,
            one_minus_cos: 1.0 - cos,
            distance,
            loss: 0.0,
            grad_r: Vec3::zeros(),
            grad_q: Vec3::zeros(),
            grad_angle: 0.0,
            grad_distance: 0.0,
        }
    }

    fn apply(&self, x: &Vec3) -> Vec3 {
        self.rot * (x - self.q) + self.q + self.r * self.distance
    }

    fn add(&mut self, x: &Vec3, y: &Vec3, weight: f64) {
        let v = x - self.q;
        let rv = self.rot * v;
        let e = rv + self.q + self.r * self.distance - y;
        let d = e.norm();
        self.loss += weight * d;
        if d <= RESIDUAL_FLOOR {
            return;
        }
        let g = e * (weight / d);
        self.grad_angle += g.dot(&self.r.cross(&rv));
        self.grad_distance += g.dot(&self.r);
        self.grad_q += g - self.rot.transpose() * g;
        // ∂(R(r)·v + s·r)/∂r transposed, for unconstrained r
        self.grad_r += v.cross(&g) * self.sin
            + (g * self.r.dot(&v) + v * self.r.dot(&g)) * self.one_minus_cos
            + g * self.distance;
    }
}

/// Which parameters of a part receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveSet {
    pub translation: bool,
    pub rotation: bool,
}

impl ActiveSet {
    pub const ALL: ActiveSet = ActiveSet {
        translation: true,
        rotation: true,
    };
}

/// Loss weights for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub motion: f64,
    pub align: f64,
}

fn accumulate_motion(res: &mut ScrewResidual, frames: &PartFrames, pair: StatePair, weight: f64) {
    let (src, dst) = (frames.clouds[pair.a - 1], frames.clouds[pair.b - 1]);
    let w = weight / src.len() as f64;
    for (x, y) in src.points.iter().zip(&dst.points) {
        res.add(x, y, w);
    }
}

fn accumulate_align(res: &mut ScrewResidual, frames: &PartFrames, pair: StatePair, weight: f64) {
    let (src, dst) = (frames.clouds[pair.a - 1], frames.clouds[pair.b - 1]);
    let forward = frames.index(pair.b);
    let w = weight / src.len() as f64;
    for x in &src.points {
        let (j, _) = forward.nearest(&res.apply(x));
        res.add(x, &dst.points[j], w);
    }
    // M⁻¹·y = Rᵀ(y − q − s·r) + q
    let backward = frames.index(pair.a);
    let w = weight / dst.len() as f64;
    for y in &dst.points {
        let pulled = res.rot.transpose() * (y - res.q - res.r * res.distance) + res.q;
        let (i, _) = backward.nearest(&pulled);
        res.add(&src.points[i], y, w);
    }
}

fn uses_motion_term(frames: &PartFrames, pair: StatePair) -> bool {
    frames.corresponded && frames.clouds[pair.a - 1].len() == frames.clouds[pair.b - 1].len()
}

/// Weighted loss of one part and its analytic gradient.
pub fn part_loss_and_gradient(
    params: &PartParams,
    pair: StatePair,
    frames: &PartFrames,
    weights: LossWeights,
    active: ActiveSet,
) -> (f64, PartGradient) {
    let (angle, distance) = relative_motion(params, pair);
    let mut res = ScrewResidual::new(&params.axis(), angle, distance);
    if weights.motion > 0.0 && uses_motion_term(frames, pair) {
        accumulate_motion(&mut res, frames, pair, weights.motion);
    }
    if weights.align > 0.0 {
        accumulate_align(&mut res, frames, pair, weights.align);
    }

    let m = params.delta_alpha.len();
    let mut grad = PartGradient::zeros(m);
    let u_norm = params.direction_raw.norm();
    let r = res.r;
    grad.direction_raw = (res.grad_r - r * r.dot(&res.grad_r)) / u_norm;
    grad.position = res.grad_q;
    let (range, sign) = pair.span();
    for i in range {
        if active.translation {
            grad.delta_alpha[i] = sign * res.grad_distance;
        }
        if active.rotation {
            grad.delta_phi[i] = sign * res.grad_angle;
        }
    }
    (res.loss, grad)
}

/// `Σ_k mean_j ‖Mat_{A→B}·P_A[j] − P_B[j]‖` over corresponded parts.
pub fn motion_loss(params: &[PartParams], pair: StatePair, frames: &[PartFrames]) -> f64 {
    params
        .iter()
        .zip(frames)
        .map(|(p, f)| {
            let weights = LossWeights {
                motion: 1.0,
                align: 0.0,
            };
            part_loss_and_gradient(p, pair, f, weights, ActiveSet::ALL).0
        })
        .sum()
}

/// Symmetric chamfer distance between transported `P_A` and `P_B`, summed
/// over parts. Frames must carry nearest-neighbor indices.
pub fn alignment_loss(params: &[PartParams], pair: StatePair, frames: &[PartFrames]) -> f64 {
    params
        .iter()
        .zip(frames)
        .map(|(p, f)| {
            let weights = LossWeights {
                motion: 0.0,
                align: 1.0,
            };
            part_loss_and_gradient(p, pair, f, weights, ActiveSet::ALL).0
        })
        .sum()
}

/// Gradients of `λ_motion·motion_loss + λ_align·alignment_loss` for every
/// part, in part order.
pub fn gradients(
    params: &[PartParams],
    pair: StatePair,
    frames: &[PartFrames],
    weights: LossWeights,
) -> Vec<PartGradient> {
    params
        .iter()
        .zip(frames)
        .map(|(p, f)| part_loss_and_gradient(p, pair, f, weights, ActiveSet::ALL).1)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    T,
    R,
    RT,
    Pruned,
}

impl Verdict {
    pub fn motion_type(&self) -> Option<MotionType> {
        match self {
            Verdict::T => Some(MotionType::T),
            Verdict::R => Some(MotionType::R),
            Verdict::RT => Some(MotionType::RT),
            Verdict::Pruned => None,
        }
    }
}

/// Types a part from its accumulated slide and rotation.
pub fn judge(total_alpha: f64, total_phi: f64, alpha_min: f64, phi_min: f64) -> Verdict {
    match (total_alpha >= alpha_min, total_phi >= phi_min) {
        (true, false) => Verdict::T,
        (false, true) => Verdict::R,
        (true, true) => Verdict::RT,
        (false, false) => Verdict::Pruned,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeVerdict {
    pub label: u32,
    pub verdict: Verdict,
    pub total_alpha: f64,
    pub total_phi: f64,
}

/// Per-iteration losses; `per_part[k][it]` is `None` once part `k` is pruned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossTrace {
    pub labels: Vec<u32>,
    pub total: Vec<f64>,
    pub per_part: Vec<Vec<Option<f64>>>,
}

impl LossTrace {
    /// CSV with columns `iteration,total,part_<label>...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,total");
        for l in &self.labels {
            let _ = write!(out, ",part_{l}");
        }
        out.push('\n');
        for (it, total) in self.total.iter().enumerate() {
            let _ = write!(out, "{},{}", it + 1, total);
            for part in &self.per_part {
                match part[it] {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Means of consecutive non-overlapping windows of the total loss.
    pub fn window_means(&self, width: usize) -> Vec<f64> {
        self.total
            .chunks_exact(width)
            .map(|w| w.iter().sum::<f64>() / width as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Final parameters of retained parts, keyed by label.
    pub params: BTreeMap<u32, PartParams>,
    /// One verdict per candidate part, in label order.
    pub verdicts: Vec<TypeVerdict>,
    pub trace: LossTrace,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn update(
        &mut self,
        x: &mut [f64],
        g: &[f64],
        lr: &[f64],
        scale: f64,
        frozen: &[bool],
        cfg: &OptimConfig,
    ) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for i in 0..x.len() {
            if frozen[i] {
                continue;
            }
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            x[i] -= scale * lr[i] * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
}

struct PartState {
    label: u32,
    params: PartParams,
    adam: Adam,
    frozen: Vec<bool>,
    active: ActiveSet,
    verdict: Option<Verdict>,
    alpha_min: f64,
}

fn learning_rate_vector(m: usize, rates: &LearningRates) -> Vec<f64> {
    let mut lr = Vec::with_capacity(6 + 2 * m);
    lr.extend([rates.direction; 3]);
    lr.extend([rates.position; 3]);
    lr.extend(std::iter::repeat_n(rates.delta_alpha, m));
    lr.extend(std::iter::repeat_n(rates.delta_phi, m));
    lr
}

/// Runs the full optimization over a sequence.
pub fn optimize_scene(
    seq: &SceneSequence,
    inits: &[MotionInit],
    cfg: &OptimConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    seq.validate()?;
    let n = seq.num_frames();
    let labels = seq.part_labels();
    for label in &labels {
        if !inits.iter().any(|i| i.label == *label) {
            return Err(Error::Config(format!("no initialization for part {label}")));
        }
    }

    let align = cfg.align_weight(seq.corresponded);
    let weights = LossWeights {
        motion: cfg.lambda_motion,
        align,
    };
    let frames: Vec<PartFrames> = labels
        .iter()
        .map(|&l| PartFrames::new(seq.part_frames(l), seq.corresponded, align > 0.0))
        .collect();

    let m = n - 1;
    let lr = learning_rate_vector(m, &cfg.learning_rates);
    let mut states: Vec<PartState> = labels
        .iter()
        .map(|&label| {
            let init = inits.iter().find(|i| i.label == label).expect("checked above");
            let first = seq.frames[0].parts.get(&label).expect("validated sequence");
            Ok(PartState {
                label,
                params: PartParams::from_init(init, n),
                adam: Adam::new(6 + 2 * m),
                frozen: vec![false; 6 + 2 * m],
                active: ActiveSet::ALL,
                verdict: None,
                alpha_min: cfg.alpha_min_factor * enclosing_radius(first)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = LossTrace {
        labels: labels.clone(),
        total: Vec::with_capacity(cfg.total_iters),
        per_part: vec![Vec::with_capacity(cfg.total_iters); labels.len()],
    };
    let mut verdicts = Vec::new();

    for it in 1..=cfg.total_iters {
        let pair = StatePair::sample(&mut rng, n);
        let scale = cfg.lr_scale(it);
        let mut total = 0.0;
        for (k, state) in states.iter_mut().enumerate() {
            if state.verdict == Some(Verdict::Pruned) {
                trace.per_part[k].push(None);
                continue;
            }
            let (loss, grad) =
                part_loss_and_gradient(&state.params, pair, &frames[k], weights, state.active);
            total += loss;
            trace.per_part[k].push(Some(loss));
            let mut x = state.params.to_flat();
            state
                .adam
                .update(&mut x, &grad.to_flat(), &lr, scale, &state.frozen, cfg);
            state.params.set_flat(&x);
            if state.params.direction_raw.norm() <= MIN_DIRECTION_NORM {
                // cannot happen with bounded steps from a unit start, but a
                // collapsed direction would poison every later iteration
                state.verdict = Some(Verdict::Pruned);
            }
        }
        trace.total.push(total);

        if it == cfg.iter_judge {
            for state in states.iter_mut() {
                let total_alpha = state.params.total_alpha();
                let total_phi = state.params.total_phi();
                let verdict = if state.verdict == Some(Verdict::Pruned) {
                    Verdict::Pruned
                } else {
                    judge(total_alpha, total_phi, state.alpha_min, cfg.phi_min)
                };
                state.verdict = Some(verdict);
                match verdict {
                    Verdict::T => {
                        state.params.delta_phi.iter_mut().for_each(|d| *d = 0.0);
                        state.frozen[6 + m..].iter_mut().for_each(|f| *f = true);
                        state.active.rotation = false;
                    }
                    Verdict::R => {
                        state.params.delta_alpha.iter_mut().for_each(|d| *d = 0.0);
                        state.frozen[6..6 + m].iter_mut().for_each(|f| *f = true);
                        state.active.translation = false;
                    }
                    Verdict::RT | Verdict::Pruned => {}
                }
                verdicts.push(TypeVerdict {
                    label: state.label,
                    verdict,
                    total_alpha,
                    total_phi,
                });
            }
        }
    }

    let mut params = BTreeMap::new();
    for state in states {
        if state.verdict == Some(Verdict::Pruned) {
            continue;
        }
        let mut p = state.params;
        let first = seq.frames[0].parts.get(&state.label).expect("validated sequence");
        let c = centroid(first)?;
        p.direction_raw = p.direction().into_inner();
        p.position = if state.verdict == Some(Verdict::T) {
            c
        } else {
            p.axis().project(&c)
        };
        params.insert(state.label, p);
    }
    Ok(OptimizationResult {
        params,
        verdicts,
        trace,
    })
}

/// Direct axis estimate from the largest-motion frame pair, given the true
/// segmentation and motion types. No iterative refinement.
pub fn estimate_without_optimization(
    seq: &SceneSequence,
    labels: &[u32],
    types: &[MotionType],
) -> Result<Vec<ScrewAxis>> {
    labels
        .iter()
        .zip(types)
        .map(|(&label, &motion_type)| {
            let frames = seq.part_frames(label);
            if frames.len() < 2 {
                return Err(Error::Consistency(format!("part {label} is missing frames")));
            }
            let (i, j) = select_max_motion_pair(&frames, seq.corresponded);
            let t = register(frames[i - 1], frames[j - 1], seq.corresponded)?;
            if motion_type.rotates() {
                Ok(screw_decompose(&t).axis)
            } else {
                let dir = if t.translation.norm() > 0.0 {
                    Unit::new_normalize(t.translation)
                } else {
                    Vec3::z_axis()
                };
                Ok(ScrewAxis::new(dir, centroid(frames[0])?))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::transform_cloud;
    use crate::geometry::test_support::{random_unit, random_vec};

    fn frames_from(clouds: &[PointCloud]) -> PartFrames<'_> {
        PartFrames::new(clouds.iter().collect(), true, true)
    }

    fn random_params<R: Rng>(rng: &mut R, n: usize, scale: f64) -> PartParams {
        PartParams {
            direction_raw: random_unit(rng).into_inner() * rng.gen_range(0.5..2.0),
            position: random_vec(rng, 1.0),
            delta_alpha: (0..n - 1).map(|_| rng.gen_range(-scale..scale)).collect(),
            delta_phi: (0..n - 1).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }

    /// Straight-line re-implementation: rotate each point with an explicit
    /// Rodrigues vector formula, then slide.
    fn reference_motion_loss(params: &PartParams, pair: StatePair, clouds: &[PointCloud]) -> f64 {
        let phi = |f: usize| params.delta_phi[..f - 1].iter().sum::<f64>();
        let alpha = |f: usize| params.delta_alpha[..f - 1].iter().sum::<f64>();
        let r = params.direction_raw / params.direction_raw.norm();
        let angle = phi(pair.b) - phi(pair.a);
        let slide = alpha(pair.b) - alpha(pair.a);
        let (src, dst) = (&clouds[pair.a - 1], &clouds[pair.b - 1]);
        let mut sum = 0.0;
        for (x, y) in src.points.iter().zip(&dst.points) {
            let v = x - params.position;
            let rotated = v * angle.cos()
                + r.cross(&v) * angle.sin()
                + r * r.dot(&v) * (1.0 - angle.cos());
            let moved = rotated + params.position + r * slide;
            sum += (moved - y).norm();
        }
        sum / src.len() as f64
    }

    fn reference_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
        let one_way = |p: &[Vec3], q: &[Vec3]| {
            p.iter()
                .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
                / p.len() as f64
        };
        one_way(a, b) + one_way(b, a)
    }

    fn random_clouds<R: Rng>(rng: &mut R, n: usize, pts: usize) -> Vec<PointCloud> {
        (0..n)
            .map(|_| PointCloud::new((0..pts).map(|_| random_vec(rng, 1.0)).collect()))
            .collect()
    }

    #[test]
    fn cumulative_motion_prefix_sums() {
        let p = PartParams {
            direction_raw: Vec3::z(),
            position: Vec3::zeros(),
            delta_alpha: vec![1.0, 2.0, 3.0],
            delta_phi: vec![0.1, 0.2, 0.3],
        };
        let first = cumulative_motion(&p, 1);
        assert_eq!((first.angle, first.distance), (0.0, 0.0));
        let last = cumulative_motion(&p, 4);
        assert!((last.angle - 0.6).abs() < 1e-15);
        assert_eq!(last.distance, 6.0);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 30, 1.0);
        let mut brute = 0.0;
        for d in &p.delta_phi {
            brute += d;
        }
        assert!((cumulative_motion(&p, 30).angle - brute).abs() < 1e-12);
    }

    #[test]
    fn state_pairs_are_uniform_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [[0usize; 5]; 5];
        for _ in 0..100_000 {
            let p = StatePair::sample(&mut rng, 5);
            assert!(p.a < p.b && p.b <= 5);
            counts[p.a - 1][p.b - 1] += 1;
        }
        for (a, row) in counts.iter().enumerate() {
            for (b, &count) in row.iter().enumerate().skip(a + 1) {
                let share = count as f64 / 100_000.0;
                assert!((share - 0.1).abs() < 0.01, "{a} {b} {share}");
            }
        }
    }

    #[test]
    fn motion_loss_zero_at_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = random_params(&mut rng, 6, 0.4);
        let base = PointCloud::new((0..50).map(|_| random_vec(&mut rng, 1.0)).collect());
        let clouds: Vec<PointCloud> = (1..=6)
            .map(|f| transform_cloud(&screw_to_transform(&cumulative_motion(&truth, f)), &base))
            .collect();
        for (a, b) in [(1, 6), (2, 5), (6, 1), (3, 4)] {
            let pair = StatePair::new(a, b);
            assert!(motion_loss(std::slice::from_ref(&truth), pair, &[frames_from(&clouds)]) < 1e-10);
            let weights = LossWeights {
                motion: 10.0,
                align: 0.0,
            };
            let (_, g) =
                part_loss_and_gradient(&truth, pair, &frames_from(&clouds), weights, ActiveSet::ALL);
            assert!(g.norm() < 1e-8, "{}", g.norm());
        }
    }

    #[test]
    fn motion_loss_of_constant_shift() {
        let base = PointCloud::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]);
        let shifted = transform_cloud(
            &RigidTransform::from_translation(Vec3::new(0.3, 0.0, 0.0)),
            &base,
        );
        let clouds = vec![base, shifted];
        let p = PartParams {
            direction_raw: Vec3::z(),
            position: Vec3::zeros(),
            delta_alpha: vec![0.0],
            delta_phi: vec![0.0],
        };
        let loss = motion_loss(&[p], StatePair::new(1, 2), &[frames_from(&clouds)]);
        assert!((loss - 0.3).abs() < 1e-15);
    }

    #[test]
    fn motion_loss_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let clouds = random_clouds(&mut rng, 4, 3);
            let p = random_params(&mut rng, 4, 0.3);
            let pair = StatePair::sample(&mut rng, 4);
            let got = motion_loss(std::slice::from_ref(&p), pair, &[frames_from(&clouds)]);
            let want = reference_motion_loss(&p, pair, &clouds);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn alignment_loss_examples() {
        let p = PartParams {
            direction_raw: Vec3::z(),
            position: Vec3::zeros(),
            delta_alpha: vec![0.0],
            delta_phi: vec![0.0],
        };
        let d = 0.25;
        let clouds = vec![
            PointCloud::new(vec![Vec3::zeros()]),
            PointCloud::new(vec![Vec3::new(d, 0.0, 0.0)]),
        ];
        let loss = alignment_loss(std::slice::from_ref(&p), StatePair::new(1, 2), &[frames_from(&clouds)]);
        assert!((loss - 2.0 * d).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let truth = random_params(&mut rng, 3, 0.4);
        let base = PointCloud::new((0..40).map(|_| random_vec(&mut rng, 1.0)).collect());
        let clouds: Vec<PointCloud> = (1..=3)
            .map(|f| transform_cloud(&screw_to_transform(&cumulative_motion(&truth, f)), &base))
            .collect();
        let loss = alignment_loss(&[truth], StatePair::new(1, 3), &[frames_from(&clouds)]);
        assert!(loss < 1e-10);
    }

    #[test]
    fn alignment_loss_matches_brute_force_chamfer() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let clouds = random_clouds(&mut rng, 3, 10);
            let p = random_params(&mut rng, 3, 0.5);
            let pair = StatePair::sample(&mut rng, 3);
            let moved = transform_cloud(&transform_between(&p, pair), &clouds[pair.a - 1]);
            let want = reference_chamfer(&moved.points, &clouds[pair.b - 1].points);
            let got = alignment_loss(&[p], pair, &[frames_from(&clouds)]);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    fn flat_loss(
        flat: &[f64],
        template: &PartParams,
        pair: StatePair,
        frames: &PartFrames,
        weights: LossWeights,
    ) -> f64 {
        let mut p = template.clone();
        p.set_flat(flat);
        part_loss_and_gradient(&p, pair, frames, weights, ActiveSet::ALL).0
    }

    fn check_gradient(p: &PartParams, pair: StatePair, frames: &PartFrames, weights: LossWeights) {
        let (_, g) = part_loss_and_gradient(p, pair, frames, weights, ActiveSet::ALL);
        let analytic = g.to_flat();
        let x = p.to_flat();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (flat_loss(&plus, p, pair, frames, weights)
                - flat_loss(&minus, p, pair, frames, weights))
                / (2.0 * h);
            let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-5);
            assert!(rel < 1e-4, "coord {i}: analytic {} vs fd {fd}", analytic[i]);
        }
    }

    #[test]
    fn motion_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let weights = LossWeights {
            motion: 10.0,
            align: 0.0,
        };
        for _ in 0..50 {
            let clouds = random_clouds(&mut rng, 5, 8);
            let p = random_params(&mut rng, 5, 0.5);
            let pair = StatePair::sample(&mut rng, 5);
            let pair = if rng.gen_bool(0.5) { StatePair::new(pair.b, pair.a) } else { pair };
            check_gradient(&p, pair, &frames_from(&clouds), weights);
        }
    }

    #[test]
    fn chamfer_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let weights = LossWeights {
            motion: 10.0,
            align: 1.0,
        };
        for _ in 0..20 {
            let clouds = random_clouds(&mut rng, 4, 12);
            let p = random_params(&mut rng, 4, 0.5);
            let pair = StatePair::sample(&mut rng, 4);
            check_gradient(&p, pair, &frames_from(&clouds), weights);
        }
    }

    #[test]
    fn deltas_outside_the_pair_have_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let clouds = random_clouds(&mut rng, 8, 6);
        let p = random_params(&mut rng, 8, 0.3);
        let pair = StatePair::new(5, 3);
        let weights = LossWeights {
            motion: 10.0,
            align: 0.0,
        };
        let (_, g) = part_loss_and_gradient(&p, pair, &frames_from(&clouds), weights, ActiveSet::ALL);
        for i in 0..7 {
            let inside = (2..4).contains(&i);
            assert_eq!(g.delta_phi[i] != 0.0, inside, "phi {i}");
            assert_eq!(g.delta_alpha[i] != 0.0, inside, "alpha {i}");
        }
        // every index >= max(a, b) - 1 is exactly zero
        assert!(g.delta_phi[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sliding_the_axis_position_leaves_loss_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            let clouds = random_clouds(&mut rng, 5, 20);
            let p = random_params(&mut rng, 5, 0.5);
            let pair = StatePair::sample(&mut rng, 5);
            let base = motion_loss(std::slice::from_ref(&p), pair, &[frames_from(&clouds)]);
            let radius = enclosing_radius(&clouds[0]).unwrap();
            for s in [-10.0, 10.0] {
                let mut slid = p.clone();
                slid.position += p.direction().into_inner() * (s * radius);
                let loss = motion_loss(&[slid], pair, &[frames_from(&clouds)]);
                assert!((loss - base).abs() < 1e-10, "{loss} vs {base}");
            }
        }
    }

    #[test]
    fn judge_thresholds() {
        assert_eq!(judge(0.2, 0.0, 0.1, 0.15), Verdict::T);
        assert_eq!(judge(0.0, 0.2, 0.1, 0.15), Verdict::R);
        assert_eq!(judge(0.2, 0.2, 0.1, 0.15), Verdict::RT);
        assert_eq!(judge(0.05, 0.1, 0.1, 0.15), Verdict::Pruned);
        // thresholds are inclusive
        assert_eq!(judge(0.1, 0.15, 0.1, 0.15), Verdict::RT);
    }

    #[test]
    fn config_rejects_late_judgment() {
        let cfg = OptimConfig {
            total_iters: 100,
            iter_judge: 100,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = OptimConfig {
            lambda_motion: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        OptimConfig::default().validate().unwrap();
    }

    #[test]
    fn empty_config_yields_defaults() {
        let cfg: OptimConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, OptimConfig::default());
        assert_eq!(cfg.total_iters, 7500);
        assert_eq!(cfg.iter_judge, 2000);
        assert_eq!(cfg.lambda_motion, 10.0);
        assert!((cfg.phi_min - 0.05 * std::f64::consts::PI).abs() < 1e-15);
        let partial: OptimConfig =
            serde_json::from_str(r#"{"total_iters": 10, "learning_rates": {"direction": 0.5}}"#)
                .unwrap();
        assert_eq!(partial.total_iters, 10);
        assert_eq!(partial.learning_rates.direction, 0.5);
        assert_eq!(partial.learning_rates.delta_phi, 3e-3);
    }

    #[test]
    fn trace_csv_layout() {
        let trace = LossTrace {
            labels: vec![1, 2],
            total: vec![3.0, 1.5],
            per_part: vec![vec![Some(1.0), Some(1.5)], vec![Some(2.0), None]],
        };
        assert_eq!(
            trace.to_csv(),
            "iteration,total,part_1,part_2\n1,3,1,2\n2,1.5,1.5,\n"
        );
    }
}
