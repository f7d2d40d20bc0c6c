//! Procedural articulated scenes with exact motion annotations.
//!
//! Parts are surface-sampled primitives. Frame `i` of a part is the frame-1
//! sampling carried by the scheduled screw motion at `i`; noise, when
//! requested, is added afterwards and independently per frame.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Unit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    enclosing_radius, screw_to_transform, transform_cloud, PointCloud, RigidTransform, Rotation,
    ScrewAxis, ScrewMotion, Vec3,
};
use crate::ingest::{
    save_ground_truth, save_sequence, truth_path, FrameData, GroundTruth, GroundTruthPart,
    MotionType, SceneSequence,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Surface of an axis-aligned box centered at the origin.
    Box { size: [f64; 3] },
    /// Thin box spanning local x (width) and z (height).
    Panel {
        width: f64,
        height: f64,
        #[serde(default = "default_thickness")]
        thickness: f64,
    },
    /// Closed cylinder along local z, centered at the origin.
    Cylinder { radius: f64, height: f64 },
    /// Union of posed shapes; points are shared out by surface area.
    Composite { components: Vec<Component> },
}

fn default_thickness() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub shape: Shape,
    #[serde(default)]
    pub pose: Pose,
}

/// Rotation about `axis` by `angle_deg`, then translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pose {
    pub translation: [f64; 3],
    pub axis: [f64; 3],
    pub angle_deg: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose {
            translation: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
            angle_deg: 0.0,
        }
    }
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Pose {
            translation: [x, y, z],
            ..Default::default()
        }
    }

    fn transform(&self) -> Result<RigidTransform> {
        let axis = Vec3::from(self.axis);
        if axis.norm() < 1e-12 {
            return Err(Error::Spec("pose axis must be non-zero".into()));
        }
        Ok(RigidTransform::new(
            Rotation::from_axis_angle(&Unit::new_normalize(axis), self.angle_deg.to_radians()),
            Vec3::from(self.translation),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartKind {
    T,
    R,
    RT,
    /// Labeled as a motion part but never moves.
    #[serde(rename = "STATIC_OUTLIER")]
    StaticOutlier,
}

impl PartKind {
    pub fn motion_type(&self) -> MotionType {
        match self {
            PartKind::T => MotionType::T,
            PartKind::R => MotionType::R,
            PartKind::RT => MotionType::RT,
            PartKind::StaticOutlier => MotionType::Static,
        }
    }
}

/// How the motion progresses over frames, as a fraction of the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Linear,
    /// Smooth monotone `(1 − cos πu) / 2`.
    #[default]
    Ease,
    /// Out and back, `(1 − cos 2πu) / 2`; the extreme is mid-sequence.
    Oscillate,
}

impl Schedule {
    /// Progress at `u ∈ [0, 1]`.
    pub fn progress(&self, u: f64) -> f64 {
        match self {
            Schedule::Linear => u,
            Schedule::Ease => (1.0 - (PI * u).cos()) / 2.0,
            Schedule::Oscillate => (1.0 - (2.0 * PI * u).cos()) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub direction: [f64; 3],
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpec {
    pub kind: PartKind,
    pub shape: Shape,
    #[serde(default)]
    pub pose: Pose,
    pub points: usize,
    /// Required for moving parts.
    #[serde(default)]
    pub axis: Option<AxisSpec>,
    /// Peak rotation in degrees.
    #[serde(default)]
    pub angle_deg: f64,
    /// Peak slide along the axis.
    #[serde(default)]
    pub distance: f64,
    #[serde(default)]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub shape: Shape,
    #[serde(default)]
    pub pose: Pose,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub frames: usize,
    /// Noise standard deviation as a fraction of each part's radius.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    pub background: BackgroundSpec,
    /// Labels `1..=K` in order.
    pub parts: Vec<PartSpec>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("specs always serialize")
    }

    pub fn with_noise(mut self, noise: f64, seed: u64) -> Self {
        self.noise = noise;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(format!("{}: {m}", self.name)));
        if self.frames < 2 {
            return fail(format!("needs at least 2 frames, got {}", self.frames));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return fail(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        if self.background.points == 0 {
            return fail("background has zero points".into());
        }
        validate_shape(&self.background.shape).or_else(|m| fail(format!("background: {m}")))?;
        if !self.parts.iter().any(|p| p.kind != PartKind::StaticOutlier) {
            return fail("needs at least one moving part".into());
        }
        for (i, part) in self.parts.iter().enumerate() {
            let label = i + 1;
            if part.points == 0 {
                return fail(format!("part {label} has zero points"));
            }
            validate_shape(&part.shape).or_else(|m| fail(format!("part {label}: {m}")))?;
            let rotates = part.angle_deg != 0.0;
            let slides = part.distance != 0.0;
            let consistent = match part.kind {
                PartKind::T => slides && !rotates,
                PartKind::R => rotates && !slides,
                PartKind::RT => rotates && slides,
                PartKind::StaticOutlier => !rotates && !slides,
            };
            if !consistent {
                return fail(format!(
                    "part {label}: {:?} motion with angle {} and distance {}",
                    part.kind, part.angle_deg, part.distance
                ));
            }
            if part.kind != PartKind::StaticOutlier {
                match &part.axis {
                    Some(a) if Vec3::from(a.direction).norm() > 1e-12 => {}
                    _ => return fail(format!("part {label}: moving parts need a non-zero axis")),
                }
            }
        }
        Ok(())
    }
}

fn validate_shape(shape: &Shape) -> std::result::Result<(), String> {
    let positive = |vals: &[f64]| vals.iter().all(|v| v.is_finite() && *v > 0.0);
    let ok = match shape {
        Shape::Box { size } => positive(size),
        Shape::Panel {
            width,
            height,
            thickness,
        } => positive(&[*width, *height, *thickness]),
        Shape::Cylinder { radius, height } => positive(&[*radius, *height]),
        Shape::Composite { components } => {
            if components.is_empty() {
                return Err("composite without components".into());
            }
            for c in components {
                validate_shape(&c.shape)?;
            }
            true
        }
    };
    if ok {
        Ok(())
    } else {
        Err(format!("non-positive dimensions in {shape:?}"))
    }
}

fn surface_area(shape: &Shape) -> f64 {
    match shape {
        Shape::Box { size: [x, y, z] } => 2.0 * (x * y + y * z + x * z),
        Shape::Panel {
            width,
            height,
            thickness,
        } => surface_area(&Shape::Box {
            size: [*width, *thickness, *height],
        }),
        Shape::Cylinder { radius, height } => 2.0 * PI * radius * (radius + height),
        Shape::Composite { components } => components.iter().map(|c| surface_area(&c.shape)).sum(),
    }
}

fn sample_box<R: Rng>(rng: &mut R, [x, y, z]: [f64; 3]) -> Vec3 {
    let faces = [y * z, y * z, x * z, x * z, x * y, x * y];
    let total: f64 = faces.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut face = 5;
    for (i, a) in faces.iter().enumerate() {
        if pick < *a {
            face = i;
            break;
        }
        pick -= a;
    }
    let (hx, hy, hz) = (x / 2.0, y / 2.0, z / 2.0);
    let mut u = |h: f64| rng.gen_range(-h..h);
    match face {
        0 => Vec3::new(-hx, u(hy), u(hz)),
        1 => Vec3::new(hx, u(hy), u(hz)),
        2 => Vec3::new(u(hx), -hy, u(hz)),
        3 => Vec3::new(u(hx), hy, u(hz)),
        4 => Vec3::new(u(hx), u(hy), -hz),
        _ => Vec3::new(u(hx), u(hy), hz),
    }
}

fn sample_cylinder<R: Rng>(rng: &mut R, radius: f64, height: f64) -> Vec3 {
    let side = 2.0 * PI * radius * height;
    let caps = 2.0 * PI * radius * radius;
    let theta = rng.gen_range(0.0..2.0 * PI);
    if rng.gen_range(0.0..side + caps) < side {
        let z = rng.gen_range(-height / 2.0..height / 2.0);
        Vec3::new(radius * theta.cos(), radius * theta.sin(), z)
    } else {
        let r = radius * rng.gen::<f64>().sqrt();
        let z = if rng.gen_bool(0.5) { height / 2.0 } else { -height / 2.0 };
        Vec3::new(r * theta.cos(), r * theta.sin(), z)
    }
}

fn sample_shape<R: Rng>(rng: &mut R, shape: &Shape, pose: &Pose, count: usize) -> Result<Vec<Vec3>> {
    let t = pose.transform()?;
    let local: Vec<Vec3> = match shape {
        Shape::Box { size } => (0..count).map(|_| sample_box(rng, *size)).collect(),
        Shape::Panel {
            width,
            height,
            thickness,
        } => (0..count)
            .map(|_| sample_box(rng, [*width, *thickness, *height]))
            .collect(),
        Shape::Cylinder { radius, height } => {
            (0..count).map(|_| sample_cylinder(rng, *radius, *height)).collect()
        }
        Shape::Composite { components } => {
            // largest-remainder split keeps the total exact
            let areas: Vec<f64> = components.iter().map(|c| surface_area(&c.shape)).collect();
            let total: f64 = areas.iter().sum();
            let mut counts: Vec<usize> = areas
                .iter()
                .map(|a| (a / total * count as f64).floor() as usize)
                .collect();
            let mut order: Vec<usize> = (0..components.len()).collect();
            order.sort_by(|&a, &b| {
                let frac = |i: usize| areas[i] / total * count as f64 - counts[i] as f64;
                frac(b).total_cmp(&frac(a)).then(a.cmp(&b))
            });
            let missing = count - counts.iter().sum::<usize>();
            for &i in order.iter().take(missing) {
                counts[i] += 1;
            }
            let mut pts = Vec::with_capacity(count);
            for (c, n) in components.iter().zip(counts) {
                pts.extend(sample_shape(rng, &c.shape, &c.pose, n)?);
            }
            pts
        }
    };
    Ok(local.iter().map(|p| t.apply(p)).collect())
}

/// A generated scene and its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub sequence: SceneSequence,
    pub truth: GroundTruth,
}

impl LabeledScene {
    /// Writes the scene directory and its `truth.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        save_sequence(&self.sequence, dir)?;
        save_ground_truth(&self.truth, truth_path(dir))
    }
}

/// Cumulative (angle in radians, distance) of a part at every frame.
pub fn schedule_values(part: &PartSpec, frames: usize) -> Vec<(f64, f64)> {
    (0..frames)
        .map(|i| {
            let s = part.schedule.progress(i as f64 / (frames - 1) as f64);
            (part.angle_deg.to_radians() * s, part.distance * s)
        })
        .collect()
}

fn part_axis(part: &PartSpec) -> Option<ScrewAxis> {
    part.axis.as_ref().map(|a| {
        ScrewAxis::new(
            Unit::new_normalize(Vec3::from(a.direction)),
            Vec3::from(a.position),
        )
    })
}

pub fn generate(spec: &SceneSpec) -> Result<LabeledScene> {
    spec.validate()?;
    let n = spec.frames;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut first = BTreeMap::new();
    first.insert(
        0u32,
        PointCloud::new(sample_shape(
            &mut rng,
            &spec.background.shape,
            &spec.background.pose,
            spec.background.points,
        )?),
    );
    for (i, part) in spec.parts.iter().enumerate() {
        let pts = sample_shape(&mut rng, &part.shape, &part.pose, part.points)?;
        first.insert(i as u32 + 1, PointCloud::new(pts));
    }

    let mut truth_parts = Vec::new();
    let mut clean: Vec<BTreeMap<u32, PointCloud>> = vec![BTreeMap::new(); n];
    for (&label, cloud) in &first {
        let part = (label > 0).then(|| &spec.parts[label as usize - 1]);
        let axis = part.and_then(part_axis);
        let values = part.map(|p| schedule_values(p, n));
        for (f, frame) in clean.iter_mut().enumerate() {
            let moved = match (&axis, &values) {
                (Some(axis), Some(values)) if f > 0 => transform_cloud(
                    &screw_to_transform(&ScrewMotion {
                        axis: *axis,
                        angle: values[f].0,
                        distance: values[f].1,
                    }),
                    cloud,
                ),
                _ => cloud.clone(),
            };
            frame.insert(label, moved);
        }
        if let (Some(part), Some(values)) = (part, values) {
            let deltas = |pick: fn(&(f64, f64)) -> f64| -> Vec<f64> {
                values.windows(2).map(|w| pick(&w[1]) - pick(&w[0])).collect()
            };
            let moving = part.kind != PartKind::StaticOutlier;
            truth_parts.push(GroundTruthPart {
                label,
                motion_type: part.kind.motion_type(),
                axis: if moving { axis } else { None },
                delta_alpha: moving.then(|| deltas(|v| v.1)),
                delta_phi: moving.then(|| deltas(|v| v.0)),
            });
        }
    }

    if spec.noise > 0.0 {
        let sigmas: BTreeMap<u32, f64> = first
            .iter()
            .map(|(&l, c)| Ok((l, spec.noise * enclosing_radius(c)?)))
            .collect::<Result<_>>()?;
        for frame in clean.iter_mut() {
            for (label, cloud) in frame.iter_mut() {
                let normal = Normal::new(0.0, sigmas[label]).expect("finite sigma");
                for p in cloud.points.iter_mut() {
                    *p += Vec3::new(
                        normal.sample(&mut rng),
                        normal.sample(&mut rng),
                        normal.sample(&mut rng),
                    );
                }
            }
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("name".to_string(), spec.name.clone());
    metadata.insert("seed".to_string(), spec.seed.to_string());
    metadata.insert("noise".to_string(), spec.noise.to_string());
    let sequence = SceneSequence {
        frames: clean
            .into_iter()
            .enumerate()
            .map(|(i, parts)| FrameData { index: i + 1, parts })
            .collect(),
        units: "m".into(),
        metadata,
        corresponded: true,
    };
    sequence.validate()?;
    Ok(LabeledScene {
        sequence,
        truth: GroundTruth {
            parts: truth_parts,
            point_labels: None,
        },
    })
}

/// Largest deviation of a noiseless scene from the scheduled motion,
/// recomputed with an explicit Rodrigues formula.
pub fn exactness_error(spec: &SceneSpec, scene: &LabeledScene) -> f64 {
    let first = &scene.sequence.frames[0];
    let mut worst: f64 = 0.0;
    for (i, part) in spec.parts.iter().enumerate() {
        let label = i as u32 + 1;
        let values = schedule_values(part, spec.frames);
        let (r, q) = match &part.axis {
            Some(a) => (Vec3::from(a.direction).normalize(), Vec3::from(a.position)),
            None => (Vec3::z(), Vec3::zeros()),
        };
        for (f, frame) in scene.sequence.frames.iter().enumerate() {
            let (angle, distance) = values[f];
            let (s, c) = angle.sin_cos();
            for (p0, p) in first.parts[&label].points.iter().zip(&frame.parts[&label].points) {
                let v = p0 - q;
                let expected =
                    v * c + r.cross(&v) * s + r * r.dot(&v) * (1.0 - c) + q + r * distance;
                worst = worst.max((expected - p).amax());
            }
        }
    }
    worst
}

fn panel(width: f64, height: f64) -> Shape {
    Shape::Panel {
        width,
        height,
        thickness: 0.03,
    }
}

#[allow(clippy::too_many_arguments)]
fn moving(
    kind: PartKind,
    shape: Shape,
    pose: Pose,
    points: usize,
    direction: [f64; 3],
    position: [f64; 3],
    angle_deg: f64,
    distance: f64,
    schedule: Schedule,
) -> PartSpec {
    PartSpec {
        kind,
        shape,
        pose,
        points,
        axis: Some(AxisSpec {
            direction,
            position,
        }),
        angle_deg,
        distance,
        schedule,
    }
}

fn outlier(shape: Shape, pose: Pose, points: usize) -> PartSpec {
    PartSpec {
        kind: PartKind::StaticOutlier,
        shape,
        pose,
        points,
        axis: None,
        angle_deg: 0.0,
        distance: 0.0,
        schedule: Schedule::Linear,
    }
}

fn background(shape: Shape, pose: Pose, points: usize) -> BackgroundSpec {
    BackgroundSpec {
        shape,
        pose,
        points,
    }
}

fn scene(name: &str, frames: usize, seed: u64, bg: BackgroundSpec, parts: Vec<PartSpec>) -> SceneSpec {
    SceneSpec {
        name: name.into(),
        frames,
        noise: 0.0,
        seed,
        background: bg,
        parts,
    }
}

/// A single hinged door, 60° sweep.
pub fn door_spec() -> SceneSpec {
    scene(
        "door",
        30,
        11,
        background(
            Shape::Box {
                size: [0.15, 0.2, 2.1],
            },
            Pose::at(-0.6, 0.0, 1.05),
            400,
        ),
        vec![moving(
            PartKind::R,
            panel(1.0, 2.0),
            Pose::at(0.0, 0.0, 1.0),
            500,
            [0.0, 0.0, 1.0],
            [-0.5, 0.0, 0.0],
            60.0,
            0.0,
            Schedule::Ease,
        )],
    )
}

fn lift_chair(name: &str, kind: PartKind, angle_deg: f64, distance: f64, seed: u64) -> SceneSpec {
    let seat = Shape::Composite {
        components: vec![
            Component {
                shape: Shape::Cylinder {
                    radius: 0.25,
                    height: 0.06,
                },
                pose: Pose::at(0.0, 0.0, 0.5),
            },
            Component {
                shape: Shape::Box {
                    size: [0.4, 0.05, 0.4],
                },
                pose: Pose::at(0.0, 0.22, 0.75),
            },
            Component {
                shape: Shape::Cylinder {
                    radius: 0.03,
                    height: 0.4,
                },
                pose: Pose::at(0.0, 0.0, 0.27),
            },
        ],
    };
    scene(
        name,
        20,
        seed,
        background(
            Shape::Cylinder {
                radius: 0.3,
                height: 0.05,
            },
            Pose::at(0.0, 0.0, 0.025),
            300,
        ),
        vec![moving(
            kind,
            seat,
            Pose::default(),
            600,
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
            angle_deg,
            distance,
            Schedule::Ease,
        )],
    )
}

/// Helical lift-chair analog (90° turn while rising 0.2).
pub fn liftchair_spec() -> SceneSpec {
    lift_chair("liftchair", PartKind::RT, 90.0, 0.2, 81)
}

/// Translation-only twin of [`liftchair_spec`].
pub fn liftchair_t_spec() -> SceneSpec {
    lift_chair("liftchair_t", PartKind::T, 0.0, 0.2, 82)
}

/// Rotation-only twin of [`liftchair_spec`].
pub fn liftchair_r_spec() -> SceneSpec {
    lift_chair("liftchair_r", PartKind::R, 90.0, 0.0, 83)
}

fn drawer_box() -> Shape {
    Shape::Box {
        size: [0.5, 0.45, 0.2],
    }
}

fn cabinet() -> BackgroundSpec {
    background(
        Shape::Box {
            size: [0.6, 0.5, 0.8],
        },
        Pose::at(0.0, 0.0, 0.4),
        500,
    )
}

/// The fixed oracle suite: R scenes with one to two parts, T scenes, the
/// lift-chair triplet and two static-outlier scenes.
pub fn builtin_suite() -> Vec<SceneSpec> {
    let fridge = scene(
        "fridge",
        20,
        1,
        background(
            Shape::Box {
                size: [0.7, 0.7, 1.8],
            },
            Pose::at(0.0, 0.0, 0.9),
            500,
        ),
        vec![
            moving(
                PartKind::R,
                panel(0.7, 1.0),
                Pose::at(0.0, -0.37, 1.3),
                400,
                [0.0, 0.0, 1.0],
                [0.35, -0.37, 0.0],
                80.0,
                0.0,
                Schedule::Ease,
            ),
            moving(
                PartKind::R,
                panel(0.7, 0.75),
                Pose::at(0.0, -0.37, 0.4),
                400,
                [0.0, 0.0, 1.0],
                [-0.35, -0.37, 0.0],
                -70.0,
                0.0,
                Schedule::Linear,
            ),
        ],
    );

    let cupboard = scene(
        "cupboard",
        20,
        3,
        background(
            Shape::Box {
                size: [1.0, 0.5, 0.8],
            },
            Pose::at(0.0, 0.0, 0.4),
            500,
        ),
        vec![
            moving(
                PartKind::R,
                panel(0.5, 0.8),
                Pose::at(-0.25, -0.27, 0.4),
                300,
                [0.0, 0.0, 1.0],
                [-0.5, -0.27, 0.0],
                -75.0,
                0.0,
                Schedule::Linear,
            ),
            moving(
                PartKind::R,
                panel(0.5, 0.8),
                Pose::at(0.25, -0.27, 0.4),
                300,
                [0.0, 0.0, 1.0],
                [0.5, -0.27, 0.0],
                75.0,
                0.0,
                Schedule::Ease,
            ),
        ],
    );

    let faucet = scene(
        "faucet",
        15,
        4,
        background(
            Shape::Cylinder {
                radius: 0.05,
                height: 0.3,
            },
            Pose::at(0.0, 0.0, 0.15),
            300,
        ),
        vec![moving(
            PartKind::R,
            Shape::Composite {
                components: vec![
                    Component {
                        shape: Shape::Cylinder {
                            radius: 0.02,
                            height: 0.2,
                        },
                        pose: Pose {
                            translation: [0.1, 0.0, 0.32],
                            axis: [0.0, 1.0, 0.0],
                            angle_deg: 90.0,
                        },
                    },
                    Component {
                        shape: Shape::Box {
                            size: [0.04, 0.04, 0.04],
                        },
                        pose: Pose::at(0.0, 0.0, 0.32),
                    },
                ],
            },
            Pose::default(),
            300,
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
            90.0,
            0.0,
            Schedule::Oscillate,
        )],
    );

    let laptop = scene(
        "laptop",
        20,
        5,
        background(
            Shape::Box {
                size: [0.35, 0.25, 0.02],
            },
            Pose::at(0.0, 0.0, 0.01),
            400,
        ),
        vec![moving(
            PartKind::R,
            Shape::Box {
                size: [0.35, 0.25, 0.01],
            },
            Pose::at(0.0, 0.0, 0.025),
            400,
            [1.0, 0.0, 0.0],
            [0.0, 0.125, 0.025],
            100.0,
            0.0,
            Schedule::Ease,
        )],
    );

    let drawer = scene(
        "drawer",
        20,
        6,
        cabinet(),
        vec![
            moving(
                PartKind::T,
                drawer_box(),
                Pose::at(0.0, -0.05, 0.55),
                400,
                [0.0, -1.0, 0.0],
                [0.0, -0.05, 0.55],
                0.0,
                0.3,
                Schedule::Ease,
            ),
            moving(
                PartKind::T,
                drawer_box(),
                Pose::at(0.0, -0.05, 0.25),
                400,
                [0.0, -1.0, 0.0],
                [0.0, -0.05, 0.25],
                0.0,
                0.2,
                Schedule::Linear,
            ),
        ],
    );

    let flatdoor = scene(
        "flatdoor",
        25,
        7,
        background(
            Shape::Box {
                size: [2.0, 0.1, 0.1],
            },
            Pose::at(0.0, 0.0, 2.0),
            300,
        ),
        vec![moving(
            PartKind::T,
            panel(1.0, 1.9),
            Pose::at(-0.5, 0.0, 1.0),
            500,
            [1.0, 0.0, 0.0],
            [-0.5, 0.0, 1.0],
            0.0,
            0.8,
            Schedule::Linear,
        )],
    );

    let mut outlier_door = door_spec();
    outlier_door.name = "outlier_door".into();
    outlier_door.seed = 12;
    outlier_door.parts.push(outlier(
        Shape::Box {
            size: [0.3, 0.3, 0.3],
        },
        Pose::at(1.0, 0.5, 0.15),
        200,
    ));

    let outlier_drawer = scene(
        "outlier_drawer",
        20,
        13,
        cabinet(),
        vec![
            moving(
                PartKind::T,
                drawer_box(),
                Pose::at(0.0, -0.05, 0.55),
                400,
                [0.0, -1.0, 0.0],
                [0.0, -0.05, 0.55],
                0.0,
                0.3,
                Schedule::Ease,
            ),
            outlier(panel(0.6, 0.3), Pose::at(0.0, 0.27, 0.95), 200),
        ],
    );

    vec![
        fridge,
        door_spec(),
        cupboard,
        faucet,
        laptop,
        drawer,
        flatdoor,
        liftchair_spec(),
        liftchair_t_spec(),
        liftchair_r_spec(),
        outlier_door,
        outlier_drawer,
    ]
}
