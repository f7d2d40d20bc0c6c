//! On-disk formats: scene directories, ground truth, and analysis reports.
//!
//! A scene directory holds a `manifest.json` and one ASCII PLY file per
//! frame (`frame_1.ply` .. `frame_N.ply`). Every vertex carries `x y z`,
//! optionally `nx ny nz`, and an integer `part` label where 0 is the static
//! region. Ground truth and reports are JSON documents.
//!
//! Floating-point values are written in shortest round-trip form, so a
//! save/load cycle reproduces every coordinate bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricBlock;
use crate::geometry::{PointCloud, ScrewAxis, Vec3};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MotionType {
    T,
    R,
    RT,
    #[serde(rename = "STATIC")]
    Static,
}

impl MotionType {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionType::T => "T",
            MotionType::R => "R",
            MotionType::RT => "RT",
            MotionType::Static => "STATIC",
        }
    }

    pub fn rotates(&self) -> bool {
        matches!(self, MotionType::R | MotionType::RT)
    }

    pub fn is_moving(&self) -> bool {
        !matches!(self, MotionType::Static)
    }
}

impl std::fmt::Display for MotionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One frame: a point cloud per part label, label 0 being the static region.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameData {
    /// 1-based frame index.
    pub index: usize,
    pub parts: BTreeMap<u32, PointCloud>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSequence {
    pub frames: Vec<FrameData>,
    pub units: String,
    pub metadata: BTreeMap<String, String>,
    /// Point `j` of part `k` is the same physical point in every frame.
    pub corresponded: bool,
}

impl SceneSequence {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Number of candidate motion parts `K`.
    pub fn num_parts(&self) -> u32 {
        self.frames
            .first()
            .and_then(|f| f.parts.keys().next_back().copied())
            .unwrap_or(0)
    }

    /// Candidate motion part labels `1..=K`.
    pub fn part_labels(&self) -> Vec<u32> {
        (1..=self.num_parts()).collect()
    }

    /// The clouds of one part across all frames, in frame order.
    pub fn part_frames(&self, label: u32) -> Vec<&PointCloud> {
        self.frames
            .iter()
            .filter_map(|f| f.parts.get(&label))
            .collect()
    }

    /// Checks the structural invariants a loaded or generated sequence must
    /// satisfy.
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::Consistency(format!(
                "a sequence needs at least 2 frames, found {}",
                self.frames.len()
            )));
        }
        let first = &self.frames[0];
        let vocab: Vec<u32> = first.parts.keys().copied().collect();
        let k = vocab.len() as u32;
        if k < 2 || vocab.iter().enumerate().any(|(i, &l)| l != i as u32) {
            return Err(Error::Consistency(format!(
                "frame {}: labels must be 0..K with K >= 1, found {:?}",
                first.index, vocab
            )));
        }
        for frame in &self.frames {
            let labels: Vec<u32> = frame.parts.keys().copied().collect();
            if labels != vocab {
                let missing: Vec<u32> = vocab.iter().filter(|l| !labels.contains(l)).copied().collect();
                let extra: Vec<u32> = labels.iter().filter(|l| !vocab.contains(l)).copied().collect();
                return Err(Error::Consistency(format!(
                    "frame {}: label vocabulary differs from frame {} (missing {:?}, unexpected {:?})",
                    frame.index, first.index, missing, extra
                )));
            }
            for (label, cloud) in &frame.parts {
                if cloud.is_empty() {
                    return Err(Error::Consistency(format!(
                        "frame {}: part {} has no points",
                        frame.index, label
                    )));
                }
                if self.corresponded && cloud.len() != first.parts[label].len() {
                    return Err(Error::Consistency(format!(
                        "frame {}: part {} has {} points but frame {} has {} (correspondence requires equal counts)",
                        frame.index,
                        label,
                        cloud.len(),
                        first.index,
                        first.parts[label].len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    frames: usize,
    parts: u32,
    units: String,
    correspondence: bool,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index}.ply")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses JSON text, mapping syntax and schema errors to a located
/// `Format` error.
fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::format(path, e.line(), e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn load_sequence(dir: impl AsRef<Path>) -> Result<SceneSequence> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = parse_json(&manifest_path, &read_text(&manifest_path)?)?;
    if manifest.parts < 1 {
        return Err(Error::format(&manifest_path, 1, "`parts` must be at least 1"));
    }

    let mut frames = Vec::with_capacity(manifest.frames);
    for index in 1..=manifest.frames {
        let path = dir.join(frame_file_name(index));
        let parts = read_ply(&path)?;
        frames.push(FrameData { index, parts });
    }
    let seq = SceneSequence {
        frames,
        units: manifest.units,
        metadata: manifest.metadata,
        corresponded: manifest.correspondence,
    };
    seq.validate()?;
    if seq.num_parts() != manifest.parts {
        return Err(Error::Consistency(format!(
            "manifest declares {} parts but frames carry labels 1..{}",
            manifest.parts,
            seq.num_parts()
        )));
    }
    Ok(seq)
}

pub fn save_sequence(seq: &SceneSequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        frames: seq.num_frames(),
        parts: seq.num_parts(),
        units: seq.units.clone(),
        correspondence: seq.corresponded,
        metadata: seq.metadata.clone(),
    };
    write_text(&dir.join(MANIFEST_FILE), &to_json(&manifest))?;
    for frame in &seq.frames {
        let path = dir.join(frame_file_name(frame.index));
        write_text(&path, &write_ply(&path, &frame.parts)?)?;
    }
    Ok(())
}

fn write_ply(path: &Path, parts: &BTreeMap<u32, PointCloud>) -> Result<String> {
    let with_normals = parts.values().all(|c| c.normals.is_some());
    if !with_normals && parts.values().any(|c| c.normals.is_some()) {
        return Err(Error::format(
            path,
            0,
            "either every part or no part of a frame may carry normals",
        ));
    }
    let count: usize = parts.values().map(PointCloud::len).sum();
    let mut out = String::with_capacity(count * 64 + 256);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {count}");
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if with_normals {
        out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    out.push_str("property int part\nend_header\n");
    for (label, cloud) in parts {
        for (i, p) in cloud.points.iter().enumerate() {
            let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
            if let Some(ns) = &cloud.normals {
                let n = ns[i];
                let _ = write!(out, " {} {} {}", n.x, n.y, n.z);
            }
            let _ = writeln!(out, " {label}");
        }
    }
    Ok(out)
}

/// Reads a labeled ASCII PLY frame into per-label clouds, preserving vertex
/// order within each label.
pub fn read_ply(path: &Path) -> Result<BTreeMap<u32, PointCloud>> {
    let text = read_text(path)?;
    parse_ply(path, &text)
}

fn parse_ply(path: &Path, text: &str) -> Result<BTreeMap<u32, PointCloud>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let bad = |line: usize, msg: String| Error::format(path, line, msg);

    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(bad(n, "missing `ply` magic".into())),
        None => return Err(bad(1, "empty file".into())),
    }

    let mut vertex_count: Option<usize> = None;
    let mut columns: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut saw_format = false;
    let mut header_end = None;
    for (n, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", "1.0"] => saw_format = true,
            ["format", other, ..] => {
                return Err(bad(n, format!("unsupported PLY format `{other}`")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", count] => {
                let c = count
                    .parse()
                    .map_err(|_| bad(n, format!("bad vertex count `{count}`")))?;
                vertex_count = Some(c);
                in_vertex = true;
            }
            ["element", name, _] => {
                return Err(bad(n, format!("unsupported element `{name}`")));
            }
            ["property", "list", ..] => {
                return Err(bad(n, "list properties are not supported".into()));
            }
            ["property", _ty, name] if in_vertex => columns.push((*name).to_string()),
            ["end_header"] => {
                header_end = Some(n);
                break;
            }
            _ => return Err(bad(n, format!("unrecognized header line `{line}`"))),
        }
    }
    let header_end = header_end.ok_or_else(|| bad(1, "missing `end_header`".into()))?;
    if !saw_format {
        return Err(bad(header_end, "missing `format ascii 1.0` line".into()));
    }
    let vertex_count =
        vertex_count.ok_or_else(|| bad(header_end, "missing `element vertex`".into()))?;

    let col = |name: &str| columns.iter().position(|c| c == name);
    let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
        return Err(bad(header_end, "vertex element needs x, y, z".into()));
    };
    let ipart = col("part").ok_or_else(|| bad(header_end, "vertex element needs `part`".into()))?;
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => return Err(bad(header_end, "normals need all of nx, ny, nz".into())),
    };

    let mut parts: BTreeMap<u32, PointCloud> = BTreeMap::new();
    let mut read = 0usize;
    let mut values = vec![0.0f64; columns.len()];
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if read == vertex_count {
            return Err(bad(n, format!("data beyond the declared {vertex_count} vertices")));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != columns.len() {
            return Err(bad(
                n,
                format!("expected {} values, found {}", columns.len(), tokens.len()),
            ));
        }
        for (slot, (tok, name)) in values.iter_mut().zip(tokens.iter().zip(&columns)) {
            let v: f64 = tok
                .parse()
                .map_err(|_| bad(n, format!("`{name}`: cannot parse `{tok}`")))?;
            if !v.is_finite() {
                return Err(bad(n, format!("`{name}`: non-finite value `{tok}`")));
            }
            *slot = v;
        }
        let label_tok = tokens[ipart];
        let label: u32 = label_tok
            .parse()
            .map_err(|_| bad(n, format!("`part`: expected a non-negative integer, found `{label_tok}`")))?;
        let point = Vec3::new(values[ix], values[iy], values[iz]);
        let cloud = parts.entry(label).or_insert_with(|| PointCloud {
            points: Vec::new(),
            normals: normal_cols.map(|_| Vec::new()),
        });
        cloud.points.push(point);
        if let Some([a, b, c]) = normal_cols {
            let nrm = Vec3::new(values[a], values[b], values[c]);
            if (nrm.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(bad(n, format!("normal is not unit length (|n| = {})", nrm.norm())));
            }
            if let Some(ns) = cloud.normals.as_mut() {
                ns.push(Unit::new_unchecked(nrm));
            }
        }
        read += 1;
    }
    if read != vertex_count {
        let last = text.lines().count();
        return Err(bad(
            last,
            format!("truncated: header declares {vertex_count} vertices, found {read}"),
        ));
    }
    Ok(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRecord {
    pub direction: [f64; 3],
    pub position: [f64; 3],
}

impl From<&ScrewAxis> for AxisRecord {
    fn from(a: &ScrewAxis) -> Self {
        AxisRecord {
            direction: a.direction.into_inner().into(),
            position: a.position.into(),
        }
    }
}

impl AxisRecord {
    fn to_axis(self, path: &Path) -> Result<ScrewAxis> {
        let d = Vec3::from(self.direction);
        let p = Vec3::from(self.position);
        if !d.iter().chain(p.iter()).all(|v| v.is_finite()) {
            return Err(Error::format(path, 0, "axis has non-finite components"));
        }
        if (d.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::format(
                path,
                0,
                format!("axis direction is not unit length (|r| = {})", d.norm()),
            ));
        }
        Ok(ScrewAxis::new(Unit::new_normalize(d), p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPart {
    pub label: u32,
    pub motion_type: MotionType,
    /// Absent for static parts.
    pub axis: Option<ScrewAxis>,
    pub delta_alpha: Option<Vec<f64>>,
    pub delta_phi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub parts: Vec<GroundTruthPart>,
    /// True label of every frame-1 vertex, in scene file order. When absent,
    /// the true segmentation is the input segmentation with static parts
    /// folded into label 0.
    pub point_labels: Option<Vec<u32>>,
}

impl GroundTruth {
    pub fn part(&self, label: u32) -> Option<&GroundTruthPart> {
        self.parts.iter().find(|p| p.label == label)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthPartRecord {
    label: u32,
    #[serde(rename = "type")]
    motion_type: MotionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<AxisRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_phi: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthRecord {
    parts: Vec<TruthPartRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point_labels: Option<Vec<u32>>,
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let record: TruthRecord = parse_json(path, &read_text(path)?)?;
    let mut parts = Vec::with_capacity(record.parts.len());
    for p in record.parts {
        let axis = match (p.motion_type, p.axis) {
            (MotionType::Static, Some(_)) => {
                return Err(Error::format(
                    path,
                    0,
                    format!("part {}: static parts carry no axis", p.label),
                ))
            }
            (MotionType::Static, None) => None,
            (_, Some(a)) => Some(a.to_axis(path)?),
            (t, None) => {
                return Err(Error::format(
                    path,
                    0,
                    format!("part {}: type {t} requires an axis", p.label),
                ))
            }
        };
        for seq in [&p.delta_alpha, &p.delta_phi].into_iter().flatten() {
            if seq.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(path, 0, format!("part {}: non-finite delta", p.label)));
            }
        }
        parts.push(GroundTruthPart {
            label: p.label,
            motion_type: p.motion_type,
            axis,
            delta_alpha: p.delta_alpha,
            delta_phi: p.delta_phi,
        });
    }
    Ok(GroundTruth {
        parts,
        point_labels: record.point_labels,
    })
}

pub fn save_ground_truth(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let record = TruthRecord {
        parts: truth
            .parts
            .iter()
            .map(|p| TruthPartRecord {
                label: p.label,
                motion_type: p.motion_type,
                axis: p.axis.as_ref().map(AxisRecord::from),
                delta_alpha: p.delta_alpha.clone(),
                delta_phi: p.delta_phi.clone(),
            })
            .collect(),
        point_labels: truth.point_labels.clone(),
    };
    write_text(path.as_ref(), &to_json(&record))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartReport {
    pub label: u32,
    pub motion_type: MotionType,
    pub axis: ScrewAxis,
    pub delta_alpha: Vec<f64>,
    pub delta_phi: Vec<f64>,
    pub total_alpha: f64,
    pub total_phi: f64,
}

/// Condensed loss trace of an optimization run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSummary {
    pub iterations: usize,
    /// Mean loss over the first and last 200 iterations.
    pub initial: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisReport {
    pub parts: Vec<PartReport>,
    pub pruned: Vec<u32>,
    pub loss: Option<LossSummary>,
    pub metrics: Option<MetricBlock>,
}

impl AnalysisReport {
    pub fn part(&self, label: u32) -> Option<&PartReport> {
        self.parts.iter().find(|p| p.label == label)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartRecord {
    label: u32,
    #[serde(rename = "type")]
    motion_type: MotionType,
    axis: AxisRecord,
    delta_alpha: Vec<f64>,
    delta_phi: Vec<f64>,
    total_alpha: f64,
    total_phi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportRecord {
    parts: Vec<PartRecord>,
    pruned: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss: Option<LossSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricBlock>,
}

/// Serializes a report to its canonical text form.
pub fn report_to_string(report: &AnalysisReport) -> String {
    let record = ReportRecord {
        parts: report
            .parts
            .iter()
            .map(|p| PartRecord {
                label: p.label,
                motion_type: p.motion_type,
                axis: AxisRecord::from(&p.axis),
                delta_alpha: p.delta_alpha.clone(),
                delta_phi: p.delta_phi.clone(),
                total_alpha: p.total_alpha,
                total_phi: p.total_phi,
            })
            .collect(),
        pruned: report.pruned.clone(),
        loss: report.loss,
        metrics: report.metrics,
    };
    to_json(&record)
}

pub fn save_report(report: &AnalysisReport, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &report_to_string(report))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<AnalysisReport> {
    let path = path.as_ref();
    let record: ReportRecord = parse_json(path, &read_text(path)?)?;
    let mut parts = Vec::with_capacity(record.parts.len());
    for p in record.parts {
        if p.motion_type == MotionType::Static {
            return Err(Error::format(
                path,
                0,
                format!("part {}: retained parts cannot be STATIC", p.label),
            ));
        }
        let finite = p
            .delta_alpha
            .iter()
            .chain(&p.delta_phi)
            .chain([&p.total_alpha, &p.total_phi])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::format(path, 0, format!("part {}: non-finite value", p.label)));
        }
        parts.push(PartReport {
            label: p.label,
            motion_type: p.motion_type,
            axis: p.axis.to_axis(path)?,
            delta_alpha: p.delta_alpha,
            delta_phi: p.delta_phi,
            total_alpha: p.total_alpha,
            total_phi: p.total_phi,
        });
    }
    let mut seen: Vec<u32> = parts.iter().map(|p| p.label).chain(record.pruned.iter().copied()).collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) || seen.first() == Some(&0) {
        return Err(Error::format(
            path,
            0,
            "retained and pruned labels must be distinct labels >= 1",
        ));
    }
    Ok(AnalysisReport {
        parts,
        pruned: record.pruned,
        loss: record.loss,
        metrics: record.metrics,
    })
}

/// Path of the ground-truth file conventionally stored in a scene directory.
pub fn truth_path(scene_dir: impl AsRef<Path>) -> PathBuf {
    scene_dir.as_ref().join(TRUTH_FILE)
}
