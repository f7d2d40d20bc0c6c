//! Accuracy metrics between an analysis report and ground truth.
//!
//! Parts are matched by label: segmentation is an input, so prediction and
//! truth share one label vocabulary.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NearestIndex, ScrewAxis, Vec3};
use crate::ingest::{AnalysisReport, GroundTruth, MotionType, SceneSequence};

/// Lines closer to parallel than this (|r₁ × r₂|) use the point-to-line
/// distance.
const PARALLEL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricBlock {
    /// Mean axis angle error in degrees over matched moving parts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ae_deg: Option<f64>,
    /// Mean axis line distance over matched R/RT parts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe: Option<f64>,
    pub ta: f64,
    pub iou: f64,
}

/// Angle between two axis lines in degrees, ignoring orientation.
pub fn angle_error(pred: &ScrewAxis, gt: &ScrewAxis) -> f64 {
    let a = pred.direction.into_inner();
    let b = gt.direction.into_inner();
    // atan2 keeps full precision near 0°, where acos does not
    a.cross(&b).norm().atan2(a.dot(&b).abs()).to_degrees()
}

/// Minimum distance between two infinite lines.
pub fn position_error(pred: &ScrewAxis, gt: &ScrewAxis) -> f64 {
    let d1 = pred.direction.into_inner();
    let d2 = gt.direction.into_inner();
    let w = gt.position - pred.position;
    let n = d1.cross(&d2);
    let n_norm = n.norm();
    if n_norm < PARALLEL_EPSILON {
        w.cross(&d1).norm()
    } else {
        w.dot(&n).abs() / n_norm
    }
}

fn check_vocabulary(report: &AnalysisReport, truth: &GroundTruth) -> Result<()> {
    let predicted: BTreeSet<u32> = report
        .parts
        .iter()
        .map(|p| p.label)
        .chain(report.pruned.iter().copied())
        .collect();
    let expected: BTreeSet<u32> = truth.parts.iter().map(|p| p.label).collect();
    if expected.is_empty() {
        return Err(Error::Match("ground truth lists no parts".into()));
    }
    if predicted.is_disjoint(&expected) {
        return Err(Error::Match(format!(
            "report labels {predicted:?} share nothing with ground-truth labels {expected:?}"
        )));
    }
    Ok(())
}

/// Predicted type of a label; pruned or unreported labels count as static.
fn predicted_type(report: &AnalysisReport, label: u32) -> MotionType {
    report
        .part(label)
        .map(|p| p.motion_type)
        .unwrap_or(MotionType::Static)
}

/// Fraction of ground-truth parts whose predicted type matches. A pruned
/// mover is wrong; a retained static outlier is wrong.
pub fn type_accuracy(report: &AnalysisReport, truth: &GroundTruth) -> Result<f64> {
    check_vocabulary(report, truth)?;
    let correct = truth
        .parts
        .iter()
        .filter(|p| predicted_type(report, p.label) == p.motion_type)
        .count();
    Ok(correct as f64 / truth.parts.len() as f64)
}

/// Mean IOU over `labels` of index-aligned label arrays.
pub fn iou_from_labels(pred: &[u32], gt: &[u32], labels: &[u32]) -> f64 {
    assert_eq!(pred.len(), gt.len(), "label arrays must be index-aligned");
    if labels.is_empty() {
        return 1.0;
    }
    let total: f64 = labels
        .iter()
        .map(|&k| {
            let (mut inter, mut union) = (0usize, 0usize);
            for (&p, &g) in pred.iter().zip(gt) {
                let (a, b) = (p == k, g == k);
                inter += (a && b) as usize;
                union += (a || b) as usize;
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    total / labels.len() as f64
}

/// Transfers predicted labels onto ground-truth points by nearest neighbor.
/// Ground-truth points with no prediction within `threshold` get label 0.
pub fn transfer_labels(
    pred_points: &[Vec3],
    pred_labels: &[u32],
    gt_points: &[Vec3],
    threshold: f64,
) -> Vec<u32> {
    if pred_points.is_empty() {
        return vec![0; gt_points.len()];
    }
    let index = NearestIndex::new(pred_points);
    gt_points
        .iter()
        .map(|q| {
            let (j, d) = index.nearest(q);
            if d <= threshold {
                pred_labels[j]
            } else {
                0
            }
        })
        .collect()
}

/// IOU between uncorresponded labeled clouds: predicted labels are moved
/// onto the ground-truth points by nearest neighbor within 1% of the
/// ground-truth scene diameter.
pub fn labeled_cloud_iou(
    pred_points: &[Vec3],
    pred_labels: &[u32],
    gt_points: &[Vec3],
    gt_labels: &[u32],
    labels: &[u32],
) -> f64 {
    let diameter = scene_diameter(gt_points);
    let transferred = transfer_labels(pred_points, pred_labels, gt_points, 0.01 * diameter);
    iou_from_labels(&transferred, gt_labels, labels)
}

/// Twice the largest distance from the centroid.
pub fn scene_diameter(points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let c = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    2.0 * points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
}

/// Frame-1 vertex labels in file order.
pub fn frame_one_labels(seq: &SceneSequence) -> Vec<u32> {
    seq.frames[0]
        .parts
        .iter()
        .flat_map(|(&label, cloud)| std::iter::repeat_n(label, cloud.len()))
        .collect()
}

fn moving_labels(truth: &GroundTruth) -> Vec<u32> {
    truth
        .parts
        .iter()
        .filter(|p| p.motion_type.is_moving())
        .map(|p| p.label)
        .collect()
}

/// Part IOU at point-index level on the first frame. Predicted membership
/// is the input segmentation with pruned labels folded into the static
/// region.
pub fn part_iou(report: &AnalysisReport, truth: &GroundTruth, seq: &SceneSequence) -> Result<f64> {
    check_vocabulary(report, truth)?;
    let input = frame_one_labels(seq);
    let pred: Vec<u32> = input
        .iter()
        .map(|&l| if report.part(l).is_some() { l } else { 0 })
        .collect();
    let gt: Vec<u32> = match &truth.point_labels {
        Some(labels) => {
            if labels.len() != input.len() {
                return Err(Error::Match(format!(
                    "ground truth labels {} points, scene frame 1 has {}",
                    labels.len(),
                    input.len()
                )));
            }
            labels.clone()
        }
        None => input
            .iter()
            .map(|&l| match truth.part(l) {
                Some(p) if p.motion_type.is_moving() => l,
                _ => 0,
            })
            .collect(),
    };
    Ok(iou_from_labels(&pred, &gt, &moving_labels(truth)))
}

/// All metrics for one report. Without the scene, IOU is taken at label
/// level: a retained true mover scores 1 and a pruned one 0.
pub fn evaluate(
    report: &AnalysisReport,
    truth: &GroundTruth,
    seq: Option<&SceneSequence>,
) -> Result<MetricBlock> {
    let ta = type_accuracy(report, truth)?;
    let iou = match seq {
        Some(seq) => part_iou(report, truth, seq)?,
        None => {
            let movers = moving_labels(truth);
            if movers.is_empty() {
                1.0
            } else {
                movers.iter().filter(|&&l| report.part(l).is_some()).count() as f64
                    / movers.len() as f64
            }
        }
    };

    let mut angle_errors = Vec::new();
    let mut position_errors = Vec::new();
    for gt in truth.parts.iter().filter(|p| p.motion_type.is_moving()) {
        let (Some(pred), Some(gt_axis)) = (report.part(gt.label), gt.axis.as_ref()) else {
            continue;
        };
        angle_errors.push(angle_error(&pred.axis, gt_axis));
        if gt.motion_type.rotates() {
            position_errors.push(position_error(&pred.axis, gt_axis));
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(MetricBlock {
        ae_deg: mean(&angle_errors),
        pe: mean(&position_errors),
        ta,
        iou,
    })
}
