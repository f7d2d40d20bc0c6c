//! Motion-attribute initialization from the frame pair with the largest
//! motion.
//!
//! Every part starts as `RT`. The axis comes from the screw decomposition of
//! the registered transform when its rotation exceeds `theta_min`, otherwise
//! from the translation direction anchored at the first-frame centroid.

use crate::error::{Error, Result};
use crate::geometry::{
    centroid, enclosing_radius, register, screw_decompose, PointCloud, ScrewAxis, Vec3,
};
use crate::ingest::{MotionType, SceneSequence};

/// Default rotation threshold separating the two initialization branches.
pub const DEFAULT_THETA_MIN: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Above this many frames only pairs `(1, j)` are scanned.
const ALL_PAIRS_MAX_FRAMES: usize = 64;

/// Translations below this fraction of the part radius count as no motion.
const ZERO_MOTION_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionInit {
    pub label: u32,
    pub axis: ScrewAxis,
    /// Always `RT`; the optimizer resolves the type.
    pub assumed_type: MotionType,
    /// Rotation angle of the registered transform.
    pub theta: f64,
    pub translation_norm: f64,
    /// The selected pair showed no measurable motion; the axis is a
    /// placeholder.
    pub zero_motion: bool,
}

fn motion_magnitude(a: &PointCloud, b: &PointCloud, corresponded: bool) -> f64 {
    if corresponded && a.len() == b.len() && !a.is_empty() {
        a.points
            .iter()
            .zip(&b.points)
            .map(|(p, q)| (q - p).norm())
            .sum::<f64>()
            / a.len() as f64
    } else {
        match (centroid(a), centroid(b)) {
            (Ok(ca), Ok(cb)) => (cb - ca).norm(),
            _ => 0.0,
        }
    }
}

/// 1-based frame indices `(i, j)`, `i < j`, with the largest motion between
/// them. Ties keep the earliest pair.
pub fn select_max_motion_pair(part_frames: &[&PointCloud], corresponded: bool) -> (usize, usize) {
    let n = part_frames.len();
    assert!(n >= 2, "need at least two frames");
    let mut best = (1, 2);
    let mut best_mag = f64::NEG_INFINITY;
    let firsts = if n <= ALL_PAIRS_MAX_FRAMES { n - 1 } else { 1 };
    for i in 0..firsts {
        for j in i + 1..n {
            let mag = motion_magnitude(part_frames[i], part_frames[j], corresponded);
            if mag > best_mag {
                best_mag = mag;
                best = (i + 1, j + 1);
            }
        }
    }
    best
}

/// Initializes one part's axis from the registration of `p_i` onto `p_j`.
///
/// Returns `ZeroMotion` when neither branch has anything to work with.
pub fn init_motion_axis(
    label: u32,
    p_i: &PointCloud,
    p_j: &PointCloud,
    p_first: &PointCloud,
    theta_min: f64,
    corresponded: bool,
) -> Result<MotionInit> {
    let transform = register(p_i, p_j, corresponded)?;
    let screw = screw_decompose(&transform);
    let translation_norm = transform.translation.norm();
    let theta = screw.angle;

    let axis = if theta > theta_min {
        screw.axis
    } else {
        let length_epsilon = ZERO_MOTION_FACTOR * enclosing_radius(p_first)?;
        if translation_norm < length_epsilon || translation_norm == 0.0 {
            return Err(Error::ZeroMotion { label });
        }
        ScrewAxis::new(
            nalgebra::Unit::new_normalize(transform.translation),
            centroid(p_first)?,
        )
    };
    Ok(MotionInit {
        label,
        axis,
        assumed_type: MotionType::RT,
        theta,
        translation_norm,
        zero_motion: false,
    })
}

/// Initializes every candidate part of a sequence. Parts without measurable
/// motion get a placeholder axis through their centroid and are flagged.
pub fn initialize_parts(seq: &SceneSequence, theta_min: f64) -> Result<Vec<MotionInit>> {
    seq.part_labels()
        .into_iter()
        .map(|label| {
            let frames = seq.part_frames(label);
            let (i, j) = select_max_motion_pair(&frames, seq.corresponded);
            match init_motion_axis(
                label,
                frames[i - 1],
                frames[j - 1],
                frames[0],
                theta_min,
                seq.corresponded,
            ) {
                Err(Error::ZeroMotion { .. }) => Ok(MotionInit {
                    label,
                    axis: ScrewAxis::new(Vec3::z_axis(), centroid(frames[0])?),
                    assumed_type: MotionType::RT,
                    theta: 0.0,
                    translation_norm: 0.0,
                    zero_motion: true,
                }),
                other => other,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{screw_to_transform, transform_cloud, RigidTransform, ScrewMotion};
    use nalgebra::Unit;
    use std::f64::consts::PI;

    fn slab() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..4 {
                for k in 0..2 {
                    pts.push(Vec3::new(1.2 + 0.1 * i as f64, 0.05 * j as f64, 0.3 * k as f64 + 0.2));
                }
            }
        }
        PointCloud::new(pts)
    }

    fn rotate_about(c: &PointCloud, dir: Vec3, pos: Vec3, angle: f64) -> PointCloud {
        let t = screw_to_transform(&ScrewMotion {
            axis: ScrewAxis::new(Unit::new_normalize(dir), pos),
            angle,
            distance: 0.0,
        });
        transform_cloud(&t, c)
    }

    #[test]
    fn monotone_opening_selects_first_and_last() {
        let base = slab();
        let frames: Vec<PointCloud> = (0..10)
            .map(|i| rotate_about(&base, Vec3::z(), Vec3::x(), 0.1 * i as f64))
            .collect();
        let refs: Vec<&PointCloud> = frames.iter().collect();
        assert_eq!(select_max_motion_pair(&refs, true), (1, 10));
    }

    #[test]
    fn oscillation_selects_extremes() {
        let base = slab();
        let angles: Vec<f64> = (0..12).map(|i| 0.8 * (i as f64 * 0.6).sin()).collect();
        let frames: Vec<PointCloud> = angles
            .iter()
            .map(|&a| rotate_about(&base, Vec3::z(), Vec3::x(), a))
            .collect();
        let refs: Vec<&PointCloud> = frames.iter().collect();
        let got = select_max_motion_pair(&refs, true);
        assert_ne!(got, (1, 12));

        let mut best = (0, 0);
        let mut best_mag = -1.0;
        for i in 0..12 {
            for j in i + 1..12 {
                let m = frames[i]
                    .points
                    .iter()
                    .zip(&frames[j].points)
                    .map(|(p, q)| (p - q).norm())
                    .sum::<f64>()
                    / base.len() as f64;
                if m > best_mag {
                    best_mag = m;
                    best = (i + 1, j + 1);
                }
            }
        }
        assert_eq!(got, best);
        let (lo, hi) = (angles[got.0 - 1].min(angles[got.1 - 1]), angles[got.0 - 1].max(angles[got.1 - 1]));
        assert!(lo < -0.7 && hi > 0.7, "{got:?}");
    }

    #[test]
    fn two_frames_only_pair() {
        let base = slab();
        assert_eq!(select_max_motion_pair(&[&base, &base], true), (1, 2));
    }

    #[test]
    fn long_sequences_scan_from_first_frame() {
        let base = slab();
        // frame 2 and frame 70 are far apart from each other but frame 1
        // pairs dominate the scan
        let frames: Vec<PointCloud> = (0..70)
            .map(|i| {
                let a = match i {
                    1 => -0.5,
                    69 => 0.6,
                    _ => 0.0,
                };
                rotate_about(&base, Vec3::z(), Vec3::x(), a)
            })
            .collect();
        let refs: Vec<&PointCloud> = frames.iter().collect();
        assert_eq!(select_max_motion_pair(&refs, true), (1, 70));
    }

    #[test]
    fn rotational_branch_recovers_axis() {
        let base = slab();
        let moved = rotate_about(&base, Vec3::z(), Vec3::x(), PI / 4.0);
        let init = init_motion_axis(1, &base, &moved, &base, DEFAULT_THETA_MIN, true).unwrap();
        assert_eq!(init.assumed_type, MotionType::RT);
        assert!((init.axis.direction.into_inner() - Vec3::z()).norm() < 1e-6);
        assert!((init.axis.position.x - 1.0).abs() < 1e-6);
        assert!(init.axis.position.y.abs() < 1e-6);
        assert!((init.theta - PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn translational_branch_uses_centroid() {
        let base = slab();
        let moved = transform_cloud(
            &RigidTransform::from_translation(Vec3::new(0.0, 0.2, 0.0)),
            &base,
        );
        let init = init_motion_axis(1, &base, &moved, &base, DEFAULT_THETA_MIN, true).unwrap();
        assert!((init.axis.direction.into_inner() - Vec3::y()).norm() < 1e-9);
        assert!((init.axis.position - centroid(&base).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn identical_clouds_have_zero_motion() {
        let base = slab();
        assert!(matches!(
            init_motion_axis(3, &base, &base, &base, DEFAULT_THETA_MIN, true),
            Err(Error::ZeroMotion { label: 3 })
        ));
    }

    #[test]
    fn branch_switches_at_theta_min() {
        let base = slab();
        let half_deg = 0.5f64.to_radians();
        for k in -5..=5 {
            let angle = DEFAULT_THETA_MIN + k as f64 * half_deg / 5.0;
            if k == 0 {
                continue;
            }
            let moved = rotate_about(&base, Vec3::new(0.0, 0.3, 1.0), Vec3::new(1.0, 0.5, 0.0), angle);
            let init = init_motion_axis(1, &base, &moved, &base, DEFAULT_THETA_MIN, true).unwrap();
            let rotational = (init.axis.direction.into_inner()
                - Vec3::new(0.0, 0.3, 1.0).normalize())
            .norm()
                < 1e-6;
            assert_eq!(rotational, angle > DEFAULT_THETA_MIN, "angle {angle}");
            if !rotational {
                assert!((init.axis.position - centroid(&base).unwrap()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inputs_are_not_mutated() {
        let base = slab();
        let moved = rotate_about(&base, Vec3::z(), Vec3::x(), 0.7);
        let (b0, m0) = (base.clone(), moved.clone());
        let _ = init_motion_axis(1, &base, &moved, &base, DEFAULT_THETA_MIN, true).unwrap();
        assert_eq!(base, b0);
        assert_eq!(moved, m0);
    }
}
