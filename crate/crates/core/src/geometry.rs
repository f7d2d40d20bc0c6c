//! SE(3) and screw algebra plus rigid registration of point clouds.
//!
//! Transforms act on points as `p ↦ R·p + t`. A screw motion rotates about
//! an axis line by `angle` and then slides `distance` along the same line,
//! which is the parameterization used by the optimizer.

use nalgebra::{Matrix3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Below this angle a rigid transform is treated as a pure translation.
pub const ANGLE_EPSILON: f64 = 1e-7;

/// Orthonormal 3×3 matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Rodrigues' formula.
    pub fn from_axis_angle(axis: &UnitVec3, angle: f64) -> Self {
        let k = axis.cross_matrix();
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::identity() + k * s + k * k * (1.0 - c))
    }

    /// Wraps a matrix without checking orthonormality. Callers that cannot
    /// guarantee the invariant should use [`Rotation::try_from_matrix`].
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let r = Rotation(m);
        if r.is_valid(1e-9) {
            Ok(r)
        } else {
            Err(Error::DegenerateGeometry(
                "matrix is not a proper rotation".into(),
            ))
        }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let orth = (self.0.transpose() * self.0 - Matrix3::identity()).abs().max();
        orth <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Self::new(r, Vec3::zeros())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Result applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        compose(self, other)
    }

    pub fn inverse(&self) -> RigidTransform {
        invert(self)
    }

    /// Largest absolute entry difference of the 3×4 matrices.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let dr = (self.rotation.matrix() - other.rotation.matrix()).abs().max();
        let dt = (self.translation - other.translation).abs().max();
        dr.max(dt)
    }
}

/// A line in space: unit direction and any point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewAxis {
    pub direction: UnitVec3,
    pub position: Vec3,
}

impl ScrewAxis {
    pub fn new(direction: UnitVec3, position: Vec3) -> Self {
        ScrewAxis {
            direction,
            position,
        }
    }

    /// Point on the line closest to `p`.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        let r = self.direction.into_inner();
        self.position + r * r.dot(&(p - self.position))
    }
}

/// Rotation by `angle` about `axis`, followed by translation of `distance`
/// along the axis direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewMotion {
    pub axis: ScrewAxis,
    pub angle: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<UnitVec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            normals: None,
        }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<UnitVec3>) -> Self {
        debug_assert_eq!(points.len(), normals.len());
        PointCloud {
            points,
            normals: Some(normals),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform::new(
        a.rotation * b.rotation,
        a.rotation.rotate(&b.translation) + a.translation,
    )
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.transpose();
    RigidTransform::new(rt, -rt.rotate(&t.translation))
}

pub fn transform_cloud(t: &RigidTransform, c: &PointCloud) -> PointCloud {
    PointCloud {
        points: c.points.iter().map(|p| t.apply(p)).collect(),
        normals: c.normals.as_ref().map(|ns| {
            ns.iter()
                .map(|n| Unit::new_unchecked(t.rotation.rotate(n)))
                .collect()
        }),
    }
}

pub fn centroid(c: &PointCloud) -> Result<Vec3> {
    if c.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sum = c.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Ok(sum / c.len() as f64)
}

/// Radius of the sphere centered at the centroid that contains every point.
/// Upper-bounds the minimal enclosing sphere by at most a factor of two.
pub fn enclosing_radius(c: &PointCloud) -> Result<f64> {
    let center = centroid(c)?;
    Ok(c.points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max))
}

/// Axis and angle of a rotation, angle in `[0, π]`.
///
/// For the identity the direction is `(0, 0, 1)` and carries no meaning.
/// At angle π the sign of the axis is ambiguous; the largest-magnitude
/// component is made positive.
pub fn rotation_axis_angle(r: &Rotation) -> (UnitVec3, f64) {
    let m = r.matrix();
    // 2·sin(θ)·axis
    let v = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin2 = v.norm();
    let cos2 = m.trace() - 1.0;
    let angle = sin2.atan2(cos2);

    if sin2 == 0.0 && cos2 >= 0.0 {
        return (Vec3::z_axis(), 0.0);
    }
    if cos2 >= 0.0 {
        return (Unit::new_normalize(v), angle);
    }

    // Near π the antisymmetric part vanishes; read the axis from the
    // symmetric part (R + Rᵀ)/2 − cos θ·I = (1 − cos θ)·r·rᵀ.
    let c = cos2 / 2.0;
    let b = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
    let col = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut axis = b.column(col).into_owned().normalize();
    if sin2 > 1e-10 {
        if axis.dot(&v) < 0.0 {
            axis = -axis;
        }
    } else {
        let lead = (0..3)
            .max_by(|&i, &j| axis[i].abs().total_cmp(&axis[j].abs()))
            .unwrap_or(0);
        if axis[lead] < 0.0 {
            axis = -axis;
        }
    }
    (Unit::new_normalize(axis), angle)
}

pub fn screw_to_transform(m: &ScrewMotion) -> RigidTransform {
    let rot = Rotation::from_axis_angle(&m.axis.direction, m.angle);
    let q = m.axis.position;
    let translation = q - rot.rotate(&q) + m.axis.direction.into_inner() * m.distance;
    RigidTransform::new(rot, translation)
}

/// Chasles decomposition of a rigid transform.
///
/// The axis position returned for a rotating transform is the point of the
/// axis line closest to the origin.
pub fn screw_decompose(t: &RigidTransform) -> ScrewMotion {
    let (direction, angle) = rotation_axis_angle(&t.rotation);
    if angle <= ANGLE_EPSILON {
        let norm = t.translation.norm();
        let direction = if norm > 1e-15 {
            Unit::new_normalize(t.translation)
        } else {
            Vec3::z_axis()
        };
        return ScrewMotion {
            axis: ScrewAxis::new(direction, Vec3::zeros()),
            angle: 0.0,
            distance: norm,
        };
    }
    let r = direction.into_inner();
    let distance = r.dot(&t.translation);
    let t_perp = t.translation - r * distance;
    // Minimum-norm solution of (I − R)·q = t⊥ with q ⟂ r.
    let cot_half = 1.0 / (angle / 2.0).tan();
    let position = (t_perp + r.cross(&t_perp) * cot_half) * 0.5;
    ScrewMotion {
        axis: ScrewAxis::new(direction, position),
        angle,
        distance,
    }
}

/// Closed-form least-squares rigid alignment of corresponded point sets
/// (Kabsch). Returns `T` minimizing `Σ‖T·srcᵢ − dstᵢ‖²`.
pub fn kabsch_align(src: &PointCloud, dst: &PointCloud) -> Result<RigidTransform> {
    kabsch_points(&src.points, &dst.points)
}

pub(crate) fn kabsch_points(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DegenerateGeometry(format!(
            "correspondence size mismatch: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 correspondences, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cd = dst.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }

    let svd = h.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= f64::MIN_POSITIVE || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateGeometry(
            "cross-covariance has rank < 2 (points coincide or are collinear)".into(),
        ));
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateGeometry("SVD did not converge".into()));
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rot = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = Rotation::from_matrix_unchecked(rot);
    Ok(RigidTransform::new(rotation, cd - rotation.rotate(&cs)))
}

/// Leaves at or below this size are scanned linearly.
const LEAF_SIZE: usize = 8;

/// Nearest-neighbor index over a fixed point set: an implicit kd-tree over a
/// permutation of the input, split at the median of the widest axis.
pub struct NearestIndex {
    points: Vec<Vec3>,
    /// `order[lo..hi]` holds the points of a subtree; the median sits at
    /// `(lo + hi) / 2` and `axes` records its split dimension.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl NearestIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut index = NearestIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            axes: vec![0; points.len()],
        };
        index.build(0, points.len());
        index
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[lo..hi] {
            min = min.inf(&self.points[i]);
            max = max.sup(&self.points[i]);
        }
        let axis = (max - min).imax();
        let mid = (lo + hi) / 2;
        let pts = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis])
        });
        self.axes[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    fn search(&self, q: &Vec3, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                let d2 = (self.points[i] - q).norm_squared();
                if d2 < best.1 || (d2 == best.1 && i < best.0) {
                    *best = (i, d2);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let i = self.order[mid];
        let d2 = (self.points[i] - q).norm_squared();
        if d2 < best.1 || (d2 == best.1 && i < best.0) {
            *best = (i, d2);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - self.points[i][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, best);
        }
    }

    /// Index of the nearest point and the Euclidean distance to it. Ties go
    /// to the lowest index.
    ///
    /// Panics if the index is empty.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        assert!(!self.points.is_empty(), "nearest-neighbor query on an empty index");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), &mut best);
        (best.0, best.1.sqrt())
    }
}

/// Point-to-point ICP seeded by centroid alignment.
///
/// Stops when the mean residual changes by less than `tol` or after
/// `max_iters` rounds. Returns the transform and the mean nearest-neighbor
/// distance under it; non-convergence is reported through the residual.
pub fn icp_align(
    src: &PointCloud,
    dst: &PointCloud,
    max_iters: usize,
    tol: f64,
) -> Result<(RigidTransform, f64)> {
    let index = NearestIndex::new(&dst.points);
    let seed = centroid(dst)? - centroid(src)?;
    let mut current = RigidTransform::from_translation(seed);

    let residual_of = |t: &RigidTransform, matched: &mut Vec<Vec3>| -> f64 {
        matched.clear();
        let mut sum = 0.0;
        for p in &src.points {
            let q = t.apply(p);
            let (j, d) = index.nearest(&q);
            sum += d;
            matched.push(dst.points[j]);
        }
        sum / src.len() as f64
    };

    let mut matched = Vec::with_capacity(src.len());
    let mut residual = residual_of(&current, &mut matched);
    for _ in 0..max_iters {
        let next = kabsch_points(&src.points, &matched)?;
        let next_residual = residual_of(&next, &mut matched);
        let change = (residual - next_residual).abs();
        current = next;
        residual = next_residual;
        if change < tol {
            break;
        }
    }
    Ok((current, residual))
}

/// Registers `src` onto `dst`: Kabsch when the clouds are corresponded,
/// ICP otherwise.
pub fn register(src: &PointCloud, dst: &PointCloud, corresponded: bool) -> Result<RigidTransform> {
    if corresponded && src.len() == dst.len() {
        kabsch_align(src, dst)
    } else {
        icp_align(src, dst, 100, 1e-10).map(|(t, _)| t)
    }
}
