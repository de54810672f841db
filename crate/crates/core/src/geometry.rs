//! Planar vectors, small matrices, convex sets and cones.
//!
//! Convex sets here are tiny (superdifferentials of a function of two
//! variables), so everything is stored as an explicit list of extreme points
//! and every predicate is a direct scan.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the band around the boundary of a convex set inside which
/// membership is reported as indeterminate.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x1: f64,
    pub x2: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x2: 0.0 };

    #[inline]
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// z-component of the planar cross product.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x1 * other.x2 - self.x2 * other.x1
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counterclockwise rotation by a right angle.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.x2, self.x1)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x1 - s * self.x2, s * self.x1 + c * self.x2)
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-300 && n.is_finite()).then(|| self / n)
    }

    #[inline]
    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    #[inline]
    pub fn lerp(self, other: Vec2, s: f64) -> Vec2 {
        self + (other - self) * s
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x1 += o.x1;
        self.x2 += o.x2;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x1 -= o.x1;
        self.x2 -= o.x2;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 * s, self.x2 * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 / s, self.x2 / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x2)
    }
}

/// A 2×2 matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };
    pub const ZERO: Mat2 = Mat2 {
        m: [[0.0, 0.0], [0.0, 0.0]],
    };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x1 + self.m[0][1] * v.x2,
            self.m[1][0] * v.x1 + self.m[1][1] * v.x2,
        )
    }

    /// ⟨M v, w⟩
    #[inline]
    pub fn form(&self, v: Vec2, w: Vec2) -> f64 {
        self.mul_vec(v).dot(w)
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d.abs() < 1e-300 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        ))
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }

    pub fn outer(a: Vec2, b: Vec2) -> Mat2 {
        Mat2::new(a.x1 * b.x1, a.x1 * b.x2, a.x2 * b.x1, a.x2 * b.x2)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.m[0][1] - self.m[1][0]).abs() <= tol * (1.0 + self.m[0][1].abs())
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> (f64, f64) {
        let a = self.m[0][0];
        let d = self.m[1][1];
        let b = 0.5 * (self.m[0][1] + self.m[1][0]);
        let mean = 0.5 * (a + d);
        let rad = (0.5 * (a - d)).hypot(b);
        (mean - rad, mean + rad)
    }

    /// Spectral norm of the symmetric part.
    pub fn sym_norm(&self) -> f64 {
        let (lo, hi) = self.sym_eigenvalues();
        lo.abs().max(hi.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

/// Outcome of a membership test that may fall inside the tolerance band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Outside,
    /// The query is within [`BOUNDARY_TOL`] of the relative boundary.
    Indeterminate,
}

impl Membership {
    /// True unless the point is certifiably outside.
    pub fn possibly_inside(self) -> bool {
        !matches!(self, Membership::Outside)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Point,
    Segment,
    Polygon,
}

/// A compact convex subset of the plane given by its extreme points.
///
/// Polygon vertices are counterclockwise and in strictly convex position.
/// Collinear input collapses to a segment, coincident input to a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexSet2D {
    kind: SetKind,
    extreme_points: Vec<Vec2>,
}

impl ConvexSet2D {
    pub fn point(p: Vec2) -> Self {
        ConvexSet2D {
            kind: SetKind::Point,
            extreme_points: vec![p],
        }
    }

    pub fn segment(a: Vec2, b: Vec2) -> Self {
        Self::hull(&[a, b]).expect("two points form a nonempty set")
    }

    /// Convex hull of a nonempty point cloud.
    pub fn hull(points: &[Vec2]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("convex hull of an empty set".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite point in hull input".into()));
        }
        let scale = points
            .iter()
            .map(|p| p.x1.abs().max(p.x2.abs()))
            .fold(1.0_f64, f64::max);
        let dedup_tol = 1e-12 * scale;

        let mut pts: Vec<Vec2> = points.to_vec();
        pts.sort_by(|a, b| a.x1.total_cmp(&b.x1).then(a.x2.total_cmp(&b.x2)));
        let mut unique: Vec<Vec2> = Vec::with_capacity(pts.len());
        for p in pts {
            if !unique.iter().any(|q| q.dist(p) <= dedup_tol) {
                unique.push(p);
            }
        }
        if unique.len() == 1 {
            return Ok(Self::point(unique[0]));
        }

        // Andrew's monotone chain; collinear points are dropped.
        let spread = unique
            .iter()
            .flat_map(|a| unique.iter().map(move |b| a.dist(*b)))
            .fold(0.0_f64, f64::max);
        let cross_tol = 1e-12 * spread * spread;
        let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
        let mut lower: Vec<Vec2> = Vec::new();
        for &p in &unique {
            while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= cross_tol {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Vec2> = Vec::new();
        for &p in unique.iter().rev() {
            while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= cross_tol {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        let hull = lower;

        match hull.len() {
            0 | 1 => Ok(Self::point(unique[0])),
            2 => Ok(ConvexSet2D {
                kind: SetKind::Segment,
                extreme_points: hull,
            }),
            _ => Ok(ConvexSet2D {
                kind: SetKind::Polygon,
                extreme_points: hull,
            }),
        }
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn extreme_points(&self) -> &[Vec2] {
        &self.extreme_points
    }

    /// Affine dimension: 0, 1 or 2.
    pub fn dimension(&self) -> usize {
        match self.kind {
            SetKind::Point => 0,
            SetKind::Segment => 1,
            SetKind::Polygon => 2,
        }
    }

    /// Boundary edges (for a segment, the segment itself; none for a point).
    pub fn edges(&self) -> Vec<(Vec2, Vec2)> {
        let v = &self.extreme_points;
        match self.kind {
            SetKind::Point => Vec::new(),
            SetKind::Segment => vec![(v[0], v[1])],
            SetKind::Polygon => (0..v.len()).map(|i| (v[i], v[(i + 1) % v.len()])).collect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        let v = &self.extreme_points;
        v.iter()
            .flat_map(|a| v.iter().map(move |b| a.dist(*b)))
            .fold(0.0, f64::max)
    }

    /// Points spread along the boundary: extreme points plus `per_edge`
    /// interior samples on every edge.
    pub fn boundary_samples(&self, per_edge: usize) -> Vec<Vec2> {
        let mut out = self.extreme_points.clone();
        for (a, b) in self.edges() {
            for k in 1..=per_edge {
                out.push(a.lerp(b, k as f64 / (per_edge + 1) as f64));
            }
        }
        out
    }

    /// Membership test with an indeterminate band of width [`BOUNDARY_TOL`]
    /// around the relative boundary.
    pub fn contains(&self, q: Vec2) -> Membership {
        let tol = BOUNDARY_TOL;
        let v = &self.extreme_points;
        match self.kind {
            SetKind::Point => {
                if v[0].dist(q) < tol {
                    Membership::Inside
                } else {
                    Membership::Outside
                }
            }
            SetKind::Segment => {
                if segment_distance(v[0], v[1], q) >= tol {
                    Membership::Outside
                } else if v[0].dist(q) < tol || v[1].dist(q) < tol {
                    Membership::Indeterminate
                } else {
                    Membership::Inside
                }
            }
            SetKind::Polygon => {
                let boundary = self
                    .edges()
                    .iter()
                    .map(|&(a, b)| segment_distance(a, b, q))
                    .fold(f64::INFINITY, f64::min);
                if boundary < tol {
                    Membership::Indeterminate
                } else if self.inside_polygon(q) {
                    Membership::Inside
                } else {
                    Membership::Outside
                }
            }
        }
    }

    fn inside_polygon(&self, q: Vec2) -> bool {
        self.edges().iter().all(|&(a, b)| (b - a).cross(q - a) >= 0.0)
    }

    /// Whether `q` lies in the relative interior, at least `tol` away from
    /// the relative boundary. A point is its own relative interior.
    pub fn in_relative_interior(&self, q: Vec2, tol: f64) -> bool {
        let v = &self.extreme_points;
        match self.kind {
            SetKind::Point => v[0].dist(q) <= tol,
            SetKind::Segment => segment_distance(v[0], v[1], q) <= tol && v[0].dist(q) > tol && v[1].dist(q) > tol,
            SetKind::Polygon => {
                self.inside_polygon(q) && self.edges().iter().all(|&(a, b)| segment_distance(a, b, q) > tol)
            }
        }
    }

    /// Nearest point of the set to `q`.
    pub fn project(&self, q: Vec2) -> Vec2 {
        let v = &self.extreme_points;
        match self.kind {
            SetKind::Point => v[0],
            SetKind::Segment => segment_projection(v[0], v[1], q).0,
            SetKind::Polygon => {
                if self.inside_polygon(q) {
                    return q;
                }
                self.edges()
                    .iter()
                    .map(|&(a, b)| segment_projection(a, b, q).0)
                    .min_by(|a, b| a.dist(q).total_cmp(&b.dist(q)))
                    .expect("polygon has edges")
            }
        }
    }

    pub fn distance(&self, q: Vec2) -> f64 {
        self.project(q).dist(q)
    }

    /// min over the set of ⟨p, v⟩.
    pub fn support_min(&self, v: Vec2) -> f64 {
        self.extreme_points
            .iter()
            .map(|p| p.dot(v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Exposed face in direction `v`: the points minimizing ⟨p, v⟩.
    pub fn exposed_face(&self, v: Vec2) -> ConvexSet2D {
        let m = self.support_min(v);
        let tol = 1e-12 * (1.0 + m.abs()).max(self.diameter() * v.norm());
        let face: Vec<Vec2> = self
            .extreme_points
            .iter()
            .copied()
            .filter(|p| p.dot(v) - m <= tol)
            .collect();
        ConvexSet2D::hull(&face).expect("face is nonempty")
    }

    /// Excess of `self` over `other`: sup over p in self of dist(p, other).
    pub fn hausdorff_excess(&self, other: &ConvexSet2D) -> f64 {
        // The distance to a convex set is convex, so its max over a polytope
        // is attained at an extreme point.
        self.extreme_points
            .iter()
            .map(|&p| other.distance(p))
            .fold(0.0, f64::max)
    }
}

/// Distance from `q` to the segment [a, b].
pub fn segment_distance(a: Vec2, b: Vec2, q: Vec2) -> f64 {
    segment_projection(a, b, q).0.dist(q)
}

/// Nearest point of [a, b] to `q` and its parameter in [0, 1].
pub fn segment_projection(a: Vec2, b: Vec2, q: Vec2) -> (Vec2, f64) {
    let d = b - a;
    let len2 = d.norm_sq();
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let s = ((q - a).dot(d) / len2).clamp(0.0, 1.0);
    (a + d * s, s)
}

/// Decide whether the origin lies in `set`, with the indeterminate band.
pub fn hull_contains_origin(set: &ConvexSet2D) -> Membership {
    set.contains(Vec2::ZERO)
}

/// Nearest point of `set` to `q`.
pub fn project_onto_convex(set: &ConvexSet2D, q: Vec2) -> Vec2 {
    set.project(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeSign {
    Plus,
    Minus,
    Both,
}

/// The cone {y : ±⟨y − vertex, axis⟩ ≥ ρ|y − vertex|}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub vertex: Vec2,
    pub axis: Vec2,
    pub amplitude: f64,
    pub sign: ConeSign,
}

impl ConeSpec {
    pub fn new(vertex: Vec2, axis: Vec2, amplitude: f64, sign: ConeSign) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("cone axis {axis} is not a unit vector")));
        }
        if !(amplitude > 0.0 && amplitude < 1.0) {
            return Err(Error::InvalidInput(format!("cone amplitude {amplitude} not in (0, 1)")));
        }
        if !vertex.is_finite() {
            return Err(Error::InvalidInput("non-finite cone vertex".into()));
        }
        Ok(ConeSpec {
            vertex,
            axis,
            amplitude,
            sign,
        })
    }

    /// Like [`ConeSpec::new`] but normalizes the direction first.
    pub fn along(vertex: Vec2, direction: Vec2, amplitude: f64, sign: ConeSign) -> Result<Self> {
        let axis = direction
            .normalized()
            .ok_or_else(|| Error::InvalidInput("zero cone axis".into()))?;
        Self::new(vertex, axis, amplitude, sign)
    }

    /// Normalized slack ⟨y − x, ±θ⟩/|y − x| − ρ; nonnegative iff `y` is in
    /// the cone. The vertex gets `+∞`.
    pub fn margin(&self, y: Vec2) -> f64 {
        let d = y - self.vertex;
        let n = d.norm();
        if n == 0.0 {
            return f64::INFINITY;
        }
        let c = d.dot(self.axis) / n;
        match self.sign {
            ConeSign::Plus => c - self.amplitude,
            ConeSign::Minus => -c - self.amplitude,
            ConeSign::Both => c.abs() - self.amplitude,
        }
    }

    /// Unit directions of the boundary rays (two per one-sided cone).
    pub fn boundary_directions(&self) -> Vec<Vec2> {
        let half = self.amplitude.acos();
        let mut out = Vec::new();
        if matches!(self.sign, ConeSign::Plus | ConeSign::Both) {
            out.push(self.axis.rotate(half));
            out.push(self.axis.rotate(-half));
        }
        if matches!(self.sign, ConeSign::Minus | ConeSign::Both) {
            out.push((-self.axis).rotate(half));
            out.push((-self.axis).rotate(-half));
        }
        out
    }
}

/// Membership in a cone; the vertex belongs to every cone.
pub fn cone_contains(cone: &ConeSpec, y: Vec2) -> bool {
    let d = y - cone.vertex;
    let proj = d.dot(cone.axis);
    let r = cone.amplitude * d.norm();
    match cone.sign {
        ConeSign::Plus => proj >= r,
        ConeSign::Minus => -proj >= r,
        ConeSign::Both => proj.abs() >= r,
    }
}

/// Closed axis-aligned rectangle used as a working region or search box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Rect {
    pub fn new(lo: Vec2, hi: Vec2) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo.x1 < hi.x1 && lo.x2 < hi.x2) {
            return Err(Error::InvalidInput(format!("degenerate rectangle [{lo}, {hi}]")));
        }
        Ok(Rect { lo, hi })
    }

    /// Square of half-width `r` centred at `c`.
    pub fn around(c: Vec2, r: f64) -> Self {
        Rect {
            lo: c - Vec2::new(r, r),
            hi: c + Vec2::new(r, r),
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        x.x1 >= self.lo.x1 && x.x1 <= self.hi.x1 && x.x2 >= self.lo.x2 && x.x2 <= self.hi.x2
    }

    pub fn center(&self) -> Vec2 {
        self.lo.lerp(self.hi, 0.5)
    }

    pub fn width(&self) -> f64 {
        self.hi.x1 - self.lo.x1
    }

    pub fn height(&self) -> f64 {
        self.hi.x2 - self.lo.x2
    }

    /// Distance from an interior point to the boundary.
    pub fn inner_distance(&self, x: Vec2) -> f64 {
        (x.x1 - self.lo.x1)
            .min(self.hi.x1 - x.x1)
            .min(x.x2 - self.lo.x2)
            .min(self.hi.x2 - x.x2)
    }

    pub fn clamp(&self, x: Vec2) -> Vec2 {
        Vec2::new(x.x1.clamp(self.lo.x1, self.hi.x1), x.x2.clamp(self.lo.x2, self.hi.x2))
    }

    /// Node `(i, j)` of the uniform `n × n` grid covering the rectangle,
    /// boundary included.
    pub fn grid_point(&self, n: usize, i: usize, j: usize) -> Vec2 {
        let d = (n - 1).max(1) as f64;
        Vec2::new(
            self.lo.x1 + self.width() * i as f64 / d,
            self.lo.x2 + self.height() * j as f64 / d,
        )
    }

    /// All nodes of the `n × n` grid, row-major in `i`.
    pub fn grid(&self, n: usize) -> Vec<Vec2> {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.grid_point(n, i, j))
            .collect()
    }
}
