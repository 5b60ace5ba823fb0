//! Points, axis-aligned boxes and the distance predicates used for pruning.
//!
//! All distances are squared Euclidean distances. Coordinates are summed in
//! dimension order so that every code path (tree search, brute force) produces
//! bit-identical values for the same pair of points.

use crate::error::{KdError, Result};

/// A `d`-dimensional point with a stable identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    id: u64,
    coords: Vec<f64>,
}

impl Point {
    /// Creates a point, rejecting empty or non-finite coordinate vectors.
    pub fn new(id: u64, coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(KdError::ZeroDimension);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(KdError::NonFinite { id });
        }
        Ok(Self { id, coords })
    }

    #[inline]
    pub fn id(&self) -> u64 {
        self.id
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// `Σ (a[c] - b[c])²` over the shared dimensions.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

/// Checked variant of [`squared_distance`] for points of possibly different dimension.
pub fn point_distance2(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(KdError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(squared_distance(a.coords(), b.coords()))
}

/// Bit pattern used to hash and compare coordinates. Folds `-0.0` into `0.0`
/// so that coordinates equal under `==` always share a key.
#[inline]
pub fn canonical_bits(x: f64) -> u64 {
    (x + 0.0).to_bits()
}

/// How a ball around a query point relates to a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxRelation {
    /// Every point of the box is farther than the radius.
    Disjoint,
    /// Every point of the box is within the radius.
    Contained,
    Intersecting,
}

/// Smallest squared distance from `q` to the box `[lo, hi]`.
#[inline]
pub fn min_distance2(lo: &[f64], hi: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for c in 0..q.len() {
        let t = if q[c] < lo[c] {
            lo[c] - q[c]
        } else if q[c] > hi[c] {
            q[c] - hi[c]
        } else {
            0.0
        };
        acc += t * t;
    }
    acc
}

/// Largest squared distance from `q` to any point of the box `[lo, hi]`.
#[inline]
pub fn max_distance2(lo: &[f64], hi: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for c in 0..q.len() {
        let t = (q[c] - lo[c]).abs().max((hi[c] - q[c]).abs());
        acc += t * t;
    }
    acc
}

/// Classifies the box `[lo, hi]` against the closed ball of squared radius `r2`
/// around `center`. An empty box (any `lo > hi`) is always disjoint.
#[inline]
pub fn box_sphere_relation(lo: &[f64], hi: &[f64], center: &[f64], r2: f64) -> BoxRelation {
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return BoxRelation::Disjoint;
    }
    if min_distance2(lo, hi, center) > r2 {
        BoxRelation::Disjoint
    } else if max_distance2(lo, hi, center) <= r2 {
        BoxRelation::Contained
    } else {
        BoxRelation::Intersecting
    }
}

/// Axis-aligned bounding box. The empty box has `lo = +inf`, `hi = -inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn empty(dim: usize) -> Self {
        Self {
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        }
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(KdError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(KdError::InvalidArgument(
                "box lower corner exceeds upper corner".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn of_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut b = Self::empty(dim);
        for p in points {
            b.extend(p);
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn extend(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim());
        for ((lo, hi), &x) in self.lo.iter_mut().zip(self.hi.iter_mut()).zip(p) {
            *lo = lo.min(x);
            *hi = hi.max(x);
        }
    }

    pub fn union(&mut self, other: &BoundingBox) {
        for c in 0..self.dim() {
            self.lo[c] = self.lo[c].min(other.lo[c]);
            self.hi[c] = self.hi[c].max(other.hi[c]);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(c, x)| self.lo[c] <= *x && *x <= self.hi[c])
    }

    pub fn sphere_relation(&self, center: &[f64], r2: f64) -> Result<BoxRelation> {
        if center.len() != self.dim() {
            return Err(KdError::DimensionMismatch {
                expected: self.dim(),
                got: center.len(),
            });
        }
        if r2.is_nan() || r2 < 0.0 {
            return Err(KdError::InvalidArgument(format!(
                "squared radius must be non-negative, got {r2}"
            )));
        }
        Ok(box_sphere_relation(&self.lo, &self.hi, center, r2))
    }
}
