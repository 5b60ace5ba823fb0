//! Flat, row-major point storage used inside the trees and for batches.

use crate::error::{KdError, Result};
use crate::geometry::Point;

/// Points stored contiguously: coordinates of row `i` live at
/// `coords[i * dim .. (i + 1) * dim]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    dim: usize,
    ids: Vec<u64>,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            ids: Vec::with_capacity(n),
            coords: Vec::with_capacity(n * dim),
        }
    }

    pub(crate) fn from_raw(dim: usize, ids: Vec<u64>, coords: Vec<f64>) -> Self {
        debug_assert_eq!(ids.len() * dim, coords.len());
        Self { dim, ids, coords }
    }

    /// Copies `points` into flat storage. All points must share one dimension.
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let dim = points.first().map_or(0, Point::dim);
        let mut set = Self::with_capacity(dim, points.len());
        for p in points {
            set.push(p)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, p: &Point) -> Result<()> {
        if self.is_empty() && self.dim == 0 {
            self.dim = p.dim();
        }
        if p.dim() != self.dim {
            return Err(KdError::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        self.push_raw(p.id(), p.coords());
        Ok(())
    }

    #[inline]
    pub(crate) fn push_raw(&mut self, id: u64, coords: &[f64]) {
        debug_assert_eq!(coords.len(), self.dim);
        self.ids.push(id);
        self.coords.extend_from_slice(coords);
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    #[inline]
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn flat_coords(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn into_raw(self) -> (Vec<u64>, Vec<f64>) {
        (self.ids, self.coords)
    }

    /// Appends all rows of `other`. An empty, dimensionless set adopts `other`'s dimension.
    pub fn append(&mut self, other: &PointSet) {
        if self.is_empty() && self.dim == 0 {
            self.dim = other.dim;
        }
        if other.is_empty() {
            return;
        }
        debug_assert_eq!(self.dim, other.dim);
        self.ids.extend_from_slice(&other.ids);
        self.coords.extend_from_slice(&other.coords);
    }

    /// Splits off rows `[at, len)` into a new set.
    pub fn split_off(&mut self, at: usize) -> PointSet {
        PointSet {
            dim: self.dim,
            ids: self.ids.split_off(at),
            coords: self.coords.split_off(at * self.dim),
        }
    }

    /// Copies rows `[start, end)` into a new set.
    pub fn slice(&self, start: usize, end: usize) -> PointSet {
        PointSet {
            dim: self.dim,
            ids: self.ids[start..end].to_vec(),
            coords: self.coords[start * self.dim..end * self.dim].to_vec(),
        }
    }

    /// Keeps the rows for which `keep(id, coords)` is true, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(u64, &[f64]) -> bool) {
        let d = self.dim;
        let mut w = 0;
        for r in 0..self.len() {
            if keep(self.ids[r], &self.coords[r * d..(r + 1) * d]) {
                if w != r {
                    self.ids[w] = self.ids[r];
                    self.coords.copy_within(r * d..(r + 1) * d, w * d);
                }
                w += 1;
            }
        }
        self.ids.truncate(w);
        self.coords.truncate(w * d);
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> + '_ {
        self.ids.iter().copied().zip(self.coords.chunks_exact(self.dim.max(1)))
    }

    pub fn to_points(&self) -> Vec<Point> {
        self.iter()
            .map(|(id, c)| Point::new(id, c.to_vec()).expect("stored coordinates are finite"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<Point> {
        (0..5)
            .map(|i| Point::new(i, vec![i as f64, -(i as f64)]).unwrap())
            .collect()
    }

    #[test]
    fn round_trip_through_points() {
        let p = pts();
        let set = PointSet::from_points(&p).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.coords(3), &[3.0, -3.0]);
        assert_eq!(set.to_points(), p);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let mut p = pts();
        p.push(Point::new(9, vec![1.0]).unwrap());
        assert!(PointSet::from_points(&p).is_err());
    }

    #[test]
    fn split_append_retain() {
        let mut set = PointSet::from_points(&pts()).unwrap();
        let tail = set.split_off(3);
        assert_eq!(tail.ids(), &[3, 4]);
        set.append(&tail);
        assert_eq!(set.ids(), &[0, 1, 2, 3, 4]);
        set.retain(|id, _| id % 2 == 0);
        assert_eq!(set.ids(), &[0, 2, 4]);
        assert_eq!(set.coords(1), &[2.0, -2.0]);
        assert_eq!(set.slice(1, 3).ids(), &[2, 4]);
    }
}
