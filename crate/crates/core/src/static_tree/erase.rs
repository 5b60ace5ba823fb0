//! Batch deletion with tombstones and contraction.

use super::{Node, StaticTree};
use crate::error::Result;
use crate::geometry::Point;
use crate::parprim::{join_if, partition, SERIAL_CUTOFF};
use crate::pointset::PointSet;

/// Below this many batch points a subtree is handled serially.
const PAR_BATCH: usize = 64;

/// Raw view of a slice whose elements are mutated from several threads.
struct SharedMut<T> {
    ptr: *mut T,
    len: usize,
}

// SAFETY: the erase recursion hands each node and each leaf range to exactly
// one task, so no element is accessed by two threads at once.
unsafe impl<T: Send> Send for SharedMut<T> {}
unsafe impl<T: Send> Sync for SharedMut<T> {}

impl<T> SharedMut<T> {
    fn new(s: &mut [T]) -> Self {
        Self {
            ptr: s.as_mut_ptr(),
            len: s.len(),
        }
    }

    /// SAFETY: no other live reference to element `i` may exist.
    #[allow(clippy::mut_from_ref)]
    unsafe fn get(&self, i: usize) -> &mut T {
        assert!(i < self.len);
        &mut *self.ptr.add(i)
    }
}

struct EraseCtx<'a> {
    nodes: SharedMut<Node>,
    alive: SharedMut<bool>,
    coords: &'a [f64],
    dim: usize,
    batch: &'a PointSet,
}

impl EraseCtx<'_> {
    /// Erases `idx` (indices into the batch) from subtree `i`. Returns the
    /// index that now stands for the subtree (if any live points remain) and
    /// the number of points removed.
    fn erase(&self, i: u32, idx: &mut [u32]) -> (Option<u32>, usize) {
        if idx.is_empty() {
            return (Some(i), 0);
        }
        // SAFETY: node `i` belongs to this call only; both children are
        // visited by disjoint calls.
        let node = unsafe { self.nodes.get(i as usize) };
        match *node {
            Node::Vacant => (None, 0),
            Node::Leaf { start, len, live } => {
                let mut removed = 0;
                for p in start as usize..(start + len) as usize {
                    // SAFETY: leaf ranges are disjoint and owned by this call.
                    let a = unsafe { self.alive.get(p) };
                    if !*a {
                        continue;
                    }
                    let c = &self.coords[p * self.dim..(p + 1) * self.dim];
                    if idx.iter().any(|&b| self.batch.coords(b as usize) == c) {
                        *a = false;
                        removed += 1;
                    }
                }
                let left = live as usize - removed;
                if left == 0 {
                    *node = Node::Vacant;
                    (None, removed)
                } else {
                    node.set_live(left);
                    (Some(i), removed)
                }
            }
            Node::Internal {
                dim,
                split,
                left,
                right,
                live,
            } => {
                let key = |b: &u32| self.batch.coords(*b as usize)[dim as usize];
                let lt = partition(idx, |b| key(b) < split);
                let eq = partition(&mut idx[lt..], |b| key(b) == split);
                let parallel = idx.len() >= PAR_BATCH && live as usize >= SERIAL_CUTOFF;
                // Points equal to the split value may sit on either side.
                let ((l, lr), (r, rr)) = if eq == 0 {
                    let (il, ir) = idx.split_at_mut(lt);
                    join_if(parallel, || self.erase(left, il), || self.erase(right, ir))
                } else {
                    let mut ir = idx[lt..].to_vec();
                    let il = &mut idx[..lt + eq];
                    join_if(parallel, || self.erase(left, il), || self.erase(right, &mut ir))
                };
                let removed = lr + rr;
                match (l, r) {
                    (Some(l), Some(r)) => {
                        if let Node::Internal {
                            left, right, live, ..
                        } = node
                        {
                            *left = l;
                            *right = r;
                            *live -= removed as u32;
                        }
                        (Some(i), removed)
                    }
                    (Some(only), None) | (None, Some(only)) => {
                        *node = Node::Vacant;
                        (Some(only), removed)
                    }
                    (None, None) => {
                        *node = Node::Vacant;
                        (None, removed)
                    }
                }
            }
        }
    }
}

impl StaticTree {
    /// Removes every live point whose coordinates equal some batch point.
    /// Returns the number of points removed.
    pub fn erase_batch(&mut self, batch: &[Point]) -> Result<usize> {
        if batch.is_empty() {
            return Ok(0);
        }
        let set = PointSet::from_points(batch)?;
        self.erase_set(&set)
    }

    pub fn erase_set(&mut self, batch: &PointSet) -> Result<usize> {
        if batch.is_empty() {
            return Ok(0);
        }
        self.check_dim(batch.dim())?;
        Ok(self.erase_selected(batch, (0..batch.len() as u32).collect()))
    }

    /// Erases the batch points listed in `idx`.
    pub(crate) fn erase_selected(&mut self, batch: &PointSet, mut idx: Vec<u32>) -> usize {
        let Some(root) = self.root else { return 0 };
        if idx.is_empty() {
            return 0;
        }
        let ctx = EraseCtx {
            nodes: SharedMut::new(&mut self.nodes),
            alive: SharedMut::new(&mut self.alive),
            coords: &self.coords,
            dim: self.dim,
            batch,
        };
        let (new_root, removed) = ctx.erase(root, &mut idx);
        self.root = new_root;
        self.live -= removed;
        removed
    }
}

#[cfg(test)]
mod tests {
    use super::super::{SplitHeuristic, TreeParams};
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn grid_points(raw: &[(i32, i32)]) -> Vec<Point> {
        raw.iter()
            .enumerate()
            .map(|(i, &(x, y))| Point::new(i as u64, vec![x as f64, y as f64]).unwrap())
            .collect()
    }

    #[test]
    fn erase_everything_empties_tree() {
        let pts = grid_points(&(0..50).map(|i| (i % 7, i / 7)).collect::<Vec<_>>());
        let mut t = StaticTree::build_veb(&pts, TreeParams::default().with_leaf_cap(2)).unwrap();
        assert_eq!(t.erase_batch(&pts).unwrap(), 50);
        assert!(t.is_empty());
        assert_eq!(t.root(), None);
        t.validate().unwrap();
    }

    #[test]
    fn contraction_promotes_surviving_child() {
        let pts = grid_points(&[(0, 0), (1, 0), (2, 0), (3, 0)]);
        let mut t = StaticTree::build_veb(&pts, TreeParams::default().with_leaf_cap(1)).unwrap();
        t.erase_batch(&pts[..2]).unwrap();
        t.validate().unwrap();
        let root = t.root().unwrap();
        assert_ne!(root, 0);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn erasing_absent_points_is_a_no_op() {
        let pts = grid_points(&[(0, 0), (1, 1), (2, 2)]);
        let mut t = StaticTree::build_veb(&pts, TreeParams::default()).unwrap();
        let other = grid_points(&[(5, 5), (0, 1)]);
        assert_eq!(t.erase_batch(&other).unwrap(), 0);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn duplicates_are_all_removed() {
        let pts = grid_points(&[(1, 1), (1, 1), (1, 1), (2, 2)]);
        let mut t = StaticTree::build_veb(&pts, TreeParams::default().with_leaf_cap(1)).unwrap();
        assert_eq!(t.erase_batch(&pts[..1]).unwrap(), 3);
        assert_eq!(t.collect_live()[0].id(), 3);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let pts = grid_points(&[(1, 1)]);
        let mut t = StaticTree::build_veb(&pts, TreeParams::default()).unwrap();
        assert!(t.erase_batch(&[Point::new(0, vec![1.0]).unwrap()]).is_err());
    }

    proptest! {
        #[test]
        fn erase_matches_multiset_oracle(
            raw in prop::collection::vec((0i32..6, 0i32..6), 1..400),
            del in prop::collection::vec((0i32..6, 0i32..6), 0..60),
            spatial in any::<bool>(),
            heap in any::<bool>(),
        ) {
            let pts = grid_points(&raw);
            let h = if spatial { SplitHeuristic::SpatialMedian } else { SplitHeuristic::ObjectMedian };
            let params = TreeParams::new(h).with_leaf_cap(3);
            let mut t = if heap {
                StaticTree::build_heap(&pts, params).unwrap()
            } else {
                StaticTree::build_veb(&pts, params).unwrap()
            };
            let mut counts: HashMap<(i32, i32), usize> = HashMap::new();
            for &c in &raw {
                *counts.entry(c).or_default() += 1;
            }
            let dels = grid_points(&del);
            let removed = t.erase_batch(&dels).unwrap();
            let mut expect_removed = 0;
            for c in &del {
                expect_removed += counts.remove(c).unwrap_or(0);
            }
            prop_assert_eq!(removed, expect_removed);
            prop_assert!(t.validate().is_ok(), "{:?}", t.validate());
            let mut live: Vec<u64> = t.collect_live().iter().map(Point::id).collect();
            live.sort_unstable();
            let expect: Vec<u64> = raw.iter().enumerate()
                .filter(|(_, c)| counts.contains_key(c))
                .map(|(i, _)| i as u64)
                .collect();
            prop_assert_eq!(live, expect);
        }
    }
}
