//! Single-query k-NN traversal.

use super::{Node, StaticTree};
use crate::geometry::{box_sphere_relation, squared_distance, BoxRelation};
use crate::knnbuf::KnnBuffer;

impl StaticTree {
    /// Adds this tree's contribution to `buf` for query `q`.
    ///
    /// `buf` may already hold candidates from other trees; its bound prunes
    /// the traversal from the start.
    pub fn knn_single(&self, q: &[f64], buf: &mut KnnBuffer) {
        if let Some(root) = self.root {
            self.search(root, q, buf);
        }
    }

    fn search(&self, i: u32, q: &[f64], buf: &mut KnnBuffer) {
        if buf.is_full() {
            let (lo, hi) = self.node_bounds(i);
            match box_sphere_relation(lo, hi, q, buf.bound()) {
                BoxRelation::Disjoint => return,
                BoxRelation::Contained => return self.absorb(i, q, buf),
                BoxRelation::Intersecting => {}
            }
        }
        match self.nodes[i as usize] {
            Node::Vacant => {}
            Node::Leaf { .. } => self.absorb(i, q, buf),
            Node::Internal {
                dim,
                split,
                left,
                right,
                ..
            } => {
                let (near, far) = if q[dim as usize] < split {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, buf);
                if buf.is_full() {
                    self.search(far, q, buf);
                } else {
                    self.absorb(far, q, buf);
                }
            }
        }
    }

    /// Adds every live point of subtree `i` without pruning.
    fn absorb(&self, i: u32, q: &[f64], buf: &mut KnnBuffer) {
        match self.nodes[i as usize] {
            Node::Vacant => {}
            Node::Leaf { start, len, .. } => {
                for p in start as usize..(start + len) as usize {
                    if self.alive[p] {
                        buf.insert(self.ids[p], squared_distance(q, self.point_coords(p)));
                    }
                }
            }
            Node::Internal { left, right, .. } => {
                self.absorb(left, q, buf);
                self.absorb(right, q, buf);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{SplitHeuristic, TreeParams};
    use super::*;
    use crate::geometry::Point;
    use crate::knnbuf::Neighbor;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point], q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .map(|p| Neighbor {
                id: p.id(),
                dist2: squared_distance(q, p.coords()),
            })
            .collect();
        all.sort_by(Neighbor::cmp_rank);
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 5] {
            let pts: Vec<Point> = (0..3000)
                .map(|i| Point::new(i, (0..d).map(|_| rng.gen_range(0.0..50.0)).collect()).unwrap())
                .collect();
            let queries: Vec<Point> = (0..60)
                .map(|i| Point::new(i, (0..d).map(|_| rng.gen_range(-5.0..55.0)).collect()).unwrap())
                .collect();
            for h in [SplitHeuristic::ObjectMedian, SplitHeuristic::SpatialMedian] {
                let veb = StaticTree::build_veb(&pts, TreeParams::new(h)).unwrap();
                let heap = StaticTree::build_heap(&pts, TreeParams::new(h)).unwrap();
                for k in [1, 7] {
                    let a = veb.knn(&queries, k).unwrap();
                    let b = heap.knn(&queries, k).unwrap();
                    for (qi, q) in queries.iter().enumerate() {
                        let want = brute(&pts, q.coords(), k);
                        assert_eq!(a[qi], want);
                        assert_eq!(b[qi], want);
                    }
                }
            }
        }
    }

    #[test]
    fn fewer_points_than_k() {
        let pts: Vec<Point> = (0..3).map(|i| Point::new(i, vec![i as f64]).unwrap()).collect();
        let t = StaticTree::build_veb(&pts, TreeParams::default()).unwrap();
        let r = t.knn(&[Point::new(0, vec![10.0]).unwrap()], 5).unwrap();
        assert_eq!(r[0].iter().map(|n| n.id).collect::<Vec<_>>(), vec![2, 1, 0]);
    }

    #[test]
    fn empty_tree_returns_nothing() {
        let t = StaticTree::build_veb(&[], TreeParams::default()).unwrap();
        let r = t.knn(&[Point::new(0, vec![1.0]).unwrap()], 3).unwrap();
        assert!(r[0].is_empty());
    }

    proptest! {
        #[test]
        fn knn_after_erase_matches_brute(
            raw in prop::collection::vec((0i32..20, 0i32..20), 1..300),
            del_every in 2usize..5,
            qx in -2i32..22, qy in -2i32..22,
            k in 1usize..12,
        ) {
            let pts: Vec<Point> = raw.iter().enumerate()
                .map(|(i, &(x, y))| Point::new(i as u64, vec![x as f64, y as f64]).unwrap())
                .collect();
            let mut t = StaticTree::build_veb(&pts, TreeParams::default().with_leaf_cap(4)).unwrap();
            let dels: Vec<Point> = pts.iter().step_by(del_every).cloned().collect();
            t.erase_batch(&dels).unwrap();
            let survivors: Vec<Point> = pts.iter()
                .filter(|p| !dels.iter().any(|d| d.coords() == p.coords()))
                .cloned().collect();
            let q = [qx as f64, qy as f64];
            let got = t.knn(&[Point::new(0, q.to_vec()).unwrap()], k).unwrap();
            prop_assert_eq!(&got[0], &brute(&survivors, &q, k));
        }
    }
}
