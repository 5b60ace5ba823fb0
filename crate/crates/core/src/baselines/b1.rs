use std::collections::HashSet;

use crate::error::{KdError, Result};
use crate::geometry::{canonical_bits, Point};
use crate::index::{DynamicIndex, KnnResult};
use crate::pointset::PointSet;
use crate::static_tree::{SplitHeuristic, StaticTree, TreeParams};

/// A static tree rebuilt from scratch over the live multiset after every update.
#[derive(Debug)]
pub struct B1Tree {
    points: PointSet,
    tree: StaticTree,
    params: TreeParams,
}

impl B1Tree {
    pub fn new(dim: usize, heuristic: SplitHeuristic) -> Result<Self> {
        if dim == 0 {
            return Err(KdError::ZeroDimension);
        }
        let params = TreeParams::new(heuristic);
        Ok(Self {
            points: PointSet::new(dim),
            tree: StaticTree::empty(dim, params, crate::static_tree::Layout::VanEmdeBoas),
            params,
        })
    }

    pub fn tree(&self) -> &StaticTree {
        &self.tree
    }

    fn rebuild(&mut self) {
        self.tree = StaticTree::build_veb_set(self.points.clone(), self.params);
    }

    fn batch_set(&self, batch: &[Point]) -> Result<PointSet> {
        let set = PointSet::from_points(batch)?;
        if set.dim() != self.points.dim() {
            return Err(KdError::DimensionMismatch {
                expected: self.points.dim(),
                got: set.dim(),
            });
        }
        Ok(set)
    }
}

impl DynamicIndex for B1Tree {
    fn name(&self) -> &'static str {
        "b1"
    }

    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn insert(&mut self, batch: &[Point]) -> Result<()> {
        if !batch.is_empty() {
            let set = self.batch_set(batch)?;
            self.points.append(&set);
        }
        self.rebuild();
        Ok(())
    }

    fn erase(&mut self, batch: &[Point]) -> Result<usize> {
        let before = self.points.len();
        if !batch.is_empty() {
            let set = self.batch_set(batch)?;
            let key = |c: &[f64]| c.iter().map(|&x| canonical_bits(x)).collect::<Vec<u64>>();
            let doomed: HashSet<Vec<u64>> = set.iter().map(|(_, c)| key(c)).collect();
            self.points.retain(|_, c| !doomed.contains(&key(c)));
        }
        self.rebuild();
        Ok(before - self.points.len())
    }

    fn knn(&self, queries: &[Point], k: usize) -> Result<KnnResult> {
        crate::index::check_k(k)?;
        crate::index::check_queries(self.points.dim(), queries)?;
        self.tree.knn(queries, k)
    }
}
