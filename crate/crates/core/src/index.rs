//! Interface shared by the dynamic tree and the baselines.

use crate::error::{KdError, Result};
use crate::geometry::Point;
use crate::knnbuf::Neighbor;

/// Per query, up to `k` neighbours sorted by `(dist2, id)`.
pub type KnnResult = Vec<Vec<Neighbor>>;

/// A point multiset supporting batch updates and batch k-NN queries.
///
/// Points are matched for deletion by coordinates only; every live point with
/// the same coordinates as a batch point is removed.
pub trait DynamicIndex: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Number of live points.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn insert(&mut self, batch: &[Point]) -> Result<()>;
    /// Returns the number of points removed.
    fn erase(&mut self, batch: &[Point]) -> Result<usize>;
    fn knn(&self, queries: &[Point], k: usize) -> Result<KnnResult>;
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(KdError::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn check_queries(dim: usize, queries: &[Point]) -> Result<()> {
    match queries.iter().find(|q| q.dim() != dim) {
        Some(q) => Err(KdError::DimensionMismatch {
            expected: dim,
            got: q.dim(),
        }),
        None => Ok(()),
    }
}
