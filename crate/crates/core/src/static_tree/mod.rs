//! Static k-d tree stored in one contiguous node array.
//!
//! Trees are built once, either in a recursive van Emde Boas layout (the
//! static levels of the log structure) or in a binary-heap layout (the small
//! buffer tree). After construction the only mutation is batch deletion,
//! which tombstones points and contracts internal nodes left with a single
//! live child. Child links are stored explicitly because contraction rewires
//! them.

mod build;
mod erase;
mod search;

pub use build::{choose_split, hyperceiling, Split};

use crate::bloom::{BloomFilter, DEFAULT_BITS_PER_KEY, DEFAULT_HASHES};
use crate::error::{KdError, Result};
use crate::geometry::Point;
use crate::index::{check_k, check_queries, KnnResult};
use crate::knnbuf::KnnBuffer;
use crate::parprim::{for_each_mut, join_if, SERIAL_CUTOFF};
use crate::pointset::PointSet;

/// Maximum number of points in a leaf (unless all of its points coincide).
pub const LEAF_CAP: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SplitHeuristic {
    /// Split at the median coordinate; both halves differ by at most one point.
    #[default]
    ObjectMedian,
    /// Split at the midpoint of the coordinate range.
    SpatialMedian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    VanEmdeBoas,
    /// Children of node `i` at `2i + 1` and `2i + 2`.
    Heap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    pub heuristic: SplitHeuristic,
    pub leaf_cap: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            heuristic: SplitHeuristic::ObjectMedian,
            leaf_cap: LEAF_CAP,
        }
    }
}

impl TreeParams {
    pub fn new(heuristic: SplitHeuristic) -> Self {
        Self {
            heuristic,
            ..Self::default()
        }
    }

    pub fn with_leaf_cap(mut self, leaf_cap: usize) -> Self {
        assert!(leaf_cap >= 1);
        self.leaf_cap = leaf_cap;
        self
    }
}

/// One slot of the node array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    /// Unused slot (never built, or removed by deletion).
    Vacant,
    /// Live points of `left` have `coord[dim] <= split`, those of `right` have
    /// `coord[dim] >= split`.
    Internal {
        dim: u32,
        split: f64,
        left: u32,
        right: u32,
        live: u32,
    },
    /// Points `start..start + len` of the tree's point storage.
    Leaf { start: u32, len: u32, live: u32 },
}

impl Node {
    pub fn live(&self) -> usize {
        match *self {
            Node::Vacant => 0,
            Node::Internal { live, .. } | Node::Leaf { live, .. } => live as usize,
        }
    }

    fn set_live(&mut self, n: usize) {
        match self {
            Node::Vacant => debug_assert_eq!(n, 0),
            Node::Internal { live, .. } | Node::Leaf { live, .. } => *live = n as u32,
        }
    }
}

#[derive(Debug)]
pub struct StaticTree {
    dim: usize,
    params: TreeParams,
    layout: Layout,
    nodes: Vec<Node>,
    /// `2 * dim` values per node: lower corner then upper corner.
    bounds: Vec<f64>,
    coords: Vec<f64>,
    ids: Vec<u64>,
    alive: Vec<bool>,
    root: Option<u32>,
    capacity: usize,
    live: usize,
    bloom: Option<BloomFilter>,
}

impl StaticTree {
    pub fn empty(dim: usize, params: TreeParams, layout: Layout) -> Self {
        Self {
            dim,
            params,
            layout,
            nodes: Vec::new(),
            bounds: Vec::new(),
            coords: Vec::new(),
            ids: Vec::new(),
            alive: Vec::new(),
            root: None,
            capacity: 0,
            live: 0,
            bloom: None,
        }
    }

    /// Builds a van Emde Boas layout tree over `points`.
    pub fn build_veb(points: &[Point], params: TreeParams) -> Result<Self> {
        Ok(Self::build_veb_set(PointSet::from_points(points)?, params))
    }

    /// Builds a heap layout tree over `points`.
    pub fn build_heap(points: &[Point], params: TreeParams) -> Result<Self> {
        Ok(Self::build_heap_set(PointSet::from_points(points)?, params))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of live points.
    #[inline]
    pub fn len(&self) -> usize {
        self.live
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Number of points the tree was built over.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> Option<u32> {
        self.root
    }

    pub fn node_bounds(&self, i: u32) -> (&[f64], &[f64]) {
        let b = &self.bounds[i as usize * 2 * self.dim..(i as usize + 1) * 2 * self.dim];
        b.split_at(self.dim)
    }

    /// `(id, coords, alive)` for every point stored in leaf `i`.
    pub fn leaf_points(&self, i: u32) -> impl Iterator<Item = (u64, &[f64], bool)> + '_ {
        let range = match self.nodes[i as usize] {
            Node::Leaf { start, len, .. } => start as usize..(start + len) as usize,
            _ => 0..0,
        };
        range.map(move |p| (self.ids[p], self.point_coords(p), self.alive[p]))
    }

    #[inline]
    fn point_coords(&self, p: usize) -> &[f64] {
        &self.coords[p * self.dim..(p + 1) * self.dim]
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if self.capacity > 0 && got != self.dim {
            return Err(KdError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Builds the bloom filter over the stored coordinates if it does not exist yet.
    pub fn ensure_bloom(&mut self) -> &BloomFilter {
        if self.bloom.is_none() {
            self.bloom = Some(BloomFilter::from_flat(
                &self.coords,
                self.dim,
                DEFAULT_BITS_PER_KEY,
                DEFAULT_HASHES,
            ));
        }
        self.bloom.as_ref().expect("just built")
    }

    pub fn bloom(&self) -> Option<&BloomFilter> {
        self.bloom.as_ref()
    }

    /// All live points, in leaf order.
    pub fn collect_live(&self) -> Vec<Point> {
        self.collect_live_set().to_points()
    }

    /// Live points gathered in parallel: each subtree writes into the slice
    /// of the output sized by its live count.
    pub fn collect_live_set(&self) -> PointSet {
        let mut ids = vec![0u64; self.live];
        let mut coords = vec![0.0; self.live * self.dim];
        if let Some(root) = self.root {
            self.gather(root, &mut ids, &mut coords);
        }
        PointSet::from_raw(self.dim, ids, coords)
    }

    fn gather(&self, i: u32, ids: &mut [u64], coords: &mut [f64]) {
        match self.nodes[i as usize] {
            Node::Vacant => {}
            Node::Leaf { start, len, .. } => {
                let mut w = 0;
                for p in start as usize..(start + len) as usize {
                    if self.alive[p] {
                        ids[w] = self.ids[p];
                        coords[w * self.dim..(w + 1) * self.dim]
                            .copy_from_slice(self.point_coords(p));
                        w += 1;
                    }
                }
                debug_assert_eq!(w, ids.len());
            }
            Node::Internal { left, right, .. } => {
                let nl = self.nodes[left as usize].live();
                let parallel = ids.len() >= SERIAL_CUTOFF;
                let (il, ir) = ids.split_at_mut(nl);
                let (cl, cr) = coords.split_at_mut(nl * self.dim);
                join_if(
                    parallel,
                    || self.gather(left, il, cl),
                    || self.gather(right, ir, cr),
                );
            }
        }
    }

    /// Exact k-NN for each query, parallel across queries.
    pub fn knn(&self, queries: &[Point], k: usize) -> Result<KnnResult> {
        check_k(k)?;
        if self.capacity > 0 {
            check_queries(self.dim, queries)?;
        }
        let mut out = Vec::with_capacity(queries.len());
        let mut bufs: Vec<KnnBuffer> = (0..queries.len()).map(|_| KnnBuffer::new(k)).collect();
        for_each_mut(&mut bufs, 16, |i, b| self.knn_single(queries[i].coords(), b));
        for mut b in bufs {
            out.push(b.finalize());
        }
        Ok(out)
    }

    /// Checks the structural invariants, returning a description of the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let Some(root) = self.root else {
            return if self.live == 0 {
                Ok(())
            } else {
                Err(format!("no root but live = {}", self.live))
            };
        };
        let live = self.validate_node(root)?;
        if live != self.live {
            return Err(format!("root counts {live} live points, tree says {}", self.live));
        }
        Ok(())
    }

    fn validate_node(&self, i: u32) -> std::result::Result<usize, String> {
        let (lo, hi) = self.node_bounds(i);
        let in_box = |c: &[f64]| (0..self.dim).all(|d| lo[d] <= c[d] && c[d] <= hi[d]);
        match self.nodes[i as usize] {
            Node::Vacant => Err(format!("reachable vacant node {i}")),
            Node::Leaf { live, .. } => {
                let mut n = 0;
                for (_, c, a) in self.leaf_points(i) {
                    if a {
                        n += 1;
                        if !in_box(c) {
                            return Err(format!("leaf {i} box misses a live point"));
                        }
                    }
                }
                if n != live as usize || n == 0 {
                    return Err(format!("leaf {i}: stored live {live}, actual {n}"));
                }
                Ok(n)
            }
            Node::Internal {
                dim,
                split,
                left,
                right,
                live,
            } => {
                if left <= i || right <= i {
                    return Err(format!("node {i} has a child stored before it"));
                }
                for (child, is_left) in [(left, true), (right, false)] {
                    if matches!(self.nodes[child as usize], Node::Vacant) {
                        return Err(format!("internal node {i} has a vacant child"));
                    }
                    let mut bad = false;
                    self.for_each_live(child, &mut |c| {
                        let x = c[dim as usize];
                        bad |= if is_left { x > split } else { x < split };
                        bad |= !in_box(c);
                    });
                    if bad {
                        return Err(format!("node {i}: point on the wrong side of the split or outside the box"));
                    }
                }
                let n = self.validate_node(left)? + self.validate_node(right)?;
                if n != live as usize {
                    return Err(format!("node {i}: stored live {live}, actual {n}"));
                }
                Ok(n)
            }
        }
    }

    fn for_each_live(&self, i: u32, f: &mut impl FnMut(&[f64])) {
        match self.nodes[i as usize] {
            Node::Vacant => {}
            Node::Leaf { .. } => {
                for (_, c, a) in self.leaf_points(i) {
                    if a {
                        f(c);
                    }
                }
            }
            Node::Internal { left, right, .. } => {
                self.for_each_live(left, f);
                self.for_each_live(right, f);
            }
        }
    }
}
