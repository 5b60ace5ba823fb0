use crate::error::{KdError, Result};
use crate::geometry::{box_sphere_relation, squared_distance, BoxRelation, Point};
use crate::index::{check_k, check_queries, DynamicIndex, KnnResult};
use crate::knnbuf::KnnBuffer;
use crate::parprim::{for_each_mut, join_if, partition, SERIAL_CUTOFF};
use crate::pointset::PointSet;
use crate::static_tree::{choose_split, SplitHeuristic, LEAF_CAP};

/// A k-d tree that keeps its spatial partition forever: inserted points are
/// routed to existing leaves (which split locally when they overflow) and
/// deleted points are only tombstoned.
#[derive(Debug)]
pub struct B2Tree {
    dim: usize,
    heuristic: SplitHeuristic,
    leaf_cap: usize,
    root: Option<Box<B2Node>>,
}

#[derive(Debug)]
struct B2Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    live: usize,
    kind: Kind,
}

#[derive(Debug)]
enum Kind {
    Internal {
        dim: usize,
        split: f64,
        left: Box<B2Node>,
        right: Box<B2Node>,
    },
    Leaf {
        ids: Vec<u64>,
        coords: Vec<f64>,
        alive: Vec<bool>,
    },
}

impl B2Tree {
    pub fn new(dim: usize, heuristic: SplitHeuristic) -> Result<Self> {
        Self::with_leaf_cap(dim, heuristic, LEAF_CAP)
    }

    pub fn with_leaf_cap(dim: usize, heuristic: SplitHeuristic, leaf_cap: usize) -> Result<Self> {
        if dim == 0 {
            return Err(KdError::ZeroDimension);
        }
        if leaf_cap == 0 {
            return Err(KdError::InvalidArgument("leaf capacity must be at least 1".into()));
        }
        Ok(Self {
            dim,
            heuristic,
            leaf_cap,
            root: None,
        })
    }

    /// `(dim, split bits)` of every internal node in preorder.
    pub fn split_signature(&self) -> Vec<(usize, u64)> {
        fn walk(n: &B2Node, out: &mut Vec<(usize, u64)>) {
            if let Kind::Internal {
                dim,
                split,
                left,
                right,
            } = &n.kind
            {
                out.push((*dim, split.to_bits()));
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        if let Some(r) = &self.root {
            walk(r, &mut out);
        }
        out
    }

    /// Stored points including tombstones.
    pub fn stored(&self) -> usize {
        fn walk(n: &B2Node) -> usize {
            match &n.kind {
                Kind::Internal { left, right, .. } => walk(left) + walk(right),
                Kind::Leaf { ids, .. } => ids.len(),
            }
        }
        self.root.as_deref().map_or(0, walk)
    }

    fn batch_set(&self, batch: &[Point]) -> Result<PointSet> {
        let set = PointSet::from_points(batch)?;
        if set.dim() != self.dim {
            return Err(KdError::DimensionMismatch {
                expected: self.dim,
                got: set.dim(),
            });
        }
        Ok(set)
    }

    fn ctx<'a>(&self, set: &'a PointSet) -> Ctx<'a> {
        Ctx {
            set,
            dim: self.dim,
            heuristic: self.heuristic,
            leaf_cap: self.leaf_cap,
        }
    }
}

struct Ctx<'a> {
    set: &'a PointSet,
    dim: usize,
    heuristic: SplitHeuristic,
    leaf_cap: usize,
}

impl Ctx<'_> {
    fn leaf(&self, idx: &[u32]) -> B2Node {
        let mut ids = Vec::with_capacity(idx.len());
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            ids.push(self.set.id(i as usize));
            coords.extend_from_slice(self.set.coords(i as usize));
        }
        let alive = vec![true; idx.len()];
        leaf_node(self.dim, ids, coords, alive)
    }

    fn build(&self, idx: &mut [u32], depth: usize) -> B2Node {
        if idx.len() <= self.leaf_cap {
            return self.leaf(idx);
        }
        let Some(s) = choose_split(self.set, idx, depth % self.dim, self.heuristic) else {
            return self.leaf(idx);
        };
        let (l, r) = idx.split_at_mut(s.mid);
        let parallel = l.len() + r.len() >= SERIAL_CUTOFF;
        let (left, right) = join_if(parallel, || self.build(l, depth + 1), || self.build(r, depth + 1));
        internal_node(s.dim, s.value, left, right)
    }

    fn insert(&self, node: &mut B2Node, idx: &mut [u32], depth: usize) {
        if idx.is_empty() {
            return;
        }
        for &i in idx.iter() {
            let c = self.set.coords(i as usize);
            for ((lo, hi), &x) in node.lo.iter_mut().zip(node.hi.iter_mut()).zip(c) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        node.live += idx.len();
        match &mut node.kind {
            Kind::Internal {
                dim,
                split,
                left,
                right,
            } => {
                let (d, v) = (*dim, *split);
                let mid = partition(idx, |&i| self.set.coords(i as usize)[d] < v);
                let (l, r) = idx.split_at_mut(mid);
                let parallel = l.len() + r.len() >= SERIAL_CUTOFF;
                join_if(
                    parallel,
                    || self.insert(left, l, depth + 1),
                    || self.insert(right, r, depth + 1),
                );
            }
            Kind::Leaf { ids, coords, alive } => {
                for &i in idx.iter() {
                    ids.push(self.set.id(i as usize));
                    coords.extend_from_slice(self.set.coords(i as usize));
                    alive.push(true);
                }
                if ids.len() > self.leaf_cap {
                    let local = PointSet::from_raw(self.dim, std::mem::take(ids), std::mem::take(coords));
                    let flags = std::mem::take(alive);
                    *node = split_local(&local, &flags, self.heuristic, self.leaf_cap, depth);
                }
            }
        }
    }

    fn erase(&self, node: &mut B2Node, idx: &mut [u32]) -> usize {
        if idx.is_empty() || node.live == 0 {
            return 0;
        }
        let removed = match &mut node.kind {
            Kind::Internal {
                dim,
                split,
                left,
                right,
            } => {
                let (d, v) = (*dim, *split);
                let key = |i: &u32| self.set.coords(*i as usize)[d];
                let lt = partition(idx, |i| key(i) < v);
                let eq = partition(&mut idx[lt..], |i| key(i) == v);
                let parallel = idx.len() >= 64 && node.live >= SERIAL_CUTOFF;
                let (a, b) = if eq == 0 {
                    let (l, r) = idx.split_at_mut(lt);
                    join_if(parallel, || self.erase(left, l), || self.erase(right, r))
                } else {
                    let mut r = idx[lt..].to_vec();
                    let l = &mut idx[..lt + eq];
                    join_if(parallel, || self.erase(left, l), || self.erase(right, &mut r))
                };
                a + b
            }
            Kind::Leaf { coords, alive, .. } => {
                let mut removed = 0;
                for (p, a) in alive.iter_mut().enumerate() {
                    let c = &coords[p * self.dim..(p + 1) * self.dim];
                    if *a && idx.iter().any(|&i| self.set.coords(i as usize) == c) {
                        *a = false;
                        removed += 1;
                    }
                }
                removed
            }
        };
        node.live -= removed;
        removed
    }
}

fn leaf_node(dim: usize, ids: Vec<u64>, coords: Vec<f64>, alive: Vec<bool>) -> B2Node {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for c in coords.chunks_exact(dim) {
        for k in 0..dim {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    B2Node {
        lo,
        hi,
        live: alive.iter().filter(|&&a| a).count(),
        kind: Kind::Leaf { ids, coords, alive },
    }
}

fn internal_node(dim: usize, split: f64, left: B2Node, right: B2Node) -> B2Node {
    let lo = left.lo.iter().zip(&right.lo).map(|(a, b)| a.min(*b)).collect();
    let hi = left.hi.iter().zip(&right.hi).map(|(a, b)| a.max(*b)).collect();
    B2Node {
        lo,
        hi,
        live: left.live + right.live,
        kind: Kind::Internal {
            dim,
            split,
            left: Box::new(left),
            right: Box::new(right),
        },
    }
}

/// Replaces an overflowing leaf by a subtree over its own points, tombstones included.
fn split_local(
    set: &PointSet,
    alive: &[bool],
    heuristic: SplitHeuristic,
    cap: usize,
    depth: usize,
) -> B2Node {
    fn rec(
        set: &PointSet,
        alive: &[bool],
        idx: &mut [u32],
        h: SplitHeuristic,
        cap: usize,
        depth: usize,
    ) -> B2Node {
        let d = set.dim();
        let make_leaf = |idx: &[u32]| {
            let ids = idx.iter().map(|&i| set.id(i as usize)).collect();
            let coords = idx.iter().flat_map(|&i| set.coords(i as usize).iter().copied()).collect();
            let flags = idx.iter().map(|&i| alive[i as usize]).collect();
            leaf_node(d, ids, coords, flags)
        };
        if idx.len() <= cap {
            return make_leaf(idx);
        }
        match choose_split(set, idx, depth % d, h) {
            None => make_leaf(idx),
            Some(s) => {
                let (l, r) = idx.split_at_mut(s.mid);
                let left = rec(set, alive, l, h, cap, depth + 1);
                let right = rec(set, alive, r, h, cap, depth + 1);
                internal_node(s.dim, s.value, left, right)
            }
        }
    }
    let mut idx: Vec<u32> = (0..set.len() as u32).collect();
    rec(set, alive, &mut idx, heuristic, cap, depth)
}

fn search(n: &B2Node, q: &[f64], buf: &mut KnnBuffer) {
    if n.live == 0 {
        return;
    }
    if buf.is_full() {
        match box_sphere_relation(&n.lo, &n.hi, q, buf.bound()) {
            BoxRelation::Disjoint => return,
            BoxRelation::Contained => return absorb(n, q, buf),
            BoxRelation::Intersecting => {}
        }
    }
    match &n.kind {
        Kind::Leaf { .. } => absorb(n, q, buf),
        Kind::Internal {
            dim,
            split,
            left,
            right,
        } => {
            let (near, far) = if q[*dim] < *split {
                (left, right)
            } else {
                (right, left)
            };
            search(near, q, buf);
            if buf.is_full() {
                search(far, q, buf);
            } else {
                absorb(far, q, buf);
            }
        }
    }
}

fn absorb(n: &B2Node, q: &[f64], buf: &mut KnnBuffer) {
    if n.live == 0 {
        return;
    }
    match &n.kind {
        Kind::Leaf { ids, coords, alive } => {
            let d = q.len();
            for (p, &a) in alive.iter().enumerate() {
                if a {
                    buf.insert(ids[p], squared_distance(q, &coords[p * d..(p + 1) * d]));
                }
            }
        }
        Kind::Internal { left, right, .. } => {
            absorb(left, q, buf);
            absorb(right, q, buf);
        }
    }
}

impl DynamicIndex for B2Tree {
    fn name(&self) -> &'static str {
        "b2"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.root.as_ref().map_or(0, |r| r.live)
    }

    fn insert(&mut self, batch: &[Point]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let set = self.batch_set(batch)?;
        let ctx = self.ctx(&set);
        let mut idx: Vec<u32> = (0..set.len() as u32).collect();
        let root = match self.root.take() {
            None => ctx.build(&mut idx, 0),
            Some(mut r) => {
                ctx.insert(&mut r, &mut idx, 0);
                *r
            }
        };
        self.root = Some(Box::new(root));
        Ok(())
    }

    fn erase(&mut self, batch: &[Point]) -> Result<usize> {
        if batch.is_empty() {
            return Ok(0);
        }
        let set = self.batch_set(batch)?;
        let ctx = self.ctx(&set);
        let mut idx: Vec<u32> = (0..set.len() as u32).collect();
        Ok(match self.root.as_mut() {
            Some(r) => ctx.erase(r, &mut idx),
            None => 0,
        })
    }

    fn knn(&self, queries: &[Point], k: usize) -> Result<KnnResult> {
        check_k(k)?;
        check_queries(self.dim, queries)?;
        let mut bufs: Vec<KnnBuffer> = (0..queries.len()).map(|_| KnnBuffer::new(k)).collect();
        if let Some(root) = &self.root {
            for_each_mut(&mut bufs, 16, |i, b| search(root, queries[i].coords(), b));
        }
        Ok(bufs.iter_mut().map(KnnBuffer::finalize).collect())
    }
}
