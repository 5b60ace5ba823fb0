//! Parallel construction in van Emde Boas and heap layouts.

use super::{Layout, Node, SplitHeuristic, StaticTree, TreeParams};
use crate::error::{KdError, Result};
use crate::parprim::{
    for_each_chunk_mut, map_vec, median_partition, min_max, partition, prefix_sum, SERIAL_CUTOFF,
};
use crate::pointset::PointSet;

/// Placeholder child index, patched once the child's position is known.
const PENDING: u32 = u32::MAX;

/// Smallest power of two that is `>= n`.
pub fn hyperceiling(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(KdError::InvalidArgument("hyperceiling of 0".into()));
    }
    n.checked_next_power_of_two()
        .ok_or_else(|| KdError::InvalidArgument(format!("hyperceiling of {n} overflows")))
}

/// `(top, bottom)` level counts for a subtree of `levels` levels.
pub(crate) fn split_levels(levels: u32) -> (u32, u32) {
    let bottom = (levels.div_ceil(2) as usize).next_power_of_two() as u32;
    (levels - bottom, bottom)
}

/// Number of levels for a subtree over `n` points: enough for leaves of at
/// most `cap` points, but never more leaves than points.
pub(crate) fn levels_for(n: usize, cap: usize) -> u32 {
    if n <= 1 {
        return 1;
    }
    let by_cap = n.div_ceil(cap).next_power_of_two();
    let by_count = 1usize << (usize::BITS - 1 - n.leading_zeros());
    by_cap.min(by_count).trailing_zeros() + 1
}

/// Result of [`choose_split`]: `order[..mid]` go left, `order[mid..]` go right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub dim: usize,
    pub value: f64,
    pub mid: usize,
}

/// Partitions `order` (indices into `points`) around a split plane.
///
/// Starts at dimension `dim` and moves to the next dimension while all keys
/// coincide. Returns `None` when fewer than two points are given or every
/// dimension is degenerate. Both sides of a returned split are non-empty.
pub fn choose_split(
    points: &PointSet,
    order: &mut [u32],
    dim: usize,
    heuristic: SplitHeuristic,
) -> Option<Split> {
    if order.len() < 2 {
        return None;
    }
    let d = points.dim();
    for step in 0..d {
        let axis = (dim + step) % d;
        let key = |&i: &u32| points.coords(i as usize)[axis];
        let (lo, hi) = min_max(order, key)?;
        if lo == hi {
            continue;
        }
        return Some(match heuristic {
            SplitHeuristic::ObjectMedian => {
                let mid = median_partition(order, key);
                let value = order[..mid]
                    .iter()
                    .map(key)
                    .fold(f64::NEG_INFINITY, f64::max);
                Split {
                    dim: axis,
                    value,
                    mid,
                }
            }
            SplitHeuristic::SpatialMedian => {
                let mut value = lo / 2.0 + hi / 2.0;
                if value <= lo {
                    value = hi;
                }
                let mid = partition(order, |i| key(i) < value);
                Split {
                    dim: axis,
                    value,
                    mid,
                }
            }
        });
    }
    None
}

/// A pending child edge out of a top region.
#[derive(Clone, Copy, Debug)]
struct Hook {
    parent: usize,
    right: bool,
    start: usize,
    len: usize,
    depth: usize,
}

fn set_child(node: &mut Node, right: bool, child: u32) {
    match node {
        Node::Internal {
            left, right: r, ..
        } => {
            if right {
                *r = child;
            } else {
                *left = child;
            }
        }
        _ => unreachable!("hook parent must be internal"),
    }
}

fn relocate(node: Node, shift: u32) -> Node {
    match node {
        Node::Internal {
            dim,
            split,
            left,
            right,
            live,
        } => Node::Internal {
            dim,
            split,
            left: left + shift,
            right: right + shift,
            live,
        },
        other => other,
    }
}

/// Takes `rest[start - cursor..][..len]` off the front of `rest`.
fn carve<'a>(rest: &mut &'a mut [u32], cursor: &mut usize, start: usize, len: usize) -> &'a mut [u32] {
    let s = std::mem::take(rest);
    let (_, s) = s.split_at_mut(start - *cursor);
    let (piece, s) = s.split_at_mut(len);
    *rest = s;
    *cursor = start + len;
    piece
}

struct Builder<'a> {
    set: &'a PointSet,
    params: TreeParams,
}

impl Builder<'_> {
    fn split(&self, q: &mut [u32], depth: usize) -> Option<Split> {
        choose_split(self.set, q, depth % self.set.dim(), self.params.heuristic)
    }

    /// Fills the complete `levels`-level region `out` (global offset
    /// `out_base`) and returns one hook per position below it, left to right.
    fn build_top(
        &self,
        q: &mut [u32],
        q_base: usize,
        depth: usize,
        levels: u32,
        out: &mut [Node],
        out_base: usize,
    ) -> Vec<Option<Hook>> {
        if levels == 1 {
            if q.is_empty() {
                out[0] = Node::Vacant;
                return vec![None, None];
            }
            return match self.split(q, depth) {
                Some(s) => {
                    out[0] = Node::Internal {
                        dim: s.dim as u32,
                        split: s.value,
                        left: PENDING,
                        right: PENDING,
                        live: 0,
                    };
                    let hook = |right: bool, start: usize, len: usize| Hook {
                        parent: out_base,
                        right,
                        start,
                        len,
                        depth: depth + 1,
                    };
                    vec![
                        Some(hook(false, q_base, s.mid)),
                        Some(hook(true, q_base + s.mid, q.len() - s.mid)),
                    ]
                }
                None => {
                    out[0] = Node::Leaf {
                        start: q_base as u32,
                        len: q.len() as u32,
                        live: 0,
                    };
                    vec![None, None]
                }
            };
        }

        let (lt, lb) = split_levels(levels);
        let top_size = (1usize << lt) - 1;
        let sub_size = (1usize << lb) - 1;
        let (top_out, bottom_out) = out.split_at_mut(top_size);
        let parallel = q.len() >= SERIAL_CUTOFF;
        let hooks = self.build_top(q, q_base, depth, lt, top_out, out_base);

        let mut tasks = Vec::with_capacity(hooks.len());
        let mut rest_q = q;
        let mut cursor = q_base;
        let mut rest_out = bottom_out;
        for (i, hook) in hooks.iter().enumerate() {
            let (region, tail) = std::mem::take(&mut rest_out).split_at_mut(sub_size);
            rest_out = tail;
            let region_base = out_base + top_size + i * sub_size;
            let sub_q = hook.map(|h| carve(&mut rest_q, &mut cursor, h.start, h.len));
            tasks.push((*hook, sub_q, region, region_base));
        }
        let below = map_vec(tasks, parallel, |(hook, sub_q, region, region_base)| {
            match (hook, sub_q) {
                (Some(h), Some(sq)) => self.build_top(sq, h.start, h.depth, lb, region, region_base),
                _ => {
                    region.fill(Node::Vacant);
                    vec![None; 1 << lb]
                }
            }
        });
        for (i, hook) in hooks.iter().enumerate() {
            if let Some(h) = hook {
                let child = (out_base + top_size + i * sub_size) as u32;
                set_child(&mut top_out[h.parent - out_base], h.right, child);
            }
        }
        below.into_iter().flatten().collect()
    }

    /// Builds a subtree of `levels` levels with indices relative to its root.
    /// Below the top half, each subtree is sized for its own point count.
    fn build_bottom(&self, q: &mut [u32], q_base: usize, depth: usize, levels: u32) -> Vec<Node> {
        if levels == 1 || q.len() <= 1 {
            return vec![Node::Leaf {
                start: q_base as u32,
                len: q.len() as u32,
                live: 0,
            }];
        }
        let (lt, _) = split_levels(levels);
        let top_size = (1usize << lt) - 1;
        let mut nodes = vec![Node::Vacant; top_size];
        let parallel = q.len() >= SERIAL_CUTOFF;
        let hooks: Vec<Hook> = self
            .build_top(q, q_base, depth, lt, &mut nodes, 0)
            .into_iter()
            .flatten()
            .collect();

        let mut tasks = Vec::with_capacity(hooks.len());
        let mut rest_q = q;
        let mut cursor = q_base;
        for h in &hooks {
            tasks.push((*h, carve(&mut rest_q, &mut cursor, h.start, h.len)));
        }
        let cap = self.params.leaf_cap;
        let subs = map_vec(tasks, parallel, |(h, sq)| {
            self.build_bottom(sq, h.start, h.depth, levels_for(h.len, cap))
        });

        let sizes: Vec<usize> = subs.iter().map(Vec::len).collect();
        let (offsets, total) = prefix_sum(&sizes, 0, |a, b| a + b);
        for (h, &off) in hooks.iter().zip(&offsets) {
            set_child(&mut nodes[h.parent], h.right, (top_size + off) as u32);
        }
        nodes.resize(top_size + total, Node::Vacant);

        let mut jobs = Vec::with_capacity(subs.len());
        let mut rest = &mut nodes[top_size..];
        for (sub, &off) in subs.into_iter().zip(&offsets) {
            let (dst, tail) = std::mem::take(&mut rest).split_at_mut(sub.len());
            rest = tail;
            jobs.push((dst, sub, (top_size + off) as u32));
        }
        map_vec(jobs, parallel, |(dst, sub, shift)| {
            for (d, s) in dst.iter_mut().zip(sub) {
                *d = relocate(s, shift);
            }
        });
        nodes
    }

    fn build_heap(
        &self,
        q: &mut [u32],
        q_base: usize,
        i: usize,
        depth: usize,
        levels_left: u32,
        nodes: &mut [Node],
    ) {
        let leaf = Node::Leaf {
            start: q_base as u32,
            len: q.len() as u32,
            live: 0,
        };
        if levels_left == 1 || q.len() <= self.params.leaf_cap {
            nodes[i] = leaf;
            return;
        }
        match self.split(q, depth) {
            None => nodes[i] = leaf,
            Some(s) => {
                nodes[i] = Node::Internal {
                    dim: s.dim as u32,
                    split: s.value,
                    left: (2 * i + 1) as u32,
                    right: (2 * i + 2) as u32,
                    live: 0,
                };
                let (l, r) = q.split_at_mut(s.mid);
                self.build_heap(l, q_base, 2 * i + 1, depth + 1, levels_left - 1, nodes);
                self.build_heap(r, q_base + s.mid, 2 * i + 2, depth + 1, levels_left - 1, nodes);
            }
        }
    }
}

fn check_size(n: usize) {
    assert!(n < u32::MAX as usize, "static trees hold fewer than 2^32 - 1 points");
}

impl StaticTree {
    pub(crate) fn build_veb_set(set: PointSet, params: TreeParams) -> Self {
        let n = set.len();
        if n == 0 {
            return Self::empty(set.dim(), params, Layout::VanEmdeBoas);
        }
        check_size(n);
        let mut order: Vec<u32> = (0..n as u32).collect();
        let nodes = Builder { set: &set, params }.build_bottom(
            &mut order,
            0,
            0,
            levels_for(n, params.leaf_cap),
        );
        Self::assemble(set, &order, nodes, params, Layout::VanEmdeBoas)
    }

    pub(crate) fn build_heap_set(set: PointSet, params: TreeParams) -> Self {
        let n = set.len();
        if n == 0 {
            return Self::empty(set.dim(), params, Layout::Heap);
        }
        check_size(n);
        let levels = levels_for(n, params.leaf_cap);
        let mut nodes = vec![Node::Vacant; (1usize << levels) - 1];
        let mut order: Vec<u32> = (0..n as u32).collect();
        Builder { set: &set, params }.build_heap(&mut order, 0, 0, 0, levels, &mut nodes);
        Self::assemble(set, &order, nodes, params, Layout::Heap)
    }

    /// Stores the points in `order` and fills in bounding boxes and live counts.
    fn assemble(set: PointSet, order: &[u32], mut nodes: Vec<Node>, params: TreeParams, layout: Layout) -> Self {
        const ROWS: usize = 1024;
        let d = set.dim();
        let n = set.len();
        let (src_ids, src_coords) = set.into_raw();
        let mut coords = vec![0.0; n * d];
        let mut ids = vec![0u64; n];
        for_each_chunk_mut(&mut coords, ROWS * d, |b, chunk| {
            for (j, dst) in chunk.chunks_exact_mut(d).enumerate() {
                let s = order[b * ROWS + j] as usize;
                dst.copy_from_slice(&src_coords[s * d..(s + 1) * d]);
            }
        });
        for_each_chunk_mut(&mut ids, ROWS, |b, chunk| {
            for (j, dst) in chunk.iter_mut().enumerate() {
                *dst = src_ids[order[b * ROWS + j] as usize];
            }
        });

        let mut bounds = vec![0.0; nodes.len() * 2 * d];
        for_each_chunk_mut(&mut bounds, 2 * d, |i, b| {
            let (lo, hi) = b.split_at_mut(d);
            match nodes[i] {
                Node::Leaf { start, len, .. } => {
                    lo.fill(f64::INFINITY);
                    hi.fill(f64::NEG_INFINITY);
                    for p in start as usize..(start + len) as usize {
                        for (k, &x) in coords[p * d..(p + 1) * d].iter().enumerate() {
                            lo[k] = lo[k].min(x);
                            hi[k] = hi[k].max(x);
                        }
                    }
                }
                Node::Vacant => {
                    lo.fill(f64::INFINITY);
                    hi.fill(f64::NEG_INFINITY);
                }
                Node::Internal { .. } => {}
            }
        });
        // Children always follow their parent, so a reverse sweep sees them first.
        for i in (0..nodes.len()).rev() {
            match nodes[i] {
                Node::Leaf { len, .. } => nodes[i].set_live(len as usize),
                Node::Internal { left, right, .. } => {
                    let (l, r) = (left as usize, right as usize);
                    let live = nodes[l].live() + nodes[r].live();
                    nodes[i].set_live(live);
                    for k in 0..d {
                        bounds[i * 2 * d + k] =
                            bounds[l * 2 * d + k].min(bounds[r * 2 * d + k]);
                        bounds[i * 2 * d + d + k] =
                            bounds[l * 2 * d + d + k].max(bounds[r * 2 * d + d + k]);
                    }
                }
                Node::Vacant => {}
            }
        }

        Self {
            dim: d,
            params,
            layout,
            nodes,
            bounds,
            coords,
            ids,
            alive: vec![true; n],
            root: Some(0),
            capacity: n,
            live: n,
            bloom: None,
        }
    }
}
