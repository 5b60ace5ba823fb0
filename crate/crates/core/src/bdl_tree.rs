//! The log-structured dynamic k-d tree.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{KdError, Result};
use crate::geometry::Point;
use crate::index::{check_k, check_queries, DynamicIndex, KnnResult};
use crate::knnbuf::KnnBuffer;
use crate::parprim::{for_each_mut, map_vec, partition};
use crate::pointset::PointSet;
use crate::static_tree::{SplitHeuristic, StaticTree, TreeParams};

/// Default buffer tree capacity.
pub const DEFAULT_BUFFER_SIZE: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct BdlConfig {
    /// Buffer capacity `X`; slot `i` holds up to `2^i * X` points.
    pub buffer_size: usize,
    pub heuristic: SplitHeuristic,
    /// Prefilter deletions per slot through a bloom filter over its points.
    pub use_bloom: bool,
    /// Slots allocated up front; more are appended as needed.
    pub initial_slots: usize,
}

impl Default for BdlConfig {
    fn default() -> Self {
        Self {
            buffer_size: DEFAULT_BUFFER_SIZE,
            heuristic: SplitHeuristic::ObjectMedian,
            use_bloom: true,
            initial_slots: 0,
        }
    }
}

/// Bookkeeping snapshot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BdlStats {
    pub live: usize,
    /// Bit `i` is set iff slot `i` is occupied.
    pub mask: u64,
    /// Live points per slot, up to the highest occupied slot.
    pub slot_live: Vec<usize>,
    pub buffer_live: usize,
}

#[derive(Debug)]
pub struct BdlTree {
    dim: usize,
    config: BdlConfig,
    buffer: StaticTree,
    slots: Vec<Option<StaticTree>>,
    mask: u64,
    rebuilds: Vec<u64>,
}

impl BdlTree {
    pub fn new(dim: usize, config: BdlConfig) -> Result<Self> {
        if dim == 0 {
            return Err(KdError::ZeroDimension);
        }
        if config.buffer_size == 0 {
            return Err(KdError::InvalidArgument("buffer size must be at least 1".into()));
        }
        let params = TreeParams::new(config.heuristic);
        Ok(Self {
            dim,
            buffer: StaticTree::empty(dim, params, crate::static_tree::Layout::Heap),
            slots: (0..config.initial_slots).map(|_| None).collect(),
            rebuilds: vec![0; config.initial_slots],
            mask: 0,
            config,
        })
    }

    /// A tree holding `points`.
    pub fn build(dim: usize, points: &[Point], config: BdlConfig) -> Result<Self> {
        let mut t = Self::new(dim, config)?;
        t.insert(points)?;
        Ok(t)
    }

    pub fn config(&self) -> &BdlConfig {
        &self.config
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn buffer(&self) -> &StaticTree {
        &self.buffer
    }

    pub fn slot(&self, i: usize) -> Option<&StaticTree> {
        self.slots.get(i).and_then(Option::as_ref)
    }

    /// Nominal capacity of slot `i`.
    pub fn slot_capacity(&self, i: usize) -> usize {
        self.config.buffer_size << i
    }

    /// Number of times each slot has been built.
    pub fn rebuild_counts(&self) -> &[u64] {
        &self.rebuilds
    }

    pub fn stats(&self) -> BdlStats {
        let used = 64 - self.mask.leading_zeros() as usize;
        let slot_live: Vec<usize> = (0..used)
            .map(|i| self.slot(i).map_or(0, StaticTree::len))
            .collect();
        BdlStats {
            live: self.len(),
            mask: self.mask,
            slot_live,
            buffer_live: self.buffer.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len() + self.slots.iter().flatten().map(StaticTree::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every live point (buffer first, then slots in increasing order).
    pub fn collect_live(&self) -> Vec<Point> {
        let mut set = self.buffer.collect_live_set();
        for t in self.slots.iter().flatten() {
            set.append(&t.collect_live_set());
        }
        set.to_points()
    }

    fn params(&self) -> TreeParams {
        TreeParams::new(self.config.heuristic)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(KdError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    pub fn insert(&mut self, batch: &[Point]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let set = PointSet::from_points(batch)?;
        self.check_dim(set.dim())?;
        self.insert_set(set);
        Ok(())
    }

    pub fn insert_set(&mut self, mut batch: PointSet) {
        if batch.is_empty() {
            return;
        }
        assert_eq!(batch.dim(), self.dim, "batch dimension");
        let x = self.config.buffer_size;
        let tail = batch.split_off(batch.len() - batch.len() % x);
        if !tail.is_empty() {
            let mut held = self.buffer.collect_live_set();
            held.append(&tail);
            if held.len() >= x {
                let rest = held.split_off(x);
                batch.append(&held);
                held = rest;
            }
            self.buffer = StaticTree::build_heap_set(held, self.params());
        }
        self.cascade(batch);
        self.restore_half_capacity();
    }

    /// Adds `batch` (a whole number of buffer units) to the slots the way a
    /// binary counter adds `batch.len() / X`: every slot cleared by the carry
    /// hands its points to the slot where that carry chain ends.
    fn cascade(&mut self, batch: PointSet) {
        let x = self.config.buffer_size;
        debug_assert_eq!(batch.len() % x, 0);
        let units = (batch.len() / x) as u64;
        if units == 0 {
            return;
        }
        let old = self.mask;
        let new = old.checked_add(units).expect("slot count exceeds 64");
        let cleared = old & !new;
        let created = new & !old;
        let used = 64 - new.leading_zeros() as usize;
        if self.slots.len() < used {
            self.slots.resize_with(used, || None);
            self.rebuilds.resize(used, 0);
        }

        let taken: Vec<(usize, StaticTree)> = bits(cleared)
            .map(|j| (j, self.slots[j].take().expect("cleared slot was occupied")))
            .collect();
        let mut gathered: Vec<Option<PointSet>> = vec![None; used];
        for (j, set) in map_vec(taken, true, |(j, t)| (j, t.collect_live_set())) {
            gathered[j] = Some(set);
        }

        let mut plans = Vec::new();
        let mut cursor = 0;
        let mut below = 0u64;
        for i in bits(created) {
            let mut set = PointSet::with_capacity(self.dim, x << i);
            let mut merged_units = 0usize;
            for j in bits(cleared & !below & ((1u64 << i) - 1)) {
                set.append(gathered[j].as_ref().expect("gathered"));
                merged_units += 1 << j;
            }
            below |= (1u64 << i) | ((1u64 << i) - 1);
            let fresh = ((1usize << i) - merged_units) * x;
            set.append(&batch.slice(cursor, cursor + fresh));
            cursor += fresh;
            plans.push((i, set));
        }
        debug_assert_eq!(cursor, batch.len());

        let params = self.params();
        for (i, t) in map_vec(plans, true, |(i, set)| (i, StaticTree::build_veb_set(set, params))) {
            self.slots[i] = Some(t);
            self.rebuilds[i] += 1;
        }
        self.mask = new;
    }

    /// Clears every slot below half its capacity and reinserts its points.
    fn restore_half_capacity(&mut self) {
        let mut gathered = PointSet::new(self.dim);
        for i in bits(self.mask) {
            let live = self.slots[i].as_ref().map_or(0, StaticTree::len);
            if live * 2 < self.slot_capacity(i) {
                let t = self.slots[i].take().expect("occupied");
                gathered.append(&t.collect_live_set());
                self.mask &= !(1u64 << i);
            }
        }
        if !gathered.is_empty() {
            self.insert_set(gathered);
        }
    }

    pub fn erase(&mut self, batch: &[Point]) -> Result<usize> {
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
        let from_buffer = self.buffer.erase_set(batch)?;
        if from_buffer > 0 {
            self.buffer = StaticTree::build_heap_set(self.buffer.collect_live_set(), self.params());
        }

        let removed = AtomicUsize::new(from_buffer);
        let use_bloom = self.config.use_bloom;
        let n = batch.len() as u32;
        for_each_mut(&mut self.slots, 1, |_, slot| {
            let Some(t) = slot else { return };
            if t.is_empty() {
                return;
            }
            let mut idx: Vec<u32> = (0..n).collect();
            if use_bloom {
                let bloom = t.ensure_bloom();
                let keep = partition(&mut idx, |&b| bloom.maybe_contains(batch.coords(b as usize)));
                idx.truncate(keep);
            }
            removed.fetch_add(t.erase_selected(batch, idx), Ordering::Relaxed);
        });
        self.restore_half_capacity();
        Ok(removed.into_inner())
    }

    /// Exact k-NN over all live points: one candidate buffer per query,
    /// slots visited from largest to smallest and the buffer tree last.
    pub fn knn(&self, queries: &[Point], k: usize) -> Result<KnnResult> {
        check_k(k)?;
        check_queries(self.dim, queries)?;
        let mut bufs: Vec<KnnBuffer> = (0..queries.len()).map(|_| KnnBuffer::new(k)).collect();
        let trees = self.slots.iter().rev().flatten().chain(std::iter::once(&self.buffer));
        for t in trees {
            if t.is_empty() {
                continue;
            }
            for_each_mut(&mut bufs, 16, |i, b| t.knn_single(queries[i].coords(), b));
        }
        Ok(bufs.iter_mut().map(KnnBuffer::finalize).collect())
    }

    /// Checks the structural invariants of every level.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.buffer.len() >= self.config.buffer_size {
            return Err(format!("buffer holds {} points", self.buffer.len()));
        }
        self.buffer.validate()?;
        for (i, slot) in self.slots.iter().enumerate() {
            let bit = self.mask >> i & 1 == 1;
            let live = slot.as_ref().map_or(0, StaticTree::len);
            if bit != (live > 0) {
                return Err(format!("slot {i}: mask bit {bit} with {live} live points"));
            }
            if bit && (live * 2 < self.slot_capacity(i) || live > self.slot_capacity(i)) {
                return Err(format!("slot {i}: {live} live points outside the half-capacity range"));
            }
            if let Some(t) = slot {
                t.validate().map_err(|e| format!("slot {i}: {e}"))?;
            }
        }
        if self.mask >> self.slots.len() != 0 {
            return Err("mask has bits beyond the slot array".into());
        }
        Ok(())
    }
}

/// Indices of the set bits of `mask`, ascending.
fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            return None;
        }
        let i = mask.trailing_zeros() as usize;
        mask &= mask - 1;
        Some(i)
    })
}

impl DynamicIndex for BdlTree {
    fn name(&self) -> &'static str {
        "bdl"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        BdlTree::len(self)
    }

    fn insert(&mut self, batch: &[Point]) -> Result<()> {
        BdlTree::insert(self, batch)
    }

    fn erase(&mut self, batch: &[Point]) -> Result<usize> {
        BdlTree::erase(self, batch)
    }

    fn knn(&self, queries: &[Point], k: usize) -> Result<KnnResult> {
        BdlTree::knn(self, queries, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::squared_distance;
    use crate::knnbuf::Neighbor;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn config(x: usize) -> BdlConfig {
        BdlConfig {
            buffer_size: x,
            ..BdlConfig::default()
        }
    }

    fn points(range: std::ops::Range<u64>, d: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        range
            .map(|i| Point::new(i, (0..d).map(|_| rng.gen_range(0.0..100.0)).collect()).unwrap())
            .collect()
    }

    fn brute(pts: &[Point], q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = pts
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
    fn defaults() {
        let t = BdlTree::new(3, BdlConfig::default()).unwrap();
        assert_eq!(t.config().buffer_size, 1024);
        assert_eq!(t.len(), 0);
        assert_eq!(
            t.stats(),
            BdlStats {
                live: 0,
                mask: 0,
                slot_live: vec![],
                buffer_live: 0
            }
        );
    }

    #[test]
    fn log_structure_replay() {
        let x = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = BdlTree::new(2, config(x)).unwrap();
        let sizes = [x, x + 1, x + 1, x - 1];
        let expect = [(0b001, 0), (0b010, 1), (0b011, 2), (0b100, 1)];
        let mut next = 0u64;
        for (&s, &(mask, buffered)) in sizes.iter().zip(&expect) {
            t.insert(&points(next..next + s as u64, 2, &mut rng)).unwrap();
            next += s as u64;
            assert_eq!(t.mask(), mask);
            assert_eq!(t.stats().buffer_live, buffered);
            t.validate().unwrap();
        }
        assert_eq!(t.len(), 4 * x + 1);
    }

    #[test]
    fn half_capacity_boundary() {
        let x = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = points(0..8, 2, &mut rng);
        let mut t = BdlTree::build(2, &pts, config(x)).unwrap();
        assert_eq!(t.mask(), 0b10);
        assert_eq!(t.erase(&pts[..4]).unwrap(), 4);
        assert_eq!(t.mask(), 0b10);
        assert_eq!(t.stats().slot_live, vec![0, 4]);
        assert_eq!(t.rebuild_counts(), &[0, 1]);
        assert_eq!(t.erase(&pts[4..5]).unwrap(), 1);
        assert_eq!(t.mask(), 0);
        assert_eq!(t.stats().buffer_live, 3);
        t.validate().unwrap();
    }

    #[test]
    fn delete_everything_resets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts = points(0..1000, 3, &mut rng);
        let mut t = BdlTree::build(3, &pts, config(32)).unwrap();
        assert_eq!(t.erase(&pts).unwrap(), 1000);
        assert_eq!(t.mask(), 0);
        assert_eq!(t.stats().buffer_live, 0);
    }

    #[test]
    fn knn_spans_buffer_and_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = 64;
        let pts = points(0..(x * 7 + 13) as u64, 3, &mut rng);
        let t = BdlTree::build(3, &pts, config(x)).unwrap();
        assert_eq!(t.mask(), 0b111);
        assert_eq!(t.stats().buffer_live, 13);
        let queries = points(0..300, 3, &mut rng);
        let got = t.knn(&queries, 5).unwrap();
        for (q, r) in queries.iter().zip(&got) {
            assert_eq!(*r, brute(&pts, q.coords(), 5));
        }
        let selfq = t.knn(&pts[..1], 1).unwrap();
        assert_eq!(selfq[0][0], Neighbor { id: 0, dist2: 0.0 });
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut t = BdlTree::new(2, BdlConfig::default()).unwrap();
        assert!(t.insert(&[Point::new(0, vec![1.0]).unwrap()]).is_err());
        assert!(t.knn(&[Point::new(0, vec![1.0, 2.0]).unwrap()], 0).is_err());
        assert!(BdlTree::new(0, BdlConfig::default()).is_err());
        assert!(BdlTree::new(2, config(0)).is_err());
    }

    #[derive(Clone, Debug)]
    enum Op {
        Insert(usize),
        Erase(usize),
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn mask_matches_counter_without_deletions(sizes in prop::collection::vec(0usize..70, 1..20)) {
            let x = 8;
            let mut t = BdlTree::new(1, config(x)).unwrap();
            let mut total = 0;
            for s in sizes {
                let batch: Vec<Point> = (total..total + s)
                    .map(|i| Point::new(i as u64, vec![i as f64]).unwrap())
                    .collect();
                t.insert(&batch).unwrap();
                total += s;
                prop_assert_eq!(t.mask(), (total / x) as u64);
                prop_assert_eq!(t.stats().buffer_live, total % x);
            }
        }

        #[test]
        fn replay_matches_multiset(ops in prop::collection::vec(
            prop_oneof![(1usize..200).prop_map(Op::Insert), (1usize..150).prop_map(Op::Erase)], 1..25),
            seed in any::<u64>(),
            bloom in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = BdlConfig { buffer_size: 16, use_bloom: bloom, ..BdlConfig::default() };
            let mut t = BdlTree::new(2, cfg).unwrap();
            let mut oracle: HashMap<u64, Point> = HashMap::new();
            let mut next = 0u64;
            for op in ops {
                match op {
                    Op::Insert(n) => {
                        let batch: Vec<Point> = (next..next + n as u64)
                            .map(|i| Point::new(i, vec![rng.gen_range(0..30) as f64, rng.gen_range(0..30) as f64]).unwrap())
                            .collect();
                        next += n as u64;
                        t.insert(&batch).unwrap();
                        oracle.extend(batch.into_iter().map(|p| (p.id(), p)));
                    }
                    Op::Erase(n) => {
                        let batch: Vec<Point> = (0..n)
                            .map(|i| Point::new(i as u64, vec![rng.gen_range(0..30) as f64, rng.gen_range(0..30) as f64]).unwrap())
                            .collect();
                        let before = oracle.len();
                        oracle.retain(|_, p| !batch.iter().any(|b| b.coords() == p.coords()));
                        prop_assert_eq!(t.erase(&batch).unwrap(), before - oracle.len());
                    }
                }
                prop_assert!(t.validate().is_ok(), "{:?}", t.validate());
                let mut live: Vec<u64> = t.collect_live().iter().map(Point::id).collect();
                live.sort_unstable();
                let mut want: Vec<u64> = oracle.keys().copied().collect();
                want.sort_unstable();
                prop_assert_eq!(live, want);
            }
            let all: Vec<Point> = oracle.values().cloned().collect();
            let q = Point::new(0, vec![15.5, 14.5]).unwrap();
            prop_assert_eq!(&t.knn(std::slice::from_ref(&q), 7).unwrap()[0], &brute(&all, q.coords(), 7));
        }
    }
}
