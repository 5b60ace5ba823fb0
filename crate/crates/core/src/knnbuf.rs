//! Bounded k-nearest accumulator with amortized O(1) insertion.
//!
//! Candidates are appended to a buffer of physical capacity `2k`. When it
//! fills, a serial selection keeps the `k` nearest and discards the rest, so
//! each selection costs O(k) and happens at most once per `k` inserts.

use std::cmp::Ordering;

/// A neighbor candidate: the point id and its squared distance to the query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub dist2: f64,
}

impl Neighbor {
    /// Total order used for every k-NN answer: distance, then id.
    #[inline]
    pub fn cmp_rank(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

#[derive(Clone, Debug)]
pub struct KnnBuffer {
    k: usize,
    entries: Vec<Neighbor>,
    bound: f64,
    selections: u64,
}

impl KnnBuffer {
    /// # Panics
    /// If `k == 0`.
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "k must be positive");
        Self {
            k,
            entries: Vec::with_capacity(2 * k),
            bound: f64::INFINITY,
            selections: 0,
        }
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of stored candidates (at most `2k`).
    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Squared distance of the k-th nearest candidate as of the last
    /// selection; `+inf` until `k` candidates have been retained. Any
    /// candidate farther than this can never enter the answer.
    #[inline]
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// True once `k` candidates have been retained.
    #[inline]
    pub fn is_full(&self) -> bool {
        self.bound < f64::INFINITY
    }

    /// Number of selection steps performed so far.
    pub fn selections(&self) -> u64 {
        self.selections
    }

    #[inline]
    pub fn insert(&mut self, id: u64, dist2: f64) {
        debug_assert!(dist2 >= 0.0);
        if dist2 > self.bound {
            return;
        }
        self.entries.push(Neighbor { id, dist2 });
        let n = self.entries.len();
        if n == self.k && !self.is_full() {
            self.bound = self
                .entries
                .iter()
                .map(|e| e.dist2)
                .fold(f64::NEG_INFINITY, f64::max);
            self.selections += 1;
        } else if n == 2 * self.k {
            self.compact();
        }
    }

    fn compact(&mut self) {
        let k = self.k;
        self.entries
            .select_nth_unstable_by(k - 1, Neighbor::cmp_rank);
        self.entries.truncate(k);
        self.bound = self.entries[k - 1].dist2;
        self.selections += 1;
    }

    /// The `min(k, seen)` nearest candidates, ascending by distance then id.
    /// The buffer is left empty and reusable.
    pub fn finalize(&mut self) -> Vec<Neighbor> {
        let mut out = std::mem::take(&mut self.entries);
        out.sort_unstable_by(Neighbor::cmp_rank);
        out.truncate(self.k);
        self.bound = f64::INFINITY;
        self.entries = Vec::with_capacity(2 * self.k);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn oracle(cands: &[(u64, f64)], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = cands
            .iter()
            .map(|&(id, dist2)| Neighbor { id, dist2 })
            .collect();
        all.sort_by(Neighbor::cmp_rank);
        all.truncate(k);
        all
    }

    #[test]
    fn k1_keeps_nearest_of_two() {
        let mut b = KnnBuffer::new(1);
        b.insert(0, 5.0);
        b.insert(1, 3.0);
        assert_eq!(b.len(), 1);
        assert_eq!(b.finalize(), vec![Neighbor { id: 1, dist2: 3.0 }]);
    }

    #[test]
    fn k2_sequence() {
        let seq = [9.0, 1.0, 4.0, 7.0];
        let cands: Vec<(u64, f64)> = seq.iter().enumerate().map(|(i, d)| (i as u64, *d)).collect();
        let mut b = KnnBuffer::new(2);
        for &(id, d) in &cands {
            b.insert(id, d);
        }
        let got: Vec<f64> = b.finalize().iter().map(|n| n.dist2).collect();
        let want: Vec<f64> = oracle(&cands, 2).iter().map(|n| n.dist2).collect();
        assert_eq!(got, want);
        assert_eq!(got, vec![1.0, 4.0]);
    }

    #[test]
    fn underfull_bound_is_infinite() {
        let mut b = KnnBuffer::new(3);
        b.insert(0, 1.0);
        b.insert(1, 2.0);
        assert_eq!(b.bound(), f64::INFINITY);
        assert!(!b.is_full());
        b.insert(2, 0.5);
        assert_eq!(b.bound(), 2.0);
    }

    #[test]
    fn finalize_empty_and_ties() {
        assert!(KnnBuffer::new(4).finalize().is_empty());
        let mut b = KnnBuffer::new(3);
        for id in [9, 4, 7, 1, 3] {
            b.insert(id, 2.0);
        }
        let ids: Vec<u64> = b.finalize().iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![1, 3, 4]);
    }

    #[test]
    fn top5_of_random_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cands: Vec<(u64, f64)> = (0..1000).map(|i| (i, rng.gen_range(0.0..100.0))).collect();
        let mut b = KnnBuffer::new(5);
        for &(id, d) in &cands {
            b.insert(id, d);
        }
        assert_eq!(b.finalize(), oracle(&cands, 5));
    }

    #[test]
    fn selection_count_is_amortized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (m, k) = (100_000u64, 10usize);
        let mut b = KnnBuffer::new(k);
        // decreasing distances defeat the early rejection, the worst case for selections
        for i in 0..m {
            b.insert(i, (m - i) as f64 + rng.gen_range(0.0..0.5));
        }
        assert!(b.selections() <= m.div_ceil(k as u64) + 1);
    }

    proptest! {
        #[test]
        fn finalize_equals_sort_oracle(
            k in 1usize..12,
            raw in prop::collection::vec(0u32..50, 0..400),
        ) {
            let cands: Vec<(u64, f64)> = raw.iter().enumerate().map(|(i, d)| (i as u64, *d as f64)).collect();
            let mut b = KnnBuffer::new(k);
            let mut last_bound = f64::INFINITY;
            for &(id, d) in &cands {
                b.insert(id, d);
                prop_assert!(b.len() <= 2 * k);
                prop_assert!(b.bound() <= last_bound);
                last_bound = b.bound();
            }
            prop_assert_eq!(b.finalize(), oracle(&cands, k));
        }
    }
}
