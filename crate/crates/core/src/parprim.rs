//! Fork-join building blocks: prefix sum, partition, median partition.
//!
//! With the `parallel` feature these run on the rayon pool; without it every
//! helper degrades to the serial loop. Inputs below [`SERIAL_CUTOFF`] always
//! take the serial path. Block boundaries are fixed (not derived from the
//! thread count), so results never depend on how many workers run them.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Sizes below this run serially.
pub const SERIAL_CUTOFF: usize = 1000;

const BLOCK: usize = 4096;

/// `rayon::join` when parallel, otherwise `(a(), b())`.
#[inline]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

#[inline]
pub(crate) fn join_if<A, B, RA, RB>(parallel: bool, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    if parallel {
        join(a, b)
    } else {
        (a(), b())
    }
}

/// Number of worker threads available to the parallel helpers.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

pub(crate) fn map_vec<T, R, F>(items: Vec<T>, parallel: bool, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel && items.len() > 1 {
        return items.into_par_iter().map(f).collect();
    }
    let _ = parallel;
    items.into_iter().map(f).collect()
}

pub(crate) fn for_each_mut<T, F>(items: &mut [T], min_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_iter_mut()
            .enumerate()
            .with_min_len(min_len.max(1))
            .for_each(|(i, t)| f(i, t));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = min_len;
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }
}

pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

pub(crate) fn for_each_range<F>(n: usize, chunk: usize, f: F)
where
    F: Fn(std::ops::Range<usize>) + Sync + Send,
{
    let blocks = n.div_ceil(chunk.max(1));
    let run = |b: usize| f(b * chunk..((b + 1) * chunk).min(n));
    #[cfg(feature = "parallel")]
    {
        (0..blocks).into_par_iter().for_each(run);
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..blocks).for_each(run);
    }
}

/// Exclusive scan: returns `[id, a0, a0⊕a1, ...]` (same length as the input)
/// together with the overall sum.
pub fn prefix_sum<T, F>(values: &[T], identity: T, op: F) -> (Vec<T>, T)
where
    T: Copy + Send + Sync,
    F: Fn(T, T) -> T + Sync + Send,
{
    let n = values.len();
    if n <= SERIAL_CUTOFF {
        let mut out = Vec::with_capacity(n);
        let mut acc = identity;
        for &v in values {
            out.push(acc);
            acc = op(acc, v);
        }
        return (out, acc);
    }
    let blocks: Vec<&[T]> = values.chunks(BLOCK).collect();
    let sums = map_vec(blocks, true, |b| b.iter().fold(identity, |a, &v| op(a, v)));
    let mut offsets = Vec::with_capacity(sums.len());
    let mut total = identity;
    for s in sums {
        offsets.push(total);
        total = op(total, s);
    }
    let mut out = vec![identity; n];
    for_each_chunk_mut(&mut out, BLOCK, |b, chunk| {
        let src = &values[b * BLOCK..b * BLOCK + chunk.len()];
        let mut acc = offsets[b];
        for (o, &v) in chunk.iter_mut().zip(src) {
            *o = acc;
            acc = op(acc, v);
        }
    });
    (out, total)
}

/// Stable partition: items satisfying `pred` move to the front. Returns the
/// number of such items.
pub fn partition<T, P>(items: &mut [T], pred: P) -> usize
where
    T: Copy + Send + Sync,
    P: Fn(&T) -> bool + Sync + Send,
{
    let n = items.len();
    if n <= SERIAL_CUTOFF {
        let mut rejected = Vec::new();
        let mut w = 0;
        for i in 0..n {
            let x = items[i];
            if pred(&x) {
                items[w] = x;
                w += 1;
            } else {
                rejected.push(x);
            }
        }
        items[w..].copy_from_slice(&rejected);
        return w;
    }

    let scratch = items.to_vec();
    let blocks: Vec<&[T]> = scratch.chunks(BLOCK).collect();
    let counts = map_vec(blocks.clone(), true, |b| b.iter().filter(|x| pred(x)).count());
    let (_, accepted) = prefix_sum(&counts, 0usize, |a, b| a + b);

    // carve the destination into one accepted and one rejected run per block
    let (mut acc_dst, mut rej_dst) = items.split_at_mut(accepted);
    let mut tasks = Vec::with_capacity(blocks.len());
    for (b, &src) in blocks.iter().enumerate() {
        let (a, rest_a) = acc_dst.split_at_mut(counts[b]);
        let (r, rest_r) = rej_dst.split_at_mut(src.len() - counts[b]);
        acc_dst = rest_a;
        rej_dst = rest_r;
        tasks.push((src, a, r));
    }
    map_vec(tasks, true, |(src, a, r)| {
        let (mut i, mut j) = (0, 0);
        for x in src {
            if pred(x) {
                a[i] = *x;
                i += 1;
            } else {
                r[j] = *x;
                j += 1;
            }
        }
    });
    accepted
}

/// Reorders `items` so that the first `⌈n/2⌉` keys are `<=` every remaining
/// key and returns `⌈n/2⌉`. Equal keys may land on either side.
pub fn median_partition<T, K>(items: &mut [T], key: K) -> usize
where
    T: Copy + Send + Sync,
    K: Fn(&T) -> f64 + Sync + Send,
{
    let m = items.len().div_ceil(2);
    select_smallest(items, m, &key);
    m
}

/// Moves the `m` smallest keys to the front (unordered).
pub fn select_smallest<T, K>(items: &mut [T], m: usize, key: &K)
where
    T: Copy + Send + Sync,
    K: Fn(&T) -> f64 + Sync + Send,
{
    let mut slice = items;
    let mut m = m;
    loop {
        let n = slice.len();
        if m == 0 || m >= n {
            return;
        }
        if n <= SERIAL_CUTOFF {
            slice.select_nth_unstable_by(m - 1, |a, b| key(a).total_cmp(&key(b)));
            return;
        }
        let pivot = sample_pivot(slice, key);
        let lt = partition(slice, |x| key(x).total_cmp(&pivot).is_lt());
        let eq = partition(&mut slice[lt..], |x| key(x).total_cmp(&pivot).is_eq());
        if m <= lt {
            slice = &mut slice[..lt];
        } else if m <= lt + eq {
            return;
        } else {
            slice = &mut slice[lt + eq..];
            m -= lt + eq;
        }
    }
}

fn sample_pivot<T, K: Fn(&T) -> f64>(slice: &[T], key: &K) -> f64 {
    const SAMPLES: usize = 63;
    let step = slice.len() / SAMPLES;
    let mut keys: Vec<f64> = (0..SAMPLES).map(|i| key(&slice[i * step])).collect();
    keys.sort_unstable_by(f64::total_cmp);
    keys[SAMPLES / 2]
}

/// Minimum and maximum key, or `None` for empty input.
pub fn min_max<T, K>(items: &[T], key: K) -> Option<(f64, f64)>
where
    T: Sync,
    K: Fn(&T) -> f64 + Sync + Send,
{
    if items.is_empty() {
        return None;
    }
    let fold = |chunk: &[T]| {
        chunk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            let k = key(x);
            (lo.min(k), hi.max(k))
        })
    };
    if items.len() <= SERIAL_CUTOFF {
        return Some(fold(items));
    }
    let parts = map_vec(items.chunks(BLOCK).collect(), true, fold);
    Some(
        parts
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<i64>) -> Vec<i64> {
        v.sort_unstable();
        v
    }

    #[test]
    fn prefix_sum_examples() {
        assert_eq!(prefix_sum(&[1, 2, 3], 0, |a, b| a + b), (vec![0, 1, 3], 6));
        assert_eq!(prefix_sum(&[] as &[i32], 0, |a, b| a + b), (vec![], 0));
        let (out, total) = prefix_sum(&[5.0f64], f64::NEG_INFINITY, f64::max);
        assert_eq!(out, vec![f64::NEG_INFINITY]);
        assert_eq!(total, 5.0);
    }

    #[test]
    fn prefix_sum_large_matches_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<i64> = (0..50_000).map(|_| rng.gen_range(-100..100)).collect();
        for (op, id) in [
            (Box::new(|a: i64, b: i64| a + b) as Box<dyn Fn(i64, i64) -> i64 + Sync + Send>, 0),
            (Box::new(|a: i64, b: i64| a.min(b)), i64::MAX),
            (Box::new(|a: i64, b: i64| a.max(b)), i64::MIN),
        ] {
            let (out, total) = prefix_sum(&v, id, &op);
            let mut acc = id;
            for (i, &x) in v.iter().enumerate() {
                assert_eq!(out[i], acc);
                acc = op(acc, x);
            }
            assert_eq!(total, acc);
        }
    }

    #[test]
    fn partition_examples() {
        let mut v = [4, 1, 3, 2];
        let s = partition(&mut v, |x| *x < 3);
        assert_eq!(s, 2);
        assert_eq!(v, [1, 2, 4, 3]);

        let mut all = [1, 2, 3];
        assert_eq!(partition(&mut all, |_| true), 3);
        let mut none = [1, 2, 3];
        assert_eq!(partition(&mut none, |_| false), 0);
        assert_eq!(none, [1, 2, 3]);
    }

    #[test]
    fn median_partition_examples() {
        let mut v = [3.0, 1.0, 2.0];
        let s = median_partition(&mut v, |x| *x);
        assert_eq!(s, 2);
        let mut left = v[..2].to_vec();
        left.sort_by(f64::total_cmp);
        assert_eq!(left, vec![1.0, 2.0]);

        let mut same = [7.0; 9];
        assert_eq!(median_partition(&mut same, |x| *x), 5);
    }

    #[test]
    fn median_partition_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 999, 1001, 10_000, 40_001] {
            let mut keys: Vec<f64> = (0..n).map(|_| rng.gen_range(0..500) as f64).collect();
            let mut oracle = keys.clone();
            oracle.sort_by(f64::total_cmp);
            let s = median_partition(&mut keys, |x| *x);
            assert_eq!(s, n.div_ceil(2));
            let left_max = keys[..s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let right_min = keys[s..].iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(left_max, oracle[s - 1]);
            assert!(left_max <= right_min);
            let mut after = keys.clone();
            after.sort_by(f64::total_cmp);
            assert_eq!(after, oracle);
        }
    }

    #[test]
    fn min_max_reduces() {
        assert_eq!(min_max(&[] as &[f64], |x| *x), None);
        let v: Vec<f64> = (0..20_000).map(|i| ((i * 7919) % 10007) as f64).collect();
        assert_eq!(min_max(&v, |x| *x), Some((0.0, 10006.0)));
    }

    proptest! {
        #[test]
        fn partition_is_stable_permutation(v in prop::collection::vec(-50i64..50, 0..3000), t in -50i64..50) {
            let mut p = v.clone();
            let s = partition(&mut p, |x| *x < t);
            let expect_front: Vec<i64> = v.iter().copied().filter(|x| *x < t).collect();
            let expect_back: Vec<i64> = v.iter().copied().filter(|x| *x >= t).collect();
            prop_assert_eq!(s, expect_front.len());
            prop_assert_eq!(&p[..s], &expect_front[..]);
            prop_assert_eq!(&p[s..], &expect_back[..]);
        }

        #[test]
        fn median_partition_preserves_multiset(v in prop::collection::vec(-20i64..20, 1..3000)) {
            let mut p = v.clone();
            let s = median_partition(&mut p, |x| *x as f64);
            prop_assert_eq!(s, v.len().div_ceil(2));
            let lmax = p[..s].iter().max().unwrap();
            if s < p.len() {
                prop_assert!(lmax <= p[s..].iter().min().unwrap());
            }
            prop_assert_eq!(sorted(p), sorted(v));
        }

        #[test]
        fn prefix_sum_matches_serial_fold(v in prop::collection::vec(-1000i64..1000, 0..5000)) {
            let (out, total) = prefix_sum(&v, 0, |a, b| a + b);
            let mut acc = 0;
            for (i, x) in v.iter().enumerate() {
                prop_assert_eq!(out[i], acc);
                acc += x;
            }
            prop_assert_eq!(total, acc);
        }
    }
}
