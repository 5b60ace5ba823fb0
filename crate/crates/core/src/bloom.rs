//! Bloom filter over point coordinates, buildable from many threads at once.
//!
//! Keys are the coordinate bit patterns (ids are ignored), so any two points
//! with equal coordinates probe the same bits. Probe positions use double
//! hashing `g_i = h1 + i * h2 mod m`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::geometry::{canonical_bits, Point};
use crate::parprim::{for_each_range, SERIAL_CUTOFF};

pub const DEFAULT_BITS_PER_KEY: usize = 10;
pub const DEFAULT_HASHES: u32 = 7;

const SEED_A: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_B: u64 = 0xc2b2_ae3d_27d4_eb4f;

#[derive(Debug)]
pub struct BloomFilter {
    words: Vec<AtomicU64>,
    hashes: u32,
}

#[inline]
fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

#[inline]
fn hash_coords(coords: &[f64], seed: u64) -> u64 {
    let mut h = seed ^ (coords.len() as u64).wrapping_mul(0x8765_4321_0fed_cba9);
    for &x in coords {
        h = fmix64(h ^ canonical_bits(x)).rotate_left(29);
    }
    fmix64(h)
}

impl BloomFilter {
    /// Builds a filter over `points` using the rayon pool.
    pub fn build(points: &[Point], bits_per_key: usize, hashes: u32) -> Self {
        Self::build_with(points.len(), |i| points[i].coords(), bits_per_key, hashes, true)
    }

    /// Same filter as [`BloomFilter::build`], constructed on the calling thread.
    pub fn build_serial(points: &[Point], bits_per_key: usize, hashes: u32) -> Self {
        Self::build_with(points.len(), |i| points[i].coords(), bits_per_key, hashes, false)
    }

    /// Builds over row-major coordinates of dimension `dim`.
    pub fn from_flat(coords: &[f64], dim: usize, bits_per_key: usize, hashes: u32) -> Self {
        let n = coords.len().checked_div(dim).unwrap_or(0);
        Self::build_with(n, |i| &coords[i * dim..(i + 1) * dim], bits_per_key, hashes, true)
    }

    fn build_with<'a, F>(n: usize, key: F, bits_per_key: usize, hashes: u32, parallel: bool) -> Self
    where
        F: Fn(usize) -> &'a [f64] + Sync + Send,
    {
        assert!(bits_per_key >= 1 && hashes >= 1, "bloom parameters must be positive");
        let m_bits = (n * bits_per_key).div_ceil(64) * 64;
        let filter = Self {
            words: (0..m_bits / 64).map(|_| AtomicU64::new(0)).collect(),
            hashes,
        };
        if n == 0 {
            return filter;
        }
        let insert_range = |r: std::ops::Range<usize>| {
            for i in r {
                filter.set(key(i));
            }
        };
        if parallel && n > SERIAL_CUTOFF {
            for_each_range(n, SERIAL_CUTOFF, insert_range);
        } else {
            insert_range(0..n);
        }
        filter
    }

    /// Number of bits `m`.
    pub fn bit_len(&self) -> u64 {
        self.words.len() as u64 * 64
    }

    pub fn hashes(&self) -> u32 {
        self.hashes
    }

    #[inline]
    fn probes(&self, coords: &[f64]) -> impl Iterator<Item = u64> {
        let m = self.bit_len();
        let h1 = hash_coords(coords, SEED_A);
        let h2 = hash_coords(coords, SEED_B) | 1;
        (0..self.hashes as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }

    #[inline]
    fn set(&self, coords: &[f64]) {
        for bit in self.probes(coords) {
            self.words[(bit / 64) as usize].fetch_or(1 << (bit % 64), Ordering::Relaxed);
        }
    }

    /// False means the coordinates were definitely never inserted.
    #[inline]
    pub fn maybe_contains(&self, coords: &[f64]) -> bool {
        if self.words.is_empty() {
            return false;
        }
        self.probes(coords).all(|bit| {
            self.words[(bit / 64) as usize].load(Ordering::Relaxed) >> (bit % 64) & 1 == 1
        })
    }

    /// Snapshot of the bit array.
    pub fn words(&self) -> Vec<u64> {
        self.words.iter().map(|w| w.load(Ordering::Relaxed)).collect()
    }

    /// `(1 - e^{-hn/m})^h` for `n` inserted keys.
    pub fn theoretical_fp_rate(&self, n: usize) -> f64 {
        let h = self.hashes as f64;
        (1.0 - (-h * n as f64 / self.bit_len() as f64).exp()).powf(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(id: u64, c: &[f64]) -> Point {
        Point::new(id, c.to_vec()).unwrap()
    }

    #[test]
    fn singleton_and_empty() {
        let one = [p(0, &[1.5, -2.0])];
        let f = BloomFilter::build(&one, DEFAULT_BITS_PER_KEY, DEFAULT_HASHES);
        assert!(f.maybe_contains(&[1.5, -2.0]));

        let empty = BloomFilter::build(&[], DEFAULT_BITS_PER_KEY, DEFAULT_HASHES);
        assert_eq!(empty.bit_len(), 0);
        assert!(!empty.maybe_contains(&[1.5, -2.0]));
    }

    #[test]
    fn ids_do_not_matter() {
        let f = BloomFilter::build(&[p(1, &[3.0, 4.0])], 10, 7);
        assert!(f.maybe_contains(p(99, &[3.0, 4.0]).coords()));
        assert!(f.maybe_contains(&[3.0, 4.0 + -0.0]));
    }

    #[test]
    fn bits_rounded_to_words() {
        let pts: Vec<Point> = (0..7).map(|i| p(i, &[i as f64])).collect();
        assert_eq!(BloomFilter::build(&pts, 10, 3).bit_len(), 128);
    }

    #[test]
    fn ulp_neighbours_are_mostly_rejected() {
        let pts: Vec<Point> = (0..20_000)
            .map(|i| p(i, &[i as f64 * 0.37, (i as f64).sqrt()]))
            .collect();
        let f = BloomFilter::build(&pts, DEFAULT_BITS_PER_KEY, DEFAULT_HASHES);
        let hits = pts
            .iter()
            .filter(|q| {
                let c = q.coords();
                f.maybe_contains(&[f64::from_bits(c[0].to_bits() + 1), c[1]])
            })
            .count();
        assert!((hits as f64) < 0.05 * pts.len() as f64, "hits = {hits}");
    }
}
