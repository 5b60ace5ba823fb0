//! Synthetic datasets.
//!
//! Uniform generation is counter based: point `i` draws its coordinates from
//! a fixed offset of one ChaCha stream, so chunks can be generated in
//! parallel and still match the serial output exactly.

use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KdError, Result};
use crate::geometry::Point;
use crate::parprim::for_each_chunk_mut;
use crate::pointio::{read_points, Format};

/// Random-walk parameters for [`gen_visualvar`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisualVarParams {
    /// Maximum per-axis step of the walk.
    pub step: f64,
    /// Probability of jumping to a uniformly random location.
    pub p_jump: f64,
    /// Side length of the domain cube `[0, domain]^d`.
    pub domain: f64,
}

impl VisualVarParams {
    pub const DEFAULT_P_JUMP: f64 = 0.01;

    /// Domain `sqrt(n)`, step `domain / 1000`, jump probability 0.01.
    pub fn defaults_for(n: usize) -> Self {
        let domain = (n as f64).sqrt();
        Self {
            step: domain / 1000.0,
            p_jump: Self::DEFAULT_P_JUMP,
            domain,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetKind {
    Uniform,
    VisualVar(VisualVarParams),
    File { path: PathBuf, format: Format },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Ignored for files.
    pub n: usize,
    /// Ignored for files.
    pub d: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Vec<Point>> {
        match &self.kind {
            DatasetKind::Uniform => gen_uniform(self.n, self.d, self.seed),
            DatasetKind::VisualVar(p) => gen_visualvar(self.n, self.d, self.seed, *p),
            DatasetKind::File { path, format } => read_points(path, *format),
        }
    }
}

fn check_shape(n: usize, d: usize) -> Result<()> {
    if d == 0 {
        return Err(KdError::ZeroDimension);
    }
    if n == 0 {
        return Err(KdError::InvalidArgument("dataset size must be at least 1".into()));
    }
    Ok(())
}

fn to_points(coords: Vec<f64>, d: usize) -> Vec<Point> {
    coords
        .chunks_exact(d)
        .enumerate()
        .map(|(i, c)| Point::new(i as u64, c.to_vec()).expect("generated coordinates are finite"))
        .collect()
}

/// `n` points uniform in `[0, sqrt(n))^d` with ids `0..n`.
pub fn gen_uniform(n: usize, d: usize, seed: u64) -> Result<Vec<Point>> {
    check_shape(n, d)?;
    const ROWS: usize = 4096;
    let side = (n as f64).sqrt();
    let mut coords = vec![0.0; n * d];
    for_each_chunk_mut(&mut coords, ROWS * d, |b, chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Each coordinate consumes one 64-bit output, i.e. two 32-bit words.
        rng.set_word_pos((b * ROWS * d * 2) as u128);
        for x in chunk {
            *x = unit(rng.next_u64()) * side;
        }
    });
    Ok(to_points(coords, d))
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A random walk that jumps to a uniform location with probability `p_jump`
/// and otherwise moves by a uniform step in `[-step, step]^d`, clamped to the
/// domain.
pub fn gen_visualvar(n: usize, d: usize, seed: u64, params: VisualVarParams) -> Result<Vec<Point>> {
    check_shape(n, d)?;
    let VisualVarParams {
        step,
        p_jump,
        domain,
    } = params;
    if !(0.0..=1.0).contains(&p_jump) {
        return Err(KdError::InvalidArgument(format!("jump probability {p_jump} outside [0, 1]")));
    }
    if !(step.is_finite() && step >= 0.0 && domain.is_finite() && domain >= 0.0) {
        return Err(KdError::InvalidArgument("step and domain must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng| unit(rng.next_u64()) * domain;
    let mut cur: Vec<f64> = (0..d).map(|_| uniform(&mut rng)).collect();
    let mut coords = Vec::with_capacity(n * d);
    coords.extend_from_slice(&cur);
    for _ in 1..n {
        if rng.gen::<f64>() < p_jump {
            for x in cur.iter_mut() {
                *x = uniform(&mut rng);
            }
        } else {
            for x in cur.iter_mut() {
                let delta = if step > 0.0 { rng.gen_range(-step..=step) } else { 0.0 };
                *x = (*x + delta).clamp(0.0, domain);
            }
        }
        coords.extend_from_slice(&cur);
    }
    Ok(to_points(coords, d))
}
