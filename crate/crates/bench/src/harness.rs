//! Timing, result rows, CSV output and the brute-force oracle.

use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bdl_core::{squared_distance, KnnResult, Neighbor, Point};
use serde::{Deserialize, Serialize};

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub implementation: String,
    pub operation: String,
    pub section: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub heuristic: String,
    pub threads: usize,
    pub batch_size: Option<usize>,
    pub k: Option<usize>,
    pub runs: usize,
    pub warmup: usize,
    pub median_s: f64,
    /// Seconds of every recorded run, `;`-separated.
    pub run_times_s: String,
    pub live_after: usize,
    /// Hash of the k-NN answers over the probe set after the operation.
    pub checksum: String,
}

impl BenchResult {
    pub fn run_times(&self) -> Vec<f64> {
        self.run_times_s
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().expect("run time column holds numbers"))
            .collect()
    }

    /// The row without timing columns (and without the thread count when
    /// `with_threads` is false).
    pub fn untimed(&self, with_threads: bool) -> BenchResult {
        BenchResult {
            median_s: 0.0,
            run_times_s: String::new(),
            threads: if with_threads { self.threads } else { 0 },
            ..self.clone()
        }
    }
}

pub fn join_times(times: &[f64]) -> String {
    times
        .iter()
        .map(|t| format!("{t:.9}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Median of `times`; the mean of the two middle values for even counts.
pub fn median(times: &[f64]) -> f64 {
    assert!(!times.is_empty(), "median of no runs");
    let mut v = times.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Runs `setup` then a timed `op` for `warmup + runs` rounds and returns
/// the recorded times together with the state left by the last round.
pub fn measure<S>(
    warmup: usize,
    runs: usize,
    mut setup: impl FnMut() -> Result<S>,
    mut op: impl FnMut(&mut S) -> Result<()>,
) -> Result<(Vec<f64>, S)> {
    assert!(runs >= 1, "at least one recorded run");
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for round in 0..warmup + runs {
        let mut state = setup()?;
        let t = Instant::now();
        op(&mut state)?;
        let secs = t.elapsed().as_secs_f64();
        if round >= warmup {
            times.push(secs);
        }
        last = Some(state);
    }
    Ok((times, last.expect("ran at least once")))
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchResult]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[BenchResult]) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(f, rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchResult>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        bail!("{}: unexpected header {header:?}", path.display());
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Column order of the CSV output.
pub const HEADER: [&str; 16] = [
    "implementation",
    "operation",
    "section",
    "dataset",
    "n",
    "d",
    "heuristic",
    "threads",
    "batch_size",
    "k",
    "runs",
    "warmup",
    "median_s",
    "run_times_s",
    "live_after",
    "checksum",
];

/// FNV-1a over every `(id, dist2 bits)` pair, with list lengths as separators.
pub fn checksum(result: &KnnResult) -> String {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    for list in result {
        eat(list.len() as u64);
        for nb in list {
            eat(nb.id);
            eat(nb.dist2.to_bits());
        }
    }
    format!("{h:016x}")
}

/// Exact k-NN by scanning every point.
pub fn brute_knn(points: &[Point], queries: &[Point], k: usize) -> KnnResult {
    queries
        .iter()
        .map(|q| {
            let mut all: Vec<Neighbor> = points
                .iter()
                .map(|p| Neighbor {
                    id: p.id(),
                    dist2: squared_distance(q.coords(), p.coords()),
                })
                .collect();
            let keep = k.min(all.len());
            if keep > 0 && keep < all.len() {
                all.select_nth_unstable_by(keep - 1, Neighbor::cmp_rank);
            }
            all.truncate(keep);
            all.sort_by(Neighbor::cmp_rank);
            all
        })
        .collect()
}

/// Errors with the first query whose answer differs from the oracle.
pub fn check_against_brute(
    what: &str,
    got: &KnnResult,
    live: &[Point],
    queries: &[Point],
    k: usize,
) -> Result<()> {
    let want = brute_knn(live, queries, k);
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        if g != w {
            bail!("{what}: query {i} disagrees with brute force: got {g:?}, want {w:?}");
        }
    }
    if got.len() != want.len() {
        bail!("{what}: {} answers for {} queries", got.len(), want.len());
    }
    Ok(())
}

/// Consecutive index ranges of `size` (the last may be shorter).
pub fn batches_of(n: usize, size: usize) -> Vec<Range<usize>> {
    let size = size.max(1);
    (0..n.div_ceil(size))
        .map(|b| b * size..((b + 1) * size).min(n))
        .collect()
}

/// Batch size for `pct` percent of `n` points (rounded up, at least 1).
pub fn pct_batch_size(n: usize, pct: f64) -> usize {
    ((n as f64 * pct / 100.0).ceil() as usize).max(1)
}

/// `count` ranges covering `0..n` with sizes differing by at most one.
pub fn equal_batches(n: usize, count: usize) -> Vec<Range<usize>> {
    (0..count).map(|i| i * n / count..(i + 1) * n / count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize) -> BenchResult {
        BenchResult {
            implementation: "bdl".into(),
            operation: "insert".into(),
            section: if i.is_multiple_of(2) { String::new() } else { "INS1".into() },
            dataset: "uniform".into(),
            n: 1000 + i,
            d: 3,
            heuristic: "object".into(),
            threads: 4,
            batch_size: if i.is_multiple_of(2) { Some(100) } else { None },
            k: Some(5),
            runs: 3,
            warmup: 1,
            median_s: 0.25,
            run_times_s: join_times(&[0.5, 0.25, 0.125]),
            live_after: 1000,
            checksum: "00ff".into(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows: Vec<BenchResult> = (0..4).map(row).collect();
        write_csv_file(&path, &rows).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn empty_results_give_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), HEADER.join(","));
    }

    #[test]
    fn median_recomputes_from_run_column() {
        let r = row(0);
        assert_eq!(median(&r.run_times()), r.median_s);
        assert_eq!(median(&[3.0, 1.0]), 2.0);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn batch_plans() {
        assert_eq!(batches_of(1000, pct_batch_size(1000, 10.0)).len(), 10);
        assert_eq!(batches_of(1004, pct_batch_size(1004, 10.0)).len(), 10);
        assert_eq!(batches_of(7, 3), vec![0..3, 3..6, 6..7]);
        let eq = equal_batches(101, 20);
        assert_eq!(eq.len(), 20);
        assert_eq!(eq.iter().map(|r| r.len()).sum::<usize>(), 101);
    }

    #[test]
    fn measure_records_only_timed_runs() {
        let mut setups = 0;
        let (times, state) = measure(1, 3, || {
            setups += 1;
            Ok(setups)
        }, |_| Ok(()))
        .unwrap();
        assert_eq!(times.len(), 3);
        assert_eq!(state, 4);
    }

    #[test]
    fn checksum_sees_ids_and_distances() {
        let a = vec![vec![Neighbor { id: 1, dist2: 2.0 }]];
        let b = vec![vec![Neighbor { id: 2, dist2: 2.0 }]];
        let c = vec![vec![Neighbor { id: 1, dist2: 3.0 }]];
        assert_ne!(checksum(&a), checksum(&b));
        assert_ne!(checksum(&a), checksum(&c));
        assert_eq!(checksum(&a), checksum(&a.clone()));
    }
}
