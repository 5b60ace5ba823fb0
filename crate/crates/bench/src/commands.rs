//! The benchmark commands. Each returns its CSV rows; dataset loading,
//! index setup and validation happen outside the timed regions.

use std::collections::HashSet;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use bdl_core::{
    B1Tree, B2Tree, BdlConfig, BdlTree, DatasetKind, DatasetSpec, DynamicIndex, Format, KnnResult,
    Point, SplitHeuristic, VisualVarParams,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

use crate::cli::{Cli, Command, DataArgs, DatasetArg, FormatArg, GenArgs, ImplArg, QueryArgs, RunArgs, SplitArg, UpdateArgs};
use crate::harness::{
    batches_of, check_against_brute, checksum, equal_batches, join_times, measure, median,
    pct_batch_size, write_csv, write_csv_file, BenchResult,
};

/// Section labels of the mixed workload.
pub const MIXED_SECTIONS: [&str; 7] = ["INS0", "INS1", "INS2", "INS3", "DEL0", "DEL1", "DEL2"];
const MIXED_BATCHES: usize = 20;
const MIXED_DELETE_BATCHES: usize = 15;
const MIXED_GROUP: usize = 5;

pub fn run(cli: Cli) -> Result<()> {
    let (rows, args) = match &cli.command {
        Command::Gen(args) => return cmd_gen(args),
        Command::Build(args) => (cmd_build(args)?, args),
        Command::Insert(args) => (cmd_insert(args)?, &args.run),
        Command::Delete(args) => (cmd_delete(args)?, &args.run),
        Command::Knn(args) => (cmd_knn(args)?, &args.run),
        Command::Mixed(args) => (cmd_mixed(args)?, &args.run),
    };
    emit(args, &rows)
}

fn emit(args: &RunArgs, rows: &[BenchResult]) -> Result<()> {
    match &args.out {
        Some(path) => write_csv_file(path, rows),
        None => write_csv(std::io::stdout().lock(), rows),
    }
}

fn file_format(data: &DataArgs, path: &std::path::Path) -> Format {
    match data.format {
        Some(FormatArg::Binary) => Format::Binary,
        Some(FormatArg::Text) => Format::Text,
        None => Format::from_path(path),
    }
}

/// The dataset and a short descriptor for the CSV.
pub fn load_dataset(data: &DataArgs) -> Result<(Vec<Point>, String)> {
    let (kind, name) = match (&data.input, data.dataset) {
        (Some(path), _) => (
            DatasetKind::File {
                path: path.clone(),
                format: file_format(data, path),
            },
            path.file_name()
                .map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned()),
        ),
        (None, DatasetArg::Uniform) => (
            DatasetKind::Uniform,
            format!("uniform-n{}-d{}-s{}", data.n, data.d, data.seed),
        ),
        (None, DatasetArg::Visualvar) => {
            let mut p = VisualVarParams::defaults_for(data.n);
            if let Some(domain) = data.domain {
                p.domain = domain;
                p.step = domain / 1000.0;
            }
            if let Some(step) = data.step {
                p.step = step;
            }
            if let Some(pj) = data.p_jump {
                p.p_jump = pj;
            }
            (
                DatasetKind::VisualVar(p),
                format!("visualvar-n{}-d{}-s{}", data.n, data.d, data.seed),
            )
        }
    };
    let spec = DatasetSpec {
        kind,
        n: data.n,
        d: data.d,
        seed: data.seed,
    };
    let points = spec.load().context("loading dataset")?;
    ensure!(!points.is_empty(), "dataset is empty");
    Ok((points, name))
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let (points, _) = load_dataset(&args.data)?;
    bdl_core::write_points(&args.out, &points, file_format(&args.data, &args.out))
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

/// Everything a command needs besides its own flags.
struct Env<'a> {
    args: &'a RunArgs,
    points: Vec<Point>,
    dataset: String,
    d: usize,
    heuristic: SplitHeuristic,
    pool: ThreadPool,
    probes: Vec<Point>,
}

impl<'a> Env<'a> {
    fn new(args: &'a RunArgs) -> Result<Self> {
        ensure!(args.runs >= 1, "--runs must be at least 1");
        ensure!(!args.k.is_empty() && args.k.iter().all(|&k| k >= 1), "--k values must be at least 1");
        let (points, dataset) = load_dataset(&args.data)?;
        let d = points[0].dim();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .context("building thread pool")?;
        let n = points.len();
        let count = args.probes.min(n);
        let probes = (0..count).map(|i| points[i * n / count].clone()).collect();
        Ok(Self {
            args,
            dataset,
            d,
            heuristic: match args.split {
                SplitArg::Object => SplitHeuristic::ObjectMedian,
                SplitArg::Spatial => SplitHeuristic::SpatialMedian,
            },
            pool,
            probes,
            points,
        })
    }

    fn n(&self) -> usize {
        self.points.len()
    }

    fn k(&self) -> usize {
        self.args.k[0]
    }

    fn validating(&self) -> bool {
        self.args.validate && self.n() <= self.args.validate_cap
    }

    fn make(&self, imp: ImplArg) -> Result<Box<dyn DynamicIndex>> {
        Ok(match imp {
            ImplArg::Bdl => Box::new(BdlTree::new(
                self.d,
                BdlConfig {
                    buffer_size: self.args.buffer_size,
                    heuristic: self.heuristic,
                    use_bloom: !self.args.no_bloom,
                    initial_slots: 0,
                },
            )?),
            ImplArg::B1 => Box::new(B1Tree::new(self.d, self.heuristic)?),
            ImplArg::B2 => Box::new(B2Tree::new(self.d, self.heuristic)?),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        imp: ImplArg,
        operation: &str,
        section: &str,
        batch_size: Option<usize>,
        k: Option<usize>,
        times: &[f64],
        live_after: usize,
        sum: String,
    ) -> BenchResult {
        BenchResult {
            implementation: imp.name().into(),
            operation: operation.into(),
            section: section.into(),
            dataset: self.dataset.clone(),
            n: self.n(),
            d: self.d,
            heuristic: match self.args.split {
                SplitArg::Object => "object".into(),
                SplitArg::Spatial => "spatial".into(),
            },
            threads: self.pool.current_num_threads(),
            batch_size,
            k,
            runs: self.args.runs,
            warmup: self.args.warmup,
            median_s: median(times),
            run_times_s: join_times(times),
            live_after,
            checksum: sum,
        }
    }

    /// Checksum of the probe answers, validated against `live` when enabled.
    fn probe(&self, what: &str, idx: &dyn DynamicIndex, live: impl FnOnce() -> Vec<Point>) -> Result<String> {
        let k = self.k();
        let got = idx.knn(&self.probes, k)?;
        if self.validating() {
            check_against_brute(what, &got, &live(), &self.probes, k)?;
        }
        Ok(checksum(&got))
    }

    /// The dataset in a seeded random order, used for deletions.
    fn shuffled(&self) -> Vec<Point> {
        let mut v = self.points.clone();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(self.args.data.seed ^ 0x5eed_de1e));
        v
    }
}

/// Points of `all` whose coordinates do not occur in `removed`.
fn survivors(all: &[Point], removed: &[Point]) -> Vec<Point> {
    let key = |p: &Point| p.coords().iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>();
    let gone: HashSet<Vec<u64>> = removed.iter().map(key).collect();
    all.iter().filter(|p| !gone.contains(&key(p))).cloned().collect()
}

pub fn cmd_build(args: &RunArgs) -> Result<Vec<BenchResult>> {
    let env = Env::new(args)?;
    let mut rows = Vec::new();
    for &imp in &args.impls {
        let row = env.pool.install(|| -> Result<BenchResult> {
            let (times, idx) = measure(args.warmup, args.runs, || env.make(imp), |idx| Ok(idx.insert(&env.points)?))?;
            ensure!(idx.len() == env.n(), "{}: built {} of {} points", imp.name(), idx.len(), env.n());
            let sum = env.probe(imp.name(), idx.as_ref(), || env.points.clone())?;
            Ok(env.row(imp, "build", "", Some(env.n()), Some(env.k()), &times, idx.len(), sum))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn batch_sizes(args: &UpdateArgs, n: usize) -> Result<Vec<usize>> {
    if !args.batch_size.is_empty() {
        ensure!(args.batch_size.iter().all(|&s| s >= 1), "--batch-size values must be positive");
        return Ok(args.batch_size.clone());
    }
    ensure!(
        args.batch_pct.iter().all(|&p| p > 0.0 && p <= 100.0),
        "--batch-pct values must lie in (0, 100]"
    );
    Ok(args.batch_pct.iter().map(|&p| pct_batch_size(n, p)).collect())
}

fn plan(args: &UpdateArgs, n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let mut b = batches_of(n, size);
    if let Some(m) = args.max_batches {
        b.truncate(m);
    }
    b
}

pub fn cmd_insert(args: &UpdateArgs) -> Result<Vec<BenchResult>> {
    let env = Env::new(&args.run)?;
    let mut rows = Vec::new();
    for size in batch_sizes(args, env.n())? {
        let batches = plan(args, env.n(), size);
        let inserted = batches.last().map_or(0, |r| r.end);
        for &imp in &args.run.impls {
            let row = env.pool.install(|| -> Result<BenchResult> {
                let (times, idx) = measure(args.run.warmup, args.run.runs, || env.make(imp), |idx| {
                    for r in &batches {
                        idx.insert(&env.points[r.clone()])?;
                    }
                    Ok(())
                })?;
                ensure!(idx.len() == inserted, "{}: {} live after inserting {inserted}", imp.name(), idx.len());
                let sum = env.probe(imp.name(), idx.as_ref(), || env.points[..inserted].to_vec())?;
                Ok(env.row(imp, "insert", "", Some(size), Some(env.k()), &times, idx.len(), sum))
            })?;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn cmd_delete(args: &UpdateArgs) -> Result<Vec<BenchResult>> {
    let env = Env::new(&args.run)?;
    let order = env.shuffled();
    let mut rows = Vec::new();
    for size in batch_sizes(args, env.n())? {
        let batches = plan(args, env.n(), size);
        let deleted = batches.last().map_or(0, |r| r.end);
        for &imp in &args.run.impls {
            let row = env.pool.install(|| -> Result<BenchResult> {
                let setup = || -> Result<Box<dyn DynamicIndex>> {
                    let mut idx = env.make(imp)?;
                    idx.insert(&env.points)?;
                    Ok(idx)
                };
                let (times, idx) = measure(args.run.warmup, args.run.runs, setup, |idx| {
                    for r in &batches {
                        idx.erase(&order[r.clone()])?;
                    }
                    Ok(())
                })?;
                let sum = env.probe(imp.name(), idx.as_ref(), || survivors(&env.points, &order[..deleted]))?;
                Ok(env.row(imp, "delete", "", Some(size), Some(env.k()), &times, idx.len(), sum))
            })?;
            rows.push(row);
        }
    }
    Ok(rows)
}

fn queries(env: &Env, pct: f64) -> Result<Vec<Point>> {
    ensure!(pct > 0.0 && pct <= 100.0, "--query-pct must lie in (0, 100]");
    Ok(env.points[..pct_batch_size(env.n(), pct).min(env.n())].to_vec())
}

pub fn cmd_knn(args: &QueryArgs) -> Result<Vec<BenchResult>> {
    let env = Env::new(&args.run)?;
    let qs = queries(&env, args.query_pct)?;
    let mut rows = Vec::new();
    for &imp in &args.run.impls {
        env.pool.install(|| -> Result<()> {
            let mut idx = env.make(imp)?;
            idx.insert(&env.points)?;
            for &k in &args.run.k {
                if env.validating() {
                    let got = idx.knn(&qs, k)?;
                    check_against_brute(imp.name(), &got, &env.points, &qs, k)?;
                }
                let (times, last) = measure(args.run.warmup, args.run.runs, || Ok(None), |out: &mut Option<KnnResult>| {
                    *out = Some(idx.knn(&qs, k)?);
                    Ok(())
                })?;
                let sum = checksum(last.as_ref().expect("measured"));
                rows.push(env.row(imp, "knn", "", Some(qs.len()), Some(k), &times, idx.len(), sum));
            }
            Ok(())
        })?;
    }
    Ok(rows)
}

/// Per-section measurements of one pass of the mixed workload.
struct Section {
    update_s: f64,
    knn_s: f64,
    live: usize,
    checksum: String,
}

pub fn cmd_mixed(args: &QueryArgs) -> Result<Vec<BenchResult>> {
    let env = Env::new(&args.run)?;
    let qs = queries(&env, args.query_pct)?;
    let n = env.n();
    let k = env.k();
    let inserts = equal_batches(n, MIXED_BATCHES);
    let order = env.shuffled();
    let deletes = &inserts[..MIXED_DELETE_BATCHES];
    let mut rows = Vec::new();
    for &imp in &args.run.impls {
        let passes = env.pool.install(|| -> Result<Vec<Vec<Section>>> {
            let mut passes = Vec::new();
            for round in 0..args.run.warmup + args.run.runs {
                let validate = env.validating() && round == 0;
                let mut idx = env.make(imp)?;
                let mut sections = Vec::with_capacity(MIXED_SECTIONS.len());
                let groups = inserts
                    .chunks(MIXED_GROUP)
                    .map(|g| (true, g))
                    .chain(deletes.chunks(MIXED_GROUP).map(|g| (false, g)));
                for (s, (is_insert, group)) in groups.enumerate() {
                    let t = Instant::now();
                    for r in group {
                        if is_insert {
                            idx.insert(&env.points[r.clone()])?;
                        } else {
                            idx.erase(&order[r.clone()])?;
                        }
                    }
                    let update_s = t.elapsed().as_secs_f64();
                    let t = Instant::now();
                    let got = idx.knn(&qs, k)?;
                    let knn_s = t.elapsed().as_secs_f64();
                    if validate {
                        let end = group.last().expect("non-empty group").end;
                        let live = if is_insert {
                            env.points[..end].to_vec()
                        } else {
                            survivors(&env.points, &order[..end])
                        };
                        check_against_brute(MIXED_SECTIONS[s], &got, &live, &qs, k)?;
                    }
                    sections.push(Section {
                        update_s,
                        knn_s,
                        live: idx.len(),
                        checksum: checksum(&got),
                    });
                }
                if round >= args.run.warmup {
                    passes.push(sections);
                }
            }
            Ok(passes)
        })?;
        let last = passes.last().expect("at least one run");
        for (s, label) in MIXED_SECTIONS.iter().enumerate() {
            if passes.iter().any(|p| p[s].checksum != last[s].checksum) {
                bail!("{}: {label} answers differ between runs", imp.name());
            }
            let upd: Vec<f64> = passes.iter().map(|p| p[s].update_s).collect();
            let knn: Vec<f64> = passes.iter().map(|p| p[s].knn_s).collect();
            let (live, sum) = (last[s].live, last[s].checksum.clone());
            rows.push(env.row(imp, "mixed_update", label, Some(n / MIXED_BATCHES), None, &upd, live, sum.clone()));
            rows.push(env.row(imp, "mixed_knn", label, Some(qs.len()), Some(k), &knn, live, sum));
        }
    }
    Ok(rows)
}
