//! Command-line driver: data generation, compression, bound computation,
//! mining experiments and self-verification.
//!
//! Every command reads CSV (or the binary database format) and writes CSV;
//! all randomness flows from explicit --seed flags, so identical invocations
//! produce byte-identical output. CM_THREADS caps the worker pool.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use cdmine::baselines::{gen_projection, pca_basis, project, projected_distance, ProjectionKind};
use cdmine::bounds::distance_bounds;
use cdmine::compress::{
    compress_first, compress_top, read_db, storage_budget, write_db, CompressedSeq,
};
use cdmine::csvio::{read_rows, read_sequences, write_sequences, LongTable};
use cdmine::datagen::{gen_synthetic, image_signature, SyntheticKind};
use cdmine::error::{Error, Result};
use cdmine::mining::{kmeans_compressed, kmeans_pp_indices, knn_projected, knn_search, Proxy};
use cdmine::oracle::{alternating_bounds, grid_bruteforce, kkt_check, ALT_DEFAULT_MAX_ITER};
use cdmine::transform::{euclidean, forward, Basis, Sequence};
use cdmine::vptree::{read_index, vptree_build, vptree_search, write_index, PruneMode};
use cdmine::{Branch, SlotProblem};

#[derive(Parser)]
#[command(name = "cdmine", version, about = "Compressed-domain distance bounds and mining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    RandomWalk,
    PeriodicMixture,
    Sparsified,
}

impl From<KindArg> for SyntheticKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::RandomWalk => SyntheticKind::RandomWalk,
            KindArg::PeriodicMixture => SyntheticKind::PeriodicMixture,
            KindArg::Sparsified => SyntheticKind::Sparsified,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Dft,
    Haar,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Dft => Basis::Dft,
            BasisArg::Haar => Basis::Haar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Top,
    First,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProxyArg {
    Lb,
    Ub,
    Avg,
}

impl From<ProxyArg> for Proxy {
    fn from(p: ProxyArg) -> Self {
        match p {
            ProxyArg::Lb => Proxy::Lb,
            ProxyArg::Ub => Proxy::Ub,
            ProxyArg::Avg => Proxy::Avg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KnnMethodArg {
    Optimal,
    Grp,
    Brp,
    Arp,
    Pca,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Conservative,
    Aggressive,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV (one sequence per row).
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Number of sequences.
        #[arg(long = "n")]
        count: usize,
        /// Sequence length.
        #[arg(long = "N")]
        len: usize,
        /// Sparsity parameter: the sparsified kind keeps 3s nonzero bins.
        #[arg(long = "s", default_value_t = 16)]
        s: usize,
        #[arg(long)]
        seed: u64,
        /// Output CSV ("-" = stdout).
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Column-sum signature of a 0/1 image given as CSV rows.
    Signature {
        /// Input image CSV ("-" = stdin).
        #[arg(long, default_value = "-")]
        input: String,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Compress CSV sequences into a binary database.
    Compress {
        #[arg(long, value_enum)]
        basis: BasisArg,
        /// Number of coefficients kept per object.
        #[arg(long = "s")]
        s: usize,
        #[arg(long, value_enum, default_value = "top")]
        method: MethodArg,
        #[arg(long, default_value = "-")]
        input: String,
        /// Output database ("-" = stdout).
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Lower/upper distance bounds for object pairs of a database.
    Bounds {
        #[arg(long)]
        db: PathBuf,
        /// Original sequences; adds a true-distance column.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Random pair sample size (default: all pairs).
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Normalized bound tightness of every method at equal storage budget.
    Tightness {
        /// Input sequences (CSV).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "dft")]
        basis: BasisArg,
        /// Comma-separated list of coefficient counts.
        #[arg(long = "s-list", default_value = "8,16,32,64", value_delimiter = ',')]
        s_list: Vec<usize>,
        /// Number of sampled pairs.
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// k-NN in the compressed domain or in a projected baseline space.
    Knn {
        #[arg(long, value_enum, default_value = "optimal")]
        method: KnnMethodArg,
        /// Database (optimal method).
        #[arg(long)]
        db: Option<PathBuf>,
        /// Query database (optimal method).
        #[arg(long = "query-db")]
        query_db: Option<PathBuf>,
        /// Original sequences (projection methods).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Query sequences (projection methods).
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Budget anchor: projections use the storage budget of s
        /// coefficients in --basis.
        #[arg(long = "budget-s")]
        budget_s: Option<usize>,
        #[arg(long, value_enum, default_value = "dft")]
        basis: BasisArg,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "avg")]
        proxy: ProxyArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Bounds-based k-Means on a compressed database.
    Kmeans {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long = "max-iter", default_value_t = 100)]
        max_iter: usize,
        /// Original sequences; adds the uncompressed objective per iteration.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Build/search a VP-tree index and report pruning power.
    Index {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long = "query-db")]
        query_db: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, default_value_t = 8)]
        bucket: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the database + tree container here after building.
        #[arg(long)]
        save: Option<PathBuf>,
        /// Load a previously saved container instead of building.
        #[arg(long)]
        load: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Cross-check the exact solver against the iterative and grid oracles.
    Verify {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long = "grid-instances", default_value_t = 100)]
        grid_instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "-")]
        output: String,
    },
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("CM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

fn open_output(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn load_db(path: &PathBuf) -> Result<Vec<CompressedSeq>> {
    read_db(File::open(path)?)
}

fn load_sequences(path: &PathBuf) -> Result<Vec<Sequence>> {
    read_sequences(BufReader::new(File::open(path)?))
}

/// First-coefficient count occupying the same budget as s best coefficients:
/// no positions are stored, so more coefficients fit.
fn first_coeff_budget(s: usize, basis: Basis, max_bins: usize) -> usize {
    let r = storage_budget(s, basis);
    let s_first = match basis {
        Basis::Dft => (r - 1) / 2,
        Basis::Haar => r - 1,
    };
    s_first.clamp(1, max_bins)
}

/// Deterministic sample of distinct index pairs (i < j).
fn sample_pairs(n: usize, want: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    let all = n * (n - 1) / 2;
    let want = want.unwrap_or(all).min(all);
    if want == all {
        let mut out = Vec::with_capacity(all);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push((i, j));
            }
        }
        return out;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = (i.min(j), i.max(j));
        if seen.insert(pair) {
            out.push(pair);
        }
    }
    out
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen {
            kind,
            count,
            len,
            s,
            seed,
            output,
        } => {
            let data = gen_synthetic(kind.into(), count, len, s, seed)?;
            let mut out = open_output(&output)?;
            write_sequences(&mut out, &data)?;
            out.flush()?;
            eprintln!("generated {count} sequences of length {len}");
            Ok(())
        }

        Command::Signature { input, output } => {
            let rows = read_rows(open_input(&input)?)?;
            let sig = image_signature(&rows)?;
            let mut out = open_output(&output)?;
            write_sequences(&mut out, std::slice::from_ref(&sig))?;
            out.flush()?;
            Ok(())
        }

        Command::Compress {
            basis,
            s,
            method,
            input,
            output,
        } => {
            let basis: Basis = basis.into();
            let seqs = read_sequences(open_input(&input)?)?;
            let db: Result<Vec<CompressedSeq>> = seqs
                .iter()
                .map(|seq| {
                    let spec = forward(seq, basis)?;
                    match method {
                        MethodArg::Top => compress_top(&spec, s),
                        MethodArg::First => compress_first(&spec, s),
                    }
                })
                .collect();
            let db = db?;
            let mut out = open_output(&output)?;
            write_db(&mut out, &db)?;
            out.flush()?;
            eprintln!("compressed {} records (basis {}, s {s})", db.len(), basis.as_str());
            Ok(())
        }

        Command::Bounds {
            db,
            data,
            sample,
            seed,
            output,
        } => {
            let db = load_db(&db)?;
            let originals = data.map(|p| load_sequences(&p)).transpose()?;
            if let Some(orig) = &originals {
                if orig.len() != db.len() {
                    return Err(Error::InvalidInput(
                        "data row count does not match the database".into(),
                    ));
                }
            }
            let pairs = sample_pairs(db.len(), sample, seed);
            let out = open_output(&output)?;
            let mut table = if originals.is_some() {
                LongTable::new(out, &["pair_id", "i", "j", "lb", "ub", "true_dist"])?
            } else {
                LongTable::new(out, &["pair_id", "i", "j", "lb", "ub"])?
            };
            for (pid, &(i, j)) in pairs.iter().enumerate() {
                let b = distance_bounds(&db[i], &db[j])?;
                match &originals {
                    Some(orig) => {
                        let d = euclidean(&orig[i], &orig[j])?;
                        table.row(&[&pid, &i, &j, &b.lb, &b.ub, &d])?;
                    }
                    None => table.row(&[&pid, &i, &j, &b.lb, &b.ub])?,
                }
            }
            Ok(())
        }

        Command::Tightness {
            input,
            basis,
            s_list,
            pairs,
            seed,
            output,
        } => {
            let basis: Basis = basis.into();
            let seqs = load_sequences(&input)?;
            let n = seqs.len();
            if n < 2 {
                return Err(Error::InvalidInput("need at least two sequences".into()));
            }
            let len = seqs[0].len();
            let specs: Result<Vec<_>> = seqs.iter().map(|s| forward(s, basis)).collect();
            let specs = specs?;
            let max_bins = specs[0].storable_bins();
            let pair_ids = sample_pairs(n, Some(pairs), seed);
            let truth: Result<Vec<f64>> = pair_ids
                .iter()
                .map(|&(i, j)| euclidean(&seqs[i], &seqs[j]))
                .collect();
            let truth = truth?;
            let out = open_output(&output)?;
            let mut table = LongTable::new(out, &["method", "s", "pair_id", "metric", "value"])?;
            for &s in &s_list {
                let s = s.min(max_bins);
                // Bound-producing methods.
                let top: Result<Vec<_>> = specs.iter().map(|sp| compress_top(sp, s)).collect();
                let top = top?;
                let s_first = first_coeff_budget(s, basis, max_bins);
                let first: Result<Vec<_>> =
                    specs.iter().map(|sp| compress_first(sp, s_first)).collect();
                let first = first?;
                for (name, db) in [("optimal", &top), ("first", &first)] {
                    for (pid, &(i, j)) in pair_ids.iter().enumerate() {
                        let d = truth[pid];
                        if d <= 0.0 {
                            continue;
                        }
                        let b = distance_bounds(&db[i], &db[j])?;
                        table.row(&[&name, &s, &pid, &"lb_norm", &(b.lb / d)])?;
                        table.row(&[&name, &s, &pid, &"ub_norm", &(b.ub / d)])?;
                        table.row(&[&name, &s, &pid, &"width_norm", &(b.width() / d)])?;
                    }
                }
                // Point-estimate baselines at the same budget.
                let budget = storage_budget(s, basis).min(len);
                for kind in [ProjectionKind::Grp, ProjectionKind::Brp, ProjectionKind::Arp] {
                    let m = gen_projection(kind, budget, len, seed)?;
                    let projected: Result<Vec<_>> = seqs.iter().map(|x| project(&m, x)).collect();
                    let projected = projected?;
                    for (pid, &(i, j)) in pair_ids.iter().enumerate() {
                        let d = truth[pid];
                        if d <= 0.0 {
                            continue;
                        }
                        let dp = projected_distance(&projected[i], &projected[j])?;
                        table.row(&[&kind.as_str(), &s, &pid, &"point_norm", &(dp / d)])?;
                    }
                }
                if n > budget {
                    // A degenerate spectrum can defeat the power iteration;
                    // the bound methods are still worth reporting then.
                    match pca_basis(&seqs, budget) {
                        Ok(m) => {
                            let projected: Result<Vec<_>> =
                                seqs.iter().map(|x| project(&m, x)).collect();
                            let projected = projected?;
                            for (pid, &(i, j)) in pair_ids.iter().enumerate() {
                                let d = truth[pid];
                                if d <= 0.0 {
                                    continue;
                                }
                                let dp = projected_distance(&projected[i], &projected[j])?;
                                table.row(&[&"pca", &s, &pid, &"point_norm", &(dp / d)])?;
                            }
                        }
                        Err(e) => eprintln!("warning: skipping pca at s = {s}: {e}"),
                    }
                }
            }
            Ok(())
        }

        Command::Knn {
            method,
            db,
            query_db,
            data,
            queries,
            budget_s,
            basis,
            k,
            proxy,
            seed,
            output,
        } => {
            let basis: Basis = basis.into();
            let out = open_output(&output)?;
            let mut table = LongTable::new(out, &["query_id", "rank", "object_id", "value"])?;
            match method {
                KnnMethodArg::Optimal => {
                    let db =
                        load_db(&db.ok_or_else(|| Error::InvalidInput("--db required".into()))?)?;
                    let qdb = load_db(
                        &query_db
                            .ok_or_else(|| Error::InvalidInput("--query-db required".into()))?,
                    )?;
                    for (qid, q) in qdb.iter().enumerate() {
                        let r = knn_search(&db, q, k, proxy.into())?;
                        for (rank, (&id, &v)) in r.indices.iter().zip(&r.proxy_values).enumerate()
                        {
                            table.row(&[&qid, &rank, &id, &v])?;
                        }
                    }
                }
                KnnMethodArg::Grp | KnnMethodArg::Brp | KnnMethodArg::Arp | KnnMethodArg::Pca => {
                    let data = load_sequences(
                        &data.ok_or_else(|| Error::InvalidInput("--data required".into()))?,
                    )?;
                    let queries = load_sequences(
                        &queries.ok_or_else(|| Error::InvalidInput("--queries required".into()))?,
                    )?;
                    let s = budget_s
                        .ok_or_else(|| Error::InvalidInput("--budget-s required".into()))?;
                    let len = data[0].len();
                    let d = storage_budget(s, basis).min(len);
                    let m = match method {
                        KnnMethodArg::Grp => gen_projection(ProjectionKind::Grp, d, len, seed)?,
                        KnnMethodArg::Brp => gen_projection(ProjectionKind::Brp, d, len, seed)?,
                        KnnMethodArg::Arp => gen_projection(ProjectionKind::Arp, d, len, seed)?,
                        KnnMethodArg::Pca => pca_basis(&data, d)?,
                        KnnMethodArg::Optimal => unreachable!(),
                    };
                    let projected: Result<Vec<_>> = data.iter().map(|x| project(&m, x)).collect();
                    let projected = projected?;
                    for (qid, q) in queries.iter().enumerate() {
                        let qp = project(&m, q)?;
                        let r = knn_projected(&projected, &qp, k)?;
                        for (rank, (&id, &v)) in r.indices.iter().zip(&r.proxy_values).enumerate()
                        {
                            table.row(&[&qid, &rank, &id, &v])?;
                        }
                    }
                }
            }
            Ok(())
        }

        Command::Kmeans {
            db,
            k,
            seed,
            max_iter,
            data,
            output,
        } => {
            let db = load_db(&db)?;
            let originals = data.map(|p| load_sequences(&p)).transpose()?;
            let original_vecs: Option<Vec<Vec<f64>>> =
                originals.map(|seqs| seqs.iter().map(|s| s.values().to_vec()).collect());
            // Seed with k-Means++ on the originals when available, otherwise
            // on the dense reconstructions.
            let seed_source: Vec<Vec<f64>> = match &original_vecs {
                Some(v) => v.clone(),
                None => db
                    .iter()
                    .map(|c| {
                        c.to_dense_spectrum()
                            .coeffs()
                            .iter()
                            .flat_map(|z| [z.re, z.im])
                            .collect()
                    })
                    .collect(),
            };
            let seeds = kmeans_pp_indices(&seed_source, k, seed)?;
            let clustering = kmeans_compressed(&db, k, &seeds, max_iter, original_vecs.as_deref())?;
            let out = open_output(&output)?;
            let mut table = LongTable::new(out, &["record", "key", "value"])?;
            for (i, &c) in clustering.assignment.iter().enumerate() {
                table.row(&[&"assignment", &i, &c])?;
            }
            for (it, obj) in clustering.objective_trace.iter().enumerate() {
                table.row(&[&"objective", &it, obj])?;
            }
            table.row(&[&"iterations", &0, &clustering.iterations])?;
            table.row(&[&"converged", &0, &(clustering.converged as u8)])?;
            eprintln!(
                "k-means: {} iterations, converged = {}",
                clustering.iterations, clustering.converged
            );
            Ok(())
        }

        Command::Index {
            db,
            query_db,
            k,
            mode,
            bucket,
            seed,
            save,
            load,
            output,
        } => {
            let (db, tree) = match load {
                Some(path) => {
                    let mut buf = Vec::new();
                    File::open(path)?.read_to_end(&mut buf)?;
                    read_index(&buf)?
                }
                None => {
                    let db = load_db(
                        &db.ok_or_else(|| Error::InvalidInput("--db or --load required".into()))?,
                    )?;
                    let tree = vptree_build(&db, seed, bucket)?;
                    (db, tree)
                }
            };
            if let Some(path) = save {
                let bytes = write_index(&db, &tree)?;
                File::create(path)?.write_all(&bytes)?;
            }
            let qdb = load_db(&query_db)?;
            let out = open_output(&output)?;
            let mut table =
                LongTable::new(out, &["mode", "query_id", "rank", "object_id", "value"])?;
            let modes: &[PruneMode] = match mode {
                ModeArg::Conservative => &[PruneMode::Conservative],
                ModeArg::Aggressive => &[PruneMode::Aggressive],
                ModeArg::Both => &[PruneMode::Conservative, PruneMode::Aggressive],
            };
            let mut conservative_sets: Vec<std::collections::HashSet<usize>> = Vec::new();
            for &m in modes {
                let name = match m {
                    PruneMode::Conservative => "conservative",
                    PruneMode::Aggressive => "aggressive",
                };
                for (qid, q) in qdb.iter().enumerate() {
                    let (res, stats) = vptree_search(&tree, &db, q, k, m)?;
                    for (rank, (&id, &v)) in res.indices.iter().zip(&res.proxy_values).enumerate()
                    {
                        table.row(&[&name, &qid, &rank, &id, &v])?;
                    }
                    table.row(&[&name, &qid, &0, &"pruning_power", &stats.pruning_power()])?;
                    match m {
                        PruneMode::Conservative => {
                            conservative_sets.push(res.indices.iter().copied().collect());
                        }
                        PruneMode::Aggressive => {
                            // Fraction of the aggressive answer present in
                            // the conservative one; reported, not asserted.
                            if let Some(cons) = conservative_sets.get(qid) {
                                let hits =
                                    res.indices.iter().filter(|i| cons.contains(i)).count();
                                let precision = hits as f64 / k as f64;
                                table.row(&[&name, &qid, &0, &"precision", &precision])?;
                            }
                        }
                    }
                }
            }
            Ok(())
        }

        Command::Verify {
            instances,
            grid_instances,
            seed,
            output,
        } => verify(instances, grid_instances, seed, &output),
    }
}

/// Random slot problem mirroring compressed-pair structure: known
/// coefficients sit at or above the counterpart's floor, residuals within
/// capacity.
fn random_problem(rng: &mut impl Rng, max_side: usize, n3_max: usize) -> SlotProblem {
    let n1 = rng.random_range(0..=max_side);
    let n2 = rng.random_range(0..=max_side);
    let n3 = rng.random_range(0..=n3_max);
    let ceil_a = rng.random_range(0.3..1.5);
    let ceil_b = rng.random_range(0.3..1.5);
    let b_p1: Vec<f64> = (0..n1).map(|_| rng.random_range(ceil_b..3.0 * ceil_b)).collect();
    let a_p2: Vec<f64> = (0..n2).map(|_| rng.random_range(ceil_a..3.0 * ceil_a)).collect();
    let e_x = if n1 + n3 > 0 {
        rng.random_range(0.0..(n1 + n3) as f64 * ceil_a * ceil_a)
    } else {
        0.0
    };
    let e_q = if n2 + n3 > 0 {
        rng.random_range(0.0..(n2 + n3) as f64 * ceil_b * ceil_b)
    } else {
        0.0
    };
    SlotProblem {
        b_p1,
        a_p2,
        n3,
        e_x,
        e_q,
        ceil_a,
        ceil_b,
    }
}

fn verify(instances: usize, grid_instances: usize, seed: u64, output: &str) -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let out = open_output(output)?;
    let mut table =
        LongTable::new(out, &["check", "instances", "max_residual", "threshold", "pass"])?;

    // Exact solver vs alternating-waterfill oracle.
    let mut max_dev: f64 = 0.0;
    for _ in 0..instances {
        let p = random_problem(&mut rng, 6, 6);
        let dw = cdmine::bounds::double_waterfill_slots(&p)?;
        let alt = alternating_bounds(&p, 1e-10, ALT_DEFAULT_MAX_ITER)?;
        let dev = (dw.v_opt - alt.v_opt).abs() / dw.v_opt.abs().max(1.0);
        max_dev = max_dev.max(dev);
    }
    let pass = max_dev <= 1e-6;
    failures += usize::from(!pass);
    table.row(&[&"alternating_oracle", &instances, &max_dev, &1e-6, &u8::from(pass)])?;

    // KKT certification of solver outputs.
    let mut max_kkt: f64 = 0.0;
    for _ in 0..instances {
        let p = random_problem(&mut rng, 6, 6);
        let dw = cdmine::bounds::double_waterfill_slots(&p)?;
        if dw.branch == Branch::Unconstrained {
            continue;
        }
        max_kkt = max_kkt.max(kkt_check(&dw, &p, 1e-8).max_residual());
    }
    let pass = max_kkt <= 1e-8;
    failures += usize::from(!pass);
    table.row(&[&"kkt", &instances, &max_kkt, &1e-8, &u8::from(pass)])?;

    // Grid brute force on small instances: the exact optimum never loses to
    // the grid and stays within the one-step discretization slack.
    let mut max_gap: f64 = 0.0;
    let steps = 16usize;
    for _ in 0..grid_instances {
        let p = random_problem(&mut rng, 2, 2);
        let dw = cdmine::bounds::double_waterfill_slots(&p)?;
        let grid = grid_bruteforce(&p, steps)?;
        let h_a = p.ceil_a / steps as f64;
        let h_b = p.ceil_b / steps as f64;
        let slack = h_a * (p.b_p1.iter().sum::<f64>() + p.n3 as f64 * p.ceil_b)
            + h_b * (p.a_p2.iter().sum::<f64>() + p.n3 as f64 * p.ceil_a)
            + 1e-9;
        let below = (dw.v_opt - grid).max(0.0) / 1e-9;
        let above = (grid - dw.v_opt) / slack;
        max_gap = max_gap.max(below.max(above));
    }
    let pass = max_gap <= 1.0 + 1e-9;
    failures += usize::from(!pass);
    table.row(&[&"grid_oracle", &grid_instances, &max_gap, &1.0, &u8::from(pass)])?;

    // Sandwich property on random compressed pairs.
    let mut violations = 0usize;
    let checks = instances.min(500);
    for _ in 0..checks {
        let n = 64;
        let x = Sequence::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let q = Sequence::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let s = rng.random_range(1..=8);
        for basis in [Basis::Dft, Basis::Haar] {
            let cx = compress_top(&forward(&x, basis)?, s)?;
            let cq = compress_top(&forward(&q, basis)?, s)?;
            let b = distance_bounds(&cx, &cq)?;
            let d = euclidean(&x, &q)?;
            if !(b.lb - 1e-9 <= d && d <= b.ub + 1e-9) {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    failures += usize::from(!pass);
    table.row(&[&"sandwich", &(2 * checks), &(violations as f64), &0.0, &u8::from(pass)])?;

    if failures > 0 {
        return Err(Error::InvalidInput(format!("{failures} verification failures")));
    }
    eprintln!("all verification checks passed");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_sampling_is_deterministic_and_unique() {
        let a = sample_pairs(50, Some(100), 7);
        let b = sample_pairs(50, Some(100), 7);
        assert_eq!(a, b);
        let set: std::collections::HashSet<(usize, usize)> = a.iter().copied().collect();
        assert_eq!(set.len(), a.len());
        assert!(a.iter().all(|&(i, j)| i < j && j < 50));
    }

    #[test]
    fn first_coeff_budget_matches_storage_accounting() {
        // s = 16 DFT: budget 41 words; a first-coefficient object spends
        // 2s' + 1 of them, so 20 coefficients fit.
        assert_eq!(first_coeff_budget(16, Basis::Dft, 1000), 20);
        // s = 16 Haar: 21 words -> 20 real coefficients.
        assert_eq!(first_coeff_budget(16, Basis::Haar, 1000), 20);
        assert_eq!(first_coeff_budget(16, Basis::Dft, 10), 10);
    }
}
