//! Mining in the compressed domain: k-NN with interval-distance proxies and
//! bounds-based k-Means.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bounds::{bounds_vs_uncompressed, distance_bounds, BoundPair};
use crate::compress::CompressedSeq;
use crate::error::{Error, Result};
use crate::transform::Spectrum;

/// Scalar proxy standing in for the unknown true distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proxy {
    /// Lower bound.
    Lb,
    /// Upper bound.
    Ub,
    /// Midpoint (lb + ub) / 2; the default.
    Avg,
    /// Plain distance in a projected space.
    Point,
}

impl Proxy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Proxy::Lb => "lb",
            Proxy::Ub => "ub",
            Proxy::Avg => "avg",
            Proxy::Point => "point",
        }
    }

    fn value(&self, b: &BoundPair) -> f64 {
        match self {
            Proxy::Lb => b.lb,
            Proxy::Ub => b.ub,
            Proxy::Avg => b.mid(),
            Proxy::Point => b.mid(),
        }
    }
}

impl std::str::FromStr for Proxy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lb" | "lower" => Ok(Proxy::Lb),
            "ub" | "upper" => Ok(Proxy::Ub),
            "avg" | "mid" => Ok(Proxy::Avg),
            "point" => Ok(Proxy::Point),
            other => Err(Error::invalid(format!("unknown proxy '{other}'"))),
        }
    }
}

/// Ranked k-NN answer.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    /// Object ids, closest first. Ties broken by id.
    pub indices: Vec<usize>,
    pub proxy_used: Proxy,
    /// Proxy distances of the ranked objects (non-decreasing).
    pub proxy_values: Vec<f64>,
}

/// Rank the k objects of `db` closest to `query` under the chosen
/// bound-derived proxy. Bounds are computed against every object.
pub fn knn_search(
    db: &[CompressedSeq],
    query: &CompressedSeq,
    k: usize,
    proxy: Proxy,
) -> Result<KnnResult> {
    if db.is_empty() {
        return Err(Error::invalid("knn_search on an empty database"));
    }
    if k == 0 || k > db.len() {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            db.len()
        )));
    }
    if proxy == Proxy::Point {
        return Err(Error::invalid("Point proxy applies to projected search only"));
    }
    let bounds: Vec<BoundPair> = db
        .par_iter()
        .map(|obj| distance_bounds(obj, query))
        .collect::<Result<_>>()?;
    Ok(rank(bounds.iter().map(|b| proxy.value(b)), k, proxy))
}

/// Full interval table against a database, for callers that need more than
/// one proxy per pair.
pub fn all_bounds(db: &[CompressedSeq], query: &CompressedSeq) -> Result<Vec<BoundPair>> {
    db.par_iter().map(|obj| distance_bounds(obj, query)).collect()
}

/// Plain Euclidean ranking in a projected space.
pub fn knn_projected(db: &[Vec<f64>], query: &[f64], k: usize) -> Result<KnnResult> {
    if db.is_empty() {
        return Err(Error::invalid("knn_projected on an empty database"));
    }
    if k == 0 || k > db.len() {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            db.len()
        )));
    }
    if db.iter().any(|v| v.len() != query.len()) {
        return Err(Error::InvalidPair("projected dimension mismatch".into()));
    }
    let dists = db.iter().map(|v| {
        v.iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });
    Ok(rank(dists, k, Proxy::Point))
}

fn rank(values: impl Iterator<Item = f64>, k: usize, proxy: Proxy) -> KnnResult {
    let mut order: Vec<(f64, usize)> = values.enumerate().map(|(i, v)| (v, i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(k);
    KnnResult {
        indices: order.iter().map(|&(_, i)| i).collect(),
        proxy_used: proxy,
        proxy_values: order.iter().map(|&(v, _)| v).collect(),
    }
}

/// Fraction of the true k-NN set recovered.
pub fn recall_at_k(found: &KnnResult, truth: &[usize]) -> Result<f64> {
    if found.indices.len() != truth.len() {
        return Err(Error::invalid(format!(
            "result size {} does not match truth size {}",
            found.indices.len(),
            truth.len()
        )));
    }
    let truth_set: std::collections::HashSet<usize> = truth.iter().copied().collect();
    let hits = found.indices.iter().filter(|i| truth_set.contains(i)).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Exact k-NN on uncompressed vectors; the ground truth for recall studies.
pub fn knn_exact(data: &[Vec<f64>], query: &[f64], k: usize) -> Result<KnnResult> {
    knn_projected(data, query, k)
}

/// Clustering output.
#[derive(Debug, Clone)]
pub struct Clustering {
    /// Object id -> cluster id in [0, k).
    pub assignment: Vec<usize>,
    /// Dense centroid spectra (compressed path) or projected centroids
    /// flattened elsewhere; kept here only for the compressed path.
    pub centroids: Vec<Spectrum>,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of intraclass variances per iteration, computed on uncompressed
    /// data when it was supplied.
    pub objective_trace: Vec<f64>,
}

/// Bounds-based Lloyd iteration on compressed objects (assignment by the
/// midpoint proxy against dense centroids, update by averaging stored
/// representations on the union of supports).
///
/// `seed_ids` are database indices whose dense representations become the
/// initial centroids; use [`kmeans_pp_indices`] or share ids with a baseline
/// for same-seed comparisons. `originals`, when given, adds the
/// uncompressed-domain objective to the trace each iteration.
pub fn kmeans_compressed(
    db: &[CompressedSeq],
    k: usize,
    seed_ids: &[usize],
    max_iter: usize,
    originals: Option<&[Vec<f64>]>,
) -> Result<Clustering> {
    if k == 0 || k > db.len() {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            db.len()
        )));
    }
    if seed_ids.len() != k || seed_ids.iter().any(|&i| i >= db.len()) {
        return Err(Error::invalid("need exactly k valid seed ids"));
    }
    if let Some(orig) = originals {
        if orig.len() != db.len() {
            return Err(Error::invalid("originals must match the database size"));
        }
    }
    let mut centroids: Vec<Spectrum> = seed_ids.iter().map(|&i| db[i].to_dense_spectrum()).collect();

    let mut assignment = vec![0usize; db.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // Assignment step: midpoint proxy against every centroid.
        let mids: Vec<Vec<f64>> = db
            .par_iter()
            .map(|obj| {
                centroids
                    .iter()
                    .map(|c| bounds_vs_uncompressed(obj, c).map(|b| b.mid()))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let new_assignment: Vec<usize> = mids.iter().map(|row| argmin(row)).collect();

        // Empty-cluster policy: re-seed from the object farthest from its own
        // centroid; repeat per empty cluster with distinct donors.
        let mut counts = vec![0usize; k];
        for &c in &new_assignment {
            counts[c] += 1;
        }
        let mut new_assignment = new_assignment;
        let mut taken: Vec<usize> = Vec::new();
        for cluster in 0..k {
            if counts[cluster] > 0 {
                continue;
            }
            let donor = (0..db.len())
                .filter(|i| !taken.contains(i) && counts[new_assignment[*i]] > 1)
                .max_by(|&i, &j| {
                    mids[i][new_assignment[i]]
                        .total_cmp(&mids[j][new_assignment[j]])
                        .then(j.cmp(&i))
                });
            if let Some(d) = donor {
                counts[new_assignment[d]] -= 1;
                new_assignment[d] = cluster;
                counts[cluster] += 1;
                taken.push(d);
            }
        }

        if let Some(orig) = originals {
            trace.push(intraclass_variance(orig, &new_assignment, k));
        }

        let changed = new_assignment != assignment;
        assignment = new_assignment;

        // Update step: ordered average of member representations.
        let n = db[0].n();
        let mut sums = vec![vec![Complex64::new(0.0, 0.0); n]; k];
        let mut members = vec![0usize; k];
        for (i, obj) in db.iter().enumerate() {
            let c = assignment[i];
            members[c] += 1;
            let dense = obj.to_dense_spectrum();
            for (s, v) in sums[c].iter_mut().zip(dense.coeffs()) {
                *s += v;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            if members[c] == 0 {
                continue;
            }
            let inv = 1.0 / members[c] as f64;
            let coeffs: Vec<Complex64> = sum.into_iter().map(|v| v * inv).collect();
            centroids[c] =
                Spectrum::from_coeffs(coeffs, db[0].basis(), db[0].paired()).expect("n >= 2");
        }

        if !changed && iterations > 1 {
            converged = true;
            break;
        }
    }
    Ok(Clustering {
        assignment,
        centroids,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Output of [`lloyd`].
#[derive(Debug, Clone)]
pub struct LloydResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Textbook Lloyd on plain vectors, with the same tie-breaking and
/// empty-cluster policy as the compressed path. Serves both as the
/// uncompressed reference and as the engine for projected baselines.
pub fn lloyd(
    points: &[Vec<f64>],
    k: usize,
    seed_ids: &[usize],
    max_iter: usize,
) -> Result<LloydResult> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            points.len()
        )));
    }
    if seed_ids.len() != k || seed_ids.iter().any(|&i| i >= points.len()) {
        return Err(Error::invalid("need exactly k valid seed ids"));
    }
    let dim = points[0].len();
    let mut centroids: Vec<Vec<f64>> = seed_ids.iter().map(|&i| points[i].clone()).collect();
    let mut assignment = vec![0usize; points.len()];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let dists: Vec<Vec<f64>> = points
            .par_iter()
            .map(|p| centroids.iter().map(|c| sq_dist(p, c)).collect())
            .collect();
        let mut new_assignment: Vec<usize> = dists.iter().map(|row| argmin(row)).collect();
        let mut counts = vec![0usize; k];
        for &c in &new_assignment {
            counts[c] += 1;
        }
        let mut taken: Vec<usize> = Vec::new();
        for cluster in 0..k {
            if counts[cluster] > 0 {
                continue;
            }
            let donor = (0..points.len())
                .filter(|i| !taken.contains(i) && counts[new_assignment[*i]] > 1)
                .max_by(|&i, &j| {
                    dists[i][new_assignment[i]]
                        .total_cmp(&dists[j][new_assignment[j]])
                        .then(j.cmp(&i))
                });
            if let Some(d) = donor {
                counts[new_assignment[d]] -= 1;
                new_assignment[d] = cluster;
                counts[cluster] += 1;
                taken.push(d);
            }
        }
        let changed = new_assignment != assignment;
        assignment = new_assignment;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for (i, p) in points.iter().enumerate() {
                if assignment[i] == c {
                    for (m, x) in mean.iter_mut().zip(p) {
                        *m += x;
                    }
                }
            }
            for m in &mut mean {
                *m /= counts[c] as f64;
            }
            centroids[c] = mean;
        }
        if !changed && iterations > 1 {
            converged = true;
            break;
        }
    }
    Ok(LloydResult {
        assignment,
        centroids,
        iterations,
        converged,
    })
}

fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v < row[best] {
            best = i;
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of intraclass variances of an assignment, on uncompressed vectors
/// with centroids recomputed as cluster means.
pub fn intraclass_variance(points: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut means = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (m, x) in means[c].iter_mut().zip(p) {
            *m += x;
        }
    }
    for (mean, &cnt) in means.iter_mut().zip(&counts) {
        if cnt > 0 {
            for m in mean.iter_mut() {
                *m /= cnt as f64;
            }
        }
    }
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| sq_dist(p, &means[c]))
        .sum()
}

/// k-Means++ seeding on plain vectors: returns k distinct indices, the
/// shared starting point for same-seed comparisons across methods.
pub fn kmeans_pp_indices(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            points.len()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a chosen one; take the
            // lowest unchosen id.
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    Ok(chosen)
}

/// Agreement between two clusterings of the same objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementReport {
    /// Fraction of objects whose labels match under the best label
    /// permutation (exhaustive for k <= 8, greedy above).
    pub agreement: f64,
    /// Pairwise Rand index.
    pub rand_index: f64,
}

/// Maximum-overlap label agreement plus the Rand index.
pub fn cluster_agreement(a: &[usize], b: &[usize], k: usize) -> Result<AgreementReport> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("clusterings must cover the same object set"));
    }
    if a.iter().chain(b.iter()).any(|&c| c >= k) {
        return Err(Error::invalid("cluster id out of range"));
    }
    let n = a.len();
    // Contingency table.
    let mut table = vec![vec![0usize; k]; k];
    for (&ca, &cb) in a.iter().zip(b) {
        table[ca][cb] += 1;
    }

    let matched = if k <= 8 {
        // Exhaustive permutation search.
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0usize;
        permute(&mut perm, 0, &mut |p| {
            let score: usize = (0..k).map(|i| table[i][p[i]]).sum();
            if score > best {
                best = score;
            }
        });
        best
    } else {
        // Greedy matching on the largest table cells.
        let mut cells: Vec<(usize, usize, usize)> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| (table[i][j], i, j))
            .collect();
        cells.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut used_a = vec![false; k];
        let mut used_b = vec![false; k];
        let mut total = 0usize;
        for (cnt, i, j) in cells {
            if !used_a[i] && !used_b[j] {
                used_a[i] = true;
                used_b[j] = true;
                total += cnt;
            }
        }
        total
    };

    // Rand index over object pairs.
    let mut same_both = 0usize;
    let mut diff_both = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            if sa && sb {
                same_both += 1;
            } else if !sa && !sb {
                diff_both += 1;
            }
        }
    }
    let pairs = n * (n - 1) / 2;
    Ok(AgreementReport {
        agreement: matched as f64 / n as f64,
        rand_index: if pairs > 0 {
            (same_both + diff_both) as f64 / pairs as f64
        } else {
            1.0
        },
    })
}

fn permute(perm: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == perm.len() {
        f(perm);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute(perm, at + 1, f);
        perm.swap(at, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::compress_top;
    use crate::transform::{dft_forward, Sequence};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_seq(rng: &mut impl Rng, n: usize) -> Sequence {
        Sequence::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn compress_db(seqs: &[Sequence], s: usize) -> Vec<CompressedSeq> {
        seqs.iter()
            .map(|x| compress_top(&dft_forward(x), s).unwrap())
            .collect()
    }

    #[test]
    fn identical_lossless_object_ranks_first_under_all_proxies() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let seqs: Vec<Sequence> = (0..10).map(|_| random_seq(&mut rng, 32)).collect();
        let full = dft_forward(&seqs[3]).storable_bins();
        let db = compress_db(&seqs, full);
        let query = db[3].clone();
        for proxy in [Proxy::Lb, Proxy::Ub, Proxy::Avg] {
            let r = knn_search(&db, &query, 1, proxy).unwrap();
            assert_eq!(r.indices[0], 3);
            assert!(r.proxy_values[0].abs() < 1e-9);
        }
    }

    #[test]
    fn interval_dominance_fixes_the_order() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        // One object very near the query, one very far; with enough kept
        // coefficients the intervals are disjoint.
        let base = random_seq(&mut rng, 64);
        let near = Sequence::new(base.values().iter().map(|v| v + 0.01).collect()).unwrap();
        let far = Sequence::new(base.values().iter().map(|v| v + 10.0).collect()).unwrap();
        let db = compress_db(&[near, far], 16);
        let q = compress_top(&dft_forward(&base), 16).unwrap();
        let bounds = all_bounds(&db, &q).unwrap();
        assert!(
            bounds[0].ub < bounds[1].lb,
            "intervals must be disjoint for this test"
        );
        for proxy in [Proxy::Lb, Proxy::Ub, Proxy::Avg] {
            let r = knn_search(&db, &q, 2, proxy).unwrap();
            assert_eq!(r.indices, vec![0, 1], "proxy {proxy:?}");
        }
    }

    #[test]
    fn projected_identity_is_exact_knn() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let data: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = knn_exact(&data, &q, 5).unwrap();
        let proj = knn_projected(&data, &q, 5).unwrap();
        assert_eq!(exact.indices, proj.indices);
    }

    #[test]
    fn projected_duplicate_points_tie_break_by_id() {
        let data = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let r = knn_projected(&data, &[1.0, 0.0], 2).unwrap();
        assert_eq!(r.indices, vec![0, 1]);
    }

    #[test]
    fn recall_edge_cases() {
        let found = KnnResult {
            indices: vec![1, 2, 3, 4],
            proxy_used: Proxy::Avg,
            proxy_values: vec![0.0; 4],
        };
        assert_eq!(recall_at_k(&found, &[1, 2, 3, 4]).unwrap(), 1.0);
        assert_eq!(recall_at_k(&found, &[5, 6, 7, 8]).unwrap(), 0.0);
        assert_eq!(recall_at_k(&found, &[1, 2, 7, 8]).unwrap(), 0.5);
        assert!(recall_at_k(&found, &[1, 2]).is_err());
    }

    #[test]
    fn kmeans_two_separated_clouds() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut seqs = Vec::new();
        for i in 0..30 {
            let offset = if i < 15 { 0.0 } else { 40.0 };
            seqs.push(
                Sequence::new((0..32).map(|_| offset + rng.random_range(-0.5..0.5)).collect())
                    .unwrap(),
            );
        }
        let full = dft_forward(&seqs[0]).storable_bins();
        let db = compress_db(&seqs, full); // lossless
        let clustering = kmeans_compressed(&db, 2, &[0, 20], 50, None).unwrap();
        assert!(clustering.converged);
        for i in 0..15 {
            assert_eq!(clustering.assignment[i], clustering.assignment[0]);
        }
        for i in 15..30 {
            assert_eq!(clustering.assignment[i], clustering.assignment[15]);
        }
        assert_ne!(clustering.assignment[0], clustering.assignment[15]);
    }

    #[test]
    fn kmeans_k1_centroid_is_global_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let seqs: Vec<Sequence> = (0..12).map(|_| random_seq(&mut rng, 16)).collect();
        let full = dft_forward(&seqs[0]).storable_bins();
        let db = compress_db(&seqs, full);
        let clustering = kmeans_compressed(&db, 1, &[0], 20, None).unwrap();
        assert!(clustering.assignment.iter().all(|&c| c == 0));
        let mean_spec = {
            let mut acc = vec![Complex64::new(0.0, 0.0); 16];
            for s in &seqs {
                for (a, c) in acc.iter_mut().zip(dft_forward(s).coeffs()) {
                    *a += c;
                }
            }
            acc.into_iter().map(|c| c / 12.0).collect::<Vec<_>>()
        };
        for (got, want) in clustering.centroids[0].coeffs().iter().zip(&mean_spec) {
            assert!((got - want).norm() < 1e-9);
        }
    }

    #[test]
    fn kmeans_lossless_matches_textbook_lloyd_step_for_step() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let seqs: Vec<Sequence> = (0..40).map(|_| random_seq(&mut rng, 32)).collect();
        let points: Vec<Vec<f64>> = seqs.iter().map(|s| s.values().to_vec()).collect();
        let full = dft_forward(&seqs[0]).storable_bins();
        let db = compress_db(&seqs, full);
        let seeds = kmeans_pp_indices(&points, 4, 9).unwrap();
        let compressed = kmeans_compressed(&db, 4, &seeds, 30, None).unwrap();
        let plain = lloyd(&points, 4, &seeds, 30).unwrap();
        assert_eq!(compressed.assignment, plain.assignment);
        assert_eq!(compressed.iterations, plain.iterations);
    }

    #[test]
    fn agreement_identical_and_permuted() {
        let a = vec![0, 0, 1, 1, 2, 2];
        let b = vec![2, 2, 0, 0, 1, 1];
        let r = cluster_agreement(&a, &a, 3).unwrap();
        assert_eq!(r.agreement, 1.0);
        assert_eq!(r.rand_index, 1.0);
        let r = cluster_agreement(&a, &b, 3).unwrap();
        assert_eq!(r.agreement, 1.0);
        assert_eq!(r.rand_index, 1.0);
    }

    #[test]
    fn agreement_one_flip_among_100() {
        let a: Vec<usize> = (0..100).map(|i| if i < 50 { 0 } else { 1 }).collect();
        let mut b = a.clone();
        b[10] = 1;
        let r = cluster_agreement(&a, &b, 2).unwrap();
        assert!((r.agreement - 0.99).abs() < 1e-12);
    }

    #[test]
    fn agreement_greedy_path_for_large_k() {
        let a: Vec<usize> = (0..40).map(|i| i % 10).collect();
        let b: Vec<usize> = a.iter().map(|&c| (c + 3) % 10).collect();
        let r = cluster_agreement(&a, &b, 10).unwrap();
        assert_eq!(r.agreement, 1.0);
    }

    #[test]
    fn kmeans_pp_deterministic_and_distinct() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = kmeans_pp_indices(&points, 5, 11).unwrap();
        let b = kmeans_pp_indices(&points, 5, 11).unwrap();
        assert_eq!(a, b);
        let set: std::collections::HashSet<usize> = a.iter().copied().collect();
        assert_eq!(set.len(), 5);
    }
}
