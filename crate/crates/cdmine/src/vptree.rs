//! VP-tree index over compressed objects with interval-distance pruning.
//!
//! The tree is built on the midpoint proxy: each internal node holds a
//! vantage object and the median mu of midpoint distances from the vantage
//! to the rest; objects with mid <= mu go inside, the others outside. Because
//! the split value is a proxy rather than a metric, each child additionally
//! stores the envelope [min lb, max ub] of its objects' distance intervals to
//! the vantage. Conservative search prunes a child only when the triangle
//! inequality applied to those interval endpoints proves that every object in
//! it has a lower bound (hence a midpoint) strictly above the largest upper
//! bound in the current k-best list — so the conservative result set always
//! equals the linear-scan midpoint ranking. Aggressive search treats the
//! midpoint as an exact distance and uses the classic VP pruning rule, which
//! prunes more and may miss answers.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::bounds::{distance_bounds, BoundPair};
use crate::compress::{self, CompressedSeq};
use crate::error::{Error, Result};
use crate::mining::{KnnResult, Proxy};

/// Search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMode {
    /// Interval-endpoint pruning; never loses a midpoint-ranking answer.
    Conservative,
    /// Midpoint-only pruning; faster, approximate.
    Aggressive,
}

impl std::str::FromStr for PruneMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conservative" => Ok(PruneMode::Conservative),
            "aggressive" => Ok(PruneMode::Aggressive),
            other => Err(Error::invalid(format!("unknown prune mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Vec<u32>),
    Inner {
        vantage: u32,
        mu: f64,
        /// (min lb, max ub) of inside objects' intervals to the vantage.
        env_in: (f64, f64),
        /// Same for outside objects.
        env_out: (f64, f64),
        inside: Box<Node>,
        outside: Box<Node>,
    },
}

/// VP-tree over a compressed database. Holds object ids only; searches take
/// the database alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct VpTree {
    root: Node,
    size: usize,
    bucket_size: usize,
}

impl VpTree {
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    /// Depth of the deepest node.
    pub fn depth(&self) -> usize {
        fn rec(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 1,
                Node::Inner { inside, outside, .. } => 1 + rec(inside).max(rec(outside)),
            }
        }
        rec(&self.root)
    }

    /// All object ids reachable in the tree (vantages and leaves).
    pub fn all_ids(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.size);
        fn rec(n: &Node, out: &mut Vec<u32>) {
            match n {
                Node::Leaf(ids) => out.extend_from_slice(ids),
                Node::Inner { vantage, inside, outside, .. } => {
                    out.push(*vantage);
                    rec(inside, out);
                    rec(outside, out);
                }
            }
        }
        rec(&self.root, &mut out);
        out
    }
}

/// Build a VP-tree. The vantage of each node is chosen from a seeded sample
/// of about sqrt(m) candidates as the one with the largest spread (variance)
/// of midpoint distances to the rest; mu is the median midpoint distance.
pub fn vptree_build(db: &[CompressedSeq], seed: u64, bucket_size: usize) -> Result<VpTree> {
    if db.is_empty() {
        return Err(Error::invalid("cannot index an empty database"));
    }
    if bucket_size == 0 {
        return Err(Error::invalid("bucket_size must be >= 1"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ids: Vec<u32> = (0..db.len() as u32).collect();
    let root = build_node(db, ids, &mut rng, bucket_size)?;
    Ok(VpTree {
        root,
        size: db.len(),
        bucket_size,
    })
}

fn build_node(
    db: &[CompressedSeq],
    ids: Vec<u32>,
    rng: &mut ChaCha12Rng,
    bucket: usize,
) -> Result<Node> {
    if ids.len() <= bucket {
        return Ok(Node::Leaf(ids));
    }
    let m = ids.len();
    let n_cand = ((m as f64).sqrt().ceil() as usize).clamp(1, m);
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..n_cand {
        let j = rng.random_range(i..m);
        pool.swap(i, j);
    }
    let mut best: Option<(f64, u32)> = None;
    for &pos in &pool[..n_cand] {
        let v = ids[pos];
        let mut mean = 0.0;
        let mut mids = Vec::with_capacity(m - 1);
        for &o in &ids {
            if o == v {
                continue;
            }
            let mid = distance_bounds(&db[v as usize], &db[o as usize])?.mid();
            mean += mid;
            mids.push(mid);
        }
        mean /= mids.len() as f64;
        let var = mids.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / mids.len() as f64;
        let better = match best {
            None => true,
            Some((bv, bid)) => var > bv || (var == bv && v < bid),
        };
        if better {
            best = Some((var, v));
        }
    }
    let vantage = best.expect("at least one candidate").1;

    let mut entries: Vec<(u32, BoundPair)> = Vec::with_capacity(m - 1);
    for &o in &ids {
        if o == vantage {
            continue;
        }
        entries.push((o, distance_bounds(&db[vantage as usize], &db[o as usize])?));
    }
    let mut mids: Vec<f64> = entries.iter().map(|(_, b)| b.mid()).collect();
    mids.sort_by(f64::total_cmp);
    let mu = mids[(mids.len() - 1) / 2];

    let mut inside_ids = Vec::new();
    let mut outside_ids = Vec::new();
    let mut env_in = (f64::INFINITY, f64::NEG_INFINITY);
    let mut env_out = (f64::INFINITY, f64::NEG_INFINITY);
    for (o, b) in entries {
        if b.mid() <= mu {
            inside_ids.push(o);
            env_in = (env_in.0.min(b.lb), env_in.1.max(b.ub));
        } else {
            outside_ids.push(o);
            env_out = (env_out.0.min(b.lb), env_out.1.max(b.ub));
        }
    }
    let inside = build_node(db, inside_ids, rng, bucket)?;
    let outside = build_node(db, outside_ids, rng, bucket)?;
    Ok(Node::Inner {
        vantage,
        mu,
        env_in,
        env_out,
        inside: Box::new(inside),
        outside: Box::new(outside),
    })
}

/// Statistics of one search.
#[derive(Debug, Clone, Default)]
pub struct PruningStats {
    /// Distinct objects whose bounds against the query were computed.
    pub evaluated: usize,
    /// Database size.
    pub db_size: usize,
    /// Number of subtrees cut off.
    pub pruned_subtrees: usize,
    /// Objects inside pruned subtrees (filled only on recording searches).
    pub pruned_ids: Vec<u32>,
}

impl PruningStats {
    /// Fraction of the database never evaluated.
    pub fn pruning_power(&self) -> f64 {
        1.0 - self.evaluated as f64 / self.db_size as f64
    }
}

struct Searcher<'a> {
    db: &'a [CompressedSeq],
    query: &'a CompressedSeq,
    k: usize,
    mode: PruneMode,
    record_pruned: bool,
    /// (mid, id, ub), sorted ascending by (mid, id), at most k entries.
    list: Vec<(f64, u32, f64)>,
    stats: PruningStats,
}

impl<'a> Searcher<'a> {
    fn offer(&mut self, id: u32) -> Result<BoundPair> {
        let b = distance_bounds(&self.db[id as usize], self.query)?;
        self.stats.evaluated += 1;
        let entry = (b.mid(), id, b.ub);
        let pos = self
            .list
            .partition_point(|&(m, i, _)| (m, i) < (entry.0, entry.1));
        if self.list.len() < self.k {
            self.list.insert(pos, entry);
        } else if pos < self.k {
            self.list.insert(pos, entry);
            self.list.pop();
        }
        Ok(b)
    }

    /// Largest upper bound among the current k best; the conservative
    /// pruning threshold.
    fn tau_ub(&self) -> f64 {
        self.list
            .iter()
            .map(|&(_, _, ub)| ub)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Worst midpoint among the current k best; the aggressive threshold.
    fn tau_mid(&self) -> f64 {
        self.list.last().map(|&(m, _, _)| m).unwrap_or(f64::INFINITY)
    }

    fn visit(&mut self, node: &Node) -> Result<()> {
        match node {
            Node::Leaf(ids) => {
                for &id in ids {
                    self.offer(id)?;
                }
            }
            Node::Inner {
                vantage,
                mu,
                env_in,
                env_out,
                inside,
                outside,
            } => {
                let bv = self.offer(*vantage)?;
                let near_first = bv.mid() <= *mu;
                let order: [(&Node, (f64, f64), bool); 2] = if near_first {
                    [(inside, *env_in, true), (outside, *env_out, false)]
                } else {
                    [(outside, *env_out, false), (inside, *env_in, true)]
                };
                for (child, env, is_inside) in order {
                    if self.list.len() == self.k && self.prunable(&bv, *mu, env, is_inside) {
                        self.stats.pruned_subtrees += 1;
                        if self.record_pruned {
                            collect_ids(child, &mut self.stats.pruned_ids);
                        }
                        continue;
                    }
                    self.visit(child)?;
                }
            }
        }
        Ok(())
    }

    fn prunable(&self, bv: &BoundPair, mu: f64, env: (f64, f64), is_inside: bool) -> bool {
        match self.mode {
            PruneMode::Conservative => {
                // Every object o in the child has d(v, o) within [env.0, env.1]
                // in the interval sense: lb(q,o) >= lb(q,v) - ub(v,o) and
                // lb(q,o) >= lb(v,o) - ub(q,v). mid(q,o) >= lb(q,o), so a
                // subtree whose lower bound exceeds every upper bound in the
                // list can never reach the midpoint top-k.
                let (lo, hi) = env;
                let subtree_lb = (bv.lb - hi).max(lo - bv.ub).max(0.0);
                subtree_lb > self.tau_ub()
            }
            PruneMode::Aggressive => {
                let d = bv.mid();
                let tau = self.tau_mid();
                if is_inside {
                    d - mu > tau
                } else {
                    mu - d > tau
                }
            }
        }
    }
}

fn collect_ids(node: &Node, out: &mut Vec<u32>) {
    match node {
        Node::Leaf(ids) => out.extend_from_slice(ids),
        Node::Inner { vantage, inside, outside, .. } => {
            out.push(*vantage);
            collect_ids(inside, out);
            collect_ids(outside, out);
        }
    }
}

/// k-NN search through the tree. Returns the ranked result (midpoint proxy)
/// and the pruning statistics.
pub fn vptree_search(
    tree: &VpTree,
    db: &[CompressedSeq],
    query: &CompressedSeq,
    k: usize,
    mode: PruneMode,
) -> Result<(KnnResult, PruningStats)> {
    vptree_search_impl(tree, db, query, k, mode, false)
}

/// Like [`vptree_search`] but also records the ids of every pruned object in
/// the stats, for safety audits.
pub fn vptree_search_recording(
    tree: &VpTree,
    db: &[CompressedSeq],
    query: &CompressedSeq,
    k: usize,
    mode: PruneMode,
) -> Result<(KnnResult, PruningStats)> {
    vptree_search_impl(tree, db, query, k, mode, true)
}

fn vptree_search_impl(
    tree: &VpTree,
    db: &[CompressedSeq],
    query: &CompressedSeq,
    k: usize,
    mode: PruneMode,
    record_pruned: bool,
) -> Result<(KnnResult, PruningStats)> {
    if db.len() != tree.size {
        return Err(Error::invalid(format!(
            "tree indexes {} objects but the database has {}",
            tree.size,
            db.len()
        )));
    }
    if k == 0 || k > tree.size {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            tree.size
        )));
    }
    let mut s = Searcher {
        db,
        query,
        k,
        mode,
        record_pruned,
        list: Vec::with_capacity(k + 1),
        stats: PruningStats {
            db_size: db.len(),
            ..Default::default()
        },
    };
    s.visit(&tree.root)?;
    let result = KnnResult {
        indices: s.list.iter().map(|&(_, id, _)| id as usize).collect(),
        proxy_used: Proxy::Avg,
        proxy_values: s.list.iter().map(|&(m, _, _)| m).collect(),
    };
    Ok((result, s.stats))
}

// ---------------------------------------------------------------------------
// Container format: database section followed by a "VPT1" tree section.
// Tree section layout (little-endian): tag "VPT1", bucket (u32), size (u64),
// pre-order node records, CRC32 of the section payload. Node record: kind
// (u8, 0 = leaf / 1 = inner); leaf: count (u32), ids (u32 each); inner:
// vantage (u32), mu, env_in.0, env_in.1, env_out.0, env_out.1 (f64 each),
// then the inside and outside subtrees.
// ---------------------------------------------------------------------------

const TREE_MAGIC: &[u8; 4] = b"VPT1";

fn write_node(node: &Node, out: &mut Vec<u8>) {
    match node {
        Node::Leaf(ids) => {
            out.push(0);
            out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
            for &id in ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
        }
        Node::Inner {
            vantage,
            mu,
            env_in,
            env_out,
            inside,
            outside,
        } => {
            out.push(1);
            out.extend_from_slice(&vantage.to_le_bytes());
            for v in [*mu, env_in.0, env_in.1, env_out.0, env_out.1] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            write_node(inside, out);
            write_node(outside, out);
        }
    }
}

struct TreeCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> TreeCursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.buf.len() {
            return Err(Error::Truncated {
                expected: self.pos + len - self.buf.len(),
            });
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_node(cur: &mut TreeCursor) -> Result<Node> {
    match cur.u8()? {
        0 => {
            let count = cur.u32()? as usize;
            let mut ids = Vec::with_capacity(count.min(1 << 20));
            for _ in 0..count {
                ids.push(cur.u32()?);
            }
            Ok(Node::Leaf(ids))
        }
        1 => {
            let vantage = cur.u32()?;
            let mu = cur.f64()?;
            let env_in = (cur.f64()?, cur.f64()?);
            let env_out = (cur.f64()?, cur.f64()?);
            let inside = read_node(cur)?;
            let outside = read_node(cur)?;
            Ok(Node::Inner {
                vantage,
                mu,
                env_in,
                env_out,
                inside: Box::new(inside),
                outside: Box::new(outside),
            })
        }
        other => Err(Error::Parse(format!("unknown tree node kind {other}"))),
    }
}

/// Serialize a database together with its index into one container.
pub fn write_index(db: &[CompressedSeq], tree: &VpTree) -> Result<Vec<u8>> {
    if db.len() != tree.size {
        return Err(Error::invalid("tree does not match the database"));
    }
    let mut out = compress::serialize(db)?;
    let mut payload = Vec::new();
    payload.extend_from_slice(&(tree.bucket_size as u32).to_le_bytes());
    payload.extend_from_slice(&(tree.size as u64).to_le_bytes());
    write_node(&tree.root, &mut payload);
    let crc = crc32fast::hash(&payload);
    out.extend_from_slice(TREE_MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Read a container produced by [`write_index`].
pub fn read_index(bytes: &[u8]) -> Result<(Vec<CompressedSeq>, VpTree)> {
    let span = compress::db_span(bytes)?;
    let db = compress::deserialize(&bytes[..span])?;
    let rest = &bytes[span..];
    if rest.len() < 4 || &rest[..4] != TREE_MAGIC {
        return Err(Error::Parse("missing VPT1 index section".into()));
    }
    if rest.len() < 8 {
        return Err(Error::Truncated { expected: 8 - rest.len() });
    }
    let payload = &rest[4..rest.len() - 4];
    let stored = u32::from_le_bytes(rest[rest.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mut cur = TreeCursor { buf: payload, pos: 0 };
    let bucket_size = cur.u32()? as usize;
    let size = cur.u64()? as usize;
    let root = read_node(&mut cur)?;
    if cur.pos != payload.len() {
        return Err(Error::Parse("trailing bytes after the index tree".into()));
    }
    let tree = VpTree {
        root,
        size,
        bucket_size,
    };
    if tree.size != db.len() {
        return Err(Error::Parse("index size does not match the database".into()));
    }
    Ok((db, tree))
}
