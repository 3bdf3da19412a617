//! Competing distance estimators: random-projection ensembles and PCA.
//!
//! Projections are applied to the time-domain sequences; by Parseval this is
//! distance-equivalent to projecting the spectra. Every ensemble is scaled so
//! that E |Phi x|^2 = |x|^2, which is what makes projected distances
//! comparable to true ones.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::transform::Sequence;

/// Projection ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    /// Gaussian entries, variance 1/d.
    Grp,
    /// Symmetric Bernoulli entries +-1/sqrt(d).
    Brp,
    /// Sparse three-point ensemble {+1, 0, -1} with probabilities
    /// {1/6, 2/3, 1/6}, scaled by sqrt(3/d).
    Arp,
    /// Rows are dominant left singular vectors of the centered data matrix.
    Pca,
}

impl ProjectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectionKind::Grp => "grp",
            ProjectionKind::Brp => "brp",
            ProjectionKind::Arp => "arp",
            ProjectionKind::Pca => "pca",
        }
    }
}

impl std::str::FromStr for ProjectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grp" | "gaussian" => Ok(ProjectionKind::Grp),
            "brp" | "bernoulli" => Ok(ProjectionKind::Brp),
            "arp" | "achlioptas" => Ok(ProjectionKind::Arp),
            "pca" => Ok(ProjectionKind::Pca),
            other => Err(Error::invalid(format!("unknown projection kind '{other}'"))),
        }
    }
}

/// A d x n projection, row-major. For PCA the rows are orthonormal and a
/// center is subtracted before projecting.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    pub kind: ProjectionKind,
    pub d: usize,
    pub n: usize,
    entries: Vec<f64>,
    pub seed: Option<u64>,
    /// Data mean subtracted prior to projection (PCA only). Cancels in
    /// distances but fixes the basis.
    center: Option<Vec<f64>>,
}

impl ProjectionMatrix {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// Draw a random projection matrix of the requested ensemble,
/// reproducibly from `seed`.
pub fn gen_projection(kind: ProjectionKind, d: usize, n: usize, seed: u64) -> Result<ProjectionMatrix> {
    if d < 1 || d > n {
        return Err(Error::invalid(format!("d must be in [1, {n}], got {d}")));
    }
    if kind == ProjectionKind::Pca {
        return Err(Error::invalid("PCA matrices come from pca_basis, not gen_projection"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let scale_b = 1.0 / (d as f64).sqrt();
    let scale_a = (3.0 / d as f64).sqrt();
    let entries: Vec<f64> = (0..d * n)
        .map(|_| match kind {
            ProjectionKind::Grp => gauss(&mut rng) * scale_b,
            ProjectionKind::Brp => {
                if rng.random::<bool>() {
                    scale_b
                } else {
                    -scale_b
                }
            }
            ProjectionKind::Arp => {
                let u: f64 = rng.random();
                if u < 1.0 / 6.0 {
                    scale_a
                } else if u < 5.0 / 6.0 {
                    0.0
                } else {
                    -scale_a
                }
            }
            ProjectionKind::Pca => unreachable!(),
        })
        .collect();
    Ok(ProjectionMatrix {
        kind,
        d,
        n,
        entries,
        seed: Some(seed),
        center: None,
    })
}

/// Standard normal via Box-Muller.
fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Project a sequence into the low-dimensional space.
pub fn project(m: &ProjectionMatrix, seq: &Sequence) -> Result<Vec<f64>> {
    if seq.len() != m.n {
        return Err(Error::InvalidPair(format!(
            "projection expects length {}, got {}",
            m.n,
            seq.len()
        )));
    }
    let mut shifted;
    let values = match &m.center {
        Some(c) => {
            shifted = seq.values().to_vec();
            for (v, ci) in shifted.iter_mut().zip(c) {
                *v -= ci;
            }
            &shifted[..]
        }
        None => seq.values(),
    };
    Ok((0..m.d)
        .map(|i| m.row(i).iter().zip(values).map(|(a, b)| a * b).sum())
        .collect())
}

/// Euclidean distance between projected vectors.
pub fn projected_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidPair("projected dimension mismatch".into()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Convergence tolerance of the power iteration.
const PCA_TOL: f64 = 1e-10;
/// Iteration budget per singular vector.
const PCA_MAX_ITER: usize = 10_000;
/// Fixed seed for the power-iteration start vectors.
const PCA_START_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Top-d left singular vectors of the mean-centered data matrix, by power
/// iteration with deflation. Also returns the singular values of the
/// centered matrix.
///
/// The iteration runs on whichever Gram matrix is smaller: the n x n
/// covariance when there are at least as many sequences as dimensions,
/// otherwise the v x v inner-product matrix, whose eigenvectors map to left
/// singular vectors through the data.
pub fn pca_decompose(data: &[Sequence], d: usize) -> Result<(ProjectionMatrix, Vec<f64>)> {
    let v = data.len();
    if v < d || d < 1 {
        return Err(Error::invalid(format!(
            "pca needs at least d={d} sequences, got {v}"
        )));
    }
    let n = data[0].len();
    if data.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("pca data must share one length"));
    }
    let mut mean = vec![0.0; n];
    for s in data {
        for (m, x) in mean.iter_mut().zip(s.values()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= v as f64;
    }
    let centered: Vec<Vec<f64>> = data
        .iter()
        .map(|s| s.values().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let dual = v < n;
    let dim = if dual { v } else { n };
    let mut gram = vec![0.0; dim * dim];
    if dual {
        for i in 0..v {
            for j in i..v {
                let g = dot(&centered[i], &centered[j]);
                gram[i * v + j] = g;
                gram[j * v + i] = g;
            }
        }
    } else {
        for c in &centered {
            for i in 0..n {
                let ci = c[i];
                if ci == 0.0 {
                    continue;
                }
                for j in 0..n {
                    gram[i * n + j] += ci * c[j];
                }
            }
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(PCA_START_SEED);
    let mut rows: Vec<f64> = Vec::with_capacity(d * n);
    let mut sigmas = Vec::with_capacity(d);
    // Iteration vectors found so far (in gram space), for re-orthogonalization.
    let mut found: Vec<f64> = Vec::with_capacity(d * dim);
    for comp in 0..d {
        let mut vcur: Vec<f64> = (0..dim).map(|_| gauss(&mut rng)).collect();
        orthogonalize(&mut vcur, &found, dim);
        normalize(&mut vcur);
        let mut converged = false;
        let mut iters = 0;
        let mut null_direction = false;
        for it in 0..PCA_MAX_ITER {
            iters = it + 1;
            let mut next = mat_vec(&gram, &vcur, dim);
            // Deflation plus explicit re-orthogonalization: keeps the rows
            // orthonormal to machine precision even when rounding leaks
            // earlier components back in.
            orthogonalize(&mut next, &found, dim);
            let norm = normalize(&mut next);
            if norm == 0.0 {
                // Remaining spectrum is numerically zero.
                converged = true;
                null_direction = true;
                break;
            }
            let diff = vcur
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let diff_neg = vcur
                .iter()
                .zip(&next)
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
            vcur = next;
            if diff.min(diff_neg) < PCA_TOL {
                converged = true;
                break;
            }
            // Near-tied eigenvalues make the direction rotate inside the
            // shared eigenspace without ever settling; any vector of that
            // space is an equally good principal direction, and a small
            // relative eigen-residual certifies we are inside it.
            if it % 32 == 31 {
                let image = mat_vec(&gram, &vcur, dim);
                let theta = dot(&vcur, &image);
                if theta > 0.0 {
                    let resid: f64 = image
                        .iter()
                        .zip(&vcur)
                        .map(|(ci, vi)| (ci - theta * vi) * (ci - theta * vi))
                        .sum::<f64>()
                        .sqrt();
                    if resid <= 1e-9 * theta {
                        converged = true;
                        break;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::Convergence(format!(
                "power iteration for component {comp} did not converge within {iters} iterations"
            )));
        }
        let eigval = dot(&vcur, &mat_vec(&gram, &vcur, dim)).max(0.0);
        sigmas.push(eigval.sqrt());
        for i in 0..dim {
            for j in 0..dim {
                gram[i * dim + j] -= eigval * vcur[i] * vcur[j];
            }
        }
        found.extend_from_slice(&vcur);
        let mut row = if dual {
            // Left singular vector u = A w / |A w|.
            let mut u = vec![0.0; n];
            for (w, c) in vcur.iter().zip(&centered) {
                for (ui, ci) in u.iter_mut().zip(c) {
                    *ui += w * ci;
                }
            }
            orthogonalize(&mut u, &rows, n);
            u
        } else {
            vcur
        };
        if null_direction || normalize(&mut row) == 0.0 {
            // Null space reached: complete with any unit vector orthogonal
            // to the rows found so far.
            row = orthogonal_completion(&rows, n, &mut rng);
        }
        rows.extend_from_slice(&row);
    }
    Ok((
        ProjectionMatrix {
            kind: ProjectionKind::Pca,
            d,
            n,
            entries: rows,
            seed: None,
            center: Some(mean),
        },
        sigmas,
    ))
}

fn orthogonal_completion(rows: &[f64], n: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    loop {
        let mut cand: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
        orthogonalize(&mut cand, rows, n);
        if normalize(&mut cand) > 1e-9 {
            return cand;
        }
    }
}

/// Subtract the projections of `v` onto each stored row (two passes for
/// numerical cleanliness).
fn orthogonalize(v: &mut [f64], rows: &[f64], n: usize) {
    let count = rows.len() / n;
    for _ in 0..2 {
        for r in 0..count {
            let row = &rows[r * n..(r + 1) * n];
            let proj = dot(v, row);
            for (vi, ri) in v.iter_mut().zip(row) {
                *vi -= proj * ri;
            }
        }
    }
}

/// Top-d PCA projection of the data.
pub fn pca_basis(data: &[Sequence], d: usize) -> Result<ProjectionMatrix> {
    Ok(pca_decompose(data, d)?.0)
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| m[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}
