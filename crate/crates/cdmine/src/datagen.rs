//! Synthetic dataset generators and the image signature extractor.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::transform::{dft_forward, dft_inverse, Sequence, Spectrum};

/// Synthetic dataset families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Cumulative sum of Gaussian steps; energy concentrates in low
    /// frequencies.
    RandomWalk,
    /// Sum of a few sinusoids at random frequencies plus a small noise
    /// floor; energy concentrates in scattered bins.
    PeriodicMixture,
    /// Random walk whose spectrum is truncated to its 3s largest
    /// half-spectrum bins, then inverted: exactly sparse data.
    Sparsified,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random_walk" | "walk" => Ok(SyntheticKind::RandomWalk),
            "periodic_mixture" | "periodic" => Ok(SyntheticKind::PeriodicMixture),
            "sparsified" | "sparse" => Ok(SyntheticKind::Sparsified),
            other => Err(Error::invalid(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Generate `count` sequences of length `len`, deterministically from `seed`.
/// For the sparsified kind, `s` controls sparsity: each spectrum keeps its
/// 3s largest half-spectrum bins and zeroes the rest.
pub fn gen_synthetic(
    kind: SyntheticKind,
    count: usize,
    len: usize,
    s: usize,
    seed: u64,
) -> Result<Vec<Sequence>> {
    if count == 0 || len < 2 {
        return Err(Error::invalid("need count >= 1 and len >= 2"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| match kind {
            SyntheticKind::RandomWalk => random_walk(&mut rng, len),
            SyntheticKind::PeriodicMixture => periodic_mixture(&mut rng, len),
            SyntheticKind::Sparsified => {
                let base = random_walk(&mut rng, len)?;
                sparsify(&base, 3 * s.max(1))
            }
        })
        .collect()
}

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

fn random_walk(rng: &mut impl Rng, len: usize) -> Result<Sequence> {
    let mut acc = 0.0;
    let values = (0..len)
        .map(|_| {
            acc += gauss(rng);
            acc
        })
        .collect();
    Sequence::new(values)
}

/// Number of sinusoidal components in the periodic mixture.
const MIXTURE_COMPONENTS: usize = 10;
/// Standard deviation of the additive noise floor.
const MIXTURE_NOISE: f64 = 0.05;

fn periodic_mixture(rng: &mut impl Rng, len: usize) -> Result<Sequence> {
    let max_freq = (len / 4).max(2);
    let comps: Vec<(f64, f64, f64)> = (0..MIXTURE_COMPONENTS)
        .map(|j| {
            let freq = rng.random_range(1..=max_freq) as f64;
            let amp = 1.0 / (1.0 + j as f64).sqrt();
            let phase = rng.random_range(0.0..(2.0 * std::f64::consts::PI));
            (freq, amp, phase)
        })
        .collect();
    let values = (0..len)
        .map(|t| {
            let tt = t as f64 / len as f64;
            let signal: f64 = comps
                .iter()
                .map(|&(f, a, p)| a * (2.0 * std::f64::consts::PI * f * tt + p).sin())
                .sum();
            signal + MIXTURE_NOISE * gauss(rng)
        })
        .collect();
    Sequence::new(values)
}

/// Zero all but the `keep` largest half-spectrum bins, then invert.
fn sparsify(seq: &Sequence, keep: usize) -> Result<Sequence> {
    let spec = dft_forward(seq);
    let n = spec.len();
    let bins = spec.storable_bins();
    let keep = keep.min(bins);
    let mut order: Vec<usize> = (0..bins).collect();
    order.sort_by(|&i, &j| {
        spec.coeffs()[j]
            .norm()
            .total_cmp(&spec.coeffs()[i].norm())
            .then(i.cmp(&j))
    });
    let kept: std::collections::HashSet<usize> = order[..keep].iter().copied().collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for &l in &kept {
        coeffs[l] = spec.coeffs()[l];
        if l != 0 && 2 * l != n {
            coeffs[n - l] = spec.coeffs()[l].conj();
        }
    }
    let truncated = Spectrum::from_coeffs(coeffs, spec.basis(), true)?;
    dft_inverse(&truncated)
}

/// Column-sum signature of a binary image: one value per column, the count
/// of set pixels. Supports translation-invariant shape matching.
pub fn image_signature(rows: &[Vec<f64>]) -> Result<Sequence> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::invalid("image must have at least one row and column"));
    }
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::invalid(format!(
                "ragged rows: row 0 has {width} columns, row {i} has {}",
                row.len()
            )));
        }
    }
    if width < 2 {
        return Err(Error::invalid("signature needs image width >= 2"));
    }
    let mut sums = vec![0.0; width];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Sequence::new(sums)
}
