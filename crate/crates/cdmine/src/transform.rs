//! Orthonormal transforms between the time domain and a compressible
//! coefficient domain.
//!
//! Two bases are supported: the unitary DFT (complex coefficients,
//! conjugate-symmetric for real input) and the orthonormal Haar DWT (real
//! coefficients, power-of-two lengths). Both carry the 1/sqrt(N) factor in
//! each direction so that Parseval holds with unit constant; the forward DFT
//! uses the exp(-i 2 pi k l / N) kernel and the inverse the conjugate kernel.
//! Every distance computation downstream depends only on coefficient
//! magnitudes, so the sign choice is immaterial to the bounds.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Transform basis used to compress a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Dft,
    Haar,
}

impl Basis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Basis::Dft => "dft",
            Basis::Haar => "haar",
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" | "fourier" => Ok(Basis::Dft),
            "haar" | "dwt" | "wavelet" => Ok(Basis::Haar),
            other => Err(Error::invalid(format!("unknown basis '{other}'"))),
        }
    }
}

/// An uncompressed real-valued series of length N >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    values: Vec<f64>,
}

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "sequence length must be >= 2, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sequence contains non-finite values"));
        }
        Ok(Sequence { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 2 by construction
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Euclidean distance between two equal-length sequences.
pub fn euclidean(x: &Sequence, q: &Sequence) -> Result<f64> {
    if x.len() != q.len() {
        return Err(Error::InvalidPair(format!(
            "length mismatch: {} vs {}",
            x.len(),
            q.len()
        )));
    }
    Ok(x.values
        .iter()
        .zip(&q.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Coefficient-domain image of a sequence under an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
    basis: Basis,
    conjugate_symmetric: bool,
}

impl Spectrum {
    /// Wrap raw coefficients. The caller states whether the spectrum is
    /// conjugate-symmetric (bin N-l the conjugate of bin l); `dft_forward`
    /// always produces a symmetric spectrum for its real input.
    pub fn from_coeffs(coeffs: Vec<Complex64>, basis: Basis, conjugate_symmetric: bool) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::invalid("spectrum length must be >= 2"));
        }
        Ok(Spectrum {
            coeffs,
            basis,
            conjugate_symmetric,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn conjugate_symmetric(&self) -> bool {
        self.conjugate_symmetric
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Total energy, summed over all N bins.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Number of distinct storable bins: the half spectrum for
    /// conjugate-symmetric input, all N bins otherwise.
    pub fn storable_bins(&self) -> usize {
        if self.conjugate_symmetric {
            self.len() / 2 + 1
        } else {
            self.len()
        }
    }
}

/// Multiplicity of a stored bin: a conjugate-symmetric half-spectrum bin
/// stands for itself and its mirror, except DC and (for even N) Nyquist.
pub(crate) fn bin_weight(n: usize, bin: usize, paired: bool) -> f64 {
    if !paired || bin == 0 || 2 * bin == n {
        1.0
    } else {
        2.0
    }
}

/// Forward unitary DFT of a real sequence. The result is flagged
/// conjugate-symmetric.
pub fn dft_forward(seq: &Sequence) -> Spectrum {
    let n = seq.len();
    let input: Vec<Complex64> = seq.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out = fourier(&input, false);
    let scale = 1.0 / (n as f64).sqrt();
    for c in &mut out {
        *c *= scale;
    }
    Spectrum {
        coeffs: out,
        basis: Basis::Dft,
        conjugate_symmetric: true,
    }
}

/// Inverse unitary DFT. Returns the real part of the reconstruction; for a
/// well-formed conjugate-symmetric spectrum the imaginary part vanishes.
pub fn dft_inverse(spec: &Spectrum) -> Result<Sequence> {
    if spec.basis != Basis::Dft {
        return Err(Error::invalid("dft_inverse called on a non-DFT spectrum"));
    }
    let n = spec.len();
    let mut out = fourier(&spec.coeffs, true);
    let scale = 1.0 / (n as f64).sqrt();
    for c in &mut out {
        *c *= scale;
    }
    Sequence::new(out.iter().map(|c| c.re).collect())
}

/// Radix-2 Cooley-Tukey for power-of-two lengths, direct summation otherwise.
/// `inverse` flips the kernel sign; no scaling is applied here.
fn fourier(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        fft_pow2(&mut buf, inverse);
        buf
    } else {
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (l, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &x) in input.iter().enumerate() {
                let angle = sign * 2.0 * std::f64::consts::PI * (k as f64) * (l as f64) / (n as f64);
                acc += x * Complex64::new(angle.cos(), angle.sin());
            }
            *slot = acc;
        }
        out
    }
}

fn fft_pow2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let angle = sign * 2.0 * std::f64::consts::PI / (len as f64);
        let wlen = Complex64::new(angle.cos(), angle.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
                w *= wlen;
            }
        }
        len <<= 1;
    }
}

/// Coarsest scale of the Haar decomposition used by default: decomposition
/// stops once the scaling block has 2^2 = 4 entries.
pub const HAAR_DEFAULT_MIN_SCALE: u32 = 2;

/// Orthonormal Haar DWT down to [`HAAR_DEFAULT_MIN_SCALE`].
pub fn haar_forward(seq: &Sequence) -> Result<Spectrum> {
    haar_forward_with_scale(seq, HAAR_DEFAULT_MIN_SCALE)
}

/// Orthonormal Haar DWT, decomposing while the scaling block holds more than
/// 2^min_scale entries. `min_scale = 0` is the full decomposition.
///
/// Layout is the usual Mallat ordering: scaling coefficients first, then
/// detail bands from coarsest to finest.
pub fn haar_forward_with_scale(seq: &Sequence, min_scale: u32) -> Result<Spectrum> {
    let n = seq.len();
    if !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "haar transform requires a power-of-two length, got {n}"
        )));
    }
    let mut buf = seq.values.clone();
    let mut block = n;
    let stop = 1usize << min_scale;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut scratch = vec![0.0; n];
    while block > stop && block >= 2 {
        let half = block / 2;
        for i in 0..half {
            scratch[i] = (buf[2 * i] + buf[2 * i + 1]) * inv_sqrt2;
            scratch[half + i] = (buf[2 * i] - buf[2 * i + 1]) * inv_sqrt2;
        }
        buf[..block].copy_from_slice(&scratch[..block]);
        block = half;
    }
    Ok(Spectrum {
        coeffs: buf.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        basis: Basis::Haar,
        conjugate_symmetric: false,
    })
}

/// Inverse of [`haar_forward`].
pub fn haar_inverse(spec: &Spectrum) -> Result<Sequence> {
    haar_inverse_with_scale(spec, HAAR_DEFAULT_MIN_SCALE)
}

/// Inverse of [`haar_forward_with_scale`] at the same `min_scale`.
pub fn haar_inverse_with_scale(spec: &Spectrum, min_scale: u32) -> Result<Sequence> {
    if spec.basis != Basis::Haar {
        return Err(Error::invalid("haar_inverse called on a non-Haar spectrum"));
    }
    let n = spec.len();
    if !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "haar transform requires a power-of-two length, got {n}"
        )));
    }
    let mut buf: Vec<f64> = spec.coeffs.iter().map(|c| c.re).collect();
    let stop = 1usize << min_scale;
    // Mirror the forward pass: find the smallest block it produced.
    let mut blocks = Vec::new();
    let mut block = n;
    while block > stop && block >= 2 {
        block /= 2;
        blocks.push(block * 2);
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut scratch = vec![0.0; n];
    for &block in blocks.iter().rev() {
        let half = block / 2;
        for i in 0..half {
            scratch[2 * i] = (buf[i] + buf[half + i]) * inv_sqrt2;
            scratch[2 * i + 1] = (buf[i] - buf[half + i]) * inv_sqrt2;
        }
        buf[..block].copy_from_slice(&scratch[..block]);
    }
    Sequence::new(buf)
}

/// Forward transform in the given basis (Haar uses the default scale).
pub fn forward(seq: &Sequence, basis: Basis) -> Result<Spectrum> {
    match basis {
        Basis::Dft => Ok(dft_forward(seq)),
        Basis::Haar => haar_forward(seq),
    }
}

/// Inverse transform in the given basis (Haar uses the default scale).
pub fn inverse(spec: &Spectrum) -> Result<Sequence> {
    match spec.basis {
        Basis::Dft => dft_inverse(spec),
        Basis::Haar => haar_inverse(spec),
    }
}
