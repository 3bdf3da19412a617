//! Per-object compressed representations and their on-disk form.
//!
//! A compressed object keeps the values and positions of a few stored
//! coefficients plus a single scalar: the total energy of everything that was
//! dropped. For conjugate-symmetric DFT spectra only half-spectrum bins are
//! stored; each stored bin carries an implicit multiplicity weight (2 for a
//! mirrored pair, 1 for DC and Nyquist) and all energy fields are kept in
//! full-spectrum-equivalent form, so the bound machinery never needs to know
//! about the pairing.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::transform::{bin_weight, Basis, Spectrum};

/// How the stored coefficient set was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// The s largest-magnitude bins. The smallest kept magnitude is then a
    /// valid ceiling for every discarded coefficient.
    Top,
    /// The first s bins. No magnitude ceiling holds for the discarded part.
    First,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Top => "top",
            Method::First => "first",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "top" | "best" => Ok(Method::Top),
            "first" => Ok(Method::First),
            other => Err(Error::invalid(format!("unknown compression method '{other}'"))),
        }
    }
}

/// A compressed sequence: kept coefficients plus residual energy.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedSeq {
    n: u32,
    basis: Basis,
    /// Half-spectrum pairing in effect (conjugate-symmetric DFT input).
    paired: bool,
    /// Strictly increasing stored-bin indices.
    positions: Vec<u32>,
    /// Raw coefficient values at `positions`.
    values: Vec<Complex64>,
    /// Residual energy e: full-spectrum energy of all discarded bins.
    residual: f64,
    /// Total full-spectrum energy of the originating spectrum.
    norm_sq: f64,
    /// True for best-coefficient compression, where the minimum kept
    /// magnitude bounds every discarded magnitude.
    floor_valid: bool,
}

impl CompressedSeq {
    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn paired(&self) -> bool {
        self.paired
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Residual energy e (full-spectrum equivalent).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Total energy of the original spectrum.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn floor_valid(&self) -> bool {
        self.floor_valid
    }

    /// Number of stored coefficients.
    pub fn kept(&self) -> usize {
        self.positions.len()
    }

    /// Magnitude floor A: minimum kept coefficient magnitude. At least one
    /// coefficient is always kept, so this is well defined.
    pub fn floor(&self) -> f64 {
        self.values
            .iter()
            .map(|c| c.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of storable bins in this object's representation space.
    pub fn storable_bins(&self) -> usize {
        if self.paired {
            self.n as usize / 2 + 1
        } else {
            self.n as usize
        }
    }

    /// Multiplicity weight of a stored-bin index.
    pub fn weight(&self, bin: u32) -> f64 {
        bin_weight(self.n as usize, bin as usize, self.paired)
    }

    /// Number of unknown full-spectrum coefficient slots.
    pub fn unknown_slots(&self) -> f64 {
        let kept: f64 = self.positions.iter().map(|&p| self.weight(p)).sum();
        self.n as f64 - kept
    }

    /// Dense spectrum with the stored values in place and zeros elsewhere
    /// (residual dropped). Used for centroid arithmetic.
    pub fn to_dense_spectrum(&self) -> Spectrum {
        let n = self.n as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for (&p, &v) in self.positions.iter().zip(&self.values) {
            let p = p as usize;
            coeffs[p] = v;
            if self.paired && p != 0 && 2 * p != n {
                coeffs[n - p] = v.conj();
            }
        }
        Spectrum::from_coeffs(coeffs, self.basis, self.paired).expect("n >= 2 by construction")
    }

    /// Check the internal consistency contract: norm_sq = kept energy + e,
    /// residual non-negative, positions strictly increasing and in range,
    /// and (for best-coefficient objects) the floor feasibility
    /// |p_minus| * A^2 >= e.
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid("compressed object stores no coefficients"));
        }
        if self.positions.len() != self.values.len() {
            return Err(Error::Parse("positions/values length mismatch".into()));
        }
        let bins = self.storable_bins() as u32;
        if !self.positions.windows(2).all(|w| w[0] < w[1]) || *self.positions.last().unwrap() >= bins {
            return Err(Error::invalid("positions not strictly increasing within range"));
        }
        if !(self.residual >= 0.0) || !self.residual.is_finite() || !self.norm_sq.is_finite() {
            return Err(Error::invalid("non-finite or negative energy fields"));
        }
        let kept_energy: f64 = self
            .positions
            .iter()
            .zip(&self.values)
            .map(|(&p, v)| self.weight(p) * v.norm_sqr())
            .sum();
        let err = (self.norm_sq - kept_energy - self.residual).abs();
        if err > 1e-9 * self.norm_sq.max(1.0) {
            return Err(Error::invalid(format!(
                "norm consistency violated: |norm^2 - kept - e| = {err}"
            )));
        }
        if self.floor_valid {
            let a = self.floor();
            if self.residual > self.unknown_slots() * a * a * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InfeasibleEnergy(format!(
                    "residual {} exceeds |p_minus| * A^2 = {}",
                    self.residual,
                    self.unknown_slots() * a * a
                )));
            }
        }
        Ok(())
    }
}

fn storable_magnitudes(spec: &Spectrum) -> Vec<f64> {
    let bins = spec.storable_bins();
    (0..bins).map(|l| spec.coeffs()[l].norm()).collect()
}

fn build(
    spec: &Spectrum,
    mut positions: Vec<u32>,
    floor_valid: bool,
) -> CompressedSeq {
    positions.sort_unstable();
    let n = spec.len();
    let paired = spec.conjugate_symmetric();
    let values: Vec<Complex64> = positions.iter().map(|&p| spec.coeffs()[p as usize]).collect();
    let kept: std::collections::HashSet<u32> = positions.iter().copied().collect();
    let mut residual = 0.0;
    for l in 0..spec.storable_bins() {
        if !kept.contains(&(l as u32)) {
            residual += bin_weight(n, l, paired) * spec.coeffs()[l].norm_sqr();
        }
    }
    let kept_energy: f64 = positions
        .iter()
        .zip(&values)
        .map(|(&p, v)| bin_weight(n, p as usize, paired) * v.norm_sqr())
        .sum();
    CompressedSeq {
        n: n as u32,
        basis: spec.basis(),
        paired,
        positions,
        values,
        residual,
        norm_sq: kept_energy + residual,
        floor_valid,
    }
}

/// Keep the s largest-magnitude bins (ties broken toward the lower index).
pub fn compress_top(spec: &Spectrum, s: usize) -> Result<CompressedSeq> {
    let bins = spec.storable_bins();
    if s < 1 || s > bins {
        return Err(Error::invalid(format!(
            "s must be in [1, {bins}], got {s}"
        )));
    }
    let mags = storable_magnitudes(spec);
    let mut order: Vec<u32> = (0..bins as u32).collect();
    order.sort_by(|&i, &j| {
        mags[j as usize]
            .total_cmp(&mags[i as usize])
            .then(i.cmp(&j))
    });
    order.truncate(s);
    Ok(build(spec, order, true))
}

/// Keep the first s bins. The magnitude floor of the result is not a valid
/// ceiling for the discarded bins, so the object is flagged accordingly and
/// the bound machinery falls back to ceiling-free estimates.
pub fn compress_first(spec: &Spectrum, s: usize) -> Result<CompressedSeq> {
    let bins = spec.storable_bins();
    if s < 1 || s > bins {
        return Err(Error::invalid(format!(
            "s must be in [1, {bins}], got {s}"
        )));
    }
    Ok(build(spec, (0..s as u32).collect(), false))
}

/// Storage budget in 64-bit words for one object compressed with s
/// coefficients: complex values, positions and the residual scalar for the
/// Fourier case; real values for wavelets.
pub fn storage_budget(s: usize, basis: Basis) -> usize {
    match basis {
        // ceil(2s + s/2 + 1)
        Basis::Dft => (5 * s + 2).div_ceil(2),
        // ceil(s + s/4 + 1/2)
        Basis::Haar => (5 * s + 2).div_ceil(4),
    }
}

// ---------------------------------------------------------------------------
// Binary database format.
//
// Little-endian layout:
//   magic "CMN1" (4 bytes)
//   tag (u8): basis and selection method
//   count (u64)
//   per record: n (u32), s (u32), positions (s * u32),
//               values (s * f64 re/im pairs; imaginary part omitted for Haar),
//               e (f64), norm_sq (f64)
//   crc32 (u32) over everything between the magic and the checksum itself
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"CMN1";

fn tag_of(basis: Basis, method: Method) -> u8 {
    match (basis, method) {
        (Basis::Dft, Method::Top) => 0,
        (Basis::Haar, Method::Top) => 1,
        (Basis::Dft, Method::First) => 2,
        (Basis::Haar, Method::First) => 3,
    }
}

fn tag_decode(tag: u8) -> Result<(Basis, Method)> {
    match tag {
        0 => Ok((Basis::Dft, Method::Top)),
        1 => Ok((Basis::Haar, Method::Top)),
        2 => Ok((Basis::Dft, Method::First)),
        3 => Ok((Basis::Haar, Method::First)),
        other => Err(Error::Parse(format!("unknown basis tag {other}"))),
    }
}

/// Serialize a database of compressed objects. All records must share one
/// basis and selection method; the format stores them once in the header.
pub fn serialize(db: &[CompressedSeq]) -> Result<Vec<u8>> {
    let (basis, method) = match db.first() {
        Some(first) => (
            first.basis,
            if first.floor_valid { Method::Top } else { Method::First },
        ),
        None => (Basis::Dft, Method::Top),
    };
    for (i, rec) in db.iter().enumerate() {
        if rec.basis != basis || rec.floor_valid != (method == Method::Top) {
            return Err(Error::invalid(format!(
                "record {i} mixes basis/method within one database"
            )));
        }
        if rec.paired != (basis == Basis::Dft) {
            return Err(Error::invalid(format!(
                "record {i}: only conjugate-symmetric DFT and Haar objects are storable"
            )));
        }
    }
    let mut payload = Vec::new();
    payload.push(tag_of(basis, method));
    payload.extend_from_slice(&(db.len() as u64).to_le_bytes());
    for rec in db {
        payload.extend_from_slice(&rec.n.to_le_bytes());
        payload.extend_from_slice(&(rec.positions.len() as u32).to_le_bytes());
        for &p in &rec.positions {
            payload.extend_from_slice(&p.to_le_bytes());
        }
        for v in &rec.values {
            payload.extend_from_slice(&v.re.to_le_bytes());
            if basis == Basis::Dft {
                payload.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        payload.extend_from_slice(&rec.residual.to_le_bytes());
        payload.extend_from_slice(&rec.norm_sq.to_le_bytes());
    }
    let crc = crc32fast::hash(&payload);
    let mut out = Vec::with_capacity(4 + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
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

/// Deserialize a database serialized by [`serialize`]. Verifies magic and
/// checksum before interpreting any record, then validates every record's
/// consistency invariants.
pub fn deserialize(bytes: &[u8]) -> Result<Vec<CompressedSeq>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 4 + 1 + 8 + 4 {
        return Err(Error::Truncated {
            expected: 4 + 1 + 8 + 4 - bytes.len(),
        });
    }
    let payload = &bytes[4..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mut cur = Cursor { buf: payload, pos: 0 };
    let (basis, method) = tag_decode(cur.u8()?)?;
    let count = cur.u64()? as usize;
    let mut db = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let n = cur.u32()?;
        let s = cur.u32()? as usize;
        let mut positions = Vec::with_capacity(s);
        for _ in 0..s {
            positions.push(cur.u32()?);
        }
        let mut values = Vec::with_capacity(s);
        for _ in 0..s {
            let re = cur.f64()?;
            let im = if basis == Basis::Dft { cur.f64()? } else { 0.0 };
            values.push(Complex64::new(re, im));
        }
        let residual = cur.f64()?;
        let norm_sq = cur.f64()?;
        let rec = CompressedSeq {
            n,
            basis,
            paired: basis == Basis::Dft,
            positions,
            values,
            residual,
            norm_sq,
            floor_valid: method == Method::Top,
        };
        rec.validate()?;
        db.push(rec);
    }
    if cur.pos != payload.len() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after the last record",
            payload.len() - cur.pos
        )));
    }
    Ok(db)
}

/// Length in bytes of the database section at the start of `bytes`
/// (magic through trailing CRC), found by walking the record structure.
/// Used to split containers that append index records after the database.
pub(crate) fn db_span(bytes: &[u8]) -> Result<usize> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut cur = Cursor { buf: bytes, pos: 4 };
    let (basis, _) = tag_decode(cur.u8()?)?;
    let count = cur.u64()?;
    let value_bytes = if basis == Basis::Dft { 16 } else { 8 };
    for _ in 0..count {
        cur.take(4)?; // n
        let s = cur.u32()? as usize;
        cur.take(s * 4 + s * value_bytes + 16)?;
    }
    cur.take(4)?; // crc
    Ok(cur.pos)
}

/// Write a database to a writer.
pub fn write_db<W: Write>(mut w: W, db: &[CompressedSeq]) -> Result<()> {
    let bytes = serialize(db)?;
    w.write_all(&bytes)?;
    Ok(())
}

/// Read a database from a reader.
pub fn read_db<R: Read>(mut r: R) -> Result<Vec<CompressedSeq>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    deserialize(&buf)
}
