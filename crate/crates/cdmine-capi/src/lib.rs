//! C ABI for the compressed-domain distance-bound library.
//!
//! Databases are opaque handles created from a file or a byte buffer and
//! released with [`cdm_db_free`]. Every fallible function returns a
//! [`CdmStatus`] and writes results through out-pointers; the most recent
//! error message of the calling thread is available via
//! [`cdm_last_error_message`].
//!
//! The committed header lives in `include/cdmine.h`; regenerate it with
//! cbindgen using the `cbindgen.toml` next to this crate.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::fs::File;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use cdmine::bounds::distance_bounds;
use cdmine::compress::{compress_first, compress_top, read_db, write_db, CompressedSeq};
use cdmine::csvio::read_sequences;
use cdmine::error::Error;
use cdmine::mining::{knn_search, Proxy};
use cdmine::transform::{forward, Basis};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdmStatus {
    Ok = 0,
    /// A pointer argument was null or an argument was out of range.
    NullArgument = 1,
    InvalidInput = 2,
    /// Objects cannot be compared (basis/length mismatch).
    InvalidPair = 3,
    /// Database bytes failed to parse (bad magic, truncation, checksum).
    ParseError = 4,
    IoError = 5,
    /// Unexpected internal failure; see the error message.
    InternalError = 6,
}

/// Opaque database of compressed sequences.
pub struct CdmDb {
    records: Vec<CompressedSeq>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CdmStatus {
    match err {
        Error::InvalidInput(_) | Error::InfeasibleEnergy(_) | Error::Precondition(_) => {
            CdmStatus::InvalidInput
        }
        Error::InvalidPair(_) => CdmStatus::InvalidPair,
        Error::BadMagic
        | Error::Truncated { .. }
        | Error::ChecksumMismatch { .. }
        | Error::Parse(_) => CdmStatus::ParseError,
        Error::Io(_) => CdmStatus::IoError,
        Error::Convergence(_) => CdmStatus::InternalError,
    }
}

fn fail(err: Error) -> CdmStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard(f: impl FnOnce() -> CdmStatus) -> CdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            CdmStatus::InternalError
        }
    }
}

/// Most recent error message of this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cdm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Open a database file produced by the `compress` command or
/// [`cdm_compress_csv`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns the database and must be released with
/// [`cdm_db_free`].
#[no_mangle]
pub unsafe extern "C" fn cdm_db_open(path: *const c_char, out: *mut *mut CdmDb) -> CdmStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return CdmStatus::NullArgument;
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(p) => p,
            Err(_) => {
                set_error("path is not valid UTF-8".into());
                return CdmStatus::InvalidInput;
            }
        };
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) => return fail(Error::Io(e)),
        };
        match read_db(file) {
            Ok(records) => {
                unsafe { *out = Box::into_raw(Box::new(CdmDb { records })) };
                CdmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parse a database from a byte buffer.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be valid. On
/// success `*out` must be released with [`cdm_db_free`].
#[no_mangle]
pub unsafe extern "C" fn cdm_db_from_bytes(
    bytes: *const u8,
    len: usize,
    out: *mut *mut CdmDb,
) -> CdmStatus {
    guard(|| {
        if bytes.is_null() || out.is_null() {
            return CdmStatus::NullArgument;
        }
        let slice = unsafe { std::slice::from_raw_parts(bytes, len) };
        match cdmine::compress::deserialize(slice) {
            Ok(records) => {
                unsafe { *out = Box::into_raw(Box::new(CdmDb { records })) };
                CdmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a database handle. Null is a no-op.
///
/// # Safety
/// `db` must be a pointer previously returned by one of the constructors
/// and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cdm_db_free(db: *mut CdmDb) {
    if !db.is_null() {
        drop(unsafe { Box::from_raw(db) });
    }
}

/// Number of records in the database; 0 for a null handle.
///
/// # Safety
/// `db` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cdm_db_len(db: *const CdmDb) -> usize {
    if db.is_null() {
        return 0;
    }
    unsafe { &*db }.records.len()
}

/// Original sequence length of record `idx`, or 0 if out of range.
///
/// # Safety
/// `db` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cdm_db_object_len(db: *const CdmDb, idx: usize) -> usize {
    if db.is_null() {
        return 0;
    }
    let db = unsafe { &*db };
    db.records.get(idx).map(|r| r.n()).unwrap_or(0)
}

/// Tightest lower/upper bounds on the distance between the originals of
/// records `i` and `j`.
///
/// # Safety
/// `db` must be a live handle; `lb` and `ub` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cdm_distance_bounds(
    db: *const CdmDb,
    i: usize,
    j: usize,
    lb: *mut f64,
    ub: *mut f64,
) -> CdmStatus {
    guard(|| {
        if db.is_null() || lb.is_null() || ub.is_null() {
            return CdmStatus::NullArgument;
        }
        let db = unsafe { &*db };
        if i >= db.records.len() || j >= db.records.len() {
            set_error(format!(
                "record index out of range: {i}/{j} of {}",
                db.records.len()
            ));
            return CdmStatus::InvalidInput;
        }
        match distance_bounds(&db.records[i], &db.records[j]) {
            Ok(b) => {
                unsafe {
                    *lb = b.lb;
                    *ub = b.ub;
                }
                CdmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Distance proxy selector for [`cdm_knn`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdmProxy {
    Lb = 0,
    Ub = 1,
    Avg = 2,
}

/// k nearest records of `db` to record `query_idx` of `queries`, ranked by
/// the chosen proxy. Writes `k` ids and proxy values.
///
/// # Safety
/// `db` and `queries` must be live handles; `out_ids` and `out_values` must
/// point to at least `k` writable elements each.
#[no_mangle]
pub unsafe extern "C" fn cdm_knn(
    db: *const CdmDb,
    queries: *const CdmDb,
    query_idx: usize,
    k: usize,
    proxy: CdmProxy,
    out_ids: *mut usize,
    out_values: *mut f64,
) -> CdmStatus {
    guard(|| {
        if db.is_null() || queries.is_null() || out_ids.is_null() || out_values.is_null() {
            return CdmStatus::NullArgument;
        }
        let db = unsafe { &*db };
        let queries = unsafe { &*queries };
        let Some(query) = queries.records.get(query_idx) else {
            set_error(format!(
                "query index {query_idx} out of range ({} queries)",
                queries.records.len()
            ));
            return CdmStatus::InvalidInput;
        };
        let proxy = match proxy {
            CdmProxy::Lb => Proxy::Lb,
            CdmProxy::Ub => Proxy::Ub,
            CdmProxy::Avg => Proxy::Avg,
        };
        match knn_search(&db.records, query, k, proxy) {
            Ok(r) => {
                for (slot, (&id, &v)) in r.indices.iter().zip(&r.proxy_values).enumerate() {
                    unsafe {
                        *out_ids.add(slot) = id;
                        *out_values.add(slot) = v;
                    }
                }
                CdmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Transform basis selector for [`cdm_compress_csv`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdmBasis {
    Dft = 0,
    Haar = 1,
}

/// Coefficient selection for [`cdm_compress_csv`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdmMethod {
    /// Largest-magnitude coefficients (tightest bounds downstream).
    Top = 0,
    /// First coefficients (baseline).
    First = 1,
}

/// Compress a CSV of sequences (one per row) into a database file.
///
/// # Safety
/// `csv_path` and `out_path` must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cdm_compress_csv(
    csv_path: *const c_char,
    basis: CdmBasis,
    s: usize,
    method: CdmMethod,
    out_path: *const c_char,
) -> CdmStatus {
    guard(|| {
        if csv_path.is_null() || out_path.is_null() {
            return CdmStatus::NullArgument;
        }
        let (csv_path, out_path) = unsafe {
            match (
                CStr::from_ptr(csv_path).to_str(),
                CStr::from_ptr(out_path).to_str(),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    set_error("paths must be valid UTF-8".into());
                    return CdmStatus::InvalidInput;
                }
            }
        };
        let basis = match basis {
            CdmBasis::Dft => Basis::Dft,
            CdmBasis::Haar => Basis::Haar,
        };
        let inner = || -> cdmine::Result<()> {
            let seqs = read_sequences(std::io::BufReader::new(File::open(csv_path)?))?;
            let db: cdmine::Result<Vec<CompressedSeq>> = seqs
                .iter()
                .map(|seq| {
                    let spec = forward(seq, basis)?;
                    match method {
                        CdmMethod::Top => compress_top(&spec, s),
                        CdmMethod::First => compress_first(&spec, s),
                    }
                })
                .collect();
            write_db(File::create(out_path)?, &db?)
        };
        match inner() {
            Ok(()) => CdmStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn workdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("cdmine-capi-{}-{tag}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn compress_open_bounds_knn_round_trip() {
        let dir = workdir("roundtrip");
        let csv = dir.join("data.csv");
        let mut text = String::new();
        for i in 0..12 {
            let row: Vec<String> = (0..32)
                .map(|t| format!("{}", ((i * 7 + t) as f64 * 0.37).sin() + i as f64))
                .collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(&csv, text).unwrap();
        let out = dir.join("db.cmn");
        let c_csv = CString::new(csv.to_str().unwrap()).unwrap();
        let c_out = CString::new(out.to_str().unwrap()).unwrap();
        let status = unsafe {
            cdm_compress_csv(c_csv.as_ptr(), CdmBasis::Dft, 6, CdmMethod::Top, c_out.as_ptr())
        };
        assert_eq!(status, CdmStatus::Ok);

        let mut db: *mut CdmDb = std::ptr::null_mut();
        assert_eq!(unsafe { cdm_db_open(c_out.as_ptr(), &mut db) }, CdmStatus::Ok);
        assert_eq!(unsafe { cdm_db_len(db) }, 12);
        assert_eq!(unsafe { cdm_db_object_len(db, 0) }, 32);

        let (mut lb, mut ub) = (0.0f64, 0.0f64);
        assert_eq!(
            unsafe { cdm_distance_bounds(db, 0, 1, &mut lb, &mut ub) },
            CdmStatus::Ok
        );
        assert!(0.0 <= lb && lb <= ub);

        let mut ids = [0usize; 3];
        let mut values = [0.0f64; 3];
        let status = unsafe {
            cdm_knn(db, db, 4, 3, CdmProxy::Avg, ids.as_mut_ptr(), values.as_mut_ptr())
        };
        assert_eq!(status, CdmStatus::Ok);
        assert_eq!(ids[0], 4, "an object is its own nearest neighbor");
        assert!(values.windows(2).all(|w| w[0] <= w[1]));

        unsafe { cdm_db_free(db) };
    }

    #[test]
    fn errors_set_status_and_message() {
        let mut db: *mut CdmDb = std::ptr::null_mut();
        let c_path = CString::new("/nonexistent/definitely-missing.cmn").unwrap();
        let status = unsafe { cdm_db_open(c_path.as_ptr(), &mut db) };
        assert_eq!(status, CdmStatus::IoError);
        let msg = cdm_last_error_message();
        assert!(!msg.is_null());

        let garbage = b"not a database";
        let status = unsafe { cdm_db_from_bytes(garbage.as_ptr(), garbage.len(), &mut db) };
        assert_eq!(status, CdmStatus::ParseError);

        assert_eq!(
            unsafe { cdm_db_open(std::ptr::null(), &mut db) },
            CdmStatus::NullArgument
        );
        unsafe { cdm_db_free(std::ptr::null_mut()) }; // no-op
    }

    #[test]
    fn out_of_range_indices_are_reported() {
        let dir = workdir("range");
        let csv = dir.join("tiny.csv");
        std::fs::write(&csv, "1,2,3,4\n4,3,2,1\n").unwrap();
        let out = dir.join("tiny.cmn");
        let c_csv = CString::new(csv.to_str().unwrap()).unwrap();
        let c_out = CString::new(out.to_str().unwrap()).unwrap();
        unsafe {
            assert_eq!(
                cdm_compress_csv(c_csv.as_ptr(), CdmBasis::Haar, 2, CdmMethod::First, c_out.as_ptr()),
                CdmStatus::Ok
            );
            let mut db: *mut CdmDb = std::ptr::null_mut();
            assert_eq!(cdm_db_open(c_out.as_ptr(), &mut db), CdmStatus::Ok);
            let (mut lb, mut ub) = (0.0, 0.0);
            assert_eq!(
                cdm_distance_bounds(db, 0, 9, &mut lb, &mut ub),
                CdmStatus::InvalidInput
            );
            cdm_db_free(db);
        }
    }
}
