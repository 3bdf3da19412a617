/* C ABI for the cdmine compressed-domain distance-bound library. */

#ifndef CDMINE_H
#define CDMINE_H

/* Generated with cbindgen; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/* Transform basis selector for cdm_compress_csv. */
typedef enum CdmBasis {
  CdmBasis_Dft = 0,
  CdmBasis_Haar = 1,
} CdmBasis;

/* Coefficient selection for cdm_compress_csv. */
typedef enum CdmMethod {
  /* Largest-magnitude coefficients (tightest bounds downstream). */
  CdmMethod_Top = 0,
  /* First coefficients (baseline). */
  CdmMethod_First = 1,
} CdmMethod;

/* Distance proxy selector for cdm_knn. */
typedef enum CdmProxy {
  CdmProxy_Lb = 0,
  CdmProxy_Ub = 1,
  CdmProxy_Avg = 2,
} CdmProxy;

/* Status codes returned by every fallible entry point. */
typedef enum CdmStatus {
  CdmStatus_Ok = 0,
  /* A pointer argument was null or an argument was out of range. */
  CdmStatus_NullArgument = 1,
  CdmStatus_InvalidInput = 2,
  /* Objects cannot be compared (basis/length mismatch). */
  CdmStatus_InvalidPair = 3,
  /* Database bytes failed to parse (bad magic, truncation, checksum). */
  CdmStatus_ParseError = 4,
  CdmStatus_IoError = 5,
  /* Unexpected internal failure; see the error message. */
  CdmStatus_InternalError = 6,
} CdmStatus;

/* Opaque database of compressed sequences. */
typedef struct CdmDb CdmDb;

#ifdef __cplusplus
extern "C" {
#endif  /* __cplusplus */

/*
 * Most recent error message of this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cdm_last_error_message(void);

/*
 * Open a database file produced by the `compress` command or
 * cdm_compress_csv.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer. On success `*out` owns the database and must be released with
 * cdm_db_free.
 */
enum CdmStatus cdm_db_open(const char *path, struct CdmDb **out);

/*
 * Parse a database from a byte buffer.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be valid. On
 * success `*out` must be released with cdm_db_free.
 */
enum CdmStatus cdm_db_from_bytes(const uint8_t *bytes, size_t len, struct CdmDb **out);

/*
 * Release a database handle. Null is a no-op.
 *
 * # Safety
 * `db` must be a pointer previously returned by one of the constructors
 * and not yet freed.
 */
void cdm_db_free(struct CdmDb *db);

/*
 * Number of records in the database; 0 for a null handle.
 *
 * # Safety
 * `db` must be a live handle or null.
 */
size_t cdm_db_len(const struct CdmDb *db);

/*
 * Original sequence length of record `idx`, or 0 if out of range.
 *
 * # Safety
 * `db` must be a live handle or null.
 */
size_t cdm_db_object_len(const struct CdmDb *db, size_t idx);

/*
 * Tightest lower/upper bounds on the distance between the originals of
 * records `i` and `j`.
 *
 * # Safety
 * `db` must be a live handle; `lb` and `ub` must be valid pointers.
 */
enum CdmStatus cdm_distance_bounds(const struct CdmDb *db,
                                   size_t i,
                                   size_t j,
                                   double *lb,
                                   double *ub);

/*
 * k nearest records of `db` to record `query_idx` of `queries`, ranked by
 * the chosen proxy. Writes `k` ids and proxy values.
 *
 * # Safety
 * `db` and `queries` must be live handles; `out_ids` and `out_values` must
 * point to at least `k` writable elements each.
 */
enum CdmStatus cdm_knn(const struct CdmDb *db,
                       const struct CdmDb *queries,
                       size_t query_idx,
                       size_t k,
                       enum CdmProxy proxy,
                       size_t *out_ids,
                       double *out_values);

/*
 * Compress a CSV of sequences (one per row) into a database file.
 *
 * # Safety
 * `csv_path` and `out_path` must be valid NUL-terminated strings.
 */
enum CdmStatus cdm_compress_csv(const char *csv_path,
                                enum CdmBasis basis,
                                size_t s,
                                enum CdmMethod method,
                                const char *out_path);

#ifdef __cplusplus
}  /* extern "C" */
#endif  /* __cplusplus */

#endif  /* CDMINE_H */
