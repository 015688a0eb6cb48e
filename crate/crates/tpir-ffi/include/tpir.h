#ifndef TPIR_H
#define TPIR_H

/* Generated by cbindgen from the tpir-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TpirStatus {
  TPIR_STATUS_OK = 0,
  /**
   * a required pointer argument was null
   */
  TPIR_STATUS_NULL_ARGUMENT = 1,
  /**
   * the (N, T, M) configuration is invalid
   */
  TPIR_STATUS_INVALID_CONFIG = 2,
  /**
   * the chosen field size is below the scheme's minimum
   */
  TPIR_STATUS_FIELD_TOO_SMALL = 3,
  /**
   * any other failure (I/O, internal, panic)
   */
  TPIR_STATUS_RUNTIME = 4,
} TpirStatus;

/**
 * Opaque handle for a derived parameter set.
 */
typedef struct TpirParams TpirParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Derive scheme parameters for N servers, collusion threshold T and M
 * records. On success writes a handle to `out`; release it with
 * `tpir_params_free`.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory for one pointer.
 */
enum TpirStatus tpir_params_new(uint32_t servers,
                                uint32_t collusion,
                                uint32_t records,
                                struct TpirParams **out);

/**
 * Release a handle returned by `tpir_params_new`. A null pointer is a no-op.
 *
 * # Safety
 * `params` must be null or a pointer obtained from `tpir_params_new` that
 * has not been freed yet.
 */
void tpir_params_free(struct TpirParams *params);

/**
 * Sub-packetization L: symbols per record stripe. Returns 0 on null.
 *
 * # Safety
 * `params` must be null or a live handle from `tpir_params_new`.
 */
uint64_t tpir_params_sub_packetization(const struct TpirParams *params);

/**
 * Total download D: symbols fetched per retrieval per stripe. Returns 0
 * on null.
 *
 * # Safety
 * `params` must be null or a live handle from `tpir_params_new`.
 */
uint64_t tpir_params_download(const struct TpirParams *params);

/**
 * Mixing width: columns of the expanding matrices for undesired records.
 * Returns 0 on null.
 *
 * # Safety
 * `params` must be null or a live handle from `tpir_params_new`.
 */
uint64_t tpir_params_mixing_width(const struct TpirParams *params);

/**
 * Smallest admissible prime field size. Returns 0 on null.
 *
 * # Safety
 * `params` must be null or a live handle from `tpir_params_new`.
 */
uint64_t tpir_params_q_min(const struct TpirParams *params);

/**
 * Retrieval rate L/D (equals the capacity) as an exact fraction.
 *
 * # Safety
 * `params` must be a live handle; `num` and `den` must be valid pointers.
 */
enum TpirStatus tpir_params_rate(const struct TpirParams *params, uint64_t *num, uint64_t *den);

/**
 * Run one seeded in-process retrieval round trip over a random database:
 * build queries for record `theta`, answer them at all servers, decode,
 * and compare against the stored record. Returns Ok only on an exact
 * match. `q` of 0 selects the smallest admissible field.
 *
 * # Safety
 * `params` must be a live handle from `tpir_params_new`.
 */
enum TpirStatus tpir_self_test(const struct TpirParams *params,
                               uint64_t q,
                               uint32_t theta,
                               uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TPIR_H */
