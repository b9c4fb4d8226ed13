#ifndef SSE_DENOISE_H
#define SSE_DENOISE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SseStatus {
  SSE_STATUS_OK = 0,
  SSE_STATUS_NULL_POINTER = 1,
  SSE_STATUS_INVALID_ARGUMENT = 2,
  SSE_STATUS_SHAPE_MISMATCH = 3,
  SSE_STATUS_NUMERICAL = 4,
  SSE_STATUS_IO = 5,
  SSE_STATUS_PANIC = 6,
} SseStatus;

// Opaque K×M block of waveform samples.
typedef struct SseBlock SseBlock;

typedef struct SseSolverConfig {
  double zeta;
  double eta;
  double xi;
  uint32_t t_max;
  double lengthscale;
  double jitter;
  // Solve the signal update densely instead of in the eigenbasis.
  bool dense;
} SseSolverConfig;

typedef struct SseBrownConstants {
  double alpha;
  double sigma_p;
  double c;
  double gate_resolution;
  uint32_t num_gates;
} SseBrownConstants;

// SWH (m), epoch τ (m), amplitude Pu.
typedef struct SseBrownParams {
  double swh;
  double tau;
  double pu;
} SseBrownParams;

typedef struct SseFitResult {
  struct SseBrownParams params;
  double residual_norm;
  uint32_t iterations;
  bool converged;
} SseFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sse_version(void);

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call into the library on this thread.
const char *sse_last_error_message(void);

// # Safety
// `out` must be null or valid for writes.
enum SseStatus sse_solver_config_default(struct SseSolverConfig *out);

// # Safety
// `out` must be null or valid for writes.
enum SseStatus sse_brown_constants_default(struct SseBrownConstants *out);

// Creates a block from `gates * signals` row-major samples, or a zero block
// when `data` is NULL.
//
// # Safety
// `data` must be null or point to `gates * signals` readable doubles; `out`
// must be valid for writes.
enum SseStatus sse_block_new(uintptr_t gates,
                             uintptr_t signals,
                             const double *data,
                             struct SseBlock **out);

// # Safety
// `block` must be null or a handle from this library that was not yet freed.
void sse_block_free(struct SseBlock *block);

// # Safety
// `block` must be a live handle; `gates` and `signals` must be valid for writes.
enum SseStatus sse_block_dims(const struct SseBlock *block, uintptr_t *gates, uintptr_t *signals);

// Copies the samples, row-major, into `out`, which holds `len` doubles.
//
// # Safety
// `block` must be a live handle; `out` must point to `len` writable doubles.
enum SseStatus sse_block_copy(const struct SseBlock *block, double *out, uintptr_t len);

// Denoises `y` in chunks of `chunk` signals. `config` may be NULL for defaults.
//
// # Safety
// `y` must be a live handle, `config` null or readable, `out` writable.
enum SseStatus sse_denoise(const struct SseBlock *y,
                           uintptr_t chunk,
                           const struct SseSolverConfig *config,
                           struct SseBlock **out);

// Truncated-SVD filter over chunks of `chunk` signals.
//
// # Safety
// `y` must be a live handle and `out` writable.
enum SseStatus sse_svd_filter(const struct SseBlock *y,
                              double energy_threshold,
                              uintptr_t chunk,
                              struct SseBlock **out);

// Reconstruction SNR in dB; +inf when the blocks are equal.
//
// # Safety
// `clean` and `estimate` must be live handles and `out_db` writable.
enum SseStatus sse_rsnr(const struct SseBlock *clean,
                        const struct SseBlock *estimate,
                        double *out_db);

// Writes the `num_gates` samples of the Brown model into `out`.
//
// # Safety
// `consts` and `params` must be readable; `out` must hold `len` doubles.
enum SseStatus sse_brown_waveform(const struct SseBrownConstants *consts,
                                  const struct SseBrownParams *params,
                                  double *out,
                                  uintptr_t len);

// Least-squares retracking of one waveform of `len` gates. With `init` NULL
// the fit starts from the nominal point and falls back to a grid of epochs.
//
// # Safety
// `consts` readable, `y` holds `len` doubles, `init` null or readable,
// `out` writable.
enum SseStatus sse_ls_fit(const struct SseBrownConstants *consts,
                          const double *y,
                          uintptr_t len,
                          const struct SseBrownParams *init,
                          struct SseFitResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSE_DENOISE_H */
