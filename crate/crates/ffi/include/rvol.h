#ifndef RVOL_H
#define RVOL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum RvolStatus {
  RVOL_STATUS_OK = 0,
  RVOL_STATUS_NULL_POINTER = 1,
  RVOL_STATUS_INVALID_ARGUMENT = 2,
  RVOL_STATUS_NUMERICAL = 3,
  RVOL_STATUS_IO = 4,
  RVOL_STATUS_PANIC = 5,
} RvolStatus;

typedef enum RvolPayoff {
  RVOL_PAYOFF_EURO_CALL = 0,
  RVOL_PAYOFF_LOOKBACK = 1,
} RvolPayoff;

// Opaque exponential-sum kernel `Σ α_i e^{-ρ_i t}`.
typedef struct RvolKernel RvolKernel;

// Rough Heston parameters.
typedef struct RvolHestonParams {
  double v0;
  double theta;
  double lambda;
  double sigma;
  double rho;
  double s0;
} RvolHestonParams;

// Monte Carlo estimate with its 95% half-width.
typedef struct RvolMcResult {
  double mean;
  double half_width_95;
  double wall_seconds;
  uint64_t paths;
} RvolMcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *rvol_last_error(void);

// Library version as a static NUL-terminated string.
const char *rvol_version(void);

// Builds a kernel from a JSON description such as
// `{"hurst": 0.1, "method": "systematic", "n": 100}`.
//
// # Safety
// `config_json` must be a NUL-terminated string and `out` a valid pointer.
enum RvolStatus rvol_kernel_from_json(const char *config_json, struct RvolKernel **out);

// Systematic kernel with `n` factors optimized over `[0, horizon]`.
//
// # Safety
// `out` must be a valid pointer.
enum RvolStatus rvol_kernel_systematic(double hurst,
                                       size_t n,
                                       double horizon,
                                       struct RvolKernel **out);

// Kernel from weights and rates (rates strictly increasing, both non-negative).
//
// # Safety
// `alpha` and `rho` must point to `len` readable doubles, `out` must be valid.
enum RvolStatus rvol_kernel_new(const double *alpha,
                                const double *rho,
                                size_t len,
                                struct RvolKernel **out);

// Loads a kernel from an `alpha,rho` CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum RvolStatus rvol_kernel_load(const char *path, struct RvolKernel **out);

// Writes the kernel as an `alpha,rho` CSV file.
//
// # Safety
// `kernel` must come from this library; `path` must be NUL-terminated.
enum RvolStatus rvol_kernel_save(const struct RvolKernel *kernel, const char *path);

// Number of factors, 0 for a null handle.
//
// # Safety
// `kernel` must be null or come from this library.
size_t rvol_kernel_len(const struct RvolKernel *kernel);

// Copies weights and rates into caller buffers of capacity `cap`.
//
// # Safety
// `alpha` and `rho` must point to `cap` writable doubles.
enum RvolStatus rvol_kernel_params(const struct RvolKernel *kernel,
                                   double *alpha,
                                   double *rho,
                                   size_t cap);

// `Ĝ(t)`.
//
// # Safety
// `kernel` must come from this library and `out` must be valid.
enum RvolStatus rvol_kernel_eval(const struct RvolKernel *kernel, double t, double *out);

// `ζ = ∫_0^t (G - Ĝ)²` against the rough kernel of index `hurst`.
//
// # Safety
// `kernel` must come from this library and `out` must be valid.
enum RvolStatus rvol_kernel_l2_error(const struct RvolKernel *kernel,
                                     double hurst,
                                     double t,
                                     double *out);

// Discrete error `sqrt((T/N) Σ (Ĝ - G)²(kT/N))`.
//
// # Safety
// `kernel` must come from this library and `out` must be valid.
enum RvolStatus rvol_kernel_discrete_error(const struct RvolKernel *kernel,
                                           double hurst,
                                           double horizon,
                                           size_t steps,
                                           double *out);

// Keeps the first `ñ` factors whose discarded tail at lag `horizon/steps`
// is at most `(horizon/steps)^beta`. Writes a new handle and `ñ`.
//
// # Safety
// `kernel` must come from this library; `out` and `n_tilde` must be valid.
enum RvolStatus rvol_kernel_truncate(const struct RvolKernel *kernel,
                                     double horizon,
                                     size_t steps,
                                     double beta,
                                     struct RvolKernel **out,
                                     size_t *n_tilde);

// Releases a kernel handle; null is ignored.
//
// # Safety
// `kernel` must be null or an unreleased handle from this library.
void rvol_kernel_free(struct RvolKernel *kernel);

// Monte Carlo price under rough Heston. `scheme` is one of `volterra`,
// `multifactor`, `multifactor-truncated`, `hybrid`, `integrated-volterra`,
// `integrated-multifactor`; `kernel` may be null for the Volterra schemes.
//
// # Safety
// Pointers must be valid; `scheme` must be NUL-terminated.
enum RvolStatus rvol_heston_price(const struct RvolHestonParams *params,
                                  double hurst,
                                  const struct RvolKernel *kernel,
                                  const char *scheme,
                                  enum RvolPayoff payoff,
                                  double strike,
                                  double horizon,
                                  size_t steps,
                                  double beta,
                                  uint64_t paths,
                                  uint64_t seed,
                                  size_t workers,
                                  struct RvolMcResult *out);

// Black–Scholes implied volatility of a call price (zero rates).
//
// # Safety
// `out` must be valid.
enum RvolStatus rvol_implied_vol(double call_price,
                                 double s0,
                                 double strike,
                                 double t,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RVOL_H */
