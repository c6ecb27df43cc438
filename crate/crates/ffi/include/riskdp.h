#ifndef RISKDP_H
#define RISKDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdpRiskKind {
  RDP_RISK_KIND_EXPECTATION = 0,
  /**
   * Parameter: alpha.
   */
  RDP_RISK_KIND_VALUE_AT_RISK = 1,
  /**
   * Parameter: alpha.
   */
  RDP_RISK_KIND_AVERAGE_VALUE_AT_RISK = 2,
  /**
   * Parameter: tau.
   */
  RDP_RISK_KIND_ENTROPIC = 3,
} RdpRiskKind;

typedef enum RdpStatus {
  RDP_STATUS_OK = 0,
  RDP_STATUS_NULL_POINTER = 1,
  RDP_STATUS_INVALID_UTF8 = 2,
  RDP_STATUS_PARSE_ERROR = 3,
  RDP_STATUS_DOMAIN_ERROR = 4,
  RDP_STATUS_MAX_ITER_EXCEEDED = 5,
  RDP_STATUS_BUFFER_TOO_SMALL = 6,
  RDP_STATUS_PANIC = 7,
} RdpStatus;

/**
 * Finite distribution handle.
 */
typedef struct RdpDistribution RdpDistribution;

/**
 * Control model or decision process handle.
 */
typedef struct RdpModel RdpModel;

/**
 * Solver output handle.
 */
typedef struct RdpSolution RdpSolution;

typedef struct RdpSaddleReport {
  double primal;
  double dual;
  double randomized;
  double gap;
  /**
   * Nonzero when `saddle_row`/`saddle_col` hold a verified saddle point.
   */
  uint8_t has_saddle;
  size_t saddle_row;
  size_t saddle_col;
} RdpSaddleReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *rdp_version(void);

/**
 * Message of the last error on this thread; empty if none. Owned by the library.
 */
const char *rdp_last_error_message(void);

/**
 * Machine-readable code of the last error on this thread; empty if none.
 */
const char *rdp_last_error_code(void);

/**
 * Builds a distribution from `len` atoms and probabilities.
 *
 * # Safety
 * `atoms` and `probs` must point to `len` readable doubles; `out` must be writable.
 */
enum RdpStatus rdp_distribution_new(const double *atoms,
                                    const double *probs,
                                    size_t len,
                                    struct RdpDistribution **out);

/**
 * # Safety
 * `dist` must come from `rdp_distribution_new` and not be used afterwards.
 */
void rdp_distribution_free(struct RdpDistribution *dist);

/**
 * Number of atoms after merging duplicates; 0 for a null handle.
 *
 * # Safety
 * `dist` must be null or a live handle.
 */
size_t rdp_distribution_len(const struct RdpDistribution *dist);

/**
 * `P(Z <= z)`.
 *
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum RdpStatus rdp_distribution_cdf(const struct RdpDistribution *dist, double z, double *out);

/**
 * Risk of `dist` under the functional `kind` with parameter `param`
 * (ignored for the expectation).
 *
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum RdpStatus rdp_risk_evaluate(const struct RdpDistribution *dist,
                                 enum RdpRiskKind kind,
                                 double param,
                                 double *out);

/**
 * Worst case over `count` distributions; `out_index` receives the first
 * maximizing member.
 *
 * # Safety
 * `dists` must point to `count` live handles; the outputs must be writable.
 */
enum RdpStatus rdp_robust_evaluate(const struct RdpDistribution *const *dists,
                                   size_t count,
                                   enum RdpRiskKind kind,
                                   double param,
                                   double *out_value,
                                   size_t *out_index);

/**
 * Parses a control model (has a `"phi"` table) or a decision process (has a
 * `"kernels"` table) from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum RdpStatus rdp_model_from_json(const char *json, struct RdpModel **out);

/**
 * # Safety
 * `model` must come from `rdp_model_from_json` and not be used afterwards.
 */
void rdp_model_free(struct RdpModel *model);

/**
 * Solves a model. `profile` is a comma-separated list such as
 * `"avar:0.1,expectation"` (one entry is broadcast over stages; discounted
 * models take exactly one). `tol` and `max_iter` apply to discounted models.
 *
 * # Safety
 * `model` must be a live handle, `profile` a NUL-terminated string and `out` writable.
 */
enum RdpStatus rdp_model_solve(const struct RdpModel *model,
                               const char *profile,
                               double tol,
                               size_t max_iter,
                               struct RdpSolution **out);

/**
 * # Safety
 * `solution` must come from `rdp_model_solve` and not be used afterwards.
 */
void rdp_solution_free(struct RdpSolution *solution);

/**
 * Number of value layers: `T + 1` for a finite horizon (the last is the
 * terminal cost), 1 for a discounted model. 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t rdp_solution_layers(const struct RdpSolution *solution);

/**
 * Value-iteration sweeps performed; 0 for finite-horizon solutions.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t rdp_solution_iterations(const struct RdpSolution *solution);

/**
 * Copies the values of `layer` into `out` (capacity `cap`). `written`
 * receives the layer length even when the buffer is too small.
 *
 * # Safety
 * `solution` must be a live handle; `out` must hold `cap` doubles; `written` writable.
 */
enum RdpStatus rdp_solution_values(const struct RdpSolution *solution,
                                   size_t layer,
                                   double *out,
                                   size_t cap,
                                   size_t *written);

/**
 * Copies the greedy actions of `stage` (0-based) into `out`.
 *
 * # Safety
 * As [`rdp_solution_values`], with `out` holding `cap` `size_t` entries.
 */
enum RdpStatus rdp_solution_policy(const struct RdpSolution *solution,
                                   size_t stage,
                                   size_t *out,
                                   size_t cap,
                                   size_t *written);

/**
 * JSON rendering of a solution; release with [`rdp_string_free`].
 *
 * # Safety
 * `solution` must be a live handle and `out` writable.
 */
enum RdpStatus rdp_solution_to_json(const struct RdpSolution *solution, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void rdp_string_free(char *s);

/**
 * Min-max analysis of the `rows x cols` matrix `psi` (row-major). `mix`
 * receives the optimal mixed strategy over rows (`rows` entries).
 *
 * # Safety
 * `psi` must hold `rows * cols` doubles, `mix` `rows` doubles; `report` writable.
 */
enum RdpStatus rdp_saddle_analyze(const double *psi,
                                  size_t rows,
                                  size_t cols,
                                  double tol,
                                  struct RdpSaddleReport *report,
                                  double *mix);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKDP_H */
