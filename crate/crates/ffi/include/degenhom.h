#ifndef DEGENHOM_H
#define DEGENHOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values match the CLI exit codes where they
 * overlap.
 */
typedef enum DhStatus {
  DH_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an out-of-range argument.
   */
  DH_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Rejected spec or configuration.
   */
  DH_STATUS_INVALID_CONFIG = 2,
  /**
   * Solver or I/O failure.
   */
  DH_STATUS_NUMERICAL = 3,
  /**
   * A property check failed.
   */
  DH_STATUS_CHECK_FAILED = 4,
  /**
   * A panic was caught.
   */
  DH_STATUS_PANIC = 5,
} DhStatus;

/**
 * Environment spec and the edge count of the lattice it was checked against.
 */
typedef struct DhEnvironment DhEnvironment;

typedef struct DhLattice DhLattice;

typedef struct DhPotential DhPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dh_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dh_version(void);

/**
 * Built-in lattice: `name` is one of "zd-nn", "zd-range2", "zd-diag",
 * "kagome".
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DhStatus dh_lattice_new_preset(const char *name, size_t d, size_t n, struct DhLattice **out);

/**
 * Lattice from a JSON lattice spec.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DhStatus dh_lattice_from_json(const char *json, struct DhLattice **out);

/**
 * Interaction range R.
 *
 * # Safety
 * `lattice` must come from this library; `out` must be valid.
 */
enum DhStatus dh_lattice_range(const struct DhLattice *lattice, double *out);

/**
 * Number of generating edges.
 *
 * # Safety
 * `lattice` must come from this library; `out` must be valid.
 */
enum DhStatus dh_lattice_num_edges(const struct DhLattice *lattice, size_t *out);

/**
 * # Safety
 * `lattice` must come from this library or be null; it is invalid after
 * the call.
 */
void dh_lattice_free(struct DhLattice *lattice);

/**
 * Environment from a JSON environment spec (validated against `lattice`).
 *
 * # Safety
 * Pointers must be valid; `json` NUL-terminated.
 */
enum DhStatus dh_environment_from_json(const struct DhLattice *lattice,
                                       const char *json,
                                       struct DhEnvironment **out);

/**
 * λ_b(τ_z ω_s) for realization `sample`; `z` has `d` entries.
 *
 * # Safety
 * `env` must come from this library; `z` must hold `d` values.
 */
enum DhStatus dh_environment_weight(const struct DhEnvironment *env,
                                    uint64_t sample,
                                    const int64_t *z,
                                    size_t d,
                                    size_t b,
                                    double *out);

/**
 * # Safety
 * `env` must come from this library or be null.
 */
void dh_environment_free(struct DhEnvironment *env);

/**
 * Potential from a JSON potential spec.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` valid.
 */
enum DhStatus dh_potential_from_json(const char *json, struct DhPotential **out);

/**
 * V(λ; r) with r of length `n`.
 *
 * # Safety
 * `pot` must come from this library; `r` must hold `n` values.
 */
enum DhStatus dh_potential_eval(const struct DhPotential *pot,
                                double lambda,
                                const double *r,
                                size_t n,
                                double *out);

/**
 * # Safety
 * `pot` must come from this library or be null.
 */
void dh_potential_free(struct DhPotential *pot);

/**
 * W_hom^(k)(ω_s; F) with default solver settings; F is n×d row-major.
 *
 * # Safety
 * Handles must come from this library; `f` must hold `f_len` values.
 */
enum DhStatus dh_whom_k(const struct DhLattice *lattice,
                        const struct DhEnvironment *env,
                        const struct DhPotential *pot,
                        uint64_t sample,
                        const double *f,
                        size_t f_len,
                        uint32_t k,
                        double *out);

/**
 * m_F(ω_s; kY)/kᵈ, the Dirichlet cell problem on [0, k)ᵈ.
 *
 * # Safety
 * Handles must come from this library; `f` must hold `f_len` values.
 */
enum DhStatus dh_m_f(const struct DhLattice *lattice,
                     const struct DhEnvironment *env,
                     const struct DhPotential *pot,
                     uint64_t sample,
                     const double *f,
                     size_t f_len,
                     uint32_t k,
                     double *out);

/**
 * Path weight μ(ω_s; [z, z + e_i]) on the hyper-cubic lattice.
 *
 * # Safety
 * Handles must come from this library; `z` must hold `d` values.
 */
enum DhStatus dh_iid_mu(const struct DhLattice *lattice,
                        const struct DhEnvironment *env,
                        uint64_t sample,
                        const int64_t *z,
                        size_t d,
                        size_t i,
                        double p,
                        double *out);

/**
 * Runs a CLI command (e.g. "moments") on a JSON config, writing outputs
 * to `out_dir`. The status mirrors the CLI exit code.
 *
 * # Safety
 * All three strings must be NUL-terminated.
 */
enum DhStatus dh_run(const char *command, const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEGENHOM_H */
