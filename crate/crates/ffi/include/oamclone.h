#ifndef OAMCLONE_H
#define OAMCLONE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OamStatus {
  OAM_STATUS_OK = 0,
  OAM_STATUS_NULL_POINTER = 1,
  OAM_STATUS_INVALID_ARGUMENT = 2,
  OAM_STATUS_CONFIG = 3,
  OAM_STATUS_PRECONDITION = 4,
  OAM_STATUS_UNDEFINED_ESTIMATE = 5,
  OAM_STATUS_INTERNAL = 6,
} OamStatus;

/**
 * Which computation backs a clone run.
 */
typedef enum OamCloneRoute {
  /**
   * Fock-space evolution with the exact ancilla mixture.
   */
  OAM_CLONE_ROUTE_FULL = 0,
  /**
   * Fock-space evolution with a Monte-Carlo ancilla.
   */
  OAM_CLONE_ROUTE_MONTE_CARLO = 1,
  /**
   * Coalescence projector on the two-qubit space.
   */
  OAM_CLONE_ROUTE_PROJECTOR = 2,
} OamCloneRoute;

/**
 * Result of a clone run.
 */
typedef struct OamCloneResult OamCloneResult;

/**
 * Loss budget.
 */
typedef struct OamLossBudget OamLossBudget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *oamclone_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *oamclone_last_error(void);

/**
 * Clones `alpha |+2> + beta |-2>` (normalized internally). `samples` and
 * `seed` are used by the Monte-Carlo route only.
 */
enum OamStatus oamclone_clone_run(double alpha_re,
                                  double alpha_im,
                                  double beta_re,
                                  double beta_im,
                                  enum OamCloneRoute route,
                                  uint32_t samples,
                                  uint64_t seed,
                                  struct OamCloneResult **out);

void oamclone_clone_result_free(struct OamCloneResult *handle);

enum OamStatus oamclone_clone_result_fidelity(const struct OamCloneResult *handle, double *out);

/**
 * Single-port success probability.
 */
enum OamStatus oamclone_clone_result_success_probability(const struct OamCloneResult *handle,
                                                         double *out);

/**
 * Writes `S1, S2, S3` to `out[0..3]`.
 */
enum OamStatus oamclone_clone_result_stokes(const struct OamCloneResult *handle, double *out);

/**
 * Writes the 2x2 clone density row-major as `(re, im)` pairs to `out[0..8]`,
 * in the `(+2, -2)` order.
 */
enum OamStatus oamclone_clone_result_density(const struct OamCloneResult *handle, double *out);

/**
 * Expected both-in-`a'` coincidence probability for two horizontally
 * polarized photons carrying the named OAM states (`h, v, a, d, +2, -2`).
 */
enum OamStatus oamclone_hom_coincidence(const char *state_a,
                                        const char *state_b,
                                        double delay_um,
                                        double center_wavelength_nm,
                                        double bandwidth_nm,
                                        double *out);

/**
 * Closed-form qudit fidelity and both-port success probability.
 */
enum OamStatus oamclone_qudit_formula(uint32_t d, double *fidelity, double *success);

/**
 * Simulated qudit cloner for the normalized input `re[k] + i im[k]`.
 * `abstract_labels` switches off the reflection OAM flip.
 */
enum OamStatus oamclone_qudit_clone(const double *re,
                                    const double *im,
                                    size_t d,
                                    bool abstract_labels,
                                    double *fidelity,
                                    double *success);

/**
 * `(F_prep R + 1/2) / (R + 1)`.
 */
enum OamStatus oamclone_predicted_fidelity(double f_prep, double enhancement, double *out);

/**
 * Budget with the default parameters.
 */
enum OamStatus oamclone_budget_new(struct OamLossBudget **out);

void oamclone_budget_free(struct OamLossBudget *handle);

enum OamStatus oamclone_budget_set_fiber_coupling(struct OamLossBudget *handle,
                                                  double min,
                                                  double max);

enum OamStatus oamclone_budget_set_source_rate(struct OamLossBudget *handle, double c_source);

/**
 * Coincidence rate interval in Hz over the fiber-coupling range.
 */
enum OamStatus oamclone_budget_rate(const struct OamLossBudget *handle, double *min, double *max);

/**
 * Poisson counts on the two detectors for `duration_s` seconds at the
 * mid-coupling rate.
 */
enum OamStatus oamclone_simulate_counts(const struct OamLossBudget *handle,
                                        double f_prep,
                                        double enhancement,
                                        double duration_s,
                                        uint64_t seed,
                                        uint64_t *c1,
                                        uint64_t *c2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OAMCLONE_H */
