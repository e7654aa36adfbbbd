/* branchlab C API — generated by cbindgen, do not edit. */

#ifndef BRANCHLAB_H
#define BRANCHLAB_H

/* Regenerate with `cargo build -p branchlab-ffi`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every API call (mirrors the CLI exit codes).
typedef enum BlStatus {
  // Success.
  BL_STATUS_OK = 0,
  // A panic crossed an API boundary (internal bug).
  BL_STATUS_PANIC = 1,
  // Invalid argument, null pointer, or out-of-range parameter.
  BL_STATUS_ARGUMENT = 2,
  // The request exceeds a configured size cap.
  BL_STATUS_CAP_EXCEEDED = 3,
  // An iterative procedure did not reach its tolerance.
  BL_STATUS_NON_CONVERGED = 4,
} BlStatus;

// Opaque branch-decomposition handle.
typedef struct BlBranches BlBranches;

// Opaque sector state handle.
typedef struct BlState BlState;

// Library version as a static null-terminated string.
const char *bl_version(void);

// Point-pair cost bounds at distance `n`: analytic lower bound and the
// constructive upper bound.
enum BlStatus bl_bounds_point_pair(uintptr_t n, double *lower, double *upper);

// Extended-state cost bounds at distance `n` and width `r`.
enum BlStatus bl_bounds_extended(uintptr_t n, uintptr_t r, double *lower, double *upper);

// `κ(r)`, the width coefficient of the extended lower bound.
enum BlStatus bl_kappa(uintptr_t r, double *out);

// `λ(r)`, the width coefficient of the extended constructive cost.
enum BlStatus bl_lambda(uintptr_t r, double *out);

// Close the control generators under commutators on every nontrivial
// sector of an `sites`-site chain and compare against the direct-sum
// dimension. `pass` receives 1 on an exact match.
enum BlStatus bl_lie_closure(uintptr_t sites,
                             uintptr_t cap,
                             uintptr_t *closure_dim,
                             uintptr_t *expected_dim,
                             int *pass);

// Branch weights of the Bell model at analyzer angle `theta`, in the
// order (uu, ud, du, dd). `weights` must hold four doubles.
enum BlStatus bl_bell_weights(double theta, double *weights);

// Replica-ensemble spin correlation of the Bell model.
enum BlStatus bl_bell_correlation(double theta,
                                  uintptr_t replicas,
                                  uint64_t seed,
                                  double *correlation,
                                  double *std_error);

// Complete-separation condition of the Stern-Gerlach impulse:
// returns 1 when `r > 1/(2√2·d)`.
int bl_separation_condition(double r, double d);

// Create the entangled point-pair state at distance `n` on a chain.
enum BlStatus bl_state_point_pair(uintptr_t sites, uintptr_t n, struct BlState **out);

// Create the extended entangled state (distance `n`, width `r`).
enum BlStatus bl_state_extended(uintptr_t sites, uintptr_t n, uintptr_t r, struct BlState **out);

// Release a state handle.
void bl_state_free(struct BlState *state);

// Norm of a state.
enum BlStatus bl_state_norm(const struct BlState *state, double *out);

// Two-sided complexity estimate between a state and the adjacent-pair
// product start, warm-started with the constructive schedule when the
// state is one of the reference targets.
enum BlStatus bl_complexity_reference(uintptr_t sites,
                                      uintptr_t n,
                                      uintptr_t r,
                                      uintptr_t steps,
                                      uintptr_t restarts,
                                      uint64_t seed,
                                      double *lower,
                                      double *upper);

// Decompose a state into branches at threshold `b` with the analytic
// Schmidt-angle complexity oracle.
enum BlStatus bl_branch_decompose(const struct BlState *state,
                                  double b,
                                  uint64_t seed,
                                  struct BlBranches **out);

// Release a branch-decomposition handle.
void bl_branches_free(struct BlBranches *branches);

// Number of branches in a decomposition.
enum BlStatus bl_branches_count(const struct BlBranches *branches, uintptr_t *out);

// Weight of branch `index`.
enum BlStatus bl_branches_weight(const struct BlBranches *branches, uintptr_t index, double *out);

// Complexity of branch `index` (normalized direction).
enum BlStatus bl_branches_complexity(const struct BlBranches *branches,
                                     uintptr_t index,
                                     double *out);

// The decomposition's Q value.
enum BlStatus bl_branches_q(const struct BlBranches *branches, double *out);

// Draw a branch index with Born weights; reproducible per seed.
enum BlStatus bl_branches_sample(const struct BlBranches *branches, uint64_t seed, uintptr_t *out);

#endif  /* BRANCHLAB_H */
