#ifndef REXTRA_H
#define REXTRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RextraAlgorithm {
  REXTRA_ALGORITHM_REXTRA = 0,
  REXTRA_ALGORITHM_EXTRA = 1,
  REXTRA_ALGORITHM_DRDGD = 2,
  REXTRA_ALGORITHM_DPRGD = 3,
  REXTRA_ALGORITHM_DRGTA = 4,
  REXTRA_ALGORITHM_DPRGT = 5,
} RextraAlgorithm;

typedef enum RextraStatus {
  REXTRA_STATUS_OK = 0,
  REXTRA_STATUS_NULL_POINTER = 1,
  REXTRA_STATUS_INVALID_ARGUMENT = 2,
  REXTRA_STATUS_DIMENSION_MISMATCH = 3,
  REXTRA_STATUS_SINGULAR_PROJECTION = 4,
  REXTRA_STATUS_DISCONNECTED = 5,
  REXTRA_STATUS_BUFFER_TOO_SMALL = 6,
  REXTRA_STATUS_IO = 7,
  REXTRA_STATUS_CONFIG = 8,
  REXTRA_STATUS_NUMERICAL = 9,
  REXTRA_STATUS_PANIC = 10,
} RextraStatus;

typedef enum RextraGraph {
  REXTRA_GRAPH_ERDOS_RENYI = 0,
  REXTRA_GRAPH_RING = 1,
  REXTRA_GRAPH_COMPLETE = 2,
} RextraGraph;

typedef enum RextraTermination {
  REXTRA_TERMINATION_CONVERGED = 0,
  REXTRA_TERMINATION_MAX_EPOCHS = 1,
  REXTRA_TERMINATION_FAILED = 2,
} RextraTermination;

typedef struct RextraNetwork RextraNetwork;

typedef struct RextraProblem RextraProblem;

typedef struct RextraSolver RextraSolver;

typedef struct RextraTrace RextraTrace;

// Solver settings. Start from [`rextra_run_options_default`].
typedef struct RextraRunOptions {
  enum RextraAlgorithm algorithm;
  double alpha;
  // Use `alpha / sqrt(k + 1)`; only the decentralized gradient baselines
  // accept it.
  bool diminishing;
  double theta;
  uint32_t t_rounds;
  uint32_t max_epochs;
  double grad_tol;
  uint64_t seed;
  // Per-agent minibatch size, 0 for full gradients.
  uint32_t batch;
} RextraRunOptions;

// One metrics row; unavailable values are NaN.
typedef struct RextraMetrics {
  uint64_t k;
  double epoch;
  uint64_t comm_entries_cum;
  double consensus_err;
  double grad_norm;
  double fval;
  double ds;
} RextraMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next failing call on the same thread.
const char *rextra_last_error_message(void);

struct RextraRunOptions rextra_run_options_default(void);

// Synthetic PCA with `rows_per_agent` rows per agent in dimension `dim`.
//
// # Safety
// `out` must be valid for writes.
enum RextraStatus rextra_problem_pca_synthetic(size_t agents,
                                               size_t rows_per_agent,
                                               size_t dim,
                                               size_t rank,
                                               double xi,
                                               uint64_t seed,
                                               struct RextraProblem **out);

// Synthetic low-rank completion of a `rows × cols` matrix split by columns.
//
// # Safety
// `out` must be valid for writes.
enum RextraStatus rextra_problem_lrmc_synthetic(size_t agents,
                                                size_t rows,
                                                size_t cols,
                                                size_t rank,
                                                double ridge,
                                                uint64_t seed,
                                                struct RextraProblem **out);

// `f_i(x) = ½‖x − b_i‖²` with Gaussian targets, on the Stiefel manifold or
// on the whole space.
//
// # Safety
// `out` must be valid for writes.
enum RextraStatus rextra_problem_quadratic(size_t agents,
                                           size_t rows,
                                           size_t cols,
                                           bool euclidean,
                                           uint64_t seed,
                                           struct RextraProblem **out);

// PCA on a caller-supplied row-major `rows × cols` data matrix whose rows
// are dealt randomly to `agents` agents.
//
// # Safety
// `data` must point to `rows * cols` readable values; `out` must be valid
// for writes.
enum RextraStatus rextra_problem_pca_from_rows(const double *data,
                                               size_t rows,
                                               size_t cols,
                                               size_t agents,
                                               size_t rank,
                                               uint64_t seed,
                                               struct RextraProblem **out);

// # Safety
// `problem` must be a live handle; the out pointers must be valid for writes.
enum RextraStatus rextra_problem_shape(const struct RextraProblem *problem,
                                       size_t *agents,
                                       size_t *rows,
                                       size_t *cols);

// # Safety
// `problem` must be NULL or a handle not yet freed.
void rextra_problem_free(struct RextraProblem *problem);

// Metropolis weights on a connected graph; `p` is used only for
// Erdős–Rényi graphs.
//
// # Safety
// `out` must be valid for writes.
enum RextraStatus rextra_network_new(enum RextraGraph graph,
                                     size_t agents,
                                     double p,
                                     uint64_t seed,
                                     struct RextraNetwork **out);

// Second largest singular value of the mixing matrix.
//
// # Safety
// `network` must be a live handle; `out` must be valid for writes.
enum RextraStatus rextra_network_sigma2(const struct RextraNetwork *network, double *out);

// Copies the `n × n` mixing matrix, row-major.
//
// # Safety
// `network` must be a live handle; `buf` must hold `len` writable values.
enum RextraStatus rextra_network_weights(const struct RextraNetwork *network,
                                         double *buf,
                                         size_t len);

// # Safety
// `network` must be NULL or a handle not yet freed.
void rextra_network_free(struct RextraNetwork *network);

// A solver started at the seeded consensual point. It keeps its own
// reference to the problem data; the network is only read here.
//
// # Safety
// `problem`, `network` and `options` must be live; `out` must be valid for
// writes.
enum RextraStatus rextra_solver_new(const struct RextraProblem *problem,
                                    const struct RextraNetwork *network,
                                    const struct RextraRunOptions *options,
                                    struct RextraSolver **out);

// Advances one iteration. `metrics` may be NULL; otherwise it receives the
// metrics after the step.
//
// # Safety
// `solver` must be live; `metrics` must be NULL or valid for writes.
enum RextraStatus rextra_solver_step(struct RextraSolver *solver, struct RextraMetrics *metrics);

// # Safety
// `solver` must be live; `out` must be valid for writes.
enum RextraStatus rextra_solver_metrics(const struct RextraSolver *solver,
                                        struct RextraMetrics *out);

// Copies agent `agent`'s current `d × r` iterate, row-major.
//
// # Safety
// `solver` must be live; `buf` must hold `len` writable values.
enum RextraStatus rextra_solver_copy_block(const struct RextraSolver *solver,
                                           size_t agent,
                                           double *buf,
                                           size_t len);

// # Safety
// `solver` must be NULL or a handle not yet freed.
void rextra_solver_free(struct RextraSolver *solver);

// Runs to convergence or the epoch budget. A run that breaks down midway
// still succeeds and reports [`RextraTermination::Failed`].
//
// # Safety
// `problem`, `network` and `options` must be live; `out` must be valid for
// writes.
enum RextraStatus rextra_run(const struct RextraProblem *problem,
                             const struct RextraNetwork *network,
                             const struct RextraRunOptions *options,
                             struct RextraTrace **out);

// Number of metrics rows, including the initial one. 0 for NULL.
//
// # Safety
// `trace` must be NULL or live.
size_t rextra_trace_len(const struct RextraTrace *trace);

// # Safety
// `trace` must be live; `out` must be valid for writes.
enum RextraStatus rextra_trace_row(const struct RextraTrace *trace,
                                   size_t index,
                                   struct RextraMetrics *out);

// How the run ended. A failed run's reason is available through
// [`rextra_last_error_message`] right after this call.
//
// # Safety
// `trace` must be live; `out` must be valid for writes.
enum RextraStatus rextra_trace_termination(const struct RextraTrace *trace,
                                           enum RextraTermination *out);

// # Safety
// `trace` must be NULL or a handle not yet freed.
void rextra_trace_free(struct RextraTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REXTRA_H */
