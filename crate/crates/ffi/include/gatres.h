#ifndef GATRES_H
#define GATRES_H

#include <stdbool.h>
#include <stddef.h>

typedef enum GatresStatus {
  GATRES_STATUS_OK = 0,
  GATRES_STATUS_NULL_POINTER = 1,
  GATRES_STATUS_INVALID_UTF8 = 2,
  GATRES_STATUS_IO = 3,
  GATRES_STATUS_PARSE = 4,
  GATRES_STATUS_INVALID_MODEL = 5,
  // A state was produced but the solver did not converge.
  GATRES_STATUS_NOT_CONVERGED = 6,
  GATRES_STATUS_SOLVER = 7,
  GATRES_STATUS_CHECKPOINT = 8,
  // The checkpoint holds no scaling for this network.
  GATRES_STATUS_UNKNOWN_NETWORK = 9,
  GATRES_STATUS_LENGTH_MISMATCH = 10,
  GATRES_STATUS_MODEL = 11,
  GATRES_STATUS_PANIC = 12,
  // No node with the requested id.
  GATRES_STATUS_UNKNOWN_NODE = 13,
} GatresStatus;

// A trained estimator loaded from a checkpoint.
typedef struct GatresModel GatresModel;

// A parsed and validated network.
typedef struct GatresNetwork GatresNetwork;

// Result of one steady-state solve.
typedef struct GatresState GatresState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty when none.
// The pointer stays valid until the next failing call on the same thread.
const char *gatres_last_error_message(void);

// Parse INP text into a new network handle.
//
// # Safety
// `inp_text` must be a NUL-terminated string and `out` a valid pointer.
enum GatresStatus gatres_network_from_inp_str(const char *inp_text, struct GatresNetwork **out);

// Read and parse an INP file into a new network handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum GatresStatus gatres_network_from_inp_file(const char *path, struct GatresNetwork **out);

// # Safety
// `network` must come from a `gatres_network_from_*` call or be null.
void gatres_network_free(struct GatresNetwork *network);

// # Safety
// `network` must be a live handle or null.
size_t gatres_network_node_count(const struct GatresNetwork *network);

// # Safety
// `network` must be a live handle or null.
size_t gatres_network_junction_count(const struct GatresNetwork *network);

// # Safety
// `network` must be a live handle or null.
size_t gatres_network_link_count(const struct GatresNetwork *network);

// Position of node `id` in node arrays.
//
// # Safety
// Pointers must be valid; `id` NUL-terminated.
enum GatresStatus gatres_network_node_index(const struct GatresNetwork *network,
                                            const char *id,
                                            size_t *out_index);

// Solve the network's own operating point with every demand scaled by
// `demand_scale`. A non-converged state is still returned through `out`
// together with `NotConverged`.
//
// # Safety
// `network` must be a live handle and `out` a valid pointer.
enum GatresStatus gatres_simulate(const struct GatresNetwork *network,
                                  double demand_scale,
                                  struct GatresState **out);

// # Safety
// `state` must come from [`gatres_simulate`] or be null.
void gatres_state_free(struct GatresState *state);

// # Safety
// `state` must be a live handle or null.
bool gatres_state_converged(const struct GatresState *state);

// # Safety
// `state` must be a live handle or null.
size_t gatres_state_iterations(const struct GatresState *state);

// Copy nodal pressures (mH₂O) into `out`, which must hold exactly one value
// per node.
//
// # Safety
// `state` must be a live handle and `out` valid for `len` writes.
enum GatresStatus gatres_state_pressures(const struct GatresState *state, double *out, size_t len);

// Copy nodal heads (m).
//
// # Safety
// `state` must be a live handle and `out` valid for `len` writes.
enum GatresStatus gatres_state_heads(const struct GatresState *state, double *out, size_t len);

// Copy link flows (m³/s), one per link.
//
// # Safety
// `state` must be a live handle and `out` valid for `len` writes.
enum GatresStatus gatres_state_flows(const struct GatresState *state, double *out, size_t len);

// Load a checkpoint written by the `gatres` tool.
//
// # Safety
// `path` must be NUL-terminated and `out` a valid pointer.
enum GatresStatus gatres_model_load(const char *path, struct GatresModel **out);

// # Safety
// `model` must come from [`gatres_model_load`] or be null.
void gatres_model_free(struct GatresModel *model);

// Estimate every nodal pressure from sparse readings.
//
// `observed` holds one value per node in mH₂O; NaN marks a node without a
// sensor. `out` receives the estimate for every node. `network_key` picks
// the scaling stored in the checkpoint; pass null to use the network title,
// or the only stored scaling.
//
// # Safety
// Handles must be live, `observed` and `out` valid for `len` values and
// `network_key` null or NUL-terminated.
enum GatresStatus gatres_model_estimate(const struct GatresModel *model,
                                        const struct GatresNetwork *network,
                                        const char *network_key,
                                        const double *observed,
                                        double *out,
                                        size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GATRES_H */
