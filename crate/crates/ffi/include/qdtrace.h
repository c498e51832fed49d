#ifndef QDTRACE_H
#define QDTRACE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QdStatus {
  QD_STATUS_OK = 0,
  QD_STATUS_NULL_POINTER = 1,
  QD_STATUS_INVALID_ARGUMENT = 2,
  QD_STATUS_IO = 3,
  QD_STATUS_PARSE = 4,
  QD_STATUS_CONFIG = 5,
  QD_STATUS_TRACE = 6,
  QD_STATUS_OUTAGE = 7,
  QD_STATUS_METRIC = 8,
  QD_STATUS_OUT_OF_RANGE = 9,
  QD_STATUS_PANIC = 10,
} QdStatus;

typedef enum QdMpcKind {
  QD_MPC_KIND_MAIN = 0,
  QD_MPC_KIND_PRE = 1,
  QD_MPC_KIND_POST = 2,
} QdMpcKind;

// Channel instances and link samples of one scenario run.
typedef struct QdRun QdRun;

// Loaded scenario: configuration, mesh and materials.
typedef struct QdScenario QdScenario;

typedef struct QdInstanceInfo {
  size_t timestep;
  // Index of the transmitter among the scenario nodes.
  size_t tx_node;
  // Index of the receiver among the scenario nodes.
  size_t rx_node;
  size_t n_mpcs;
  uint64_t tuples_visited;
  uint64_t geometric_ops;
  uint64_t obstruction_checks;
  uint64_t check_budget;
} QdInstanceInfo;

typedef struct QdMpc {
  enum QdMpcKind kind;
  double delay_s;
  double gain_db;
  double aod_az;
  double aod_el;
  double aoa_az;
  double aoa_el;
  double phase_rad;
  uint64_t parent;
} QdMpc;

// One receiver at one timestep; NaN powers mark an outage.
typedef struct QdLinkSample {
  size_t timestep;
  double time_s;
  size_t rx_node;
  size_t n_mpcs;
  double rx_power_dbm;
  double snr_db;
  double sinr_db;
} QdLinkSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next qdtrace call on this thread.
const char *qd_last_error(void);

// Library version as a static NUL-terminated string.
const char *qd_version(void);

// Loads a scenario file; mesh and material paths resolve relative to it.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum QdStatus qd_scenario_load(const char *path, struct QdScenario **out);

// Builds one of the built-in scenarios ("indoor1", "l_room", "courtyard").
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum QdStatus qd_scenario_preset(const char *name, struct QdScenario **out);

// # Safety
// `scn` must come from this library and not be used afterwards.
void qd_scenario_free(struct QdScenario *scn);

// Sets the maximum reflection order. The scenario is unchanged on error.
//
// # Safety
// `scn` must be a valid handle.
enum QdStatus qd_scenario_set_max_reflections(struct QdScenario *scn, size_t max_reflections);

// Sets the relative and absolute thresholds in dB; `-INFINITY` disables
// the relative one.
//
// # Safety
// `scn` must be a valid handle.
enum QdStatus qd_scenario_set_thresholds(struct QdScenario *scn, double rel_db, double abs_db);

// # Safety
// `scn` must be a valid handle.
enum QdStatus qd_scenario_set_steps(struct QdScenario *scn, size_t steps);

// # Safety
// `scn` must be a valid handle.
enum QdStatus qd_scenario_set_qd(struct QdScenario *scn, bool enabled);

// # Safety
// `scn` must be a valid handle.
enum QdStatus qd_scenario_set_seed(struct QdScenario *scn, uint64_t seed);

// Number of triangles in the scenario mesh, or 0 for a null handle.
//
// # Safety
// `scn` must be null or a valid handle.
size_t qd_scenario_triangle_count(const struct QdScenario *scn);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `scn` must be null or a valid handle.
size_t qd_scenario_node_count(const struct QdScenario *scn);

// Copies the id of node `index` into `buf` (NUL-terminated, truncated to
// `len`) and stores the full id length in `needed` when non-null.
//
// # Safety
// `scn` must be a valid handle and `buf` writable for `len` bytes.
enum QdStatus qd_scenario_node_id(const struct QdScenario *scn,
                                  size_t index,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

// Hex SHA-256 digest of the configuration, mesh and materials, written like
// [`qd_scenario_node_id`].
//
// # Safety
// `scn` must be a valid handle and `buf` writable for `len` bytes.
enum QdStatus qd_scenario_digest(const struct QdScenario *scn, char *buf, size_t len);

// Traces every (timestep, tx, rx) instance and evaluates all links.
// `jobs` is the worker count, 0 for all cores; results do not depend on it.
//
// # Safety
// `scn` must be a valid handle and `out` a valid pointer.
enum QdStatus qd_run(const struct QdScenario *scn, size_t jobs, struct QdRun **out);

// # Safety
// `run` must come from this library and not be used afterwards.
void qd_run_free(struct QdRun *run);

// # Safety
// `run` must be null or a valid handle.
size_t qd_run_instance_count(const struct QdRun *run);

// # Safety
// `run` must be null or a valid handle.
size_t qd_run_sample_count(const struct QdRun *run);

// Ray-tracing and link-evaluation wall times in seconds.
//
// # Safety
// `run` must be a valid handle; the out pointers may be null.
enum QdStatus qd_run_timing(const struct QdRun *run, double *t_rt_s, double *t_ns_s);

// # Safety
// `scn` and `run` must be valid handles, `run` produced from `scn`, and
// `info` a valid pointer.
enum QdStatus qd_run_instance(const struct QdRun *run,
                              const struct QdScenario *scn,
                              size_t index,
                              struct QdInstanceInfo *info);

// MPC `k` of instance `index`.
//
// # Safety
// `run` must be a valid handle and `mpc` a valid pointer.
enum QdStatus qd_run_mpc(const struct QdRun *run, size_t index, size_t k, struct QdMpc *mpc);

// # Safety
// `scn` and `run` must be valid handles, `run` produced from `scn`, and
// `sample` a valid pointer.
enum QdStatus qd_run_sample(const struct QdRun *run,
                            const struct QdScenario *scn,
                            size_t index,
                            struct QdLinkSample *sample);

// Writes the run's channel trace. The file is replaced only on success.
//
// # Safety
// `run` must be a valid handle and `path` a NUL-terminated string.
enum QdStatus qd_run_write_trace(const struct QdRun *run, const char *path);

// Size of a reflection tree: `1 + sum_{r=1..R} T (T-1)^(r-1)`, saturating.
uint64_t qd_predicted_tuple_count(uint64_t triangles, size_t max_order);

// Runtime speedup of a simplified over a baseline configuration.
double qd_speedup(double t_rt_base,
                  double t_ns_base,
                  double t_rt_simp,
                  double t_ns_simp,
                  double n_runs);

// NRMSE of `simplified` against `baseline` on the shared time grid `t`,
// all of length `n`.
//
// # Safety
// The three arrays must hold `n` values and `out` must be valid.
enum QdStatus qd_nrmse(const double *t,
                       const double *baseline,
                       const double *simplified,
                       size_t n,
                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDTRACE_H */
