#ifndef LYAGRAPH_H
#define LYAGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. The planner codes match the CLI exit codes.
typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_POINTER = 1,
  LG_STATUS_VALIDATION = 2,
  LG_STATUS_COVERAGE = 3,
  LG_STATUS_EXECUTION = 4,
  LG_STATUS_IO = 5,
  LG_STATUS_OUT_OF_RANGE = 6,
  LG_STATUS_INTERNAL = 7,
} LgStatus;

// Final status of an executed trajectory.
typedef enum LgRunStatus {
  LG_RUN_STATUS_REACHED = 0,
  LG_RUN_STATUS_TIMEOUT = 1,
  LG_RUN_STATUS_OBSTACLE_HIT = 2,
} LgRunStatus;

// One trained node controller loaded from its directory.
typedef struct LgNode LgNode;

// A tree or graph run directory with its node controllers.
typedef struct LgRun LgRun;

// Plant model.
typedef struct LgSystem LgSystem;

// Executed closed-loop trajectory.
typedef struct LgTrajectory LgTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *lg_last_error(void);

// Library version as a static NUL-terminated string.
const char *lg_version(void);

// Default benchmark plant.
//
// # Safety
// `out` must be a valid pointer to write a handle to.
enum LgStatus lg_system_new_default(struct LgSystem **out);

// Plant from the `[system]` table of a TOML run configuration.
//
// # Safety
// `config_toml` must be a NUL-terminated string and `out` writable.
enum LgStatus lg_system_from_toml(const char *config_toml, struct LgSystem **out);

// # Safety
// `sys` must come from an `lg_system_*` constructor and not be used afterwards.
void lg_system_free(struct LgSystem *sys);

// Drift `∇h(x)`.
//
// # Safety
// `x` and `out` must each point to two doubles.
enum LgStatus lg_system_vector_field(const struct LgSystem *sys, const double *x, double *out);

// One integration step from `x` under control `u` (saturated first).
//
// # Safety
// `x`, `u` and `out` must each point to two doubles.
enum LgStatus lg_system_step(const struct LgSystem *sys,
                             const double *x,
                             const double *u,
                             double *out);

// Loads a node directory holding `policy.json`, `lyapunov.json` and `meta.json`.
//
// # Safety
// `dir` must be a NUL-terminated path and `out` writable.
enum LgStatus lg_node_load(const char *dir, struct LgNode **out);

// # Safety
// `node` must come from [`lg_node_load`] and not be used afterwards.
void lg_node_free(struct LgNode *node);

// Center and certified radius.
//
// # Safety
// `center` must point to two doubles, `eta` to one.
enum LgStatus lg_node_region(const struct LgNode *node, double *center, double *eta);

// Deterministic control at `x` before saturation.
//
// # Safety
// `x` and `u` must each point to two doubles.
enum LgStatus lg_node_action(const struct LgNode *node,
                             const struct LgSystem *sys,
                             const double *x,
                             double *u);

// Lyapunov value `V(x)`.
//
// # Safety
// `x` must point to two doubles and `value` to one.
enum LgStatus lg_node_lyapunov(const struct LgNode *node, const double *x, double *value);

// Loads a tree or graph run directory.
//
// # Safety
// `dir` must be a NUL-terminated path and `out` writable.
enum LgStatus lg_run_load(const char *dir, struct LgRun **out);

// Trains a controller tree for the configuration and executes it. The run
// is written to `out_dir` and returned loaded. This trains neural networks
// and takes minutes.
//
// # Safety
// Both strings must be NUL-terminated; `out` must be writable.
enum LgStatus lg_plan_tree(const char *config_toml, const char *out_dir, struct LgRun **out);

// Graph counterpart of [`lg_plan_tree`]: covers the box, attaches the goal
// and routes every configured start.
//
// # Safety
// Both strings must be NUL-terminated; `out` must be writable.
enum LgStatus lg_plan_graph(const char *config_toml, const char *out_dir, struct LgRun **out);

// # Safety
// `run` must come from an `lg_run_load` or `lg_plan_*` and not be used afterwards.
void lg_run_free(struct LgRun *run);

// Number of node controllers in the run.
//
// # Safety
// `count` must be writable.
enum LgStatus lg_run_node_count(const struct LgRun *run, size_t *count);

// Center and radius of node `id`.
//
// # Safety
// `center` must point to two doubles, `eta` to one.
enum LgStatus lg_run_node_region(const struct LgRun *run, size_t id, double *center, double *eta);

// Node sequence a start state would follow. Writes up to `capacity` ids and
// the full length to `len`.
//
// # Safety
// `start` must point to two doubles, `ids` to `capacity` slots (may be null
// when `capacity` is 0), `len` must be writable.
enum LgStatus lg_run_plan(const struct LgRun *run,
                          const double *start,
                          size_t *ids,
                          size_t capacity,
                          size_t *len);

// Plans and executes from `start` without touching the run directory.
//
// # Safety
// `start` must point to two doubles; `out` must be writable.
enum LgStatus lg_run_simulate(const struct LgRun *run,
                              const double *start,
                              struct LgTrajectory **out);

// # Safety
// `traj` must come from [`lg_run_simulate`] and not be used afterwards.
void lg_trajectory_free(struct LgTrajectory *traj);

// Number of rows and final status.
//
// # Safety
// `len` and `status` must be writable.
enum LgStatus lg_trajectory_summary(const struct LgTrajectory *traj,
                                    size_t *len,
                                    enum LgRunStatus *status);

// Row `i`: time, state, applied control and active node id.
//
// # Safety
// `x` and `u` must each point to two doubles; `t` and `node` must be writable.
enum LgStatus lg_trajectory_row(const struct LgTrajectory *traj,
                                size_t i,
                                double *t,
                                double *x,
                                double *u,
                                size_t *node);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LYAGRAPH_H */
