#include <stdio.h>
#include <string.h>

#include "lyagraph.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        LgStatus s_ = (call);                                               \
        if (s_ != LG_STATUS_OK) {                                           \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, lg_last_error()); \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke RUN_DIR\n");
        return 2;
    }
    printf("version %s\n", lg_version());

    LgSystem *sys = NULL;
    CHECK(lg_system_new_default(&sys));
    double x[2] = {1.0, -2.0}, f[2];
    CHECK(lg_system_vector_field(sys, x, f));

    LgRun *run = NULL;
    CHECK(lg_run_load(argv[1], &run));
    size_t n = 0;
    CHECK(lg_run_node_count(run, &n));

    double start[2] = {-4.0, -4.0};
    size_t ids[64], len = 0;
    CHECK(lg_run_plan(run, start, ids, 64, &len));

    LgTrajectory *traj = NULL;
    CHECK(lg_run_simulate(run, start, &traj));
    size_t rows = 0;
    LgRunStatus status;
    CHECK(lg_trajectory_summary(traj, &rows, &status));
    double t, xs[2], u[2];
    size_t node;
    CHECK(lg_trajectory_row(traj, rows - 1, &t, xs, u, &node));

    if (lg_trajectory_row(traj, rows, &t, xs, u, &node) != LG_STATUS_OUT_OF_RANGE || lg_last_error() == NULL) {
        fprintf(stderr, "out-of-range row was accepted\n");
        return 1;
    }
    if (lg_run_load(NULL, &run) != LG_STATUS_NULL_POINTER) {
        fprintf(stderr, "null path was accepted\n");
        return 1;
    }

    printf("nodes %zu path %zu rows %zu status %d final %.4f %.4f node %zu\n", n, len, rows, (int)status, xs[0], xs[1], node);
    lg_trajectory_free(traj);
    lg_run_free(run);
    lg_system_free(sys);
    return status == LG_RUN_STATUS_REACHED ? 0 : 1;
}
