#include <stdio.h>
#include <string.h>
#include "rbb.h"

int main(void) {
    RbbSim *sim = NULL;
    if (rbb_sim_new(10, 40, RBB_INIT_UNIFORM, RBB_PROCESS_RBB, 42, 0, &sim) != RBB_STATUS_OK) return 1;
    if (rbb_sim_step(sim, 100) != RBB_STATUS_OK) return 2;
    uint64_t loads[10];
    if (rbb_sim_loads(sim, loads, 10) != RBB_STATUS_OK) return 3;
    uint64_t total = 0;
    for (int i = 0; i < 10; i++) total += loads[i];
    if (total != 40) return 4;
    RbbObservation obs;
    if (rbb_sim_observe(sim, 0.125, &obs) != RBB_STATUS_OK || obs.round != 100) return 5;
    if (rbb_sim_loads(sim, loads, 3) != RBB_STATUS_BUFFER_TOO_SMALL) return 6;
    if (rbb_last_error_message() == NULL) return 7;
    rbb_sim_free(sim);
    RbbCheckResult res;
    if (rbb_run_check("binomial_bound", 42, &res) != RBB_STATUS_OK || !res.passed) return 8;
    printf("ok %s\n", rbb_version());
    return 0;
}
