#include <stdio.h>
#include "vlasov_siac.h"

int main(void) {
    VsSimulation *sim = NULL;
    if (vs_simulation_new(VS_CASE_LANDAU, 16, 16, 1, &sim) != VS_STATUS_OK) {
        fprintf(stderr, "new: %s\n", vs_last_error());
        return 1;
    }
    size_t steps = 0;
    if (vs_simulation_advance(sim, 0.02, &steps) != VS_STATUS_OK || steps == 0) {
        return 2;
    }
    VsQuantities q;
    if (vs_simulation_quantities(sim, &q) != VS_STATUS_OK) {
        return 3;
    }
    double p[2] = {1.0, 0.0}, v = 0.0;
    if (vs_simulation_eval_f(sim, p, 2, 1, &v) != VS_STATUS_OK || !(v > 0.0)) {
        return 4;
    }
    if (vs_simulation_new(VS_CASE_WEIBEL, 4, 4, 7, NULL) != VS_STATUS_NULL_POINTER || vs_last_error() == NULL) {
        return 5;
    }
    vs_simulation_free(sim);
    printf("ok t=%.3f mass=%.12f\n", q.t, q.mass);
    return 0;
}
