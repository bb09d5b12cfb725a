#include <math.h>
#include <stdio.h>
#include <string.h>

#include "fogcap.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,    \
                    __LINE__, #cond);                                 \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    FogScenario *s = NULL;
    CHECK(fog_scenario_new(20.0, 0.1, &s) == FOG_STATUS_OK);
    CHECK(fog_scenario_add_gaussian(s, 4.0, 1.0) == FOG_STATUS_OK);
    CHECK(fog_scenario_add_ar1(s, 8.0, 1.0, 0.3) == FOG_STATUS_OK);
    CHECK(fog_scenario_add_uniform(s, 6.0 - sqrt(3.0), 6.0 + sqrt(3.0)) == FOG_STATUS_OK);

    double lo, hi;
    bool open;
    CHECK(fog_convexity_range(s, &lo, &hi, &open) == FOG_STATUS_OK);
    CHECK(fabs(lo - 18.318195) < 1e-9 && hi == 20.0 && open);

    FogMethod qle = fog_method_default(FOG_METHOD_KIND_QLE);
    FogOptimizeResult opt;
    CHECK(fog_algorithm1(s, &qle, 0.01, 2000, NULL, &opt) == FOG_STATUS_OK);
    CHECK(opt.feasible && opt.alpha_star > 18.0 && opt.alpha_star < 20.0);

    FogSimResult sim;
    CHECK(fog_simulate(s, opt.alpha_star, 10000, 1, &sim) == FOG_STATUS_OK);
    CHECK(sim.loss_probability >= 0.0 && sim.loss_probability < 0.05);

    FogMethod gd1 = fog_method_default(FOG_METHOD_KIND_GD1);
    double v;
    CHECK(fog_expected_overflow(s, 5.0, &gd1, &v) == FOG_STATUS_VALIDITY);
    CHECK(strstr(fog_last_error(), "validity") != NULL);

    CHECK(fog_stop_loss_uniform(7.0, 9.0, 8.8, &v) == FOG_STATUS_OK);
    CHECK(fabs(v - 0.01) < 1e-15);

    fog_scenario_free(s);
    printf("ok %s\n", fog_version());
    return 0;
}
