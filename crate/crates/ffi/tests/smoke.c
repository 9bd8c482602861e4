#include <math.h>
#include <stdio.h>
#include "tdlab.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "failed: %s (%s)\n", #cond, tdlab_last_error()); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    TdlabMrp *mrp = NULL;
    TdlabSpec *spec = NULL;
    CHECK(tdlab_mrp_two_state(0.4, 0.9, &mrp) == TDLAB_STATUS_OK);
    CHECK(tdlab_mrp_n_states(mrp) == 2);
    CHECK(tdlab_spec_parse("pulse:1", &spec) == TDLAB_STATUS_OK);

    double modulus = 0.0;
    CHECK(tdlab_spec_modulus(spec, 0.9, &modulus) == TDLAB_STATUS_OK);
    CHECK(fabs(modulus - 2.71) < 1e-12);

    double v0[2] = {1.0, -1.0};
    TdlabIterateResult res;
    CHECK(tdlab_iterate(mrp, spec, v0, 2, 1.0, 10000, &res) == TDLAB_STATUS_OK);
    CHECK(res.verdict == TDLAB_VERDICT_DIVERGED);
    CHECK(fabs(res.last_growth_ratio - 1.2124) < 1e-6);

    TdlabSpec *bad = NULL;
    CHECK(tdlab_spec_parse("lambda:7", &bad) != TDLAB_STATUS_OK);
    CHECK(bad == NULL);
    CHECK(tdlab_last_error()[0] != '\0');

    tdlab_spec_free(spec);
    tdlab_mrp_free(mrp);
    printf("ok %s\n", tdlab_version());
    return 0;
}
