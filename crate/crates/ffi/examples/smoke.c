#include <stdio.h>
#include "degenhom.h"

int main(void) {
    DhLattice *lat = NULL;
    DhEnvironment *env = NULL;
    DhPotential *pot = NULL;
    double f[2] = {1.0, 0.0};
    double w = 0.0;

    if (dh_lattice_new_preset("zd-nn", 2, 1, &lat) != DH_STATUS_OK ||
        dh_environment_from_json(lat, "{\"dist\": [{\"kind\": \"constant\", \"c\": 3.0}]}", &env) != DH_STATUS_OK ||
        dh_potential_from_json("{\"family\": \"quadratic\"}", &pot) != DH_STATUS_OK ||
        dh_whom_k(lat, env, pot, 0, f, 2, 2, &w) != DH_STATUS_OK) {
        fprintf(stderr, "error: %s\n", dh_last_error());
        return 1;
    }
    printf("degenhom %s: W(e1) = %.12f\n", dh_version(), w);
    dh_potential_free(pot);
    dh_environment_free(env);
    dh_lattice_free(lat);
    return w == 3.0 ? 0 : 1;
}
