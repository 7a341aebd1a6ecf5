#include <stdio.h>
#include <wtomo.h>

int main(void) {
    WtomoScenario *sc = NULL;
    if (wtomo_scenario_preset("nope", &sc) != WTOMO_STATUS_INVALID_ARGUMENT || sc != NULL) {
        return 1;
    }
    printf("unknown preset status %d: %s\n", WTOMO_STATUS_INVALID_ARGUMENT, wtomo_last_error());

    if (wtomo_scenario_preset("d2", &sc) != WTOMO_STATUS_OK) {
        return 2;
    }
    size_t dims[4];
    size_t order = 0;
    wtomo_scenario_field_shape(sc, dims, &order);
    printf("order %zu dims %zux%zu\n", order, dims[0], dims[1]);

    WtomoReport *report = NULL;
    if (wtomo_recover(sc, WTOMO_SOLVER_VECTOR, 1, &report) != WTOMO_STATUS_OK) {
        fprintf(stderr, "%s\n", wtomo_last_error());
        return 3;
    }
    double eps = wtomo_report_error(report);
    printf("vector error %.3f after %zu iterations\n", eps, wtomo_report_iterations(report));

    WtomoField *estimate = NULL;
    wtomo_report_estimate(report, &estimate);
    double values[100];
    int ok = wtomo_field_values(estimate, values, 100) == WTOMO_STATUS_OK && eps > 0.0 && eps < 1.0;

    wtomo_field_free(estimate);
    wtomo_report_free(report);
    wtomo_scenario_free(sc);
    return ok ? 0 : 4;
}
