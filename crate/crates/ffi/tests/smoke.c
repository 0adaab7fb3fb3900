#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "arks.h"

#define CHECK(call)                                                         \
  do {                                                                      \
    ArksStatus s_ = (call);                                                 \
    if (s_ != ARKS_STATUS_OK) {                                             \
      const char *m_ = arks_last_error();                                   \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_, m_ ? m_ : ""); \
      return 1;                                                             \
    }                                                                       \
  } while (0)

int main(void) {
  const char *cfg = "grid.nx = 8\ngrid.ny = 8\nsolver.t_end = 0.2\nsolver.record_every = 0.05\n";
  ArksSimulation *sim = NULL;
  CHECK(arks_simulation_new(cfg, &sim));
  ArksRunState state = ARKS_RUN_STATE_RUNNING;
  CHECK(arks_simulation_advance(sim, 1.0, &state));
  if (state != ARKS_RUN_STATE_FINISHED) return 2;

  size_t nx = 0, ny = 0, records = 0;
  CHECK(arks_simulation_grid(sim, &nx, &ny));
  CHECK(arks_simulation_record_count(sim, &records));
  double *u = malloc(nx * ny * sizeof(double));
  CHECK(arks_simulation_copy_field(sim, ARKS_FIELD_U, u, nx * ny));
  free(u);

  ArksDiagnostics d;
  CHECK(arks_simulation_diagnostics(sim, &d));
  arks_simulation_free(sim);

  ArksParams p = {1.0, 2.0, 1.0, 1.0, 2.0, 1.2, 1.0, 1.5};
  ArksRegime r;
  CHECK(arks_classify(&p, -1.0, &r));
  if (!r.cond_strict || r.lin2018 != -1) return 3;

  if (arks_simulation_new("params.chi = -1", &sim) != ARKS_STATUS_CONFIG) return 4;
  if (sim != NULL || arks_last_error() == NULL) return 5;

  printf("records=%zu t=%.3f mass=%.6f\n", records, d.t, d.mass);
  return 0;
}
