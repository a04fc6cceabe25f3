#ifndef BYPASSQKD_H
#define BYPASSQKD_H

/* C interface to the bypass-channel QKD key-rate library. All functions are
 * synchronous; handles are freed with the matching *_free call. Functions
 * returning bqkd_status leave a human-readable message retrievable through
 * bqkd_last_error() on any nonzero return (thread-local). */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bqkd_status {
  BQKD_OK = 0,
  BQKD_CONFIG_ERROR = 1,     /* schema violation / bad argument */
  BQKD_NUMERICAL_FAILURE = 2,
  BQKD_INFEASIBLE = 3        /* every requested point infeasible */
} bqkd_status;

typedef struct bqkd_config bqkd_config;   /* parsed, validated run request */
typedef struct bqkd_results bqkd_results; /* row set plus frozen CSV text */

/* One result row; mirrors the CSV column order. */
typedef struct bqkd_row {
  char scenario_id[64];
  char protocol[16];   /* "sp" | "sp_mismatch" | "wcp" */
  double eta_ae;
  double eta_t;
  double w;
  double fw_value;
  double lower_bound;
  double ec_term;
  double key_rate;     /* lower_bound - ec_term when feasible */
  int feasible;
  int iterations;
  double duality_gap;
  double wall_time_ms;
  char status[24];     /* "ok" | "infeasible" | "numerical_trouble" */
} bqkd_row;

typedef struct bqkd_weight_report {
  double lambda_min; /* smallest double-click eigenvalue at N+1 photons */
  double w_b;        /* B-side weight bound q_dc / lambda_min */
  double w_f;        /* bypass-arm tail mass */
  double w;          /* combined weight */
} bqkd_weight_report;

const char* bqkd_version(void);
/* Message from the most recent failing call on this thread ("" if none). */
const char* bqkd_last_error(void);

/* Config is a JSON object with a schema_version field; see README for the
 * schema. Validation errors name the offending field path. */
bqkd_status bqkd_config_parse(const char* json_text, bqkd_config** out);
bqkd_status bqkd_config_load(const char* path, bqkd_config** out);
void bqkd_config_free(bqkd_config* cfg);

/* Runs every grid point in the config (parallel jobs, results merged in grid
 * order). Returns BQKD_NUMERICAL_FAILURE if any point hit solver trouble and
 * BQKD_INFEASIBLE if no point was feasible; *out carries the rows either
 * way. */
bqkd_status bqkd_run(const bqkd_config* cfg, bqkd_results** out);

/* Reference figure data at desk-scale grids; name is one of
 * "fig3", "fig4", "fig6", "fig7". The CSV includes analytic baseline columns
 * beyond the bqkd_row fields, so render from the CSV, not the rows. */
bqkd_status bqkd_figure(const char* name, bqkd_results** out);

size_t bqkd_results_size(const bqkd_results* res);
bqkd_status bqkd_results_row(const bqkd_results* res, size_t i, bqkd_row* out);
/* Owned by the results handle; valid until bqkd_results_free. */
const char* bqkd_results_csv(const bqkd_results* res);
void bqkd_results_free(bqkd_results* res);

/* Subspace-weight bound from the double-click rate (valid for eta_t = 1).
 * mu > 0 adds the weak-coherent-pulse bypass-arm Poisson tail at the given
 * eta_ae; mu = 0 means a source with no tail beyond the cutoff. */
bqkd_status bqkd_weight(double q_dc, int n, double p_z, double mu,
                        double eta_ae, bqkd_weight_report* out);

/* Fast invariant checks (objective identity, gradient, closed forms, solver
 * duality, one certified point). Writes one line per check into buf (always
 * NUL-terminated); returns BQKD_OK only if every check passed. */
bqkd_status bqkd_selftest(char* buf, size_t buflen);

/* Worker threads for bqkd_run; 0 restores the hardware default. Overrides
 * the config's jobs field. */
void bqkd_set_threads(int n);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BYPASSQKD_H */
