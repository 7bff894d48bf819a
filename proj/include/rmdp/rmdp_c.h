/* C interface to librmdp. All functions return an RmdpStatus; results are
 * written through out-parameters. Strings returned through `char**` are
 * heap-allocated and must be released with rmdp_string_free. Models are
 * opaque handles released with rmdp_model_free. The last error message of
 * the calling thread is available via rmdp_last_error. */
#ifndef RMDP_C_H
#define RMDP_C_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct RmdpModel RmdpModel;

typedef enum RmdpStatus {
  RMDP_OK = 0,
  RMDP_ERR_DOMAIN = 1, /* solver/model/semantics errors */
  RMDP_ERR_USAGE = 2   /* IO failures and invalid arguments */
} RmdpStatus;

/* Message of the last failing call on this thread ("" if none). The pointer
 * stays valid until the next failing call on the same thread. */
const char* rmdp_last_error(void);

void rmdp_string_free(char* s);

/* ---- model construction ---- */

RmdpStatus rmdp_model_from_string(const char* text, RmdpModel** out);
RmdpStatus rmdp_model_from_file(const char* path, RmdpModel** out);
/* name: "cloud", "spelunking", "palindrome", or "chain:N" (1 <= N <= 30). */
RmdpStatus rmdp_model_builtin(const char* name, RmdpModel** out);
void rmdp_model_free(RmdpModel* m);

/* ---- model queries ---- */

/* Canonical .rmdp text. */
RmdpStatus rmdp_model_serialize(const RmdpModel* m, char** out_text);
/* JSON array of diagnostics (empty array when valid); *out_count receives
 * the number of diagnostics. */
RmdpStatus rmdp_model_validate(const RmdpModel* m, char** out_json, int* out_count);
RmdpStatus rmdp_model_is_single_exit(const RmdpModel* m, int* out);
RmdpStatus rmdp_model_diameter(const RmdpModel* m, double* out);

/* ---- exact solvers ----
 * algo: "1exit" (stack_bound/tol ignored), "truncated" (stack_bound, tol),
 * or "deterministic" (stack_bound doubles as the initial depth cap).
 * Emits a JSON report: {"algo", "values", "strategy"?, "residual"?}. */
RmdpStatus rmdp_solve(const RmdpModel* m, const char* algo, int stack_bound, double tol,
                      char** out_json);

/* Appendix-style LP text for a proper 1-exit model. */
RmdpStatus rmdp_export_lp(const RmdpModel* m, char** out_text);

/* PAC learning of a 1-exit model from simulator samples of the model itself.
 * Emits {"eps","delta","samples_per_row","value_at"{...}}. */
RmdpStatus rmdp_pac_1exit(const RmdpModel* m, double eps, double delta, double K, uint64_t seed,
                          char** out_json);

/* ---- learning ---- */

typedef struct RmdpHyper {
  double alpha;
  double alpha_power;
  double eps_initial;
  double eps_final;
  long eps_decay_steps;
  double quant;
  int step_cap;
  long total_steps;
  double lambda;
  double q_init;
  uint64_t seed;
  int start_comp;
  int start_entry; /* -1: first entry of start_comp */
  long eval_every; /* 0: total_steps / 200 */
  int eval_episodes;
  int include_truncated_eval; /* 0/1 */
} RmdpHyper;

/* Defaults matching the library's Hyperparameters struct. */
void rmdp_hyper_init(RmdpHyper* h);

/* algo: "rql", "rql1", or "flat-q". out_csv: "step,mean_return\n" lines;
 * out_final: last curve point; out_qsize: learned table size. */
RmdpStatus rmdp_train(const RmdpModel* m, const char* algo, const RmdpHyper* h, char** out_csv,
                      double* out_final, long* out_qsize);

/* ---- transforms ---- */

RmdpStatus rmdp_add_exit_lane(const RmdpModel* m, double lambda, RmdpModel** out);

/* Product of a flat MDP with the PDA given in .pda text format.
 * success_states: comma-separated node names of the single component. */
RmdpStatus rmdp_pda_product(const RmdpModel* mdp, const char* pda_text,
                            const char* success_states, double reward_success,
                            double reward_reject, double reward_step, double corruption,
                            RmdpModel** out);

/* ---- environments ----
 * JSON spec {"name","start_comp","start_entry","hyper"{...},"notes"} with the
 * shipped hyperparameters for "cloud", "spelunking", "palindrome". */
RmdpStatus rmdp_env_spec(const char* name, char** out_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RMDP_C_H */
