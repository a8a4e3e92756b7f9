#ifndef DELAYRL_H
#define DELAYRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrlStatus {
  DRL_STATUS_OK = 0,
  DRL_STATUS_NULL_POINTER = 1,
  DRL_STATUS_INVALID_PARAMETER = 2,
  DRL_STATUS_MISALIGNED = 3,
  DRL_STATUS_WIDTH_MISMATCH = 4,
  DRL_STATUS_INSUFFICIENT_BUFFER = 5,
  DRL_STATUS_FORMAT = 6,
  DRL_STATUS_TOO_SHORT = 7,
  DRL_STATUS_UNSUPPORTED = 8,
  DRL_STATUS_IO = 9,
  /**
   * The caller's output array is too small.
   */
  DRL_STATUS_BUFFER_TOO_SMALL = 10,
  DRL_STATUS_PANIC = 11,
} DrlStatus;

/**
 * Opaque agent.
 */
typedef struct DrlAgent DrlAgent;

/**
 * Opaque episodic environment.
 */
typedef struct DrlEnv DrlEnv;

/**
 * Opaque discrete augmented model.
 */
typedef struct DrlModel DrlModel;

/**
 * Opaque base-step simulator.
 */
typedef struct DrlSimulator DrlSimulator;

/**
 * Plant constants, delays (s) and actuator limit.
 */
typedef struct DrlPlantParams {
  double t_p;
  double t_q;
  double k_z;
  double tau_i;
  double tau_o;
  double u_max;
} DrlPlantParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns the full message length
 * excluding the terminator. Passing a null `buf` only queries the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t drl_last_error_message(char *buf, size_t len);

/**
 * Static, NUL-terminated crate version.
 */
const char *drl_version(void);

struct DrlPlantParams drl_plant_params_nominal(void);

/**
 * Step reward for position `z`, velocity `z_dot` and reference `z_ref`.
 */
double drl_reward(double z, double z_dot, double z_ref);

/**
 * Zero-order-hold transition over `t` seconds: `phi_out` receives the 3×3
 * state matrix, `gamma_out` the 3-vector input matrix.
 *
 * # Safety
 * `params` must point to a valid struct; `phi_out` and `gamma_out` must be
 * valid for 9 and 3 doubles.
 */
enum DrlStatus drl_transition(const struct DrlPlantParams *params,
                              double t,
                              double *phi_out,
                              double *gamma_out);

/**
 * Builds the augmented model of `params` sampled at `h`.
 *
 * # Safety
 * `params` must be valid; `out` must be valid for one pointer write.
 */
enum DrlStatus drl_model_build(const struct DrlPlantParams *params,
                               double h,
                               struct DrlModel **out);

/**
 * State dimension `n` and number of output rows `p` of `C_e`.
 *
 * # Safety
 * `model` must come from `drl_model_build`; outputs must be valid.
 */
enum DrlStatus drl_model_dims(const struct DrlModel *model, size_t *n, size_t *p);

/**
 * Copies `A_e` (n×n), `B_e` (n) and `C_e` (p×n) row-major. Any output
 * pointer may be null to skip it.
 *
 * # Safety
 * Non-null outputs must be valid for their stated lengths.
 */
enum DrlStatus drl_model_matrices(const struct DrlModel *model,
                                  double *a_out,
                                  size_t a_len,
                                  double *b_out,
                                  size_t b_len,
                                  double *c_out,
                                  size_t c_len);

/**
 * # Safety
 * `model` must be null or come from `drl_model_build`, and not be used afterwards.
 */
void drl_model_free(struct DrlModel *model);

/**
 * Simulator at rest with zero-filled delay lines. `base_step <= 0` selects
 * the default 0.5 ms.
 *
 * # Safety
 * `params` must be valid; `out` must be valid for one pointer write.
 */
enum DrlStatus drl_simulator_new(const struct DrlPlantParams *params,
                                 double base_step,
                                 struct DrlSimulator **out);

/**
 * Holds `input` for `hold` seconds and writes the delayed measurement.
 *
 * # Safety
 * `sim` must be valid; `measured_out` must be valid for 3 doubles.
 */
enum DrlStatus drl_simulator_step(struct DrlSimulator *sim,
                                  double input,
                                  double hold,
                                  double *measured_out);

/**
 * True plant state and clock.
 *
 * # Safety
 * `sim` must be valid; `state_out` valid for 3 doubles; `clock` valid or null.
 */
enum DrlStatus drl_simulator_state(const struct DrlSimulator *sim,
                                   double *state_out,
                                   double *clock);

/**
 * # Safety
 * `sim` must be null or come from `drl_simulator_new`, and not be used afterwards.
 */
void drl_simulator_free(struct DrlSimulator *sim);

/**
 * Environment for `case` (1-4) on `plant` (0 training, 1 delay-free,
 * 2 delayed) with default settings.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum DrlStatus drl_env_new(uint32_t case_, uint32_t plant, uint64_t seed, struct DrlEnv **out);

/**
 * # Safety
 * `env` must be valid.
 */
enum DrlStatus drl_env_obs_width(const struct DrlEnv *env, size_t *width);

/**
 * # Safety
 * `env` must be valid; `obs_out` valid for `obs_len` doubles.
 */
enum DrlStatus drl_env_reset(struct DrlEnv *env, double *obs_out, size_t obs_len);

/**
 * # Safety
 * `env` must be valid; `obs_out` valid for `obs_len` doubles; `reward_out`
 * and `done_out` valid.
 */
enum DrlStatus drl_env_step(struct DrlEnv *env,
                            double action,
                            double *obs_out,
                            size_t obs_len,
                            double *reward_out,
                            bool *done_out);

/**
 * # Safety
 * `env` must be null or come from `drl_env_new`, and not be used afterwards.
 */
void drl_env_free(struct DrlEnv *env);

/**
 * Freshly initialised agent with default hyperparameters.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum DrlStatus drl_agent_new(size_t obs_width, double u_max, uint64_t seed, struct DrlAgent **out);

/**
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` valid.
 */
enum DrlStatus drl_agent_load(const char *path, struct DrlAgent **out);

/**
 * # Safety
 * `agent` must be valid; `path` a NUL-terminated UTF-8 string.
 */
enum DrlStatus drl_agent_save(const struct DrlAgent *agent, const char *path);

/**
 * # Safety
 * `agent` and `width` must be valid.
 */
enum DrlStatus drl_agent_obs_width(const struct DrlAgent *agent, size_t *width);

/**
 * Deterministic action for `obs`.
 *
 * # Safety
 * `agent` must be valid; `obs` valid for `obs_len` doubles; `action` valid.
 */
enum DrlStatus drl_agent_act(const struct DrlAgent *agent,
                             const double *obs,
                             size_t obs_len,
                             double *action);

/**
 * # Safety
 * `agent` must be null or come from this library, and not be used afterwards.
 */
void drl_agent_free(struct DrlAgent *agent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELAYRL_H */
