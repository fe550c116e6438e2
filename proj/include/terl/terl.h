/*
 * Copyright (C) 2026 The terl-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
*/

#ifndef TERL_TERL_H
#define TERL_TERL_H

/* C interface to the encirclement lab. All objects are opaque handles;
 * every fallible call returns a terl_status and leaves a message for
 * terl_last_error() on failure. Handles are not thread-safe. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TERL_API __declspec(dllexport)
#else
#define TERL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum terl_status {
  TERL_OK = 0,
  TERL_ERR_INVALID_ARGUMENT = 1,
  TERL_ERR_CONFIG = 2,
  TERL_ERR_IO = 3,
  TERL_ERR_CHECKPOINT = 4,
  TERL_ERR_INTERNAL = 5
} terl_status;

typedef struct terl_config terl_config;
typedef struct terl_policy terl_policy;
typedef struct terl_world terl_world;

typedef enum terl_outcome {
  TERL_OUTCOME_NONE = -1,
  TERL_OUTCOME_ALL_ENCIRCLED = 0,
  TERL_OUTCOME_PURSUERS_DEPLETED = 1,
  TERL_OUTCOME_TIMEOUT = 2
} terl_outcome;

typedef struct terl_robot {
  int id;
  int role;   /* 0 pursuer, 1 evader */
  int status; /* 0 active, 1 inactive, 2 encircled */
  double x;
  double y;
  double heading;
  double speed;
} terl_robot;

typedef struct terl_metrics {
  int trials;
  double success_rate;
  double travel_time_mean_s;
  double travel_time_std_s;
  double collision_ratio;
} terl_metrics;

typedef struct terl_trial {
  uint64_t seed;
  int outcome; /* terl_outcome */
  int64_t steps;
  double travel_time_s;
  int collided;
  int pursuers;
} terl_trial;

typedef struct terl_eval_options {
  const char* scenario;        /* required */
  const char* controller;      /* "policy" (default), "random" or "constant" */
  int episodes;                /* 0 keeps the scenario's trial count */
  uint64_t base_seed;          /* trial i uses base_seed + i */
  const char* results_path;    /* optional per-trial export */
  const char* results_format;  /* "csv" (default) or "jsonl" */
  const char* trajectory_path; /* optional per-step dump */
} terl_eval_options;

typedef struct terl_train_summary {
  int64_t steps;
  int64_t episodes;
  int64_t gradient_steps;
} terl_train_summary;

TERL_API const char* terl_version(void);
/* Message of the last failure on the calling thread. */
TERL_API const char* terl_last_error(void);
TERL_API const char* terl_status_string(terl_status status);

/* Configuration */
TERL_API terl_status terl_config_default(terl_config** out);
TERL_API terl_status terl_config_load(const char* path, terl_config** out);
TERL_API terl_status terl_config_parse(const char* json_text, terl_config** out);
TERL_API void terl_config_destroy(terl_config* cfg);
TERL_API terl_status terl_config_set_variant(terl_config* cfg, const char* variant);
TERL_API terl_status terl_config_set_train_seed(terl_config* cfg, uint64_t seed);
/* Writes the effective configuration as JSON, truncated like snprintf when
 * cap is too small. *needed receives the size
 * including the terminating NUL; buf may be NULL to query it. */
TERL_API terl_status terl_config_dump(const terl_config* cfg, char* buf, size_t cap, size_t* needed);

/* Policies */
TERL_API terl_status terl_policy_create(const terl_config* cfg, uint64_t seed, terl_policy** out);
/* expected_variant may be NULL; otherwise a mismatching checkpoint fails
 * with TERL_ERR_CHECKPOINT. */
TERL_API terl_status terl_policy_load(const char* path, const char* expected_variant, terl_policy** out);
TERL_API terl_status terl_policy_save(const terl_policy* policy, const char* path);
TERL_API void terl_policy_destroy(terl_policy* policy);
TERL_API const char* terl_policy_variant(const terl_policy* policy);
TERL_API int terl_policy_num_actions(const terl_policy* policy);

/* Worlds */
/* scenario may be NULL to use the configured robot counts. */
TERL_API terl_status terl_world_create(const terl_config* cfg, const char* scenario, uint64_t seed,
                                       terl_world** out);
TERL_API void terl_world_destroy(terl_world* world);
TERL_API int64_t terl_world_time(const terl_world* world);
TERL_API size_t terl_world_robot_count(const terl_world* world);
TERL_API terl_status terl_world_robot(const terl_world* world, size_t index, terl_robot* out);
/* Number of active pursuers, i.e. the length of the next action vector. */
TERL_API size_t terl_world_active_pursuers(const terl_world* world);
/* Greedy actions of the policy for every active pursuer, in id order. */
TERL_API terl_status terl_world_policy_actions(const terl_world* world, const terl_policy* policy,
                                               int* actions, size_t n);
/* Advances one timestep; evaders steer themselves. */
TERL_API terl_status terl_world_step(terl_world* world, const int* actions, size_t n);
TERL_API int terl_world_outcome(const terl_world* world, int64_t cap);

/* Harness */
/* policy may be NULL when the controller is "random" or "constant". */
TERL_API terl_status terl_evaluate(const terl_config* cfg, const terl_policy* policy,
                                   const terl_eval_options* options, terl_metrics* out);
TERL_API terl_status terl_train(const terl_config* cfg, const char* out_dir, terl_train_summary* out);
/* One episode with optional per-step dumps (any path may be NULL). */
TERL_API terl_status terl_replay(const terl_config* cfg, const terl_policy* policy, const char* scenario,
                                 uint64_t seed, const char* trajectory_path, const char* observations_path,
                                 const char* rewards_path, terl_trial* out);

#ifdef __cplusplus
}
#endif

#endif
