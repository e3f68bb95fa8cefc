// Copyright 2026 The copyptr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the copyptr library.
 *
 * Objects are opaque handles released with their *_free function. Every
 * call returns a cp_status; on failure cp_last_error() describes the most
 * recent error of the calling thread. Strings returned through char** out
 * parameters are heap-allocated and must be released with cp_string_free.
 * Lists of names are comma-separated. */

#ifndef COPYPTR_COPYPTR_H_
#define COPYPTR_COPYPTR_H_

#include <stdint.h>

#if defined(_WIN32)
#define CP_API __declspec(dllexport)
#else
#define CP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cp_status {
  CP_OK = 0,
  CP_EMPTY_INPUT = 1,
  CP_UNBALANCED_BRACKETS = 2,
  CP_ALTERNATION_VIOLATION = 3,
  CP_TOKEN_OUTSIDE_TREE = 4,
  CP_INVALID_LABEL = 5,
  CP_EMPTY_CORPUS = 6,
  CP_FILE_NOT_FOUND = 7,
  CP_MALFORMED_RECORD = 8,
  CP_PARSE_ERROR = 9,
  CP_UNKNOWN_DOMAIN = 10,
  CP_INVALID_SPIS = 11,
  CP_TOKEN_NOT_IN_SOURCE = 12,
  CP_SHAPE_MISMATCH = 13,
  CP_NUMERICAL_OVERFLOW = 14,
  CP_NON_SCALAR_LOSS = 15,
  CP_GRAPH_REUSE = 16,
  CP_TARGET_SOURCE_MISMATCH = 17,
  CP_INVALID_PREVIOUS_SYMBOL = 18,
  CP_INVALID_CONFIG = 19,
  CP_DIVERGED_LOSS = 20,
  CP_BATCH_COUNT_MISMATCH = 21,
  CP_DOMAIN_MISMATCH = 22,
  CP_UNKNOWN_REGIME = 23,
  CP_CHECKPOINT_MISMATCH = 24,
  CP_IO = 25,
  CP_INVALID_ARGUMENT = 100, /* null handle or pointer */
  CP_INTERNAL = 101
} cp_status;

/* Broad failure classes, used for process exit codes. */
typedef enum cp_error_class {
  CP_CLASS_NONE = 0,
  CP_CLASS_USAGE = 1,
  CP_CLASS_DATA = 2,
  CP_CLASS_TRAINING = 3
} cp_error_class;

typedef struct cp_config cp_config;
typedef struct cp_data cp_data;
typedef struct cp_run cp_run;
typedef struct cp_model cp_model;

CP_API const char* cp_version(void);
CP_API const char* cp_status_name(cp_status status);
CP_API cp_error_class cp_status_class(cp_status status);
CP_API const char* cp_last_error(void);
CP_API void cp_string_free(char* s);

/* Tree utilities. */
CP_API cp_status cp_canonicalize(const char* serialized_parse, char** out);

/* Corpus tooling. stats_json holds one row per domain. */
CP_API cp_status cp_corpus_stats(const char* corpus_dir, const char* domains,
                                 char** stats_json);
/* Writes <out_dir>/<domain>_train.tsv and _valid.tsv SPIS samples (the
 * ones an experiment with data_seed = seed draws) and returns the coverage
 * audit of both. */
CP_API cp_status cp_sample(const char* corpus_dir, const char* domain, int spis,
                           int valid_spis, uint64_t seed, const char* out_dir,
                           char** audit_json);
/* Synthetic toy corpus; empty domains means all of them. */
CP_API cp_status cp_synth_write(const char* out_dir, const char* domains,
                                int train, int valid, int test, uint64_t seed);
CP_API cp_status cp_synth_domains(char** domains);

/* Experiment configuration. */
CP_API cp_status cp_config_new(const char* preset, cp_config** out);
CP_API void cp_config_free(cp_config* config);
CP_API cp_status cp_config_set(cp_config* config, const char* key, const char* value);
CP_API cp_status cp_config_apply_file(cp_config* config, const char* path);
CP_API cp_status cp_config_text(const cp_config* config, char** text);
CP_API cp_status cp_preset_names(char** names);

/* Source/target data for experiments. */
CP_API cp_status cp_data_load(const char* corpus_dir, const char* sources,
                              const char* targets, const cp_config* config,
                              cp_data** out);
CP_API void cp_data_free(cp_data* data);
CP_API cp_status cp_data_summary(const cp_data* data, char** summary_json);

/* Training runs. regime is FT_ONLY, ST_FT, JT, REPTILE_FT or FOMAML_FT. */
CP_API cp_status cp_run_regime(const cp_data* data, const char* regime,
                               const cp_config* config, cp_run** out);
/* Fine-tunes a saved model on the target sample of `data`. */
CP_API cp_status cp_run_finetune(const cp_data* data, const cp_model* init,
                                 const cp_config* config, cp_run** out);
CP_API void cp_run_free(cp_run* run);
CP_API cp_status cp_run_report(const cp_run* run, char** report_json);
CP_API cp_status cp_run_test_exact_match(const cp_run* run, double* em);
/* Writes model.cfg, params.bin and vocab.txt into dir. */
CP_API cp_status cp_run_save_model(const cp_run* run, const char* dir);

/* Saved models. */
CP_API cp_status cp_model_load(const char* dir, cp_model** out);
CP_API void cp_model_free(cp_model* model);
CP_API cp_status cp_model_evaluate(const cp_model* model, const char* corpus_path,
                                   int beam_width, int max_len, char** report_json,
                                   double* exact_match);
CP_API cp_status cp_model_parse(const cp_model* model, const char* utterance,
                                int beam_width, char** parse);

/* Accuracy-vs-SPIS curve; spis_values ascending, seeds comma-separated. */
CP_API cp_status cp_curve(cp_data* data, const char* regime, const cp_config* config,
                          const char* spis_values, const char* seeds,
                          char** curve_json, char** series);

#ifdef __cplusplus
}
#endif

#endif /* COPYPTR_COPYPTR_H_ */
