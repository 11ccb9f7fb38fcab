// Copyright 2026 The fsdbench Authors. All Rights Reserved.
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
#ifndef FSD_FSD_H_
#define FSD_FSD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FSD_BUILDING_LIBRARY)
#    define FSD_API __declspec(dllexport)
#  else
#    define FSD_API __declspec(dllimport)
#  endif
#else
#  define FSD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

// Every call returns a status. On failure a description is available from
// fsd_last_error() until the next failing call on the same thread.
typedef enum fsd_status {
  FSD_OK = 0,
  FSD_ERR_USAGE = 1,       // invalid argument, flag or configuration
  FSD_ERR_IO = 2,          // unreadable or unwritable file
  FSD_ERR_FORMAT = 3,      // malformed dataset, checkpoint, CSV or JSON
  FSD_ERR_NUMERICAL = 4,   // non-finite values, degenerate features, divergence
  FSD_ERR_DEPENDENCY = 5,  // a required upstream stage has not run
  FSD_ERR_SHAPE = 6,       // inconsistent tensor shapes
  FSD_ERR_INTERNAL = 7
} fsd_status;

FSD_API const char* fsd_version(void);
FSD_API const char* fsd_last_error(void);
FSD_API const char* fsd_status_name(fsd_status status);
// Process exit code for a status: 0 success, 1 usage or I/O, 2 numerical
// failure, 3 missing dependency.
FSD_API int fsd_exit_code(fsd_status status);

// ---------------------------------------------------------------------------
// Experiments

typedef struct fsd_experiment fsd_experiment;

// Loads a JSON experiment config. `overrides` holds `n_overrides`
// "dotted.key=value" strings applied before validation (may be NULL when 0).
FSD_API fsd_status fsd_experiment_open(const char* config_path, const char* const* overrides,
                                       size_t n_overrides, fsd_experiment** out);
FSD_API void fsd_experiment_close(fsd_experiment* exp);

// Writes the 16-hex-digit config hash plus a terminator; `size` >= 17.
FSD_API fsd_status fsd_experiment_config_hash(const fsd_experiment* exp, char* buf, size_t size);
// Copies up to `capacity` seeds of the configured list; `*count` gets the
// full length.
FSD_API fsd_status fsd_experiment_seeds(const fsd_experiment* exp, uint64_t* seeds, size_t capacity,
                                        size_t* count);
// Same for the configured loss kinds, as static strings ("noDS", "ILG", ...).
FSD_API fsd_status fsd_experiment_kinds(const fsd_experiment* exp, const char** kinds, size_t capacity,
                                        size_t* count);

// One student run. kind: noDS, VKD, I, L, G, IL or ILG; batch_size 0 selects
// the configured batch size.
typedef struct fsd_run {
  const char* kind;
  uint64_t seed;
  size_t batch_size;
} fsd_run;

FSD_API fsd_status fsd_gen_data(fsd_experiment* exp);
// `train_accuracy` may be NULL.
FSD_API fsd_status fsd_train_teacher(fsd_experiment* exp, double* train_accuracy);
FSD_API fsd_status fsd_post_train_memory(fsd_experiment* exp);
FSD_API fsd_status fsd_distill(fsd_experiment* exp, const fsd_run* run);
FSD_API fsd_status fsd_analyze_rd(fsd_experiment* exp, const fsd_run* run);
FSD_API fsd_status fsd_analyze_restoration(fsd_experiment* exp, const fsd_run* run);
FSD_API fsd_status fsd_heatmap(fsd_experiment* exp, const fsd_run* run);
FSD_API fsd_status fsd_rank(fsd_experiment* exp, uint64_t seed);
FSD_API fsd_status fsd_report(fsd_experiment* exp);
FSD_API fsd_status fsd_run_all(fsd_experiment* exp);

// Dataset generation without an experiment. task: parity, marker or pair.
FSD_API fsd_status fsd_generate_dataset(const char* task, size_t size, size_t vocab, size_t seq_len,
                                        size_t marker_len, uint64_t seed, const char* out_dir);

// ---------------------------------------------------------------------------
// Similarity

// Linear CKA of x [n x fx] and y [n x fy], row-major.
FSD_API fsd_status fsd_cka(const double* x, size_t n, size_t fx, const double* y, size_t fy, double* out);

// ---------------------------------------------------------------------------
// Checkpoints

typedef struct fsd_checkpoint fsd_checkpoint;

FSD_API fsd_status fsd_checkpoint_load(const char* path, fsd_checkpoint** out);
FSD_API fsd_status fsd_checkpoint_save(const fsd_checkpoint* ckpt, const char* path);
FSD_API void fsd_checkpoint_free(fsd_checkpoint* ckpt);

// Metadata strings stay valid until fsd_checkpoint_free. Any out pointer may
// be NULL.
FSD_API fsd_status fsd_checkpoint_meta(const fsd_checkpoint* ckpt, const char** role, const char** kind,
                                       uint64_t* seed, uint64_t* step, const char** config_hash);
FSD_API fsd_status fsd_checkpoint_array_count(const fsd_checkpoint* ckpt, size_t* count);
// Name, shape and values of array `index`; pointers stay valid until
// fsd_checkpoint_free.
FSD_API fsd_status fsd_checkpoint_array(const fsd_checkpoint* ckpt, size_t index, const char** name,
                                        const size_t** shape, size_t* rank, const double** values,
                                        size_t* size);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // FSD_FSD_H_
