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
#include "fsd/fsd.h"

#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsd/checkpoint.hpp"
#include "fsd/config.hpp"
#include "fsd/errors.hpp"
#include "fsd/pipeline.hpp"
#include "fsd/similarity.hpp"

struct fsd_experiment {
  std::optional<fsd::pipe::Experiment> exp;
};

struct fsd_checkpoint {
  fsd::ckpt::Checkpoint data;
  std::vector<std::string> names;
  std::vector<const fsd::num::Tensor*> tensors;
};

namespace {

thread_local std::string g_last_error;

fsd_status fail(fsd_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs `fn`, translating library exceptions into status codes.
template <typename Fn>
fsd_status guarded(Fn&& fn) {
  try {
    fn();
    return FSD_OK;
  } catch (const fsd::UsageError& e) {
    return fail(FSD_ERR_USAGE, e.what());
  } catch (const fsd::IoError& e) {
    return fail(FSD_ERR_IO, e.what());
  } catch (const fsd::FormatError& e) {
    return fail(FSD_ERR_FORMAT, e.what());
  } catch (const fsd::DependencyError& e) {
    return fail(FSD_ERR_DEPENDENCY, e.what());
  } catch (const fsd::NonFiniteError& e) {
    return fail(FSD_ERR_NUMERICAL, e.what());
  } catch (const fsd::DomainError& e) {
    return fail(FSD_ERR_NUMERICAL, e.what());
  } catch (const fsd::DegenerateFeatures& e) {
    return fail(FSD_ERR_NUMERICAL, e.what());
  } catch (const fsd::DegenerateBatch& e) {
    return fail(FSD_ERR_NUMERICAL, e.what());
  } catch (const fsd::ShapeError& e) {
    return fail(FSD_ERR_SHAPE, e.what());
  } catch (const fsd::GraphError& e) {
    return fail(FSD_ERR_INTERNAL, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(FSD_ERR_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FSD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FSD_ERR_INTERNAL, e.what());
  }
}

fsd::pipe::RunSpec to_spec(const fsd_run* run) {
  if (run == nullptr || run->kind == nullptr) throw fsd::UsageError("run: kind is required");
  return {fsd::loss::parse_loss_kind(run->kind), run->seed, run->batch_size};
}

fsd::pipe::Experiment& checked(fsd_experiment* exp) {
  if (exp == nullptr || !exp->exp) throw fsd::UsageError("null experiment handle");
  return *exp->exp;
}

const fsd::pipe::Experiment& checked(const fsd_experiment* exp) {
  if (exp == nullptr || !exp->exp) throw fsd::UsageError("null experiment handle");
  return *exp->exp;
}

const fsd_checkpoint& checked(const fsd_checkpoint* c) {
  if (c == nullptr) throw fsd::UsageError("null checkpoint handle");
  return *c;
}

}  // namespace

extern "C" {

const char* fsd_version(void) { return fsd::pipe::version(); }

const char* fsd_last_error(void) { return g_last_error.c_str(); }

const char* fsd_status_name(fsd_status status) {
  switch (status) {
    case FSD_OK: return "ok";
    case FSD_ERR_USAGE: return "usage error";
    case FSD_ERR_IO: return "I/O error";
    case FSD_ERR_FORMAT: return "format error";
    case FSD_ERR_NUMERICAL: return "numerical failure";
    case FSD_ERR_DEPENDENCY: return "missing dependency";
    case FSD_ERR_SHAPE: return "shape error";
    case FSD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int fsd_exit_code(fsd_status status) {
  switch (status) {
    case FSD_OK: return 0;
    case FSD_ERR_NUMERICAL: return 2;
    case FSD_ERR_DEPENDENCY: return 3;
    default: return 1;
  }
}

fsd_status fsd_experiment_open(const char* config_path, const char* const* overrides, size_t n_overrides,
                               fsd_experiment** out) {
  return guarded([&] {
    if (config_path == nullptr || out == nullptr) throw fsd::UsageError("experiment_open: null argument");
    if (n_overrides > 0 && overrides == nullptr) throw fsd::UsageError("experiment_open: null override list");
    *out = nullptr;
    std::vector<std::string> ov(overrides, overrides + n_overrides);
    auto handle = std::make_unique<fsd_experiment>();
    handle->exp.emplace(fsd::cfg::load(config_path, ov));
    *out = handle.release();
  });
}

void fsd_experiment_close(fsd_experiment* exp) { delete exp; }

fsd_status fsd_experiment_config_hash(const fsd_experiment* exp, char* buf, size_t size) {
  return guarded([&] {
    const std::string h = checked(exp).config().hash();
    if (buf == nullptr || size < h.size() + 1) throw fsd::UsageError("config_hash: buffer needs 17 bytes");
    h.copy(buf, h.size());
    buf[h.size()] = '\0';
  });
}

fsd_status fsd_experiment_seeds(const fsd_experiment* exp, uint64_t* seeds, size_t capacity, size_t* count) {
  return guarded([&] {
    const auto& s = checked(exp).config().seeds;
    if (count) *count = s.size();
    for (size_t i = 0; i < s.size() && i < capacity && seeds; ++i) seeds[i] = s[i];
  });
}

fsd_status fsd_experiment_kinds(const fsd_experiment* exp, const char** kinds, size_t capacity, size_t* count) {
  return guarded([&] {
    const auto& k = checked(exp).config().kinds;
    if (count) *count = k.size();
    // to_string returns views of string literals, so data() is terminated.
    for (size_t i = 0; i < k.size() && i < capacity && kinds; ++i) kinds[i] = fsd::loss::to_string(k[i]).data();
  });
}

fsd_status fsd_gen_data(fsd_experiment* exp) {
  return guarded([&] { checked(exp).gen_data(); });
}

fsd_status fsd_train_teacher(fsd_experiment* exp, double* train_accuracy) {
  return guarded([&] {
    const double acc = checked(exp).train_teacher();
    if (train_accuracy) *train_accuracy = acc;
  });
}

fsd_status fsd_post_train_memory(fsd_experiment* exp) {
  return guarded([&] { checked(exp).post_train_memory(); });
}

fsd_status fsd_distill(fsd_experiment* exp, const fsd_run* run) {
  return guarded([&] { checked(exp).distill(to_spec(run)); });
}

fsd_status fsd_analyze_rd(fsd_experiment* exp, const fsd_run* run) {
  return guarded([&] { checked(exp).analyze_rd(to_spec(run)); });
}

fsd_status fsd_analyze_restoration(fsd_experiment* exp, const fsd_run* run) {
  return guarded([&] { checked(exp).analyze_restoration(to_spec(run)); });
}

fsd_status fsd_heatmap(fsd_experiment* exp, const fsd_run* run) {
  return guarded([&] { checked(exp).heatmap(to_spec(run)); });
}

fsd_status fsd_rank(fsd_experiment* exp, uint64_t seed) {
  return guarded([&] { checked(exp).rank(seed); });
}

fsd_status fsd_report(fsd_experiment* exp) {
  return guarded([&] { checked(exp).report(); });
}

fsd_status fsd_run_all(fsd_experiment* exp) {
  return guarded([&] { checked(exp).run_all(); });
}

fsd_status fsd_generate_dataset(const char* task, size_t size, size_t vocab, size_t seq_len, size_t marker_len,
                                uint64_t seed, const char* out_dir) {
  return guarded([&] {
    if (task == nullptr || out_dir == nullptr) throw fsd::UsageError("generate_dataset: null argument");
    fsd::data::GenSpec spec;
    spec.task = fsd::data::parse_task(task);
    spec.size = size;
    spec.vocab = vocab;
    spec.seq_len = seq_len;
    spec.marker_len = marker_len;
    spec.seed = seed;
    fsd::data::gen_data(spec, out_dir);
  });
}

fsd_status fsd_cka(const double* x, size_t n, size_t fx, const double* y, size_t fy, double* out) {
  return guarded([&] {
    if (x == nullptr || y == nullptr || out == nullptr) throw fsd::UsageError("cka: null argument");
    auto a = fsd::num::Tensor::from({n, fx}, std::vector<double>(x, x + n * fx));
    auto b = fsd::num::Tensor::from({n, fy}, std::vector<double>(y, y + n * fy));
    *out = fsd::sim::cka_value(a, b);
  });
}

fsd_status fsd_checkpoint_load(const char* path, fsd_checkpoint** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) throw fsd::UsageError("checkpoint_load: null argument");
    *out = nullptr;
    auto h = std::make_unique<fsd_checkpoint>();
    h->data = fsd::ckpt::load(path);
    if (h->data.config) {
      for (const auto& [name, t] : std::as_const(h->data.params).named()) {
        h->names.push_back(name);
        h->tensors.push_back(t);
      }
    }
    if (h->data.memory) {
      h->names.emplace_back("memory.centroids");
      h->tensors.push_back(&h->data.memory->centroids);
    }
    *out = h.release();
  });
}

fsd_status fsd_checkpoint_save(const fsd_checkpoint* ckpt, const char* path) {
  return guarded([&] {
    if (path == nullptr) throw fsd::UsageError("checkpoint_save: null path");
    fsd::ckpt::save(path, checked(ckpt).data);
  });
}

void fsd_checkpoint_free(fsd_checkpoint* ckpt) { delete ckpt; }

fsd_status fsd_checkpoint_meta(const fsd_checkpoint* ckpt, const char** role, const char** kind, uint64_t* seed,
                               uint64_t* step, const char** config_hash) {
  return guarded([&] {
    const auto& m = checked(ckpt).data.meta;
    if (role) *role = m.role.c_str();
    if (kind) *kind = m.kind.c_str();
    if (seed) *seed = m.seed;
    if (step) *step = m.step;
    if (config_hash) *config_hash = m.config_hash.c_str();
  });
}

fsd_status fsd_checkpoint_array_count(const fsd_checkpoint* ckpt, size_t* count) {
  return guarded([&] {
    if (count == nullptr) throw fsd::UsageError("checkpoint_array_count: null argument");
    *count = checked(ckpt).tensors.size();
  });
}

fsd_status fsd_checkpoint_array(const fsd_checkpoint* ckpt, size_t index, const char** name, const size_t** shape,
                                size_t* rank, const double** values, size_t* size) {
  return guarded([&] {
    const auto& c = checked(ckpt);
    if (index >= c.tensors.size()) throw fsd::UsageError("checkpoint_array: index out of range");
    const auto* t = c.tensors[index];
    if (name) *name = c.names[index].c_str();
    if (shape) *shape = t->shape().data();
    if (rank) *rank = t->rank();
    if (values) *values = t->data().data();
    if (size) *size = t->size();
  });
}

}  // extern "C"
