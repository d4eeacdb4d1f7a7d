#include "cutoff/cutoff.h"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "cutoff/error.hpp"
#include "cutoff/evolution.hpp"
#include "cutoff/experiment.hpp"
#include "cutoff/hitting.hpp"
#include "cutoff/model.hpp"

struct cutoff_model {
  cutoff::ChainModel model;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_summary;

cutoff_status set_error(cutoff_status s, const std::string& what) {
  g_last_error = what;
  return s;
}

template <class F>
cutoff_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const cutoff::Error& e) {
    return set_error(cutoff_status(int(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CUTOFF_ERR_CAPACITY, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CUTOFF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(CUTOFF_ERR_INTERNAL, "unknown failure");
  }
}

#define CUTOFF_REQUIRE_PTR(p) \
  if ((p) == nullptr) return set_error(CUTOFF_ERR_NULL, #p " is NULL")

cutoff::StatePredicate target_set(const size_t* targets, size_t count) {
  std::unordered_set<size_t> set(targets, targets + count);
  return [set = std::move(set)](cutoff::StateIndex x) { return set.count(x) != 0; };
}

}  // namespace

extern "C" {

const char* cutoff_last_error(void) { return g_last_error.c_str(); }

const char* cutoff_status_name(cutoff_status status) {
  switch (status) {
    case CUTOFF_OK: return "ok";
    case CUTOFF_ERR_BUFFER: return "buffer";
    case CUTOFF_ERR_NULL: return "null";
    case CUTOFF_ERR_INTERNAL: return "internal";
    default:
      if (status >= CUTOFF_ERR_PARAMETER && status <= CUTOFF_ERR_IO)
        return cutoff::error_code_name(cutoff::ErrorCode(int(status)));
      return "unknown";
  }
}

int cutoff_exit_code(cutoff_status status) {
  if (status == CUTOFF_OK) return 0;
  if (status >= CUTOFF_ERR_PARAMETER && status <= CUTOFF_ERR_IO)
    return cutoff::exit_code_for(cutoff::ErrorCode(int(status)));
  return 1;
}

cutoff_status cutoff_model_create(const char* family, size_t n, const char* const* param_keys,
                                  const double* param_values, size_t param_count, cutoff_model** out) {
  CUTOFF_REQUIRE_PTR(family);
  CUTOFF_REQUIRE_PTR(out);
  if (param_count > 0 && (param_keys == nullptr || param_values == nullptr))
    return set_error(CUTOFF_ERR_NULL, "parameter arrays are NULL");
  *out = nullptr;
  return guarded([&] {
    cutoff::ModelSpec spec;
    spec.family = cutoff::parse_family(family);
    spec.n = n;
    for (size_t i = 0; i < param_count; ++i) {
      if (param_keys[i] == nullptr) return set_error(CUTOFF_ERR_NULL, "parameter key is NULL");
      spec.params[param_keys[i]] = param_values[i];
    }
    *out = new cutoff_model{cutoff::build_model(spec)};
    return CUTOFF_OK;
  });
}

void cutoff_model_destroy(cutoff_model* model) { delete model; }

cutoff_status cutoff_model_state_count(const cutoff_model* model, size_t* out) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(out);
  return guarded([&] {
    *out = model->model.state_count();
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_model_size(const cutoff_model* model, size_t* out) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(out);
  *out = model->model.n();
  return CUTOFF_OK;
}

cutoff_status cutoff_model_default_start(const cutoff_model* model, size_t* out) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(out);
  return guarded([&] {
    *out = cutoff::default_start(model->model);
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_model_row(const cutoff_model* model, size_t state, size_t* targets, double* probs,
                               size_t capacity, size_t* len) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(len);
  return guarded([&] {
    const auto row = cutoff::transition_row(model->model, state);
    *len = row.size();
    if (capacity < row.size()) return set_error(CUTOFF_ERR_BUFFER, "row has " + std::to_string(row.size()) + " entries");
    if (row.size() > 0 && (targets == nullptr || probs == nullptr)) return set_error(CUTOFF_ERR_NULL, "row buffers are NULL");
    for (size_t k = 0; k < row.size(); ++k) {
      targets[k] = row[k].to;
      probs[k] = row[k].prob;
    }
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_model_stationary(const cutoff_model* model, double* out, size_t len) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(out);
  return guarded([&] {
    const cutoff::Distribution pi = cutoff::stationary(model->model);
    if (len != pi.size()) return set_error(CUTOFF_ERR_SHAPE, "stationary buffer length mismatch");
    std::copy(pi.values.begin(), pi.values.end(), out);
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_model_lump(const cutoff_model* model, cutoff_model** coarse, size_t* projection, size_t len) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(coarse);
  CUTOFF_REQUIRE_PTR(projection);
  *coarse = nullptr;
  return guarded([&] {
    auto [c, lm] = cutoff::lump(model->model);
    if (len != lm.projection.size()) return set_error(CUTOFF_ERR_SHAPE, "projection buffer length mismatch");
    std::copy(lm.projection.begin(), lm.projection.end(), projection);
    *coarse = new cutoff_model{std::move(c)};
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_evolve(const cutoff_model* model, const double* in, double* out, size_t len, size_t steps) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(in);
  CUTOFF_REQUIRE_PTR(out);
  return guarded([&] {
    const cutoff::Distribution d{std::vector<double>(in, in + len)};
    const cutoff::Distribution r = cutoff::evolve(model->model, d, steps);
    std::copy(r.values.begin(), r.values.end(), out);
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_tv_distance(const double* a, const double* b, size_t len, double* out) {
  CUTOFF_REQUIRE_PTR(a);
  CUTOFF_REQUIRE_PTR(b);
  CUTOFF_REQUIRE_PTR(out);
  return guarded([&] {
    *out = cutoff::tv_distance(cutoff::Distribution{std::vector<double>(a, a + len)},
                               cutoff::Distribution{std::vector<double>(b, b + len)});
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_bd_hitting_moments(const cutoff_model* model, size_t from, size_t to, double* mean,
                                        double* variance) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(mean);
  CUTOFF_REQUIRE_PTR(variance);
  return guarded([&] {
    const auto m = cutoff::bd_hitting_moments(model->model, from, to);
    *mean = m.mean;
    *variance = m.variance;
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_linear_solve_hitting(const cutoff_model* model, size_t init, const size_t* targets,
                                          size_t target_count, double* mean, double* variance) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(targets);
  CUTOFF_REQUIRE_PTR(mean);
  CUTOFF_REQUIRE_PTR(variance);
  return guarded([&] {
    const auto m = cutoff::linear_solve_hitting(model->model, init, target_set(targets, target_count));
    *mean = m.mean;
    *variance = m.variance;
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_mc_hitting(const cutoff_model* model, size_t init, const size_t* targets, size_t target_count,
                                size_t replicas, uint64_t seed, uint64_t* samples) {
  CUTOFF_REQUIRE_PTR(model);
  CUTOFF_REQUIRE_PTR(targets);
  CUTOFF_REQUIRE_PTR(samples);
  return guarded([&] {
    const auto s = cutoff::mc_hitting(model->model, init, target_set(targets, target_count), replicas, seed);
    std::copy(s.values.begin(), s.values.end(), samples);
    return CUTOFF_OK;
  });
}

cutoff_status cutoff_run(const char* subcommand, const char* config_path, const uint64_t* seed_override,
                         const char* out_override) {
  CUTOFF_REQUIRE_PTR(subcommand);
  CUTOFF_REQUIRE_PTR(config_path);
  return guarded([&] {
    cutoff::RunOverrides ov;
    if (seed_override) ov.seed = *seed_override;
    if (out_override) ov.out = out_override;
    const cutoff::RunResult r = cutoff::run_experiment(subcommand, cutoff::load_config(config_path), ov);
    g_last_summary.clear();
    for (const auto& line : r.summary) g_last_summary += line + "\n";
    g_last_summary += "wrote " + std::to_string(r.files.size()) + " files and manifest.txt\n";
    return CUTOFF_OK;
  });
}

const char* cutoff_last_summary(void) { return g_last_summary.c_str(); }

}  // extern "C"
