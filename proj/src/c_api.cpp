#include "l2t/l2t.h"

#include <cstring>
#include <exception>
#include <string>

#include "experiment.hpp"

struct l2t_experiment {
  l2t::ExperimentConfig config;
  l2t_log_fn log_fn = nullptr;
  void* log_user = nullptr;

  l2t::Logger logger() const {
    if (!log_fn) return {};
    return [fn = log_fn, user = log_user](const std::string& line) { fn(line.c_str(), user); };
  }
};

struct l2t_model {
  l2t::ModelWeights weights;
};

namespace {

thread_local std::string last_error;

l2t_status fail(l2t_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs fn and maps core exceptions onto status codes.
template <typename Fn>
l2t_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return L2T_OK;
  } catch (const l2t::ConfigError& e) {
    return fail(L2T_ERR_CONFIG, e.what());
  } catch (const l2t::GateFailure& e) {
    return fail(L2T_ERR_GATE, e.what());
  } catch (const l2t::FormatError& e) {
    return fail(L2T_ERR_FORMAT, e.what());
  } catch (const l2t::IoError& e) {
    return fail(L2T_ERR_IO, e.what());
  } catch (const l2t::NumericalError& e) {
    return fail(L2T_ERR_NUMERICAL, e.what());
  } catch (const l2t::InvalidArgument& e) {
    return fail(L2T_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(L2T_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(L2T_ERR_INTERNAL, "unknown error");
  }
}

l2t::Image to_image(const l2t_model* model, const double* image, size_t image_len) {
  const l2t::Shape& shape = model->weights.input_shape;
  if (!image) throw l2t::InvalidArgument("image pointer is null");
  if (image_len != shape.size()) {
    throw l2t::InvalidArgument("image has " + std::to_string(image_len) + " values, model expects " +
                               std::to_string(shape.size()) + " (" + shape.str() + ")");
  }
  return l2t::Image(shape, std::vector<double>(image, image + image_len));
}

}  // namespace

extern "C" {

L2T_API const char* l2t_last_error(void) { return last_error.c_str(); }

L2T_API const char* l2t_version(void) { return l2t::kArtifactVersion; }

L2T_API const char* l2t_status_name(l2t_status status) {
  switch (status) {
    case L2T_OK: return "ok";
    case L2T_ERR_INVALID_ARGUMENT: return "invalid argument";
    case L2T_ERR_CONFIG: return "config error";
    case L2T_ERR_GATE: return "gate failure";
    case L2T_ERR_IO: return "io error";
    case L2T_ERR_FORMAT: return "format error";
    case L2T_ERR_NUMERICAL: return "numerical error";
    case L2T_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

L2T_API l2t_status l2t_experiment_create(const char* config_path, l2t_experiment** out) {
  if (!out) return fail(L2T_ERR_INVALID_ARGUMENT, "output handle pointer is null");
  *out = nullptr;
  return guarded([&] {
    auto exp = std::make_unique<l2t_experiment>();
    if (config_path) exp->config = l2t::load_config(config_path);
    *out = exp.release();
  });
}

L2T_API void l2t_experiment_free(l2t_experiment* exp) { delete exp; }

L2T_API l2t_status l2t_experiment_set_seed(l2t_experiment* exp, uint64_t seed) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  exp->config.seed = seed;
  last_error.clear();
  return L2T_OK;
}

L2T_API l2t_status l2t_experiment_set_output_dir(l2t_experiment* exp, const char* dir) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  if (!dir || !*dir) return fail(L2T_ERR_CONFIG, "output directory must not be empty");
  exp->config.output_dir = dir;
  last_error.clear();
  return L2T_OK;
}

L2T_API l2t_status l2t_experiment_set_jobs(l2t_experiment* exp, int jobs) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  if (jobs < 0) return fail(L2T_ERR_CONFIG, "jobs must be >= 0");
  exp->config.jobs = jobs;
  last_error.clear();
  return L2T_OK;
}

L2T_API l2t_status l2t_experiment_config_hash(const l2t_experiment* exp, char* buf, size_t buf_size) {
  if (!exp || !buf) return fail(L2T_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const std::string hash = l2t::config_hash(exp->config);
    if (buf_size < hash.size() + 1) throw l2t::InvalidArgument("hash buffer needs 17 bytes");
    std::memcpy(buf, hash.c_str(), hash.size() + 1);
  });
}

L2T_API l2t_status l2t_experiment_set_logger(l2t_experiment* exp, l2t_log_fn fn, void* user) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  exp->log_fn = fn;
  exp->log_user = user;
  last_error.clear();
  return L2T_OK;
}

L2T_API l2t_status l2t_run_train_zoo(l2t_experiment* exp) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  return guarded([&] { l2t::cmd_train_zoo(exp->config, exp->logger()); });
}

L2T_API l2t_status l2t_run_attack(l2t_experiment* exp, const char* method) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  if (!method) return fail(L2T_ERR_CONFIG, "attack method is null");
  return guarded([&] { l2t::cmd_attack(exp->config, l2t::parse_method(method), exp->logger()); });
}

L2T_API l2t_status l2t_run_ablate(l2t_experiment* exp, const char* axis, const char* grid) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  if (!axis) return fail(L2T_ERR_CONFIG, "ablation axis is null");
  return guarded([&] {
    std::vector<std::string> values;
    if (grid && *grid) values.push_back(grid);
    l2t::cmd_ablate(exp->config, l2t::parse_axis(axis), values, exp->logger());
  });
}

L2T_API l2t_status l2t_run_oracle(l2t_experiment* exp) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  return guarded([&] { l2t::cmd_oracle(exp->config, exp->logger()); });
}

L2T_API l2t_status l2t_run_report(l2t_experiment* exp) {
  if (!exp) return fail(L2T_ERR_INVALID_ARGUMENT, "experiment handle is null");
  return guarded([&] { l2t::cmd_report(exp->config, exp->logger()); });
}

L2T_API l2t_status l2t_model_load(const char* path, l2t_model** out) {
  if (!out) return fail(L2T_ERR_INVALID_ARGUMENT, "output handle pointer is null");
  *out = nullptr;
  if (!path) return fail(L2T_ERR_INVALID_ARGUMENT, "path is null");
  return guarded([&] { *out = new l2t_model{l2t::load_weights(path)}; });
}

L2T_API void l2t_model_free(l2t_model* model) { delete model; }

L2T_API l2t_status l2t_model_shape(const l2t_model* model, int* channels, int* height, int* width,
                                   int* num_classes) {
  if (!model) return fail(L2T_ERR_INVALID_ARGUMENT, "model handle is null");
  const l2t::Shape& s = model->weights.input_shape;
  if (channels) *channels = s.channels;
  if (height) *height = s.height;
  if (width) *width = s.width;
  if (num_classes) *num_classes = model->weights.num_classes;
  last_error.clear();
  return L2T_OK;
}

L2T_API l2t_status l2t_model_forward(const l2t_model* model, const double* image, size_t image_len, double* logits,
                                     size_t logits_len) {
  if (!model || !logits) return fail(L2T_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    if (logits_len != static_cast<size_t>(model->weights.num_classes)) {
      throw l2t::InvalidArgument("logits buffer has " + std::to_string(logits_len) + " slots, model has " +
                                 std::to_string(model->weights.num_classes) + " classes");
    }
    const l2t::Logits out = l2t::forward(model->weights, to_image(model, image, image_len));
    std::memcpy(logits, out.data(), out.size() * sizeof(double));
  });
}

L2T_API l2t_status l2t_model_loss_grad(const l2t_model* model, const double* image, size_t image_len, int label,
                                       double* loss, double* grad, size_t grad_len) {
  if (!model || !loss || !grad) return fail(L2T_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    if (grad_len != image_len) throw l2t::InvalidArgument("gradient buffer length must equal the image length");
    const l2t::LossGrad lg = l2t::loss_and_input_grad(model->weights, to_image(model, image, image_len), label);
    *loss = lg.loss;
    std::memcpy(grad, lg.grad.values().data(), lg.grad.size() * sizeof(double));
  });
}

}  // extern "C"
