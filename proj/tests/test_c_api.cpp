#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "experiment.hpp"
#include "helpers.hpp"
#include "l2t/l2t.h"

using namespace l2t::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("l2t_capi_" + name);
  fs::remove_all(p);
  return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("l2t_capi_" + name + ".json");
  std::ofstream(p) << text;
  return p;
}

// Small enough to train in a few seconds.
std::string small_config(const fs::path& out, const std::string& extra_zoo = "") {
  return R"({"output_dir": ")" + out.string() + R"(",
    "dataset": {"num_classes": 4, "image_shape": [3, 16, 16], "train_per_class": 30, "heldout_per_class": 10},
    "zoo": {"archs": ["conv_small", "mlp"], "accuracy_gate": 0.0, "min_disagreement": 0.0)" +
         extra_zoo + R"(, "training": {"epochs": 6}},
    "catalog": {"aux_pool_size": 4},
    "evaluation": {"num_images": 2, "num_seeds": 1},
    "oracle": {"iterations": 2, "num_images": 1},
    "attack": {"num_transforms": 2}})";
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(l2t_version()) > 0);
  CHECK(std::string(l2t_status_name(L2T_ERR_GATE)) == "gate failure");
  CHECK(std::string(l2t_status_name(L2T_OK)) == "ok");
}

TEST_CASE("model handles mirror the core library") {
  const l2t::Shape shape{3, 16, 16};
  const l2t::ModelWeights core =
      l2t::deserialize_weights(l2t::serialize_weights(random_model(l2t::ArchId::kConvDeep, shape, 6, 3)));
  const fs::path path = scratch("model.weights");
  l2t::save_weights(core, path);

  l2t_model* model = nullptr;
  REQUIRE(l2t_model_load(path.c_str(), &model) == L2T_OK);
  int c = 0, h = 0, w = 0, k = 0;
  CHECK(l2t_model_shape(model, &c, &h, &w, &k) == L2T_OK);
  CHECK((c == 3 && h == 16 && w == 16 && k == 6));

  const l2t::Image x = random_image(shape, 5);
  std::vector<double> logits(6);
  REQUIRE(l2t_model_forward(model, x.data(), x.size(), logits.data(), logits.size()) == L2T_OK);
  CHECK(logits == l2t::forward(core, x));

  double loss = 0.0;
  std::vector<double> grad(x.size());
  REQUIRE(l2t_model_loss_grad(model, x.data(), x.size(), 2, &loss, grad.data(), grad.size()) == L2T_OK);
  const l2t::LossGrad lg = l2t::loss_and_input_grad(core, x, 2);
  CHECK(loss == lg.loss);
  CHECK(grad == lg.grad.storage());

  CHECK(l2t_model_forward(model, x.data(), x.size() - 1, logits.data(), logits.size()) == L2T_ERR_INVALID_ARGUMENT);
  CHECK(std::string(l2t_last_error()).find("values") != std::string::npos);
  CHECK(l2t_model_loss_grad(model, x.data(), x.size(), 6, &loss, grad.data(), grad.size()) ==
        L2T_ERR_INVALID_ARGUMENT);
  CHECK(l2t_model_forward(nullptr, x.data(), x.size(), logits.data(), 6) == L2T_ERR_INVALID_ARGUMENT);
  l2t_model_free(model);

  std::string bytes = l2t::serialize_weights(core);
  bytes[bytes.size() - 3] ^= 1;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  model = nullptr;
  CHECK(l2t_model_load(path.c_str(), &model) == L2T_ERR_FORMAT);
  CHECK(model == nullptr);
  CHECK(l2t_model_load((path.string() + ".missing").c_str(), &model) == L2T_ERR_IO);
  fs::remove(path);
}

TEST_CASE("experiment errors map onto status codes") {
  l2t_experiment* exp = nullptr;
  const fs::path bad = write_config("bad", R"({"attack": {"iterations": -3}})");
  CHECK(l2t_experiment_create(bad.c_str(), &exp) == L2T_ERR_CONFIG);
  CHECK(exp == nullptr);
  CHECK(std::string(l2t_last_error()).find("attack.iterations") != std::string::npos);
  CHECK(l2t_experiment_create(nullptr, nullptr) == L2T_ERR_INVALID_ARGUMENT);

  REQUIRE(l2t_experiment_create(nullptr, &exp) == L2T_OK);
  const fs::path out = scratch("empty_run");
  CHECK(l2t_experiment_set_output_dir(exp, out.c_str()) == L2T_OK);
  CHECK(l2t_experiment_set_jobs(exp, -1) == L2T_ERR_CONFIG);
  CHECK(l2t_run_attack(exp, "pgd") == L2T_ERR_CONFIG);
  CHECK(l2t_run_attack(exp, "l2t") == L2T_ERR_IO);
  CHECK(std::string(l2t_last_error()).find("train-zoo") != std::string::npos);
  CHECK(l2t_run_ablate(exp, "Z", nullptr) == L2T_ERR_CONFIG);
  CHECK(l2t_run_report(exp) == L2T_ERR_IO);

  char hash[17];
  CHECK(l2t_experiment_config_hash(exp, hash, sizeof hash) == L2T_OK);
  CHECK(std::string(hash) == l2t::config_hash(l2t::parse_config(nlohmann::json::object())));
  CHECK(l2t_experiment_config_hash(exp, hash, 8) == L2T_ERR_INVALID_ARGUMENT);
  l2t_experiment_free(exp);
}

TEST_CASE("a small pipeline runs through the C API") {
  const fs::path out = scratch("pipeline");
  const fs::path cfg = write_config("small", small_config(out));
  l2t_experiment* exp = nullptr;
  REQUIRE(l2t_experiment_create(cfg.c_str(), &exp) == L2T_OK);
  std::vector<std::string> lines;
  l2t_experiment_set_logger(
      exp, [](const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); },
      &lines);
  REQUIRE(l2t_run_train_zoo(exp) == L2T_OK);
  CHECK(fs::exists(out / "zoo" / "conv_small.weights"));
  CHECK(fs::exists(out / "zoo" / "run_manifest.json"));
  CHECK(l2t_run_attack(exp, "l2t") == L2T_OK);
  CHECK(fs::exists(out / "attack" / "l2t" / "report.csv"));
  CHECK(fs::exists(out / "attack" / "l2t" / "traces.json"));
  CHECK(l2t_run_ablate(exp, "K", "1,2") == L2T_OK);
  CHECK(fs::exists(out / "ablate" / "K" / "ablation.csv"));
  CHECK(l2t_run_oracle(exp) == L2T_OK);
  CHECK(l2t_run_report(exp) == L2T_OK);
  CHECK(fs::exists(out / "report" / "summary.csv"));
  CHECK_FALSE(lines.empty());

  // Changing the zoo settings invalidates the saved weights.
  l2t_experiment_set_seed(exp, 99);
  CHECK(l2t_run_attack(exp, "ifgsm") == L2T_ERR_IO);
  l2t_experiment_free(exp);

  const fs::path strict = write_config("strict", small_config(scratch("strict"), R"(, "surrogate": "mlp")"));
  std::string text;
  {
    std::ifstream in(strict);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto pos = text.find("\"min_disagreement\": 0.0");
  text.replace(pos, 23, "\"min_disagreement\": 1.0");
  std::ofstream(strict, std::ios::trunc) << text;
  REQUIRE(l2t_experiment_create(strict.c_str(), &exp) == L2T_OK);
  CHECK(l2t_run_train_zoo(exp) == L2T_ERR_GATE);
  CHECK(std::string(l2t_last_error()).find("disagree") != std::string::npos);
  l2t_experiment_free(exp);
}
