#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "experiment.hpp"

using namespace l2t;
using nlohmann::json;

TEST_CASE("defaults follow the reference settings") {
  const ExperimentConfig cfg = parse_config(json::object());
  CHECK(cfg.attack.epsilon == 16.0 / 255.0);
  CHECK(cfg.attack.iterations == 10);
  CHECK(cfg.attack.alpha() == cfg.attack.epsilon / 10);
  CHECK(cfg.attack.momentum == 1.0);
  CHECK(cfg.attack.num_ops == 2);
  CHECK(cfg.attack.num_transforms == 10);
  CHECK(cfg.attack.policy_lr == 0.01);
  CHECK(cfg.attack.policy_update == UpdateMode::kSoftmax);
  CHECK_FALSE(cfg.attack.reward_baseline);
  CHECK(cfg.zoo.archs.size() == 4);
  CHECK(cfg.catalog.categories.size() == 10);
  CHECK(cfg.evaluation.num_images == 200);
  CHECK(cfg.evaluation.num_seeds == 5);
}

TEST_CASE("unknown keys and bad values name the field") {
  auto message = [](const json& j) {
    try {
      parse_config(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(json{{"bogus", 1}}).find("bogus") != std::string::npos);
  CHECK(message(json{{"attack", {{"eps", 3}}}}).find("attack.eps") != std::string::npos);
  CHECK(message(json{{"zoo", {{"archs", {"conv_small", "resnet"}}}}}).find("zoo.archs") != std::string::npos);
  CHECK(message(json{{"attack", {{"iterations", 0}}}}).find("attack.iterations") != std::string::npos);
  CHECK(message(json{{"attack", {{"iterations", "ten"}}}}).find("attack.iterations") != std::string::npos);
  CHECK(message(json{{"catalog", {{"categories", {"blur"}}}}}).find("catalog.categories") != std::string::npos);
  CHECK(message(json{{"zoo", {{"surrogate", "mlp"}, {"archs", {"conv_small", "conv_deep"}}}}})
            .find("zoo.surrogate") != std::string::npos);
  CHECK(message(json{{"attack", {{"policy_update", "sgd"}}}}).find("policy_update") != std::string::npos);
  CHECK(message(json{{"dataset", {{"image_shape", {3, 4, 4}}}}}).find("image_shape") != std::string::npos);
}

TEST_CASE("config hash is stable, round-trips and ignores output placement") {
  const ExperimentConfig a = parse_config(json::object());
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  b.jobs = 7;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  const ExperimentConfig c = parse_config(json::parse(config_to_json(a).dump()));
  CHECK(config_hash(c) == config_hash(a));
  CHECK(c.attack.epsilon == a.attack.epsilon);
}

TEST_CASE("load_config reads files and reports parse errors") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto good = dir / "l2t_cfg_good.json";
  const auto bad = dir / "l2t_cfg_bad.json";
  std::ofstream(good) << R"({"seed": 3, "attack": {"num_transforms": 20}})";
  std::ofstream(bad) << "{ seed: ";
  const ExperimentConfig cfg = load_config(good);
  CHECK(cfg.seed == 3);
  CHECK(cfg.attack.num_transforms == 20);
  CHECK_THROWS_AS(load_config(bad), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "l2t_cfg_missing.json"), ConfigError);
  std::filesystem::remove(good);
  std::filesystem::remove(bad);
}

TEST_CASE("oracle pool entries resolve against the catalog") {
  const ExperimentConfig cfg = parse_config(json::object());
  const ExperimentData data = make_data(cfg);
  const OpCatalog catalog = make_catalog(cfg, data);
  const std::vector<std::size_t> pool = resolve_pool(catalog, cfg.oracle.pool);
  CHECK(pool.size() == 5);
  CHECK(catalog.op(pool[0]).value == 72.0);
  for (const char* bad : {"rotate", "rotate:10", "rotate:x", "blur:1"}) {
    const std::vector<std::string> entry{bad};
    CHECK_THROWS_AS(resolve_pool(catalog, entry), ConfigError);
  }
  CHECK(attack_seeds(cfg).size() == 5);
  CHECK(derive_seed(0, "attack", 0) != derive_seed(0, "attack", 1));
}
