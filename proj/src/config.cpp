#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>

#include "experiment.hpp"

namespace l2t {
namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& get(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(field(key) + " has the wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  void read_strings(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + " must be an array of strings");
    std::vector<std::string> items;
    for (const json& e : v) {
      if (e.is_string()) {
        items.push_back(e.get<std::string>());
      } else if (e.is_number_integer()) {
        items.push_back(std::to_string(e.get<long long>()));
      } else {
        throw ConfigError(field(key) + " must contain only strings or integers");
      }
    }
    out = std::move(items);
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + field(it.key()) + "'");
    }
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

UpdateMode parse_update_mode(const std::string& name) {
  if (name == "softmax") return UpdateMode::kSoftmax;
  if (name == "literal") return UpdateMode::kLiteral;
  throw ConfigError("attack.policy_update must be 'softmax' or 'literal', got '" + name + "'");
}

std::string update_mode_name(UpdateMode mode) { return mode == UpdateMode::kSoftmax ? "softmax" : "literal"; }

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  ObjectReader root(doc, "");
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  root.read("jobs", cfg.jobs);

  if (root.has("dataset")) {
    ObjectReader r(root.get("dataset"), "dataset");
    r.read("num_classes", cfg.dataset.num_classes);
    r.read("train_per_class", cfg.dataset.train_per_class);
    r.read("heldout_per_class", cfg.dataset.heldout_per_class);
    if (r.has("image_shape")) {
      const json& s = r.get("image_shape");
      require(s.is_array() && s.size() == 3 && s[0].is_number_integer() && s[1].is_number_integer() &&
                  s[2].is_number_integer(),
              "dataset.image_shape must be [channels, height, width]");
      require(s[0].get<int>() > 0 && s[1].get<int>() > 0 && s[2].get<int>() > 0,
              "dataset.image_shape entries must be positive");
      cfg.dataset.shape = Shape{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    }
    r.finish();
  }

  if (root.has("zoo")) {
    ObjectReader r(root.get("zoo"), "zoo");
    if (r.has("archs")) {
      std::vector<std::string> names;
      r.read_strings("archs", names);
      cfg.zoo.archs.clear();
      for (const std::string& n : names) {
        try {
          cfg.zoo.archs.push_back(parse_arch(n));
        } catch (const ConfigError& e) {
          throw ConfigError("zoo.archs: " + std::string(e.what()));
        }
      }
    }
    if (r.has("surrogate")) {
      std::string name;
      r.read("surrogate", name);
      try {
        cfg.zoo.surrogate = parse_arch(name);
      } catch (const ConfigError& e) {
        throw ConfigError("zoo.surrogate: " + std::string(e.what()));
      }
    }
    r.read("accuracy_gate", cfg.zoo.accuracy_gate);
    r.read("min_disagreement", cfg.zoo.min_disagreement);
    if (r.has("training")) {
      ObjectReader t(r.get("training"), "zoo.training");
      t.read("epochs", cfg.zoo.training.epochs);
      t.read("batch_size", cfg.zoo.training.batch_size);
      t.read("learning_rate", cfg.zoo.training.learning_rate);
      t.read("momentum", cfg.zoo.training.momentum);
      t.read("weight_decay", cfg.zoo.training.weight_decay);
      t.finish();
    }
    r.finish();
  }

  if (root.has("attack")) {
    ObjectReader r(root.get("attack"), "attack");
    if (r.has("epsilon_255")) {
      double e = 0.0;
      r.read("epsilon_255", e);
      cfg.attack.epsilon = e / 255.0;
    }
    r.read("iterations", cfg.attack.iterations);
    r.read("momentum", cfg.attack.momentum);
    r.read("num_ops", cfg.attack.num_ops);
    r.read("num_transforms", cfg.attack.num_transforms);
    r.read("policy_lr", cfg.attack.policy_lr);
    r.read("reward_baseline", cfg.attack.reward_baseline);
    if (r.has("policy_update")) {
      std::string mode;
      r.read("policy_update", mode);
      cfg.attack.policy_update = parse_update_mode(mode);
    }
    r.finish();
  }

  if (root.has("catalog")) {
    ObjectReader r(root.get("catalog"), "catalog");
    if (r.has("categories")) {
      std::vector<std::string> names;
      r.read_strings("categories", names);
      cfg.catalog.categories.clear();
      for (const std::string& n : names) {
        try {
          cfg.catalog.categories.push_back(parse_category(n));
        } catch (const ConfigError& e) {
          throw ConfigError("catalog.categories: " + std::string(e.what()));
        }
      }
    }
    r.read("aux_pool_size", cfg.catalog.aux_pool_size);
    r.finish();
  }

  if (root.has("evaluation")) {
    ObjectReader r(root.get("evaluation"), "evaluation");
    r.read("num_images", cfg.evaluation.num_images);
    r.read("num_seeds", cfg.evaluation.num_seeds);
    r.finish();
  }

  if (root.has("oracle")) {
    ObjectReader r(root.get("oracle"), "oracle");
    r.read_strings("pool", cfg.oracle.pool);
    r.read("iterations", cfg.oracle.iterations);
    r.read("num_images", cfg.oracle.num_images);
    r.finish();
  }

  if (root.has("ablation")) {
    ObjectReader r(root.get("ablation"), "ablation");
    r.read_strings("K", cfg.ablation.k_grid);
    r.read_strings("L", cfg.ablation.l_grid);
    r.read_strings("T", cfg.ablation.t_grid);
    r.read_strings("category-removal", cfg.ablation.category_grid);
    r.finish();
  }
  root.finish();
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  require(d.num_classes >= 2, "dataset.num_classes must be >= 2");
  require(d.train_per_class >= 1, "dataset.train_per_class must be >= 1");
  require(d.heldout_per_class >= 1, "dataset.heldout_per_class must be >= 1");
  require(d.shape.height >= 8 && d.shape.width >= 8, "dataset.image_shape height and width must be >= 8");
  require(d.shape.channels == 3, "dataset.image_shape must have 3 channels");

  const ZooConfig& z = cfg.zoo;
  require(z.archs.size() >= 2, "zoo.archs needs at least two architectures");
  for (std::size_t i = 0; i < z.archs.size(); ++i) {
    for (std::size_t j = i + 1; j < z.archs.size(); ++j) {
      require(z.archs[i] != z.archs[j], "zoo.archs lists '" + arch_name(z.archs[i]) + "' twice");
    }
  }
  require(std::find(z.archs.begin(), z.archs.end(), z.surrogate) != z.archs.end(),
          "zoo.surrogate '" + arch_name(z.surrogate) + "' is not in zoo.archs");
  require(z.accuracy_gate >= 0.0 && z.accuracy_gate <= 1.0, "zoo.accuracy_gate must lie in [0, 1]");
  require(z.min_disagreement >= 0.0 && z.min_disagreement <= 1.0, "zoo.min_disagreement must lie in [0, 1]");
  require(z.training.epochs >= 1, "zoo.training.epochs must be >= 1");
  require(z.training.batch_size >= 1, "zoo.training.batch_size must be >= 1");
  require(z.training.learning_rate > 0.0, "zoo.training.learning_rate must be > 0");
  require(z.training.momentum >= 0.0 && z.training.momentum < 1.0, "zoo.training.momentum must lie in [0, 1)");
  require(z.training.weight_decay >= 0.0, "zoo.training.weight_decay must be >= 0");

  const AttackConfig& a = cfg.attack;
  require(std::isfinite(a.epsilon) && a.epsilon >= 0.0, "attack.epsilon_255 must be >= 0");
  require(a.iterations >= 1, "attack.iterations must be >= 1");
  require(a.momentum >= 0.0, "attack.momentum must be >= 0");
  require(a.num_ops >= 1, "attack.num_ops must be >= 1");
  require(a.num_transforms >= 1, "attack.num_transforms must be >= 1");
  require(a.policy_lr >= 0.0, "attack.policy_lr must be >= 0");

  require(!cfg.catalog.categories.empty(), "catalog.categories must not be empty");
  for (std::size_t i = 0; i < cfg.catalog.categories.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.catalog.categories.size(); ++j) {
      require(cfg.catalog.categories[i] != cfg.catalog.categories[j],
              "catalog.categories lists '" + category_name(cfg.catalog.categories[i]) + "' twice");
    }
  }
  require(cfg.catalog.aux_pool_size >= 0, "catalog.aux_pool_size must be >= 0");
  require(cfg.catalog.aux_pool_size <= d.train_per_class * d.num_classes,
          "catalog.aux_pool_size exceeds the training set size");

  require(cfg.evaluation.num_images >= 1, "evaluation.num_images must be >= 1");
  require(cfg.evaluation.num_seeds >= 1, "evaluation.num_seeds must be >= 1");
  require(!cfg.oracle.pool.empty(), "oracle.pool must not be empty");
  require(cfg.oracle.iterations >= 1, "oracle.iterations must be >= 1");
  require(cfg.oracle.num_images >= 1, "oracle.num_images must be >= 1");
  require(cfg.jobs >= 0, "jobs must be >= 0");
  require(!cfg.output_dir.empty(), "output_dir must not be empty");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["jobs"] = cfg.jobs;
  j["dataset"] = {{"num_classes", cfg.dataset.num_classes},
                  {"image_shape", {cfg.dataset.shape.channels, cfg.dataset.shape.height, cfg.dataset.shape.width}},
                  {"train_per_class", cfg.dataset.train_per_class},
                  {"heldout_per_class", cfg.dataset.heldout_per_class}};
  std::vector<std::string> archs;
  for (ArchId a : cfg.zoo.archs) archs.push_back(arch_name(a));
  j["zoo"] = {{"archs", archs},
              {"surrogate", arch_name(cfg.zoo.surrogate)},
              {"accuracy_gate", cfg.zoo.accuracy_gate},
              {"min_disagreement", cfg.zoo.min_disagreement},
              {"training",
               {{"epochs", cfg.zoo.training.epochs},
                {"batch_size", cfg.zoo.training.batch_size},
                {"learning_rate", cfg.zoo.training.learning_rate},
                {"momentum", cfg.zoo.training.momentum},
                {"weight_decay", cfg.zoo.training.weight_decay}}}};
  j["attack"] = {{"epsilon_255", cfg.attack.epsilon * 255.0},
                 {"iterations", cfg.attack.iterations},
                 {"momentum", cfg.attack.momentum},
                 {"num_ops", cfg.attack.num_ops},
                 {"num_transforms", cfg.attack.num_transforms},
                 {"policy_lr", cfg.attack.policy_lr},
                 {"policy_update", update_mode_name(cfg.attack.policy_update)},
                 {"reward_baseline", cfg.attack.reward_baseline}};
  std::vector<std::string> cats;
  for (Category c : cfg.catalog.categories) cats.push_back(category_name(c));
  j["catalog"] = {{"categories", cats}, {"aux_pool_size", cfg.catalog.aux_pool_size}};
  j["evaluation"] = {{"num_images", cfg.evaluation.num_images}, {"num_seeds", cfg.evaluation.num_seeds}};
  j["oracle"] = {{"pool", cfg.oracle.pool},
                 {"iterations", cfg.oracle.iterations},
                 {"num_images", cfg.oracle.num_images}};
  j["ablation"] = {{"K", cfg.ablation.k_grid},
                   {"L", cfg.ablation.l_grid},
                   {"T", cfg.ablation.t_grid},
                   {"category-removal", cfg.ablation.category_grid}};
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Output location and worker count do not change results.
  nlohmann::ordered_json j = config_to_json(cfg);
  j.erase("output_dir");
  j.erase("jobs");
  const std::string text = j.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

int effective_jobs(const ExperimentConfig& cfg) {
  if (cfg.jobs > 0) return cfg.jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace l2t
