#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attacks.hpp"
#include "eval.hpp"
#include "models.hpp"
#include "transforms.hpp"

namespace l2t {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

struct DatasetConfig {
  int num_classes = 10;
  Shape shape{3, 32, 32};
  int train_per_class = 100;
  int heldout_per_class = 60;
};

struct ZooConfig {
  std::vector<ArchId> archs{ArchId::kConvSmall, ArchId::kConvDeep, ArchId::kConvWide, ArchId::kMlp};
  ArchId surrogate = ArchId::kConvSmall;
  TrainHyper training;
  double accuracy_gate = 0.90;
  double min_disagreement = 0.02;
};

struct CatalogConfig {
  std::vector<Category> categories = all_categories();
  int aux_pool_size = 100;  // mixup partners, taken from the start of the training set
};

struct EvaluationConfig {
  int num_images = 200;
  int num_seeds = 5;
};

struct OracleConfig {
  std::vector<std::string> pool{"rotate:1", "scale:0", "mask:0", "shuffle:0", "spectrum:4"};
  int iterations = 3;
  int num_images = 50;
};

struct AblationConfig {
  std::vector<std::string> k_grid{"1", "2"};
  std::vector<std::string> l_grid{"1", "20"};
  std::vector<std::string> t_grid{"1", "5", "10"};
  std::vector<std::string> category_grid{"none",     "rotate",  "scale",    "resize", "pad", "mask",
                                         "translate", "shuffle", "spectrum", "mixup",  "crop"};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ZooConfig zoo;
  AttackConfig attack;  // seed field unused; per-image seeds derive from `seed`
  CatalogConfig catalog;
  EvaluationConfig evaluation;
  OracleConfig oracle;
  AblationConfig ablation;
  std::string output_dir = "runs/default";
  int jobs = 0;  // 0 = number of hardware threads
};

// Parses and validates a config document. Missing keys take their defaults;
// unknown keys and out-of-range values throw ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
// fnv1a64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

int effective_jobs(const ExperimentConfig& cfg);

// ---- derived seeds and data ----

std::uint64_t derive_seed(std::uint64_t global, std::string_view name, std::uint64_t index = 0);

struct ExperimentData {
  SyntheticDataset train;
  SyntheticDataset heldout;
  std::vector<Image> aux_pool;
};

ExperimentData make_data(const ExperimentConfig& cfg);

// Trains every zoo member and enforces the accuracy and diversity gates
// (GateFailure). `log` receives progress lines.
Zoo train_zoo(const ExperimentConfig& cfg, const ExperimentData& data, int jobs,
              const std::function<void(const std::string&)>& log = {});

// Loads the zoo written by cmd_train_zoo; throws IoError with a hint when missing.
Zoo load_zoo(const ExperimentConfig& cfg, const std::filesystem::path& dir);

EvalSet make_eval_set(const ExperimentConfig& cfg, const Zoo& zoo, const SyntheticDataset& heldout,
                      std::size_t count);

OpCatalog make_catalog(const ExperimentConfig& cfg, const ExperimentData& data);

// Resolves "category:param_index" entries against the catalog.
std::vector<std::size_t> resolve_pool(const OpCatalog& catalog, std::span<const std::string> pool);

std::vector<std::uint64_t> attack_seeds(const ExperimentConfig& cfg);

// ---- serialization ----

nlohmann::ordered_json report_to_json(const TransferReport& report);
nlohmann::ordered_json trace_to_json(const AttackResult& result);

// ---- commands ----
// Each writes under cfg.output_dir and returns the paths it wrote.

using Logger = std::function<void(const std::string&)>;

std::vector<std::filesystem::path> cmd_train_zoo(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::filesystem::path> cmd_attack(const ExperimentConfig& cfg, Method method, const Logger& log = {});
// An empty grid uses the config's grid for the axis.
std::vector<std::filesystem::path> cmd_ablate(const ExperimentConfig& cfg, AblationAxis axis,
                                              std::vector<std::string> grid, const Logger& log = {});
std::vector<std::filesystem::path> cmd_oracle(const ExperimentConfig& cfg, const Logger& log = {});
// Collects every attack and ablation report present into summary.csv/json.
std::vector<std::filesystem::path> cmd_report(const ExperimentConfig& cfg, const Logger& log = {});

}  // namespace l2t
