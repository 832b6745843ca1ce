#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "models.hpp"
#include "transforms.hpp"

namespace l2t {

// Benign images, all correctly classified by every zoo member.
struct EvalSet {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::size_t> source_indices;  // positions in the held-out dataset

  std::size_t size() const { return images.size(); }
};

struct TransferReport {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<std::string> models;
  std::vector<bool> is_surrogate;
  std::vector<double> asr;               // per model, fraction misclassified
  double average_asr = 0.0;              // over all models
  double average_transfer_asr = 0.0;     // over non-surrogate models
  std::vector<int> fooled_counts;        // per image, over non-surrogate models
  std::vector<int> fooled_histogram;     // [k] = images fooling exactly k transfer targets
};

// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Seed of the attack stream for image `index` under global attack seed `seed`.
std::uint64_t image_seed(std::uint64_t seed, std::size_t index);

int fooled_count(std::span<const ModelWeights* const> targets, const Image& adversarial, int label);

// ASR per zoo member. Ties in argmax go to the lowest class index.
TransferReport attack_success_rate(const Zoo& zoo, std::span<const Image> adversarial,
                                   std::span<const int> labels);

// Runs `method` from the zoo's surrogate on every evaluation image (image i
// uses image_seed(seed, i)) and scores the results on the whole zoo.
TransferReport evaluate_method(Method method, const Zoo& zoo, const EvalSet& eval, AttackConfig cfg,
                               const OpCatalog& catalog, std::uint64_t seed, int jobs,
                               std::vector<AttackResult>* results = nullptr);

// ---- brute-force trajectory oracle ----

struct TrajectoryOracleResult {
  std::vector<std::vector<std::size_t>> trajectories;  // catalog op indices, enumeration order
  std::vector<double> objective;                       // mean target cross-entropy
  std::vector<int> fooled;                             // fooled targets per trajectory
  std::size_t best = 0;

  const std::vector<std::size_t>& best_trajectory() const { return trajectories.at(best); }
  double best_value() const { return objective.at(best); }
};

inline constexpr std::size_t kMaxOracleTrajectories = 1'000'000;

// Objective of one fixed trajectory: transformed MI-FGSM with op trajectory[t]
// at iteration t, then mean cross-entropy of the targets on the result.
double trajectory_objective(const ModelWeights& surrogate, std::span<const ModelWeights* const> targets,
                            const Image& x, int label, std::span<const std::size_t> trajectory,
                            const OpCatalog& catalog, const AttackConfig& cfg, int* fooled = nullptr);

// Enumerates every length-T sequence over `pool` in lexicographic order of
// pool positions. The maximum wins; ties go to the earliest trajectory.
TrajectoryOracleResult brute_force_trajectory(const ModelWeights& surrogate,
                                              std::span<const ModelWeights* const> targets, const Image& x,
                                              int label, std::span<const std::size_t> pool, int iterations,
                                              const OpCatalog& catalog, const AttackConfig& base_cfg);

// ---- ablations ----

enum class AblationAxis { kNumOps, kNumTransforms, kIterations, kCategoryRemoval };

std::string axis_name(AblationAxis axis);
AblationAxis parse_axis(std::string_view name);  // K, L, T, category-removal

struct AblationPoint {
  std::string value;                    // grid value, or the removed category ("none" = full catalog)
  std::vector<TransferReport> reports;  // one per seed
  double mean_transfer_asr = 0.0;
  double std_transfer_asr = 0.0;        // sample standard deviation over seeds
};

struct AblationTable {
  AblationAxis axis = AblationAxis::kNumOps;
  std::vector<AblationPoint> points;
};

struct AblationInputs {
  const Zoo* zoo = nullptr;
  const EvalSet* eval = nullptr;
  std::vector<Category> categories;  // full catalog
  std::vector<Image> aux_pool;
  AttackConfig base;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

// L2T at every grid point with identical images, seeds and weights.
AblationTable run_ablation(AblationAxis axis, std::span<const std::string> grid, const AblationInputs& in);

double mean(std::span<const double> v);
double sample_stddev(std::span<const double> v);

}  // namespace l2t
