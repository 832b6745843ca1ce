#include "eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace l2t {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<bool> failed{false};
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t image_seed(std::uint64_t seed, std::size_t index) {
  return Rng::substream(seed, "attack-image", index).next_u64();
}

int fooled_count(std::span<const ModelWeights* const> targets, const Image& adversarial, int label) {
  int count = 0;
  for (const ModelWeights* m : targets) {
    if (predict(*m, adversarial) != label) ++count;
  }
  return count;
}

TransferReport attack_success_rate(const Zoo& zoo, std::span<const Image> adversarial, std::span<const int> labels) {
  if (adversarial.size() != labels.size()) {
    throw InvalidArgument("attack_success_rate: " + std::to_string(adversarial.size()) + " images for " +
                          std::to_string(labels.size()) + " labels");
  }
  if (zoo.size() == 0) throw InvalidArgument("attack_success_rate: empty zoo");
  TransferReport report;
  const std::size_t n = adversarial.size();
  std::vector<const ModelWeights*> transfer_targets;
  for (std::size_t j = 0; j < zoo.size(); ++j) {
    report.models.push_back(arch_name(zoo.members[j].arch));
    report.is_surrogate.push_back(j == zoo.surrogate);
    if (j != zoo.surrogate) transfer_targets.push_back(&zoo.members[j]);
  }
  report.asr.assign(zoo.size(), 0.0);
  report.fooled_counts.assign(n, 0);
  report.fooled_histogram.assign(transfer_targets.size() + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < zoo.size(); ++j) {
      if (predict(zoo.members[j], adversarial[i]) != labels[i]) {
        report.asr[j] += 1.0;
        if (j != zoo.surrogate) ++report.fooled_counts[i];
      }
    }
    ++report.fooled_histogram[report.fooled_counts[i]];
  }
  double total = 0.0;
  double transfer = 0.0;
  for (std::size_t j = 0; j < zoo.size(); ++j) {
    if (n > 0) report.asr[j] /= static_cast<double>(n);
    total += report.asr[j];
    if (j != zoo.surrogate) transfer += report.asr[j];
  }
  report.average_asr = total / static_cast<double>(zoo.size());
  report.average_transfer_asr =
      transfer_targets.empty() ? 0.0 : transfer / static_cast<double>(transfer_targets.size());
  return report;
}

TransferReport evaluate_method(Method method, const Zoo& zoo, const EvalSet& eval, AttackConfig cfg,
                               const OpCatalog& catalog, std::uint64_t seed, int jobs,
                               std::vector<AttackResult>* results) {
  cfg.validate();
  if (eval.images.size() != eval.labels.size()) throw InvalidArgument("evaluation set images/labels mismatch");
  std::vector<AttackResult> out(eval.size());
  parallel_for(eval.size(), jobs, [&](std::size_t i) {
    AttackConfig c = cfg;
    c.seed = image_seed(seed, i);
    out[i] = run_attack(method, zoo.surrogate_model(), eval.images[i], eval.labels[i], c, catalog);
  });
  std::vector<Image> adversarial;
  adversarial.reserve(out.size());
  for (const AttackResult& r : out) adversarial.push_back(r.adversarial);
  TransferReport report = attack_success_rate(zoo, adversarial, eval.labels);
  report.method = method_name(method);
  report.seed = seed;
  if (results) *results = std::move(out);
  return report;
}

double trajectory_objective(const ModelWeights& surrogate, std::span<const ModelWeights* const> targets,
                            const Image& x, int label, std::span<const std::size_t> trajectory,
                            const OpCatalog& catalog, const AttackConfig& cfg, int* fooled) {
  if (targets.empty()) throw InvalidArgument("trajectory objective needs at least one target");
  AttackConfig c = cfg;
  c.iterations = static_cast<int>(trajectory.size());
  const AttackResult r = fixed_trajectory_attack(surrogate, x, label, c, catalog, trajectory);
  double sum = 0.0;
  for (const ModelWeights* m : targets) sum += loss_only(*m, r.adversarial, label);
  if (fooled) *fooled = fooled_count(targets, r.adversarial, label);
  return sum / static_cast<double>(targets.size());
}

TrajectoryOracleResult brute_force_trajectory(const ModelWeights& surrogate,
                                              std::span<const ModelWeights* const> targets, const Image& x,
                                              int label, std::span<const std::size_t> pool, int iterations,
                                              const OpCatalog& catalog, const AttackConfig& base_cfg) {
  if (pool.empty()) throw InvalidArgument("oracle op pool is empty");
  if (iterations < 1) throw InvalidArgument("oracle needs at least one iteration");
  for (std::size_t op : pool) {
    if (op >= catalog.size()) throw InvalidArgument("oracle pool op " + std::to_string(op) + " not in catalog");
  }
  std::size_t rows = 1;
  for (int t = 0; t < iterations; ++t) {
    if (rows > kMaxOracleTrajectories / pool.size()) {
      throw InvalidArgument("oracle enumeration of " + std::to_string(pool.size()) + "^" +
                            std::to_string(iterations) + " trajectories exceeds the limit of " +
                            std::to_string(kMaxOracleTrajectories));
    }
    rows *= pool.size();
  }

  TrajectoryOracleResult result;
  result.trajectories.reserve(rows);
  std::vector<std::size_t> digits(iterations, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::size_t> traj(iterations);
    for (int t = 0; t < iterations; ++t) traj[t] = pool[digits[t]];
    result.trajectories.push_back(std::move(traj));
    // Last iteration varies fastest, giving lexicographic order.
    for (int t = iterations - 1; t >= 0; --t) {
      if (++digits[t] < pool.size()) break;
      digits[t] = 0;
    }
  }
  result.objective.resize(rows);
  result.fooled.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    result.objective[r] = trajectory_objective(surrogate, targets, x, label, result.trajectories[r], catalog,
                                               base_cfg, &result.fooled[r]);
  }
  result.best = 0;
  for (std::size_t r = 1; r < rows; ++r) {
    if (result.objective[r] > result.objective[result.best]) result.best = r;
  }
  return result;
}

std::string axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kNumOps: return "K";
    case AblationAxis::kNumTransforms: return "L";
    case AblationAxis::kIterations: return "T";
    case AblationAxis::kCategoryRemoval: return "category-removal";
  }
  return "unknown";
}

AblationAxis parse_axis(std::string_view name) {
  for (AblationAxis a : {AblationAxis::kNumOps, AblationAxis::kNumTransforms, AblationAxis::kIterations,
                         AblationAxis::kCategoryRemoval}) {
    if (axis_name(a) == name) return a;
  }
  throw ConfigError("unknown ablation axis '" + std::string(name) + "' (expected K, L, T or category-removal)");
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

int parse_positive(const std::string& value, AblationAxis axis) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || v < 1) {
    throw ConfigError("ablation grid value '" + value + "' for axis " + axis_name(axis) +
                      " must be a positive integer");
  }
  return v;
}

}  // namespace

AblationTable run_ablation(AblationAxis axis, std::span<const std::string> grid, const AblationInputs& in) {
  if (!in.zoo || !in.eval) throw InvalidArgument("ablation needs a zoo and an evaluation set");
  if (grid.empty()) throw ConfigError("ablation grid is empty");
  if (in.seeds.empty()) throw ConfigError("ablation needs at least one seed");
  const Shape shape = in.zoo->surrogate_model().input_shape;

  // Validate the whole grid before doing any work.
  std::vector<AttackConfig> configs;
  std::vector<std::vector<Category>> catalogs;
  for (const std::string& value : grid) {
    AttackConfig cfg = in.base;
    std::vector<Category> cats = in.categories;
    switch (axis) {
      case AblationAxis::kNumOps: cfg.num_ops = parse_positive(value, axis); break;
      case AblationAxis::kNumTransforms: cfg.num_transforms = parse_positive(value, axis); break;
      case AblationAxis::kIterations: cfg.iterations = parse_positive(value, axis); break;
      case AblationAxis::kCategoryRemoval:
        if (value != "none") {
          const Category removed = parse_category(value);
          auto it = std::find(cats.begin(), cats.end(), removed);
          if (it == cats.end()) throw ConfigError("category '" + value + "' is not enabled in the catalog");
          cats.erase(it);
          if (cats.empty()) throw ConfigError("removing '" + value + "' leaves an empty catalog");
        }
        break;
    }
    cfg.validate();
    configs.push_back(cfg);
    catalogs.push_back(std::move(cats));
  }

  AblationTable table;
  table.axis = axis;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const OpCatalog catalog = OpCatalog::build(catalogs[g], shape, in.aux_pool);
    AblationPoint point;
    point.value = grid[g];
    std::vector<double> transfer;
    for (std::uint64_t seed : in.seeds) {
      point.reports.push_back(evaluate_method(Method::kL2t, *in.zoo, *in.eval, configs[g], catalog, seed, in.jobs));
      transfer.push_back(point.reports.back().average_transfer_asr);
    }
    point.mean_transfer_asr = mean(transfer);
    point.std_transfer_asr = sample_stddev(transfer);
    table.points.push_back(std::move(point));
  }
  return table;
}

}  // namespace l2t
