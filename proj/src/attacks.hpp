#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffcore.hpp"
#include "policy.hpp"
#include "transforms.hpp"

namespace l2t {

enum class Method { kIfgsm, kMifgsm, kRand, kL2t };

std::string method_name(Method method);
Method parse_method(std::string_view name);  // throws ConfigError

struct AttackConfig {
  double epsilon = 16.0 / 255.0;  // L-inf budget on the [0,1] pixel scale
  int iterations = 10;            // T
  double momentum = 1.0;          // mu
  int num_ops = 2;                // K, ops per transformation
  int num_transforms = 10;        // L, transformations per iteration
  double policy_lr = 0.01;        // rho
  UpdateMode policy_update = UpdateMode::kSoftmax;
  bool reward_baseline = false;   // centre the losses before the policy gradient
  std::uint64_t seed = 0;         // per-image stream seed

  double alpha() const { return epsilon / iterations; }
  // Throws InvalidArgument when a field is out of range.
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  // Mean surrogate loss over the gradient samples taken this iteration
  // (transformed copies for rand/l2t, the plain input otherwise).
  double loss = 0.0;
  double grad_l1 = 0.0;  // L1 norm of the averaged gradient
  std::vector<Transformation> sampled;
  std::vector<double> probabilities;  // P(phi^l)
  std::vector<double> post_losses;    // losses at the updated example (l2t)
  std::vector<double> policy;         // p after this iteration's update (l2t)
};

struct AttackResult {
  Image adversarial;
  std::vector<IterationRecord> trace;
  std::vector<double> initial_policy;  // rand/l2t: distribution before iteration 1
};

// Called after every iteration with (t, x_adv_t), t = 1..T.
using IterateObserver = std::function<void(int, const Image&)>;

// Elementwise clamp to [max(0, x - eps), min(1, x + eps)].
Image project_and_clip(const Image& x_adv, const Image& x_benign, double epsilon);

AttackResult ifgsm(const ModelWeights& model, const Image& x, int label, const AttackConfig& cfg,
                   const IterateObserver& observer = {});

AttackResult mifgsm(const ModelWeights& model, const Image& x, int label, const AttackConfig& cfg,
                    const IterateObserver& observer = {});

// MI-FGSM over L random transformations per iteration drawn from a frozen
// distribution: uniform unless frozen_p is given.
AttackResult random_transform_attack(const ModelWeights& model, const Image& x, int label,
                                     const AttackConfig& cfg, const OpCatalog& catalog,
                                     std::span<const double> frozen_p = {},
                                     const IterateObserver& observer = {});

// Learned transformation distribution updated by the policy gradient after
// every step.
AttackResult l2t_attack(const ModelWeights& surrogate, const Image& x, int label, const AttackConfig& cfg,
                        const OpCatalog& catalog, const IterateObserver& observer = {});

// Transformed MI-FGSM with a fixed op per iteration (K = L = 1): trajectory[t]
// is the catalog op used at iteration t + 1. Used by the trajectory oracle.
AttackResult fixed_trajectory_attack(const ModelWeights& model, const Image& x, int label,
                                     const AttackConfig& cfg, const OpCatalog& catalog,
                                     std::span<const std::size_t> trajectory);

AttackResult run_attack(Method method, const ModelWeights& surrogate, const Image& x, int label,
                        const AttackConfig& cfg, const OpCatalog& catalog,
                        const IterateObserver& observer = {});

}  // namespace l2t
