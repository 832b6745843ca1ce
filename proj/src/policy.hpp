#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rng.hpp"
#include "transforms.hpp"

namespace l2t {

enum class UpdateMode {
  // scores += rho * J_softmax^T g: ascent along g projected on the simplex tangent.
  kSoftmax,
  // scores = p + rho * g, i.e. the raw additive step, renormalized by softmax.
  kLiteral,
};

// Sampling distribution over catalog ops, p = softmax(scores).
struct PolicyState {
  std::vector<double> scores;
  double learning_rate = 0.01;
  UpdateMode mode = UpdateMode::kSoftmax;

  std::size_t size() const { return scores.size(); }
  std::vector<double> probabilities() const;
};

std::vector<double> softmax(std::span<const double> scores);

// Scores drawn i.i.d. N(0, 1) from the seed.
PolicyState init_policy(std::size_t num_ops, std::uint64_t seed, double learning_rate,
                        UpdateMode mode = UpdateMode::kSoftmax);

// All-zero scores, hence uniform p.
PolicyState uniform_policy(std::size_t num_ops, double learning_rate = 0.0);

struct SampledBatch {
  std::vector<Transformation> transformations;
  std::vector<double> probabilities;  // P(phi^l), product of the sampled p entries
  std::vector<double> p;              // distribution the batch was drawn from
};

// L transformations of K ops each, every op drawn i.i.d. (with replacement) from p.
SampledBatch sample_transformations(std::span<const double> p, std::size_t num_transforms,
                                    std::size_t num_ops, Rng& rng);

// Single categorical draw by inverse CDF.
std::size_t sample_categorical(std::span<const double> p, Rng& rng);

double transformation_probability(std::span<const double> p, const Transformation& t);

// g[m] = (1/L) sum_l loss_l * dP(phi^l)/dp_m. With subtract_mean the losses are
// centred first.
std::vector<double> policy_gradient(const SampledBatch& batch, std::span<const double> losses,
                                    bool subtract_mean = false);

PolicyState update_policy(const PolicyState& policy, std::span<const double> grad);

}  // namespace l2t
