#include "policy.hpp"

#include <algorithm>
#include <cmath>

namespace l2t {

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> PolicyState::probabilities() const { return softmax(scores); }

PolicyState init_policy(std::size_t num_ops, std::uint64_t seed, double learning_rate, UpdateMode mode) {
  if (num_ops == 0) throw InvalidArgument("policy needs at least one op");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("policy learning rate must be non-negative");
  PolicyState policy;
  policy.learning_rate = learning_rate;
  policy.mode = mode;
  Rng rng = Rng::substream(seed, "policy-init");
  policy.scores.resize(num_ops);
  for (double& s : policy.scores) s = rng.normal();
  return policy;
}

PolicyState uniform_policy(std::size_t num_ops, double learning_rate) {
  if (num_ops == 0) throw InvalidArgument("policy needs at least one op");
  PolicyState policy;
  policy.learning_rate = learning_rate;
  policy.scores.assign(num_ops, 0.0);
  return policy;
}

std::size_t sample_categorical(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    if (p[m] <= 0.0) continue;
    cumulative += p[m];
    last_positive = m;
    if (u < cumulative) return m;
  }
  // Rounding left the cumulative sum just below u.
  return last_positive;
}

SampledBatch sample_transformations(std::span<const double> p, std::size_t num_transforms,
                                    std::size_t num_ops, Rng& rng) {
  if (num_transforms < 1 || num_ops < 1) throw InvalidArgument("L and K must be at least 1");
  if (p.empty()) throw InvalidArgument("empty distribution");
  SampledBatch batch;
  batch.p.assign(p.begin(), p.end());
  for (std::size_t l = 0; l < num_transforms; ++l) {
    Transformation t;
    for (std::size_t k = 0; k < num_ops; ++k) t.ops.push_back(sample_categorical(p, rng));
    batch.probabilities.push_back(transformation_probability(p, t));
    batch.transformations.push_back(std::move(t));
  }
  return batch;
}

double transformation_probability(std::span<const double> p, const Transformation& t) {
  double prob = 1.0;
  for (std::size_t m : t.ops) {
    if (m >= p.size()) throw InvalidArgument("op index " + std::to_string(m) + " out of range");
    prob *= p[m];
  }
  return prob;
}

std::vector<double> policy_gradient(const SampledBatch& batch, std::span<const double> losses,
                                    bool subtract_mean) {
  const std::size_t num = batch.transformations.size();
  if (losses.size() != num) {
    throw InvalidArgument("policy_gradient: " + std::to_string(losses.size()) + " losses for " +
                          std::to_string(num) + " transformations");
  }
  if (!all_finite(losses)) throw InvalidArgument("policy_gradient: non-finite loss");
  double baseline = 0.0;
  if (subtract_mean && num > 0) {
    for (double v : losses) baseline += v;
    baseline /= static_cast<double>(num);
  }
  const std::span<const double> p = batch.p;
  std::vector<double> grad(p.size(), 0.0);
  for (std::size_t l = 0; l < num; ++l) {
    const std::vector<std::size_t>& ops = batch.transformations[l].ops;
    const double weight = losses[l] - baseline;
    // dP/dp_m picks up one product term per position holding op m.
    for (std::size_t j = 0; j < ops.size(); ++j) {
      double others = 1.0;
      for (std::size_t i = 0; i < ops.size(); ++i) {
        if (i != j) others *= p[ops[i]];
      }
      grad[ops[j]] += weight * others;
    }
  }
  if (num > 0) {
    for (double& g : grad) g /= static_cast<double>(num);
  }
  return grad;
}

PolicyState update_policy(const PolicyState& policy, std::span<const double> grad) {
  if (grad.size() != policy.size()) {
    throw InvalidArgument("update_policy: gradient has " + std::to_string(grad.size()) + " entries for " +
                          std::to_string(policy.size()) + " ops");
  }
  if (!all_finite(grad)) throw InvalidArgument("update_policy: non-finite gradient");
  PolicyState next = policy;
  const std::vector<double> p = policy.probabilities();
  switch (policy.mode) {
    case UpdateMode::kSoftmax: {
      double mean = 0.0;
      for (std::size_t m = 0; m < p.size(); ++m) mean += grad[m] * p[m];
      for (std::size_t m = 0; m < p.size(); ++m) {
        next.scores[m] += policy.learning_rate * p[m] * (grad[m] - mean);
      }
      break;
    }
    case UpdateMode::kLiteral:
      for (std::size_t m = 0; m < p.size(); ++m) next.scores[m] = p[m] + policy.learning_rate * grad[m];
      break;
  }
  // Keep every exp(score - max) a normal double so that p stays strictly positive.
  const double top = *std::max_element(next.scores.begin(), next.scores.end());
  if (!std::isfinite(top)) throw NumericalError("update_policy: scores became non-finite");
  for (double& s : next.scores) s = std::max(s, top - 700.0);
  return next;
}

}  // namespace l2t
