#pragma once

#include <algorithm>
#include <cmath>

#include "attacks.hpp"
#include "models.hpp"
#include "rng.hpp"

namespace l2t::testing {

inline Image random_image(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Image img(shape);
  for (double& v : img.values()) v = rng.uniform();
  return img;
}

inline Image random_signed(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Image img(shape);
  for (double& v : img.values()) v = rng.uniform(-1.0, 1.0);
  return img;
}

inline ModelWeights random_model(ArchId arch, Shape shape, int classes, std::uint64_t seed) {
  Rng rng(seed);
  return make_model(arch, shape, classes, rng);
}

// max over pixels of |a - n| / max(|a|, |n|, floor)
inline double max_relative_error(const Image& analytic, const Image& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double denom = std::max({std::fabs(a), std::fabs(n), floor});
    worst = std::max(worst, std::fabs(a - n) / denom);
  }
  return worst;
}

// max |a - n| / |a| over pixels where |a| > threshold
inline double relative_error_where(const Image& analytic, const Image& numeric, double threshold) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (std::fabs(analytic[i]) > threshold) {
      worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / std::fabs(analytic[i]));
    }
  }
  return worst;
}

struct GradCheck {
  double max_rel_error = 0.0;  // over smooth pixels with |analytic| > threshold
  std::size_t checked = 0;
  std::size_t excluded = 0;    // a ReLU switches inside [x - h, x + h]
};

// Central differences of the model loss against loss_and_input_grad. Pixels
// whose difference interval crosses a ReLU kink are skipped: the loss is not
// differentiable there and the central difference is not a valid reference.
inline GradCheck check_model_gradient(const ModelWeights& model, const Image& x, int label, double h,
                                      double threshold = 1e-6) {
  GradCheck out;
  const LossGrad lg = loss_and_input_grad(model, x, label);
  const std::vector<bool> centre = relu_pattern(model, x);
  Image probe = x;
  Logits logits;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const bool same_plus = relu_pattern(model, probe, &logits) == centre;
    const double plus = cross_entropy(logits, label);
    probe[i] = x[i] - h;
    const bool same_minus = relu_pattern(model, probe, &logits) == centre;
    const double minus = cross_entropy(logits, label);
    probe[i] = x[i];
    if (!same_plus || !same_minus) {
      ++out.excluded;
      continue;
    }
    const double a = lg.grad[i];
    if (std::fabs(a) <= threshold) continue;
    const double n = (plus - minus) / (2.0 * h);
    ++out.checked;
    out.max_rel_error = std::max(out.max_rel_error, std::fabs(a - n) / std::fabs(a));
  }
  return out;
}

}  // namespace l2t::testing
