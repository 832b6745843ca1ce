#include "attacks.hpp"

#include <algorithm>
#include <cmath>

namespace l2t {
namespace {

double l1_norm(const Image& g) {
  double s = 0.0;
  for (double v : g.values()) s += std::fabs(v);
  return s;
}

// Gradient of the surrogate loss at x_adv for iteration t; fills the record.
using GradientSource = std::function<Image(int, const Image&, IterationRecord&)>;
// Runs after x_adv has been updated in iteration t.
using StepHook = std::function<void(int, const Image&, IterationRecord&)>;

// Shared sign-gradient loop. With use_momentum the step direction is
// g_t = mu * g_{t-1} + gbar / ||gbar||_1 (the normalized term is dropped when
// ||gbar||_1 = 0); otherwise it is gbar itself.
AttackResult sign_gradient_loop(const Image& x, const AttackConfig& cfg, bool use_momentum,
                                const GradientSource& gradient, const StepHook& after_step,
                                const IterateObserver& observer) {
  cfg.validate();
  const double alpha = cfg.alpha();
  AttackResult result;
  Image x_adv = x;
  Image momentum(x.shape());
  for (int t = 1; t <= cfg.iterations; ++t) {
    IterationRecord rec;
    rec.iteration = t;
    const Image gbar = gradient(t, x_adv, rec);
    rec.grad_l1 = l1_norm(gbar);
    const Image* direction = &gbar;
    if (use_momentum) {
      const double norm = rec.grad_l1;
      for (std::size_t i = 0; i < momentum.size(); ++i) {
        momentum[i] = cfg.momentum * momentum[i] + (norm > 0.0 ? gbar[i] / norm : 0.0);
      }
      direction = &momentum;
    }
    Image stepped = x_adv;
    for (std::size_t i = 0; i < stepped.size(); ++i) stepped[i] += alpha * sign((*direction)[i]);
    x_adv = project_and_clip(stepped, x, cfg.epsilon);
    if (after_step) after_step(t, x_adv, rec);
    if (observer) observer(t, x_adv);
    result.trace.push_back(std::move(rec));
  }
  result.adversarial = std::move(x_adv);
  return result;
}

GradientSource plain_gradient(const ModelWeights& model, int label) {
  return [&model, label](int, const Image& x_adv, IterationRecord& rec) {
    LossGrad lg = loss_and_input_grad(model, x_adv, label);
    rec.loss = lg.loss;
    return std::move(lg.grad);
  };
}

// Rand control and L2T: sample L transformations from the current policy,
// average the gradients through them, and (when learning) update the policy
// from the losses of the same frozen transformations at the new iterate.
AttackResult transformed_attack(const ModelWeights& model, const Image& x, int label, const AttackConfig& cfg,
                                const OpCatalog& catalog, PolicyState policy, std::vector<double> p,
                                bool learn, const IterateObserver& observer) {
  cfg.validate();
  if (catalog.size() == 0) throw InvalidArgument("empty transformation catalog");
  if (policy.size() != catalog.size() || p.size() != catalog.size()) {
    throw InvalidArgument("policy size does not match catalog");
  }
  require_same_shape(x.shape(), catalog.shape(), "attack input vs catalog");

  Rng sampling_rng = Rng::substream(cfg.seed, "sampling");
  Rng transform_rng = Rng::substream(cfg.seed, "transform");
  SampledBatch batch;
  std::vector<CompositeTrace> traces;

  auto gradient = [&](int, const Image& x_adv, IterationRecord& rec) {
    batch = sample_transformations(p, cfg.num_transforms, cfg.num_ops, sampling_rng);
    traces.clear();
    Image sum(x.shape());
    double loss_sum = 0.0;
    for (const Transformation& t : batch.transformations) {
      auto [transformed, trace] = compose_apply(catalog, t, x_adv, transform_rng);
      LossGrad lg = loss_and_input_grad(model, transformed, label);
      const Image g = compose_vjp(catalog, trace, lg.grad);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
      loss_sum += lg.loss;
      traces.push_back(std::move(trace));
    }
    const double inv = 1.0 / static_cast<double>(cfg.num_transforms);
    for (double& v : sum.values()) v *= inv;
    rec.loss = loss_sum * inv;
    rec.sampled = batch.transformations;
    rec.probabilities = batch.probabilities;
    return sum;
  };

  auto update = [&](int, const Image& x_adv, IterationRecord& rec) {
    if (!learn) return;
    rec.post_losses.reserve(traces.size());
    for (const CompositeTrace& trace : traces) {
      rec.post_losses.push_back(loss_only(model, compose_replay(catalog, trace, x_adv), label));
    }
    const std::vector<double> grad = policy_gradient(batch, rec.post_losses, cfg.reward_baseline);
    policy = update_policy(policy, grad);
    p = policy.probabilities();
    rec.policy = p;
  };

  std::vector<double> initial = p;
  AttackResult result = sign_gradient_loop(x, cfg, true, gradient, update, observer);
  result.initial_policy = std::move(initial);
  return result;
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::kIfgsm: return "ifgsm";
    case Method::kMifgsm: return "mifgsm";
    case Method::kRand: return "rand";
    case Method::kL2t: return "l2t";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kIfgsm, Method::kMifgsm, Method::kRand, Method::kL2t}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown attack method '" + std::string(name) + "' (expected ifgsm, mifgsm, rand or l2t)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be a finite value >= 0");
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (!(momentum >= 0.0)) throw InvalidArgument("momentum decay must be >= 0");
  if (num_ops < 1) throw InvalidArgument("num_ops (K) must be >= 1");
  if (num_transforms < 1) throw InvalidArgument("num_transforms (L) must be >= 1");
  if (!(policy_lr >= 0.0)) throw InvalidArgument("policy learning rate must be >= 0");
}

Image project_and_clip(const Image& x_adv, const Image& x_benign, double epsilon) {
  require_same_shape(x_adv.shape(), x_benign.shape(), "project_and_clip");
  Image out(x_adv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = std::max(0.0, x_benign[i] - epsilon);
    const double hi = std::min(1.0, x_benign[i] + epsilon);
    out[i] = std::clamp(x_adv[i], lo, hi);
  }
  return out;
}

AttackResult ifgsm(const ModelWeights& model, const Image& x, int label, const AttackConfig& cfg,
                   const IterateObserver& observer) {
  return sign_gradient_loop(x, cfg, false, plain_gradient(model, label), {}, observer);
}

AttackResult mifgsm(const ModelWeights& model, const Image& x, int label, const AttackConfig& cfg,
                    const IterateObserver& observer) {
  return sign_gradient_loop(x, cfg, true, plain_gradient(model, label), {}, observer);
}

AttackResult random_transform_attack(const ModelWeights& model, const Image& x, int label,
                                     const AttackConfig& cfg, const OpCatalog& catalog,
                                     std::span<const double> frozen_p, const IterateObserver& observer) {
  PolicyState policy = uniform_policy(catalog.size());
  std::vector<double> p = policy.probabilities();
  if (!frozen_p.empty()) {
    if (frozen_p.size() != catalog.size()) throw InvalidArgument("frozen distribution size does not match catalog");
    for (double v : frozen_p) {
      if (!(v > 0.0)) throw InvalidArgument("frozen distribution must be strictly positive");
    }
    p.assign(frozen_p.begin(), frozen_p.end());
  }
  return transformed_attack(model, x, label, cfg, catalog, std::move(policy), std::move(p), false, observer);
}

AttackResult l2t_attack(const ModelWeights& surrogate, const Image& x, int label, const AttackConfig& cfg,
                        const OpCatalog& catalog, const IterateObserver& observer) {
  PolicyState policy = init_policy(catalog.size(), cfg.seed, cfg.policy_lr, cfg.policy_update);
  std::vector<double> p = policy.probabilities();
  return transformed_attack(surrogate, x, label, cfg, catalog, std::move(policy), std::move(p), true, observer);
}

AttackResult fixed_trajectory_attack(const ModelWeights& model, const Image& x, int label,
                                     const AttackConfig& cfg, const OpCatalog& catalog,
                                     std::span<const std::size_t> trajectory) {
  if (trajectory.size() != static_cast<std::size_t>(cfg.iterations)) {
    throw InvalidArgument("trajectory length must equal the iteration count");
  }
  Rng transform_rng = Rng::substream(cfg.seed, "transform");
  auto gradient = [&](int t, const Image& x_adv, IterationRecord& rec) {
    const std::size_t op = trajectory[t - 1];
    auto [transformed, trace] = apply_op(catalog, op, x_adv, transform_rng);
    LossGrad lg = loss_and_input_grad(model, transformed, label);
    rec.loss = lg.loss;
    rec.sampled = {Transformation{{op}}};
    return vjp_op(catalog, op, trace, lg.grad);
  };
  return sign_gradient_loop(x, cfg, true, gradient, {}, {});
}

AttackResult run_attack(Method method, const ModelWeights& surrogate, const Image& x, int label,
                        const AttackConfig& cfg, const OpCatalog& catalog, const IterateObserver& observer) {
  switch (method) {
    case Method::kIfgsm: return ifgsm(surrogate, x, label, cfg, observer);
    case Method::kMifgsm: return mifgsm(surrogate, x, label, cfg, observer);
    case Method::kRand: return random_transform_attack(surrogate, x, label, cfg, catalog, {}, observer);
    case Method::kL2t: return l2t_attack(surrogate, x, label, cfg, catalog, observer);
  }
  throw InvalidArgument("unknown method");
}

}  // namespace l2t
