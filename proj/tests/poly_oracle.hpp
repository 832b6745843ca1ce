#pragma once

#include <map>
#include <vector>

#include "policy.hpp"

namespace l2t::testing {

// Multivariate polynomial in p_0..p_{M-1}: exponent vector -> coefficient.
class Polynomial {
 public:
  explicit Polynomial(std::size_t vars) : vars_(vars) {}

  void add_monomial(const std::vector<int>& exponents, double coefficient) { terms_[exponents] += coefficient; }

  Polynomial derivative(std::size_t var) const {
    Polynomial d(vars_);
    for (const auto& [exp, coef] : terms_) {
      if (exp[var] == 0) continue;
      std::vector<int> e = exp;
      const int power = e[var]--;
      d.add_monomial(e, coef * power);
    }
    return d;
  }

  double evaluate(const std::vector<double>& p) const {
    double total = 0.0;
    for (const auto& [exp, coef] : terms_) {
      double term = coef;
      for (std::size_t v = 0; v < vars_; ++v) {
        for (int k = 0; k < exp[v]; ++k) term *= p[v];
      }
      total += term;
    }
    return total;
  }

 private:
  std::size_t vars_;
  std::map<std::vector<int>, double> terms_;
};

// (1/L) sum_l loss_l * prod_k p[phi_l[k]] differentiated symbolically.
inline std::vector<double> symbolic_policy_gradient(const SampledBatch& batch, const std::vector<double>& losses) {
  const std::size_t m = batch.p.size();
  Polynomial f(m);
  const double inv = 1.0 / static_cast<double>(batch.transformations.size());
  for (std::size_t l = 0; l < batch.transformations.size(); ++l) {
    std::vector<int> exp(m, 0);
    for (std::size_t op : batch.transformations[l].ops) ++exp[op];
    f.add_monomial(exp, losses[l] * inv);
  }
  std::vector<double> g(m);
  for (std::size_t v = 0; v < m; ++v) g[v] = f.derivative(v).evaluate(batch.p);
  return g;
}

}  // namespace l2t::testing
