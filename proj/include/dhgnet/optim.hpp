#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "dhgnet/tape.hpp"
#include "dhgnet/tensor.hpp"

namespace dhgnet {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates and step count of a bias-corrected Adam optimizer.
struct AdamState {
  std::map<std::string, Tensor> first;
  std::map<std::string, Tensor> second;
  std::uint64_t step = 0;
};

/// One Adam update over every parameter in `params`. Parameters without an
/// entry in `grads` are treated as having zero gradient.
inline void adam_step(AdamState& state, ParamStore& params, const Gradients& grads,
                      const AdamOptions& opt) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("adam_step: gradient for unknown parameter " + name);
    it->second.require_same_shape(g, "adam_step");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto& [name, p] : params) {
    auto [m_it, m_new] = state.first.try_emplace(name, p.rows(), p.cols());
    auto [v_it, v_new] = state.second.try_emplace(name, p.rows(), p.cols());
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    m.require_same_shape(p, "adam_step state");
    const auto g_it = grads.find(name);
    const Tensor* g = g_it == grads.end() ? nullptr : &g_it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

}  // namespace dhgnet
