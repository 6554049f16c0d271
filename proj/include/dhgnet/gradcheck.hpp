#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dhgnet/tape.hpp"

namespace dhgnet {

/// Scalar objective built on a fresh tape from the current parameter values.
/// It must register parameters through `tape.param(store, name)`.
using Objective = std::function<Var(Tape&, const ParamStore&)>;

struct FdOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
};

struct FdCoordinate {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

struct FdReport {
  std::vector<FdCoordinate> coords;
  double max_error = 0.0;
  bool pass = true;
};

inline double evaluate_objective(const Objective& f, const ParamStore& params) {
  Tape tape(false);
  return f(tape, params).value()[0];
}

/// Compares reverse-mode gradients with central differences on randomly
/// sampled coordinates. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
/// When the model has fewer coordinates than `samples`, every coordinate is checked.
inline FdReport fd_check(const Objective& f, ParamStore params, const FdOptions& opt = {}) {
  Gradients analytic;
  {
    Tape tape;
    analytic = tape.backward(f(tape, params));
  }
  std::vector<std::pair<std::string, std::size_t>> all;
  for (const auto& [name, t] : params)
    for (std::size_t i = 0; i < t.size(); ++i) all.emplace_back(name, i);

  std::vector<std::pair<std::string, std::size_t>> picked;
  if (all.size() <= opt.samples) {
    picked = all;
  } else {
    std::mt19937_64 rng(opt.seed);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), opt.samples, rng);
  }

  FdReport report;
  for (const auto& [name, idx] : picked) {
    Tensor& target = params.at(name);
    const double orig = target[idx];
    target[idx] = orig + opt.step;
    const double up = evaluate_objective(f, params);
    target[idx] = orig - opt.step;
    const double down = evaluate_objective(f, params);
    target[idx] = orig;
    FdCoordinate c;
    c.param = name;
    c.index = idx;
    auto g = analytic.find(name);
    c.analytic = g == analytic.end() ? 0.0 : g->second[idx];
    c.numeric = (up - down) / (2.0 * opt.step);
    c.error = std::abs(c.analytic - c.numeric) / std::max(1.0, std::abs(c.analytic));
    report.max_error = std::max(report.max_error, c.error);
    report.coords.push_back(std::move(c));
  }
  report.pass = report.max_error <= opt.tolerance;
  return report;
}

}  // namespace dhgnet
