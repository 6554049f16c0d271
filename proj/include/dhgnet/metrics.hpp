#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dhgnet {

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Accuracy and macro-F1 over classes [0, num_classes). A class with no
/// true positives, false positives or false negatives scores F1 = 0.
inline Metrics classification_metrics(std::span<const std::size_t> predicted,
                                      std::span<const std::size_t> gold, std::size_t num_classes) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("prediction/label count mismatch");
  if (gold.empty()) throw std::invalid_argument("cannot evaluate an empty split");
  if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::size_t p = predicted[i];
    const std::size_t g = gold[i];
    if (p >= num_classes || g >= num_classes) throw std::invalid_argument("class index out of range");
    if (p == g) {
      ++correct;
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom > 0) f1_sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  m.macro_f1 = f1_sum / static_cast<double>(num_classes);
  return m;
}

}  // namespace dhgnet
