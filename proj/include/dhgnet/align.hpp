#pragma once

// Optional pre-alignment of the cross-lingual transforms and the target table:
// translations should be closer (in cosine) than random target words.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dhgnet/model.hpp"
#include "dhgnet/ops.hpp"
#include "dhgnet/optim.hpp"

namespace dhgnet {

struct ContrastiveOptions {
  double margin = 0.5;
  std::size_t negatives = 5;
  std::size_t steps = 100;
  AdamOptions adam{.lr = 1e-2};
  std::uint64_t seed = 0;
};

/// (source node, target node) for every translation edge in either
/// direction, deduplicated and sorted.
inline std::vector<std::pair<NodeId, NodeId>> translation_edges(const GraphInputs& in) {
  std::set<std::pair<NodeId, NodeId>> out;
  for (const auto& e : in.pairs) {
    for (std::size_t i = 0; i < e.num_edges(); ++i) {
      const NodeId s = e.src[i];
      const NodeId t = e.dst[i];
      if (t < in.num_target && s >= in.num_target) out.emplace(s, t);
      if (s < in.num_target && t >= in.num_target) out.emplace(t, s);
    }
  }
  return {out.begin(), out.end()};
}

/// sum over edges (s,t) and their negatives n of
/// max(0, margin - cos(x_s, x_t) + cos(x_s, x_n)).
/// `negatives` holds k entries per edge, edge-major.
inline Var contrastive_loss(Var features, const std::vector<std::pair<NodeId, NodeId>>& edges,
                            const std::vector<NodeId>& negatives, double margin) {
  if (edges.empty()) throw std::invalid_argument("contrastive loss needs at least one edge");
  if (negatives.size() % edges.size() != 0) throw std::invalid_argument("negatives not edge-major");
  const std::size_t k = negatives.size() / edges.size();
  std::vector<std::size_t> anchor, positive;
  for (const auto& [s, t] : edges) {
    for (std::size_t j = 0; j < k; ++j) {
      anchor.push_back(s);
      positive.push_back(t);
    }
  }
  Tape& tape = *features.tape();
  Var a = row_select(features, anchor);
  Var pos = rowwise_cosine(a, row_select(features, positive));
  Var neg = rowwise_cosine(a, row_select(features, negatives));
  Var margin_col = tape.constant(Tensor(anchor.size(), 1, margin));
  Var hinge = leaky_relu(add(add(margin_col, scale(pos, -1.0)), neg), 0.0);
  return sum_all(hinge);
}

/// Draws k target-language negatives per edge, never the edge's own target.
inline std::vector<NodeId> sample_negatives(const std::vector<std::pair<NodeId, NodeId>>& edges,
                                            std::size_t num_target, std::size_t k,
                                            std::mt19937_64& rng) {
  if (k >= num_target) {
    throw std::invalid_argument("negatives per edge must be smaller than the target vocabulary");
  }
  std::uniform_int_distribution<NodeId> pick(0, num_target - 2);
  std::vector<NodeId> out;
  out.reserve(edges.size() * k);
  for (const auto& e : edges) {
    for (std::size_t j = 0; j < k; ++j) {
      NodeId n = pick(rng);
      if (n >= e.second) ++n;
      out.push_back(n);
    }
  }
  return out;
}

/// Runs `steps` Adam updates of the contrastive loss on the target table
/// and the cross-lingual transforms only. Returns the loss before each step.
inline std::vector<double> contrastive_align(const GraphInputs& in, ParamStore& params,
                                             const ContrastiveOptions& opt) {
  const auto edges = translation_edges(in);
  if (opt.negatives >= in.num_target) {
    throw std::invalid_argument("negatives per edge must be smaller than the target vocabulary");
  }
  std::vector<double> history;
  if (edges.empty()) return history;

  ParamStore trainable;
  trainable.emplace(names::target_embeddings(), params.at(names::target_embeddings()));
  for (const auto& b : in.blocks) {
    if (auto it = params.find(names::transform(b.language)); it != params.end()) {
      trainable.emplace(it->first, it->second);
    }
  }
  AdamState adam;
  auto rng = stream_rng(opt.seed, 6);
  for (std::size_t step = 0; step < opt.steps; ++step) {
    Tape tape;
    Var x = cross_lingual_features(tape, trainable, in);
    Var loss = contrastive_loss(x, edges, sample_negatives(edges, in.num_target, opt.negatives, rng),
                                opt.margin);
    history.push_back(loss.value()[0]);
    adam_step(adam, trainable, tape.backward(loss), opt.adam);
  }
  for (auto& [name, t] : trainable) params.at(name) = t;
  return history;
}

/// Mean cosine over translation edges and over random (source, target) pairs
/// of the layer-0 features.
struct AlignmentStats {
  double translation_cosine = 0.0;
  double random_cosine = 0.0;
};

inline AlignmentStats alignment_stats(const GraphInputs& in, const ParamStore& params,
                                      std::uint64_t seed = 0) {
  const auto edges = translation_edges(in);
  AlignmentStats s;
  if (edges.empty() || in.num_target < 2) return s;
  Tape tape(false);
  Var x = cross_lingual_features(tape, params, in);
  std::vector<std::size_t> a, b, r;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<NodeId> pick(0, in.num_target - 1);
  for (const auto& [src, tgt] : edges) {
    a.push_back(src);
    b.push_back(tgt);
    r.push_back(pick(rng));
  }
  Var rows = row_select(x, a);
  Var pos = rowwise_cosine(rows, row_select(x, b));
  Var rnd = rowwise_cosine(rows, row_select(x, r));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    s.translation_cosine += pos.value()[i];
    s.random_cosine += rnd.value()[i];
  }
  s.translation_cosine /= static_cast<double>(edges.size());
  s.random_cosine /= static_cast<double>(edges.size());
  return s;
}

}  // namespace dhgnet
