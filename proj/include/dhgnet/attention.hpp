#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhgnet/classifier.hpp"
#include "dhgnet/model.hpp"

namespace dhgnet {

struct NeighborWeight {
  std::string pair;
  std::string neighbor;
  double alpha = 0.0;
};

/// Last-layer attention of one target word, averaged over heads.
struct WordAttention {
  NodeId node = 0;
  std::string word;
  std::vector<NeighborWeight> neighbors;      // alpha descending
  std::map<std::string, double> pair_weights;  // language level, incl. "self"
};

/// Word-level and language-level weights for every target node that has
/// at least one dictionary neighbor (DHGNet), or every neighbor weight (GAT).
/// Other model kinds carry no attention and yield an empty report.
inline std::vector<WordAttention> attention_report(const Model& m, const ParamStore& params,
                                                   std::size_t top_k = 0) {
  std::vector<WordAttention> out;
  const ModelKind kind = m.effective_kind();
  if (kind != ModelKind::kDhgnet && kind != ModelKind::kGat) return out;
  const GraphInputs& in = *m.inputs;
  const Vocabulary& vocab = in.graph->vocab();

  ForwardTrace trace;
  {
    Tape tape(false);
    ForwardOptions fo;
    fo.trace = &trace;
    model_forward(tape, params, kind, m.hyper, in, fo);
  }
  const auto& heads = trace.layers.back();
  const double inv_heads = 1.0 / static_cast<double>(heads.size());

  std::vector<const EdgeIndex*> indices;
  if (kind == ModelKind::kDhgnet) {
    for (const auto& e : in.pairs) indices.push_back(&e);
  } else {
    indices.push_back(&in.merged);
  }

  std::map<NodeId, WordAttention> by_node;
  for (const EdgeIndex* idx : indices) {
    if (idx->empty()) continue;
    for (std::size_t s = 0; s < idx->seg.num_segments(); ++s) {
      const NodeId t = idx->seg.targets[s];
      if (t >= in.num_target) continue;
      WordAttention& wa = by_node[t];
      wa.node = t;
      wa.word = vocab.word(t);
      for (std::size_t e = idx->seg.offsets[s]; e < idx->seg.offsets[s + 1]; ++e) {
        double alpha = 0.0;
        for (const auto& h : heads) alpha += h.word_alpha.at(idx->key)[e] * inv_heads;
        const NodeId src = idx->src[e];
        wa.neighbors.push_back({kind == ModelKind::kDhgnet ? idx->key : vocab.language(src).code() +
                                                                            ">" + in.graph->target().code(),
                                vocab.word(src), alpha});
      }
    }
  }
  if (kind == ModelKind::kDhgnet) {
    for (auto& [t, wa] : by_node) {
      for (const auto& h : heads) {
        for (std::size_t e = h.lang_seg.offsets[t]; e < h.lang_seg.offsets[t + 1]; ++e) {
          wa.pair_weights[h.lang_participant[e]] += h.lang_alpha[e] * inv_heads;
        }
      }
    }
  }
  for (auto& [t, wa] : by_node) {
    std::stable_sort(wa.neighbors.begin(), wa.neighbors.end(),
                     [](const auto& a, const auto& b) { return a.alpha > b.alpha; });
    if (top_k > 0 && wa.neighbors.size() > top_k) wa.neighbors.resize(top_k);
    out.push_back(std::move(wa));
  }
  return out;
}

/// One JSON object per (word, pair, neighbor) and per (word, language pair).
inline void write_attention_jsonl(std::ostream& os, const std::vector<WordAttention>& report) {
  for (const auto& wa : report) {
    for (const auto& n : wa.neighbors) {
      nlohmann::json j{{"word", wa.word}, {"pair", n.pair}, {"neighbor", n.neighbor}, {"alpha", n.alpha}};
      os << j.dump() << '\n';
    }
    for (const auto& [pair, w] : wa.pair_weights) {
      nlohmann::json j{{"word", wa.word}, {"pair", pair}, {"language_alpha", w}};
      os << j.dump() << '\n';
    }
  }
}

/// Mean language-level weight of each participant over all reported words.
inline std::map<std::string, double> mean_pair_weights(const std::vector<WordAttention>& report) {
  std::map<std::string, double> sum;
  std::map<std::string, std::size_t> count;
  for (const auto& wa : report) {
    for (const auto& [pair, w] : wa.pair_weights) {
      sum[pair] += w;
      ++count[pair];
    }
  }
  for (auto& [pair, s] : sum) s /= static_cast<double>(count[pair]);
  return sum;
}

}  // namespace dhgnet
