#pragma once

// DHGNet and the homogeneous/relational baselines that share its scaffolding.
//
// Every model maps the graph to target-language embeddings. Layer 0 features
// come from the cross-lingual transform (trainable target rows, linearly
// mapped frozen source rows). Each layer then normalizes its input,
// aggregates, and adds the aggregate back onto its (un-normalized) input.
// A final LayerNorm produces the output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhgnet/graph.hpp"
#include "dhgnet/ingest.hpp"
#include "dhgnet/ops.hpp"
#include "dhgnet/tape.hpp"

namespace dhgnet {

enum class ModelKind { kDhgnet, kGcn, kGat, kRgcn, kNoDhgnet };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kDhgnet: return "dhgnet";
    case ModelKind::kGcn: return "gcn";
    case ModelKind::kGat: return "gat";
    case ModelKind::kRgcn: return "rgcn";
    case ModelKind::kNoDhgnet: return "no-dhgnet";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  for (ModelKind k : {ModelKind::kDhgnet, ModelKind::kGcn, ModelKind::kGat, ModelKind::kRgcn,
                      ModelKind::kNoDhgnet}) {
    if (s == model_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

struct HyperParams {
  std::size_t d = 300;
  std::size_t heads = 10;
  std::size_t d_out = 30;
  std::size_t layers = 2;
  double leaky_slope = 0.2;
  double layer_norm_eps = 1e-5;
  /// When false the self pair only acts as the attention key, unless a node
  /// has no dictionary pair at all.
  bool self_pair_participates = true;
  /// Dropout on each layer's aggregate during training. 0 disables it.
  double dropout = 0.0;

  void validate() const {
    if (d != heads * d_out) {
      throw std::invalid_argument("d must equal heads * d_out (" + std::to_string(d) + " vs " +
                                  std::to_string(heads) + "*" + std::to_string(d_out) + ")");
    }
    if (layers < 1) throw std::invalid_argument("at least one GNN layer is required");
    if (heads < 1 || d_out < 1) throw std::invalid_argument("heads and d_out must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (!(layer_norm_eps >= 0.0)) throw std::invalid_argument("layer_norm_eps must be non-negative");
  }
};

/// Gather/segment indices of one edge set, entries ordered by receiving node.
struct EdgeIndex {
  std::string key;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  Segments seg;
  /// Sorted endpoints of the edge set, and each edge's endpoints as
  /// positions into it.
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> local_src;
  std::vector<std::size_t> local_dst;

  std::size_t num_edges() const { return src.size(); }
  bool empty() const { return src.empty(); }
};

inline EdgeIndex make_edge_index(std::string key, std::size_t num_nodes,
                                 const std::vector<const PairAdjacency*>& adjs) {
  EdgeIndex idx;
  idx.key = std::move(key);
  idx.seg.num_outputs = num_nodes;
  for (NodeId t = 0; t < num_nodes; ++t) {
    std::vector<NodeId> in;
    for (const auto* a : adjs)
      for (std::size_t k = a->offsets[t]; k < a->offsets[t + 1]; ++k) in.push_back(a->in_neighbors[k]);
    if (in.empty()) continue;
    std::sort(in.begin(), in.end());
    for (NodeId s : in) {
      idx.src.push_back(s);
      idx.dst.push_back(t);
    }
    idx.seg.targets.push_back(t);
    idx.seg.offsets.push_back(idx.src.size());
  }
  std::vector<std::size_t> local(num_nodes, num_nodes);
  for (std::size_t e = 0; e < idx.src.size(); ++e) local[idx.src[e]] = local[idx.dst[e]] = 0;
  for (NodeId v = 0; v < num_nodes; ++v) {
    if (local[v] == num_nodes) continue;
    local[v] = idx.nodes.size();
    idx.nodes.push_back(v);
  }
  for (std::size_t e = 0; e < idx.src.size(); ++e) {
    idx.local_src.push_back(local[idx.src[e]]);
    idx.local_dst.push_back(local[idx.dst[e]]);
  }
  return idx;
}

struct SourceBlock {
  LanguageId language;
  std::vector<NodeId> nodes;
  Tensor features;  // nodes.size() x table dim, frozen
};

/// Everything forward needs from the graph and the frozen source tables.
struct GraphInputs {
  const DHG* graph = nullptr;
  std::size_t num_nodes = 0;
  std::size_t num_target = 0;
  std::vector<SourceBlock> blocks;
  /// Row of each node inside [target rows; block 0; block 1; ...].
  std::vector<std::size_t> stacked_row;
  /// One entry per registered pair (graph order), including edgeless pairs.
  std::vector<EdgeIndex> pairs;
  /// All pairs merged into one homogeneous edge set.
  EdgeIndex merged;

  std::size_t source_dim(const LanguageId& lang) const {
    for (const auto& b : blocks)
      if (b.language == lang) return b.features.cols();
    throw std::out_of_range("no source block for " + lang.code());
  }
};

/// Resolves every source node to its frozen vector. A source node without a
/// row in its language's table is an error.
inline GraphInputs prepare_inputs(const DHG& g, const std::vector<EmbeddingTable>& tables) {
  GraphInputs in;
  in.graph = &g;
  in.num_nodes = g.num_nodes();
  in.num_target = g.num_target_nodes();
  in.stacked_row.assign(in.num_nodes, 0);
  for (NodeId v = 0; v < in.num_target; ++v) in.stacked_row[v] = v;
  std::size_t next = in.num_target;
  for (const auto& lang : g.sources()) {
    const EmbeddingTable* table = nullptr;
    for (const auto& t : tables)
      if (t.language == lang) table = &t;
    SourceBlock block;
    block.language = lang;
    block.nodes = g.nodes_of(lang);
    if (!block.nodes.empty() && table == nullptr) {
      throw std::invalid_argument("no embedding table for source language " + lang.code());
    }
    const std::size_t dim = table ? table->dim : 1;
    block.features = Tensor(block.nodes.size(), dim);
    for (std::size_t i = 0; i < block.nodes.size(); ++i) {
      const auto& word = g.vocab().word(block.nodes[i]);
      auto row = table->find(word);
      if (!row) {
        throw std::invalid_argument("source word '" + word + "' (" + lang.code() +
                                    ") has no embedding");
      }
      std::copy(row->begin(), row->end(), block.features.row(i).begin());
      in.stacked_row[block.nodes[i]] = next++;
    }
    in.blocks.push_back(std::move(block));
  }
  std::vector<const PairAdjacency*> all;
  for (const auto& p : g.pairs()) {
    in.pairs.push_back(make_edge_index(p.pair.label(), in.num_nodes, {&p}));
    all.push_back(&p);
  }
  in.merged = make_edge_index("all", in.num_nodes, all);
  return in;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

namespace names {
inline std::string target_embeddings() { return "emb.target"; }
inline std::string transform(const LanguageId& l) { return "xform." + l.code(); }
inline std::string layer(std::size_t l) { return "l" + std::to_string(l); }
inline std::string head(std::size_t l, std::size_t k) { return layer(l) + ".h" + std::to_string(k); }
inline std::string pair_w(std::size_t l, std::size_t k, const std::string& pair) {
  return head(l, k) + "." + pair + ".W";
}
inline std::string pair_a(std::size_t l, std::size_t k, const std::string& pair) {
  return head(l, k) + "." + pair + ".a";
}
inline std::string lang_w1(std::size_t l, std::size_t k) { return head(l, k) + ".lang.W1"; }
inline std::string lang_w2(std::size_t l, std::size_t k) { return head(l, k) + ".lang.W2"; }
inline std::string lang_a1(std::size_t l, std::size_t k) { return head(l, k) + ".lang.a1"; }
inline std::string norm_gamma(std::size_t l) { return layer(l) + ".norm.gamma"; }
inline std::string norm_beta(std::size_t l) { return layer(l) + ".norm.beta"; }
inline std::string out_gamma() { return "out.norm.gamma"; }
inline std::string out_beta() { return "out.norm.beta"; }
inline std::string gcn_w(std::size_t l) { return layer(l) + ".gcn.W"; }
inline std::string gat_w(std::size_t l, std::size_t k) { return head(l, k) + ".gat.W"; }
inline std::string gat_a(std::size_t l, std::size_t k) { return head(l, k) + ".gat.a"; }
inline std::string rgcn_w(std::size_t l, const std::string& pair) { return layer(l) + ".rgcn." + pair + ".W"; }
inline std::string rgcn_self(std::size_t l) { return layer(l) + ".rgcn.self.W"; }
}  // namespace names

/// Independent generator for one initialization stream of a seed.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum : std::uint64_t { kStreamEmbedding = 1, kStreamGnn = 2, kStreamClassifier = 3, kStreamData = 4 };

inline Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

/// Parameters of `kind` on graph `in`. Target embeddings ~ N(0, 1/d) come from
/// their own stream so every kind (and the bypass control) starts from the
/// same rows for a given seed.
inline ParamStore init_model_params(ModelKind kind, const HyperParams& hp, const GraphInputs& in,
                                    std::uint64_t seed) {
  hp.validate();
  ParamStore p;
  {
    auto rng = stream_rng(seed, kStreamEmbedding);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(hp.d)));
    Tensor e(in.num_target, hp.d);
    for (double& v : e.values()) v = normal(rng);
    p.emplace(names::target_embeddings(), std::move(e));
  }
  if (kind == ModelKind::kNoDhgnet) return p;

  auto rng = stream_rng(seed, kStreamGnn);
  for (const auto& b : in.blocks) {
    p.emplace(names::transform(b.language), glorot(hp.d, b.features.cols(), rng));
  }
  for (std::size_t l = 0; l < hp.layers; ++l) {
    p.emplace(names::norm_gamma(l), Tensor(1, hp.d, 1.0));
    p.emplace(names::norm_beta(l), Tensor(1, hp.d, 0.0));
    switch (kind) {
      case ModelKind::kDhgnet:
        for (std::size_t k = 0; k < hp.heads; ++k) {
          for (const auto& e : in.pairs) {
            p.emplace(names::pair_w(l, k, e.key), glorot(hp.d_out, hp.d, rng));
            p.emplace(names::pair_a(l, k, e.key), glorot(2 * hp.d_out, 1, rng));
          }
          p.emplace(names::lang_w1(l, k), glorot(hp.d_out, hp.d_out, rng));
          p.emplace(names::lang_w2(l, k), glorot(hp.d_out, hp.d, rng));
          p.emplace(names::lang_a1(l, k), glorot(2 * hp.d_out, 1, rng));
        }
        break;
      case ModelKind::kGat:
        for (std::size_t k = 0; k < hp.heads; ++k) {
          p.emplace(names::gat_w(l, k), glorot(hp.d_out, hp.d, rng));
          p.emplace(names::gat_a(l, k), glorot(2 * hp.d_out, 1, rng));
        }
        break;
      case ModelKind::kGcn:
        p.emplace(names::gcn_w(l), glorot(hp.d, hp.d, rng));
        break;
      case ModelKind::kRgcn:
        for (const auto& e : in.pairs) p.emplace(names::rgcn_w(l, e.key), glorot(hp.d, hp.d, rng));
        p.emplace(names::rgcn_self(l), glorot(hp.d, hp.d, rng));
        break;
      case ModelKind::kNoDhgnet:
        break;
    }
  }
  p.emplace(names::out_gamma(), Tensor(1, hp.d, 1.0));
  p.emplace(names::out_beta(), Tensor(1, hp.d, 0.0));
  return p;
}

// ---------------------------------------------------------------------------
// Attention traces
// ---------------------------------------------------------------------------

/// Attention weights of one head in one layer.
struct HeadTrace {
  /// Word level: per pair key, one weight per edge in EdgeIndex order.
  std::map<std::string, Tensor> word_alpha;
  /// Language level: participants grouped by node (CSR over all nodes).
  Segments lang_seg;
  std::vector<std::string> lang_participant;  // pair key, or "self"
  Tensor lang_alpha;
};

struct ForwardTrace {
  std::vector<std::vector<HeadTrace>> layers;  // [layer][head]
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Layer-0 features of every node: target rows come straight from the
/// trainable table, source rows are W^lang * frozen vector.
inline Var cross_lingual_features(Tape& tape, const ParamStore& params, const GraphInputs& in) {
  std::vector<Var> parts{tape.param(params, names::target_embeddings())};
  for (const auto& b : in.blocks) {
    if (b.nodes.empty()) continue;
    Var w = tape.param(params, names::transform(b.language));
    parts.push_back(matmul_t(tape.constant(b.features), w));
  }
  Var stacked = parts.size() == 1 ? parts.front() : concat_rows(std::span<const Var>(parts));
  return row_select(stacked, in.stacked_row);
}

/// Layer-0 feature of a single node, without recording anything.
inline std::vector<double> cross_lingual_transform(const ParamStore& params, const GraphInputs& in,
                                                   NodeId node) {
  if (node >= in.num_nodes) throw std::out_of_range("node outside the graph");
  if (node < in.num_target) {
    auto row = params.at(names::target_embeddings()).row(node);
    return {row.begin(), row.end()};
  }
  for (const auto& b : in.blocks) {
    auto it = std::lower_bound(b.nodes.begin(), b.nodes.end(), node);
    if (it == b.nodes.end() || *it != node) continue;
    const Tensor& w = params.at(names::transform(b.language));
    auto x = b.features.row(static_cast<std::size_t>(it - b.nodes.begin()));
    std::vector<double> out(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) out[r] += w(r, c) * x[c];
    return out;
  }
  throw std::out_of_range("node has no feature source");
}

/// Attention aggregation over the in-neighbors of every receiving node:
///   h = W x,  alpha_{s,t} = softmax_s LeakyReLU(a^T [h_s || h_t]),
///   out_t = GELU(sum_s alpha_{s,t} h_s).
/// a^T [h_s || h_t] is evaluated as a_top^T h_s + a_bottom^T h_t, and h only
/// for nodes the edge set touches. Rows of nodes without in-neighbors are zero.
inline Var word_level_aggregate(Var features, Var w, Var a, const EdgeIndex& idx, double slope,
                                Tensor* alpha_out = nullptr) {
  if (a.rows() != 2 * w.rows() || a.cols() != 1) {
    throw ShapeError("attention vector must be (2*d_out) x 1, got " + a.value().shape_string());
  }
  if (idx.empty()) {
    if (alpha_out) *alpha_out = Tensor(0, 1);
    return gelu(scale(matmul_t(features, w), 0.0));
  }
  const std::size_t d_out = w.rows();
  std::vector<std::size_t> top(d_out), bottom(d_out);
  std::iota(top.begin(), top.end(), std::size_t{0});
  std::iota(bottom.begin(), bottom.end(), d_out);
  Var h = matmul_t(row_select(features, idx.nodes), w);
  Var score_src = matmul(h, row_select(a, std::move(top)));
  Var score_dst = matmul(h, row_select(a, std::move(bottom)));
  Var scores = leaky_relu(add(row_select(score_src, idx.local_src), row_select(score_dst, idx.local_dst)), slope);
  Var alpha = masked_segment_softmax(scores, idx.seg);
  if (alpha_out) *alpha_out = alpha.value();
  return gelu(segment_weighted_sum(h, idx.local_src, alpha, idx.seg));
}

/// Attention over a node's per-pair features plus its self pair:
///   o^r = W1 hbar^r,  o^self = W2 x,
///   alpha^r = softmax_r LeakyReLU(a1^T [o^r || o^self]),  out = GELU(sum_r alpha^r o^r).
/// `pair_features[i]` is the word-level output for `pair_indices[i]`.
inline Var language_level_aggregate(Var features, std::span<const Var> pair_features,
                                    std::span<const EdgeIndex* const> pair_indices, Var w1, Var w2,
                                    Var a1, double slope, bool self_participates,
                                    HeadTrace* trace = nullptr) {
  const std::size_t n = features.rows();
  Var o_self = matmul_t(features, w2);
  std::vector<Var> stack;
  std::vector<std::vector<bool>> receives;
  for (std::size_t i = 0; i < pair_features.size(); ++i) {
    stack.push_back(matmul_t(pair_features[i], w1));
    std::vector<bool> r(n, false);
    for (NodeId t : pair_indices[i]->seg.targets) r[t] = true;
    receives.push_back(std::move(r));
  }
  stack.push_back(o_self);
  const std::size_t self_block = pair_features.size();

  std::vector<std::size_t> rows;
  std::vector<std::size_t> keys;
  std::vector<std::string> labels;
  Segments seg;
  seg.num_outputs = n;
  for (NodeId t = 0; t < n; ++t) {
    bool any = false;
    for (std::size_t i = 0; i < pair_features.size(); ++i) {
      if (!receives[i][t]) continue;
      rows.push_back(i * n + t);
      keys.push_back(t);
      if (trace) labels.push_back(pair_indices[i]->key);
      any = true;
    }
    if (self_participates || !any) {
      rows.push_back(self_block * n + t);
      keys.push_back(t);
      if (trace) labels.push_back("self");
    }
    seg.targets.push_back(t);
    seg.offsets.push_back(rows.size());
  }
  Var all = stack.size() == 1 ? stack.front() : concat_rows(std::span<const Var>(stack));
  Var scores =
      leaky_relu(matmul(concat_cols({row_select(all, rows), row_select(o_self, keys)}), a1), slope);
  Var alpha = masked_segment_softmax(scores, seg);
  if (trace) {
    trace->lang_seg = seg;
    trace->lang_participant = std::move(labels);
    trace->lang_alpha = alpha.value();
  }
  return gelu(segment_weighted_sum(all, std::move(rows), alpha, seg));
}

// ---------------------------------------------------------------------------
// Per-layer aggregation for each model kind
// ---------------------------------------------------------------------------

inline Var dhgnet_layer(Tape& tape, const ParamStore& params, const HyperParams& hp,
                        const GraphInputs& in, std::size_t layer, Var x,
                        std::vector<HeadTrace>* trace) {
  std::vector<Var> heads;
  for (std::size_t k = 0; k < hp.heads; ++k) {
    HeadTrace* ht = nullptr;
    if (trace) ht = &trace->emplace_back();
    std::vector<Var> feats;
    std::vector<const EdgeIndex*> used;
    for (const auto& e : in.pairs) {
      if (e.empty()) continue;
      Tensor* alpha = ht ? &ht->word_alpha[e.key] : nullptr;
      feats.push_back(word_level_aggregate(x, tape.param(params, names::pair_w(layer, k, e.key)),
                                           tape.param(params, names::pair_a(layer, k, e.key)), e,
                                           hp.leaky_slope, alpha));
      used.push_back(&e);
    }
    heads.push_back(language_level_aggregate(
        x, feats, used, tape.param(params, names::lang_w1(layer, k)),
        tape.param(params, names::lang_w2(layer, k)), tape.param(params, names::lang_a1(layer, k)),
        hp.leaky_slope, hp.self_pair_participates, ht));
  }
  return heads.size() == 1 ? heads.front() : concat_cols(std::span<const Var>(heads));
}

inline Var gat_layer(Tape& tape, const ParamStore& params, const HyperParams& hp,
                     const GraphInputs& in, std::size_t layer, Var x, std::vector<HeadTrace>* trace) {
  std::vector<Var> heads;
  for (std::size_t k = 0; k < hp.heads; ++k) {
    Tensor* alpha = nullptr;
    if (trace) alpha = &trace->emplace_back().word_alpha[in.merged.key];
    heads.push_back(word_level_aggregate(x, tape.param(params, names::gat_w(layer, k)),
                                         tape.param(params, names::gat_a(layer, k)), in.merged,
                                         hp.leaky_slope, alpha));
  }
  return heads.size() == 1 ? heads.front() : concat_cols(std::span<const Var>(heads));
}

/// GCN with self loops and symmetric normalization 1/sqrt((deg_t+1)(deg_s+1)),
/// where deg is the in-degree over all pairs.
inline Var gcn_layer(Tape& tape, const ParamStore& params, const GraphInputs& in,
                     std::size_t layer, Var x) {
  const std::size_t n = in.num_nodes;
  std::vector<double> deg(n, 0.0);
  for (std::size_t t : in.merged.dst) deg[t] += 1.0;
  std::vector<std::size_t> gather;
  std::vector<double> weights;
  Segments seg;
  seg.num_outputs = n;
  std::size_t e = 0;
  for (NodeId t = 0; t < n; ++t) {
    gather.push_back(t);
    weights.push_back(1.0 / (deg[t] + 1.0));
    while (e < in.merged.dst.size() && in.merged.dst[e] == t) {
      const std::size_t s = in.merged.src[e];
      gather.push_back(s);
      weights.push_back(1.0 / std::sqrt((deg[t] + 1.0) * (deg[s] + 1.0)));
      ++e;
    }
    seg.targets.push_back(t);
    seg.offsets.push_back(gather.size());
  }
  Var h = matmul_t(x, tape.param(params, names::gcn_w(layer)));
  Var w = tape.constant(Tensor::column(std::move(weights)));
  return gelu(segment_weighted_sum(h, std::move(gather), w, seg));
}

/// RGCN: sum over pairs of W^r-transformed in-neighbors, normalized by the
/// node's total in-degree, plus a self-connection.
inline Var rgcn_layer(Tape& tape, const ParamStore& params, const GraphInputs& in,
                      std::size_t layer, Var x) {
  const std::size_t n = in.num_nodes;
  std::vector<double> deg(n, 0.0);
  for (std::size_t t : in.merged.dst) deg[t] += 1.0;
  Var acc = matmul_t(x, tape.param(params, names::rgcn_self(layer)));
  for (const auto& e : in.pairs) {
    if (e.empty()) continue;
    std::vector<double> w(e.num_edges());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / deg[e.dst[i]];
    Var h = matmul_t(x, tape.param(params, names::rgcn_w(layer, e.key)));
    acc = add(acc, segment_weighted_sum(h, e.src, tape.constant(Tensor::column(std::move(w))),
                                        e.seg));
  }
  return gelu(acc);
}

// ---------------------------------------------------------------------------
// Full forward
// ---------------------------------------------------------------------------

struct ForwardOptions {
  /// Generator for dropout masks; null means evaluation (no dropout).
  std::mt19937_64* dropout_rng = nullptr;
  ForwardTrace* trace = nullptr;
  /// Node states after every layer (index 0 = cross-lingual features), all languages.
  std::vector<Tensor>* states = nullptr;
};

/// Target-language embeddings (num_target x d) produced by `kind`.
inline Var model_forward(Tape& tape, const ParamStore& params, ModelKind kind, const HyperParams& hp,
                         const GraphInputs& in, const ForwardOptions& opt = {}) {
  hp.validate();
  if (kind == ModelKind::kNoDhgnet) return tape.param(params, names::target_embeddings());

  Var x = cross_lingual_features(tape, params, in);
  if (x.cols() != hp.d) throw ShapeError("target embedding width differs from d");
  if (opt.states) opt.states->push_back(x.value());
  if (opt.trace) opt.trace->layers.assign(hp.layers, {});
  for (std::size_t l = 0; l < hp.layers; ++l) {
    Var xn = layer_norm(x, hp.layer_norm_eps, tape.param(params, names::norm_gamma(l)),
                        tape.param(params, names::norm_beta(l)));
    std::vector<HeadTrace>* trace = opt.trace ? &opt.trace->layers[l] : nullptr;
    Var agg;
    switch (kind) {
      case ModelKind::kDhgnet: agg = dhgnet_layer(tape, params, hp, in, l, xn, trace); break;
      case ModelKind::kGat: agg = gat_layer(tape, params, hp, in, l, xn, trace); break;
      case ModelKind::kGcn: agg = gcn_layer(tape, params, in, l, xn); break;
      case ModelKind::kRgcn: agg = rgcn_layer(tape, params, in, l, xn); break;
      case ModelKind::kNoDhgnet: break;
    }
    if (agg.cols() != hp.d) throw ShapeError("layer output width differs from d");
    if (opt.dropout_rng && hp.dropout > 0.0) {
      std::bernoulli_distribution keep(1.0 - hp.dropout);
      Tensor mask(agg.rows(), agg.cols());
      for (double& m : mask.values()) m = keep(*opt.dropout_rng) ? 1.0 / (1.0 - hp.dropout) : 0.0;
      agg = mask_mul(agg, std::move(mask));
    }
    x = add(agg, x);
    if (opt.states) opt.states->push_back(x.value());
  }
  Var out = layer_norm(x, hp.layer_norm_eps, tape.param(params, names::out_gamma()),
                       tape.param(params, names::out_beta()));
  std::vector<std::size_t> target_rows(in.num_target);
  std::iota(target_rows.begin(), target_rows.end(), std::size_t{0});
  return row_select(out, std::move(target_rows));
}

}  // namespace dhgnet
