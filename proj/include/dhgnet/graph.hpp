#pragma once

// Dictionary-based heterogeneous graph: words of every language are nodes,
// each dictionary translation v2 in D^{li->lj}(v1) is a directed edge
// (v1, v2) filed under the ordered language pair (li, lj). Only pairs that
// touch the target language are materialized.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dhgnet/ingest.hpp"

namespace dhgnet {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LanguagePair {
  LanguageId src;
  LanguageId dst;

  std::string label() const { return src.code() + ">" + dst.code(); }
  friend auto operator<=>(const LanguagePair&, const LanguagePair&) = default;
};

/// In-adjacency of one language pair in CSR form over all graph nodes.
struct PairAdjacency {
  LanguagePair pair;
  std::vector<std::size_t> offsets;  // num_nodes + 1
  std::vector<NodeId> in_neighbors;  // sorted within each node

  std::size_t num_edges() const { return in_neighbors.size(); }
};

/// Non-owning view of one bilingual subgraph. Valid while the parent graph lives.
class BilingualSubgraphView {
 public:
  explicit BilingualSubgraphView(const PairAdjacency& adj) : adj_(&adj) {}

  const LanguagePair& pair() const { return adj_->pair; }
  std::size_t num_nodes() const { return adj_->offsets.size() - 1; }
  std::size_t num_edges() const { return adj_->num_edges(); }

  std::span<const NodeId> in_neighbors(NodeId t) const {
    return {adj_->in_neighbors.data() + adj_->offsets[t], adj_->offsets[t + 1] - adj_->offsets[t]};
  }

  std::size_t in_degree(NodeId t) const { return adj_->offsets[t + 1] - adj_->offsets[t]; }

  /// Nodes with at least one in-neighbor, ascending.
  std::vector<NodeId> receivers() const {
    std::vector<NodeId> out;
    for (NodeId t = 0; t < num_nodes(); ++t)
      if (in_degree(t) > 0) out.push_back(t);
    return out;
  }

 private:
  const PairAdjacency* adj_;
};

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

class DHG {
 public:
  /// Assembles a graph from explicit parts and checks every invariant:
  /// target-language nodes occupy ids [0, n_target), edge endpoints match the
  /// pair's languages, every pair contains the target, and pairs are distinct.
  /// Duplicate edges are merged.
  DHG(Vocabulary vocab, LanguageId target, std::vector<LanguageId> sources,
      std::vector<std::pair<LanguagePair, EdgeList>> pair_edges, std::size_t num_corpus_nodes = 0)
      : vocab_(std::move(vocab)), target_(std::move(target)), sources_(std::move(sources)) {
    std::set<LanguageId> langs(sources_.begin(), sources_.end());
    if (langs.size() != sources_.size()) throw GraphError("duplicate source language");
    if (langs.contains(target_)) throw GraphError("target language listed as a source");
    langs.insert(target_);

    num_target_ = 0;
    bool seen_other = false;
    for (NodeId v = 0; v < vocab_.size(); ++v) {
      const auto& lang = vocab_.language(v);
      if (!langs.contains(lang)) throw GraphError("node language '" + lang.code() + "' not in run");
      if (lang == target_) {
        if (seen_other) throw GraphError("target-language nodes must precede source nodes");
        ++num_target_;
      } else {
        seen_other = true;
      }
    }
    num_corpus_ = std::min(num_corpus_nodes, num_target_);

    std::set<LanguagePair> seen_pairs;
    const std::size_t n = vocab_.size();
    for (auto& [pair, edges] : pair_edges) {
      if (pair.src == pair.dst) throw GraphError("pair " + pair.label() + " is not bilingual");
      if (pair.src != target_ && pair.dst != target_) {
        throw GraphError("pair " + pair.label() + " does not contain the target language");
      }
      if (!langs.contains(pair.src) || !langs.contains(pair.dst)) {
        throw GraphError("pair " + pair.label() + " uses a language outside the run");
      }
      if (!seen_pairs.insert(pair).second) throw GraphError("duplicate pair " + pair.label());
      for (const auto& [s, t] : edges) {
        if (s >= n || t >= n) throw GraphError("edge endpoint out of range");
        if (vocab_.language(s) != pair.src || vocab_.language(t) != pair.dst) {
          throw GraphError("edge language mismatch in pair " + pair.label());
        }
      }
      std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
      });
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      PairAdjacency adj;
      adj.pair = pair;
      adj.offsets.assign(n + 1, 0);
      for (const auto& e : edges) ++adj.offsets[e.second + 1];
      for (std::size_t i = 0; i < n; ++i) adj.offsets[i + 1] += adj.offsets[i];
      adj.in_neighbors.reserve(edges.size());
      for (const auto& e : edges) adj.in_neighbors.push_back(e.first);
      pairs_.push_back(std::move(adj));
    }
  }

  const Vocabulary& vocab() const { return vocab_; }
  const LanguageId& target() const { return target_; }
  const std::vector<LanguageId>& sources() const { return sources_; }
  std::size_t num_nodes() const { return vocab_.size(); }
  std::size_t num_target_nodes() const { return num_target_; }
  std::size_t num_corpus_nodes() const { return num_corpus_; }
  const std::vector<PairAdjacency>& pairs() const { return pairs_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  bool has_pair(const LanguagePair& p) const {
    return std::any_of(pairs_.begin(), pairs_.end(), [&](const auto& a) { return a.pair == p; });
  }

  BilingualSubgraphView subgraph(const LanguagePair& p) const {
    for (const auto& adj : pairs_)
      if (adj.pair == p) return BilingualSubgraphView(adj);
    throw GraphError("unknown language pair " + p.label());
  }

  std::size_t num_edges() const {
    std::size_t e = 0;
    for (const auto& p : pairs_) e += p.num_edges();
    return e;
  }

  std::vector<NodeId> nodes_of(const LanguageId& lang) const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < vocab_.size(); ++v)
      if (vocab_.language(v) == lang) out.push_back(v);
    return out;
  }

 private:
  Vocabulary vocab_;
  LanguageId target_;
  std::vector<LanguageId> sources_;
  std::vector<PairAdjacency> pairs_;
  std::size_t num_target_ = 0;
  std::size_t num_corpus_ = 0;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Builds the graph for a target vocabulary (every entry must be a
/// target-language word; ids are preserved) plus the given dictionaries.
///
/// Up to `common_word_limit` extra target words that occur in the
/// dictionaries are added, most frequent first, ties broken by byte order.
/// Source nodes are the source words one dictionary hop away from the
/// target node set, added per language in byte order.
inline DHG build_dhg(const Vocabulary& corpus_vocab, const LanguageId& target,
                     std::vector<LanguageId> sources, const std::vector<BilingualDictionary>& dicts,
                     std::size_t common_word_limit = 0) {
  std::sort(sources.begin(), sources.end());
  std::set<LanguageId> source_set(sources.begin(), sources.end());
  std::vector<std::string> warnings;

  for (const auto& e : corpus_vocab.entries()) {
    if (e.language != target) throw GraphError("corpus vocabulary holds a non-target word");
  }
  std::vector<const BilingualDictionary*> usable;
  for (const auto& d : dicts) {
    const bool src_known = d.src == target || source_set.contains(d.src);
    const bool dst_known = d.dst == target || source_set.contains(d.dst);
    if (!src_known || !dst_known) {
      throw GraphError("dictionary " + d.src.code() + ">" + d.dst.code() +
                       " uses a language outside the run");
    }
    if (d.src != target && d.dst != target) {
      warnings.push_back("ignoring source-source dictionary " + d.src.code() + ">" + d.dst.code());
      continue;
    }
    usable.push_back(&d);
  }
  for (const auto& s : sources) {
    bool to_target = false, from_target = false;
    for (const auto* d : usable) {
      to_target = to_target || (d->src == s && d->dst == target);
      from_target = from_target || (d->src == target && d->dst == s);
    }
    if (!to_target) warnings.push_back("missing dictionary " + s.code() + ">" + target.code());
    if (!from_target) warnings.push_back("missing dictionary " + target.code() + ">" + s.code());
  }

  Vocabulary vocab = corpus_vocab;
  const std::size_t num_corpus = corpus_vocab.size();

  if (common_word_limit > 0) {
    std::map<std::string, std::size_t> freq;
    for (const auto* d : usable) {
      for (const auto& [head, trans] : d->entries) {
        if (d->src == target) ++freq[head];
        if (d->dst == target)
          for (const auto& w : trans) ++freq[w];
      }
    }
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [w, f] : freq)
      if (!vocab.contains(target, w)) ranked.emplace_back(f, w);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t take = std::min(common_word_limit, ranked.size());
    for (std::size_t i = 0; i < take; ++i) vocab.add(target, ranked[i].second);
  }

  for (const auto& s : sources) {
    std::set<std::string> reachable;
    for (const auto* d : usable) {
      if (d->src == target && d->dst == s) {
        for (const auto& [head, trans] : d->entries)
          if (vocab.contains(target, head)) reachable.insert(trans.begin(), trans.end());
      } else if (d->src == s && d->dst == target) {
        for (const auto& [head, trans] : d->entries) {
          if (std::any_of(trans.begin(), trans.end(),
                          [&](const std::string& w) { return vocab.contains(target, w); })) {
            reachable.insert(head);
          }
        }
      }
    }
    for (const auto& w : reachable) vocab.add(s, w);
  }

  std::vector<std::pair<LanguagePair, EdgeList>> pair_edges;
  for (const auto& s : sources) {
    for (const LanguagePair& p : {LanguagePair{s, target}, LanguagePair{target, s}}) {
      EdgeList edges;
      for (const auto* d : usable) {
        if (d->src != p.src || d->dst != p.dst) continue;
        for (const auto& [head, trans] : d->entries) {
          auto hv = vocab.find(p.src, head);
          if (!hv) continue;
          for (const auto& w : trans)
            if (auto tv = vocab.find(p.dst, w)) edges.emplace_back(*hv, *tv);
        }
      }
      pair_edges.emplace_back(p, std::move(edges));
    }
  }
  DHG g(std::move(vocab), target, sources, std::move(pair_edges), num_corpus);
  for (auto& w : warnings) g.add_warning(std::move(w));
  return g;
}

/// Drops dictionary words that a language cannot embed: translations into a
/// source language and source head words are kept only when `tables` holds
/// a vector for them. Target-language words are never filtered.
inline std::vector<BilingualDictionary> restrict_to_embeddings(
    const std::vector<BilingualDictionary>& dicts, const std::vector<EmbeddingTable>& tables) {
  auto has = [&](const LanguageId& lang, const std::string& w) {
    for (const auto& t : tables)
      if (t.language == lang) return t.index.contains(w);
    return true;
  };
  std::vector<BilingualDictionary> out;
  for (const auto& d : dicts) {
    BilingualDictionary r;
    r.src = d.src;
    r.dst = d.dst;
    for (const auto& [head, trans] : d.entries) {
      if (!has(d.src, head)) continue;
      std::vector<std::string> kept;
      for (const auto& w : trans)
        if (has(d.dst, w)) kept.push_back(w);
      if (!kept.empty()) r.entries.emplace_back(head, std::move(kept));
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise injection
// ---------------------------------------------------------------------------

/// Adds ceil(rate * |pairs(D)|) wrong (head, translation) pairs to every
/// dictionary. Heads are drawn uniformly from existing heads; translations
/// uniformly from `dst_vocab[D.dst]` minus the head's current translations.
/// Existing pairs are never removed or duplicated.
inline std::vector<BilingualDictionary> inject_noise(
    std::vector<BilingualDictionary> dicts, double rate, std::uint64_t seed,
    const std::map<LanguageId, std::vector<std::string>>& dst_vocab) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("noise rate must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  for (auto& d : dicts) {
    const std::size_t pairs = d.pair_count();
    const auto want = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(pairs) - 1e-9));
    if (want == 0 || d.entries.empty()) continue;
    auto vit = dst_vocab.find(d.dst);
    if (vit == dst_vocab.end() || vit->second.empty()) {
      throw std::invalid_argument("no vocabulary for noise language " + d.dst.code());
    }
    const auto& pool = vit->second;
    std::vector<std::unordered_set<std::string>> present;
    for (const auto& e : d.entries) present.emplace_back(e.second.begin(), e.second.end());

    std::uniform_int_distribution<std::size_t> pick_head(0, d.entries.size() - 1);
    std::size_t added = 0;
    std::size_t failures = 0;
    while (added < want) {
      const std::size_t h = pick_head(rng);
      if (present[h].size() >= pool.size()) {
        if (++failures > 64 * d.entries.size()) {
          throw std::invalid_argument("dictionary " + d.src.code() + ">" + d.dst.code() +
                                      " cannot absorb the requested noise");
        }
        continue;
      }
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (!present[h].contains(pool[i])) candidates.push_back(i);
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      const std::string& w = pool[candidates[pick(rng)]];
      present[h].insert(w);
      d.entries[h].second.push_back(w);
      ++added;
    }
  }
  return dicts;
}

/// Noise injection with each language's vocabulary taken as every word the
/// dictionaries mention for it, in byte order.
inline std::vector<BilingualDictionary> inject_noise(std::vector<BilingualDictionary> dicts,
                                                     double rate, std::uint64_t seed) {
  std::map<LanguageId, std::set<std::string>> words;
  for (const auto& d : dicts) {
    for (const auto& [head, trans] : d.entries) {
      words[d.src].insert(head);
      words[d.dst].insert(trans.begin(), trans.end());
    }
  }
  std::map<LanguageId, std::vector<std::string>> pools;
  for (auto& [lang, ws] : words) pools.emplace(lang, std::vector<std::string>(ws.begin(), ws.end()));
  return inject_noise(std::move(dicts), rate, seed, pools);
}

// ---------------------------------------------------------------------------
// Statistics and serialization
// ---------------------------------------------------------------------------

struct GraphStats {
  std::map<std::string, std::size_t> edges_per_pair;
  std::map<std::string, std::size_t> nodes_per_language;
  std::size_t total_edges = 0;
  /// Fraction of corpus words with at least one in-neighbor in some pair.
  double coverage = 0.0;
};

inline GraphStats graph_stats(const DHG& g) {
  GraphStats s;
  for (const auto& p : g.pairs()) {
    s.edges_per_pair[p.pair.label()] = p.num_edges();
    s.total_edges += p.num_edges();
  }
  for (const auto& e : g.vocab().entries()) ++s.nodes_per_language[e.language.code()];
  const std::size_t corpus = g.num_corpus_nodes();
  if (corpus > 0) {
    std::size_t covered = 0;
    for (NodeId t = 0; t < corpus; ++t) {
      bool any = false;
      for (const auto& p : g.pairs()) any = any || p.offsets[t + 1] > p.offsets[t];
      covered += any ? 1 : 0;
    }
    s.coverage = static_cast<double>(covered) / static_cast<double>(corpus);
  }
  return s;
}

/// Node manifest: "id<TAB>lang<TAB>word" per node in id order.
inline void write_graph_nodes(std::ostream& os, const DHG& g) {
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    os << v << '\t' << g.vocab().language(v).code() << '\t' << g.vocab().word(v) << '\n';
  }
}

/// One edge per line, "src_lang src_word<TAB>dst_lang dst_word", grouped by
/// pair in registration order, then by destination id and source id.
inline void write_graph_edges(std::ostream& os, const DHG& g) {
  const auto& vocab = g.vocab();
  for (const auto& p : g.pairs()) {
    for (NodeId t = 0; t + 1 < p.offsets.size(); ++t) {
      for (std::size_t k = p.offsets[t]; k < p.offsets[t + 1]; ++k) {
        const NodeId s = p.in_neighbors[k];
        os << vocab.language(s).code() << ' ' << vocab.word(s) << '\t' << vocab.language(t).code()
           << ' ' << vocab.word(t) << '\n';
      }
    }
  }
}

}  // namespace dhgnet
