#pragma once

// Synthetic multilingual classification tasks with a known concept space.
//
// Concepts are isotropic Gaussian vectors. Every language owns an orthogonal
// rotation; a word's vector is the rotation of its concept plus Gaussian
// noise. Documents draw concepts from a class-conditional mixture and then a
// target word of that concept. Dictionaries link words that share a concept
// (each link kept with probability p_dict) and receive wrong links so that a
// fraction p_err of all pairs is wrong. The target language gets no
// embedding table; its vectors live only in the oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dhgnet/ingest.hpp"
#include "dhgnet/tensor.hpp"

namespace dhgnet::synth {

struct SynthConfig {
  std::string target = "tg";
  std::vector<std::string> sources{"sa", "sb"};
  std::size_t num_concepts = 48;
  std::size_t num_classes = 4;
  std::size_t concept_dim = 16;
  /// Words per language; languages not listed use `default_words`.
  std::map<std::string, std::size_t> words_per_language;
  std::size_t default_words = 1000;
  /// Every concept must own at least one word in every language.
  bool cover_all_concepts = true;
  double noise_sigma = 0.1;
  /// Seeds the per-language rotations; 0 derives them from the task seed.
  std::uint64_t rotation_seed = 0;
  std::size_t train_docs = 500;
  std::size_t valid_docs = 200;
  std::size_t test_docs = 400;
  std::size_t min_doc_len = 8;
  std::size_t max_doc_len = 16;
  /// classes x concepts mixture weights; empty selects the default layout of
  /// `neutral_concepts` shared concepts plus class-specific topical concepts.
  std::vector<std::vector<double>> affinity;
  std::size_t neutral_concepts = 16;
  double topical_mass = 0.7;
  double p_dict = 0.8;
  double p_err = 0.0;

  std::size_t words_for(const std::string& lang) const {
    auto it = words_per_language.find(lang);
    return it == words_per_language.end() ? default_words : it->second;
  }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"target", c.target},
                     {"sources", c.sources},
                     {"num_concepts", c.num_concepts},
                     {"num_classes", c.num_classes},
                     {"concept_dim", c.concept_dim},
                     {"words_per_language", c.words_per_language},
                     {"default_words", c.default_words},
                     {"cover_all_concepts", c.cover_all_concepts},
                     {"noise_sigma", c.noise_sigma},
                     {"rotation_seed", c.rotation_seed},
                     {"train_docs", c.train_docs},
                     {"valid_docs", c.valid_docs},
                     {"test_docs", c.test_docs},
                     {"min_doc_len", c.min_doc_len},
                     {"max_doc_len", c.max_doc_len},
                     {"affinity", c.affinity},
                     {"neutral_concepts", c.neutral_concepts},
                     {"topical_mass", c.topical_mass},
                     {"p_dict", c.p_dict},
                     {"p_err", c.p_err}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  const SynthConfig d;
  c.target = j.value("target", d.target);
  c.sources = j.value("sources", d.sources);
  c.num_concepts = j.value("num_concepts", d.num_concepts);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.concept_dim = j.value("concept_dim", d.concept_dim);
  c.words_per_language = j.value("words_per_language", d.words_per_language);
  c.default_words = j.value("default_words", d.default_words);
  c.cover_all_concepts = j.value("cover_all_concepts", d.cover_all_concepts);
  c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  c.rotation_seed = j.value("rotation_seed", d.rotation_seed);
  c.train_docs = j.value("train_docs", d.train_docs);
  c.valid_docs = j.value("valid_docs", d.valid_docs);
  c.test_docs = j.value("test_docs", d.test_docs);
  c.min_doc_len = j.value("min_doc_len", d.min_doc_len);
  c.max_doc_len = j.value("max_doc_len", d.max_doc_len);
  c.affinity = j.value("affinity", d.affinity);
  c.neutral_concepts = j.value("neutral_concepts", d.neutral_concepts);
  c.topical_mass = j.value("topical_mass", d.topical_mass);
  c.p_dict = j.value("p_dict", d.p_dict);
  c.p_err = j.value("p_err", d.p_err);
}

/// Class x concept mixture actually used by the generator.
inline std::vector<std::vector<double>> resolved_affinity(const SynthConfig& c) {
  if (!c.affinity.empty()) return c.affinity;
  std::vector<std::vector<double>> a(c.num_classes, std::vector<double>(c.num_concepts, 0.0));
  const std::size_t neutral = std::min(c.neutral_concepts, c.num_concepts);
  const std::size_t topical = c.num_concepts - neutral;
  const double topical_mass = neutral == 0 ? 1.0 : (topical == 0 ? 0.0 : c.topical_mass);
  for (std::size_t y = 0; y < c.num_classes; ++y) {
    std::size_t own = 0;
    for (std::size_t k = 0; k < topical; ++k) own += (k % c.num_classes == y) ? 1 : 0;
    for (std::size_t k = 0; k < topical; ++k)
      if (k % c.num_classes == y) a[y][k] = topical_mass / static_cast<double>(own);
    for (std::size_t k = topical; k < c.num_concepts; ++k)
      a[y][k] = (1.0 - topical_mass) / static_cast<double>(neutral);
  }
  return a;
}

inline void validate(const SynthConfig& c) {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  };
  prob(c.p_dict, "p_dict");
  prob(c.p_err, "p_err");
  prob(c.topical_mass, "topical_mass");
  if (c.p_err >= 1.0) throw std::invalid_argument("p_err = 1 leaves no correct pairs to anchor it");
  if (c.num_concepts == 0 || c.concept_dim == 0) throw std::invalid_argument("empty concept space");
  if (c.num_classes < 2) throw std::invalid_argument("need at least two classes");
  if (c.sources.empty()) throw std::invalid_argument("need at least one source language");
  if (c.min_doc_len == 0 || c.max_doc_len < c.min_doc_len) throw std::invalid_argument("bad document length range");
  if (c.train_docs < c.num_classes || c.valid_docs < c.num_classes || c.test_docs < c.num_classes) {
    throw std::invalid_argument("every split needs at least one document per class");
  }
  if (!(c.noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  std::set<std::string> langs{c.target};
  for (const auto& s : c.sources) {
    if (!langs.insert(s).second) throw std::invalid_argument("duplicate language " + s);
  }
  for (const auto& l : langs) {
    const std::size_t w = c.words_for(l);
    if (w == 0) throw std::invalid_argument("language " + l + " has no words");
    if (c.cover_all_concepts && w < c.num_concepts) {
      throw std::invalid_argument("language " + l + " has fewer words than concepts");
    }
  }
  const auto a = resolved_affinity(c);
  if (a.size() != c.num_classes) throw std::invalid_argument("affinity needs one row per class");
  for (const auto& row : a) {
    if (row.size() != c.num_concepts) throw std::invalid_argument("affinity row width != num_concepts");
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw std::invalid_argument("affinity entries must be non-negative");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("affinity rows must sum to 1");
  }
}

/// Hidden ground truth. Never read by the model.
struct SynthOracle {
  Tensor concepts;                                          // num_concepts x concept_dim
  std::map<std::string, Tensor> rotations;                  // per language
  std::map<std::string, std::vector<std::string>> words;    // per language
  std::map<std::string, std::vector<std::size_t>> concept_of;
  std::map<std::string, Tensor> vectors;                    // per language, words x dim
  /// Per dictionary "src>dst": wrong pairs and total pairs.
  std::map<std::string, std::pair<std::size_t, std::size_t>> wrong_pairs;
  std::set<std::tuple<std::string, std::string, std::string>> wrong_links;  // (source lang, source word, target word)
  std::vector<std::vector<double>> affinity;

  std::optional<std::size_t> concept_for(const std::string& lang, const std::string& word) const {
    const auto& ws = words.at(lang);
    for (std::size_t i = 0; i < ws.size(); ++i)
      if (ws[i] == word) return concept_of.at(lang)[i];
    return std::nullopt;
  }

  /// Hidden vector of a target-language word.
  std::span<const double> vector_of(const std::string& lang, const std::string& word) const {
    const auto& ws = words.at(lang);
    for (std::size_t i = 0; i < ws.size(); ++i)
      if (ws[i] == word) return vectors.at(lang).row(i);
    throw std::out_of_range("oracle has no word " + word);
  }
};

/// Generated task in the on-disk text formats plus the oracle.
struct SynthTask {
  SynthConfig config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> embeddings;  // source language -> embedding text
  struct DictText {
    std::string src;
    std::string dst;
    std::string text;
  };
  std::vector<DictText> dictionaries;
  std::string train;
  std::string valid;
  std::string test;
  SynthOracle oracle;
};

namespace detail {

/// Orthogonal matrix from the modified Gram-Schmidt process (run twice).
inline Tensor random_rotation(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor q(n, n);
  for (double& v : q.values()) v = normal(rng);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, j) * q(i, k);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
    }
  }
  return q;
}

inline std::vector<std::string> pseudo_words(std::size_t count, std::mt19937_64& rng) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p",
                                             "r", "s", "t", "v", "z", "ch", "sh", "th", "kr", "pl"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::uniform_int_distribution<std::size_t> onset(0, std::size(kOnsets) - 1);
  std::uniform_int_distribution<std::size_t> vowel(0, std::size(kVowels) - 1);
  std::uniform_int_distribution<std::size_t> syllables(2, 4);
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w;
    const std::size_t n = syllables(rng);
    for (std::size_t s = 0; s < n; ++s) {
      w += kOnsets[onset(rng)];
      w += kVowels[vowel(rng)];
    }
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

inline std::mt19937_64 sub_rng(std::uint64_t seed, const std::string& tag) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (char c : tag) words.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace detail

inline SynthTask generate(const SynthConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  SynthTask task;
  task.config = cfg;
  task.seed = seed;
  SynthOracle& o = task.oracle;
  o.affinity = resolved_affinity(cfg);

  {
    auto rng = detail::sub_rng(seed, "concepts");
    std::normal_distribution<double> normal(0.0, 1.0);
    o.concepts = Tensor(cfg.num_concepts, cfg.concept_dim);
    for (double& v : o.concepts.values()) v = normal(rng);
  }

  std::vector<std::string> langs{cfg.target};
  langs.insert(langs.end(), cfg.sources.begin(), cfg.sources.end());
  const std::uint64_t rot_seed = cfg.rotation_seed != 0 ? cfg.rotation_seed : seed;
  for (const auto& lang : langs) {
    auto rot_rng = detail::sub_rng(rot_seed, "rotation/" + lang);
    Tensor rot = detail::random_rotation(cfg.concept_dim, rot_rng);

    auto rng = detail::sub_rng(seed, "words/" + lang);
    const std::size_t n = cfg.words_for(lang);
    auto words = detail::pseudo_words(n, rng);
    std::vector<std::size_t> concept_of(n);
    for (std::size_t i = 0; i < n; ++i) concept_of[i] = i % cfg.num_concepts;
    std::shuffle(concept_of.begin(), concept_of.end(), rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    Tensor vecs(n, cfg.concept_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = o.concepts.row(concept_of[i]);
      for (std::size_t r = 0; r < cfg.concept_dim; ++r) {
        double v = 0.0;
        for (std::size_t k = 0; k < cfg.concept_dim; ++k) v += rot(r, k) * c[k];
        vecs(i, r) = v + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise(rng) : 0.0);
      }
    }
    o.rotations.emplace(lang, std::move(rot));
    o.words.emplace(lang, std::move(words));
    o.concept_of.emplace(lang, std::move(concept_of));
    o.vectors.emplace(lang, std::move(vecs));
  }

  for (const auto& lang : cfg.sources) {
    std::ostringstream os;
    const auto& words = o.words.at(lang);
    const Tensor& vecs = o.vectors.at(lang);
    EmbeddingTable t;
    t.language = LanguageId(lang);
    t.dim = cfg.concept_dim;
    t.words = words;
    t.values = vecs.data();
    write_embeddings(os, t);
    task.embeddings.emplace(lang, os.str());
  }

  // Dictionaries: one symmetric link set per source language.
  const auto& twords = o.words.at(cfg.target);
  const auto& tconcept = o.concept_of.at(cfg.target);
  for (const auto& lang : cfg.sources) {
    auto rng = detail::sub_rng(seed, "dict/" + lang);
    std::bernoulli_distribution keep(cfg.p_dict);
    const auto& swords = o.words.at(lang);
    const auto& sconcept = o.concept_of.at(lang);
    std::vector<std::vector<std::size_t>> by_concept(cfg.num_concepts);
    for (std::size_t s = 0; s < swords.size(); ++s) by_concept[sconcept[s]].push_back(s);

    std::set<std::pair<std::size_t, std::size_t>> links;  // (target idx, source idx)
    for (std::size_t t = 0; t < twords.size(); ++t)
      for (std::size_t s : by_concept[tconcept[t]])
        if (keep(rng)) links.emplace(t, s);
    const std::size_t correct = links.size();
    const auto wrong_wanted = static_cast<std::size_t>(
        std::llround(cfg.p_err / (1.0 - cfg.p_err) * static_cast<double>(correct)));
    std::uniform_int_distribution<std::size_t> pick_t(0, twords.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_s(0, swords.size() - 1);
    std::size_t wrong = 0;
    std::size_t attempts = 0;
    while (wrong < wrong_wanted) {
      if (++attempts > 1000 * (wrong_wanted + 1)) throw std::invalid_argument("cannot place wrong pairs");
      const std::size_t t = pick_t(rng);
      const std::size_t s = pick_s(rng);
      if (sconcept[s] == tconcept[t]) continue;
      if (!links.emplace(t, s).second) continue;
      o.wrong_links.emplace(lang, swords[s], twords[t]);
      ++wrong;
    }

    std::map<std::size_t, std::vector<std::size_t>> t_to_s, s_to_t;
    for (const auto& [t, s] : links) {
      t_to_s[t].push_back(s);
      s_to_t[s].push_back(t);
    }
    std::ostringstream forward, backward;
    for (const auto& [t, ss] : t_to_s) {
      forward << twords[t] << '\t';
      for (std::size_t i = 0; i < ss.size(); ++i) forward << (i ? "," : "") << swords[ss[i]];
      forward << '\n';
    }
    for (const auto& [s, ts] : s_to_t) {
      backward << swords[s] << '\t';
      for (std::size_t i = 0; i < ts.size(); ++i) backward << (i ? "," : "") << twords[ts[i]];
      backward << '\n';
    }
    task.dictionaries.push_back({lang, cfg.target, backward.str()});
    task.dictionaries.push_back({cfg.target, lang, forward.str()});
    o.wrong_pairs[lang + ">" + cfg.target] = {wrong, links.size()};
    o.wrong_pairs[cfg.target + ">" + lang] = {wrong, links.size()};
  }

  // Documents. Labels are dealt round-robin, then shuffled, so every class occurs.
  std::vector<std::vector<std::size_t>> words_of_concept(cfg.num_concepts);
  for (std::size_t t = 0; t < twords.size(); ++t) words_of_concept[tconcept[t]].push_back(t);
  auto make_split = [&](std::size_t count, const std::string& tag) {
    auto rng = detail::sub_rng(seed, "docs/" + tag);
    std::vector<std::size_t> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = i % cfg.num_classes;
    std::shuffle(labels.begin(), labels.end(), rng);
    std::uniform_int_distribution<std::size_t> len(cfg.min_doc_len, cfg.max_doc_len);
    std::vector<std::discrete_distribution<std::size_t>> mixture;
    for (const auto& row : o.affinity) mixture.emplace_back(row.begin(), row.end());
    std::ostringstream os;
    for (std::size_t y : labels) {
      os << y << '\t';
      const std::size_t n = len(rng);
      std::size_t written = 0;
      while (written < n) {
        const std::size_t c = mixture[y](rng);
        const auto& pool = words_of_concept[c];
        if (pool.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        os << (written ? " " : "") << twords[pool[pick(rng)]];
        ++written;
      }
      os << '\n';
    }
    return os.str();
  };
  task.train = make_split(cfg.train_docs, "train");
  task.valid = make_split(cfg.valid_docs, "valid");
  task.test = make_split(cfg.test_docs, "test");
  return task;
}

// ---------------------------------------------------------------------------
// Loading through the parsers
// ---------------------------------------------------------------------------

/// A task in typed form: everything a training run consumes.
struct LoadedTask {
  LanguageId target;
  std::vector<LanguageId> sources;
  Vocabulary vocab;  // target words of all splits
  LabeledCorpus train;
  LabeledCorpus valid;
  LabeledCorpus test;
  std::size_t num_classes = 0;
  std::vector<EmbeddingTable> tables;
  std::vector<BilingualDictionary> dictionaries;
};

inline void finish_corpus(LoadedTask& t) {
  t.num_classes = std::max({t.train.num_classes, t.valid.num_classes, t.test.num_classes});
  t.train.num_classes = t.valid.num_classes = t.test.num_classes = t.num_classes;
}

inline LoadedTask load_task(const SynthTask& task) {
  LoadedTask t;
  t.target = LanguageId(task.config.target);
  for (const auto& s : task.config.sources) t.sources.emplace_back(s);
  auto corpus = [&](const std::string& text, Split split) {
    std::istringstream is(text);
    return parse_corpus(is, t.vocab, t.target, split);
  };
  t.train = corpus(task.train, Split::kTrain);
  t.valid = corpus(task.valid, Split::kValid);
  t.test = corpus(task.test, Split::kTest);
  finish_corpus(t);
  for (const auto& s : t.sources) t.tables.push_back(parse_embeddings(task.embeddings.at(s.code()), s));
  for (const auto& d : task.dictionaries) {
    t.dictionaries.push_back(parse_dictionary(d.text, LanguageId(d.src), LanguageId(d.dst)));
  }
  return t;
}

inline nlohmann::json oracle_json(const SynthTask& task) {
  nlohmann::json j;
  j["seed"] = task.seed;
  j["config"] = task.config;
  const auto& o = task.oracle;
  j["concepts"] = o.concepts.data();
  j["concept_dim"] = o.concepts.cols();
  for (const auto& [lang, ws] : o.words) {
    nlohmann::json l;
    l["words"] = ws;
    l["concepts"] = o.concept_of.at(lang);
    l["rotation"] = o.rotations.at(lang).data();
    if (lang == task.config.target) l["vectors"] = o.vectors.at(lang).data();
    j["languages"][lang] = l;
  }
  for (const auto& [dict, counts] : o.wrong_pairs) {
    j["dictionaries"][dict] = {{"wrong_pairs", counts.first}, {"total_pairs", counts.second}};
  }
  return j;
}

/// Writes <lang>.vec, dict.<src>-<dst>.tsv, {train,valid,test}.tsv and oracle.json.
inline void write_task(const SynthTask& task, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    os << text;
  };
  for (const auto& [lang, text] : task.embeddings) put(lang + ".vec", text);
  for (const auto& d : task.dictionaries) put("dict." + d.src + "-" + d.dst + ".tsv", d.text);
  put("train.tsv", task.train);
  put("valid.tsv", task.valid);
  put("test.tsv", task.test);
  put("oracle.json", oracle_json(task).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Oracle ceiling
// ---------------------------------------------------------------------------

/// Test accuracy of a multinomial logistic regression fit on the hidden
/// concept-space means of the training documents.
inline double oracle_bound(const SynthOracle& o, const std::string& target, const Vocabulary& vocab,
                           const LabeledCorpus& train, const LabeledCorpus& test,
                           std::size_t num_classes, std::size_t iterations = 400) {
  const std::size_t dim = o.vectors.at(target).cols();
  std::map<std::string, std::size_t> row_of;
  const auto& ws = o.words.at(target);
  for (std::size_t i = 0; i < ws.size(); ++i) row_of.emplace(ws[i], i);
  auto features = [&](const LabeledCorpus& c) {
    Tensor x(c.documents.size(), dim + 1);
    for (std::size_t d = 0; d < c.documents.size(); ++d) {
      const auto& doc = c.documents[d];
      for (NodeId tok : doc.tokens) {
        const auto v = o.vectors.at(target).row(row_of.at(vocab.word(tok)));
        for (std::size_t k = 0; k < dim; ++k) x(d, k) += v[k] / static_cast<double>(doc.tokens.size());
      }
      x(d, dim) = 1.0;
    }
    return x;
  };
  const Tensor xtr = features(train);
  const Tensor xte = features(test);
  Tensor w(num_classes, dim + 1);
  const double lr = 0.5;
  const double l2 = 1e-4;
  const double n = static_cast<double>(xtr.rows());
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor grad(num_classes, dim + 1);
    for (std::size_t i = 0; i < xtr.rows(); ++i) {
      std::vector<double> z(num_classes);
      for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t k = 0; k <= dim; ++k) z[c] += w(c, k) * xtr(i, k);
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) sum += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double err = z[c] / sum - (train.documents[i].label == c ? 1.0 : 0.0);
        for (std::size_t k = 0; k <= dim; ++k) grad(c, k) += err * xtr(i, k) / n;
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (grad[i] + l2 * w[i]);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xte.rows(); ++i) {
    std::size_t best = 0;
    double best_z = -1e300;
    for (std::size_t c = 0; c < num_classes; ++c) {
      double z = 0.0;
      for (std::size_t k = 0; k <= dim; ++k) z += w(c, k) * xte(i, k);
      if (z > best_z) {
        best_z = z;
        best = c;
      }
    }
    correct += best == test.documents[i].label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(xte.rows());
}

}  // namespace dhgnet::synth
