#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dhgnet/attention.hpp"
#include "dhgnet/classifier.hpp"
#include "dhgnet/experiment.hpp"
#include "dhgnet/gradcheck.hpp"
#include "dhgnet/model.hpp"

using namespace dhgnet;

namespace {

const LanguageId kTh("th"), kEn("en"), kZh("zh");

BilingualDictionary dict(const LanguageId& src, const LanguageId& dst,
                         std::vector<std::pair<std::string, std::vector<std::string>>> entries) {
  BilingualDictionary d;
  d.src = src;
  d.dst = dst;
  d.entries = std::move(entries);
  return d;
}

EmbeddingTable table(const LanguageId& lang, std::size_t dim,
                     const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  EmbeddingTable t;
  t.language = lang;
  t.dim = dim;
  for (const auto& [w, v] : rows) {
    t.index.emplace(w, t.words.size());
    t.words.push_back(w);
    t.values.insert(t.values.end(), v.begin(), v.end());
  }
  return t;
}

EmbeddingTable random_table(const LanguageId& lang, std::size_t dim, const std::vector<std::string>& words,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& w : words) {
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    rows.emplace_back(w, v);
  }
  return table(lang, dim, rows);
}

/// ร้าน, a second Thai word อาหาร, and their English and Chinese translations.
struct ShopFixture {
  DHG graph;
  std::vector<EmbeddingTable> tables;
  GraphInputs inputs;

  static DHG make_graph() {
    Vocabulary v;
    v.add(kTh, "ร้าน");
    v.add(kTh, "อาหาร");
    v.add(kTh, "ไม่มี");
    return build_dhg(v, kTh, {kEn, kZh},
                     {dict(kEn, kTh, {{"shop", {"ร้าน"}}, {"store", {"ร้าน"}}, {"food", {"อาหาร"}}}),
                      dict(kTh, kEn, {{"ร้าน", {"shop", "store"}}, {"อาหาร", {"food"}}}),
                      dict(kZh, kTh, {{"店", {"ร้าน"}}, {"餐厅", {"ร้าน"}}}),
                      dict(kTh, kZh, {{"ร้าน", {"店", "餐厅"}}})});
  }

  explicit ShopFixture(std::size_t dim = 3)
      : graph(make_graph()),
        tables{random_table(kEn, dim, {"shop", "store", "food"}, 1), random_table(kZh, dim, {"店", "餐厅"}, 2)},
        inputs(prepare_inputs(graph, tables)) {}
};

HyperParams small_hp(std::size_t d = 4, std::size_t heads = 2) {
  HyperParams hp;
  hp.d = d;
  hp.heads = heads;
  hp.d_out = d / heads;
  hp.layers = 2;
  return hp;
}

Tensor run_forward(ModelKind kind, const HyperParams& hp, const GraphInputs& in, const ParamStore& p,
                   ForwardOptions opt = {}) {
  Tape tape(false);
  return model_forward(tape, p, kind, hp, in, opt).value();
}

/// GELU reference, written out independently of the library.
double gelu_ref(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / std::acos(-1.0)) * (x + 0.044715 * x * x * x)));
}

}  // namespace

// --- cross-lingual transform ---------------------------------------------------

TEST(CrossLingualTransform, HandComputedProjection) {
  Vocabulary v;
  v.add(kTh, "a");
  const DHG g = build_dhg(v, kTh, {kEn}, {dict(kEn, kTh, {{"x", {"a"}}})});
  const GraphInputs in = prepare_inputs(g, {table(kEn, 2, {{"x", {4.0, 5.0}}})});
  ParamStore p;
  p.emplace(names::target_embeddings(), Tensor::from_rows({{0.1, 0.2, 0.3}}));
  p.emplace(names::transform(kEn), Tensor::from_rows({{1, 0}, {0, 1}, {0, 0}}));
  const NodeId x = *g.vocab().find(kEn, "x");
  EXPECT_EQ(cross_lingual_transform(p, in, x), (std::vector<double>{4.0, 5.0, 0.0}));
  EXPECT_EQ(cross_lingual_transform(p, in, 0), (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_THROW(cross_lingual_transform(p, in, 7), std::out_of_range);
}

TEST(CrossLingualTransform, IdentityMapKeepsSourceVector) {
  ShopFixture f;
  ParamStore p;
  p.emplace(names::target_embeddings(), Tensor(3, 3, 0.0));
  p.emplace(names::transform(kEn), Tensor::identity(3));
  p.emplace(names::transform(kZh), Tensor::identity(3));
  const NodeId store = *f.graph.vocab().find(kEn, "store");
  const auto expect = f.tables[0].find("store");
  const auto got = cross_lingual_transform(p, f.inputs, store);
  EXPECT_TRUE(std::equal(got.begin(), got.end(), expect->begin()));
}

TEST(CrossLingualTransform, FeaturesOnTapeMatchSingleNodeVersion) {
  ShopFixture f;
  const HyperParams hp = small_hp(3, 1);
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, f.inputs, 5);
  Tape tape(false);
  const Tensor x = cross_lingual_features(tape, p, f.inputs).value();
  for (NodeId v = 0; v < f.graph.num_nodes(); ++v) {
    const auto row = cross_lingual_transform(p, f.inputs, v);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(x(v, c), row[c], 1e-15);
  }
}

TEST(CrossLingualTransform, MissingSourceVectorIsABuildError) {
  const DHG g = ShopFixture::make_graph();
  EXPECT_THROW(prepare_inputs(g, {random_table(kEn, 3, {"shop", "store"}, 1), random_table(kZh, 3, {"店", "餐厅"}, 2)}),
               std::invalid_argument);
  EXPECT_THROW(prepare_inputs(g, {random_table(kEn, 3, {"shop", "store", "food"}, 1)}), std::invalid_argument);
}

// --- word level ------------------------------------------------------------------

TEST(WordLevel, HandComputedTwoNeighborExample) {
  // t = (1,1) receives from s1 = (1,0) and s2 = (0,2); W = [1 1], a = (1,-1).
  Vocabulary v;
  v.add(kTh, "t");
  const DHG g = build_dhg(v, kTh, {kEn}, {dict(kEn, kTh, {{"s1", {"t"}}, {"s2", {"t"}}})});
  const GraphInputs in = prepare_inputs(g, {table(kEn, 2, {{"s1", {1, 0}}, {"s2", {0, 2}}})});
  Tape tape;
  const Var x = tape.constant(Tensor::from_rows({{1, 1}, {1, 0}, {0, 2}}));
  Tensor alpha;
  const Tensor out = word_level_aggregate(x, tape.constant(Tensor::from_rows({{1, 1}})),
                                          tape.constant(Tensor::column({1.0, -1.0})), in.pairs[0], 0.2, &alpha)
                         .value();
  // Reference: scores LeakyReLU(1-2) = -0.2 and LeakyReLU(2-2) = 0.
  const double z = std::exp(-0.2) + 1.0;
  const double a1 = std::exp(-0.2) / z, a2 = 1.0 / z;
  EXPECT_NEAR(alpha[0], a1, 1e-15);
  EXPECT_NEAR(alpha[1], a2, 1e-15);
  EXPECT_NEAR(alpha[0], 0.450, 5e-4);
  EXPECT_NEAR(alpha[1], 0.550, 5e-4);
  const double pre = a1 * 1.0 + a2 * 2.0;
  EXPECT_NEAR(pre, 1.550, 5e-4);
  EXPECT_NEAR(out(0, 0), gelu_ref(pre), 1e-14);
  EXPECT_EQ(out(1, 0), 0.0);  // sources receive nothing in this pair
}

TEST(WordLevel, SingletonNeighborGetsFullWeight) {
  Vocabulary v;
  v.add(kTh, "t");
  const DHG g = build_dhg(v, kTh, {kEn}, {dict(kEn, kTh, {{"s", {"t"}}})});
  const GraphInputs in = prepare_inputs(g, {table(kEn, 2, {{"s", {0.3, -0.7}}})});
  Tape tape;
  const Tensor w = Tensor::from_rows({{2.0, 1.0}, {0.5, -1.0}});
  Tensor alpha;
  const Tensor out = word_level_aggregate(tape.constant(Tensor::from_rows({{5, 5}, {0.3, -0.7}})), tape.constant(w),
                                          tape.constant(Tensor::column({0.1, 0.2, 0.3, 0.4})), in.pairs[0], 0.2,
                                          &alpha)
                         .value();
  EXPECT_EQ(alpha[0], 1.0);
  EXPECT_NEAR(out(0, 0), gelu_ref(2.0 * 0.3 - 0.7), 1e-15);
  EXPECT_NEAR(out(0, 1), gelu_ref(0.5 * 0.3 + 0.7), 1e-15);
}

TEST(WordLevel, IdenticalNeighborsSplitEvenly) {
  ShopFixture f;
  Tape tape;
  Tensor feats(f.graph.num_nodes(), 3, 0.25);
  std::mt19937_64 rng(3);
  Tensor alpha;
  word_level_aggregate(tape.constant(feats), tape.constant(glorot(2, 3, rng)), tape.constant(glorot(4, 1, rng)),
                       f.inputs.pairs[0], 0.2, &alpha);
  // en>th: ร้าน has {shop, store}, อาหาร has {food}.
  ASSERT_EQ(alpha.rows(), 3u);
  EXPECT_DOUBLE_EQ(alpha[0], 0.5);
  EXPECT_DOUBLE_EQ(alpha[1], 0.5);
  EXPECT_EQ(alpha[2], 1.0);
}

TEST(WordLevel, AttentionVectorShapeChecked) {
  ShopFixture f;
  Tape tape;
  EXPECT_THROW(word_level_aggregate(tape.constant(Tensor(8, 3)), tape.constant(Tensor(2, 3)),
                                    tape.constant(Tensor(3, 1)), f.inputs.pairs[0], 0.2),
               ShapeError);
}

// --- language level -----------------------------------------------------------

TEST(LanguageLevel, NoPairsMeansSelfOnly) {
  Tape tape;
  const Tensor x = Tensor::from_rows({{1.0, -2.0, 0.5}});
  const Tensor w2 = Tensor::from_rows({{0.2, 0.1, -0.3}, {1.0, 0.0, 2.0}});
  HeadTrace trace;
  const Tensor out = language_level_aggregate(tape.constant(x), {}, {}, tape.constant(Tensor::identity(2)),
                                              tape.constant(w2), tape.constant(Tensor::column({1, 2, 3, 4})), 0.2,
                                              true, &trace)
                         .value();
  ASSERT_EQ(trace.lang_participant, (std::vector<std::string>{"self"}));
  EXPECT_EQ(trace.lang_alpha[0], 1.0);
  EXPECT_NEAR(out(0, 0), gelu_ref(0.2 - 0.2 - 0.15), 1e-15);
  EXPECT_NEAR(out(0, 1), gelu_ref(1.0 + 1.0), 1e-15);
}

TEST(LanguageLevel, EqualPairFeaturesGetEqualWeight) {
  ShopFixture f;
  Tape tape;
  const std::size_t n = f.graph.num_nodes();
  const Var x = tape.constant(Tensor(n, 3, 0.4));
  const Var same = tape.constant(Tensor(n, 2, 0.7));
  std::vector<const EdgeIndex*> idx;
  for (const auto& e : f.inputs.pairs)
    if (e.key == "en>th" || e.key == "zh>th") idx.push_back(&e);
  const Var feats[] = {same, same};
  std::mt19937_64 rng(4);
  HeadTrace trace;
  language_level_aggregate(x, feats, idx, tape.constant(glorot(2, 2, rng)), tape.constant(glorot(2, 3, rng)),
                           tape.constant(glorot(4, 1, rng)), 0.2, true, &trace);
  // Node 0 (ร้าน) is reached through both pairs.
  const std::size_t b = trace.lang_seg.offsets[0];
  ASSERT_EQ(trace.lang_seg.offsets[1] - b, 3u);
  EXPECT_EQ(trace.lang_participant[b], "en>th");
  EXPECT_EQ(trace.lang_participant[b + 1], "zh>th");
  EXPECT_EQ(trace.lang_participant[b + 2], "self");
  EXPECT_EQ(trace.lang_alpha[b], trace.lang_alpha[b + 1]);
}

TEST(LanguageLevel, SelfPairSwitch) {
  ShopFixture f;
  HyperParams hp = small_hp();
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, f.inputs, 3);
  for (bool participates : {true, false}) {
    hp.self_pair_participates = participates;
    ForwardTrace trace;
    ForwardOptions fo;
    fo.trace = &trace;
    run_forward(ModelKind::kDhgnet, hp, f.inputs, p, fo);
    const HeadTrace& h = trace.layers[0][0];
    auto participants = [&](NodeId t) {
      return std::vector<std::string>(h.lang_participant.begin() + static_cast<long>(h.lang_seg.offsets[t]),
                                      h.lang_participant.begin() + static_cast<long>(h.lang_seg.offsets[t + 1]));
    };
    if (participates) {
      EXPECT_EQ(participants(0), (std::vector<std::string>{"en>th", "zh>th", "self"}));
    } else {
      EXPECT_EQ(participants(0), (std::vector<std::string>{"en>th", "zh>th"}));
    }
    EXPECT_EQ(participants(2), (std::vector<std::string>{"self"}));  // ไม่มี has no translations
  }
}

// --- forward ---------------------------------------------------------------------

TEST(Forward, AttentionWeightsSumToOne) {
  ShopFixture f;
  const HyperParams hp = small_hp();
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, f.inputs, 11);
  ForwardTrace trace;
  ForwardOptions fo;
  fo.trace = &trace;
  run_forward(ModelKind::kDhgnet, hp, f.inputs, p, fo);
  ASSERT_EQ(trace.layers.size(), 2u);
  for (const auto& layer : trace.layers) {
    ASSERT_EQ(layer.size(), hp.heads);
    for (const auto& h : layer) {
      for (const auto& e : f.inputs.pairs) {
        if (e.empty()) continue;
        const Tensor& a = h.word_alpha.at(e.key);
        for (std::size_t s = 0; s < e.seg.num_segments(); ++s) {
          double sum = 0.0;
          for (std::size_t i = e.seg.offsets[s]; i < e.seg.offsets[s + 1]; ++i) sum += a[i];
          EXPECT_NEAR(sum, 1.0, 1e-12);
        }
      }
      for (std::size_t t = 0; t < h.lang_seg.num_segments(); ++t) {
        double sum = 0.0;
        for (std::size_t i = h.lang_seg.offsets[t]; i < h.lang_seg.offsets[t + 1]; ++i) sum += h.lang_alpha[i];
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(Forward, EveryLayerKeepsWidthD) {
  ShopFixture f;
  for (ModelKind kind : {ModelKind::kDhgnet, ModelKind::kGat, ModelKind::kGcn, ModelKind::kRgcn}) {
    const HyperParams hp = small_hp(6, 3);
    const ParamStore p = init_model_params(kind, hp, f.inputs, 2);
    std::vector<Tensor> states;
    ForwardOptions fo;
    fo.states = &states;
    const Tensor out = run_forward(kind, hp, f.inputs, p, fo);
    EXPECT_EQ(out.rows(), 3u);
    EXPECT_EQ(out.cols(), 6u);
    ASSERT_EQ(states.size(), 3u);
    for (const auto& s : states) {
      EXPECT_EQ(s.rows(), f.graph.num_nodes());
      EXPECT_EQ(s.cols(), 6u);
    }
  }
}

TEST(Forward, ZeroEdgesStillProducesEmbeddings) {
  Vocabulary v;
  v.add(kTh, "a");
  v.add(kTh, "b");
  const DHG g = build_dhg(v, kTh, {kEn}, {});
  const GraphInputs in = prepare_inputs(g, {});
  const HyperParams hp = small_hp();
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, in, 1);
  const Tensor out = run_forward(ModelKind::kDhgnet, hp, in, p);
  EXPECT_EQ(out.rows(), 2u);
  EXPECT_EQ(out.cols(), 4u);
  EXPECT_TRUE(out.all_finite());
}

TEST(Forward, BitwiseDeterministic) {
  ShopFixture f;
  const HyperParams hp = small_hp();
  const Tensor a = run_forward(ModelKind::kDhgnet, hp, f.inputs, init_model_params(ModelKind::kDhgnet, hp, f.inputs, 9));
  ShopFixture g;
  const Tensor b = run_forward(ModelKind::kDhgnet, hp, g.inputs, init_model_params(ModelKind::kDhgnet, hp, g.inputs, 9));
  EXPECT_EQ(a, b);
}

TEST(Forward, DimensionMustEqualHeadsTimesWidth) {
  ShopFixture f;
  HyperParams hp = small_hp();
  hp.d_out = 3;
  EXPECT_THROW(init_model_params(ModelKind::kDhgnet, hp, f.inputs, 1), std::invalid_argument);
  const ParamStore p = init_model_params(ModelKind::kDhgnet, small_hp(), f.inputs, 1);
  Tape tape(false);
  EXPECT_THROW(model_forward(tape, p, ModelKind::kDhgnet, hp, f.inputs), std::invalid_argument);
  hp = small_hp();
  hp.layers = 0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
}

TEST(Forward, PaperPresetRuns) {
  ShopFixture f(300);
  HyperParams hp;  // d = 300, K = 10, d_out = 30, two layers
  EXPECT_EQ(hp.d, 300u);
  EXPECT_EQ(hp.heads, 10u);
  EXPECT_EQ(hp.d_out, 30u);
  EXPECT_EQ(hp.layers, 2u);
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, f.inputs, 1);
  EXPECT_EQ(p.at(names::pair_w(1, 9, "zh>th")).rows(), 30u);
  EXPECT_EQ(p.at(names::pair_w(1, 9, "zh>th")).cols(), 300u);
  EXPECT_EQ(p.at(names::lang_w1(0, 0)).rows(), 30u);
  EXPECT_EQ(p.at(names::lang_w2(0, 0)).cols(), 300u);
  EXPECT_EQ(p.at(names::lang_a1(0, 0)).rows(), 60u);
  const Tensor out = run_forward(ModelKind::kDhgnet, hp, f.inputs, p);
  EXPECT_EQ(out.cols(), 300u);
  EXPECT_TRUE(out.all_finite());
}

TEST(Forward, ParameterLayoutSharesLanguageLevelAcrossPairs) {
  ShopFixture f;
  const HyperParams hp = small_hp();
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, f.inputs, 1);
  std::size_t pair_w = 0, lang = 0;
  for (const auto& [name, t] : p) {
    if (name.ends_with(".W") && name.find(">") != std::string::npos) ++pair_w;
    if (name.find(".lang.") != std::string::npos) ++lang;
  }
  EXPECT_EQ(pair_w, hp.layers * hp.heads * f.inputs.pairs.size());
  EXPECT_EQ(lang, hp.layers * hp.heads * 3);
}

TEST(Forward, IsolationFromSourceTables) {
  // Source nodes exist but no edges connect them to the target.
  Vocabulary v;
  v.add(kTh, "a");
  v.add(kTh, "b");
  v.add(kEn, "x");
  v.add(kEn, "y");
  const DHG g(v, kTh, {kEn}, {{{kEn, kTh}, {}}, {{kTh, kEn}, {}}});
  const HyperParams hp = small_hp();
  const GraphInputs in1 = prepare_inputs(g, {random_table(kEn, 3, {"x", "y"}, 1)});
  const GraphInputs in2 = prepare_inputs(g, {random_table(kEn, 3, {"x", "y"}, 2)});
  for (ModelKind kind : {ModelKind::kDhgnet, ModelKind::kGat, ModelKind::kGcn, ModelKind::kRgcn}) {
    const ParamStore p = init_model_params(kind, hp, in1, 4);
    EXPECT_EQ(run_forward(kind, hp, in1, p), run_forward(kind, hp, in2, p)) << model_kind_name(kind);
  }
  // The same perturbation is visible once an edge exists.
  const DHG linked(v, kTh, {kEn}, {{{kEn, kTh}, {{2, 0}}}, {{kTh, kEn}, {}}});
  const GraphInputs l1 = prepare_inputs(linked, {random_table(kEn, 3, {"x", "y"}, 1)});
  const GraphInputs l2 = prepare_inputs(linked, {random_table(kEn, 3, {"x", "y"}, 2)});
  const ParamStore p = init_model_params(ModelKind::kDhgnet, hp, l1, 4);
  EXPECT_NE(run_forward(ModelKind::kDhgnet, hp, l1, p), run_forward(ModelKind::kDhgnet, hp, l2, p));
}

TEST(Forward, PermutationEquivariance) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    ShopFixture f;
    const DHG& g = f.graph;
    const std::size_t n = g.num_nodes(), nt = g.num_target_nodes();
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::shuffle(perm.begin(), perm.begin() + static_cast<long>(nt), rng);
    std::shuffle(perm.begin() + static_cast<long>(nt), perm.end(), rng);
    std::vector<NodeId> inverse(n);
    for (NodeId i = 0; i < n; ++i) inverse[perm[i]] = i;

    Vocabulary pv;
    for (NodeId j = 0; j < n; ++j) pv.add(g.vocab().language(inverse[j]), g.vocab().word(inverse[j]));
    std::vector<std::pair<LanguagePair, EdgeList>> pe;
    for (const auto& p : g.pairs()) {
      EdgeList edges;
      for (NodeId t = 0; t < n; ++t)
        for (std::size_t k = p.offsets[t]; k < p.offsets[t + 1]; ++k) edges.emplace_back(perm[p.in_neighbors[k]], perm[t]);
      pe.emplace_back(p.pair, std::move(edges));
    }
    const DHG pg(pv, kTh, g.sources(), pe, nt);
    const GraphInputs pin = prepare_inputs(pg, f.tables);

    for (ModelKind kind : {ModelKind::kDhgnet, ModelKind::kGat, ModelKind::kGcn, ModelKind::kRgcn}) {
      const HyperParams hp = small_hp(3, 1);
      ParamStore p = init_model_params(kind, hp, f.inputs, seed);
      ParamStore pp = p;
      Tensor& e = pp.at(names::target_embeddings());
      for (NodeId t = 0; t < nt; ++t) {
        auto src = p.at(names::target_embeddings()).row(t);
        std::copy(src.begin(), src.end(), e.row(perm[t]).begin());
      }
      const Tensor out = run_forward(kind, hp, f.inputs, p);
      const Tensor pout = run_forward(kind, hp, pin, pp);
      for (NodeId t = 0; t < nt; ++t)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(pout(perm[t], c), out(t, c), 1e-12) << model_kind_name(kind);
    }
  }
}

// --- baselines -------------------------------------------------------------------

TEST(Baselines, GcnSingleNeighbor) {
  Vocabulary v;
  v.add(kTh, "t");
  const DHG g = build_dhg(v, kTh, {kEn}, {dict(kEn, kTh, {{"s", {"t"}}})});
  const GraphInputs in = prepare_inputs(g, {table(kEn, 2, {{"s", {0, 0}}})});
  ParamStore p;
  p.emplace(names::gcn_w(0), Tensor::from_rows({{1, 2}, {0, -1}}));
  Tape tape;
  const Tensor x = Tensor::from_rows({{0.5, 1.0}, {2.0, -1.0}});
  const Tensor out = gcn_layer(tape, p, in, 0, tape.constant(x)).value();
  // deg(t) = 1, deg(s) = 0: self weight 1/2, neighbor weight 1/sqrt(2).
  const double wt = 0.5, ws = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(out(0, 0), gelu_ref(wt * (0.5 + 2.0) + ws * (2.0 - 2.0)), 1e-15);
  EXPECT_NEAR(out(0, 1), gelu_ref(wt * (-1.0) + ws * 1.0), 1e-15);
  EXPECT_NEAR(out(1, 0), gelu_ref(0.0), 1e-15);
  EXPECT_NEAR(out(1, 1), gelu_ref(1.0), 1e-15);  // the source keeps only its self loop
}

TEST(Baselines, GatMatchesWordLevelOnSinglePairGraph) {
  Vocabulary v;
  for (const char* w : {"a", "b", "c"}) v.add(kTh, w);
  const DHG g = build_dhg(v, kTh, {kEn},
                          {dict(kEn, kTh, {{"x", {"a", "b"}}, {"y", {"a"}}, {"z", {"c", "a"}}})});
  const GraphInputs in = prepare_inputs(g, {random_table(kEn, 4, {"x", "y", "z"}, 7)});
  const HyperParams hp = small_hp(4, 2);
  ParamStore dp = init_model_params(ModelKind::kDhgnet, hp, in, 3);
  ParamStore gp;
  for (std::size_t k = 0; k < hp.heads; ++k) {
    gp.emplace(names::gat_w(0, k), dp.at(names::pair_w(0, k, "en>th")));
    gp.emplace(names::gat_a(0, k), dp.at(names::pair_a(0, k, "en>th")));
  }
  std::mt19937_64 rng(1);
  Tensor feats(in.num_nodes, 4);
  std::normal_distribution<double> nd;
  for (double& x : feats.values()) x = nd(rng);

  Tape tape;
  const Var x = tape.constant(feats);
  const Tensor gat = gat_layer(tape, gp, hp, in, 0, x, nullptr).value();
  const EdgeIndex* pair = nullptr;
  for (const auto& e : in.pairs)
    if (e.key == "en>th") pair = &e;
  ASSERT_NE(pair, nullptr);
  for (std::size_t k = 0; k < hp.heads; ++k) {
    const Tensor word = word_level_aggregate(x, tape.param(dp, names::pair_w(0, k, "en>th")),
                                             tape.param(dp, names::pair_a(0, k, "en>th")), *pair, hp.leaky_slope)
                            .value();
    for (NodeId t : pair->seg.targets)
      for (std::size_t c = 0; c < hp.d_out; ++c) EXPECT_NEAR(gat(t, k * hp.d_out + c), word(t, c), 1e-10);
  }
}

TEST(Baselines, RgcnWithEqualWeightsIsAMeanOverBothNeighbors) {
  Vocabulary v;
  v.add(kTh, "t");
  const DHG g = build_dhg(v, kTh, {kEn, kZh}, {dict(kEn, kTh, {{"e", {"t"}}}), dict(kZh, kTh, {{"z", {"t"}}})});
  const GraphInputs in = prepare_inputs(g, {table(kEn, 2, {{"e", {0, 0}}}), table(kZh, 2, {{"z", {0, 0}}})});
  const Tensor w = Tensor::from_rows({{0.5, -1.0}, {2.0, 0.25}});
  const Tensor ws = Tensor::from_rows({{0.1, 0.2}, {0.3, 0.4}});
  ParamStore p;
  for (const auto& e : in.pairs) p.emplace(names::rgcn_w(0, e.key), w);
  p.emplace(names::rgcn_self(0), ws);
  const Tensor x = Tensor::from_rows({{1.0, 2.0}, {3.0, -1.0}, {-2.0, 4.0}});  // t, e, z
  Tape tape;
  const Tensor out = rgcn_layer(tape, p, in, 0, tape.constant(x)).value();
  const double m0 = 0.5 * (3.0 - 2.0), m1 = 0.5 * (-1.0 + 4.0);
  for (std::size_t r = 0; r < 2; ++r) {
    const double self = ws(r, 0) * 1.0 + ws(r, 1) * 2.0;
    const double neigh = w(r, 0) * m0 + w(r, 1) * m1;
    EXPECT_NEAR(out(0, r), gelu_ref(self + neigh), 1e-14);
  }
}

TEST(Baselines, UnknownKindRejected) {
  EXPECT_THROW(parse_model_kind("graphsage"), std::invalid_argument);
  for (const char* k : {"dhgnet", "gcn", "gat", "rgcn", "no-dhgnet"}) EXPECT_EQ(model_kind_name(parse_model_kind(k)), std::string(k));
}

// --- gradients -------------------------------------------------------------------

TEST(Gradients, ReachTheCrossLingualTransform) {
  // x is the only neighbor of the training word a.
  Vocabulary v;
  v.add(kTh, "a");
  v.add(kTh, "b");
  const DHG g = build_dhg(v, kTh, {kEn}, {dict(kEn, kTh, {{"x", {"a"}}})});
  const GraphInputs in = prepare_inputs(g, {random_table(kEn, 3, {"x"}, 1)});
  Model m;
  m.hyper = small_hp();
  m.hidden = 3;
  m.inputs = &in;
  const Document d0{{0}, 0}, d1{{1}, 1};
  const Document* docs[] = {&d0, &d1};
  for (ModelKind kind : {ModelKind::kDhgnet, ModelKind::kGat, ModelKind::kGcn, ModelKind::kRgcn}) {
    m.kind = kind;
    const ParamStore pk = init_params(m, 1);
    Tape tape;
    const Var loss = nll_loss(log_softmax(classifier_logits(tape, pk, embeddings_on(tape, m, pk), docs)), {0, 1});
    const Gradients grads = tape.backward(loss);
    double norm = 0.0;
    for (double x : grads.at(names::transform(kEn)).values()) norm += x * x;
    EXPECT_GT(norm, 0.0) << model_kind_name(kind);
  }
}

TEST(Gradients, FullModelMatchesFiniteDifferences) {
  FdOptions fd;
  fd.tolerance = 1e-4;
  fd.samples = 150;
  const auto r = full_model_gradcheck(1, fd);
  EXPECT_LE(r.nodes, 30u);
  EXPECT_LE(r.documents, 20u);
  EXPECT_GE(r.report.coords.size(), 100u);
  EXPECT_TRUE(r.report.pass) << "max error " << r.report.max_error;
}

class BaselineGradient : public ::testing::TestWithParam<ModelKind> {};

TEST_P(BaselineGradient, MatchesFiniteDifferences) {
  ShopFixture f;
  const HyperParams hp = small_hp();
  ParamStore p = init_model_params(GetParam(), hp, f.inputs, 6);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (auto& [name, t] : p)
    if (name.find("norm") != std::string::npos)
      for (double& v : t.values()) v += jitter(rng);
  const Tensor probe_w = glorot(3, hp.d, rng);
  const ModelKind kind = GetParam();
  const Objective f_obj = [&](Tape& tape, const ParamStore& q) {
    return sum_all(mask_mul(model_forward(tape, q, kind, hp, f.inputs), probe_w));
  };
  FdOptions fd;
  fd.samples = 150;
  const auto r = fd_check(f_obj, p, fd);
  EXPECT_TRUE(r.pass) << "max error " << r.max_error;
}

INSTANTIATE_TEST_SUITE_P(Kinds, BaselineGradient,
                         ::testing::Values(ModelKind::kDhgnet, ModelKind::kGat, ModelKind::kGcn, ModelKind::kRgcn),
                         [](const auto& info) {
                           std::string s = model_kind_name(info.param);
                           s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
                           return s;
                         });

// --- attention report ----------------------------------------------------------

TEST(AttentionReport, SingletonNeighborHasWeightOne) {
  ShopFixture f;
  Model m;
  m.hyper = small_hp();
  m.inputs = &f.inputs;
  const ParamStore p = init_params(m, 2);
  const auto report = attention_report(m, p);
  const auto it = std::find_if(report.begin(), report.end(), [](const auto& w) { return w.word == "อาหาร"; });
  ASSERT_NE(it, report.end());
  ASSERT_EQ(it->neighbors.size(), 1u);
  EXPECT_EQ(it->neighbors[0].neighbor, "food");
  EXPECT_NEAR(it->neighbors[0].alpha, 1.0, 1e-15);
}

TEST(AttentionReport, ZeroAttentionVectorsGiveUniformWeights) {
  ShopFixture f;
  Model m;
  m.hyper = small_hp();
  m.inputs = &f.inputs;
  ParamStore p = init_params(m, 2);
  for (auto& [name, t] : p)
    if (name.ends_with(".a") || name.ends_with(".a1")) t.fill(0.0);
  const auto report = attention_report(m, p);
  for (const auto& wa : report) {
    if (wa.word != "ร้าน") continue;
    ASSERT_EQ(wa.neighbors.size(), 4u);
    for (const auto& n : wa.neighbors) EXPECT_NEAR(n.alpha, 0.5, 1e-12);
    ASSERT_EQ(wa.pair_weights.size(), 3u);
    for (const auto& [pair, w] : wa.pair_weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-12) << pair;
  }
}

TEST(AttentionReport, TopKAndJsonLines) {
  ShopFixture f;
  Model m;
  m.hyper = small_hp();
  m.inputs = &f.inputs;
  const ParamStore p = init_params(m, 2);
  const auto report = attention_report(m, p, 1);
  for (const auto& wa : report) EXPECT_EQ(wa.neighbors.size(), 1u);
  std::ostringstream os;
  write_attention_jsonl(os, report);
  std::istringstream is(os.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("word"));
    ++lines;
  }
  EXPECT_GT(lines, 0u);
  m.kind = ModelKind::kGcn;
  EXPECT_TRUE(attention_report(m, init_params(m, 2)).empty());
}
