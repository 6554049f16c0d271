#pragma once

// Mean-pool + one-hidden-layer MLP document classifier over target
// embeddings, and the end-to-end training loop that back-propagates its
// loss through the embedding producer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhgnet/ingest.hpp"
#include "dhgnet/metrics.hpp"
#include "dhgnet/model.hpp"
#include "dhgnet/ops.hpp"
#include "dhgnet/optim.hpp"
#include "dhgnet/tape.hpp"

namespace dhgnet {

namespace names {
inline std::string clf_wh() { return "clf.Wh"; }
inline std::string clf_bh() { return "clf.bh"; }
inline std::string clf_wo() { return "clf.Wo"; }
inline std::string clf_bo() { return "clf.bo"; }
}  // namespace names

inline void init_classifier_params(ParamStore& p, std::size_t d, std::size_t hidden,
                                   std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("classifier needs at least two classes");
  if (hidden < 1) throw std::invalid_argument("classifier hidden width must be positive");
  auto rng = stream_rng(seed, kStreamClassifier);
  p.insert_or_assign(names::clf_wh(), glorot(hidden, d, rng));
  p.insert_or_assign(names::clf_bh(), Tensor(1, hidden));
  p.insert_or_assign(names::clf_wo(), glorot(num_classes, hidden, rng));
  p.insert_or_assign(names::clf_bo(), Tensor(1, num_classes));
}

/// Logits (docs x classes): mean-pooled token rows -> GELU(Wh x + bh) -> Wo h + bo.
inline Var classifier_logits(Tape& tape, const ParamStore& params, Var embeddings,
                             std::span<const Document* const> docs) {
  std::vector<std::size_t> gather;
  std::vector<double> weights;
  Segments seg;
  seg.num_outputs = docs.size();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& toks = docs[i]->tokens;
    if (toks.empty()) throw std::invalid_argument("cannot classify an empty document");
    for (NodeId t : toks) {
      if (t >= embeddings.rows()) throw std::out_of_range("token outside the target vocabulary");
      gather.push_back(t);
      weights.push_back(1.0 / static_cast<double>(toks.size()));
    }
    seg.targets.push_back(i);
    seg.offsets.push_back(gather.size());
  }
  Var pooled = segment_weighted_sum(embeddings, std::move(gather),
                                    tape.constant(Tensor::column(std::move(weights))), seg);
  Var hidden = gelu(add(matmul_t(pooled, tape.param(params, names::clf_wh())),
                        tape.param(params, names::clf_bh())));
  return add(matmul_t(hidden, tape.param(params, names::clf_wo())), tape.param(params, names::clf_bo()));
}

/// Class probabilities of one document given target embeddings.
inline std::vector<double> predict(const ParamStore& params, const Tensor& target_embeddings,
                                   const Document& doc) {
  Tape tape(false);
  const Document* docs[] = {&doc};
  Var lp = log_softmax(classifier_logits(tape, params, tape.constant(target_embeddings), docs));
  std::vector<double> out(lp.cols());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::exp(lp.value()(0, c));
  return out;
}

/// What is being trained: an embedding producer plus the classifier head.
struct Model {
  ModelKind kind = ModelKind::kDhgnet;
  HyperParams hyper;
  std::size_t hidden = 32;
  std::size_t num_classes = 2;
  const GraphInputs* inputs = nullptr;
  /// Skip graph propagation and feed the raw target table to the classifier.
  bool bypass_gnn = false;

  ModelKind effective_kind() const { return bypass_gnn ? ModelKind::kNoDhgnet : kind; }
};

inline ParamStore init_params(const Model& m, std::uint64_t seed) {
  if (!m.inputs) throw std::invalid_argument("model has no graph inputs");
  ParamStore p = init_model_params(m.kind, m.hyper, *m.inputs, seed);
  init_classifier_params(p, m.hyper.d, m.hidden, m.num_classes, seed);
  return p;
}

inline Var embeddings_on(Tape& tape, const Model& m, const ParamStore& params,
                         const ForwardOptions& opt = {}) {
  return model_forward(tape, params, m.effective_kind(), m.hyper, *m.inputs, opt);
}

/// Target embeddings in evaluation mode.
inline Tensor target_embeddings(const Model& m, const ParamStore& params) {
  Tape tape(false);
  return embeddings_on(tape, m, params).value();
}

struct SplitEval {
  Metrics metrics;
  double loss = 0.0;
  std::vector<std::size_t> predictions;
};

inline SplitEval evaluate_with(const ParamStore& params, const Tensor& embeddings,
                               const LabeledCorpus& corpus, std::size_t num_classes) {
  if (corpus.documents.empty()) throw std::invalid_argument("cannot evaluate an empty split");
  Tape tape(false);
  std::vector<const Document*> docs;
  std::vector<std::size_t> gold;
  for (const auto& d : corpus.documents) {
    docs.push_back(&d);
    gold.push_back(d.label);
  }
  Var lp = log_softmax(classifier_logits(tape, params, tape.constant(embeddings), docs));
  SplitEval out;
  out.loss = nll_loss(lp, gold).value()[0];
  const Tensor& v = lp.value();
  for (std::size_t i = 0; i < v.rows(); ++i) {
    auto row = v.row(i);
    out.predictions.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  out.metrics = classification_metrics(out.predictions, gold, num_classes);
  return out;
}

inline Metrics evaluate(const Model& m, const ParamStore& params, const LabeledCorpus& corpus) {
  return evaluate_with(params, target_embeddings(m, params), corpus, m.num_classes).metrics;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  AdamOptions adam;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double loss = 0.0;
};

struct TrainingState {
  ParamStore params;
  AdamState adam;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  ParamStore best;
  std::size_t best_epoch = 0;
  double best_valid_f1 = -1.0;
  std::vector<EpochRecord> history;
};

/// Training stopped on a non-finite value; `last_good` holds the parameters
/// from before the failing step.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, ParamStore last_good, std::size_t epoch)
      : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch) {}
  const ParamStore& last_good() const { return last_good_; }
  std::size_t epoch() const { return epoch_; }

 private:
  ParamStore last_good_;
  std::size_t epoch_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch cross-entropy training of classifier and embedding producer
/// together. After every epoch the train and valid splits are scored; the
/// parameters with the best validation macro-F1 are restored at the end.
inline TrainingState train(const Model& m, ParamStore init, const LabeledCorpus& train_split,
                           const LabeledCorpus& valid_split, const TrainOptions& opt,
                           const EpochCallback& on_epoch = {}) {
  if (train_split.documents.empty()) throw std::invalid_argument("training split is empty");
  if (valid_split.documents.empty()) throw std::invalid_argument("validation split is empty");
  if (opt.batch_size == 0) throw std::invalid_argument("batch size must be positive");

  TrainingState st;
  st.params = std::move(init);
  st.seed = opt.seed;
  st.best = st.params;
  auto data_rng = stream_rng(opt.seed, kStreamData);
  auto dropout_rng = stream_rng(opt.seed, 5);

  std::vector<std::size_t> order(train_split.documents.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), data_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += opt.batch_size) {
      std::vector<const Document*> batch;
      std::vector<std::size_t> labels;
      for (std::size_t i = b; i < std::min(order.size(), b + opt.batch_size); ++i) {
        batch.push_back(&train_split.documents[order[i]]);
        labels.push_back(batch.back()->label);
      }
      Gradients grads;
      double loss_value = 0.0;
      try {
        Tape tape;
        ForwardOptions fo;
        fo.dropout_rng = &dropout_rng;
        Var emb = embeddings_on(tape, m, st.params, fo);
        Var loss = nll_loss(log_softmax(classifier_logits(tape, st.params, emb, batch)), labels);
        loss_value = loss.value()[0];
        grads = tape.backward(loss);
      } catch (const NumericError& e) {
        throw TrainingAborted(std::string("non-finite value in epoch ") + std::to_string(epoch) +
                                  ": " + e.what(),
                              st.params, epoch);
      }
      if (!std::isfinite(loss_value)) {
        throw TrainingAborted("non-finite loss in epoch " + std::to_string(epoch), st.params, epoch);
      }
      ParamStore before = st.params;
      adam_step(st.adam, st.params, grads, opt.adam);
      for (const auto& [name, t] : st.params) {
        if (!t.all_finite()) {
          throw TrainingAborted("parameter " + name + " became non-finite in epoch " +
                                    std::to_string(epoch),
                                std::move(before), epoch);
        }
      }
      loss_sum += loss_value;
      ++batches;
    }
    st.epoch = epoch;

    const Tensor emb = target_embeddings(m, st.params);
    SplitEval tr = evaluate_with(st.params, emb, train_split, m.num_classes);
    SplitEval va = evaluate_with(st.params, emb, valid_split, m.num_classes);
    EpochRecord rt{epoch, "train", tr.metrics.accuracy, tr.metrics.macro_f1,
                   loss_sum / static_cast<double>(batches)};
    EpochRecord rv{epoch, "valid", va.metrics.accuracy, va.metrics.macro_f1, va.loss};
    st.history.push_back(rt);
    st.history.push_back(rv);
    if (on_epoch) {
      on_epoch(rt);
      on_epoch(rv);
    }
    if (va.metrics.macro_f1 > st.best_valid_f1) {
      st.best_valid_f1 = va.metrics.macro_f1;
      st.best_epoch = epoch;
      st.best = st.params;
    }
  }
  if (opt.epochs > 0) st.params = st.best;
  return st;
}

}  // namespace dhgnet
