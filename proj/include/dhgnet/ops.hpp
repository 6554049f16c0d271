#pragma once

// Differentiable primitives recorded on a Tape. Each op validates shapes
// before computing anything and records a backward rule only when one of
// its inputs needs a gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhgnet/tape.hpp"
#include "dhgnet/tensor.hpp"

namespace dhgnet {

namespace detail {

inline Tape& same_tape(std::span<const Var> vars, const char* op) {
  if (vars.empty() || !vars.front().valid()) throw ShapeError(std::string(op) + ": no operands");
  Tape* t = vars.front().tape();
  for (const Var& v : vars) {
    if (v.tape() != t) throw ShapeError(std::string(op) + ": operands from different tapes");
  }
  return *t;
}

inline double gelu_value(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_derivative(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

}  // namespace detail

/// a * b
inline Var matmul(Var a, Var b) {
  const Var in[] = {a, b};
  Tape& t = detail::same_tape(in, "matmul");
  return t.record(
      matmul_raw(a.value(), b.value()), in,
      [a, b](Tape& tp, const Tensor& g) {
        if (tp.wants_grad(a)) detail::accumulate(tp, a, matmul_raw(g, b.value(), true));
        if (tp.wants_grad(b)) detail::accumulate(tp, b, matmul_tn_raw(a.value(), g));
      },
      "matmul");
}

/// a * b^T. With a holding one feature row per node and b a (out x in)
/// weight matrix this applies the linear map to every row.
inline Var matmul_t(Var a, Var b) {
  const Var in[] = {a, b};
  Tape& t = detail::same_tape(in, "matmul_t");
  return t.record(
      matmul_raw(a.value(), b.value(), true), in,
      [a, b](Tape& tp, const Tensor& g) {
        if (tp.wants_grad(a)) detail::accumulate(tp, a, matmul_raw(g, b.value()));
        if (tp.wants_grad(b)) detail::accumulate(tp, b, matmul_tn_raw(g, a.value()));
      },
      "matmul_t");
}

/// Elementwise a + b. `b` may also be a single row broadcast over a's rows.
inline Var add(Var a, Var b) {
  const Var in[] = {a, b};
  Tape& t = detail::same_tape(in, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = !av.same_shape(bv);
  if (broadcast && !(bv.rows() == 1 && bv.cols() == av.cols())) {
    throw ShapeError("add: shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto orow = out.row(r);
    const auto brow = bv.row(broadcast ? 0 : r);
    for (std::size_t c = 0; c < out.cols(); ++c) orow[c] += brow[c];
  }
  return t.record(
      std::move(out), in,
      [a, b, broadcast](Tape& tp, const Tensor& g) {
        detail::accumulate(tp, a, g);
        if (!tp.wants_grad(b)) return;
        if (!broadcast) {
          detail::accumulate(tp, b, g);
          return;
        }
        Tensor gb(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
        detail::accumulate(tp, b, gb);
      },
      "add");
}

inline Var scale(Var a, double s) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "scale");
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return t.record(
      std::move(out), in,
      [a, s](Tape& tp, const Tensor& g) {
        Tensor ga = g;
        for (double& v : ga.values()) v *= s;
        detail::accumulate(tp, a, ga);
      },
      "scale");
}

/// Elementwise product with a constant mask (dropout).
inline Var mask_mul(Var a, Tensor mask) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "mask_mul");
  a.value().require_same_shape(mask, "mask_mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return t.record(
      std::move(out), in,
      [a, mask = std::move(mask)](Tape& tp, const Tensor& g) {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= mask[i];
        detail::accumulate(tp, a, ga);
      },
      "mask_mul");
}

/// Horizontal concatenation [a_1 | a_2 | ...]; all parts share a row count.
inline Var concat_cols(std::span<const Var> parts) {
  Tape& t = detail::same_tape(parts, "concat_cols");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + offset);
    offset += pv.cols();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return t.record(
      std::move(out), parts,
      [keep](Tape& tp, const Tensor& g) {
        std::size_t off = 0;
        for (const Var& p : keep) {
          const std::size_t pc = p.cols();
          if (tp.wants_grad(p)) {
            Tensor gp(g.rows(), pc);
            for (std::size_t r = 0; r < g.rows(); ++r)
              for (std::size_t c = 0; c < pc; ++c) gp(r, c) = g(r, off + c);
            detail::accumulate(tp, p, gp);
          }
          off += pc;
        }
      },
      "concat_cols");
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// Vertical stacking; all parts share a column count.
inline Var concat_rows(std::span<const Var> parts) {
  Tape& t = detail::same_tape(parts, "concat_rows");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  std::vector<Var> keep(parts.begin(), parts.end());
  return t.record(
      Tensor(rows, cols, std::move(data)), parts,
      [keep](Tape& tp, const Tensor& g) {
        std::size_t off = 0;
        for (const Var& p : keep) {
          const std::size_t n = p.value().size();
          if (tp.wants_grad(p)) {
            Tensor gp(p.rows(), p.cols(),
                      std::vector<double>(g.data().begin() + static_cast<std::ptrdiff_t>(off),
                                          g.data().begin() + static_cast<std::ptrdiff_t>(off + n)));
            detail::accumulate(tp, p, gp);
          }
          off += n;
        }
      },
      "concat_rows");
}

inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

/// out[i] = a[index[i]]
inline Var row_select(Var a, std::vector<std::size_t> index) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "row_select");
  const Tensor& av = a.value();
  Tensor out(index.size(), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows()) throw ShapeError("row_select: index out of range");
    std::copy(av.row(index[i]).begin(), av.row(index[i]).end(), out.row(i).begin());
  }
  return t.record(
      std::move(out), in,
      [a, index = std::move(index)](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_ref(a.id());
        for (std::size_t i = 0; i < index.size(); ++i) {
          auto dst = ga.row(index[i]);
          const auto src = g.row(i);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
      },
      "row_select");
}

/// For each segment s: out[targets[s]] += sum_{e in s} weights[e] * values[gather[e]].
/// Output rows no segment targets are zero.
inline Var segment_weighted_sum(Var values, std::vector<std::size_t> gather, Var weights,
                                const Segments& seg) {
  const Var in[] = {values, weights};
  Tape& t = detail::same_tape(in, "segment_weighted_sum");
  seg.validate();
  const Tensor& vv = values.value();
  const Tensor& wv = weights.value();
  if (gather.size() != seg.num_entries() || wv.rows() != gather.size() || wv.cols() != 1) {
    throw ShapeError("segment_weighted_sum: entry count mismatch");
  }
  for (std::size_t idx : gather) {
    if (idx >= vv.rows()) throw ShapeError("segment_weighted_sum: gather index out of range");
  }
  Tensor out(seg.num_outputs, vv.cols());
  for (std::size_t s = 0; s < seg.num_segments(); ++s) {
    auto orow = out.row(seg.targets[s]);
    for (std::size_t e = seg.offsets[s]; e < seg.offsets[s + 1]; ++e) {
      const double w = wv[e];
      const auto vrow = vv.row(gather[e]);
      for (std::size_t c = 0; c < orow.size(); ++c) orow[c] += w * vrow[c];
    }
  }
  return t.record(
      std::move(out), in,
      [values, weights, gather = std::move(gather), seg](Tape& tp, const Tensor& g) {
        const Tensor& vv2 = values.value();
        const Tensor& wv2 = weights.value();
        const bool gv = tp.wants_grad(values);
        const bool gw = tp.wants_grad(weights);
        Tensor* gval = gv ? &tp.grad_ref(values.id()) : nullptr;
        Tensor* gwt = gw ? &tp.grad_ref(weights.id()) : nullptr;
        for (std::size_t s = 0; s < seg.num_segments(); ++s) {
          const auto grow = g.row(seg.targets[s]);
          for (std::size_t e = seg.offsets[s]; e < seg.offsets[s + 1]; ++e) {
            const auto vrow = vv2.row(gather[e]);
            if (gv) {
              auto dst = gval->row(gather[e]);
              for (std::size_t c = 0; c < grow.size(); ++c) dst[c] += wv2[e] * grow[c];
            }
            if (gw) {
              double dot = 0.0;
              for (std::size_t c = 0; c < grow.size(); ++c) dot += vrow[c] * grow[c];
              (*gwt)[e] += dot;
            }
          }
        }
      },
      "segment_weighted_sum");
}

/// Softmax of a column of scores taken independently within each segment.
/// Entries outside a segment never interact with it.
inline Var masked_segment_softmax(Var scores, const Segments& seg) {
  const Var in[] = {scores};
  Tape& t = detail::same_tape(in, "masked_segment_softmax");
  seg.validate();
  const Tensor& sv = scores.value();
  if (sv.cols() != 1 || sv.rows() != seg.num_entries()) {
    throw ShapeError("masked_segment_softmax: scores must be a column with one entry per member");
  }
  Tensor out(sv.rows(), 1);
  for (std::size_t s = 0; s < seg.num_segments(); ++s) {
    const std::size_t b = seg.offsets[s];
    const std::size_t e = seg.offsets[s + 1];
    double mx = sv[b];
    for (std::size_t i = b + 1; i < e; ++i) mx = std::max(mx, sv[i]);
    double z = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      out[i] = std::exp(sv[i] - mx);
      z += out[i];
    }
    for (std::size_t i = b; i < e; ++i) out[i] /= z;
  }
  Tensor saved = out;
  return t.record(
      std::move(out), in,
      [scores, saved = std::move(saved), seg](Tape& tp, const Tensor& g) {
        Tensor gs(saved.rows(), 1);
        for (std::size_t s = 0; s < seg.num_segments(); ++s) {
          double dot = 0.0;
          for (std::size_t i = seg.offsets[s]; i < seg.offsets[s + 1]; ++i) dot += saved[i] * g[i];
          for (std::size_t i = seg.offsets[s]; i < seg.offsets[s + 1]; ++i)
            gs[i] = saved[i] * (g[i] - dot);
        }
        detail::accumulate(tp, scores, gs);
      },
      "masked_segment_softmax");
}

inline Var leaky_relu(Var a, double slope = 0.2) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "leaky_relu");
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : slope * v;
  return t.record(
      std::move(out), in,
      [a, slope](Tape& tp, const Tensor& g) {
        const Tensor& av = a.value();
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = av[i] > 0.0 ? g[i] : slope * g[i];
        detail::accumulate(tp, a, ga);
      },
      "leaky_relu");
}

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline Var gelu(Var a) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "gelu");
  Tensor out = a.value();
  for (double& v : out.values()) v = detail::gelu_value(v);
  return t.record(
      std::move(out), in,
      [a](Tape& tp, const Tensor& g) {
        const Tensor& av = a.value();
        Tensor ga(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * detail::gelu_derivative(av[i]);
        detail::accumulate(tp, a, ga);
      },
      "gelu");
}

/// Row-wise layer normalization with population variance. `gamma` and
/// `beta` (each 1 x cols) apply the affine step when given.
inline Var layer_norm(Var a, double eps, std::optional<Var> gamma = std::nullopt,
                      std::optional<Var> beta = std::nullopt) {
  std::vector<Var> in{a};
  if (gamma) in.push_back(*gamma);
  if (beta) in.push_back(*beta);
  Tape& t = detail::same_tape(in, "layer_norm");
  const Tensor& av = a.value();
  const std::size_t n = av.rows();
  const std::size_t c = av.cols();
  if (c == 0) throw ShapeError("layer_norm: zero-width rows");
  for (const auto& p : {gamma, beta}) {
    if (p && (p->rows() != 1 || p->cols() != c)) throw ShapeError("layer_norm: affine shape mismatch");
  }
  Tensor xhat(n, c);
  std::vector<double> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = av.row(r);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto h = xhat.row(r);
    for (std::size_t j = 0; j < c; ++j) h[j] = (x[j] - mean) * inv_std[r];
  }
  Tensor out = xhat;
  for (std::size_t r = 0; r < n; ++r) {
    auto o = out.row(r);
    for (std::size_t j = 0; j < c; ++j) {
      if (gamma) o[j] *= gamma->value()[j];
      if (beta) o[j] += beta->value()[j];
    }
  }
  return t.record(
      std::move(out), in,
      [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                             const Tensor& g) {
        const std::size_t rows = g.rows();
        const std::size_t cols = g.cols();
        if (gamma && tp.wants_grad(*gamma)) {
          Tensor gg(1, cols);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < cols; ++j) gg[j] += g(r, j) * xhat(r, j);
          detail::accumulate(tp, *gamma, gg);
        }
        if (beta && tp.wants_grad(*beta)) {
          Tensor gb(1, cols);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < cols; ++j) gb[j] += g(r, j);
          detail::accumulate(tp, *beta, gb);
        }
        if (!tp.wants_grad(a)) return;
        Tensor ga(rows, cols);
        std::vector<double> dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_d = 0.0;
          double sum_dx = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            dxhat[j] = g(r, j) * (gamma ? gamma->value()[j] : 1.0);
            sum_d += dxhat[j];
            sum_dx += dxhat[j] * xhat(r, j);
          }
          const double k = inv_std[r] / static_cast<double>(cols);
          for (std::size_t j = 0; j < cols; ++j) {
            ga(r, j) = k * (static_cast<double>(cols) * dxhat[j] - sum_d - xhat(r, j) * sum_dx);
          }
        }
        detail::accumulate(tp, a, ga);
      },
      "layer_norm");
}

/// Row-wise log-softmax.
inline Var log_softmax(Var a) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "log_softmax");
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (double& v : row) v -= lse;
  }
  Tensor saved = out;
  return t.record(
      std::move(out), in,
      [a, saved = std::move(saved)](Tape& tp, const Tensor& g) {
        Tensor ga(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double gsum = 0.0;
          for (double v : g.row(r)) gsum += v;
          for (std::size_t c = 0; c < g.cols(); ++c)
            ga(r, c) = g(r, c) - std::exp(saved(r, c)) * gsum;
        }
        detail::accumulate(tp, a, ga);
      },
      "log_softmax");
}

/// Mean negative log-likelihood of `labels` under row-wise log-probabilities.
inline Var nll_loss(Var log_probs, std::vector<std::size_t> labels) {
  const Var in[] = {log_probs};
  Tape& t = detail::same_tape(in, "nll_loss");
  const Tensor& lp = log_probs.value();
  if (labels.size() != lp.rows() || labels.empty()) throw ShapeError("nll_loss: label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= lp.cols()) throw ShapeError("nll_loss: label out of range");
    total -= lp(i, labels[i]);
  }
  const double n = static_cast<double>(labels.size());
  return t.record(
      Tensor(1, 1, total / n), in,
      [log_probs, labels = std::move(labels), n](Tape& tp, const Tensor& g) {
        Tensor& gl = tp.grad_ref(log_probs.id());
        for (std::size_t i = 0; i < labels.size(); ++i) gl(i, labels[i]) -= g[0] / n;
      },
      "nll_loss");
}

inline Var sum_all(Var a) {
  const Var in[] = {a};
  Tape& t = detail::same_tape(in, "sum_all");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return t.record(
      Tensor(1, 1, s), in,
      [a](Tape& tp, const Tensor& g) {
        detail::accumulate(tp, a, Tensor(a.rows(), a.cols(), g[0]));
      },
      "sum_all");
}

/// Cosine similarity of corresponding rows of a and b (n x 1).
inline Var rowwise_cosine(Var a, Var b) {
  const Var in[] = {a, b};
  Tape& t = detail::same_tape(in, "rowwise_cosine");
  a.value().require_same_shape(b.value(), "rowwise_cosine");
  constexpr double kTiny = 1e-12;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t n = av.rows();
  std::vector<double> na(n), nb(n);
  Tensor out(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) {
      dot += av(r, c) * bv(r, c);
      sa += av(r, c) * av(r, c);
      sb += bv(r, c) * bv(r, c);
    }
    na[r] = std::max(std::sqrt(sa), kTiny);
    nb[r] = std::max(std::sqrt(sb), kTiny);
    out[r] = dot / (na[r] * nb[r]);
  }
  Tensor cos = out;
  return t.record(
      std::move(out), in,
      [a, b, na = std::move(na), nb = std::move(nb), cos = std::move(cos)](Tape& tp,
                                                                          const Tensor& g) {
        const Tensor& av2 = a.value();
        const Tensor& bv2 = b.value();
        Tensor ga(av2.rows(), av2.cols());
        Tensor gb(bv2.rows(), bv2.cols());
        for (std::size_t r = 0; r < av2.rows(); ++r) {
          const double inv = 1.0 / (na[r] * nb[r]);
          for (std::size_t c = 0; c < av2.cols(); ++c) {
            ga(r, c) = g[r] * (bv2(r, c) * inv - cos[r] * av2(r, c) / (na[r] * na[r]));
            gb(r, c) = g[r] * (av2(r, c) * inv - cos[r] * bv2(r, c) / (nb[r] * nb[r]));
          }
        }
        detail::accumulate(tp, a, ga);
        detail::accumulate(tp, b, gb);
      },
      "rowwise_cosine");
}

}  // namespace dhgnet
