#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "nalda/embed.hpp"
#include "nalda/matrix.hpp"
#include "nalda/rng.hpp"

namespace nalda {

// Two-hidden-layer prediction head: scores = S_C s(S_B s(S_A f + T_A) + T_B) + T_C
// with elementwise sigmoid s. Classification heads softmax the scores; a
// regression head has a single output row.
struct HeadParams {
  Matrix s_a;                // H1 x K
  std::vector<double> t_a;   // H1
  Matrix s_b;                // H2 x H1
  std::vector<double> t_b;   // H2
  Matrix s_c;                // S x H2
  std::vector<double> t_c;   // S
  double dropout_p = 0.0;

  int input_dim() const { return s_a.cols(); }
  int h1() const { return s_a.rows(); }
  int h2() const { return s_b.rows(); }
  int output_dim() const { return s_c.rows(); }

  static HeadParams init(int K, int H1, int H2, int S, double dropout_p, std::uint64_t seed) {
    if (K < 1 || H1 < 1 || H2 < 1 || S < 1)
      throw std::invalid_argument("head dimensions must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw std::invalid_argument("dropout probability must lie in [0,1)");
    HeadParams p;
    Rng rng(seed);
    auto xavier = [&rng](Matrix& m, int fan_in, int fan_out) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& x : m.data()) x = rng.uniform(-limit, limit);
    };
    p.s_a = Matrix(H1, K);
    xavier(p.s_a, K, H1);
    p.t_a.assign(static_cast<std::size_t>(H1), 0.0);
    p.s_b = Matrix(H2, H1);
    xavier(p.s_b, H1, H2);
    p.t_b.assign(static_cast<std::size_t>(H2), 0.0);
    p.s_c = Matrix(S, H2);
    xavier(p.s_c, H2, S);
    p.t_c.assign(static_cast<std::size_t>(S), 0.0);
    p.dropout_p = dropout_p;
    return p;
  }
};

// Inverted-dropout keep masks for a batch, one (H1 + H2) byte row per
// document. Identical seeds give identical masks.
struct BatchMasks {
  int h1 = 0, h2 = 0;
  std::vector<std::uint8_t> data;

  static BatchMasks draw(int batch, int h1, int h2, double dropout_p, Rng& rng) {
    BatchMasks m;
    m.h1 = h1;
    m.h2 = h2;
    m.data.resize(static_cast<std::size_t>(batch) * (h1 + h2));
    for (auto& bit : m.data) bit = rng.uniform01() >= dropout_p ? 1 : 0;
    return m;
  }

  const std::uint8_t* mask1(int doc) const {
    return data.data() + static_cast<std::size_t>(doc) * (h1 + h2);
  }
  const std::uint8_t* mask2(int doc) const { return mask1(doc) + h1; }
};

struct HeadActivations {
  std::vector<double> h1, h1d, h2, h2d, scores, probs;
};

// Forward pass for one document. Masks, when given with dropout_p > 0, zero
// hidden units after each sigmoid and scale survivors by 1/(1-p); inference
// passes no masks. probs is filled only when softmax is requested.
inline void head_forward(const HeadParams& p, std::span<const double> feature,
                         const std::uint8_t* m1, const std::uint8_t* m2, bool softmax,
                         HeadActivations& act) {
  const int H1 = p.h1(), H2 = p.h2(), S = p.output_dim();
  const bool drop = p.dropout_p > 0.0 && m1 != nullptr && m2 != nullptr;
  const double scale = drop ? 1.0 / (1.0 - p.dropout_p) : 1.0;

  act.h1.resize(static_cast<std::size_t>(H1));
  act.h1d.resize(static_cast<std::size_t>(H1));
  for (int j = 0; j < H1; ++j) {
    double z = p.t_a[static_cast<std::size_t>(j)];
    const auto row = p.s_a.row(j);
    for (std::size_t k = 0; k < feature.size(); ++k) z += row[k] * feature[k];
    const double h = sigmoid(z);
    act.h1[static_cast<std::size_t>(j)] = h;
    act.h1d[static_cast<std::size_t>(j)] = drop ? (m1[j] ? h * scale : 0.0) : h;
  }

  act.h2.resize(static_cast<std::size_t>(H2));
  act.h2d.resize(static_cast<std::size_t>(H2));
  for (int j = 0; j < H2; ++j) {
    double z = p.t_b[static_cast<std::size_t>(j)];
    const auto row = p.s_b.row(j);
    for (int i = 0; i < H1; ++i) z += row[static_cast<std::size_t>(i)] * act.h1d[static_cast<std::size_t>(i)];
    const double h = sigmoid(z);
    act.h2[static_cast<std::size_t>(j)] = h;
    act.h2d[static_cast<std::size_t>(j)] = drop ? (m2[j] ? h * scale : 0.0) : h;
  }

  act.scores.resize(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    double z = p.t_c[static_cast<std::size_t>(s)];
    const auto row = p.s_c.row(s);
    for (int i = 0; i < H2; ++i) z += row[static_cast<std::size_t>(i)] * act.h2d[static_cast<std::size_t>(i)];
    act.scores[static_cast<std::size_t>(s)] = z;
  }

  if (softmax) {
    act.probs.resize(static_cast<std::size_t>(S));
    double m = act.scores[0];
    for (double s : act.scores) m = std::max(m, s);
    double sum = 0.0;
    for (int s = 0; s < S; ++s) {
      const double e = std::exp(act.scores[static_cast<std::size_t>(s)] - m);
      act.probs[static_cast<std::size_t>(s)] = e;
      sum += e;
    }
    for (double& x : act.probs) x /= sum;
  }
}

struct HeadGrads {
  Matrix s_a;
  std::vector<double> t_a;
  Matrix s_b;
  std::vector<double> t_b;
  Matrix s_c;
  std::vector<double> t_c;

  static HeadGrads zeros_like(const HeadParams& p) {
    HeadGrads g;
    g.s_a = Matrix(p.h1(), p.input_dim());
    g.t_a.assign(static_cast<std::size_t>(p.h1()), 0.0);
    g.s_b = Matrix(p.h2(), p.h1());
    g.t_b.assign(static_cast<std::size_t>(p.h2()), 0.0);
    g.s_c = Matrix(p.output_dim(), p.h2());
    g.t_c.assign(static_cast<std::size_t>(p.output_dim()), 0.0);
    return g;
  }
};

namespace detail {

// Backprop from dscores to parameter gradients and the feature gradient.
// Activations must come from the matching forward call.
inline void head_backward(const HeadParams& p, std::span<const double> feature,
                          const std::uint8_t* m1, const std::uint8_t* m2,
                          const HeadActivations& act, std::span<const double> dscores,
                          HeadGrads& g, std::span<double> dfeature) {
  const int H1 = p.h1(), H2 = p.h2(), S = p.output_dim();
  const bool drop = p.dropout_p > 0.0 && m1 != nullptr && m2 != nullptr;
  const double scale = drop ? 1.0 / (1.0 - p.dropout_p) : 1.0;

  std::vector<double> dh2d(static_cast<std::size_t>(H2), 0.0);
  for (int s = 0; s < S; ++s) {
    const double ds = dscores[static_cast<std::size_t>(s)];
    auto grow = g.s_c.row(s);
    const auto prow = p.s_c.row(s);
    for (int i = 0; i < H2; ++i) {
      grow[static_cast<std::size_t>(i)] += ds * act.h2d[static_cast<std::size_t>(i)];
      dh2d[static_cast<std::size_t>(i)] += prow[static_cast<std::size_t>(i)] * ds;
    }
    g.t_c[static_cast<std::size_t>(s)] += ds;
  }

  std::vector<double> db(static_cast<std::size_t>(H2));
  for (int j = 0; j < H2; ++j) {
    const double dh2 = drop ? (m2[j] ? dh2d[static_cast<std::size_t>(j)] * scale : 0.0)
                            : dh2d[static_cast<std::size_t>(j)];
    const double h = act.h2[static_cast<std::size_t>(j)];
    db[static_cast<std::size_t>(j)] = dh2 * h * (1.0 - h);
  }

  std::vector<double> dh1d(static_cast<std::size_t>(H1), 0.0);
  for (int j = 0; j < H2; ++j) {
    const double d = db[static_cast<std::size_t>(j)];
    auto grow = g.s_b.row(j);
    const auto prow = p.s_b.row(j);
    for (int i = 0; i < H1; ++i) {
      grow[static_cast<std::size_t>(i)] += d * act.h1d[static_cast<std::size_t>(i)];
      dh1d[static_cast<std::size_t>(i)] += prow[static_cast<std::size_t>(i)] * d;
    }
    g.t_b[static_cast<std::size_t>(j)] += d;
  }

  std::vector<double> da(static_cast<std::size_t>(H1));
  for (int j = 0; j < H1; ++j) {
    const double dh1 = drop ? (m1[j] ? dh1d[static_cast<std::size_t>(j)] * scale : 0.0)
                            : dh1d[static_cast<std::size_t>(j)];
    const double h = act.h1[static_cast<std::size_t>(j)];
    da[static_cast<std::size_t>(j)] = dh1 * h * (1.0 - h);
  }

  for (int j = 0; j < H1; ++j) {
    const double d = da[static_cast<std::size_t>(j)];
    auto grow = g.s_a.row(j);
    const auto prow = p.s_a.row(j);
    for (std::size_t k = 0; k < feature.size(); ++k) {
      grow[k] += d * feature[k];
      dfeature[k] += prow[k] * d;
    }
    g.t_a[static_cast<std::size_t>(j)] += d;
  }
}

}  // namespace detail

// Mean cross-entropy over the batch, with gradients for every head parameter
// and for the input features. Labels are 0-based class ids; the loss uses
// log-sum-exp directly, never the log of a computed softmax. probs, when
// non-null, receives the per-document class probabilities.
inline double loss_and_grads_classification(const HeadParams& p, const Matrix& features,
                                            std::span<const int> labels, const BatchMasks* masks,
                                            HeadGrads& grads, Matrix& dfeatures,
                                            Matrix* probs = nullptr) {
  const int B = features.rows();
  const int S = p.output_dim();
  grads = HeadGrads::zeros_like(p);
  dfeatures = Matrix(B, features.cols());
  if (probs) *probs = Matrix(B, S);
  if (B == 0) return 0.0;

  double loss = 0.0;
  HeadActivations act;
  std::vector<double> dscores(static_cast<std::size_t>(S));
  for (int d = 0; d < B; ++d) {
    const std::uint8_t* m1 = masks ? masks->mask1(d) : nullptr;
    const std::uint8_t* m2 = masks ? masks->mask2(d) : nullptr;
    head_forward(p, features.row(d), m1, m2, true, act);

    double mx = act.scores[0];
    for (double s : act.scores) mx = std::max(mx, s);
    double lse = 0.0;
    for (double s : act.scores) lse += std::exp(s - mx);
    lse = mx + std::log(lse);
    const int y = labels[static_cast<std::size_t>(d)];
    loss += (lse - act.scores[static_cast<std::size_t>(y)]) / B;

    for (int s = 0; s < S; ++s)
      dscores[static_cast<std::size_t>(s)] =
          (act.probs[static_cast<std::size_t>(s)] - (s == y ? 1.0 : 0.0)) / B;
    detail::head_backward(p, features.row(d), m1, m2, act, dscores, grads, dfeatures.row(d));
    if (probs)
      for (int s = 0; s < S; ++s) (*probs)(d, s) = act.probs[static_cast<std::size_t>(s)];
  }
  return loss;
}

// Sum of squared residuals over the batch for a scalar-output head, with the
// same gradient plumbing.
inline double loss_and_grads_regression(const HeadParams& p, const Matrix& features,
                                        std::span<const double> targets, const BatchMasks* masks,
                                        HeadGrads& grads, Matrix& dfeatures,
                                        std::vector<double>* scores_out = nullptr) {
  if (p.output_dim() != 1)
    throw std::invalid_argument("regression head must have a single output");
  const int B = features.rows();
  grads = HeadGrads::zeros_like(p);
  dfeatures = Matrix(B, features.cols());
  if (scores_out) scores_out->assign(static_cast<std::size_t>(B), 0.0);

  double loss = 0.0;
  HeadActivations act;
  std::vector<double> dscores(1);
  for (int d = 0; d < B; ++d) {
    const std::uint8_t* m1 = masks ? masks->mask1(d) : nullptr;
    const std::uint8_t* m2 = masks ? masks->mask2(d) : nullptr;
    head_forward(p, features.row(d), m1, m2, false, act);
    const double r = targets[static_cast<std::size_t>(d)] - act.scores[0];
    loss += r * r;
    dscores[0] = -2.0 * r;
    detail::head_backward(p, features.row(d), m1, m2, act, dscores, grads, dfeatures.row(d));
    if (scores_out) (*scores_out)[static_cast<std::size_t>(d)] = act.scores[0];
  }
  return loss;
}

}  // namespace nalda
