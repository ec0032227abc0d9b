// Deliberately plain reference implementations used as test oracles. They
// share no code with the library beyond its data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/objective.hpp"

namespace oracle {

using gzsl::Matrix;
using gzsl::Vector;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double floor = 1e-8;
  return dot(a, b) / (std::max(std::sqrt(dot(a, a)), floor) * std::max(std::sqrt(dot(b, b)), floor));
}

inline std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline std::vector<double> column(const Matrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

// Neuron-by-neuron forward pass.
inline std::vector<double> mlp(const gzsl::MlpParams& p, std::vector<double> a) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const Matrix& w = p.weights[l];
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = p.biases[l][i];
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(i, j) * a[static_cast<std::size_t>(j)];
      const bool last = l + 1 == p.weights.size();
      next[static_cast<std::size_t>(i)] = last ? s : std::max(s, 0.0);
    }
    a = std::move(next);
  }
  return a;
}

inline std::vector<double> visual(const gzsl::ModelParams& p, std::vector<double> f) {
  if (p.encoder) f = mlp(*p.encoder, f);
  return mlp(p.visual_map, f);
}

inline double ranking_image(const std::vector<double>& scores, const std::vector<int>& y, double delta,
                            gzsl::RankNormalization norm) {
  double sum = 0.0;
  std::size_t np = 0, nn = 0;
  for (int v : y) (v == 1 ? np : nn) += 1;
  if (np == 0 || nn == 0) return 0.0;
  for (std::size_t p = 0; p < y.size(); ++p) {
    if (y[p] != 1) continue;
    for (std::size_t n = 0; n < y.size(); ++n) {
      if (y[n] != 0) continue;
      sum += std::max(delta + scores[n] - scores[p], 0.0);
    }
  }
  const double denom = norm == gzsl::RankNormalization::SeenClassCount ? static_cast<double>(y.size())
                                                                        : static_cast<double>(np * nn);
  return sum / denom;
}

// The composite objective evaluated straight from its definition.
inline gzsl::LossBreakdown objective(const gzsl::Batch& batch, const gzsl::ModelParams& params,
                                     const Matrix& seen_semantics, const gzsl::LossConfig& cfg) {
  const Eigen::Index n = batch.features.cols();
  const Eigen::Index s = seen_semantics.cols();
  std::vector<std::vector<double>> w(static_cast<std::size_t>(s)), phi(static_cast<std::size_t>(s));
  for (Eigen::Index c = 0; c < s; ++c) {
    w[static_cast<std::size_t>(c)] = column(seen_semantics, c);
    phi[static_cast<std::size_t>(c)] = mlp(params.semantic_map, w[static_cast<std::size_t>(c)]);
  }

  gzsl::LossBreakdown out;
  double align_sum = 0.0;
  std::size_t align_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::vector<double> z = visual(params, column(batch.features, i));
    std::vector<double> scores(static_cast<std::size_t>(s));
    std::vector<int> y(static_cast<std::size_t>(s));
    std::vector<double> wx(seen_semantics.rows(), 0.0);
    int positives = 0;
    for (Eigen::Index c = 0; c < s; ++c) {
      scores[static_cast<std::size_t>(c)] = cosine(z, phi[static_cast<std::size_t>(c)]);
      y[static_cast<std::size_t>(c)] = batch.labels(i, c);
      if (batch.labels(i, c) == 1) {
        ++positives;
        for (std::size_t k = 0; k < wx.size(); ++k) wx[k] += w[static_cast<std::size_t>(c)][k];
      }
    }
    out.rank += ranking_image(scores, y, cfg.delta, cfg.rank_normalization) / static_cast<double>(n);
    if (positives > 0) {
      for (double& x : wx) x /= positives;
      align_sum += 1.0 - cosine(z, mlp(params.semantic_map, wx));
      ++align_count;
    }
  }
  out.align = align_count ? align_sum / static_cast<double>(align_count) : 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    for (std::size_t b = 0; b < w.size(); ++b) {
      if (a != b) out.con += std::abs(cosine(w[a], w[b]) - cosine(phi[a], phi[b]));
    }
  }
  if (!cfg.terms.rank) out.rank = 0.0;
  if (!cfg.terms.align) out.align = 0.0;
  if (!cfg.terms.con) out.con = 0.0;
  out.total = out.rank + cfg.gamma1 * out.align + cfg.gamma2 * out.con;
  return out;
}

// Central differences of the oracle objective for every parameter, in the
// library's tensor order.
inline std::vector<std::vector<double>> numeric_gradient(const gzsl::Batch& batch, gzsl::ModelParams params,
                                                         const Matrix& seen_semantics, const gzsl::LossConfig& cfg,
                                                         double h = 1e-5) {
  std::vector<std::vector<double>> out;
  for (auto& t : gzsl::tensors(params)) {
    std::vector<double> g(t.values.size());
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double saved = t.values[i];
      t.values[i] = saved + h;
      const double up = objective(batch, params, seen_semantics, cfg).total;
      t.values[i] = saved - h;
      const double down = objective(batch, params, seen_semantics, cfg).total;
      t.values[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// Adam written out from the textbook update rule for one flat vector.
struct TextbookAdam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& x, const std::vector<double>& g) {
    if (m.empty()) m.assign(x.size(), 0.0), v.assign(x.size(), 0.0);
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(b1, t));
      const double vhat = v[i] / (1 - std::pow(b2, t));
      x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

// (wins + ties / 2) / (P N) over every positive/negative pair.
inline std::optional<double> pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  for (int v : y) neg += v == 0;
  if (pos == 0 || neg == 0) return std::nullopt;
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// True-positive count of the top-k selection, ties to the lower index.
inline std::size_t topk_hits(const Matrix& scores, const gzsl::LabelMatrix& labels, int k) {
  std::size_t tp = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    std::vector<bool> taken(static_cast<std::size_t>(scores.cols()), false);
    for (int pick = 0; pick < k; ++pick) {
      Eigen::Index best = -1;
      for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        if (taken[static_cast<std::size_t>(c)]) continue;
        if (best < 0 || scores(r, c) > scores(r, best)) best = c;
      }
      taken[static_cast<std::size_t>(best)] = true;
      tp += labels(r, best) == 1;
    }
  }
  return tp;
}

}  // namespace oracle
