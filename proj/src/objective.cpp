#include "gzsl_align/objective.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <sstream>

#include "gzsl_align/errors.hpp"

namespace gzsl {

TermMask TermMask::parse(const std::string& text) {
  TermMask mask{false, false, false};
  std::stringstream ss(text);
  std::string item;
  bool any = false;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item == "rank") {
      mask.rank = true;
    } else if (item == "align") {
      mask.align = true;
    } else if (item == "con") {
      mask.con = true;
    } else {
      throw ConfigError("unknown loss term '" + item + "' (expected rank, align, con)");
    }
    any = true;
  }
  if (!any) throw ConfigError("term mask must enable at least one loss term");
  return mask;
}

std::string TermMask::str() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(rank, "rank");
  add(align, "align");
  add(con, "con");
  return out;
}

void LossConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ConfigError("margin delta must be >= 0");
  if (!(gamma1 >= 0.0) || !std::isfinite(gamma1)) throw ConfigError("gamma1 must be >= 0");
  if (!(gamma2 >= 0.0) || !std::isfinite(gamma2)) throw ConfigError("gamma2 must be >= 0");
  if (!terms.rank && !terms.align && !terms.con) {
    throw ConfigError("term mask must enable at least one loss term");
  }
}

Matrix relevance_scores(const Matrix& latent_visuals, const Matrix& latent_semantics) {
  if (latent_visuals.rows() != latent_semantics.rows()) {
    throw DimensionMismatch("latent widths differ: visual " + std::to_string(latent_visuals.rows()) +
                            ", semantic " + std::to_string(latent_semantics.rows()));
  }
  Matrix scores(latent_visuals.cols(), latent_semantics.cols());
  for (Eigen::Index n = 0; n < latent_visuals.cols(); ++n) {
    for (Eigen::Index k = 0; k < latent_semantics.cols(); ++k) {
      scores(n, k) = cosine_similarity(latent_visuals.col(n), latent_semantics.col(k));
    }
  }
  return scores;
}

Vector relevance_scores(const Vector& latent_visual, const Matrix& latent_semantics) {
  return relevance_scores(Matrix(latent_visual), latent_semantics).row(0).transpose();
}

RankingGrad ranking_loss_image_grad(const Vector& scores, std::span<const int> labels,
                                    const LossConfig& cfg) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw DimensionMismatch("ranking loss: " + std::to_string(scores.size()) + " scores but " +
                            std::to_string(labels.size()) + " labels");
  }
  RankingGrad out{0.0, Vector::Zero(scores.size())};
  std::size_t positives = 0;
  for (int l : labels) positives += (l == 1);
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) return out;

  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] != 1) continue;
    for (std::size_t n = 0; n < labels.size(); ++n) {
      if (labels[n] == 1) continue;
      const double margin = cfg.delta + scores[static_cast<Eigen::Index>(n)] - scores[static_cast<Eigen::Index>(p)];
      if (margin > 0.0) {
        out.value += margin;
        out.grad_scores[static_cast<Eigen::Index>(n)] += 1.0;
        out.grad_scores[static_cast<Eigen::Index>(p)] -= 1.0;
      }
    }
  }
  const double norm = cfg.rank_normalization == RankNormalization::SeenClassCount
                          ? static_cast<double>(labels.size())
                          : static_cast<double>(positives * negatives);
  out.value /= norm;
  out.grad_scores /= norm;
  return out;
}

double ranking_loss_image(const Vector& scores, std::span<const int> labels, const LossConfig& cfg) {
  return ranking_loss_image_grad(scores, labels, cfg).value;
}

namespace {

std::vector<int> label_row(const LabelMatrix& labels, Eigen::Index n) {
  std::vector<int> row(static_cast<std::size_t>(labels.cols()));
  for (Eigen::Index k = 0; k < labels.cols(); ++k) row[static_cast<std::size_t>(k)] = labels(n, k);
  return row;
}

}  // namespace

double ranking_loss_batch(const Matrix& scores, const LabelMatrix& labels, const LossConfig& cfg) {
  if (scores.rows() == 0) throw Error("ranking loss of an empty batch");
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionMismatch("ranking loss: score and label matrices differ in shape");
  }
  double sum = 0.0;
  for (Eigen::Index n = 0; n < scores.rows(); ++n) {
    sum += ranking_loss_image(scores.row(n).transpose(), label_row(labels, n), cfg);
  }
  return sum / static_cast<double>(scores.rows());
}

double alignment_loss(const Matrix& latent_visuals, const Matrix& projected_semantics) {
  if (latent_visuals.cols() != projected_semantics.cols()) {
    throw DimensionMismatch("alignment loss: unequal numbers of visual and semantic vectors");
  }
  if (latent_visuals.cols() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index n = 0; n < latent_visuals.cols(); ++n) {
    sum += 1.0 - cosine_similarity(latent_visuals.col(n), projected_semantics.col(n));
  }
  return sum / static_cast<double>(latent_visuals.cols());
}

namespace {

Matrix pairwise_cosines(const Matrix& columns) {
  const Eigen::Index k = columns.cols();
  Matrix out = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i != j) out(i, j) = cosine_similarity(columns.col(i), columns.col(j));
    }
  }
  return out;
}

}  // namespace

double consistency_loss(const Matrix& original, const Matrix& projected) {
  if (original.cols() != projected.cols()) {
    throw DimensionMismatch("consistency loss: " + std::to_string(original.cols()) + " original vs " +
                            std::to_string(projected.cols()) + " projected classes");
  }
  if (original.cols() < 2) throw DimensionMismatch("consistency loss needs at least two classes");
  const Matrix before = pairwise_cosines(original);
  const Matrix after = pairwise_cosines(projected);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < original.cols(); ++i) {
    for (Eigen::Index j = 0; j < original.cols(); ++j) {
      if (i != j) sum += std::abs(before(i, j) - after(i, j));
    }
  }
  return sum;
}

Batch make_batch(const Dataset& seen_only, std::span<const std::size_t> indices) {
  if (seen_only.label_space != LabelSpace::SeenOnly) {
    throw DimensionMismatch("training batches must come from a SEEN_ONLY dataset");
  }
  Batch batch;
  batch.features.resize(static_cast<Eigen::Index>(seen_only.feature_dim), static_cast<Eigen::Index>(indices.size()));
  batch.labels.resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(seen_only.label_width));
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sample& s = seen_only.samples.at(indices[b]);
    batch.features.col(static_cast<Eigen::Index>(b)) = s.features;
    for (std::size_t k = 0; k < seen_only.label_width; ++k) {
      batch.labels(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = s.labels.at(k);
    }
  }
  return batch;
}

Batch make_batch(const Dataset& seen_only) {
  std::vector<std::size_t> all(seen_only.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(seen_only, all);
}

Matrix project_visual(const ModelParams& params, const Matrix& features) {
  if (params.encoder) return mlp_apply(params.visual_map, mlp_apply(*params.encoder, features));
  return mlp_apply(params.visual_map, features);
}

Matrix project_semantics(const ModelParams& params, const Matrix& semantic_columns) {
  return mlp_apply(params.semantic_map, semantic_columns);
}

namespace {

void accumulate(MlpParams& into, const MlpParams& add) {
  for (std::size_t l = 0; l < into.weights.size(); ++l) {
    into.weights[l] += add.weights[l];
    into.biases[l] += add.biases[l];
  }
}

LossEvaluation compute(const Batch& batch, const ModelParams& params, const Matrix& seen_semantics,
                       const LossConfig& cfg, bool with_grad) {
  cfg.validate();
  const Eigen::Index n_samples = batch.features.cols();
  const Eigen::Index n_classes = seen_semantics.cols();
  if (n_samples == 0) throw Error("objective of an empty batch");
  if (batch.labels.rows() != n_samples || batch.labels.cols() != n_classes) {
    throw DimensionMismatch("batch labels are " + std::to_string(batch.labels.rows()) + "x" +
                            std::to_string(batch.labels.cols()) + ", expected " + std::to_string(n_samples) +
                            "x" + std::to_string(n_classes));
  }
  if (static_cast<std::size_t>(seen_semantics.rows()) != params.semantic_dim()) {
    throw DimensionMismatch("semantic width does not match the semantic mapper input");
  }

  std::optional<MlpForward> enc;
  if (params.encoder) enc = mlp_forward(*params.encoder, batch.features);
  const MlpForward vis = mlp_forward(params.visual_map, enc ? enc->output : batch.features);
  const Matrix& z = vis.output;

  const bool need_sem = cfg.terms.rank || cfg.terms.con;
  std::optional<MlpForward> sem;
  if (need_sem) sem = mlp_forward(params.semantic_map, seen_semantics);

  LossEvaluation out{{}, with_grad ? params.zeros_like() : ModelParams{}};
  Matrix g_z = Matrix::Zero(z.rows(), z.cols());
  Matrix g_phi = need_sem ? Matrix::Zero(sem->output.rows(), sem->output.cols()) : Matrix();

  if (cfg.terms.rank) {
    const Matrix& phi = sem->output;
    const double scale = 1.0 / static_cast<double>(n_samples);
    double sum = 0.0;
    for (Eigen::Index n = 0; n < n_samples; ++n) {
      const Vector scores = relevance_scores(Vector(z.col(n)), phi);
      const RankingGrad rg = ranking_loss_image_grad(scores, label_row(batch.labels, n), cfg);
      sum += rg.value;
      if (!with_grad) continue;
      for (Eigen::Index k = 0; k < n_classes; ++k) {
        const double g = rg.grad_scores[k];
        if (g == 0.0) continue;
        const CosineGrad cg = cosine_with_grad(z.col(n), phi.col(k));
        g_z.col(n) += (scale * g) * cg.grad_a;
        g_phi.col(k) += (scale * g) * cg.grad_b;
      }
    }
    out.loss.rank = sum * scale;
  }

  std::optional<MlpForward> sem_x;
  Matrix g_phi_x;
  std::vector<Eigen::Index> aligned;
  if (cfg.terms.align) {
    for (Eigen::Index n = 0; n < n_samples; ++n) {
      if ((batch.labels.row(n).array() == 1).any()) aligned.push_back(n);
    }
    if (!aligned.empty()) {
      Matrix w_x(seen_semantics.rows(), static_cast<Eigen::Index>(aligned.size()));
      for (std::size_t j = 0; j < aligned.size(); ++j) {
        Vector sum = Vector::Zero(seen_semantics.rows());
        int count = 0;
        for (Eigen::Index k = 0; k < n_classes; ++k) {
          if (batch.labels(aligned[j], k) == 1) {
            sum += seen_semantics.col(k);
            ++count;
          }
        }
        w_x.col(static_cast<Eigen::Index>(j)) = sum / static_cast<double>(count);
      }
      sem_x = mlp_forward(params.semantic_map, w_x);
      g_phi_x = Matrix::Zero(sem_x->output.rows(), sem_x->output.cols());
      const double scale = 1.0 / static_cast<double>(aligned.size());
      double sum = 0.0;
      for (std::size_t j = 0; j < aligned.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const CosineGrad cg = cosine_with_grad(z.col(aligned[j]), sem_x->output.col(col));
        sum += 1.0 - cg.value;
        if (!with_grad) continue;
        g_z.col(aligned[j]) -= (cfg.gamma1 * scale) * cg.grad_a;
        g_phi_x.col(col) -= (cfg.gamma1 * scale) * cg.grad_b;
      }
      out.loss.align = sum * scale;
    }
  }

  if (cfg.terms.con) {
    if (n_classes < 2) throw DimensionMismatch("consistency loss needs at least two seen classes");
    const Matrix before = pairwise_cosines(seen_semantics);
    const Matrix& phi = sem->output;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n_classes; ++i) {
      for (Eigen::Index j = 0; j < n_classes; ++j) {
        if (i == j) continue;
        const CosineGrad cg = cosine_with_grad(phi.col(i), phi.col(j));
        const double diff = before(i, j) - cg.value;
        sum += std::abs(diff);
        if (!with_grad || diff == 0.0) continue;
        const double s = diff > 0.0 ? -cfg.gamma2 : cfg.gamma2;
        g_phi.col(i) += s * cg.grad_a;
        g_phi.col(j) += s * cg.grad_b;
      }
    }
    out.loss.con = sum;
  }

  out.loss.total = out.loss.rank + cfg.gamma1 * out.loss.align + cfg.gamma2 * out.loss.con;
  if (!with_grad) return out;

  const MlpBackward vis_back = mlp_backward(params.visual_map, vis.tape, g_z);
  out.grads.visual_map = vis_back.grads;
  if (enc) out.grads.encoder = mlp_backward(*params.encoder, enc->tape, vis_back.grad_input).grads;
  if (sem) accumulate(out.grads.semantic_map, mlp_backward(params.semantic_map, sem->tape, g_phi).grads);
  if (sem_x) accumulate(out.grads.semantic_map, mlp_backward(params.semantic_map, sem_x->tape, g_phi_x).grads);
  return out;
}

}  // namespace

LossEvaluation total_loss(const Batch& batch, const ModelParams& params, const Matrix& seen_semantics,
                          const LossConfig& cfg) {
  return compute(batch, params, seen_semantics, cfg, true);
}

LossBreakdown evaluate_loss(const Batch& batch, const ModelParams& params, const Matrix& seen_semantics,
                            const LossConfig& cfg) {
  return compute(batch, params, seen_semantics, cfg, false).loss;
}

}  // namespace gzsl
