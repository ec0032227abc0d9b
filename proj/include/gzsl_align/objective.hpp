#pragma once

#include <span>
#include <string>

#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/vocab_data.hpp"

namespace gzsl {

/// Which loss terms contribute to the objective.
struct TermMask {
  bool rank = true;
  bool align = true;
  bool con = true;

  /// Parses a comma-separated subset of {rank, align, con}.
  static TermMask parse(const std::string& text);
  std::string str() const;

  bool operator==(const TermMask&) const = default;
};

// How the per-image hinge sum is normalised.
enum class RankNormalization {
  SeenClassCount,  // 1/S
  PairCount,       // 1/(|Yp| |Yn|)
};

struct LossConfig {
  double delta = 0.5;
  double gamma1 = 0.01;
  double gamma2 = 0.01;
  TermMask terms;
  RankNormalization rank_normalization = RankNormalization::SeenClassCount;

  void validate() const;
};

struct LossBreakdown {
  double rank = 0.0;
  double align = 0.0;
  double con = 0.0;
  double total = 0.0;
};

/// Cosine of `latent_visual` against every column of `latent_semantics` (l × K).
Vector relevance_scores(const Vector& latent_visual, const Matrix& latent_semantics);

/// Batched form: latent_visuals is l × N; returns N × K.
Matrix relevance_scores(const Matrix& latent_visuals, const Matrix& latent_semantics);

/// Margin ranking loss of one image. Zero when either label set is empty.
double ranking_loss_image(const Vector& scores, std::span<const int> labels, const LossConfig& cfg);

struct RankingGrad {
  double value;
  Vector grad_scores;
};

RankingGrad ranking_loss_image_grad(const Vector& scores, std::span<const int> labels,
                                    const LossConfig& cfg);

/// Mean of ranking_loss_image over rows of `scores` (N × S) and `labels` (N × S).
double ranking_loss_batch(const Matrix& scores, const LabelMatrix& labels, const LossConfig& cfg);

/// Mean of (1 - cos) over paired columns. An empty pairing yields 0.
double alignment_loss(const Matrix& latent_visuals, const Matrix& projected_semantics);

/// Sum over ordered pairs i != j of |cos(w_i, w_j) - cos(phi_i, phi_j)|.
/// Both matrices hold one class per column.
double consistency_loss(const Matrix& original, const Matrix& projected);

/// One minibatch over the seen classes.
struct Batch {
  Matrix features;     // v × N
  LabelMatrix labels;  // N × S (SEEN_ONLY)
};

Batch make_batch(const Dataset& seen_only, std::span<const std::size_t> indices);
Batch make_batch(const Dataset& seen_only);

struct LossEvaluation {
  LossBreakdown loss;
  ModelParams grads;
};

/// Composite objective and its gradient for every parameter.
///
/// `seen_semantics` is d × S in the column order of `batch.labels`. Disabled
/// terms are reported as 0. Samples without positives add nothing to the
/// ranking sum and are left out of the alignment mean.
LossEvaluation total_loss(const Batch& batch, const ModelParams& params, const Matrix& seen_semantics,
                          const LossConfig& cfg);

/// Forward-only evaluation of the same objective.
LossBreakdown evaluate_loss(const Batch& batch, const ModelParams& params, const Matrix& seen_semantics,
                            const LossConfig& cfg);

/// Encoder (if present) followed by the visual mapper; l × N.
Matrix project_visual(const ModelParams& params, const Matrix& features);
/// Semantic mapper over d × K columns; l × K.
Matrix project_semantics(const ModelParams& params, const Matrix& semantic_columns);

}  // namespace gzsl
