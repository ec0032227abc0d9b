#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/vocab_data.hpp"

namespace gzsl {

// N × C cosine scores, one row per sample.
using ScoreMatrix = Matrix;

/// Scores every sample against every class of `semantics`.
ScoreMatrix infer_scores(const ModelParams& params, const Matrix& features, const SemanticMatrix& semantics);
ScoreMatrix infer_scores(const ModelParams& params, const Dataset& ds, const SemanticMatrix& semantics);

struct TopKMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

/// Micro-averaged top-k metrics. Score ties go to the lower class index.
TopKMetrics topk_metrics(const ScoreMatrix& scores, const LabelMatrix& labels, int k);

/// Per-class precision/recall of the top-k predictions, averaged over classes
/// (f1 from the averaged p and r). Diagnostic only.
TopKMetrics topk_metrics_macro(const ScoreMatrix& scores, const LabelMatrix& labels, int k);

/// Mann-Whitney AUROC with mid-ranks for ties. Throws UndefinedAuroc when
/// either class is absent.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// One entry per column; nullopt where the column's labels are single-class.
std::vector<std::optional<double>> per_class_auroc(const ScoreMatrix& scores, const LabelMatrix& labels);

double harmonic_mean(double seen, double unseen);

struct GzslSummary {
  double seen_mean = 0.0;
  double unseen_mean = 0.0;
  double harmonic = 0.0;
};

/// Means over the defined per-class values of each partition. Throws Error if
/// a partition has no defined value.
GzslSummary gzsl_summary(std::span<const std::optional<double>> per_class, const ClassVocabulary& vocab);

struct KMetrics {
  int k = 0;
  TopKMetrics micro;
  TopKMetrics macro;
};

struct MetricsReport {
  std::vector<KMetrics> per_k;
  std::vector<std::string> class_names;
  std::vector<bool> seen;
  std::vector<std::optional<double>> per_class_auroc;
  std::optional<double> seen_mean;
  std::optional<double> unseen_mean;
  std::optional<double> harmonic;
  std::size_t num_samples = 0;
  std::size_t num_without_positives = 0;

  bool operator==(const MetricsReport& other) const;
};

MetricsReport evaluate(const ScoreMatrix& scores, const LabelMatrix& labels, const ClassVocabulary& vocab,
                       std::span<const int> ks);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Summary row (r/p/f1 per k, seen/unseen/harmonic AUROC) followed by the
/// per-class AUROC row, as CSV.
std::string to_csv_table(const MetricsReport& report);
std::string to_text_table(const MetricsReport& report);

}  // namespace gzsl
