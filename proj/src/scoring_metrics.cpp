#include "gzsl_align/scoring_metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gzsl_align/errors.hpp"
#include "gzsl_align/objective.hpp"
#include "text_io.hpp"

namespace gzsl {

using nlohmann::json;

ScoreMatrix infer_scores(const ModelParams& params, const Matrix& features, const SemanticMatrix& semantics) {
  if (semantics.dim() != params.semantic_dim()) {
    throw DimensionMismatch("semantic width " + std::to_string(semantics.dim()) +
                            " does not match the model's " + std::to_string(params.semantic_dim()));
  }
  return relevance_scores(project_visual(params, features), project_semantics(params, semantics.columns()));
}

ScoreMatrix infer_scores(const ModelParams& params, const Dataset& ds, const SemanticMatrix& semantics) {
  return infer_scores(params, ds.feature_matrix(), semantics);
}

namespace {

void check_shapes(const ScoreMatrix& scores, const LabelMatrix& labels, int k) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionMismatch("score matrix is " + std::to_string(scores.rows()) + "x" +
                            std::to_string(scores.cols()) + " but labels are " + std::to_string(labels.rows()) +
                            "x" + std::to_string(labels.cols()));
  }
  if (k < 1 || k > scores.cols()) {
    throw ConfigError("top-k needs 1 <= k <= " + std::to_string(scores.cols()) + ", got " + std::to_string(k));
  }
}

// Indices of the k highest scores in row n; lower index wins ties.
std::vector<Eigen::Index> top_k(const ScoreMatrix& scores, Eigen::Index n, int k) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(n, a) > scores(n, b); });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

TopKMetrics topk_metrics(const ScoreMatrix& scores, const LabelMatrix& labels, int k) {
  check_shapes(scores, labels, k);
  long long tp = 0;
  long long positives = 0;
  for (Eigen::Index n = 0; n < scores.rows(); ++n) {
    for (Eigen::Index c : top_k(scores, n, k)) tp += labels(n, c) == 1;
    positives += (labels.row(n).array() == 1).count();
  }
  TopKMetrics m;
  if (scores.rows() > 0) m.precision = static_cast<double>(tp) / static_cast<double>(scores.rows() * k);
  if (positives > 0) m.recall = static_cast<double>(tp) / static_cast<double>(positives);
  m.f1 = f1_of(m.precision, m.recall);
  return m;
}

TopKMetrics topk_metrics_macro(const ScoreMatrix& scores, const LabelMatrix& labels, int k) {
  check_shapes(scores, labels, k);
  const auto classes = static_cast<std::size_t>(scores.cols());
  std::vector<long long> predicted(classes, 0), tp(classes, 0), positives(classes, 0);
  for (Eigen::Index n = 0; n < scores.rows(); ++n) {
    for (Eigen::Index c : top_k(scores, n, k)) {
      ++predicted[static_cast<std::size_t>(c)];
      tp[static_cast<std::size_t>(c)] += labels(n, c) == 1;
    }
    for (std::size_t c = 0; c < classes; ++c) positives[c] += labels(n, static_cast<Eigen::Index>(c)) == 1;
  }
  double p_sum = 0.0, r_sum = 0.0;
  std::size_t p_count = 0, r_count = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (predicted[c] > 0) {
      p_sum += static_cast<double>(tp[c]) / static_cast<double>(predicted[c]);
      ++p_count;
    }
    if (positives[c] > 0) {
      r_sum += static_cast<double>(tp[c]) / static_cast<double>(positives[c]);
      ++r_count;
    }
  }
  TopKMetrics m;
  if (p_count) m.precision = p_sum / static_cast<double>(p_count);
  if (r_count) m.recall = r_sum / static_cast<double>(r_count);
  m.f1 = f1_of(m.precision, m.recall);
  return m;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionMismatch("auroc: " + std::to_string(scores.size()) + " scores but " +
                            std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share their mean.
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      const int l = labels[order[t]];
      if (l != 0 && l != 1) throw DataError("auroc: labels must be 0 or 1");
      if (l == 1) {
        rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedAuroc("auroc needs at least one positive and one negative sample");
  }
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

std::vector<std::optional<double>> per_class_auroc(const ScoreMatrix& scores, const LabelMatrix& labels) {
  if (scores.rows() != labels.rows() || scores.cols() != labels.cols()) {
    throw DimensionMismatch("per-class auroc: score and label shapes differ");
  }
  std::vector<std::optional<double>> out;
  out.reserve(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    std::vector<double> s(static_cast<std::size_t>(scores.rows()));
    std::vector<int> l(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index n = 0; n < scores.rows(); ++n) {
      s[static_cast<std::size_t>(n)] = scores(n, c);
      l[static_cast<std::size_t>(n)] = labels(n, c);
    }
    try {
      out.emplace_back(auroc(s, l));
    } catch (const UndefinedAuroc&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

double harmonic_mean(double seen, double unseen) {
  return seen + unseen > 0.0 ? 2.0 * seen * unseen / (seen + unseen) : 0.0;
}

namespace {

std::optional<double> partition_mean(std::span<const std::optional<double>> per_class,
                                     std::span<const std::size_t> ids) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t id : ids) {
    if (id < per_class.size() && per_class[id]) {
      sum += *per_class[id];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

GzslSummary gzsl_summary(std::span<const std::optional<double>> per_class, const ClassVocabulary& vocab) {
  if (per_class.size() != vocab.num_classes()) {
    throw DimensionMismatch("gzsl summary: " + std::to_string(per_class.size()) + " values for " +
                            std::to_string(vocab.num_classes()) + " classes");
  }
  auto seen = partition_mean(per_class, vocab.seen_ids());
  auto unseen = partition_mean(per_class, vocab.unseen_ids());
  if (!seen) throw Error("gzsl summary: no seen class has a defined AUROC");
  if (!unseen) throw Error("gzsl summary: no unseen class has a defined AUROC");
  return {*seen, *unseen, harmonic_mean(*seen, *unseen)};
}

bool MetricsReport::operator==(const MetricsReport& o) const {
  if (per_k.size() != o.per_k.size()) return false;
  for (std::size_t i = 0; i < per_k.size(); ++i) {
    const auto& a = per_k[i];
    const auto& b = o.per_k[i];
    if (a.k != b.k || a.micro.recall != b.micro.recall || a.micro.precision != b.micro.precision ||
        a.micro.f1 != b.micro.f1 || a.macro.recall != b.macro.recall ||
        a.macro.precision != b.macro.precision || a.macro.f1 != b.macro.f1) {
      return false;
    }
  }
  return class_names == o.class_names && seen == o.seen && per_class_auroc == o.per_class_auroc &&
         seen_mean == o.seen_mean && unseen_mean == o.unseen_mean && harmonic == o.harmonic &&
         num_samples == o.num_samples && num_without_positives == o.num_without_positives;
}

MetricsReport evaluate(const ScoreMatrix& scores, const LabelMatrix& labels, const ClassVocabulary& vocab,
                       std::span<const int> ks) {
  if (static_cast<std::size_t>(scores.cols()) != vocab.num_classes()) {
    throw DimensionMismatch("evaluation needs one score column per class");
  }
  MetricsReport r;
  for (int k : ks) r.per_k.push_back({k, topk_metrics(scores, labels, k), topk_metrics_macro(scores, labels, k)});
  r.class_names = vocab.names();
  for (std::size_t c = 0; c < vocab.num_classes(); ++c) r.seen.push_back(vocab.is_seen(c));
  r.per_class_auroc = per_class_auroc(scores, labels);
  r.seen_mean = partition_mean(r.per_class_auroc, vocab.seen_ids());
  r.unseen_mean = partition_mean(r.per_class_auroc, vocab.unseen_ids());
  if (r.seen_mean && r.unseen_mean) r.harmonic = harmonic_mean(*r.seen_mean, *r.unseen_mean);
  r.num_samples = static_cast<std::size_t>(labels.rows());
  for (Eigen::Index n = 0; n < labels.rows(); ++n) {
    if (!(labels.row(n).array() == 1).any()) ++r.num_without_positives;
  }
  return r;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json topk_json(const TopKMetrics& m) {
  return {{"recall", m.recall}, {"precision", m.precision}, {"f1", m.f1}};
}

TopKMetrics topk_from(const json& j) {
  return {j.at("recall").get<double>(), j.at("precision").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

json to_json(const MetricsReport& r) {
  json j;
  j["num_samples"] = r.num_samples;
  j["num_without_positives"] = r.num_without_positives;
  j["conventions"] = {{"top_k_headline", "micro"},
                      {"zero_positive_samples", "counted in precision@k denominators"},
                      {"score_ties", "lower class index ranks first"}};
  json top = json::array();
  for (const auto& km : r.per_k) {
    top.push_back({{"k", km.k}, {"micro", topk_json(km.micro)}, {"macro", topk_json(km.macro)}});
  }
  j["top_k"] = top;
  json classes = json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    classes.push_back({{"name", r.class_names[c]}, {"seen", static_cast<bool>(r.seen[c])},
                       {"auroc", optional_json(r.per_class_auroc[c])}});
  }
  j["classes"] = classes;
  j["auroc"] = {{"seen_mean", optional_json(r.seen_mean)},
                {"unseen_mean", optional_json(r.unseen_mean)},
                {"harmonic", optional_json(r.harmonic)}};
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  try {
    MetricsReport r;
    r.num_samples = j.at("num_samples").get<std::size_t>();
    r.num_without_positives = j.at("num_without_positives").get<std::size_t>();
    for (const auto& t : j.at("top_k")) {
      r.per_k.push_back({t.at("k").get<int>(), topk_from(t.at("micro")), topk_from(t.at("macro"))});
    }
    for (const auto& c : j.at("classes")) {
      r.class_names.push_back(c.at("name").get<std::string>());
      r.seen.push_back(c.at("seen").get<bool>());
      r.per_class_auroc.push_back(optional_from(c, "auroc"));
    }
    const json& a = j.at("auroc");
    r.seen_mean = optional_from(a, "seen_mean");
    r.unseen_mean = optional_from(a, "unseen_mean");
    r.harmonic = optional_from(a, "harmonic");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed metrics report: ") + e.what());
  }
}

namespace {

std::string csv_value(const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); }

std::string fixed(const std::optional<double>& v, int digits) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, *v);
  return buf;
}

// Seen classes first, then unseen, each in vocabulary order.
std::vector<std::size_t> table_order(const MetricsReport& r) {
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < r.seen.size(); ++c) if (r.seen[c]) order.push_back(c);
  for (std::size_t c = 0; c < r.seen.size(); ++c) if (!r.seen[c]) order.push_back(c);
  return order;
}

}  // namespace

std::string to_csv_table(const MetricsReport& r) {
  std::ostringstream out;
  for (const auto& km : r.per_k) {
    const std::string k = std::to_string(km.k);
    out << "r@" << k << ",p@" << k << ",f1@" << k << ',';
  }
  out << "auroc_seen,auroc_unseen,auroc_harmonic\n";
  for (const auto& km : r.per_k) {
    out << detail::format_double(km.micro.recall) << ',' << detail::format_double(km.micro.precision) << ','
        << detail::format_double(km.micro.f1) << ',';
  }
  out << csv_value(r.seen_mean) << ',' << csv_value(r.unseen_mean) << ',' << csv_value(r.harmonic) << "\n\n";

  const auto order = table_order(r);
  out << "seen mean,unseen mean";
  for (std::size_t c : order) out << ',' << r.class_names[c] << (r.seen[c] ? "" : " (unseen)");
  out << '\n' << csv_value(r.seen_mean) << ',' << csv_value(r.unseen_mean);
  for (std::size_t c : order) out << ',' << csv_value(r.per_class_auroc[c]);
  out << '\n';
  return out.str();
}

std::string to_text_table(const MetricsReport& r) {
  std::ostringstream out;
  out << "samples: " << r.num_samples << " (" << r.num_without_positives << " without positives)\n\n";
  char line[160];
  for (const auto& km : r.per_k) {
    std::snprintf(line, sizeof(line), "k=%d  r@k %.3f  p@k %.3f  f1@k %.3f\n", km.k, km.micro.recall,
                  km.micro.precision, km.micro.f1);
    out << line;
  }
  out << "\nAUROC  seen " << fixed(r.seen_mean, 3) << "  unseen " << fixed(r.unseen_mean, 3) << "  harmonic "
      << fixed(r.harmonic, 3) << "\n\n";
  std::size_t width = 10;
  for (const auto& n : r.class_names) width = std::max(width, n.size() + 2);
  for (std::size_t c : table_order(r)) {
    std::string name = r.class_names[c] + (r.seen[c] ? "" : " *");
    name.resize(width + 2, ' ');
    out << name << fixed(r.per_class_auroc[c], 3) << '\n';
  }
  out << "(* unseen)\n";
  return out.str();
}

}  // namespace gzsl
