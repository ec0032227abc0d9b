#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gzsl_align/errors.hpp"
#include "gzsl_align/objective.hpp"
#include "gzsl_align/scoring_metrics.hpp"
#include "oracles.hpp"

using namespace gzsl;

namespace {

double auroc_of(std::vector<double> s, std::vector<int> y) { return auroc(s, y); }

ClassVocabulary vocab4() { return ClassVocabulary({"a", "b", "c", "d"}, {true, true, false, false}); }

struct HandFixture {
  ScoreMatrix s{3, 4};
  LabelMatrix y{3, 4};
  HandFixture() {
    s << 0.9, 0.1, 0.5, 0.3,  //
        0.2, 0.8, 0.8, 0.1,   //
        0.4, 0.4, 0.4, 0.4;
    y << 1, 0, 0, 1,  //
        0, 0, 1, 0,   //
        0, 1, 0, 0;
  }
};

}  // namespace

TEST(TopK, HandCountedTable) {
  HandFixture f;
  // k=2 picks {0,2}, {1,2}, {0,1}: one hit each, 4 ground-truth positives.
  const auto m2 = topk_metrics(f.s, f.y, 2);
  EXPECT_DOUBLE_EQ(m2.precision, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(m2.recall, 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(m2.f1, 0.6);
  // k=1 picks {0}, {1}, {0}.
  const auto m1 = topk_metrics(f.s, f.y, 1);
  EXPECT_DOUBLE_EQ(m1.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m1.recall, 1.0 / 4.0);
  EXPECT_EQ(oracle::topk_hits(f.s, f.y, 2), 3u);
}

TEST(TopK, PerfectPredictionsWithExactlyKPositives) {
  ScoreMatrix s(2, 4);
  LabelMatrix y(2, 4);
  s << 0.9, 0.1, 0.8, 0.0, 0.1, 0.7, 0.2, 0.6;
  y << 1, 0, 1, 0, 0, 1, 0, 1;
  const auto m = topk_metrics(s, y, 2);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
}

TEST(TopK, CountsAreIntegersAndRecallMonotone) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 4);  // coarse scores force ties
  std::bernoulli_distribution b(0.3);
  for (int t = 0; t < 100; ++t) {
    ScoreMatrix s(12, 6);
    LabelMatrix y(12, 6);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = level(rng) / 4.0, y.data()[i] = b(rng);
    const long long positives = y.sum();
    double prev = -1;
    for (int k = 1; k <= 6; ++k) {
      const auto m = topk_metrics(s, y, k);
      const double tp = m.precision * 12 * k;
      EXPECT_NEAR(tp, std::round(tp), 1e-9);
      EXPECT_EQ(static_cast<std::size_t>(std::round(tp)), oracle::topk_hits(s, y, k));
      if (positives > 0) EXPECT_NEAR(m.recall * positives, std::round(tp), 1e-9);
      EXPECT_GE(m.recall, prev);
      prev = m.recall;
    }
  }
}

TEST(TopK, RejectsBadK) {
  HandFixture f;
  EXPECT_THROW(topk_metrics(f.s, f.y, 0), ConfigError);
  EXPECT_THROW(topk_metrics(f.s, f.y, 5), ConfigError);
}

TEST(TopK, MacroVariant) {
  HandFixture f;
  const auto m = topk_metrics_macro(f.s, f.y, 2);
  EXPECT_GE(m.precision, 0.0);
  EXPECT_LE(m.precision, 1.0);
  EXPECT_GE(m.recall, 0.0);
  EXPECT_LE(m.recall, 1.0);
}

TEST(Auroc, Fixtures) {
  EXPECT_EQ(auroc_of({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auroc_of({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}), 0.0);
  EXPECT_EQ(auroc_of({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75);
  EXPECT_EQ(auroc_of({0.5, 0.5}, {0, 1}), 0.5);
  EXPECT_THROW(auroc_of({0.1, 0.2}, {1, 1}), UndefinedAuroc);
  EXPECT_THROW(auroc_of({0.1, 0.2}, {0, 0}), UndefinedAuroc);
}

TEST(Auroc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 1000; ++t) {
    const int n = std::uniform_int_distribution<int>(2, 200)(rng);
    const int levels = std::uniform_int_distribution<int>(2, 50)(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, levels)(rng) / static_cast<double>(levels);
      y[i] = std::bernoulli_distribution(0.3)(rng);
    }
    const auto ref = oracle::pairwise_auroc(s, y);
    if (!ref) {
      EXPECT_THROW(auroc(s, y), UndefinedAuroc);
      continue;
    }
    EXPECT_NEAR(auroc(s, y), *ref, 1e-12);
  }
}

TEST(Auroc, AntisymmetryAndMonotoneInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(40), neg(40), warped(40);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
      s[i] = g(rng);
      neg[i] = -s[i];
      warped[i] = std::exp(3 * s[i]) + 7;
      y[i] = i % 3 == 0;
    }
    EXPECT_NEAR(auroc(neg, y), 1.0 - auroc(s, y), 1e-12);
    EXPECT_EQ(auroc(warped, y), auroc(s, y));
  }
}

TEST(PerClassAuroc, UndefinedColumnsAreAbsent) {
  HandFixture f;
  const auto pc = per_class_auroc(f.s, f.y);
  ASSERT_EQ(pc.size(), 4u);
  for (const auto& v : pc) EXPECT_TRUE(v.has_value());
  LabelMatrix y = f.y;
  y.col(2).setZero();
  EXPECT_FALSE(per_class_auroc(f.s, y)[2].has_value());
}

TEST(GzslSummary, HarmonicFixtures) {
  const auto vocab = ClassVocabulary({"s1", "s2", "u1"}, {true, true, false});
  const std::vector<std::optional<double>> equal{0.7, 0.7, 0.7};
  EXPECT_NEAR(gzsl_summary(equal, vocab).harmonic, 0.7, 1e-15);
  const std::vector<std::optional<double>> table_row{0.79, 0.79, 0.66};
  EXPECT_NEAR(gzsl_summary(table_row, vocab).harmonic, 0.72, 0.005);
  const std::vector<std::optional<double>> other_row{0.72, 0.72, 0.54};
  EXPECT_NEAR(gzsl_summary(other_row, vocab).harmonic, 0.62, 0.005);
}

TEST(GzslSummary, MeansSkipUndefinedAndRequireBothPartitions) {
  const auto vocab = vocab4();
  const std::vector<std::optional<double>> v{0.6, std::nullopt, 0.9, 0.7};
  const auto s = gzsl_summary(v, vocab);
  EXPECT_DOUBLE_EQ(s.seen_mean, 0.6);
  EXPECT_DOUBLE_EQ(s.unseen_mean, 0.8);
  EXPECT_DOUBLE_EQ(s.harmonic, 2 * 0.6 * 0.8 / 1.4);
  const std::vector<std::optional<double>> no_unseen{0.6, 0.7, std::nullopt, std::nullopt};
  EXPECT_THROW(gzsl_summary(no_unseen, vocab), Error);
}

TEST(GzslSummary, HarmonicBounds) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng), n = u(rng);
    const double h = harmonic_mean(s, n);
    EXPECT_LE(h, (s + n) / 2 + 1e-15);
    EXPECT_LE(h, 2 * std::min(s, n) + 1e-15);
  }
}

TEST(InferScores, WidenedMatchesRelevanceOracle) {
  const ArchSpec arch{5, 3, {4}, {6}, 3};
  const ModelParams m = init_model(arch, 2);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Matrix f(5, 7), w(4, 3);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
  const SemanticMatrix sm(w);
  const ScoreMatrix s = infer_scores(m, f, sm);
  ASSERT_EQ(s.rows(), 7);
  ASSERT_EQ(s.cols(), 4);
  for (Eigen::Index n = 0; n < 7; ++n) {
    const auto z = oracle::visual(m, oracle::column(f, n));
    for (Eigen::Index c = 0; c < 4; ++c) {
      const auto phi = oracle::mlp(m.semantic_map, oracle::to_std(sm.row(static_cast<std::size_t>(c))));
      EXPECT_NEAR(s(n, c), oracle::cosine(z, phi), 1e-12);
    }
  }
  // Seen columns are bit-identical to the training-time scoring path.
  const std::vector<std::size_t> seen{0, 2};
  const Matrix train_scores =
      relevance_scores(project_visual(m, f), project_semantics(m, sm.select(seen).columns()));
  EXPECT_EQ(Vector(s.col(0)), Vector(train_scores.col(0)));
  EXPECT_EQ(Vector(s.col(2)), Vector(train_scores.col(1)));
}

TEST(InferScores, DuplicateClassRowDuplicatesColumn) {
  const ModelParams m = init_model(ArchSpec{4, 3, {}, {5}, 2}, 1);
  Matrix w(3, 3);
  w << 1, 2, 3, 1, 2, 3, -1, 0, 2;
  const ScoreMatrix s = infer_scores(m, Matrix::Random(4, 6), SemanticMatrix(w));
  EXPECT_EQ(Vector(s.col(0)), Vector(s.col(1)));
}

TEST(InferScores, ExactAlignmentScoresOne) {
  ModelParams m;
  m.visual_map = MlpParams::zeros(MlpSpec{{2, 2}});
  m.visual_map.weights[0] = Matrix::Identity(2, 2);
  m.semantic_map = m.visual_map;
  Matrix w(2, 2);
  w << 3, 1, -1, 2;
  Matrix f(2, 1);
  f << 6, 2;  // twice class 0's embedding
  EXPECT_NEAR(infer_scores(m, f, SemanticMatrix(w))(0, 0), 1.0, 1e-15);
}

TEST(Evaluate, ReportRoundTripsThroughJson) {
  HandFixture f;
  const auto report = evaluate(f.s, f.y, vocab4(), std::vector<int>{2, 3});
  ASSERT_EQ(report.per_k.size(), 2u);
  ASSERT_TRUE(report.harmonic.has_value());
  EXPECT_EQ(metrics_from_json(nlohmann::json::parse(to_json(report).dump())), report);
  const std::string csv = to_csv_table(report);
  EXPECT_NE(csv.find("c (unseen)"), std::string::npos) << csv;
  EXPECT_FALSE(to_text_table(report).empty());
}
