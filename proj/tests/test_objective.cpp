#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gzsl_align/errors.hpp"
#include "gzsl_align/gradcheck.hpp"
#include "gzsl_align/objective.hpp"
#include "oracles.hpp"

using namespace gzsl;

namespace {

double rank_image(std::vector<double> p, std::vector<int> y, double delta = 0.5) {
  LossConfig cfg;
  cfg.delta = delta;
  return ranking_loss_image(Eigen::Map<Vector>(p.data(), static_cast<Eigen::Index>(p.size())), y, cfg);
}

Matrix cols(std::initializer_list<std::initializer_list<double>> columns) {
  const auto rows = static_cast<Eigen::Index>(columns.begin()->size());
  Matrix m(rows, static_cast<Eigen::Index>(columns.size()));
  Eigen::Index c = 0;
  for (const auto& col : columns) {
    Eigen::Index r = 0;
    for (double x : col) m(r++, c) = x;
    ++c;
  }
  return m;
}

}  // namespace

TEST(Relevance, BatchedMatchesPerPairCosine) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Matrix v(5, 4), s(5, 3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
  const Matrix p = relevance_scores(v, s);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) {
      EXPECT_NEAR(p(i, k), oracle::cosine(oracle::column(v, i), oracle::column(s, k)), 1e-14);
    }
    EXPECT_EQ(Vector(p.row(i).transpose()), relevance_scores(Vector(v.col(i)), s));
  }
}

TEST(Relevance, MatchingRowAndNegation) {
  const Matrix s = cols({{1, 0, 0}, {0, 1, 0}});
  const Vector v = Eigen::Vector3d(2, 0, 0);
  EXPECT_EQ(relevance_scores(v, s), Eigen::Vector2d(1, 0));
  EXPECT_EQ(relevance_scores(Vector(-v), s), Eigen::Vector2d(-1, 0));
}

TEST(RankingLoss, HandFixtures) {
  EXPECT_NEAR(rank_image({0.2, 0.4}, {1, 0}), 0.35, 1e-12);
  EXPECT_NEAR(rank_image({0.9, 0.1, 0.0}, {1, 1, 0}), 0.4 / 3.0, 1e-12);
  EXPECT_EQ(rank_image({0.9, 0.3}, {1, 0}), 0.0);
  EXPECT_EQ(rank_image({0.9, 0.3}, {1, 1}), 0.0);
  EXPECT_EQ(rank_image({0.9, 0.3}, {0, 0}), 0.0);
}

TEST(RankingLoss, PairCountNormalisation) {
  LossConfig cfg;
  cfg.rank_normalization = RankNormalization::PairCount;
  const Vector p = Eigen::Vector3d(0.9, 0.1, 0.0);
  const std::vector<int> y{1, 1, 0};
  EXPECT_NEAR(ranking_loss_image(p, y, cfg), 0.4 / 2.0, 1e-12);
}

TEST(RankingLoss, ZeroSetAndMonotonicity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  LossConfig cfg;
  for (int t = 0; t < 500; ++t) {
    Vector p(5);
    for (auto& x : p) x = u(rng);
    std::vector<int> y{1, 0, 1, 0, 0};
    const double base = ranking_loss_image(p, y, cfg);
    const double gap = std::min(p[0], p[2]) - std::max({p[1], p[3], p[4]});
    EXPECT_EQ(base == 0.0, gap >= cfg.delta);
    Vector up = p;
    up[1] += 0.1;
    EXPECT_GE(ranking_loss_image(up, y, cfg), base);
    up = p;
    up[0] += 0.1;
    EXPECT_LE(ranking_loss_image(up, y, cfg), base);
  }
}

TEST(RankingLoss, HingeSubgradientAtKinkIsZero) {
  const Vector p = Eigen::Vector2d(0.75, 0.25);  // 0.5 + 0.25 - 0.75 == 0 exactly
  const std::vector<int> y{1, 0};
  const auto g = ranking_loss_image_grad(p, y, LossConfig{});
  EXPECT_EQ(g.value, 0.0);
  EXPECT_TRUE(g.grad_scores.isZero(0.0));
}

TEST(RankingLoss, BatchIsMeanOfImages) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix s(8, 4);
  LabelMatrix y(8, 4);
  std::bernoulli_distribution b(0.4);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng), y.data()[i] = b(rng);
  LossConfig cfg;
  double mean = 0;
  for (Eigen::Index i = 0; i < 8; ++i) {
    std::vector<double> row(4);
    std::vector<int> labels(4);
    for (Eigen::Index c = 0; c < 4; ++c) row[c] = s(i, c), labels[c] = y(i, c);
    mean += oracle::ranking_image(row, labels, cfg.delta, cfg.rank_normalization) / 8.0;
  }
  EXPECT_NEAR(ranking_loss_batch(s, y, cfg), mean, 1e-14);
  Matrix same = s.row(0).replicate(3, 1);
  LabelMatrix same_y = y.row(0).replicate(3, 1);
  std::vector<int> y0(y.row(0).data(), y.row(0).data() + 0);
  EXPECT_NEAR(ranking_loss_batch(same, same_y, cfg), ranking_loss_batch(s.topRows(1), y.topRows(1), cfg), 1e-15);
}

TEST(AlignmentLoss, Fixtures) {
  const Matrix v = cols({{1, 0}, {0, 1}});
  EXPECT_NEAR(alignment_loss(v, cols({{2, 0}, {0, 3}})), 0.0, 1e-12);
  EXPECT_NEAR(alignment_loss(v, cols({{-1, 0}, {0, -2}})), 2.0, 1e-12);
  EXPECT_NEAR(alignment_loss(v, cols({{1, 0}, {1, 0}})), 0.5, 1e-12);
  EXPECT_EQ(alignment_loss(Matrix(2, 0), Matrix(2, 0)), 0.0);
}

TEST(ConsistencyLoss, InvariantProjections) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  Matrix w(4, 5);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  EXPECT_NEAR(consistency_loss(w, w), 0.0, 1e-12);
  EXPECT_NEAR(consistency_loss(w, 2.5 * w), 0.0, 1e-12);
  Matrix a(4, 4);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
  EXPECT_NEAR(consistency_loss(w, q * w), 0.0, 1e-12);
}

TEST(ConsistencyLoss, MatchesDoubleLoop) {
  const Matrix w = cols({{1, 0, 0}, {0.6, 0.8, 0}, {0, 0.3, 1}});
  Matrix phi_map(2, 3);
  phi_map << 1, 2, 0, -1, 0.5, 3;
  const Matrix p = phi_map * w;
  double expect = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j)
        expect += std::abs(oracle::cosine(oracle::column(w, i), oracle::column(w, j)) -
                           oracle::cosine(oracle::column(p, i), oracle::column(p, j)));
  EXPECT_NEAR(consistency_loss(w, p), expect, 1e-12);
  // Permuting classes in both leaves the sum unchanged.
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
  perm.indices() << 2, 0, 1;
  EXPECT_NEAR(consistency_loss(w * perm, p * perm), expect, 1e-12);
}

namespace {

struct Problem {
  Batch batch;
  ModelParams params;
  Matrix semantics;
  LossConfig cfg;
};

Problem small_problem(std::uint64_t seed, bool encoder) {
  GradcheckOptions o;
  o.max_semantic_dim = 6;
  o.max_feature_dim = 7;
  o.max_latent_dim = 4;
  // Redraw until the encoder presence matches, keeping the kink rejection.
  GradcheckProblem g = random_gradcheck_problem(seed, o);
  for (std::uint64_t k = 1; g.params.encoder.has_value() != encoder; ++k) {
    g = random_gradcheck_problem(seed + 1000 * k, o);
  }
  return {g.batch, g.params, g.seen_semantics, g.loss};
}

}  // namespace

TEST(TotalLoss, ValueMatchesDefinitionOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Problem p = small_problem(seed, seed % 2 == 0);
    const auto lib = evaluate_loss(p.batch, p.params, p.semantics, p.cfg);
    const auto ref = oracle::objective(p.batch, p.params, p.semantics, p.cfg);
    EXPECT_NEAR(lib.rank, ref.rank, 1e-12);
    EXPECT_NEAR(lib.align, ref.align, 1e-12);
    EXPECT_NEAR(lib.con, ref.con, 1e-12);
    EXPECT_NEAR(lib.total, ref.total, 1e-12);
    EXPECT_NEAR(lib.total, lib.rank + p.cfg.gamma1 * lib.align + p.cfg.gamma2 * lib.con, 1e-15);
    EXPECT_EQ(total_loss(p.batch, p.params, p.semantics, p.cfg).loss.total, lib.total);
  }
}

TEST(TotalLoss, GradientMatchesOracleDifferences) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const Problem p = small_problem(seed, seed % 2 == 0);
    const auto eval = total_loss(p.batch, p.params, p.semantics, p.cfg);
    const auto numeric = oracle::numeric_gradient(p.batch, p.params, p.semantics, p.cfg);
    const auto analytic = tensors(eval.grads);
    ASSERT_EQ(numeric.size(), analytic.size());
    const double floor = std::max(1e-7, 2.2e-16 * std::max(1.0, eval.loss.total) / 1e-5 / 1e-4);
    for (std::size_t t = 0; t < numeric.size(); ++t) {
      for (std::size_t i = 0; i < numeric[t].size(); ++i) {
        EXPECT_LT(relative_error(analytic[t].values[i], numeric[t][i], floor), 1e-4)
            << analytic[t].name << "[" << i << "] seed " << seed;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(TotalLoss, MaskedTermsReportZero) {
  Problem p = small_problem(7, true);
  p.cfg.terms = TermMask::parse("rank");
  const auto l = evaluate_loss(p.batch, p.params, p.semantics, p.cfg);
  EXPECT_EQ(l.align, 0.0);
  EXPECT_EQ(l.con, 0.0);
  EXPECT_EQ(l.total, l.rank);
  p.cfg.terms = TermMask::parse("rank,align,con");
  p.cfg.gamma1 = p.cfg.gamma2 = 0.0;
  const auto z = evaluate_loss(p.batch, p.params, p.semantics, p.cfg);
  EXPECT_EQ(z.total, z.rank);
}

TEST(TotalLoss, PerfectConfigurationIsZero) {
  // Identity semantic map, identity visual map, features equal to the class
  // semantic of their single positive, classes orthogonal so every hinge is
  // satisfied by a margin of 1.
  const std::size_t d = 3;
  ModelParams m;
  m.visual_map = MlpParams::zeros(MlpSpec{{d, d}});
  m.visual_map.weights[0] = Matrix::Identity(d, d);
  m.semantic_map = m.visual_map;
  Batch b;
  b.features = Matrix::Identity(d, d);
  b.labels = LabelMatrix::Identity(d, d);
  LossConfig cfg;
  const auto l = evaluate_loss(b, m, Matrix::Identity(d, d), cfg);
  EXPECT_EQ(l.rank, 0.0);
  EXPECT_NEAR(l.align, 0.0, 1e-15);
  EXPECT_EQ(l.con, 0.0);
  EXPECT_NEAR(l.total, 0.0, 1e-15);
}

TEST(TotalLoss, SamplesWithoutPositivesAreSkippedInAlignment) {
  Problem p = small_problem(9, false);
  Batch extended = p.batch;
  extended.features.conservativeResize(Eigen::NoChange, extended.features.cols() + 1);
  extended.features.col(extended.features.cols() - 1).setOnes();
  extended.labels.conservativeResize(extended.labels.rows() + 1, Eigen::NoChange);
  extended.labels.row(extended.labels.rows() - 1).setZero();
  const auto a = evaluate_loss(p.batch, p.params, p.semantics, p.cfg);
  const auto b = evaluate_loss(extended, p.params, p.semantics, p.cfg);
  EXPECT_NEAR(b.align, a.align, 1e-14);
  const double n = static_cast<double>(p.batch.features.cols());
  EXPECT_NEAR(b.rank, a.rank * n / (n + 1), 1e-14);
}

TEST(TermMask, ParseAndPrint) {
  EXPECT_EQ(TermMask::parse("rank,con").str(), "rank,con");
  EXPECT_EQ(TermMask::parse(" rank , align ").str(), "rank,align");
  EXPECT_THROW(TermMask::parse("rank,bogus"), ConfigError);
  EXPECT_THROW(TermMask::parse(""), ConfigError);
}

TEST(LossConfig, RejectsNegativeValues) {
  LossConfig c;
  c.delta = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.gamma2 = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Gradcheck, LibrarySuitePasses) {
  GradcheckOptions o;
  o.trials = 100;
  o.seed = 7;
  const auto report = run_gradcheck(o);
  EXPECT_EQ(report.trials.size(), 100u);
  EXPECT_TRUE(report.passed()) << report.max_rel_error;
}
