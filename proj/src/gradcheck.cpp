#include "gzsl_align/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "gzsl_align/errors.hpp"
#include "rng.hpp"

namespace gzsl {

namespace {

std::size_t draw(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Matrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void randomize_biases(MlpParams& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (auto& b : net.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
  }
}

GradcheckProblem draw_problem(std::mt19937_64& rng, const GradcheckOptions& o) {
  const std::size_t d = draw(rng, 2, o.max_semantic_dim);
  const std::size_t v = draw(rng, 2, o.max_feature_dim);
  const std::size_t l = draw(rng, 2, o.max_latent_dim);
  const std::size_t n = draw(rng, 1, o.max_batch);
  const std::size_t s = draw(rng, 2, std::max<std::size_t>(2, o.max_seen));

  ArchSpec arch;
  arch.feature_dim = v;
  arch.semantic_dim = d;
  arch.latent_dim = l;
  arch.hidden_widths = {draw(rng, 2, 8), draw(rng, 2, 8)};
  if (draw(rng, 0, 1) == 1) arch.encoder_widths = {draw(rng, 2, 8)};

  GradcheckProblem p;
  p.params = init_model(arch, rng());
  if (p.params.encoder) randomize_biases(*p.params.encoder, rng);
  randomize_biases(p.params.visual_map, rng);
  randomize_biases(p.params.semantic_map, rng);

  p.batch.features = gaussian(rng, v, n);
  p.batch.labels = LabelMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s));
  std::bernoulli_distribution coin(0.4);
  for (Eigen::Index i = 0; i < p.batch.labels.size(); ++i) p.batch.labels.data()[i] = coin(rng) ? 1 : 0;
  // Keep at least one sample with both positives and negatives.
  p.batch.labels.row(0).setZero();
  p.batch.labels(0, static_cast<Eigen::Index>(draw(rng, 0, s - 1))) = 1;
  p.seen_semantics = gaussian(rng, d, s);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  p.loss.delta = 0.1 + unit(rng);
  p.loss.gamma1 = 0.05 + unit(rng);
  p.loss.gamma2 = 0.05 + unit(rng);
  p.loss.rank_normalization = draw(rng, 0, 1) == 0 ? RankNormalization::SeenClassCount : RankNormalization::PairCount;
  return p;
}

double min_abs(const Matrix& m) { return m.size() == 0 ? std::numeric_limits<double>::infinity() : m.cwiseAbs().minCoeff(); }

double relu_distance(const MlpParams& net, const Matrix& x) {
  const MlpForward fwd = mlp_forward(net, x);
  double best = std::numeric_limits<double>::infinity();
  // The last pre-activation feeds no ReLU.
  for (std::size_t i = 0; i + 1 < fwd.tape.pre_activations.size(); ++i) {
    best = std::min(best, min_abs(fwd.tape.pre_activations[i]));
  }
  return best;
}

}  // namespace

double kink_distance(const GradcheckProblem& p) {
  double best = std::numeric_limits<double>::infinity();
  Matrix visual_in = p.batch.features;
  if (p.params.encoder) {
    best = std::min(best, relu_distance(*p.params.encoder, visual_in));
    visual_in = mlp_apply(*p.params.encoder, visual_in);
  }
  best = std::min(best, relu_distance(p.params.visual_map, visual_in));

  // The semantic net also sees each sample's averaged positive semantics.
  Matrix semantic_in = p.seen_semantics;
  const Eigen::Index n = p.batch.labels.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto positives = p.batch.labels.row(i).sum();
    if (positives == 0) continue;
    Vector w = p.seen_semantics * p.batch.labels.row(i).transpose().cast<double>() / static_cast<double>(positives);
    semantic_in.conservativeResize(Eigen::NoChange, semantic_in.cols() + 1);
    semantic_in.col(semantic_in.cols() - 1) = w;
  }
  best = std::min(best, relu_distance(p.params.semantic_map, semantic_in));

  const Matrix latent_v = project_visual(p.params, p.batch.features);
  const Matrix latent_s = project_semantics(p.params, p.seen_semantics);
  const Matrix scores = relevance_scores(latent_v, latent_s);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < scores.cols(); ++a) {
      if (p.batch.labels(i, a) != 1) continue;
      for (Eigen::Index b = 0; b < scores.cols(); ++b) {
        if (p.batch.labels(i, b) != 0) continue;
        best = std::min(best, std::abs(p.loss.delta + scores(i, b) - scores(i, a)));
      }
    }
  }
  for (Eigen::Index i = 0; i < latent_s.cols(); ++i) {
    for (Eigen::Index j = 0; j < latent_s.cols(); ++j) {
      if (i == j) continue;
      const double diff = cosine_similarity(p.seen_semantics.col(i), p.seen_semantics.col(j)) -
                          cosine_similarity(latent_s.col(i), latent_s.col(j));
      best = std::min(best, std::abs(diff));
    }
  }
  return best;
}

GradcheckProblem random_gradcheck_problem(std::uint64_t seed, const GradcheckOptions& options,
                                          std::size_t* redraws) {
  std::mt19937_64 rng(detail::derive_seed(seed, 200));
  std::size_t rejects = 0;
  for (;;) {
    GradcheckProblem p = draw_problem(rng, options);
    if (kink_distance(p) >= options.kink_margin) {
      if (redraws) *redraws = rejects;
      return p;
    }
    if (++rejects > 10000) throw Error("could not draw a gradcheck problem away from kinks");
  }
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradcheckTrial check_gradients(const GradcheckProblem& problem, const GradcheckOptions& options) {
  const LossEvaluation eval = total_loss(problem.batch, problem.params, problem.seen_semantics, problem.loss);
  ModelParams work = problem.params;
  auto values = tensors(work);
  const auto grads = tensors(eval.grads);

  // Central differences cannot resolve gradients below roughly eps·|L|/h, so
  // the denominator never drops beneath that level divided by the tolerance.
  const double resolution = std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eval.loss.total)) /
                            options.step;
  const double floor = std::max(options.error_floor, resolution / options.tolerance);

  GradcheckTrial trial;
  for (std::size_t t = 0; t < values.size(); ++t) {
    for (std::size_t i = 0; i < values[t].values.size(); ++i) {
      double& x = values[t].values[i];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate_loss(problem.batch, work, problem.seen_semantics, problem.loss).total;
      x = saved - options.step;
      const double down = evaluate_loss(problem.batch, work, problem.seen_semantics, problem.loss).total;
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(grads[t].values[i], numeric, floor);
      if (trial.parameters == 0 || err > trial.max_rel_error) {
        trial.max_rel_error = err;
        trial.worst_tensor = values[t].name;
        trial.worst_index = i;
      }
      ++trial.parameters;
    }
  }
  return trial;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.trials == 0) throw ConfigError("gradcheck needs at least one trial");
  if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  const auto started = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t k = 0; k < options.trials; ++k) {
    const std::uint64_t seed = detail::derive_seed(options.seed, k);
    std::size_t redraws = 0;
    const GradcheckProblem problem = random_gradcheck_problem(seed, options, &redraws);
    GradcheckTrial trial = check_gradients(problem, options);
    trial.seed = seed;
    trial.redraws = redraws;
    if (report.trials.empty() || trial.max_rel_error > report.max_rel_error) {
      report.max_rel_error = trial.max_rel_error;
      report.worst_trial = k;
    }
    report.trials.push_back(std::move(trial));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace gzsl
