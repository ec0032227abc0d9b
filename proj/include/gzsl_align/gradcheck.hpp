#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/objective.hpp"

namespace gzsl {

struct GradcheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so that entries whose true
  // gradient is ~0 are judged on absolute error instead. check_gradients
  // raises it to the round-off resolution of the difference quotient.
  double error_floor = 1e-7;
  // Configurations with a ReLU pre-activation, active hinge argument or
  // consistency difference closer than this to zero are redrawn.
  double kink_margin = 1e-3;

  std::size_t max_semantic_dim = 16;
  std::size_t max_feature_dim = 32;
  std::size_t max_latent_dim = 8;
  std::size_t max_batch = 4;
  std::size_t max_seen = 5;
};

/// One random objective instance: a batch, a model and a loss config with
/// every term enabled.
struct GradcheckProblem {
  Batch batch;
  ModelParams params;
  Matrix seen_semantics;  // d × S
  LossConfig loss;
};

/// Smallest distance from any non-differentiable point of the objective.
double kink_distance(const GradcheckProblem& problem);

/// Draws a problem from `seed`, redrawing while it sits within
/// `options.kink_margin` of a kink. `redraws` receives the number of rejects.
GradcheckProblem random_gradcheck_problem(std::uint64_t seed, const GradcheckOptions& options,
                                          std::size_t* redraws = nullptr);

double relative_error(double analytic, double numeric, double floor);

struct GradcheckTrial {
  std::uint64_t seed = 0;
  std::size_t redraws = 0;
  std::size_t parameters = 0;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
};

/// Central differences of evaluate_loss against total_loss for every
/// parameter of `problem`.
GradcheckTrial check_gradients(const GradcheckProblem& problem, const GradcheckOptions& options);

struct GradcheckReport {
  std::vector<GradcheckTrial> trials;
  double max_rel_error = 0.0;
  std::size_t worst_trial = 0;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
};

/// Runs `options.trials` independent problems with seeds derived from
/// `options.seed`.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace gzsl
