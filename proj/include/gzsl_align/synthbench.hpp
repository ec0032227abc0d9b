#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "gzsl_align/vocab_data.hpp"

namespace gzsl {

/// Parameters of a synthetic GZSL problem.
///
/// Seen semantics share a common direction whose weight sets the expected
/// pairwise cosine (`base_similarity`). Each unseen semantic is a random convex
/// combination of `unseen_mix` seen semantics plus a perturbation of norm
/// `unseen_perturbation` times the combination's norm. A sample's features are
/// a fixed random linear map of its averaged positive semantics plus isotropic
/// Gaussian noise of scale `noise_sigma`.
struct SynthSpec {
  std::size_t num_classes = 14;
  std::size_t num_seen = 10;
  std::size_t semantic_dim = 16;
  std::size_t feature_dim = 32;
  std::size_t n_train = 2000;
  std::size_t n_val = 300;
  std::size_t n_test = 700;
  double base_similarity = 0.2;
  std::size_t unseen_mix = 2;
  double unseen_perturbation = 0.5;
  double noise_sigma = 0.3;
  std::size_t max_labels_per_sample = 3;
  // Fraction of samples drawn without any positive label.
  double no_finding_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

struct SynthBenchmark {
  SynthSpec spec;
  ProblemData data;
  Matrix feature_map;  // v × d, the generator's true linear map
};

SynthBenchmark generate(const SynthSpec& spec);

/// Expected positive rate of every class (vocabulary order) in a split.
std::vector<double> target_label_rates(const SynthSpec& spec, Split split);

/// Per-class AUROC of the generator's own scoring rule: cosine between the
/// least-squares de-noised semantics and each true class semantic.
std::vector<std::optional<double>> bayes_reference_auroc(const SynthBenchmark& bench, Split split);
std::vector<std::optional<double>> bayes_reference_auroc(const SynthSpec& spec, Split split);

}  // namespace gzsl
