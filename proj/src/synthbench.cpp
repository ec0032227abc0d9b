#include "gzsl_align/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gzsl_align/errors.hpp"
#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/scoring_metrics.hpp"
#include "rng.hpp"

namespace gzsl {

using nlohmann::json;

void SynthSpec::validate() const {
  if (num_seen < 2) throw ConfigError("synthetic spec needs at least 2 seen classes");
  if (num_seen >= num_classes) throw ConfigError("synthetic spec needs S < C");
  if (semantic_dim == 0 || feature_dim == 0) throw ConfigError("synthetic dimensions must be positive");
  if (n_train == 0 || n_val == 0 || n_test == 0) throw ConfigError("synthetic split sizes must be positive");
  if (!(base_similarity >= 0.0 && base_similarity < 1.0)) {
    throw ConfigError("base_similarity must lie in [0, 1)");
  }
  if (unseen_mix < 1 || unseen_mix > num_seen) throw ConfigError("unseen_mix must lie in [1, S]");
  if (!(unseen_perturbation >= 0.0)) throw ConfigError("unseen_perturbation must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (max_labels_per_sample < 1) throw ConfigError("max_labels_per_sample must be >= 1");
  if (max_labels_per_sample > num_seen) {
    throw ConfigError("max_labels_per_sample (" + std::to_string(max_labels_per_sample) +
                      ") exceeds the number of seen classes available to the training split (" +
                      std::to_string(num_seen) + ")");
  }
  if (!(no_finding_rate >= 0.0 && no_finding_rate < 1.0)) {
    throw ConfigError("no_finding_rate must lie in [0, 1)");
  }
}

json to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"num_seen", s.num_seen},
          {"semantic_dim", s.semantic_dim},
          {"feature_dim", s.feature_dim},
          {"n_train", s.n_train},
          {"n_val", s.n_val},
          {"n_test", s.n_test},
          {"base_similarity", s.base_similarity},
          {"unseen_mix", s.unseen_mix},
          {"unseen_perturbation", s.unseen_perturbation},
          {"noise_sigma", s.noise_sigma},
          {"max_labels_per_sample", s.max_labels_per_sample},
          {"no_finding_rate", s.no_finding_rate},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  const json known = to_json(s);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown synthetic spec key '" + key + "'");
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    read("num_classes", s.num_classes);
    read("num_seen", s.num_seen);
    read("semantic_dim", s.semantic_dim);
    read("feature_dim", s.feature_dim);
    read("n_train", s.n_train);
    read("n_val", s.n_val);
    read("n_test", s.n_test);
    read("base_similarity", s.base_similarity);
    read("unseen_mix", s.unseen_mix);
    read("unseen_perturbation", s.unseen_perturbation);
    read("noise_sigma", s.noise_sigma);
    read("max_labels_per_sample", s.max_labels_per_sample);
    read("no_finding_rate", s.no_finding_rate);
    read("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed synthetic spec: ") + e.what());
  }
  return s;
}

namespace {

Vector gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  return v;
}

Vector unit(std::mt19937_64& rng, std::size_t n) {
  Vector v = gaussian(rng, n);
  while (v.norm() == 0.0) v = gaussian(rng, n);
  return v.normalized();
}

Matrix make_semantics(const SynthSpec& spec, std::mt19937_64& rng) {
  const auto d = spec.semantic_dim;
  Matrix rows(static_cast<Eigen::Index>(spec.num_classes), static_cast<Eigen::Index>(d));
  const Vector shared = unit(rng, d);
  const double a = std::sqrt(spec.base_similarity);
  const double b = std::sqrt(1.0 - spec.base_similarity);
  for (std::size_t i = 0; i < spec.num_seen; ++i) {
    Vector w = a * shared + b * unit(rng, d);
    rows.row(static_cast<Eigen::Index>(i)) = w.normalized().transpose();
  }
  std::vector<std::size_t> seen(spec.num_seen);
  std::iota(seen.begin(), seen.end(), std::size_t{0});
  std::exponential_distribution<double> expo(1.0);
  for (std::size_t u = spec.num_seen; u < spec.num_classes; ++u) {
    std::shuffle(seen.begin(), seen.end(), rng);
    Vector mix = Vector::Zero(static_cast<Eigen::Index>(d));
    std::vector<double> weights(spec.unseen_mix);
    for (auto& w : weights) w = expo(rng);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t k = 0; k < spec.unseen_mix; ++k) {
      mix += (weights[k] / total) * rows.row(static_cast<Eigen::Index>(seen[k])).transpose();
    }
    Vector w = mix + (spec.unseen_perturbation * mix.norm()) * unit(rng, d);
    if (w.norm() == 0.0) w = unit(rng, d);
    rows.row(static_cast<Eigen::Index>(u)) = w.normalized().transpose();
  }
  return rows;
}

Dataset make_split(const SynthSpec& spec, const Matrix& semantics, const Matrix& feature_map,
                   std::size_t count, bool seen_only, std::mt19937_64& rng) {
  const std::size_t candidates = seen_only ? spec.num_seen : spec.num_classes;
  const std::size_t max_labels = std::min(spec.max_labels_per_sample, candidates);
  std::vector<std::size_t> pool(candidates);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::uniform_int_distribution<std::size_t> label_count(1, max_labels);
  std::bernoulli_distribution no_finding(spec.no_finding_rate);

  Dataset ds;
  ds.label_space = LabelSpace::AllClasses;
  ds.label_width = spec.num_classes;
  ds.feature_dim = spec.feature_dim;
  ds.samples.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Sample s;
    s.labels.assign(spec.num_classes, 0);
    Vector signal = Vector::Zero(static_cast<Eigen::Index>(spec.feature_dim));
    if (!no_finding(rng)) {
      const std::size_t k = label_count(rng);
      // Partial Fisher-Yates: the first k entries become a uniform k-subset.
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, candidates - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      Vector w_x = Vector::Zero(semantics.cols());
      for (std::size_t i = 0; i < k; ++i) {
        s.labels[pool[i]] = 1;
        w_x += semantics.row(static_cast<Eigen::Index>(pool[i])).transpose();
      }
      signal = feature_map * (w_x / static_cast<double>(k));
    }
    s.features = signal + spec.noise_sigma * gaussian(rng, spec.feature_dim);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

SynthBenchmark generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 geometry_rng(detail::derive_seed(spec.seed, 100));
  const Matrix semantics = make_semantics(spec, geometry_rng);
  Matrix feature_map = Matrix(static_cast<Eigen::Index>(spec.feature_dim), static_cast<Eigen::Index>(spec.semantic_dim));
  {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(spec.semantic_dim)));
    for (Eigen::Index i = 0; i < feature_map.size(); ++i) feature_map.data()[i] = dist(geometry_rng);
  }

  std::vector<std::string> names;
  std::vector<bool> seen;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "class_%02zu", c);
    names.emplace_back(buf);
    seen.push_back(c < spec.num_seen);
  }
  ClassVocabulary vocab(std::move(names), seen);

  std::mt19937_64 train_rng(detail::derive_seed(spec.seed, 101));
  std::mt19937_64 val_rng(detail::derive_seed(spec.seed, 102));
  std::mt19937_64 test_rng(detail::derive_seed(spec.seed, 103));
  Dataset train_all = make_split(spec, semantics, feature_map, spec.n_train, true, train_rng);
  Dataset train = to_seen_only(train_all, vocab);
  Dataset val = make_split(spec, semantics, feature_map, spec.n_val, false, val_rng);
  Dataset test = make_split(spec, semantics, feature_map, spec.n_test, false, test_rng);

  return SynthBenchmark{spec,
                        ProblemData{std::move(vocab), SemanticMatrix(semantics), std::move(train), std::move(val),
                                    std::move(test)},
                        std::move(feature_map)};
}

std::vector<double> target_label_rates(const SynthSpec& spec, Split split) {
  spec.validate();
  const std::size_t candidates = split == Split::Train ? spec.num_seen : spec.num_classes;
  const std::size_t max_labels = std::min(spec.max_labels_per_sample, candidates);
  const double expected_labels = 0.5 * static_cast<double>(1 + max_labels);
  const double rate = (1.0 - spec.no_finding_rate) * expected_labels / static_cast<double>(candidates);
  std::vector<double> rates(spec.num_classes, 0.0);
  for (std::size_t c = 0; c < candidates; ++c) rates[c] = rate;
  return rates;
}

std::vector<std::optional<double>> bayes_reference_auroc(const SynthBenchmark& bench, Split split) {
  const ProblemData& data = bench.data;
  const Dataset ds = split == Split::Train ? expand_to_all(data.train, data.vocabulary) : split_of(data, split);
  const Matrix denoise = bench.feature_map.completeOrthogonalDecomposition().pseudoInverse();
  const Matrix estimates = denoise * ds.feature_matrix();
  const Matrix& semantics = data.semantics.rows();

  ScoreMatrix scores = ScoreMatrix::Zero(estimates.cols(), semantics.rows());
  for (Eigen::Index n = 0; n < estimates.cols(); ++n) {
    if (estimates.col(n).norm() == 0.0) continue;
    for (Eigen::Index c = 0; c < semantics.rows(); ++c) {
      scores(n, c) = cosine_similarity(estimates.col(n), semantics.row(c).transpose());
    }
  }
  return per_class_auroc(scores, ds.label_matrix());
}

std::vector<std::optional<double>> bayes_reference_auroc(const SynthSpec& spec, Split split) {
  return bayes_reference_auroc(generate(spec), split);
}

}  // namespace gzsl
