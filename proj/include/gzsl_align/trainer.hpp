#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gzsl_align/latent_net.hpp"
#include "gzsl_align/objective.hpp"
#include "gzsl_align/scoring_metrics.hpp"
#include "gzsl_align/vocab_data.hpp"

namespace gzsl {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  LossConfig loss;
  std::uint64_t seed = 0;
  EncoderMode encoder_mode = EncoderMode::EndToEnd;
  bool shuffle = true;
  // Whether training samples without any positive label ("No Finding") are used.
  bool keep_unlabeled_train = true;

  // Network widths; input widths come from the data.
  std::vector<std::size_t> encoder_widths{64, 64};
  std::vector<std::size_t> hidden_widths{512, 256};
  std::size_t latent_dim = 128;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t plateau_patience = 10;
  double plateau_factor = 0.01;
  double plateau_min_delta = 1e-6;

  std::vector<int> metric_ks{2, 3};

  void validate() const;
  ArchSpec arch(std::size_t feature_dim, std::size_t semantic_dim) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays the keys present in `j` onto `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
std::string config_hash(const TrainConfig& cfg);

const char* encoder_mode_name(EncoderMode mode);
EncoderMode parse_encoder_mode(const std::string& text);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown train;
  LossBreakdown val;
  MetricsReport val_metrics;
};

struct RunRecord {
  TrainConfig config;
  LossBreakdown initial_val;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  ModelParams best_params;
  ModelParams final_params;
  std::optional<std::filesystem::path> best_checkpoint;
  double wall_seconds = 0.0;

  const EpochRecord& best() const { return epochs.at(best_epoch - 1); }
};

/// Harmonic AUROC used for model selection; -inf when undefined.
double selection_score(const MetricsReport& report);

/// Minibatch Adam on the composite objective over `data.train`, validating on
/// `data.val` after every epoch.
///
/// The reduce-on-plateau schedule watches the validation objective, seeded by
/// a pre-training observation. The best epoch is the one with the highest
/// validation harmonic AUROC (earliest wins ties). With `run_dir` set, writes
/// config.json, metrics.csv, checkpoints/best.ckpt and checkpoints/last.ckpt.
RunRecord train(const TrainConfig& cfg, const ProblemData& data,
                std::optional<ModelParams> initial = std::nullopt,
                const std::optional<std::filesystem::path>& run_dir = std::nullopt);

/// metrics.csv contents for a finished run.
std::string metrics_csv(const RunRecord& record);

struct GridSpec {
  std::vector<double> gammas{0.1, 0.01, 0.05};
  std::vector<double> lrs{1e-4, 5e-5, 1e-5};

  void validate() const;
};

struct GridOptions {
  std::size_t jobs = 1;
  // When set, trains this many distinct (gamma, lr) points drawn at random
  // instead of the full product.
  std::optional<std::size_t> random_trials;
  std::optional<std::filesystem::path> run_dir;
};

struct GridPoint {
  double gamma = 0.0;
  double lr = 0.0;
};

struct GridResult {
  std::vector<GridPoint> points;
  std::vector<std::optional<RunRecord>> runs;  // nullopt where the run failed
  std::vector<std::string> failures;
  std::size_t best = 0;

  const RunRecord& best_run() const { return *runs.at(best); }
};

/// Trains one model per grid point with gamma1 = gamma2 = gamma and returns
/// all of them; `best` maximises validation harmonic AUROC, then unseen
/// AUROC, then prefers the lower learning rate.
GridResult grid_search(const GridSpec& grid, const TrainConfig& base, const ProblemData& data,
                       const GridOptions& options = {});

}  // namespace gzsl
