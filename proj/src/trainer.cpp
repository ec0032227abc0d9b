#include "gzsl_align/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "gzsl_align/checkpoint.hpp"
#include "gzsl_align/errors.hpp"
#include "gzsl_align/optim.hpp"
#include "rng.hpp"
#include "text_io.hpp"

namespace gzsl {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  loss.validate();
  for (std::size_t w : encoder_widths) if (w == 0) throw ConfigError("encoder widths must be positive");
  for (std::size_t w : hidden_widths) if (w == 0) throw ConfigError("hidden widths must be positive");
  if (latent_dim == 0) throw ConfigError("latent dimension must be positive");
  AdamState adam;
  adam.lr = lr;
  adam.beta1 = adam_beta1;
  adam.beta2 = adam_beta2;
  adam.epsilon = adam_epsilon;
  adam.validate();
  PlateauScheduler{plateau_patience, plateau_factor, plateau_min_delta}.validate();
  if (metric_ks.empty()) throw ConfigError("at least one metric k is required");
  for (int k : metric_ks) if (k < 1) throw ConfigError("metric k values must be >= 1");
}

ArchSpec TrainConfig::arch(std::size_t feature_dim, std::size_t semantic_dim) const {
  return ArchSpec{feature_dim, semantic_dim, encoder_widths, hidden_widths, latent_dim};
}

const char* encoder_mode_name(EncoderMode mode) {
  return mode == EncoderMode::EndToEnd ? "end-to-end" : "frozen";
}

EncoderMode parse_encoder_mode(const std::string& text) {
  if (text == "end-to-end" || text == "end_to_end") return EncoderMode::EndToEnd;
  if (text == "frozen") return EncoderMode::Frozen;
  throw ConfigError("unknown encoder mode '" + text + "' (expected end-to-end or frozen)");
}

namespace {

const char* normalization_name(RankNormalization n) {
  return n == RankNormalization::SeenClassCount ? "seen_class_count" : "pair_count";
}

RankNormalization parse_normalization(const std::string& text) {
  if (text == "seen_class_count") return RankNormalization::SeenClassCount;
  if (text == "pair_count") return RankNormalization::PairCount;
  throw ConfigError("unknown rank normalization '" + text + "'");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"seed", c.seed},
          {"encoder_mode", encoder_mode_name(c.encoder_mode)},
          {"shuffle", c.shuffle},
          {"keep_unlabeled_train", c.keep_unlabeled_train},
          {"loss",
           {{"delta", c.loss.delta},
            {"gamma1", c.loss.gamma1},
            {"gamma2", c.loss.gamma2},
            {"terms", c.loss.terms.str()},
            {"rank_normalization", normalization_name(c.loss.rank_normalization)}}},
          {"arch", {{"encoder_widths", c.encoder_widths}, {"hidden_widths", c.hidden_widths}, {"latent_dim", c.latent_dim}}},
          {"adam", {{"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"epsilon", c.adam_epsilon}}},
          {"plateau", {{"patience", c.plateau_patience}, {"factor", c.plateau_factor}, {"min_delta", c.plateau_min_delta}}},
          {"metric_ks", c.metric_ks}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  reject_unknown(j, {"epochs", "batch_size", "lr", "seed", "encoder_mode", "shuffle", "keep_unlabeled_train", "loss",
                     "arch", "adam", "plateau", "metric_ks"}, "");
  auto read = [](const json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "lr", c.lr);
    read(j, "seed", c.seed);
    if (j.contains("encoder_mode")) c.encoder_mode = parse_encoder_mode(j.at("encoder_mode").get<std::string>());
    read(j, "shuffle", c.shuffle);
    read(j, "keep_unlabeled_train", c.keep_unlabeled_train);
    read(j, "metric_ks", c.metric_ks);
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      reject_unknown(l, {"delta", "gamma1", "gamma2", "terms", "rank_normalization"}, "loss.");
      read(l, "delta", c.loss.delta);
      read(l, "gamma1", c.loss.gamma1);
      read(l, "gamma2", c.loss.gamma2);
      if (l.contains("terms")) c.loss.terms = TermMask::parse(l.at("terms").get<std::string>());
      if (l.contains("rank_normalization")) {
        c.loss.rank_normalization = parse_normalization(l.at("rank_normalization").get<std::string>());
      }
    }
    if (j.contains("arch")) {
      const json& a = j.at("arch");
      reject_unknown(a, {"encoder_widths", "hidden_widths", "latent_dim"}, "arch.");
      read(a, "encoder_widths", c.encoder_widths);
      read(a, "hidden_widths", c.hidden_widths);
      read(a, "latent_dim", c.latent_dim);
    }
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      reject_unknown(a, {"beta1", "beta2", "epsilon"}, "adam.");
      read(a, "beta1", c.adam_beta1);
      read(a, "beta2", c.adam_beta2);
      read(a, "epsilon", c.adam_epsilon);
    }
    if (j.contains("plateau")) {
      const json& p = j.at("plateau");
      reject_unknown(p, {"patience", "factor", "min_delta"}, "plateau.");
      read(p, "patience", c.plateau_patience);
      read(p, "factor", c.plateau_factor);
      read(p, "min_delta", c.plateau_min_delta);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

std::string config_hash(const TrainConfig& cfg) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(to_json(cfg).dump())));
  return buf;
}

double selection_score(const MetricsReport& report) {
  return report.harmonic ? *report.harmonic : -std::numeric_limits<double>::infinity();
}

namespace {

void add_weighted(LossBreakdown& into, const LossBreakdown& x, double w) {
  into.rank += w * x.rank;
  into.align += w * x.align;
  into.con += w * x.con;
  into.total += w * x.total;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); }

}  // namespace

std::string metrics_csv(const RunRecord& record) {
  std::ostringstream out;
  out << "epoch,lr,train_rank,train_align,train_con,train_total,val_rank,val_align,val_con,val_total,"
         "val_auroc_seen,val_auroc_unseen,val_auroc_harmonic\n";
  for (const auto& e : record.epochs) {
    using detail::format_double;
    out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.train.rank) << ','
        << format_double(e.train.align) << ',' << format_double(e.train.con) << ',' << format_double(e.train.total)
        << ',' << format_double(e.val.rank) << ',' << format_double(e.val.align) << ','
        << format_double(e.val.con) << ',' << format_double(e.val.total) << ',' << fmt_opt(e.val_metrics.seen_mean)
        << ',' << fmt_opt(e.val_metrics.unseen_mean) << ',' << fmt_opt(e.val_metrics.harmonic) << '\n';
  }
  return out.str();
}

RunRecord train(const TrainConfig& cfg, const ProblemData& data, std::optional<ModelParams> initial,
                const std::optional<fs::path>& run_dir) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const ClassVocabulary& vocab = data.vocabulary;
  if (data.train.label_space != LabelSpace::SeenOnly || data.train.label_width != vocab.num_seen()) {
    throw DataError("training split must be SEEN_ONLY with " + std::to_string(vocab.num_seen()) + " label columns");
  }
  Dataset train_split = data.train;
  if (!cfg.keep_unlabeled_train) {
    std::erase_if(train_split.samples, [](const Sample& s) {
      return std::none_of(s.labels.begin(), s.labels.end(), [](int l) { return l == 1; });
    });
  }
  if (train_split.empty()) throw DataError("training split is empty");
  if (data.val.empty()) throw DataError("validation split is empty");

  ModelParams params = initial ? std::move(*initial)
                               : init_model(cfg.arch(train_split.feature_dim, data.semantics.dim()), cfg.seed);
  params.validate();
  if (params.feature_dim() != train_split.feature_dim || params.semantic_dim() != data.semantics.dim()) {
    throw DimensionMismatch("model expects v=" + std::to_string(params.feature_dim()) + ", d=" +
                            std::to_string(params.semantic_dim()) + " but data has v=" +
                            std::to_string(train_split.feature_dim) + ", d=" + std::to_string(data.semantics.dim()));
  }

  const Matrix seen_semantics = data.semantics.select(vocab.seen_ids()).columns();
  const Batch val_batch = make_batch(project_to_seen(data.val, vocab));
  const Matrix val_features = data.val.feature_matrix();
  const LabelMatrix val_labels = data.val.label_matrix();
  const bool train_encoder = cfg.encoder_mode == EncoderMode::EndToEnd;
  const std::string hash = config_hash(cfg);

  AdamState adam = AdamState::for_tensors(tensors(std::as_const(params), train_encoder), cfg.lr);
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.epsilon = cfg.adam_epsilon;
  PlateauScheduler scheduler{cfg.plateau_patience, cfg.plateau_factor, cfg.plateau_min_delta};

  RunRecord record;
  record.config = cfg;
  record.initial_val = evaluate_loss(val_batch, params, seen_semantics, cfg.loss);
  scheduler.observe(record.initial_val.total);

  if (run_dir) {
    fs::create_directories(*run_dir / "checkpoints");
    detail::write_text_file(*run_dir / "config.json", to_json(cfg).dump(2) + "\n");
  }

  std::mt19937_64 shuffle_rng(detail::derive_seed(cfg.seed, 7));
  std::vector<std::size_t> order(train_split.size());
  double best_score = -std::numeric_limits<double>::infinity();
  const double n_train = static_cast<double>(train_split.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = adam.lr;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Batch batch = make_batch(train_split, std::span(order).subspan(start, stop - start));
      const LossEvaluation eval = total_loss(batch, params, seen_semantics, cfg.loss);
      if (!std::isfinite(eval.loss.total)) throw NonFiniteLoss(epoch, batch_index);
      add_weighted(rec.train, eval.loss, static_cast<double>(stop - start) / n_train);
      adam_step(tensors(params, train_encoder), tensors(eval.grads, train_encoder), adam);
    }

    rec.val = evaluate_loss(val_batch, params, seen_semantics, cfg.loss);
    rec.val_metrics = evaluate(infer_scores(params, val_features, data.semantics), val_labels, vocab, cfg.metric_ks);
    if (scheduler.observe(rec.val.total)) {
      adam.lr = scheduler.scaled_lr(cfg.lr);
      spdlog::info("epoch {}: validation loss plateaued, lr -> {:g}", epoch, adam.lr);
    }

    const double score = selection_score(rec.val_metrics);
    if (record.epochs.empty() || score > best_score) {
      best_score = score;
      record.best_epoch = epoch;
      record.best_params = params;
      if (run_dir) {
        record.best_checkpoint = *run_dir / "checkpoints" / "best.ckpt";
        save_checkpoint(*record.best_checkpoint, Checkpoint{params, adam, cfg.seed, epoch, hash});
      }
    }
    spdlog::info("epoch {:3d}  train {:.5f}  val {:.5f}  auroc seen {:.4f} unseen {:.4f} H {:.4f}", epoch,
                 rec.train.total, rec.val.total, rec.val_metrics.seen_mean.value_or(NAN),
                 rec.val_metrics.unseen_mean.value_or(NAN), rec.val_metrics.harmonic.value_or(NAN));
    record.epochs.push_back(std::move(rec));
  }

  record.final_params = params;
  if (run_dir) {
    save_checkpoint(*run_dir / "checkpoints" / "last.ckpt", Checkpoint{params, adam, cfg.seed, cfg.epochs, hash});
    detail::write_text_file(*run_dir / "metrics.csv", metrics_csv(record));
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

void GridSpec::validate() const {
  if (gammas.empty() || lrs.empty()) throw ConfigError("grid needs at least one gamma and one learning rate");
  for (double g : gammas) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("grid gammas must be positive");
  }
  for (double lr : lrs) {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("grid learning rates must be positive");
  }
}

namespace {

struct SelectionKey {
  double harmonic;
  double unseen;
  double lr;
};

// True when a beats b.
bool better(const SelectionKey& a, const SelectionKey& b) {
  if (a.harmonic != b.harmonic) return a.harmonic > b.harmonic;
  if (a.unseen != b.unseen) return a.unseen > b.unseen;
  return a.lr < b.lr;
}

std::string point_dir_name(const GridPoint& p) {
  return "gamma_" + detail::format_double(p.gamma) + "_lr_" + detail::format_double(p.lr);
}

}  // namespace

GridResult grid_search(const GridSpec& grid, const TrainConfig& base, const ProblemData& data,
                       const GridOptions& options) {
  grid.validate();
  base.validate();
  GridResult result;
  for (double g : grid.gammas) {
    for (double lr : grid.lrs) result.points.push_back({g, lr});
  }
  if (options.random_trials) {
    if (*options.random_trials == 0) throw ConfigError("random trials must be >= 1");
    std::mt19937_64 rng(detail::derive_seed(base.seed, 11));
    std::shuffle(result.points.begin(), result.points.end(), rng);
    result.points.resize(std::min(result.points.size(), *options.random_trials));
  }
  result.runs.resize(result.points.size());
  result.failures.resize(result.points.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < result.points.size(); i = next++) {
      TrainConfig cfg = base;
      cfg.loss.gamma1 = result.points[i].gamma;
      cfg.loss.gamma2 = result.points[i].gamma;
      cfg.lr = result.points[i].lr;
      std::optional<fs::path> dir;
      if (options.run_dir) dir = *options.run_dir / point_dir_name(result.points[i]);
      try {
        result.runs[i] = train(cfg, data, std::nullopt, dir);
      } catch (const std::exception& e) {
        result.failures[i] = e.what();
        spdlog::warn("grid point gamma={} lr={} failed: {}", result.points[i].gamma, result.points[i].lr, e.what());
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, result.points.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::optional<SelectionKey> best_key;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    if (!result.runs[i]) continue;
    const MetricsReport& m = result.runs[i]->best().val_metrics;
    SelectionKey key{selection_score(m), m.unseen_mean.value_or(neg_inf), result.points[i].lr};
    if (!best_key || better(key, *best_key)) {
      best_key = key;
      result.best = i;
    }
  }
  if (!best_key) {
    std::string msg = "all grid runs failed";
    for (std::size_t i = 0; i < result.failures.size(); ++i) {
      if (!result.failures[i].empty()) {
        msg += "; " + point_dir_name(result.points[i]) + ": " + result.failures[i];
        break;
      }
    }
    throw Error(msg);
  }

  if (options.run_dir) {
    std::ostringstream csv;
    csv << "gamma,lr,status,best_epoch,val_auroc_seen,val_auroc_unseen,val_auroc_harmonic,selected\n";
    for (std::size_t i = 0; i < result.points.size(); ++i) {
      csv << detail::format_double(result.points[i].gamma) << ',' << detail::format_double(result.points[i].lr) << ',';
      if (result.runs[i]) {
        const auto& m = result.runs[i]->best().val_metrics;
        csv << "ok," << result.runs[i]->best_epoch << ',' << fmt_opt(m.seen_mean) << ',' << fmt_opt(m.unseen_mean)
            << ',' << fmt_opt(m.harmonic);
      } else {
        csv << "failed,,,,";
      }
      csv << ',' << (i == result.best ? 1 : 0) << '\n';
    }
    detail::write_text_file(*options.run_dir / "grid.csv", csv.str());
  }
  return result;
}

}  // namespace gzsl
