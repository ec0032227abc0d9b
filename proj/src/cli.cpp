#include "gzsl_align/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "gzsl_align/checkpoint.hpp"
#include "gzsl_align/errors.hpp"
#include "gzsl_align/gradcheck.hpp"
#include "gzsl_align/logging.hpp"
#include "gzsl_align/scoring_metrics.hpp"
#include "gzsl_align/synthbench.hpp"
#include "gzsl_align/trainer.hpp"
#include "gzsl_align/vocab_data.hpp"
#include "text_io.hpp"

namespace gzsl::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json read_json(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " '" + path.string() + "' does not exist");
  try {
    return json::parse(detail::read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { detail::write_text_file(path, j.dump(2) + "\n"); }

std::vector<std::size_t> parse_widths(const std::string& text, const char* flag) {
  std::vector<std::size_t> widths;
  if (text == "none" || text.empty()) return widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long w = std::stoll(item, &used);
      if (used != item.size() || w <= 0) throw std::invalid_argument(item);
      widths.push_back(static_cast<std::size_t>(w));
    } catch (const std::logic_error&) {
      throw ConfigError(std::string(flag) + ": '" + item + "' is not a positive integer");
    }
  }
  return widths;
}

// Every flag that can override a TrainConfig field.
struct TrainFlags {
  std::string config;
  std::optional<std::size_t> epochs, batch_size, latent_dim, patience;
  std::optional<double> lr, gamma1, gamma2, delta, plateau_factor;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> encoder_mode, term_mask, rank_norm, encoder_widths, hidden_widths;
  std::vector<int> ks;
  bool no_shuffle = false;
  bool drop_unlabeled = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_gammas) {
  cmd->add_option("--config", f.config, "JSON training config; flags override its keys");
  cmd->add_option("--seed", f.seed, "Seed for initialisation and shuffling");
  cmd->add_option("--epochs", f.epochs, "Training epochs (default 100)");
  cmd->add_option("--batch-size", f.batch_size, "Minibatch size (default 32)");
  cmd->add_option("--lr", f.lr, "Initial learning rate (default 1e-4)");
  if (with_gammas) {
    cmd->add_option("--gamma1", f.gamma1, "Alignment weight (default 0.01)");
    cmd->add_option("--gamma2", f.gamma2, "Consistency weight (default 0.01)");
  }
  cmd->add_option("--delta", f.delta, "Ranking margin (default 0.5)");
  cmd->add_option("--encoder-mode", f.encoder_mode, "end-to-end or frozen");
  cmd->add_option("--term-mask", f.term_mask, "Enabled loss terms, e.g. rank,align,con");
  cmd->add_option("--rank-normalization", f.rank_norm, "seen_class_count or pair_count");
  cmd->add_option("--k", f.ks, "Top-k values for metrics, e.g. 2,3")->delimiter(',');
  cmd->add_option("--encoder-widths", f.encoder_widths, "Encoder hidden widths, e.g. 64,64, or none");
  cmd->add_option("--hidden-widths", f.hidden_widths, "Mapper hidden widths (default 512,256)");
  cmd->add_option("--latent-dim", f.latent_dim, "Shared latent width (default 128)");
  cmd->add_option("--plateau-patience", f.patience, "Scheduler patience in epochs (default 10)");
  cmd->add_option("--plateau-factor", f.plateau_factor, "Scheduler lr multiplier (default 0.01)");
  cmd->add_flag("--no-shuffle", f.no_shuffle, "Keep the training order fixed");
  cmd->add_flag("--drop-unlabeled", f.drop_unlabeled, "Skip training samples without any positive label");
}

TrainConfig resolve_train_config(const TrainFlags& f) {
  TrainConfig cfg;
  if (!f.config.empty()) cfg = train_config_from_json(read_json(f.config, "config file"), cfg);
  if (f.seed) cfg.seed = *f.seed;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.lr) cfg.lr = *f.lr;
  if (f.gamma1) cfg.loss.gamma1 = *f.gamma1;
  if (f.gamma2) cfg.loss.gamma2 = *f.gamma2;
  if (f.delta) cfg.loss.delta = *f.delta;
  if (f.encoder_mode) cfg.encoder_mode = parse_encoder_mode(*f.encoder_mode);
  if (f.term_mask) cfg.loss.terms = TermMask::parse(*f.term_mask);
  if (f.rank_norm) {
    cfg = train_config_from_json(json{{"loss", {{"rank_normalization", *f.rank_norm}}}}, cfg);
  }
  if (!f.ks.empty()) cfg.metric_ks = f.ks;
  if (f.encoder_widths) cfg.encoder_widths = parse_widths(*f.encoder_widths, "--encoder-widths");
  if (f.hidden_widths) cfg.hidden_widths = parse_widths(*f.hidden_widths, "--hidden-widths");
  if (f.latent_dim) cfg.latent_dim = *f.latent_dim;
  if (f.patience) cfg.plateau_patience = *f.patience;
  if (f.plateau_factor) cfg.plateau_factor = *f.plateau_factor;
  if (f.no_shuffle) cfg.shuffle = false;
  if (f.drop_unlabeled) cfg.keep_unlabeled_train = false;
  cfg.validate();
  return cfg;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

void print_summary(std::ostream& out, const MetricsReport& m) {
  out << "auroc seen " << fmt_opt(m.seen_mean) << "  unseen " << fmt_opt(m.unseen_mean) << "  harmonic "
      << fmt_opt(m.harmonic) << '\n';
}

ProblemData load(const std::string& manifest) { return load_manifest(manifest); }

// --- generate --------------------------------------------------------------

struct GenerateFlags {
  std::string out_dir, config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> classes, seen, semantic_dim, feature_dim, n_train, n_val, n_test, unseen_mix, max_labels;
  std::optional<double> noise_sigma, base_similarity, unseen_perturbation, no_finding_rate;
};

int cmd_generate(const GenerateFlags& f, std::ostream& out) {
  SynthSpec spec;
  if (!f.config.empty()) spec = synth_spec_from_json(read_json(f.config, "synthetic spec"));
  if (f.seed) spec.seed = *f.seed;
  if (f.classes) spec.num_classes = *f.classes;
  if (f.seen) spec.num_seen = *f.seen;
  if (f.semantic_dim) spec.semantic_dim = *f.semantic_dim;
  if (f.feature_dim) spec.feature_dim = *f.feature_dim;
  if (f.n_train) spec.n_train = *f.n_train;
  if (f.n_val) spec.n_val = *f.n_val;
  if (f.n_test) spec.n_test = *f.n_test;
  if (f.unseen_mix) spec.unseen_mix = *f.unseen_mix;
  if (f.max_labels) spec.max_labels_per_sample = *f.max_labels;
  if (f.noise_sigma) spec.noise_sigma = *f.noise_sigma;
  if (f.base_similarity) spec.base_similarity = *f.base_similarity;
  if (f.unseen_perturbation) spec.unseen_perturbation = *f.unseen_perturbation;
  if (f.no_finding_rate) spec.no_finding_rate = *f.no_finding_rate;
  spec.validate();

  const SynthBenchmark bench = generate(spec);
  const fs::path manifest = save_manifest(f.out_dir, bench.data);
  write_json(fs::path(f.out_dir) / "synth_spec.json", to_json(spec));
  json reference = json::object();
  for (Split split : {Split::Val, Split::Test}) {
    const auto per_class = bayes_reference_auroc(bench, split);
    json row = json::array();
    for (const auto& v : per_class) row.push_back(v ? json(*v) : json(nullptr));
    reference[split_name(split)] = row;
  }
  write_json(fs::path(f.out_dir) / "bayes_reference.json", reference);
  out << "wrote " << manifest.string() << " (C=" << spec.num_classes << ", S=" << spec.num_seen
      << ", train/val/test=" << spec.n_train << '/' << spec.n_val << '/' << spec.n_test << ")\n";
  return kSuccess;
}

// --- validate --------------------------------------------------------------

int cmd_validate(const std::string& manifest, std::ostream& out) {
  const ProblemData data = load(manifest);
  out << "manifest ok: C=" << data.vocabulary.num_classes() << " S=" << data.vocabulary.num_seen()
      << " d=" << data.semantics.dim() << " v=" << data.train.feature_dim << '\n';
  for (Split split : {Split::Train, Split::Val, Split::Test}) {
    const Dataset& ds = split_of(data, split);
    out << "  " << split_name(split) << ": " << ds.size() << " samples, " << count_without_positives(ds)
        << " without positives\n";
  }
  return kSuccess;
}

// --- train / grid ----------------------------------------------------------

int cmd_train(const std::string& manifest, const std::string& out_dir, const TrainFlags& flags, std::ostream& out) {
  const TrainConfig cfg = resolve_train_config(flags);
  const ProblemData data = load(manifest);
  const RunRecord record = train(cfg, data, std::nullopt, fs::path(out_dir));
  write_json(fs::path(out_dir) / "val_metrics.json", to_json(record.best().val_metrics));
  out << "best epoch " << record.best_epoch << " of " << record.epochs.size() << ": ";
  print_summary(out, record.best().val_metrics);
  out << "run directory " << out_dir << '\n';
  spdlog::info("training took {:.1f} s", record.wall_seconds);
  return kSuccess;
}

int cmd_grid(const std::string& manifest, const std::string& out_dir, const TrainFlags& flags,
             const std::vector<double>& gammas, const std::vector<double>& lrs, std::size_t jobs,
             std::optional<std::size_t> random_trials, std::ostream& out) {
  const TrainConfig base = resolve_train_config(flags);
  GridSpec grid;
  if (!gammas.empty()) grid.gammas = gammas;
  if (!lrs.empty()) grid.lrs = lrs;
  grid.validate();
  if (jobs == 0) throw ConfigError("--jobs must be >= 1");
  const ProblemData data = load(manifest);

  fs::create_directories(out_dir);
  write_json(fs::path(out_dir) / "config.json",
             {{"base", to_json(base)}, {"gammas", grid.gammas}, {"lrs", grid.lrs},
              {"random_trials", random_trials ? json(*random_trials) : json(nullptr)}});
  const GridResult result = grid_search(grid, base, data, GridOptions{jobs, random_trials, fs::path(out_dir)});
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    out << "gamma " << result.points[i].gamma << "  lr " << result.points[i].lr << "  ";
    if (result.runs[i]) {
      print_summary(out, result.runs[i]->best().val_metrics);
    } else {
      out << "failed: " << result.failures[i] << '\n';
    }
  }
  const GridPoint& best = result.points[result.best];
  out << "selected gamma " << best.gamma << " lr " << best.lr << '\n';
  write_json(fs::path(out_dir) / "selected.json",
             {{"gamma", best.gamma},
              {"lr", best.lr},
              {"best_epoch", result.best_run().best_epoch},
              {"val_metrics", to_json(result.best_run().best().val_metrics)}});
  return kSuccess;
}

// --- eval --------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::string& split_text,
             const std::string& out_dir, std::vector<int> ks, std::ostream& out) {
  const Split split = parse_split(split_text);
  if (ks.empty()) ks = {2, 3};
  for (int k : ks) if (k < 1) throw ConfigError("--k values must be >= 1");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const ProblemData data = load(manifest);
  const Dataset ds = split == Split::Train ? expand_to_all(data.train, data.vocabulary) : split_of(data, split);
  if (ckpt.params.feature_dim() != ds.feature_dim || ckpt.params.semantic_dim() != data.semantics.dim()) {
    throw DataError("checkpoint expects v=" + std::to_string(ckpt.params.feature_dim()) + ", d=" +
                    std::to_string(ckpt.params.semantic_dim()) + " but the manifest has v=" +
                    std::to_string(ds.feature_dim) + ", d=" + std::to_string(data.semantics.dim()));
  }
  const MetricsReport report = evaluate(infer_scores(ckpt.params, ds, data.semantics), ds.label_matrix(),
                                        data.vocabulary, ks);
  const fs::path path = fs::path(out_dir) / "metrics.json";
  write_json(path, to_json(report));
  out << split_name(split) << " (" << ds.size() << " samples): ";
  print_summary(out, report);
  out << "wrote " << path.string() << '\n';
  return kSuccess;
}

// --- gradcheck ---------------------------------------------------------------

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out) {
  const GradcheckReport report = run_gradcheck(options);
  const GradcheckTrial& worst = report.trials[report.worst_trial];
  std::size_t params = 0, redraws = 0;
  for (const auto& t : report.trials) {
    params += t.parameters;
    redraws += t.redraws;
  }
  char line[160];
  std::snprintf(line, sizeof(line), "max relative error %.3e over %zu trials (%zu parameters, %zu redraws)\n",
                report.max_rel_error, report.trials.size(), params, redraws);
  out << line << "worst: trial " << report.worst_trial << ", " << worst.worst_tensor << '[' << worst.worst_index
      << "]\n";
  out << (report.passed() ? "PASS" : "FAIL") << " (tolerance " << options.tolerance << ")\n";
  return report.passed() ? kSuccess : kValidationFailure;
}

// --- report ------------------------------------------------------------------

int cmd_report(const std::string& metrics, const std::string& format, const std::string& output, std::ostream& out) {
  const MetricsReport report = [&] {
    try {
      return metrics_from_json(read_json(metrics, "metrics file"));
    } catch (const json::exception& e) {
      throw DataError("metrics file '" + metrics + "' is malformed: " + e.what());
    }
  }();
  const std::string text = format == "csv" ? to_csv_table(report) : to_text_table(report);
  if (output.empty()) {
    out << text;
  } else {
    detail::write_text_file(output, text);
  }
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized zero-shot multi-label training and evaluation"};
  app.name("gzsl-align");
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic benchmark as a manifest");
  generate_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  generate_cmd->add_option("--config", gen.config, "JSON synthetic spec; flags override its keys");
  generate_cmd->add_option("--seed", gen.seed, "Generator seed");
  generate_cmd->add_option("--classes", gen.classes, "Total classes C (default 14)");
  generate_cmd->add_option("--seen", gen.seen, "Seen classes S (default 10)");
  generate_cmd->add_option("--semantic-dim", gen.semantic_dim, "Embedding width d");
  generate_cmd->add_option("--feature-dim", gen.feature_dim, "Feature width v");
  generate_cmd->add_option("--n-train", gen.n_train, "Training samples");
  generate_cmd->add_option("--n-val", gen.n_val, "Validation samples");
  generate_cmd->add_option("--n-test", gen.n_test, "Test samples");
  generate_cmd->add_option("--noise-sigma", gen.noise_sigma, "Feature noise scale");
  generate_cmd->add_option("--max-labels", gen.max_labels, "Maximum positives per sample");
  generate_cmd->add_option("--base-similarity", gen.base_similarity, "Shared component of seen semantics, [0,1)");
  generate_cmd->add_option("--unseen-mix", gen.unseen_mix, "Seen classes mixed into each unseen class");
  generate_cmd->add_option("--unseen-perturbation", gen.unseen_perturbation, "Relative perturbation of unseen semantics");
  generate_cmd->add_option("--no-finding-rate", gen.no_finding_rate, "Fraction of samples without positives");

  std::string manifest;
  auto* validate_cmd = app.add_subcommand("validate", "Load and lint a manifest");
  validate_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();

  TrainFlags train_flags;
  std::string out_dir;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  train_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  train_cmd->add_option("--out-dir", out_dir, "Run directory")->required();
  add_train_flags(train_cmd, train_flags, true);

  TrainFlags grid_flags;
  std::vector<double> gammas, lrs;
  std::size_t jobs = 1;
  std::optional<std::size_t> random_trials;
  auto* grid_cmd = app.add_subcommand("grid", "Hyperparameter search over (gamma, lr), gamma1 = gamma2 = gamma");
  grid_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  grid_cmd->add_option("--out-dir", out_dir, "Grid directory")->required();
  add_train_flags(grid_cmd, grid_flags, false);
  grid_cmd->add_option("--gammas", gammas, "Gamma candidates (default 0.1,0.01,0.05)")->delimiter(',');
  grid_cmd->add_option("--lrs", lrs, "Learning-rate candidates (default 1e-4,5e-5,1e-5)")->delimiter(',');
  grid_cmd->add_option("--jobs", jobs, "Parallel training runs");
  grid_cmd->add_option("--random-trials", random_trials, "Train this many random grid points instead of all");

  std::string checkpoint, split = "test";
  std::vector<int> eval_ks;
  auto* eval_cmd = app.add_subcommand("eval", "Score a split with a checkpoint over all classes");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", manifest, "Manifest JSON")->required();
  eval_cmd->add_option("--split", split, "train, val or test (default test)");
  eval_cmd->add_option("--out-dir", out_dir, "Directory for metrics.json (default .)");
  eval_cmd->add_option("--k", eval_ks, "Top-k values, e.g. 2,3")->delimiter(',');

  GradcheckOptions gc;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  gradcheck_cmd->add_option("--seed", gc.seed, "Base seed");
  gradcheck_cmd->add_option("--trials", gc.trials, "Random configurations (default 100)");
  gradcheck_cmd->add_option("--step", gc.step, "Central-difference step (default 1e-5)");
  gradcheck_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error (default 1e-4)");

  std::string metrics, format = "text", output;
  auto* report_cmd = app.add_subcommand("report", "Render metrics.json as a table");
  report_cmd->add_option("--metrics", metrics, "metrics.json from eval or train")->required();
  report_cmd->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  report_cmd->add_option("--output", output, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kValidationFailure;
  }

  try {
    init_logging("info");
    if (*generate_cmd) return cmd_generate(gen, out);
    if (*validate_cmd) return cmd_validate(manifest, out);
    if (*train_cmd) return cmd_train(manifest, out_dir, train_flags, out);
    if (*grid_cmd) return cmd_grid(manifest, out_dir, grid_flags, gammas, lrs, jobs, random_trials, out);
    if (*eval_cmd) return cmd_eval(checkpoint, manifest, split, out_dir.empty() ? "." : out_dir, eval_ks, out);
    if (*gradcheck_cmd) return cmd_gradcheck(gc, out);
    if (*report_cmd) return cmd_report(metrics, format, output, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}

}  // namespace gzsl::cli
