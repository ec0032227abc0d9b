// Python module gzsl_align._core. Configs and reports cross the boundary as
// JSON text; the package __init__ turns them into dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>

#include "gzsl_align/checkpoint.hpp"
#include "gzsl_align/cli.hpp"
#include "gzsl_align/errors.hpp"
#include "gzsl_align/gradcheck.hpp"
#include "gzsl_align/logging.hpp"
#include "gzsl_align/scoring_metrics.hpp"
#include "gzsl_align/synthbench.hpp"
#include "gzsl_align/trainer.hpp"
#include "gzsl_align/vocab_data.hpp"

namespace py = pybind11;
using namespace gzsl;

namespace {

nlohmann::json optional_json(const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(); }

std::string run_summary(const RunRecord& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"lr", e.lr},
                      {"train_total", e.train.total},
                      {"val_total", e.val.total},
                      {"val_auroc_seen", optional_json(e.val_metrics.seen_mean)},
                      {"val_auroc_unseen",
                       optional_json(e.val_metrics.unseen_mean)},
                      {"val_auroc_harmonic",
                       optional_json(e.val_metrics.harmonic)}});
  }
  return nlohmann::json{{"best_epoch", r.best_epoch},
                        {"config", to_json(r.config)},
                        {"epochs", epochs},
                        {"best_val_metrics", to_json(r.best().val_metrics)},
                        {"wall_seconds", r.wall_seconds}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Generalized zero-shot multi-label alignment engine";
  init_logging("warn");

  // Later registrations are tried first, so subclasses come after their bases.
  const auto& error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  const auto& validation = py::register_exception<ValidationError>(m, "ValidationError", error);
  py::register_exception<InductiveViolation>(m, "InductiveViolation", validation);

  py::class_<ProblemData>(m, "Problem")
      .def_property_readonly("class_names", [](const ProblemData& d) { return d.vocabulary.names(); })
      .def_property_readonly("seen",
                             [](const ProblemData& d) {
                               std::vector<bool> out;
                               for (std::size_t c = 0; c < d.vocabulary.num_classes(); ++c) {
                                 out.push_back(d.vocabulary.is_seen(c));
                               }
                               return out;
                             })
      .def_property_readonly("semantics", [](const ProblemData& d) { return d.semantics.rows(); },
                             "C × d class embeddings")
      .def(
          "features", [](const ProblemData& d, const std::string& split) {
            return Matrix(split_of(d, parse_split(split)).feature_matrix().transpose());
          },
          py::arg("split"), "N × v features")
      .def(
          "labels", [](const ProblemData& d, const std::string& split) {
            return split_of(d, parse_split(split)).label_matrix();
          },
          py::arg("split"), "N × C labels (N × S for the training split)");

  m.def("load_manifest", [](const std::filesystem::path& p) { return load_manifest(p); }, py::arg("manifest"));

  m.def(
      "generate",
      [](const std::filesystem::path& out_dir, const std::string& spec_json) {
        const SynthSpec spec = synth_spec_from_json(nlohmann::json::parse(spec_json));
        return save_manifest(out_dir, generate(spec).data);
      },
      py::arg("out_dir"), py::arg("spec_json") = "{}");

  m.def(
      "bayes_reference_auroc",
      [](const std::string& spec_json, const std::string& split) {
        return bayes_reference_auroc(synth_spec_from_json(nlohmann::json::parse(spec_json)), parse_split(split));
      },
      py::arg("spec_json"), py::arg("split") = "test");

  m.def("default_config_json", [] { return to_json(TrainConfig{}).dump(); });

  m.def(
      "train",
      [](const std::filesystem::path& manifest, const std::string& config_json,
         const std::optional<std::filesystem::path>& out_dir) {
        const TrainConfig cfg = train_config_from_json(nlohmann::json::parse(config_json));
        cfg.validate();
        const ProblemData data = load_manifest(manifest);
        py::gil_scoped_release release;
        return run_summary(train(cfg, data, std::nullopt, out_dir));
      },
      py::arg("manifest"), py::arg("config_json") = "{}", py::arg("out_dir") = py::none());

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& manifest, const std::string& split,
         const std::vector<int>& ks) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        const ProblemData data = load_manifest(manifest);
        const Dataset& ds = split_of(data, parse_split(split));
        return to_json(evaluate(infer_scores(ckpt.params, ds, data.semantics), ds.label_matrix(), data.vocabulary,
                                ks))
            .dump();
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("split") = "test", py::arg("ks") = std::vector<int>{2, 3});

  m.def(
      "auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) { return auroc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def("harmonic_mean", &harmonic_mean, py::arg("seen"), py::arg("unseen"));
  m.def(
      "cosine_similarity", [](const Vector& a, const Vector& b) { return cosine_similarity(a, b); }, py::arg("a"),
      py::arg("b"));

  m.def(
      "gradcheck",
      [](std::size_t trials, std::uint64_t seed, double step, double tolerance) {
        GradcheckOptions o;
        o.trials = trials;
        o.seed = seed;
        o.step = step;
        o.tolerance = tolerance;
        const GradcheckReport r = run_gradcheck(o);
        return py::dict(py::arg("passed") = r.passed(), py::arg("max_rel_error") = r.max_rel_error,
                        py::arg("trials") = r.trials.size(), py::arg("seconds") = r.seconds);
      },
      py::arg("trials") = 100, py::arg("seed") = 0, py::arg("step") = 1e-5, py::arg("tolerance") = 1e-4);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "gzsl-align");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli::run(static_cast<int>(argv.size()), argv.data(), std::cout, std::cerr);
      },
      py::arg("args"));
}
