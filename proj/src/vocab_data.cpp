#include "gzsl_align/vocab_data.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gzsl_align/errors.hpp"
#include "text_io.hpp"

namespace gzsl {

namespace fs = std::filesystem;
using nlohmann::json;

ClassVocabulary::ClassVocabulary(std::vector<std::string> names, const std::vector<bool>& seen_flags)
    : names_(std::move(names)), seen_flags_(seen_flags) {
  if (seen_flags_.size() != names_.size()) {
    throw DataError("class vocabulary: " + std::to_string(names_.size()) + " names but " +
                    std::to_string(seen_flags_.size()) + " seen flags");
  }
  std::set<std::string> unique;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) {
      throw DataError("class vocabulary: class " + std::to_string(i) + " has an empty name");
    }
    if (!unique.insert(names_[i]).second) {
      throw DataError("class vocabulary: duplicate class name '" + names_[i] + "'");
    }
    (seen_flags_[i] ? seen_ids_ : unseen_ids_).push_back(i);
  }
  if (seen_ids_.size() < 2) {
    throw DataError("class vocabulary: at least 2 seen classes are required, got " +
                    std::to_string(seen_ids_.size()));
  }
}

SemanticMatrix::SemanticMatrix(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.cols() == 0) {
    throw DataError("semantic matrix must have at least one row and one column");
  }
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
      if (!std::isfinite(rows_(i, j))) {
        throw DataError("semantic matrix: row " + std::to_string(i) + " component " +
                        std::to_string(j) + " is not finite");
      }
    }
    if (rows_.row(i).norm() == 0.0) {
      throw DataError("semantic matrix: row " + std::to_string(i) + " has zero norm");
    }
  }
}

SemanticMatrix SemanticMatrix::select(std::span<const std::size_t> ids) const {
  Matrix out(static_cast<Eigen::Index>(ids.size()), rows_.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= count()) {
      throw DimensionMismatch("semantic row " + std::to_string(ids[k]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(k)) = rows_.row(static_cast<Eigen::Index>(ids[k]));
  }
  return SemanticMatrix(std::move(out));
}

Matrix Dataset::feature_matrix() const {
  Matrix out(static_cast<Eigen::Index>(feature_dim), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (static_cast<std::size_t>(samples[n].features.size()) != feature_dim) {
      throw DimensionMismatch("sample " + std::to_string(n) + " has " +
                              std::to_string(samples[n].features.size()) +
                              " features, expected " + std::to_string(feature_dim));
    }
    out.col(static_cast<Eigen::Index>(n)) = samples[n].features;
  }
  return out;
}

LabelMatrix Dataset::label_matrix() const {
  LabelMatrix out(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(label_width));
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& labels = samples[n].labels;
    if (labels.size() != label_width) {
      throw DimensionMismatch("sample " + std::to_string(n) + " has " +
                              std::to_string(labels.size()) + " labels, expected " +
                              std::to_string(label_width));
    }
    for (std::size_t c = 0; c < label_width; ++c) {
      out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) = labels[c];
    }
  }
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  if (label_space != other.label_space || label_width != other.label_width ||
      feature_dim != other.feature_dim || samples.size() != other.samples.size()) {
    return false;
  }
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].labels != other.samples[n].labels ||
        samples[n].features.size() != other.samples[n].features.size() ||
        samples[n].features != other.samples[n].features) {
      return false;
    }
  }
  return true;
}

std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  for (std::size_t n = 0; n < ds.samples.size(); ++n) {
    const Sample& s = ds.samples[n];
    if (static_cast<std::size_t>(s.features.size()) != ds.feature_dim) {
      out.push_back({n, "feature vector has " + std::to_string(s.features.size()) +
                            " components, expected " + std::to_string(ds.feature_dim)});
    }
    for (Eigen::Index j = 0; j < s.features.size(); ++j) {
      if (!std::isfinite(s.features[j])) {
        out.push_back({n, "feature component " + std::to_string(j) + " is not finite"});
      }
    }
    if (s.labels.size() != ds.label_width) {
      out.push_back({n, "label vector has " + std::to_string(s.labels.size()) +
                            " entries, expected " + std::to_string(ds.label_width)});
    }
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
      if (s.labels[c] != 0 && s.labels[c] != 1) {
        out.push_back({n, "non-binary label " + std::to_string(s.labels[c]) + " at class " +
                              std::to_string(c)});
      }
    }
  }
  return out;
}

std::size_t count_without_positives(const Dataset& ds) {
  std::size_t count = 0;
  for (const auto& s : ds.samples) {
    bool any = false;
    for (int l : s.labels) any = any || l == 1;
    if (!any) ++count;
  }
  return count;
}

namespace {

void require_all_classes(const Dataset& ds, const ClassVocabulary& vocab) {
  if (ds.label_space != LabelSpace::AllClasses || ds.label_width != vocab.num_classes()) {
    throw DimensionMismatch("expected an ALL_CLASSES dataset with " +
                            std::to_string(vocab.num_classes()) + " label columns");
  }
}

Dataset restrict_to_seen(const Dataset& all, const ClassVocabulary& vocab, bool strict) {
  require_all_classes(all, vocab);
  Dataset out;
  out.label_space = LabelSpace::SeenOnly;
  out.label_width = vocab.num_seen();
  out.feature_dim = all.feature_dim;
  out.samples.reserve(all.samples.size());
  for (std::size_t n = 0; n < all.samples.size(); ++n) {
    const Sample& s = all.samples[n];
    if (strict) {
      for (std::size_t id : vocab.unseen_ids()) {
        if (s.labels.at(id) != 0) {
          throw InductiveViolation(n, vocab.name(id));
        }
      }
    }
    Sample seen{s.features, {}};
    seen.labels.reserve(vocab.num_seen());
    for (std::size_t id : vocab.seen_ids()) seen.labels.push_back(s.labels.at(id));
    out.samples.push_back(std::move(seen));
  }
  return out;
}

}  // namespace

Dataset to_seen_only(const Dataset& all_classes, const ClassVocabulary& vocab) {
  return restrict_to_seen(all_classes, vocab, true);
}

Dataset project_to_seen(const Dataset& all_classes, const ClassVocabulary& vocab) {
  return restrict_to_seen(all_classes, vocab, false);
}

Dataset expand_to_all(const Dataset& seen_only, const ClassVocabulary& vocab) {
  if (seen_only.label_space != LabelSpace::SeenOnly || seen_only.label_width != vocab.num_seen()) {
    throw DimensionMismatch("expected a SEEN_ONLY dataset with " + std::to_string(vocab.num_seen()) +
                            " label columns");
  }
  Dataset out;
  out.label_space = LabelSpace::AllClasses;
  out.label_width = vocab.num_classes();
  out.feature_dim = seen_only.feature_dim;
  out.samples.reserve(seen_only.samples.size());
  for (const auto& s : seen_only.samples) {
    Sample all{s.features, std::vector<int>(vocab.num_classes(), 0)};
    for (std::size_t k = 0; k < vocab.num_seen(); ++k) all.labels[vocab.seen_ids()[k]] = s.labels.at(k);
    out.samples.push_back(std::move(all));
  }
  return out;
}

Vector average_positive_semantics(std::span<const int> labels, const SemanticMatrix& semantics) {
  if (labels.size() != semantics.count()) {
    throw DimensionMismatch("label vector has " + std::to_string(labels.size()) +
                            " entries but semantic matrix has " + std::to_string(semantics.count()) +
                            " rows");
  }
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(semantics.dim()));
  std::size_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      sum += semantics.rows().row(static_cast<Eigen::Index>(i)).transpose();
      ++positives;
    }
  }
  if (positives == 0) {
    throw NoPositiveLabels("cannot average semantics of a sample without positive labels");
  }
  return sum / static_cast<double>(positives);
}

const char* split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

const Dataset& split_of(const ProblemData& data, Split split) {
  switch (split) {
    case Split::Train: return data.train;
    case Split::Val: return data.val;
    case Split::Test: return data.test;
  }
  return data.test;
}

namespace {

std::size_t positive_int(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer() || j.at(key).get<long long>() <= 0) {
    throw DataError(std::string("manifest: '") + key + "' must be a positive integer");
  }
  return j.at(key).get<std::size_t>();
}

std::string required_string(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw DataError("manifest: " + where + " needs string key '" + key + "'");
  }
  return j.at(key).get<std::string>();
}

void check_finite_rows(const std::vector<std::vector<double>>& rows, const fs::path& file) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (!std::isfinite(rows[r][c])) {
        throw DataError(file.string() + ": row " + std::to_string(r + 1) + " column " +
                        std::to_string(c + 1) + " is not finite");
      }
    }
  }
}

void check_widths(const std::vector<std::vector<double>>& rows, std::size_t width,
                  const fs::path& file, const std::string& declared) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw DataError(file.string() + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " values but " + declared);
    }
  }
}

Dataset load_split(const json& splits, const std::string& name, const fs::path& base,
                   std::size_t v, std::size_t num_classes) {
  if (!splits.contains(name) || !splits.at(name).is_object()) {
    throw DataError("manifest: missing split '" + name + "'");
  }
  const json& entry = splits.at(name);
  fs::path features_path = base / required_string(entry, "features", "split '" + name + "'");
  fs::path labels_path = base / required_string(entry, "labels", "split '" + name + "'");

  auto features = detail::read_numeric_csv(features_path);
  auto labels = detail::read_numeric_csv(labels_path);
  check_widths(features, v, features_path, "manifest declares v=" + std::to_string(v));
  check_widths(labels, num_classes, labels_path,
               "manifest declares " + std::to_string(num_classes) + " classes");
  check_finite_rows(features, features_path);
  check_finite_rows(labels, labels_path);
  if (features.size() != labels.size()) {
    throw DataError("split '" + name + "': " + std::to_string(features.size()) +
                    " feature rows but " + std::to_string(labels.size()) + " label rows");
  }

  Dataset ds;
  ds.label_space = LabelSpace::AllClasses;
  ds.label_width = num_classes;
  ds.feature_dim = v;
  ds.samples.reserve(features.size());
  for (std::size_t n = 0; n < features.size(); ++n) {
    Sample s;
    s.features = Eigen::Map<const Vector>(features[n].data(), static_cast<Eigen::Index>(v));
    s.labels.reserve(num_classes);
    for (double value : labels[n]) {
      if (value != std::floor(value)) {
        throw DataError(labels_path.string() + ": sample " + std::to_string(n) +
                        " has non-integer label " + detail::format_double(value));
      }
      s.labels.push_back(static_cast<int>(value));
    }
    ds.samples.push_back(std::move(s));
  }

  auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "split '" << name << "' has " << violations.size() << " invalid sample(s); first: sample "
        << violations.front().sample_index << ": " << violations.front().reason;
    throw DataError(msg.str());
  }
  return ds;
}

std::string dataset_csv(const Dataset& ds, bool labels) {
  std::string out;
  for (const auto& s : ds.samples) {
    if (labels) {
      for (std::size_t c = 0; c < s.labels.size(); ++c) {
        if (c) out += ',';
        out += std::to_string(s.labels[c]);
      }
    } else {
      for (Eigen::Index j = 0; j < s.features.size(); ++j) {
        if (j) out += ',';
        out += detail::format_double(s.features[j]);
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace

ProblemData load_manifest(const fs::path& manifest, const LoadOptions& options) {
  json root;
  try {
    root = json::parse(detail::read_text_file(manifest));
  } catch (const json::exception& e) {
    throw DataError("manifest '" + manifest.string() + "' is not valid JSON: " + e.what());
  }
  const fs::path base = manifest.parent_path();
  const std::size_t d = positive_int(root, "d");
  const std::size_t v = positive_int(root, "v");

  if (!root.contains("classes") || !root.at("classes").is_array() || root.at("classes").empty()) {
    throw DataError("manifest: 'classes' must be a non-empty array");
  }
  std::vector<std::string> names;
  std::vector<bool> seen;
  std::vector<std::size_t> embedding_rows;
  for (const auto& c : root.at("classes")) {
    names.push_back(required_string(c, "name", "class entry"));
    if (!c.contains("seen") || !c.at("seen").is_boolean()) {
      throw DataError("manifest: class '" + names.back() + "' needs boolean 'seen'");
    }
    seen.push_back(c.at("seen").get<bool>());
    if (!c.contains("embedding_row") || !c.at("embedding_row").is_number_integer() ||
        c.at("embedding_row").get<long long>() < 0) {
      throw DataError("manifest: class '" + names.back() + "' needs non-negative 'embedding_row'");
    }
    embedding_rows.push_back(c.at("embedding_row").get<std::size_t>());
  }
  ClassVocabulary vocab(std::move(names), seen);

  fs::path embeddings_path = base / required_string(root, "embeddings", "top level");
  auto embedding_values = detail::read_numeric_csv(embeddings_path);
  check_widths(embedding_values, d, embeddings_path, "manifest declares d=" + std::to_string(d));
  check_finite_rows(embedding_values, embeddings_path);
  Matrix rows(static_cast<Eigen::Index>(vocab.num_classes()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < vocab.num_classes(); ++i) {
    if (embedding_rows[i] >= embedding_values.size()) {
      throw DataError("manifest: class '" + vocab.name(i) + "' references embedding row " +
                      std::to_string(embedding_rows[i]) + " but " + embeddings_path.string() +
                      " has " + std::to_string(embedding_values.size()) + " rows");
    }
    for (std::size_t k = 0; k < d; ++k) {
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = embedding_values[embedding_rows[i]][k];
    }
  }
  SemanticMatrix semantics(std::move(rows));

  if (!root.contains("splits") || !root.at("splits").is_object()) {
    throw DataError("manifest: 'splits' must be an object");
  }
  const json& splits = root.at("splits");
  Dataset train_all = load_split(splits, "train", base, v, vocab.num_classes());
  Dataset train = to_seen_only(train_all, vocab);
  if (!options.keep_unlabeled_train) {
    std::erase_if(train.samples, [](const Sample& s) {
      for (int l : s.labels) if (l == 1) return false;
      return true;
    });
  }
  Dataset val = load_split(splits, "val", base, v, vocab.num_classes());
  Dataset test = load_split(splits, "test", base, v, vocab.num_classes());

  return ProblemData{std::move(vocab), std::move(semantics), std::move(train), std::move(val),
                     std::move(test)};
}

fs::path save_manifest(const fs::path& dir, const ProblemData& data) {
  fs::create_directories(dir);
  const auto& vocab = data.vocabulary;

  std::string embeddings;
  for (Eigen::Index i = 0; i < data.semantics.rows().rows(); ++i) {
    for (Eigen::Index k = 0; k < data.semantics.rows().cols(); ++k) {
      if (k) embeddings += ',';
      embeddings += detail::format_double(data.semantics.rows()(i, k));
    }
    embeddings += '\n';
  }
  detail::write_text_file(dir / "embeddings.csv", embeddings);

  json manifest;
  manifest["d"] = data.semantics.dim();
  manifest["v"] = data.train.feature_dim;
  manifest["embeddings"] = "embeddings.csv";
  json classes = json::array();
  for (std::size_t i = 0; i < vocab.num_classes(); ++i) {
    classes.push_back({{"name", vocab.name(i)}, {"seen", vocab.is_seen(i)}, {"embedding_row", i}});
  }
  manifest["classes"] = classes;

  const Dataset train_all = data.train.label_space == LabelSpace::SeenOnly
                                ? expand_to_all(data.train, vocab)
                                : data.train;
  const std::pair<const char*, const Dataset*> splits[] = {
      {"train", &train_all}, {"val", &data.val}, {"test", &data.test}};
  for (const auto& [name, ds] : splits) {
    std::string features_file = std::string(name) + "_features.csv";
    std::string labels_file = std::string(name) + "_labels.csv";
    detail::write_text_file(dir / features_file, dataset_csv(*ds, false));
    detail::write_text_file(dir / labels_file, dataset_csv(*ds, true));
    manifest["splits"][name] = {{"features", features_file}, {"labels", labels_file}};
  }

  fs::path manifest_path = dir / "manifest.json";
  detail::write_text_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace gzsl
