#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gzsl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One row per sample, one column per class.
using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Named classes split into disjoint seen and unseen index sets.
///
/// Class indices are positions in `names()`. Seen and unseen id lists are kept
/// in ascending order; a SEEN_ONLY label vector is indexed by position in
/// `seen_ids()`.
class ClassVocabulary {
 public:
  ClassVocabulary(std::vector<std::string> names, const std::vector<bool>& seen_flags);

  std::size_t num_classes() const { return names_.size(); }
  std::size_t num_seen() const { return seen_ids_.size(); }
  std::size_t num_unseen() const { return unseen_ids_.size(); }

  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::span<const std::size_t> seen_ids() const { return seen_ids_; }
  std::span<const std::size_t> unseen_ids() const { return unseen_ids_; }
  bool is_seen(std::size_t id) const { return seen_flags_.at(id); }

  bool operator==(const ClassVocabulary&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<bool> seen_flags_;
  std::vector<std::size_t> seen_ids_;
  std::vector<std::size_t> unseen_ids_;
};

/// Per-class semantic embeddings, one row per class in vocabulary order.
class SemanticMatrix {
 public:
  explicit SemanticMatrix(Matrix rows);

  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  std::size_t count() const { return static_cast<std::size_t>(rows_.rows()); }
  const Matrix& rows() const { return rows_; }
  Vector row(std::size_t i) const { return rows_.row(static_cast<Eigen::Index>(i)).transpose(); }

  SemanticMatrix select(std::span<const std::size_t> ids) const;
  // d × count, one class per column; the layout the networks consume.
  Matrix columns() const { return rows_.transpose(); }

  bool operator==(const SemanticMatrix& other) const { return rows_ == other.rows_; }

 private:
  Matrix rows_;
};

struct Sample {
  Vector features;
  std::vector<int> labels;
};

enum class LabelSpace { SeenOnly, AllClasses };

struct Dataset {
  LabelSpace label_space = LabelSpace::AllClasses;
  std::size_t label_width = 0;
  std::size_t feature_dim = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // v × N, one sample per column.
  Matrix feature_matrix() const;
  LabelMatrix label_matrix() const;

  bool operator==(const Dataset& other) const;
};

struct Violation {
  std::size_t sample_index;
  std::string reason;
};

/// Returns every broken invariant; an empty result means the dataset is well formed.
std::vector<Violation> validate_dataset(const Dataset& ds);

std::size_t count_without_positives(const Dataset& ds);

/// Restricts an ALL_CLASSES dataset to the seen label columns.
///
/// Throws InductiveViolation naming the first sample with an unseen positive.
Dataset to_seen_only(const Dataset& all_classes, const ClassVocabulary& vocab);

/// Same restriction, but silently drops unseen positives. Used for
/// validation-loss evaluation where unseen positives are legitimate.
Dataset project_to_seen(const Dataset& all_classes, const ClassVocabulary& vocab);

/// Expands a SEEN_ONLY dataset back to C columns with zeros in unseen slots.
Dataset expand_to_all(const Dataset& seen_only, const ClassVocabulary& vocab);

/// Mean of the rows of `semantics` whose label is positive.
///
/// `labels` is indexed like the rows of `semantics`. Throws NoPositiveLabels
/// when no label is set.
Vector average_positive_semantics(std::span<const int> labels, const SemanticMatrix& semantics);

/// Everything a manifest binds together. `train` is SEEN_ONLY, the others ALL_CLASSES.
struct ProblemData {
  ClassVocabulary vocabulary;
  SemanticMatrix semantics;
  Dataset train;
  Dataset val;
  Dataset test;
};

enum class Split { Train, Val, Test };

const char* split_name(Split split);
Split parse_split(const std::string& name);
const Dataset& split_of(const ProblemData& data, Split split);

struct LoadOptions {
  // Samples without any positive label ("No Finding") are kept by default.
  bool keep_unlabeled_train = true;
};

ProblemData load_manifest(const std::filesystem::path& manifest, const LoadOptions& options = {});

/// Writes manifest.json plus CSV files into `dir` and returns the manifest path.
std::filesystem::path save_manifest(const std::filesystem::path& dir, const ProblemData& data);

}  // namespace gzsl
