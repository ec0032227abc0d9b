#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "gzsl_align/errors.hpp"
#include "gzsl_align/synthbench.hpp"
#include "gzsl_align/vocab_data.hpp"
#include "test_util.hpp"

using namespace gzsl;

namespace {

ClassVocabulary small_vocab() { return ClassVocabulary({"a", "b", "c", "d"}, {true, false, true, false}); }

Dataset all_classes(std::vector<std::vector<int>> labels, std::size_t v = 2) {
  Dataset ds;
  ds.label_space = LabelSpace::AllClasses;
  ds.label_width = labels.front().size();
  ds.feature_dim = v;
  for (auto& y : labels) ds.samples.push_back({Vector::Ones(static_cast<Eigen::Index>(v)), y});
  return ds;
}

}  // namespace

TEST(Vocabulary, PartitionsIds) {
  const auto vocab = small_vocab();
  EXPECT_EQ(vocab.num_classes(), 4u);
  EXPECT_EQ(vocab.num_seen(), 2u);
  EXPECT_EQ(std::vector<std::size_t>(vocab.seen_ids().begin(), vocab.seen_ids().end()),
            (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(std::vector<std::size_t>(vocab.unseen_ids().begin(), vocab.unseen_ids().end()),
            (std::vector<std::size_t>{1, 3}));
}

TEST(Vocabulary, RejectsBadNames) {
  EXPECT_THROW(ClassVocabulary({"a", "a", "b"}, {true, true, false}), DataError);
  EXPECT_THROW(ClassVocabulary({"a", "", "b"}, {true, true, false}), DataError);
  EXPECT_THROW(ClassVocabulary({"a", "b"}, {true, false}), DataError);  // S < 2
  EXPECT_THROW(ClassVocabulary({"a", "b"}, {true}), DataError);
}

TEST(SemanticMatrix, RejectsDegenerateRows) {
  Matrix m(2, 2);
  m << 1, 0, 0, 0;
  EXPECT_THROW(SemanticMatrix{m}, DataError);
  m << 1, 0, std::numeric_limits<double>::quiet_NaN(), 1;
  EXPECT_THROW(SemanticMatrix{m}, DataError);
}

TEST(ValidateDataset, WellFormedIsEmpty) {
  EXPECT_TRUE(validate_dataset(all_classes({{1, 0, 0, 1}, {0, 0, 0, 0}})).empty());
}

TEST(ValidateDataset, NonBinaryLabel) {
  const auto violations = validate_dataset(all_classes({{1, 0, 0, 1}, {0, 2, 0, 0}}));
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_EQ(violations[0].sample_index, 1u);
  EXPECT_NE(violations[0].reason.find("non-binary label"), std::string::npos);
}

TEST(ValidateDataset, NanFeatureNamesComponent) {
  auto ds = all_classes({{1, 0, 0, 0}, {0, 1, 0, 0}}, 3);
  ds.samples[0].features[2] = std::numeric_limits<double>::quiet_NaN();
  const auto violations = validate_dataset(ds);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_EQ(violations[0].sample_index, 0u);
  EXPECT_NE(violations[0].reason.find("component 2"), std::string::npos);
}

TEST(AveragePositiveSemantics, SinglePositiveIsRow) {
  Matrix w(3, 2);
  w << 0.3, -1.7, 2.0, 0.25, -4.0, 8.5;
  const SemanticMatrix sm(w);
  const std::vector<int> y{0, 1, 0};
  EXPECT_EQ(average_positive_semantics(y, sm), sm.row(1));
}

TEST(AveragePositiveSemantics, OppositeRowsCancel) {
  Matrix w(2, 3);
  w << 1.5, -2.0, 0.5, -1.5, 2.0, -0.5;
  const std::vector<int> y{1, 1};
  EXPECT_EQ(average_positive_semantics(y, SemanticMatrix(w)), Vector::Zero(3));
}

TEST(AveragePositiveSemantics, HandMean) {
  Matrix w(2, 2);
  w << 1, 0, 0, 1;
  const std::vector<int> y{1, 1};
  const Vector got = average_positive_semantics(y, SemanticMatrix(w));
  EXPECT_DOUBLE_EQ(got[0], 0.5);
  EXPECT_DOUBLE_EQ(got[1], 0.5);
}

TEST(AveragePositiveSemantics, NoPositivesThrows) {
  Matrix w(2, 2);
  w << 1, 0, 0, 1;
  const std::vector<int> y{0, 0};
  EXPECT_THROW(average_positive_semantics(y, SemanticMatrix(w)), NoPositiveLabels);
}

TEST(LabelSpaces, SeenOnlyConversions) {
  const auto vocab = small_vocab();
  const Dataset ds = all_classes({{1, 0, 0, 0}, {0, 0, 1, 0}});
  const Dataset seen = to_seen_only(ds, vocab);
  EXPECT_EQ(seen.label_space, LabelSpace::SeenOnly);
  EXPECT_EQ(seen.samples[1].labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(expand_to_all(seen, vocab), ds);
}

TEST(LabelSpaces, UnseenPositiveIsInductiveViolation) {
  const auto vocab = small_vocab();
  const Dataset ds = all_classes({{1, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 1, 1}});
  try {
    to_seen_only(ds, vocab);
    FAIL() << "expected InductiveViolation";
  } catch (const InductiveViolation& e) {
    EXPECT_EQ(e.sample_index(), 2u);
    EXPECT_NE(std::string(e.what()).find("'d'"), std::string::npos);
  }
  EXPECT_EQ(project_to_seen(ds, vocab).samples[2].labels, (std::vector<int>{0, 1}));
}

TEST(Manifest, FourteenClassesTenSeen) {
  TempDir dir("manifest14");
  SynthSpec spec;
  spec.n_train = 20;
  spec.n_val = 10;
  spec.n_test = 10;
  const auto path = save_manifest(dir.path(), generate(spec).data);
  const ProblemData data = load_manifest(path);
  EXPECT_EQ(data.vocabulary.num_classes(), 14u);
  EXPECT_EQ(data.vocabulary.num_seen(), 10u);
  EXPECT_EQ(data.vocabulary.num_unseen(), 4u);
}

TEST(Manifest, RoundTripIsByteIdentical) {
  TempDir a("rt_a"), b("rt_b");
  SynthSpec spec;
  spec.num_classes = 3;
  spec.num_seen = 2;
  spec.semantic_dim = 16;
  spec.max_labels_per_sample = 2;
  spec.unseen_mix = 2;
  spec.n_train = spec.n_val = spec.n_test = 5;
  const ProblemData original = generate(spec).data;
  save_manifest(a.path(), original);
  const ProblemData loaded = load_manifest(a / "manifest.json");
  EXPECT_EQ(loaded.vocabulary, original.vocabulary);
  EXPECT_EQ(loaded.semantics, original.semantics);
  EXPECT_EQ(loaded.train, original.train);
  EXPECT_EQ(loaded.val, original.val);
  EXPECT_EQ(loaded.test, original.test);
  save_manifest(b.path(), loaded);
  for (const char* f : {"manifest.json", "embeddings.csv", "train_features.csv", "train_labels.csv",
                        "val_features.csv", "val_labels.csv", "test_features.csv", "test_labels.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

class ManifestErrors : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthSpec spec;
    spec.n_train = 6;
    spec.n_val = 4;
    spec.n_test = 4;
    save_manifest(dir_.path(), generate(spec).data);
  }
  std::string error_of() {
    try {
      load_manifest(dir_ / "manifest.json");
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "";
  }
  TempDir dir_{"manifest_err"};
};

TEST_F(ManifestErrors, UnseenTrainingLabelNamesSample) {
  // Class 12 is unseen; put a positive on training sample 3.
  std::string labels = slurp(dir_ / "train_labels.csv");
  std::size_t pos = 0;
  for (int line = 0; line < 3; ++line) pos = labels.find('\n', pos) + 1;
  labels[pos + 2 * 12] = '1';
  spit(dir_ / "train_labels.csv", labels);
  EXPECT_THROW(load_manifest(dir_ / "manifest.json"), InductiveViolation);
  EXPECT_NE(error_of().find("training sample 3"), std::string::npos) << error_of();
}

TEST_F(ManifestErrors, MissingFile) {
  std::filesystem::remove(dir_ / "val_features.csv");
  EXPECT_NE(error_of().find("val_features.csv"), std::string::npos) << error_of();
}

TEST_F(ManifestErrors, WidthMismatchNamesFileAndRow) {
  std::string f = slurp(dir_ / "test_features.csv");
  f.insert(f.find('\n'), ",1.0");
  spit(dir_ / "test_features.csv", f);
  const std::string msg = error_of();
  EXPECT_NE(msg.find("test_features.csv"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
}

TEST_F(ManifestErrors, NonFiniteValue) {
  std::string f = slurp(dir_ / "embeddings.csv");
  f.replace(0, f.find(','), "nan");
  spit(dir_ / "embeddings.csv", f);
  EXPECT_NE(error_of().find("embeddings.csv"), std::string::npos) << error_of();
}

TEST_F(ManifestErrors, MissingManifest) {
  EXPECT_THROW(load_manifest(dir_ / "nope.json"), ValidationError);
}
