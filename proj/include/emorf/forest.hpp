#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace emorf::forest {

/// Non-owning row-major view of an n x F feature table.
class MatrixView {
 public:
  MatrixView() = default;
  MatrixView(std::span<const double> values, std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t r, std::size_t f) const { return values_[r * cols_ + f]; }
  std::span<const double> row(std::size_t r) const { return values_.subspan(r * cols_, cols_); }

 private:
  std::span<const double> values_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t mtry = 19;
  std::size_t min_node_size = 1;
  /// Per-class bootstrap counts keyed by class id; absent means n draws over all rows.
  std::optional<std::map<int, std::size_t>> sampsize;
  std::uint64_t seed = 1;
  bool bootstrap = true;

  nlohmann::json to_json() const;
  static ForestParams from_json(const nlohmann::json& j);
};

/// Split when feature >= 0 (x[feature] <= threshold goes left), leaf otherwise.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_class = 0;     // class id
  std::size_t count = 0;  // training samples reaching the leaf, with bootstrap multiplicity

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at 0

  int predict(std::span<const double> x) const;
};

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<int> classes);
  static ConfusionMatrix from_counts(std::vector<int> classes, std::vector<std::vector<std::uint64_t>> counts);

  void add(int observed, int estimated, std::uint64_t n = 1);

  const std::vector<int>& classes() const { return classes_; }
  std::uint64_t count(std::size_t observed_idx, std::size_t estimated_idx) const {
    return counts_[observed_idx][estimated_idx];
  }
  std::uint64_t row_sum(std::size_t observed_idx) const;
  std::uint64_t total() const;
  std::uint64_t correct() const;

  /// 1 - diagonal / row sum; 0 for a class with no evaluated samples.
  double class_error(std::size_t observed_idx) const;
  /// Fraction misclassified over all evaluated samples.
  double overall_error() const;

  nlohmann::json to_json() const;

 private:
  std::size_t index_of(int class_id) const;
  std::vector<int> classes_;
  std::vector<std::vector<std::uint64_t>> counts_;
};

class ForestModel {
 public:
  const ForestParams& params() const { return params_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<int>& classes() const { return classes_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_samples() const { return n_samples_; }
  const std::string& registry_version() const { return registry_version_; }
  void set_registry_version(std::string v) { registry_version_ = std::move(v); }

  /// Bootstrap multiplicity of `sample` in tree `tree` (0 = out of bag).
  std::uint32_t inbag(std::size_t tree, std::size_t sample) const { return inbag_[tree * n_samples_ + sample]; }
  bool has_inbag() const { return !inbag_.empty(); }
  /// Total Gini decrease per feature summed over trees.
  const std::vector<double>& importance_sum() const { return importance_; }

  int predict(std::span<const double> x) const;
  std::vector<int> predict_batch(const MatrixView& x, unsigned workers = 1) const;
  /// Votes per class (in classes() order) of the given trees.
  std::vector<std::size_t> votes(std::span<const double> x) const;

  nlohmann::json to_json() const;
  std::string to_json_string() const;
  static ForestModel from_json(const nlohmann::json& j);

 private:
  friend ForestModel fit(const MatrixView&, std::span<const int>, const ForestParams&, unsigned);

  ForestParams params_;
  std::vector<Tree> trees_;
  std::vector<int> classes_;
  std::size_t n_features_ = 0;
  std::size_t n_samples_ = 0;
  std::string registry_version_;
  std::vector<std::uint32_t> inbag_;
  std::vector<double> importance_;
};

/// 1 - sum (n_c / n)^2. Throws std::invalid_argument on an empty node.
double gini_impurity(std::span<const std::size_t> class_counts);

/// Grows params.n_trees CART trees in parallel; the result does not depend
/// on `workers`.
ForestModel fit(const MatrixView& x, std::span<const int> y, const ForestParams& params, unsigned workers = 1);

/// Caps every class at ratio x (smallest class count).
std::map<int, std::size_t> stratified_sampsize(const std::map<int, std::size_t>& class_counts, double ratio = 6.0);

std::map<int, std::size_t> class_counts(std::span<const int> y);

struct OobReport {
  double overall_error = 0.0;
  std::vector<double> class_errors;
  ConfusionMatrix confusion;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // samples that were in-bag for every tree

  nlohmann::json to_json() const;
};

/// Vote-aggregated out-of-bag evaluation on the training data of `model`.
OobReport oob_report(const ForestModel& model, const MatrixView& x, std::span<const int> y);

/// Derived statistics of an existing confusion matrix (no model involved).
OobReport report_from_confusion(const ConfusionMatrix& cm);

struct ImportanceEntry {
  std::size_t feature = 0;
  std::string name;
  double importance = 0.0;
};

/// Mean Gini decrease per tree, sorted descending (ties by feature index).
std::vector<ImportanceEntry> gini_importance(const ForestModel& model, std::span<const std::string> names = {});

// --- Generic classifier contract used by the evaluation harness ----------------

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const MatrixView& x, std::span<const int> y) = 0;
  virtual std::vector<int> predict(const MatrixView& x) const = 0;
};

class ForestClassifier final : public Classifier {
 public:
  /// With balance_ratio set, sampsize is derived per fit from the training labels.
  explicit ForestClassifier(ForestParams params, std::optional<double> balance_ratio = std::nullopt,
                            unsigned workers = 1);
  void fit(const MatrixView& x, std::span<const int> y) override;
  std::vector<int> predict(const MatrixView& x) const override;
  const ForestModel& model() const { return *model_; }

 private:
  ForestParams params_;
  std::optional<double> balance_ratio_;
  unsigned workers_;
  std::optional<ForestModel> model_;
};

/// Always predicts one class; fit picks the most frequent label (ties to the lowest id).
class ConstantClassifier final : public Classifier {
 public:
  ConstantClassifier() = default;
  explicit ConstantClassifier(int label) : label_(label) {}
  void fit(const MatrixView& x, std::span<const int> y) override;
  std::vector<int> predict(const MatrixView& x) const override;
  int label() const { return label_; }

 private:
  int label_ = 1;
};

}  // namespace emorf::forest
