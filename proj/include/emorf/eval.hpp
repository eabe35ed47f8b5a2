#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emorf/features.hpp"
#include "emorf/forest.hpp"
#include "emorf/labels.hpp"

namespace emorf::eval {

// --- Statistics ----------------------------------------------------------------

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // sample std, 0 for a single value
  double min = 0.0;
  double max = 0.0;

  nlohmann::json to_json() const;
};

/// Throws std::invalid_argument on empty input.
Summary summarize(std::span<const double> values);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Ten bins [0,10), ..., [90,100]; edge values go to the upper bin and 100 to
/// the top bin. Values outside [0,100] throw.
std::vector<HistogramBin> histogram(std::span<const double> percentages);
std::string histogram_csv(std::span<const HistogramBin> bins);

/// Sample Pearson correlation; throws degenerate_error when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// --- Subject similarity ------------------------------------------------------------

struct NeighborGraph {
  std::vector<std::string> subjects;
  std::vector<std::vector<double>> rho;  // NaN where undefined
  double threshold = 0.0;
  std::vector<std::vector<std::size_t>> adjacency;  // sorted, symmetric
  std::vector<std::pair<std::size_t, std::size_t>> fallback_edges;

  nlohmann::json to_json() const;
};

/// Edge (i, j) iff rho_ij > threshold; a subject left without neighbours is
/// linked to its highest-rho partner (ties to the lower index).
NeighborGraph build_neighbor_graph(const std::vector<std::vector<double>>& ratings, double rho_threshold,
                                   std::vector<std::string> subjects = {});

/// Per-subject rating vectors of one dimension, in subject order of the matrix.
std::vector<std::vector<double>> subject_rating_vectors(const features::FeatureMatrix& m, corpus::Rating dim);

// --- Folds ---------------------------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle into k folds whose sizes differ by at most one (the first n % k are larger).
std::vector<Fold> kfold_folds(std::size_t n, std::size_t k, std::uint64_t seed);
/// One fold per trial of a single-subject matrix.
std::vector<Fold> loto_folds(const features::FeatureMatrix& m);
/// One fold per subject.
std::vector<Fold> loso_folds(const features::FeatureMatrix& m);

// --- Reports ----------------------------------------------------------------------------

using ClassifierFactory = std::function<std::unique_ptr<forest::Classifier>(std::uint64_t seed)>;

struct FoldResult {
  std::size_t index = 0;
  std::string label;  // e.g. subject id or trial number
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double error = 0.0;      // % misclassified test rows
  double error_std = 0.0;  // sample std (%) of the per-row 0/100 error indicators
  bool single_class = false;
  std::optional<double> truncated_error;  // % of videos wrong after truncation
};

struct VideoVerdict {
  std::string subject;
  std::size_t trial = 0;
  int predicted = 0;
  int actual = 0;
};

struct TruncationReport {
  std::vector<VideoVerdict> verdicts;
  double error = 0.0;  // %
  double accuracy = 0.0;

  nlohmann::json to_json() const;
};

struct SubjectResult {
  std::string subject;
  double window_error = 0.0;
  std::optional<double> truncated_error;
  Summary fold_errors;
};

struct CvReport {
  std::string protocol;
  std::vector<FoldResult> folds;
  Summary fold_error_summary;      // over per-fold error means
  Summary fold_std_summary;        // over per-fold error stds
  std::vector<SubjectResult> subjects;
  forest::ConfusionMatrix confusion;
  std::vector<std::size_t> flagged_folds;

  nlohmann::json to_json() const;
};

/// Majority vote over one video's window predictions; ties go to the lowest class id.
int truncate_votes(std::span<const int> predictions);

/// Per-row majority vote across several predictors' outputs; ties to the lowest id.
std::vector<int> majority_vote(const std::vector<std::vector<int>>& predictions);

struct RunOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;  // folds run in parallel
};

/// k-fold CV over all rows.
CvReport kfold_cv(const forest::MatrixView& x, std::span<const int> y, std::size_t k, const ClassifierFactory& make,
                  const RunOptions& opts);

struct LotoResult {
  CvReport cv;
  TruncationReport truncation;
};

/// Leave-one-trial-out on one subject's rows (40 folds of 2457/63 rows).
LotoResult loto_cv(const features::FeatureMatrix& subject, labels::LabelMode mode, const ClassifierFactory& make,
                   const RunOptions& opts);

enum class LosoScope { kAll, kNeighbors, kNeighborsPooled };

struct LosoResult {
  CvReport cv;
  TruncationReport truncation;
};

/// Leave-one-subject-out. kAll trains on every other subject; kNeighbors lets
/// each neighbour's personalized model vote per row; kNeighborsPooled trains
/// one model on the neighbours' pooled rows.
LosoResult loso_cv(const features::FeatureMatrix& all, labels::LabelMode mode, const ClassifierFactory& make,
                   LosoScope scope, const NeighborGraph* graph, const RunOptions& opts);

/// Copies the given rows into a contiguous buffer.
std::vector<double> gather_rows(const features::FeatureMatrix& m, std::span<const std::size_t> rows);

}  // namespace emorf::eval
