// Shared fixtures and independent oracles for the unit and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emorf/common.hpp"
#include "emorf/corpus.hpp"
#include "emorf/features.hpp"
#include "emorf/synthgen.hpp"

namespace emorf::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ ++counter);
    path_ = std::filesystem::temp_directory_path() / ("emorf_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// --- Classification fixtures -------------------------------------------------------------

struct Dataset {
  std::vector<double> x;  // row-major
  std::vector<int> y;
  std::size_t cols = 0;
  std::size_t rows() const { return y.size(); }
};

/// K unit-variance Gaussian blobs. Class c is shifted by `sep` on the
/// informative features f with f % K == c - 1; the rest are pure noise.
inline Dataset blobs(std::size_t per_class, int k, std::size_t features, std::size_t informative, double sep,
                     std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.cols = features;
  for (int c = 1; c <= k; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t f = 0; f < features; ++f) {
        const bool raised = f < informative && f % static_cast<std::size_t>(k) == static_cast<std::size_t>(c - 1);
        d.x.push_back((raised ? sep : 0.0) + rng.normal());
      }
      d.y.push_back(c);
    }
  }
  return d;
}

/// Binary mixture: class 1 ~ N(0, I), class 2 ~ N(shift, I), in proportion
/// (1 - minority_share) : minority_share.
inline Dataset imbalanced(std::size_t n, double minority_share, std::size_t features, double shift,
                          std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.cols = features;
  const auto n_min = static_cast<std::size_t>(std::llround(static_cast<double>(n) * minority_share));
  for (std::size_t i = 0; i < n; ++i) {
    const int c = i < n - n_min ? 1 : 2;
    for (std::size_t f = 0; f < features; ++f) d.x.push_back((c == 2 ? shift : 0.0) + rng.normal());
    d.y.push_back(c);
  }
  return d;
}

/// Tiny random problem (n <= 12, F <= 3, K <= 4) on a coarse value grid.
inline Dataset micro_dataset(Rng& rng) {
  Dataset d;
  const std::size_t n = 2 + rng.below(11);
  d.cols = 1 + rng.below(3);
  const int k = 2 + static_cast<int>(rng.below(3));
  // A small value grid forces duplicated coordinates and tied splits.
  const std::uint64_t grid = 2 + rng.below(6);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d.cols; ++f) d.x.push_back(static_cast<double>(rng.below(grid)) * 0.5);
    d.y.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
  }
  return d;
}

// --- Exhaustive CART oracle -----------------------------------------------------------------

/// Grows a single unpruned CART tree by trying every feature and every midpoint
/// threshold at every node, comparing weighted child impurity as exact
/// fractions. Ties go to the lower feature, then the lower threshold.
class BruteForceCart {
 public:
  BruteForceCart(const Dataset& d) : d_(d) {
    std::vector<std::size_t> all(d.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    predictions_.assign(d.rows(), 0);
    grow(all);
  }
  const std::vector<int>& training_predictions() const { return predictions_; }

 private:
  struct Fraction {
    std::int64_t num;
    std::int64_t den;
  };

  // Weighted impurity nL*G(L) + nR*G(R) over the common denominator nL*nR.
  Fraction weighted_impurity(const std::vector<std::size_t>& left, const std::vector<std::size_t>& right) const {
    auto sum_sq = [&](const std::vector<std::size_t>& idx) {
      std::vector<std::int64_t> counts(16, 0);
      for (auto i : idx) ++counts[static_cast<std::size_t>(d_.y[i])];
      std::int64_t s = 0;
      for (auto c : counts) s += c * c;
      return s;
    };
    const auto nl = static_cast<std::int64_t>(left.size());
    const auto nr = static_cast<std::int64_t>(right.size());
    return {nl * nl * nr - nr * sum_sq(left) + nr * nr * nl - nl * sum_sq(right), nl * nr};
  }

  static int majority(const std::vector<int>& labels) {
    std::vector<int> counts(16, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  void grow(const std::vector<std::size_t>& idx) {
    std::vector<int> labels;
    for (auto i : idx) labels.push_back(d_.y[i]);
    const bool pure = std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels.front(); });

    std::optional<Fraction> best;
    std::vector<std::size_t> best_left, best_right;
    if (!pure) {
      for (std::size_t f = 0; f < d_.cols; ++f) {
        std::vector<double> values;
        for (auto i : idx) values.push_back(d_.x[i * d_.cols + f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
          // Any cut strictly between consecutive distinct values gives the same partition.
          std::vector<std::size_t> left, right;
          for (auto i : idx) (d_.x[i * d_.cols + f] <= values[v] ? left : right).push_back(i);
          const auto q = weighted_impurity(left, right);
          if (!best || static_cast<__int128>(q.num) * best->den < static_cast<__int128>(best->num) * q.den) {
            best = q;
            best_left = std::move(left);
            best_right = std::move(right);
          }
        }
      }
    }
    if (!best) {
      const int label = majority(labels);
      for (auto i : idx) predictions_[i] = label;
      return;
    }
    grow(best_left);
    grow(best_right);
  }

  const Dataset& d_;
  std::vector<int> predictions_;
};

// --- Spectral oracle ---------------------------------------------------------------------------

/// One-sided power spectrum by direct O(N^2) DFT, normalized to sum to the mean square.
inline std::vector<double> direct_dft_power(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> p(n / 2 + 1, 0.0);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::polar(1.0, ang);
    }
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    p[k] = std::norm(acc) / static_cast<double>(n * n) * (edge ? 1.0 : 2.0);
  }
  return p;
}

// --- Synthetic corpora ----------------------------------------------------------------------

/// Planted-tone dataset: EEG01 carries a 10 Hz tone whose amplitude encodes the
/// trial class under `mode`; every channel gets white noise of `sigma`.
inline synth::DatasetPlan planted_plan(labels::LabelMode mode, std::size_t n_subjects, double sigma, double margin,
                                       std::uint64_t seed) {
  synth::DatasetPlan plan;
  plan.recipe = synth::silent_recipe();
  plan.recipe.seed = seed;
  plan.recipe.noise_sigma = sigma;
  synth::PlantRule rule;
  rule.mode = mode;
  rule.channel = 0;
  rule.base_amplitude = 1.0;
  rule.step = margin * sigma;
  plan.plant = rule;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    plan.subject_ids.push_back("s" + std::to_string(s + 1));
    plan.classes.push_back(synth::alternating_classes(mode));
  }
  return plan;
}

/// Extracts and concatenates the feature matrices of every generated subject.
inline features::FeatureMatrix extract_dataset(const synth::GeneratedDataset& ds) {
  std::vector<features::FeatureMatrix> parts;
  for (const auto& rec : ds.subjects) parts.push_back(features::extract_all(rec));
  return features::FeatureMatrix::concat(parts);
}

}  // namespace emorf::testing
