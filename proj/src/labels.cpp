#include "emorf/labels.hpp"

#include <cmath>
#include <stdexcept>

namespace emorf::labels {

int class_count(LabelMode mode) {
  switch (mode) {
    case LabelMode::kValence:
    case LabelMode::kArousal:
      return 2;
    case LabelMode::kQuad:
      return 4;
    case LabelMode::kOct:
      return 8;
  }
  return 0;
}

std::string_view to_string(LabelMode mode) {
  switch (mode) {
    case LabelMode::kValence:
      return "valence";
    case LabelMode::kArousal:
      return "arousal";
    case LabelMode::kQuad:
      return "quad";
    case LabelMode::kOct:
      return "oct";
  }
  return "?";
}

std::optional<LabelMode> parse_mode(std::string_view s) {
  for (auto m : {LabelMode::kValence, LabelMode::kArousal, LabelMode::kQuad, LabelMode::kOct}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

Level binarize(float rating, float threshold) {
  if (!std::isfinite(rating) || rating < 1.0f || rating > 9.0f) {
    throw std::out_of_range("rating " + std::to_string(rating) + " outside [1,9]");
  }
  return rating < threshold ? Level::kLow : Level::kHigh;
}

namespace {
int bit(float rating) { return binarize(rating) == Level::kHigh ? 1 : 0; }
}  // namespace

int binary_class(float rating) { return 1 + bit(rating); }

int quad_class(float valence, float arousal) { return 1 + 2 * bit(valence) + bit(arousal); }

int oct_class(float valence, float arousal, float dominance) {
  return 1 + 4 * bit(valence) + 2 * bit(arousal) + bit(dominance);
}

int label_of(const corpus::TrialRatings& r, LabelMode mode) {
  switch (mode) {
    case LabelMode::kValence:
      return binary_class(r[0]);
    case LabelMode::kArousal:
      return binary_class(r[1]);
    case LabelMode::kQuad:
      return quad_class(r[0], r[1]);
    case LabelMode::kOct:
      return oct_class(r[0], r[1], r[2]);
  }
  throw std::invalid_argument("unknown label mode");
}

std::vector<int> label_all(const std::vector<corpus::TrialRatings>& ratings, LabelMode mode) {
  std::vector<int> out;
  out.reserve(ratings.size());
  for (const auto& r : ratings) out.push_back(label_of(r, mode));
  return out;
}

}  // namespace emorf::labels
