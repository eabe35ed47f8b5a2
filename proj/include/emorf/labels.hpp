#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emorf/corpus.hpp"

namespace emorf::labels {

enum class LabelMode { kValence, kArousal, kQuad, kOct };

inline constexpr float kThreshold = 4.5f;

enum class Level { kLow, kHigh };

int class_count(LabelMode mode);
std::string_view to_string(LabelMode mode);
/// Accepts valence | arousal | quad | oct.
std::optional<LabelMode> parse_mode(std::string_view s);

/// rating < 4.5 is Low, otherwise High. Throws std::out_of_range outside [1,9].
Level binarize(float rating, float threshold = kThreshold);

/// Binary modes map L -> 1, H -> 2.
int binary_class(float rating);
/// (valence, arousal): (L,L)=1, (L,H)=2, (H,L)=3, (H,H)=4.
int quad_class(float valence, float arousal);
/// Lexicographic over (valence, arousal, dominance) with L before H.
int oct_class(float valence, float arousal, float dominance);

/// Class id (1-based) of one trial's ratings under `mode`.
int label_of(const corpus::TrialRatings& r, LabelMode mode);
std::vector<int> label_all(const std::vector<corpus::TrialRatings>& ratings, LabelMode mode);

}  // namespace emorf::labels
