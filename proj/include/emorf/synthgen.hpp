#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "emorf/corpus.hpp"
#include "emorf/labels.hpp"

namespace emorf::synth {

struct Tone {
  double freq = 0.0;  // Hz
  double amplitude = 0.0;
  double phase = 0.0;  // rad
};

struct ToneMix {
  std::vector<Tone> tones;
  double offset = 0.0;
};

/// Raised-cosine pulses of `width` seconds centered at each beat time.
struct BvpSchedule {
  std::vector<double> beat_times;
  double width = 0.25;
  double amplitude = 1.0;
  double baseline = 0.0;

  /// Beats from `start` with RR intervals cycling through `rr` until `duration`.
  static BvpSchedule cyclic(std::span<const double> rr, double start, double duration);
};

struct Startle {
  double onset = 0.0;  // s
  double rise = 0.0;   // s
  double amplitude = 0.0;
};

/// Linear rise, a flat hold, then exponential recovery to the baseline.
struct StartleTrace {
  double baseline = 0.0;
  std::vector<Startle> startles;
  double hold = 1.0;          // s
  double recovery_tau = 4.0;  // s
};

struct ConstantLevel {
  double value = 0.0;
};

using ChannelRecipe = std::variant<ToneMix, BvpSchedule, StartleTrace, ConstantLevel>;

struct SynthRecipe {
  std::array<ChannelRecipe, corpus::kChannels> channels;
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;  // white Gaussian, added to every channel
};

/// Recipe with every channel at a constant zero.
SynthRecipe silent_recipe();

/// Samples one channel over `n` samples. `rng_seed` drives the noise only.
std::vector<double> render(const ChannelRecipe& recipe, std::size_t n, double fs, double noise_sigma,
                           std::uint64_t rng_seed);

/// Class-dependent tone amplitude on one channel:
/// amplitude = base_amplitude + step * (class - 1).
struct PlantRule {
  labels::LabelMode mode = labels::LabelMode::kValence;
  std::size_t channel = 0;
  double tone_hz = 10.0;
  double base_amplitude = 1.0;
  double step = 1.0;

  double amplitude_for(int class_id) const { return base_amplitude + step * (class_id - 1); }
};

/// Throws input_error when the amplitude step is below 4 sigma of the noise.
void validate_plant(const PlantRule& rule, double noise_sigma);

/// Ratings whose label under `mode` is `class_id` (Low = 2.5, High = 7.5, others 5.0).
corpus::TrialRatings ratings_for_class(labels::LabelMode mode, int class_id);

/// Ratings for a sequence of planted trial classes.
std::vector<corpus::TrialRatings> plant_labels(const PlantRule& rule, std::span<const int> trial_classes,
                                               double noise_sigma);

struct DatasetPlan {
  SynthRecipe recipe;
  std::optional<PlantRule> plant;
  std::vector<std::string> subject_ids;
  /// Planted class per [subject][trial]; empty means every trial gets class 1
  /// and mid-scale ratings.
  std::vector<std::vector<int>> classes;
};

struct GeneratedDataset {
  std::vector<corpus::SubjectRecord> subjects;
  nlohmann::json ground_truth;
};

/// Deterministic under (plan, recipe seed); parallel over subjects.
GeneratedDataset generate(const DatasetPlan& plan, unsigned workers = 1);

/// Classes alternating 1, 2, ..., K, 1, ... over the 40 trials, rotated by `shift`.
std::vector<int> alternating_classes(labels::LabelMode mode, std::size_t shift = 0);

/// recipe.json <-> DatasetPlan.
DatasetPlan plan_from_json(const nlohmann::json& j);
nlohmann::json recipe_to_json(const SynthRecipe& r);

}  // namespace emorf::synth
