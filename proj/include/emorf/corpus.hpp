#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emorf::corpus {

inline constexpr std::size_t kTrials = 40;
inline constexpr std::size_t kChannels = 40;
inline constexpr std::size_t kSamples = 8064;  // 63 s at 128 Hz, including the 3 s pre-trial segment
inline constexpr double kFs = 128.0;
inline constexpr std::size_t kWindowLength = 128;
inline constexpr std::size_t kWindowsPerTrial = kSamples / kWindowLength;  // 63
inline constexpr std::size_t kRatings = 4;
inline constexpr std::size_t kSignalBytes = kTrials * kChannels * kSamples * sizeof(float);

static_assert(kWindowsPerTrial * kWindowLength == kSamples);

/// Channel order of the preprocessed release: 32 EEG, then peripherals.
enum class Channel : std::size_t {
  kEegFirst = 0,
  kHeog = 32,
  kVeog = 33,
  kZemg = 34,
  kTemg = 35,
  kGsr = 36,
  kResp = 37,
  kBvp = 38,
  kTemp = 39,
};

inline constexpr std::size_t kEegChannels = 32;

constexpr std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }

/// Index <-> descriptor map for the 40 channels.
class ChannelMap {
 public:
  static const ChannelMap& canonical();

  std::string_view name(std::size_t index) const { return names_.at(index); }
  /// Throws input_error for unknown names.
  std::size_t index(std::string_view name) const;
  const std::array<std::string, kChannels>& names() const { return names_; }

 private:
  ChannelMap();
  std::array<std::string, kChannels> names_;
};

enum class Rating : std::size_t { kValence = 0, kArousal = 1, kDominance = 2, kLiking = 3 };

using TrialRatings = std::array<float, kRatings>;

/// One subject: 40 trials x 40 channels x 8064 samples plus 40 x 4 ratings.
/// Immutable after construction; the constructor validates every invariant.
class SubjectRecord {
 public:
  SubjectRecord(std::string subject_id, std::vector<float> signals, std::vector<TrialRatings> ratings);

  const std::string& subject_id() const { return id_; }
  double fs() const { return kFs; }

  std::span<const float> channel(std::size_t trial, std::size_t channel) const;
  std::span<const float> signals() const { return signals_; }
  const std::vector<TrialRatings>& ratings() const { return ratings_; }
  float rating(std::size_t trial, Rating r) const { return ratings_.at(trial)[static_cast<std::size_t>(r)]; }

 private:
  std::string id_;
  std::vector<float> signals_;
  std::vector<TrialRatings> ratings_;
};

/// Half-open sample range of one 1-s window within a trial.
struct Window {
  std::size_t trial_idx = 0;
  std::size_t window_idx = 0;

  std::size_t begin() const { return window_idx * kWindowLength; }
  std::size_t end() const { return begin() + kWindowLength; }
  double begin_time() const { return static_cast<double>(begin()) / kFs; }
  double end_time() const { return static_cast<double>(end()) / kFs; }

  template <typename T>
  std::span<const T> slice(std::span<const T> trial_channel) const {
    return trial_channel.subspan(begin(), kWindowLength);
  }
};

/// The 63 non-overlapping windows tiling one trial.
std::vector<Window> windows_of(std::size_t trial_idx);

struct ManifestEntry {
  std::string id;
  std::string signals;
  std::string labels;
};

struct Manifest {
  double fs = kFs;
  std::vector<std::string> channel_names;
  std::vector<ManifestEntry> subjects;
};

Manifest read_manifest(const std::filesystem::path& manifest_path);

/// Loads every subject listed in the manifest, in manifest order.
std::vector<SubjectRecord> load_dataset(const std::filesystem::path& manifest_path);

SubjectRecord load_subject(const std::string& id, const std::filesystem::path& signals_path,
                           const std::filesystem::path& labels_path);

std::vector<TrialRatings> read_labels_csv(const std::filesystem::path& path);
std::string labels_csv(const std::vector<TrialRatings>& ratings);

/// Writes manifest.json, <id>.f32 and <id>_labels.csv for each record.
void write_dataset(const std::filesystem::path& out_dir, std::span<const SubjectRecord> records);

}  // namespace emorf::corpus
