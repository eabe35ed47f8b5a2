#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emorf/corpus.hpp"
#include "emorf/dsp.hpp"

namespace emorf::features {

enum class Group { kEeg, kGsr, kCardiac, kResp, kTemp, kEogEmg };

struct FeatureDescriptor {
  std::string name;
  std::size_t channel = 0;
  Group group = Group::kEeg;
};

inline constexpr std::size_t kEegPerChannel = 9;
inline constexpr std::size_t kGsrCount = 5;
inline constexpr std::size_t kCardiacCount = 19;
inline constexpr std::size_t kRespCount = 8;
inline constexpr std::size_t kTempCount = 3;
inline constexpr std::size_t kEogPerChannel = 6;
inline constexpr std::size_t kEmgPerChannel = 4;
inline constexpr std::size_t kEegCount = kEegPerChannel * corpus::kEegChannels;
inline constexpr std::size_t kEogEmgCount = 2 * kEogPerChannel + 2 * kEmgPerChannel;
inline constexpr std::size_t kFeatureCount =
    kEegCount + kGsrCount + kCardiacCount + kRespCount + kTempCount + kEogEmgCount;

static_assert(kFeatureCount == 343);

/// Canonical ordered feature list. The version stamp changes whenever the
/// names or their order change.
class FeatureRegistry {
 public:
  static const FeatureRegistry& canonical();

  std::size_t size() const { return descriptors_.size(); }
  const FeatureDescriptor& operator[](std::size_t i) const { return descriptors_[i]; }
  const std::vector<FeatureDescriptor>& descriptors() const { return descriptors_; }
  std::vector<std::string> names() const;
  std::size_t group_size(Group g) const;
  /// Column index of a feature name; throws input_error when absent.
  std::size_t index(const std::string& name) const;
  const std::string& version() const { return version_; }

 private:
  FeatureRegistry();
  std::vector<FeatureDescriptor> descriptors_;
  std::string version_;
};

struct RowKey {
  std::uint32_t subject = 0;  // index into FeatureMatrix::subjects
  std::uint16_t trial = 0;
  std::uint16_t window = 0;

  friend bool operator==(const RowKey&, const RowKey&) = default;
};

/// Row-major feature table keyed by (subject, trial, window), carrying the
/// trial's raw ratings on every row.
struct FeatureMatrix {
  std::vector<std::string> subjects;
  std::vector<RowKey> keys;
  std::vector<corpus::TrialRatings> ratings;
  std::vector<double> values;
  std::size_t n_features = kFeatureCount;

  std::size_t rows() const { return keys.size(); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * n_features, n_features);
  }
  std::span<double> row(std::size_t r) { return std::span<double>(values).subspan(r * n_features, n_features); }
  double at(std::size_t r, std::size_t f) const { return values[r * n_features + f]; }

  /// Concatenates matrices of distinct subjects.
  static FeatureMatrix concat(std::span<const FeatureMatrix> parts);
  /// Rows of one subject (by index into `subjects`), re-indexed to subject 0.
  FeatureMatrix subject_rows(std::size_t subject) const;
};

// --- EEG -------------------------------------------------------------------

/// [delta, theta, alpha, beta, gamma, mean, std, ssi, spectral centroid]
std::array<double, kEegPerChannel> extract_eeg(std::span<const float> window, double fs);

// --- GSR -------------------------------------------------------------------

/// [rise mean, rise std, min, max, spectral centroid]. Rise statistics use the
/// startles with onset inside the window when there are at least two; with
/// fewer they fall back to all startles with onset before the window end, and
/// to zero when there are none.
std::array<double, kGsrCount> extract_gsr(std::span<const dsp::StartleEvent> trial_startles,
                                          std::span<const float> trial_gsr, const corpus::Window& window, double fs);

// --- Cardiac ---------------------------------------------------------------

struct CardiacSeries {
  std::vector<double> beat_times;
  std::vector<double> rr;   // s
  std::vector<double> hr;   // bpm
  std::vector<double> hrv;  // s
  std::vector<double> sd;   // s^2
  std::vector<double> ssd;  // s^2, running sum of sd
};

/// Derives RR/HR/HRV/SD/SSD from beat times (at least 3 beats).
CardiacSeries cardiac_series(std::vector<double> beat_times);

inline constexpr double kHrvResampleHz = 4.0;

struct CardiacTracks {
  bool degenerate = true;
  CardiacSeries series;
  // Zero-order-hold tracks over the full trial at the signal rate; event time
  // is the later beat of each interval.
  std::vector<double> rr, hr, hrv, sd, ssd;
  std::vector<double> hrv_4hz;
};

struct BeatDetection {
  double min_distance = 0.35;        // s
  double min_prominence_factor = 0.3;  // times the trial std
};

std::vector<double> detect_beats(std::span<const float> trial_bvp, double fs, const BeatDetection& params = {});

CardiacTracks build_cardiac(std::span<const float> trial_bvp, double fs, const BeatDetection& params = {});
CardiacTracks build_cardiac_from_beats(std::vector<double> beat_times, double fs, double duration);

/// [ULF, LF, HF, UHF] powers of a 4 Hz HRV track.
std::array<double, 4> hrv_band_powers(std::span<const double> hrv_track, double fs = kHrvResampleHz);

/// Percentage of HRV values with |HRV| > 50 ms among those whose interval
/// ends inside [t0, t1).
double pnn50(const CardiacSeries& s, double t0, double t1);

/// [mean,std of RR, HR, HRV, SD, SSD; pNN50; ULF, LF, HF, UHF; BVP mean, std, min, max]
std::array<double, kCardiacCount> extract_cardiac(const CardiacTracks& tracks, const corpus::Window& window,
                                                  const std::array<double, 4>& trial_hrv_bands,
                                                  std::span<const float> trial_bvp);

// --- Respiration, temperature, EOG, EMG --------------------------------------

/// [mean, std, d1 mean, d1 std, ssi, min, max, spectral centroid]
std::array<double, kRespCount> extract_resp(std::span<const float> window, double fs);
/// [mean, std, ssi]
std::array<double, kTempCount> extract_temp(std::span<const float> window);
/// [mean, std, ssi, peak freq excl. DC, d1 mean, d1 std]
std::array<double, kEogPerChannel> extract_eog(std::span<const float> window, double fs);
/// [mean, std, ssi, peak freq excl. DC]
std::array<double, kEmgPerChannel> extract_emg(std::span<const float> window, double fs);

// --- Whole subject -----------------------------------------------------------

struct ExtractOptions {
  dsp::StartleParams startle;
  BeatDetection beats;
  unsigned workers = 1;
};

/// 2520 x 343 matrix for one subject; bit-identical for identical input.
FeatureMatrix extract_all(const corpus::SubjectRecord& record, const ExtractOptions& opts = {});

struct NormalizationStats {
  std::vector<std::string> subjects;
  std::vector<std::vector<double>> mean;  // [subject][feature]
  std::vector<std::vector<double>> std;
};

/// Per-subject z-score of every column; zero-variance columns become 0.
NormalizationStats normalize_per_subject(FeatureMatrix& m);

// --- features.csv ------------------------------------------------------------

std::string features_csv_header();
void write_features_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_features_csv(const std::filesystem::path& path);

}  // namespace emorf::features
