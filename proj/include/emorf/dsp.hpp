#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emorf::dsp {

/// One-sided power spectrum of a real signal, normalized so that the bins
/// sum to the signal's mean square. Bin k sits at k * delta_f.
struct Spectrum {
  std::vector<double> bins;
  double delta_f = 0.0;
  double fs = 0.0;

  double frequency(std::size_t k) const { return static_cast<double>(k) * delta_f; }
  double total() const;
};

/// Frequency band lo < f <= hi. With dc_inclusive the band also takes f = 0
/// (only meaningful for lo = 0).
struct Band {
  double lo = 0.0;
  double hi = 0.0;
  bool dc_inclusive = false;

  bool contains(double f) const { return (f > lo && f <= hi) || (dc_inclusive && f == 0.0 && lo == 0.0); }
};

/// EEG bands on half-integer edges so that every integer-Hz bin lands in
/// exactly one band.
namespace eeg_bands {
inline constexpr Band kDelta{0.5, 3.5};
inline constexpr Band kTheta{3.5, 7.5};
inline constexpr Band kAlpha{7.5, 13.5};
inline constexpr Band kBeta{13.5, 30.5};
inline constexpr Band kGamma{30.5, 50.5};
inline constexpr Band kAll[] = {kDelta, kTheta, kAlpha, kBeta, kGamma};
}  // namespace eeg_bands

namespace hrv_bands {
inline constexpr Band kUlf{0.0, 0.04, true};
inline constexpr Band kLf{0.04, 0.15};
inline constexpr Band kHf{0.15, 0.4};
inline constexpr Band kUhf{0.4, 2.0};
inline constexpr Band kAll[] = {kUlf, kLf, kHf, kUhf};
}  // namespace hrv_bands

/// Rectangular-window single-segment periodogram.
Spectrum periodogram(std::span<const double> x, double fs);
Spectrum periodogram(std::span<const float> x, double fs);

double band_power(const Spectrum& s, const Band& b);

/// Power-weighted mean frequency. Throws degenerate_error on an all-zero spectrum.
double spectral_centroid(const Spectrum& s);

/// Frequency of the largest non-DC bin; ties go to the lowest bin, so an
/// all-zero spectrum yields delta_f.
double peak_frequency_excl_dc(const Spectrum& s);

struct WindowStats {
  double mean = 0.0;
  double std = 0.0;  // sample std (N-1); 0 for N = 1
  double min = 0.0;
  double max = 0.0;
  double ssi = 0.0;  // sum of squares
};

WindowStats window_stats(std::span<const double> x);
WindowStats window_stats(std::span<const float> x);

/// d[n] = (x[n+1] - x[n]) * fs.
std::vector<double> first_derivative(std::span<const double> x, double fs);
std::vector<double> first_derivative(std::span<const float> x, double fs);

/// Centered moving average over `width` samples (odd widths center exactly);
/// near the edges the average runs over the available samples.
std::vector<double> moving_average(std::span<const double> x, std::size_t width);

struct PeakList {
  std::vector<std::size_t> indices;
  std::vector<double> times;
};

/// Prominence of the local maximum at `peak`: its height above the higher of
/// the two minima found walking outward until a strictly higher sample or
/// the signal edge.
double peak_prominence(std::span<const double> x, std::size_t peak);

/// Local maxima with prominence >= min_prominence, then greedy suppression in
/// decreasing height so that kept peaks are at least min_distance seconds apart.
PeakList detect_peaks(std::span<const double> x, double fs, double min_distance, double min_prominence);

/// Sub-sample location of a local maximum by a parabola through the three
/// samples around it. Returns `peak` unchanged at the edges.
double refine_peak(std::span<const double> x, std::size_t peak);

/// Zero-order hold of event values onto a uniform grid of round(duration*fs)
/// samples; samples before the first event take the first value.
std::vector<double> zoh_interpolate(std::span<const double> event_times, std::span<const double> values, double fs,
                                    double duration);

struct StartleEvent {
  double onset_time = 0.0;
  double peak_time = 0.0;
  double rise_time = 0.0;
  double amplitude = 0.0;
};

struct StartleParams {
  double smooth_window = 0.5;  // s
  double k_sigma = 2.0;
};

/// Derivative-threshold startle detector on a full-trial GSR trace.
std::vector<StartleEvent> detect_startles(std::span<const double> gsr, double fs, const StartleParams& params = {});

}  // namespace emorf::dsp
