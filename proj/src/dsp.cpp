#include "emorf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "emorf/common.hpp"

namespace emorf::dsp {

namespace {

template <typename T>
void require_finite(std::span<const T> x, const char* what) {
  for (T v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

template <typename T>
Spectrum periodogram_impl(std::span<const T> x, double fs) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("periodogram: need at least 2 samples");
  require_finite(x, "periodogram");

  thread_local Eigen::FFT<double> fft;
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);

  const std::size_t half = n / 2;
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  Spectrum s;
  s.fs = fs;
  s.delta_f = fs / static_cast<double>(n);
  s.bins.resize(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    const double p = std::norm(out[k]) * scale;
    // Nyquist bin (even n) and DC have no mirror image.
    const bool single = k == 0 || (n % 2 == 0 && k == half);
    s.bins[k] = single ? p : 2.0 * p;
  }
  return s;
}

template <typename T>
WindowStats window_stats_impl(std::span<const T> x) {
  if (x.empty()) throw std::invalid_argument("window_stats: empty input");
  require_finite(x, "window_stats");
  WindowStats st;
  double sum = 0.0;
  double ssi = 0.0;
  st.min = st.max = static_cast<double>(x[0]);
  for (T v : x) {
    const double d = v;
    sum += d;
    ssi += d * d;
    st.min = std::min(st.min, d);
    st.max = std::max(st.max, d);
  }
  const double n = static_cast<double>(x.size());
  st.mean = sum / n;
  st.ssi = ssi;
  if (x.size() > 1) {
    double acc = 0.0;
    for (T v : x) {
      const double d = static_cast<double>(v) - st.mean;
      acc += d * d;
    }
    st.std = std::sqrt(acc / (n - 1.0));
  }
  return st;
}

template <typename T>
std::vector<double> first_derivative_impl(std::span<const T> x, double fs) {
  if (x.size() < 2) throw std::invalid_argument("first_derivative: need at least 2 samples");
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    d[i] = (static_cast<double>(x[i + 1]) - static_cast<double>(x[i])) * fs;
  }
  return d;
}

}  // namespace

double Spectrum::total() const { return std::accumulate(bins.begin(), bins.end(), 0.0); }

Spectrum periodogram(std::span<const double> x, double fs) { return periodogram_impl(x, fs); }
Spectrum periodogram(std::span<const float> x, double fs) { return periodogram_impl(x, fs); }

double band_power(const Spectrum& s, const Band& b) {
  if (!(b.lo >= 0.0 && b.lo < b.hi)) throw std::invalid_argument("band_power: invalid band ordering");
  double p = 0.0;
  for (std::size_t k = 0; k < s.bins.size(); ++k) {
    if (b.contains(s.frequency(k))) p += s.bins[k];
  }
  return p;
}

double spectral_centroid(const Spectrum& s) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < s.bins.size(); ++k) {
    num += s.frequency(k) * s.bins[k];
    den += s.bins[k];
  }
  if (!(den > 0.0)) throw degenerate_error("spectral_centroid: all-zero spectrum");
  return num / den;
}

double peak_frequency_excl_dc(const Spectrum& s) {
  if (s.bins.size() < 2) throw std::invalid_argument("peak_frequency_excl_dc: no non-DC bins");
  std::size_t best = 1;
  for (std::size_t k = 2; k < s.bins.size(); ++k) {
    if (s.bins[k] > s.bins[best]) best = k;
  }
  return s.frequency(best);
}

WindowStats window_stats(std::span<const double> x) { return window_stats_impl(x); }
WindowStats window_stats(std::span<const float> x) { return window_stats_impl(x); }

std::vector<double> first_derivative(std::span<const double> x, double fs) { return first_derivative_impl(x, fs); }
std::vector<double> first_derivative(std::span<const float> x, double fs) { return first_derivative_impl(x, fs); }

std::vector<double> moving_average(std::span<const double> x, std::size_t width) {
  if (width == 0) throw std::invalid_argument("moving_average: zero width");
  const std::size_t n = x.size();
  const std::size_t left = (width - 1) / 2;
  const std::size_t right = width - 1 - left;
  std::vector<double> out(n);
  // Direct sums keep plateaus exactly flat, which the startle detector relies on.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n - 1, i + right);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += x[j];
    out[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double peak_prominence(std::span<const double> x, std::size_t peak) {
  const double h = x[peak];
  double left_min = h;
  for (std::size_t i = peak; i-- > 0;) {
    if (x[i] > h) break;
    left_min = std::min(left_min, x[i]);
  }
  double right_min = h;
  for (std::size_t i = peak + 1; i < x.size(); ++i) {
    if (x[i] > h) break;
    right_min = std::min(right_min, x[i]);
  }
  return h - std::max(left_min, right_min);
}

PeakList detect_peaks(std::span<const double> x, double fs, double min_distance, double min_prominence) {
  PeakList out;
  const std::size_t n = x.size();
  if (n < 3) return out;

  // Local maxima; a flat top is reported at its middle sample.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(x[i - 1] < x[i])) continue;
    std::size_t j = i;
    while (j + 1 < n && x[j + 1] == x[i]) ++j;
    if (j + 1 < n && x[j + 1] < x[i]) candidates.push_back(i + (j - i) / 2);
    i = j;
  }

  std::erase_if(candidates, [&](std::size_t p) { return peak_prominence(x, p) < min_prominence; });

  const auto min_gap = static_cast<std::size_t>(std::ceil(min_distance * fs - 1e-9));
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[candidates[a]] > x[candidates[b]]; });
  std::vector<bool> removed(candidates.size(), false);
  for (std::size_t oi : order) {
    if (removed[oi]) continue;
    const std::size_t p = candidates[oi];
    for (std::size_t k = oi; k-- > 0 && p - candidates[k] < min_gap;) removed[k] = true;
    for (std::size_t k = oi + 1; k < candidates.size() && candidates[k] - p < min_gap; ++k) removed[k] = true;
  }
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (removed[k]) continue;
    out.indices.push_back(candidates[k]);
    out.times.push_back(static_cast<double>(candidates[k]) / fs);
  }
  return out;
}

double refine_peak(std::span<const double> x, std::size_t peak) {
  if (peak == 0 || peak + 1 >= x.size()) return static_cast<double>(peak);
  const double a = x[peak - 1];
  const double b = x[peak];
  const double c = x[peak + 1];
  const double denom = a - 2.0 * b + c;
  if (!(denom < 0.0)) return static_cast<double>(peak);
  const double offset = 0.5 * (a - c) / denom;
  return static_cast<double>(peak) + std::clamp(offset, -0.5, 0.5);
}

std::vector<double> zoh_interpolate(std::span<const double> event_times, std::span<const double> values, double fs,
                                    double duration) {
  if (event_times.empty()) throw std::invalid_argument("zoh_interpolate: empty event list");
  if (event_times.size() != values.size()) throw std::invalid_argument("zoh_interpolate: size mismatch");
  for (std::size_t i = 1; i < event_times.size(); ++i) {
    if (!(event_times[i] > event_times[i - 1])) {
      throw std::invalid_argument("zoh_interpolate: event times must be strictly increasing");
    }
  }
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  std::vector<double> out(n);
  std::size_t e = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) / fs;
    while (e + 1 < event_times.size() && event_times[e + 1] <= t + 1e-9) ++e;
    out[j] = values[e];
  }
  return out;
}

std::vector<StartleEvent> detect_startles(std::span<const double> gsr, double fs, const StartleParams& params) {
  std::vector<StartleEvent> events;
  const std::size_t n = gsr.size();
  if (n < 3) return events;

  auto width = static_cast<std::size_t>(std::llround(params.smooth_window * fs));
  if (width % 2 == 0) ++width;
  const std::size_t half = width / 2;

  const auto smooth = moving_average(gsr, width);
  const auto d = first_derivative(std::span<const double>(smooth), fs);
  const double threshold = params.k_sigma * window_stats(std::span<const double>(d)).std;
  if (!(threshold > 0.0)) return events;

  for (std::size_t c = 1; c < d.size(); ++c) {
    if (!(d[c] > threshold && d[c - 1] <= threshold)) continue;

    // Foot and summit of the smoothed rise. The centered average starts
    // rising `half` samples before the raw onset and peaks `half` samples
    // after the raw peak, so both are shifted back by `half`.
    std::size_t foot = c;
    while (foot > 0 && d[foot - 1] > 0.0) --foot;
    std::size_t summit = c;
    while (summit + 1 < n && smooth[summit + 1] > smooth[summit]) ++summit;

    const std::size_t onset = std::min(foot + half, n - 1);
    const std::size_t peak = summit >= half ? summit - half : 0;
    c = summit;
    if (peak <= onset) continue;
    const double amplitude = gsr[peak] - gsr[onset];
    if (!(amplitude > 0.0)) continue;

    StartleEvent ev;
    ev.onset_time = static_cast<double>(onset) / fs;
    ev.peak_time = static_cast<double>(peak) / fs;
    ev.rise_time = ev.peak_time - ev.onset_time;
    ev.amplitude = amplitude;
    events.push_back(ev);
  }
  return events;
}

}  // namespace emorf::dsp
