#include "emorf/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "emorf/common.hpp"

namespace emorf::features {

using corpus::Channel;
using corpus::index_of;

namespace {

constexpr double kPnnThreshold = 0.05;  // s

double centroid_or_zero(const dsp::Spectrum& s) {
  try {
    return dsp::spectral_centroid(s);
  } catch (const degenerate_error&) {
    return 0.0;
  }
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> to_double(std::span<const float> x) { return {x.begin(), x.end()}; }

}  // namespace

// --- Registry ----------------------------------------------------------------

FeatureRegistry::FeatureRegistry() {
  const auto& channels = corpus::ChannelMap::canonical();
  auto add = [&](std::size_t ch, Group g, const char* suffix) {
    descriptors_.push_back({std::string(channels.name(ch)) + "_" + suffix, ch, g});
  };

  for (std::size_t ch = 0; ch < corpus::kEegChannels; ++ch) {
    for (const char* s : {"delta", "theta", "alpha", "beta", "gamma", "mean", "std", "ssi", "centroid"}) {
      add(ch, Group::kEeg, s);
    }
  }
  for (const char* s : {"rise_mean", "rise_std", "min", "max", "centroid"}) {
    add(index_of(Channel::kGsr), Group::kGsr, s);
  }
  for (const char* s : {"RR_mean",  "RR_std",  "HR_mean",  "HR_std",  "HRV_mean", "HRV_std", "SD_mean",
                        "SD_std",   "SSD_mean", "SSD_std", "pNN50",   "HRV_ULF",  "HRV_LF",  "HRV_HF",
                        "HRV_UHF",  "mean",    "std",      "min",     "max"}) {
    add(index_of(Channel::kBvp), Group::kCardiac, s);
  }
  for (const char* s : {"mean", "std", "d1_mean", "d1_std", "ssi", "min", "max", "centroid"}) {
    add(index_of(Channel::kResp), Group::kResp, s);
  }
  for (const char* s : {"mean", "std", "ssi"}) add(index_of(Channel::kTemp), Group::kTemp, s);
  for (Channel c : {Channel::kHeog, Channel::kVeog}) {
    for (const char* s : {"mean", "std", "ssi", "peak_freq", "d1_mean", "d1_std"}) add(index_of(c), Group::kEogEmg, s);
  }
  for (Channel c : {Channel::kZemg, Channel::kTemg}) {
    for (const char* s : {"mean", "std", "ssi", "peak_freq"}) add(index_of(c), Group::kEogEmg, s);
  }

  std::string joined;
  for (const auto& d : descriptors_) joined += d.name + ",";
  version_ = "v1-" + fnv1a_hex(joined);
}

const FeatureRegistry& FeatureRegistry::canonical() {
  static const FeatureRegistry reg;
  return reg;
}

std::vector<std::string> FeatureRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(descriptors_.size());
  for (const auto& d : descriptors_) out.push_back(d.name);
  return out;
}

std::size_t FeatureRegistry::group_size(Group g) const {
  return static_cast<std::size_t>(
      std::count_if(descriptors_.begin(), descriptors_.end(), [g](const auto& d) { return d.group == g; }));
}

std::size_t FeatureRegistry::index(const std::string& name) const {
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    if (descriptors_[i].name == name) return i;
  }
  throw input_error("unknown feature '" + name + "'");
}

// --- FeatureMatrix -------------------------------------------------------------

FeatureMatrix FeatureMatrix::concat(std::span<const FeatureMatrix> parts) {
  FeatureMatrix out;
  if (parts.empty()) return out;
  out.n_features = parts.front().n_features;
  for (const auto& p : parts) {
    if (p.n_features != out.n_features) throw std::invalid_argument("concat: feature count mismatch");
    const auto offset = static_cast<std::uint32_t>(out.subjects.size());
    out.subjects.insert(out.subjects.end(), p.subjects.begin(), p.subjects.end());
    for (RowKey k : p.keys) {
      k.subject += offset;
      out.keys.push_back(k);
    }
    out.ratings.insert(out.ratings.end(), p.ratings.begin(), p.ratings.end());
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  }
  return out;
}

FeatureMatrix FeatureMatrix::subject_rows(std::size_t subject) const {
  FeatureMatrix out;
  out.n_features = n_features;
  out.subjects = {subjects.at(subject)};
  for (std::size_t r = 0; r < rows(); ++r) {
    if (keys[r].subject != subject) continue;
    RowKey k = keys[r];
    k.subject = 0;
    out.keys.push_back(k);
    out.ratings.push_back(ratings[r]);
    const auto v = row(r);
    out.values.insert(out.values.end(), v.begin(), v.end());
  }
  return out;
}

// --- Extractors ----------------------------------------------------------------

std::array<double, kEegPerChannel> extract_eeg(std::span<const float> window, double fs) {
  const auto spec = dsp::periodogram(window, fs);
  const auto st = dsp::window_stats(window);
  std::array<double, kEegPerChannel> out{};
  std::size_t i = 0;
  for (const auto& band : dsp::eeg_bands::kAll) out[i++] = dsp::band_power(spec, band);
  out[i++] = st.mean;
  out[i++] = st.std;
  out[i++] = st.ssi;
  out[i++] = centroid_or_zero(spec);
  return out;
}

std::array<double, kGsrCount> extract_gsr(std::span<const dsp::StartleEvent> trial_startles,
                                          std::span<const float> trial_gsr, const corpus::Window& window, double fs) {
  const double t0 = window.begin_time();
  const double t1 = window.end_time();
  std::vector<double> inside;
  std::vector<double> so_far;
  for (const auto& ev : trial_startles) {
    if (ev.onset_time >= t1) continue;
    so_far.push_back(ev.rise_time);
    if (ev.onset_time >= t0) inside.push_back(ev.rise_time);
  }
  const auto& used = inside.size() >= 2 ? inside : so_far;

  std::array<double, kGsrCount> out{};
  if (!used.empty()) {
    const auto st = dsp::window_stats(std::span<const double>(used));
    out[0] = st.mean;
    out[1] = st.std;
  }
  const auto w = window.slice(trial_gsr);
  const auto st = dsp::window_stats(w);
  out[2] = st.min;
  out[3] = st.max;
  out[4] = centroid_or_zero(dsp::periodogram(w, fs));
  return out;
}

CardiacSeries cardiac_series(std::vector<double> beat_times) {
  if (beat_times.size() < 3) throw degenerate_error("cardiac_series: fewer than 3 beats");
  CardiacSeries s;
  s.beat_times = std::move(beat_times);
  const auto& b = s.beat_times;
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    const double rr = b[i + 1] - b[i];
    if (!(rr > 0.0)) throw std::invalid_argument("cardiac_series: beat times must be strictly increasing");
    s.rr.push_back(rr);
    s.hr.push_back(60.0 / rr);
  }
  double running = 0.0;
  for (std::size_t i = 0; i + 1 < s.rr.size(); ++i) {
    const double d = s.rr[i + 1] - s.rr[i];
    s.hrv.push_back(d);
    s.sd.push_back(d * d);
    running += d * d;
    s.ssd.push_back(running);
  }
  return s;
}

std::vector<double> detect_beats(std::span<const float> trial_bvp, double fs, const BeatDetection& params) {
  const auto x = to_double(trial_bvp);
  const double prominence = params.min_prominence_factor * dsp::window_stats(std::span<const double>(x)).std;
  const auto peaks = dsp::detect_peaks(x, fs, params.min_distance, prominence);
  std::vector<double> beats;
  beats.reserve(peaks.indices.size());
  for (std::size_t p : peaks.indices) beats.push_back(dsp::refine_peak(x, p) / fs);
  return beats;
}

CardiacTracks build_cardiac_from_beats(std::vector<double> beat_times, double fs, double duration) {
  CardiacTracks t;
  if (beat_times.size() < 3) return t;
  t.series = cardiac_series(std::move(beat_times));
  t.degenerate = false;
  const auto& s = t.series;
  const std::span<const double> beats(s.beat_times);
  const auto interval_end = beats.subspan(1);   // RR[i] ends at beat i+1
  const auto diff_end = beats.subspan(2);       // HRV[i] ends at beat i+2
  t.rr = dsp::zoh_interpolate(interval_end, s.rr, fs, duration);
  t.hr = dsp::zoh_interpolate(interval_end, s.hr, fs, duration);
  t.hrv = dsp::zoh_interpolate(diff_end, s.hrv, fs, duration);
  t.sd = dsp::zoh_interpolate(diff_end, s.sd, fs, duration);
  t.ssd = dsp::zoh_interpolate(diff_end, s.ssd, fs, duration);
  t.hrv_4hz = dsp::zoh_interpolate(diff_end, s.hrv, kHrvResampleHz, duration);
  return t;
}

CardiacTracks build_cardiac(std::span<const float> trial_bvp, double fs, const BeatDetection& params) {
  const double duration = static_cast<double>(trial_bvp.size()) / fs;
  return build_cardiac_from_beats(detect_beats(trial_bvp, fs, params), fs, duration);
}

std::array<double, 4> hrv_band_powers(std::span<const double> hrv_track, double fs) {
  std::array<double, 4> out{};
  if (hrv_track.size() < 2) return out;
  const auto spec = dsp::periodogram(hrv_track, fs);
  std::size_t i = 0;
  for (const auto& band : dsp::hrv_bands::kAll) out[i++] = dsp::band_power(spec, band);
  return out;
}

double pnn50(const CardiacSeries& s, double t0, double t1) {
  std::size_t count = 0;
  std::size_t over = 0;
  for (std::size_t i = 0; i < s.hrv.size(); ++i) {
    const double end = s.beat_times[i + 2];
    if (end < t0 || end >= t1) continue;
    ++count;
    if (std::abs(s.hrv[i]) > kPnnThreshold) ++over;
  }
  return count == 0 ? 0.0 : 100.0 * static_cast<double>(over) / static_cast<double>(count);
}

std::array<double, kCardiacCount> extract_cardiac(const CardiacTracks& tracks, const corpus::Window& window,
                                                  const std::array<double, 4>& trial_hrv_bands,
                                                  std::span<const float> trial_bvp) {
  std::array<double, kCardiacCount> out{};
  if (tracks.degenerate) return out;
  std::size_t i = 0;
  for (const auto* track : {&tracks.rr, &tracks.hr, &tracks.hrv, &tracks.sd, &tracks.ssd}) {
    const auto st = dsp::window_stats(window.slice(std::span<const double>(*track)));
    out[i++] = st.mean;
    out[i++] = st.std;
  }
  out[i++] = pnn50(tracks.series, window.begin_time(), window.end_time());
  for (double p : trial_hrv_bands) out[i++] = p;
  const auto st = dsp::window_stats(window.slice(trial_bvp));
  out[i++] = st.mean;
  out[i++] = st.std;
  out[i++] = st.min;
  out[i++] = st.max;
  return out;
}

std::array<double, kRespCount> extract_resp(std::span<const float> window, double fs) {
  const auto st = dsp::window_stats(window);
  const auto d1 = dsp::first_derivative(window, fs);
  const auto dst = dsp::window_stats(std::span<const double>(d1));
  return {st.mean, st.std, dst.mean, dst.std, st.ssi, st.min, st.max,
          centroid_or_zero(dsp::periodogram(window, fs))};
}

std::array<double, kTempCount> extract_temp(std::span<const float> window) {
  const auto st = dsp::window_stats(window);
  return {st.mean, st.std, st.ssi};
}

std::array<double, kEogPerChannel> extract_eog(std::span<const float> window, double fs) {
  const auto st = dsp::window_stats(window);
  const auto d1 = dsp::first_derivative(window, fs);
  const auto dst = dsp::window_stats(std::span<const double>(d1));
  return {st.mean, st.std, st.ssi, dsp::peak_frequency_excl_dc(dsp::periodogram(window, fs)), dst.mean, dst.std};
}

std::array<double, kEmgPerChannel> extract_emg(std::span<const float> window, double fs) {
  const auto st = dsp::window_stats(window);
  return {st.mean, st.std, st.ssi, dsp::peak_frequency_excl_dc(dsp::periodogram(window, fs))};
}

// --- Whole subject -------------------------------------------------------------

FeatureMatrix extract_all(const corpus::SubjectRecord& record, const ExtractOptions& opts) {
  using corpus::kWindowsPerTrial;
  const double fs = record.fs();
  FeatureMatrix m;
  m.subjects = {record.subject_id()};
  m.keys.resize(corpus::kTrials * kWindowsPerTrial);
  m.ratings.resize(m.keys.size());
  m.values.assign(m.keys.size() * kFeatureCount, 0.0);

  parallel_for(corpus::kTrials, opts.workers, [&](std::size_t trial) {
    const auto gsr = record.channel(trial, index_of(Channel::kGsr));
    const auto gsr_d = to_double(gsr);
    const auto startles = dsp::detect_startles(gsr_d, fs, opts.startle);
    const auto bvp = record.channel(trial, index_of(Channel::kBvp));
    const auto cardiac = build_cardiac(bvp, fs, opts.beats);
    const auto hrv_bands = cardiac.degenerate ? std::array<double, 4>{} : hrv_band_powers(cardiac.hrv_4hz);

    for (const auto& w : corpus::windows_of(trial)) {
      const std::size_t r = trial * kWindowsPerTrial + w.window_idx;
      m.keys[r] = RowKey{0, static_cast<std::uint16_t>(trial), static_cast<std::uint16_t>(w.window_idx)};
      m.ratings[r] = record.ratings()[trial];
      auto out = m.row(r).begin();
      auto put = [&out](const auto& values) { out = std::copy(values.begin(), values.end(), out); };

      for (std::size_t ch = 0; ch < corpus::kEegChannels; ++ch) {
        put(extract_eeg(w.slice(record.channel(trial, ch)), fs));
      }
      put(extract_gsr(startles, gsr, w, fs));
      put(extract_cardiac(cardiac, w, hrv_bands, bvp));
      put(extract_resp(w.slice(record.channel(trial, index_of(Channel::kResp))), fs));
      put(extract_temp(w.slice(record.channel(trial, index_of(Channel::kTemp)))));
      put(extract_eog(w.slice(record.channel(trial, index_of(Channel::kHeog))), fs));
      put(extract_eog(w.slice(record.channel(trial, index_of(Channel::kVeog))), fs));
      put(extract_emg(w.slice(record.channel(trial, index_of(Channel::kZemg))), fs));
      put(extract_emg(w.slice(record.channel(trial, index_of(Channel::kTemg))), fs));
    }
  });
  return m;
}

NormalizationStats normalize_per_subject(FeatureMatrix& m) {
  const std::size_t nf = m.n_features;
  NormalizationStats stats;
  stats.subjects = m.subjects;
  stats.mean.assign(m.subjects.size(), std::vector<double>(nf, 0.0));
  stats.std.assign(m.subjects.size(), std::vector<double>(nf, 0.0));

  std::vector<std::vector<std::size_t>> rows_of(m.subjects.size());
  for (std::size_t r = 0; r < m.rows(); ++r) rows_of.at(m.keys[r].subject).push_back(r);

  for (std::size_t s = 0; s < rows_of.size(); ++s) {
    const auto& rows = rows_of[s];
    if (rows.empty()) continue;
    const double n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < nf; ++f) {
      double sum = 0.0;
      for (std::size_t r : rows) sum += m.at(r, f);
      double mean = sum / n;
      // Second pass corrects the rounding error of the first.
      double resid = 0.0;
      for (std::size_t r : rows) resid += m.at(r, f) - mean;
      mean += resid / n;
      double acc = 0.0;
      for (std::size_t r : rows) {
        const double d = m.at(r, f) - mean;
        acc += d * d;
      }
      const double sd = rows.size() > 1 ? std::sqrt(acc / (n - 1.0)) : 0.0;
      stats.mean[s][f] = mean;
      stats.std[s][f] = sd;
      for (std::size_t r : rows) {
        double& v = m.values[r * nf + f];
        v = sd > 0.0 ? (v - mean) / sd : 0.0;
      }
    }
  }
  return stats;
}

// --- CSV -------------------------------------------------------------------------

std::string features_csv_header() {
  std::string h = "subject,trial,window";
  for (const auto& d : FeatureRegistry::canonical().descriptors()) h += "," + d.name;
  h += ",valence,arousal,dominance,liking";
  return h;
}

void write_features_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << features_csv_header() << '\n';
    std::string line;
    char buf[32];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto& k = m.keys[r];
      line = m.subjects[k.subject] + "," + std::to_string(k.trial) + "," + std::to_string(k.window);
      for (double v : m.row(r)) {
        line += ',';
        line += format_double(v);
      }
      for (float rating : m.ratings[r]) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), rating);
        line += ',';
        line.append(buf, end);
      }
      line += '\n';
      out << line;
    }
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

FeatureMatrix read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw input_error(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != features_csv_header()) {
    throw input_error(path.string() + ": header does not match feature registry " +
                      FeatureRegistry::canonical().version());
  }
  FeatureMatrix m;
  std::unordered_map<std::string, std::uint32_t> subject_index;
  const std::size_t expected_cells = 3 + kFeatureCount + corpus::kRatings;
  std::vector<std::string_view> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    cells.clear();
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      cells.push_back(rest.substr(0, pos));
    }
    cells.push_back(rest);
    if (cells.size() != expected_cells) {
      throw input_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(expected_cells) + " cells, got " + std::to_string(cells.size()));
    }
    const std::string subject(cells[0]);
    auto [it, inserted] = subject_index.try_emplace(subject, static_cast<std::uint32_t>(m.subjects.size()));
    if (inserted) m.subjects.push_back(subject);
    const auto trial = parse_int(cells[1]);
    const auto window = parse_int(cells[2]);
    if (trial < 0 || trial >= static_cast<long long>(corpus::kTrials) || window < 0 ||
        window >= static_cast<long long>(corpus::kWindowsPerTrial)) {
      throw input_error(path.string() + ":" + std::to_string(line_no) + ": trial/window out of range");
    }
    m.keys.push_back({it->second, static_cast<std::uint16_t>(trial), static_cast<std::uint16_t>(window)});
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double v = parse_double(cells[3 + f]);
      if (!std::isfinite(v)) throw input_error(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
      m.values.push_back(v);
    }
    corpus::TrialRatings r{};
    for (std::size_t k = 0; k < corpus::kRatings; ++k) {
      r[k] = static_cast<float>(parse_double(cells[3 + kFeatureCount + k]));
    }
    m.ratings.push_back(r);
  }
  return m;
}

}  // namespace emorf::features
