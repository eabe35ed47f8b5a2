#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <set>

#include "emorf/features.hpp"
#include "emorf/synthgen.hpp"
#include "support.hpp"

using namespace emorf;
using namespace emorf::features;
using corpus::Window;

namespace {

std::vector<float> ftone(double freq, double amp, std::size_t n = 128, double fs = 128.0) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * i / fs));
  return x;
}

std::vector<corpus::TrialRatings> flat_ratings() { return std::vector<corpus::TrialRatings>(40, {5.0f, 5.0f, 5.0f, 5.0f}); }

corpus::SubjectRecord noisy_subject(const std::string& id, std::uint64_t seed, double scale = 1.0) {
  synth::DatasetPlan plan;
  plan.recipe = synth::silent_recipe();
  plan.recipe.seed = seed;
  plan.recipe.noise_sigma = 1.0;
  plan.recipe.channels[38] = synth::BvpSchedule::cyclic(std::vector<double>{0.8, 0.86}, 0.53, 63.0);
  plan.subject_ids = {id};
  auto rec = synth::generate(plan).subjects.front();
  if (scale == 1.0) return rec;
  std::vector<float> s(rec.signals().begin(), rec.signals().end());
  for (auto& v : s) v = static_cast<float>(v * scale);
  return corpus::SubjectRecord(id, std::move(s), rec.ratings());
}

}  // namespace

TEST_CASE("registry layout") {
  const auto& reg = FeatureRegistry::canonical();
  CHECK(reg.size() == 343);
  CHECK(reg.group_size(Group::kEeg) == 288);
  CHECK(reg.group_size(Group::kGsr) == 5);
  CHECK(reg.group_size(Group::kCardiac) == 19);
  CHECK(reg.group_size(Group::kResp) == 8);
  CHECK(reg.group_size(Group::kTemp) == 3);
  CHECK(reg.group_size(Group::kEogEmg) == 20);

  const auto names = reg.names();
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  CHECK(names.front() == "EEG01_delta");
  CHECK(reg.index("EEG01_alpha") == 2);
  CHECK(reg.index("GSR_rise_mean") == 288);
  CHECK(reg.index("BVP_pNN50") == 303);
  CHECK(names.back() == "tEMG_peak_freq");
  CHECK_THROWS_AS(reg.index("EEG33_alpha"), input_error);
  CHECK(reg.version().rfind("v1-", 0) == 0);
  CHECK(reg.version() == FeatureRegistry::canonical().version());
}

TEST_CASE("EEG features") {
  const auto t = extract_eeg(ftone(10.0, 2.0), 128.0);
  CHECK(t[2] == doctest::Approx(2.0).epsilon(1e-6));
  for (int b : {0, 1, 3, 4}) CHECK(t[b] < 1e-12);
  CHECK(t[8] == doctest::Approx(10.0).epsilon(1e-9));

  for (double v : extract_eeg(std::vector<float>(128, 0.0f), 128.0)) CHECK(v == 0.0);

  const auto c = extract_eeg(std::vector<float>(128, 1.5f), 128.0);
  for (int b = 0; b < 5; ++b) CHECK(c[b] < 1e-20);
  CHECK(c[5] == 1.5);
  CHECK(c[6] == 0.0);
  CHECK(c[7] == doctest::Approx(128 * 2.25));
  CHECK(c[8] == 0.0);
}

TEST_CASE("GSR features") {
  std::vector<float> trial(corpus::kSamples, 5.0f);
  const Window w{0, 10};

  std::vector<dsp::StartleEvent> two{{10.2, 11.2, 1.0, 1.0}, {10.5, 12.5, 2.0, 1.0}};
  const auto g = extract_gsr(two, trial, w, 128.0);
  CHECK(g[0] == doctest::Approx(1.5));
  CHECK(g[1] == doctest::Approx(std::sqrt(0.5)));
  CHECK(g[2] == 5.0);
  CHECK(g[3] == 5.0);
  CHECK(g[4] == 0.0);

  const auto none = extract_gsr({}, trial, w, 128.0);
  CHECK(none[0] == 0.0);
  CHECK(none[1] == 0.0);

  // Fewer than two in the window: carry the statistics of every startle so far.
  std::vector<dsp::StartleEvent> earlier{{2.0, 3.0, 1.0, 1.0}, {6.0, 9.0, 3.0, 1.0}, {30.0, 31.0, 1.0, 1.0}};
  const auto carried = extract_gsr(earlier, trial, w, 128.0);
  CHECK(carried[0] == doctest::Approx(2.0));
  CHECK(carried[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cardiac series") {
  const auto c = cardiac_series({0.0, 0.8, 1.6, 2.4});
  REQUIRE(c.rr.size() == 3);
  for (double v : c.rr) CHECK(v == doctest::Approx(0.8));
  for (double v : c.hr) CHECK(v == doctest::Approx(75.0));
  REQUIRE(c.hrv.size() == 2);
  for (double v : c.hrv) CHECK(std::abs(v) < 1e-12);

  const auto s = cardiac_series({0.0, 0.80, 1.66, 2.53});
  CHECK(s.hrv[0] == doctest::Approx(0.06));
  CHECK(s.hrv[1] == doctest::Approx(0.01));
  CHECK(s.sd[0] == doctest::Approx(0.0036));
  CHECK(s.sd[1] == doctest::Approx(0.0001));
  CHECK(s.ssd[0] == doctest::Approx(0.0036));
  CHECK(s.ssd[1] == doctest::Approx(0.0037));
  CHECK(pnn50(s, 0.0, 3.0) == 50.0);
  CHECK(pnn50(s, 2.0, 3.0) == 0.0);
  CHECK(pnn50(s, 3.0, 4.0) == 0.0);
}

TEST_CASE("heart rate is 60 over RR for any beat list") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> beats{rng.uniform()};
    for (int i = 0; i < 80; ++i) beats.push_back(beats.back() + 0.3 + rng.uniform());
    const auto s = cardiac_series(beats);
    for (std::size_t i = 0; i < s.rr.size(); ++i) CHECK(std::abs(60.0 / s.rr[i] - s.hr[i]) <= 1e-12);
  }
}

TEST_CASE("constant rhythm gives zero variability") {
  std::vector<double> beats;
  for (double t = 0.3; t < 63.0; t += 0.8) beats.push_back(t);
  const auto tracks = build_cardiac_from_beats(beats, 128.0, 63.0);
  REQUIRE_FALSE(tracks.degenerate);
  const auto bands = hrv_band_powers(tracks.hrv_4hz);
  for (double p : bands) CHECK(p < 1e-20);
  const std::vector<float> bvp(corpus::kSamples, 0.0f);
  const auto f = extract_cardiac(tracks, Window{0, 20}, bands, bvp);
  CHECK(f[0] == doctest::Approx(0.8));
  CHECK(f[2] == doctest::Approx(75.0));
  CHECK(std::abs(f[4]) < 1e-12);
  CHECK(f[10] == 0.0);
}

TEST_CASE("degenerate trial yields zeros") {
  const auto tracks = build_cardiac_from_beats({1.0, 2.0}, 128.0, 63.0);
  CHECK(tracks.degenerate);
  const std::vector<float> bvp(corpus::kSamples, 0.5f);
  for (double v : extract_cardiac(tracks, Window{0, 3}, {}, bvp)) CHECK(v == 0.0);
  CHECK(build_cardiac(std::vector<float>(corpus::kSamples, 0.0f), 128.0).degenerate);
}

TEST_CASE("generated constant rhythm recovers 75 bpm") {
  const auto sched = synth::BvpSchedule::cyclic(std::vector<double>{0.8}, 0.4, 63.0);
  const auto x = synth::render(sched, corpus::kSamples, 128.0, 0.0, 1);
  const std::vector<float> bvp(x.begin(), x.end());
  const auto tracks = build_cardiac(bvp, 128.0);
  REQUIRE_FALSE(tracks.degenerate);
  for (double hr : tracks.series.hr) CHECK(std::abs(hr - 75.0) <= 0.2);
  const auto beats = detect_beats(bvp, 128.0);
  REQUIRE(beats.size() == sched.beat_times.size());
  for (std::size_t i = 0; i < beats.size(); ++i) CHECK(std::abs(beats[i] - sched.beat_times[i]) <= 2.0 / 128.0);
}

TEST_CASE("HRV band powers") {
  CHECK(hrv_band_powers(std::vector<double>(252, 0.0)) == std::array<double, 4>{});

  const double df = 4.0 / 252.0;
  for (auto [bin, band] : {std::pair{6, 1}, std::pair{19, 2}}) {
    std::vector<double> track(252);
    for (std::size_t i = 0; i < track.size(); ++i) {
      track[i] = 0.02 + 0.01 * std::sin(2.0 * std::numbers::pi * bin * df * static_cast<double>(i) / 4.0);
    }
    const auto p = hrv_band_powers(track);
    const auto spec = dsp::periodogram(track, 4.0);
    const double non_dc = spec.total() - spec.bins[0];
    CHECK(p[band] >= 0.99 * non_dc);
  }
}

TEST_CASE("respiration, temperature, EOG and EMG") {
  std::vector<float> slow(128);
  for (std::size_t i = 0; i < slow.size(); ++i) slow[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * 0.25 * i / 128.0));
  CHECK(extract_resp(slow, 128.0)[7] < 2.0);

  const auto c = extract_resp(std::vector<float>(128, 2.0f), 128.0);
  CHECK(c == std::array<double, 8>{2.0, 0.0, 0.0, 0.0, 512.0, 2.0, 2.0, 0.0});
  for (double v : extract_resp(std::vector<float>(128, 0.0f), 128.0)) CHECK(v == 0.0);

  const auto t = extract_temp(std::vector<float>(128, 36.6f));
  CHECK(t[0] == doctest::Approx(36.6));
  CHECK(t[1] == 0.0);
  CHECK(t[2] == doctest::Approx(128 * 36.6 * 36.6));

  const auto e = extract_eog(ftone(3.0, 1.0), 128.0);
  CHECK(e[3] == 3.0);
  // The derivative mean telescopes to the end-point difference over the window.
  CHECK(std::abs(e[4]) < 0.2);

  CHECK(extract_emg(std::vector<float>(128, 0.0f), 128.0) == std::array<double, 4>{0.0, 0.0, 0.0, 1.0});
}

TEST_CASE("all-zero subject") {
  const corpus::SubjectRecord rec("z", std::vector<float>(corpus::kTrials * corpus::kChannels * corpus::kSamples, 0.0f),
                                  flat_ratings());
  const auto m = extract_all(rec);
  REQUIRE(m.rows() == 2520);
  CHECK(m.n_features == 343);
  const auto& reg = FeatureRegistry::canonical();
  std::set<std::size_t> tie_columns;
  for (const auto* n : {"hEOG_peak_freq", "vEOG_peak_freq", "zEMG_peak_freq", "tEMG_peak_freq"}) tie_columns.insert(reg.index(n));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t f = 0; f < m.n_features; ++f) {
      if (m.at(r, f) != (tie_columns.count(f) ? 1.0 : 0.0)) {
        FAIL("unexpected value at row " << r << " feature " << reg[f].name);
      }
    }
  }
}

TEST_CASE("extraction keys, finiteness and determinism") {
  const auto rec = noisy_subject("n1", 3);
  const auto m = extract_all(rec);
  REQUIRE(m.rows() == 2520);
  CHECK(m.keys[0] == RowKey{0, 0, 0});
  CHECK(m.keys[64] == RowKey{0, 1, 1});
  CHECK(m.keys.back() == RowKey{0, 39, 62});
  CHECK(std::all_of(m.values.begin(), m.values.end(), [](double v) { return std::isfinite(v); }));

  ExtractOptions opts;
  opts.workers = 3;
  const auto again = extract_all(rec, opts);
  CHECK(std::memcmp(again.values.data(), m.values.data(), m.values.size() * sizeof(double)) == 0);
}

TEST_CASE("normalization examples") {
  FeatureMatrix m;
  m.n_features = 2;
  m.subjects = {"a", "b"};
  const double a_col[] = {2.0, 4.0, 6.0};
  const double b_col[] = {100.0, 110.0, 120.0};
  for (int s = 0; s < 2; ++s) {
    for (int r = 0; r < 3; ++r) {
      m.keys.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint16_t>(r), 0});
      m.ratings.push_back({5, 5, 5, 5});
      m.values.push_back(s == 0 ? a_col[r] : b_col[r]);
      m.values.push_back(7.0);
    }
  }
  const auto stats = normalize_per_subject(m);
  const double expected[] = {-1.0, 0.0, 1.0};
  for (int s = 0; s < 2; ++s) {
    for (int r = 0; r < 3; ++r) {
      CHECK(m.at(s * 3 + r, 0) == doctest::Approx(expected[r]));
      CHECK(m.at(s * 3 + r, 1) == 0.0);
    }
  }
  CHECK(stats.mean[1][0] == doctest::Approx(110.0));
  CHECK(stats.std[0][0] == doctest::Approx(2.0));
}

TEST_CASE("normalized columns have zero mean and unit std per subject") {
  std::vector<FeatureMatrix> parts{extract_all(noisy_subject("a", 1)), extract_all(noisy_subject("b", 2))};
  for (auto& v : parts[1].values) v = v * 3.0 + 1000.0;
  auto m = FeatureMatrix::concat(parts);
  normalize_per_subject(m);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto sub = m.subject_rows(s);
    for (std::size_t f = 0; f < sub.n_features; ++f) {
      std::vector<double> col;
      for (std::size_t r = 0; r < sub.rows(); ++r) col.push_back(sub.at(r, f));
      const auto st = dsp::window_stats(std::span<const double>(col));
      if (st.min == st.max) continue;
      CHECK(std::abs(st.mean) <= 1e-9);
      CHECK(std::abs(st.std - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("normalized EEG columns are invariant to channel scaling") {
  auto base = extract_all(noisy_subject("a", 4));
  auto scaled = extract_all(noisy_subject("a", 4, 2.0));
  normalize_per_subject(base);
  normalize_per_subject(scaled);
  double worst = 0.0;
  for (std::size_t r = 0; r < base.rows(); ++r) {
    for (std::size_t f = 0; f < kEegCount; ++f) worst = std::max(worst, std::abs(base.at(r, f) - scaled.at(r, f)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("features.csv round trip") {
  testing::TempDir dir("fcsv");
  auto m = extract_all(noisy_subject("s07", 5));
  write_features_csv(dir / "f.csv", m);
  const auto back = read_features_csv(dir / "f.csv");
  CHECK(back.subjects == m.subjects);
  CHECK(back.keys == m.keys);
  CHECK(back.ratings == m.ratings);
  CHECK(back.values == m.values);

  const auto text = read_file(dir / "f.csv");
  CHECK(text.rfind(features_csv_header(), 0) == 0);
  CHECK(features_csv_header().rfind("subject,trial,window,EEG01_delta,", 0) == 0);

  auto broken = text;
  broken.replace(broken.find("EEG01_delta"), 11, "EEG01_DELTA");
  write_file_atomic(dir / "bad.csv", broken);
  CHECK_THROWS_AS(read_features_csv(dir / "bad.csv"), input_error);
}

TEST_CASE("subject_rows and concat") {
  auto a = extract_all(noisy_subject("a", 6));
  auto b = a;
  b.subjects = {"b"};
  for (auto& v : b.values) v += 1.0;
  const auto m = FeatureMatrix::concat(std::vector<FeatureMatrix>{a, b});
  CHECK(m.rows() == 5040);
  CHECK(m.keys[2520].subject == 1);
  const auto back = m.subject_rows(1);
  CHECK(back.subjects == std::vector<std::string>{"b"});
  CHECK(back.keys.front().subject == 0);
  CHECK(back.values == b.values);
}
