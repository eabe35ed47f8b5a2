#include "emorf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emorf/common.hpp"

namespace emorf::synth {

namespace {

constexpr float kLowRating = 2.5f;
constexpr float kHighRating = 7.5f;
constexpr float kMidRating = 5.0f;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double startle_shape(const StartleTrace& tr, const Startle& s, double t) {
  const double dt = t - s.onset;
  if (dt <= 0.0) return 0.0;
  if (dt < s.rise) return s.amplitude * dt / s.rise;
  if (dt <= s.rise + tr.hold) return s.amplitude;
  return s.amplitude * std::exp(-(dt - s.rise - tr.hold) / tr.recovery_tau);
}

std::uint64_t channel_seed(std::uint64_t master, std::size_t subject, std::size_t trial, std::size_t channel) {
  const std::uint64_t key = (static_cast<std::uint64_t>(subject) * corpus::kTrials + trial) * corpus::kChannels + channel;
  return splitmix64(master ^ splitmix64(key));
}

}  // namespace

BvpSchedule BvpSchedule::cyclic(std::span<const double> rr, double start, double duration) {
  if (rr.empty()) throw std::invalid_argument("BvpSchedule::cyclic: empty RR pattern");
  BvpSchedule s;
  double t = start;
  for (std::size_t i = 0; t < duration; ++i) {
    s.beat_times.push_back(t);
    t += rr[i % rr.size()];
  }
  return s;
}

SynthRecipe silent_recipe() {
  SynthRecipe r;
  r.channels.fill(ConstantLevel{0.0});
  return r;
}

std::vector<double> render(const ChannelRecipe& recipe, std::size_t n, double fs, double noise_sigma,
                           std::uint64_t rng_seed) {
  std::vector<double> x(n, 0.0);
  std::visit(overloaded{
                 [&](const ToneMix& m) {
                   for (std::size_t i = 0; i < n; ++i) {
                     const double t = static_cast<double>(i) / fs;
                     double v = m.offset;
                     for (const auto& tone : m.tones) {
                       if (tone.freq > fs / 2.0) throw input_error("tone above Nyquist");
                       v += tone.amplitude * std::sin(2.0 * M_PI * tone.freq * t + tone.phase);
                     }
                     x[i] = v;
                   }
                 },
                 [&](const BvpSchedule& b) {
                   for (std::size_t i = 1; i < b.beat_times.size(); ++i) {
                     if (!(b.beat_times[i] > b.beat_times[i - 1])) throw input_error("beat times must increase");
                   }
                   std::fill(x.begin(), x.end(), b.baseline);
                   const double half = b.width / 2.0;
                   for (double beat : b.beat_times) {
                     const auto lo = static_cast<long long>(std::ceil((beat - half) * fs));
                     const auto hi = static_cast<long long>(std::floor((beat + half) * fs));
                     for (long long i = std::max(lo, 0LL); i <= hi && i < static_cast<long long>(n); ++i) {
                       const double dt = static_cast<double>(i) / fs - beat;
                       if (std::abs(dt) >= half) continue;
                       x[static_cast<std::size_t>(i)] += b.amplitude * 0.5 * (1.0 + std::cos(M_PI * dt / half));
                     }
                   }
                 },
                 [&](const StartleTrace& tr) {
                   const double duration = static_cast<double>(n) / fs;
                   for (const auto& s : tr.startles) {
                     if (s.onset < 0.0 || s.onset >= duration || !(s.rise > 0.0)) {
                       throw input_error("startle onset outside trial or non-positive rise");
                     }
                   }
                   for (std::size_t i = 0; i < n; ++i) {
                     const double t = static_cast<double>(i) / fs;
                     double v = tr.baseline;
                     for (const auto& s : tr.startles) v += startle_shape(tr, s, t);
                     x[i] = v;
                   }
                 },
                 [&](const ConstantLevel& c) { std::fill(x.begin(), x.end(), c.value); },
             },
             recipe);
  if (noise_sigma > 0.0) {
    Rng rng(rng_seed);
    for (double& v : x) v += noise_sigma * rng.normal();
  }
  return x;
}

void validate_plant(const PlantRule& rule, double noise_sigma) {
  if (rule.channel >= corpus::kChannels) throw input_error("plant channel out of range");
  if (!(rule.step > 0.0)) throw input_error("plant step must be positive");
  if (rule.step < 4.0 * noise_sigma) {
    throw input_error("plant margin violation: step " + format_double(rule.step) + " < 4 sigma (" +
                      format_double(4.0 * noise_sigma) + ")");
  }
}

corpus::TrialRatings ratings_for_class(labels::LabelMode mode, int class_id) {
  const int k = labels::class_count(mode);
  if (class_id < 1 || class_id > k) throw std::invalid_argument("class id outside label mode range");
  auto level = [](bool high) { return high ? kHighRating : kLowRating; };
  corpus::TrialRatings r{kMidRating, kMidRating, kMidRating, kMidRating};
  const int bits = class_id - 1;
  switch (mode) {
    case labels::LabelMode::kValence:
      r[0] = level(bits == 1);
      break;
    case labels::LabelMode::kArousal:
      r[1] = level(bits == 1);
      break;
    case labels::LabelMode::kQuad:
      r[0] = level(bits & 2);
      r[1] = level(bits & 1);
      break;
    case labels::LabelMode::kOct:
      r[0] = level(bits & 4);
      r[1] = level(bits & 2);
      r[2] = level(bits & 1);
      break;
  }
  return r;
}

std::vector<corpus::TrialRatings> plant_labels(const PlantRule& rule, std::span<const int> trial_classes,
                                               double noise_sigma) {
  validate_plant(rule, noise_sigma);
  std::vector<corpus::TrialRatings> out;
  out.reserve(trial_classes.size());
  for (int c : trial_classes) out.push_back(ratings_for_class(rule.mode, c));
  return out;
}

std::vector<int> alternating_classes(labels::LabelMode mode, std::size_t shift) {
  const auto k = static_cast<std::size_t>(labels::class_count(mode));
  std::vector<int> out(corpus::kTrials);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = static_cast<int>((t + shift) % k) + 1;
  return out;
}

GeneratedDataset generate(const DatasetPlan& plan, unsigned workers) {
  const std::size_t n_subjects = plan.subject_ids.size();
  if (n_subjects == 0) throw input_error("generate: no subjects requested");
  if (!plan.classes.empty() && plan.classes.size() != n_subjects) {
    throw input_error("generate: class plan must cover every subject");
  }
  if (!plan.classes.empty() && !plan.plant) throw input_error("generate: class plan without a plant rule");
  if (plan.plant) validate_plant(*plan.plant, plan.recipe.noise_sigma);

  std::vector<std::optional<corpus::SubjectRecord>> records(n_subjects);
  parallel_for(n_subjects, workers, [&](std::size_t s) {
    std::vector<float> signals(corpus::kTrials * corpus::kChannels * corpus::kSamples);
    std::vector<corpus::TrialRatings> ratings;
    if (plan.classes.empty()) {
      ratings.assign(corpus::kTrials, corpus::TrialRatings{kMidRating, kMidRating, kMidRating, kMidRating});
    } else {
      if (plan.classes[s].size() != corpus::kTrials) throw input_error("generate: need 40 classes per subject");
      ratings = plant_labels(*plan.plant, plan.classes[s], plan.recipe.noise_sigma);
    }
    for (std::size_t t = 0; t < corpus::kTrials; ++t) {
      for (std::size_t c = 0; c < corpus::kChannels; ++c) {
        ChannelRecipe recipe = plan.recipe.channels[c];
        if (plan.plant && !plan.classes.empty() && c == plan.plant->channel) {
          recipe = ToneMix{{{plan.plant->tone_hz, plan.plant->amplitude_for(plan.classes[s][t]), 0.0}}, 0.0};
        }
        const auto x = render(recipe, corpus::kSamples, corpus::kFs, plan.recipe.noise_sigma,
                              channel_seed(plan.recipe.seed, s, t, c));
        auto* out = signals.data() + (t * corpus::kChannels + c) * corpus::kSamples;
        std::transform(x.begin(), x.end(), out, [](double v) { return static_cast<float>(v); });
      }
    }
    records[s].emplace(plan.subject_ids[s], std::move(signals), std::move(ratings));
  });

  GeneratedDataset out;
  for (auto& r : records) out.subjects.push_back(std::move(*r));

  nlohmann::json gt;
  gt["recipe"] = recipe_to_json(plan.recipe);
  if (plan.plant) {
    gt["plant"] = {{"mode", labels::to_string(plan.plant->mode)},
                   {"channel", corpus::ChannelMap::canonical().name(plan.plant->channel)},
                   {"tone_hz", plan.plant->tone_hz},
                   {"base_amplitude", plan.plant->base_amplitude},
                   {"step", plan.plant->step}};
  } else {
    gt["plant"] = nullptr;
  }
  auto subjects = nlohmann::json::array();
  for (std::size_t s = 0; s < n_subjects; ++s) {
    nlohmann::json js{{"id", plan.subject_ids[s]}};
    js["classes"] = plan.classes.empty() ? nlohmann::json(nullptr) : nlohmann::json(plan.classes[s]);
    subjects.push_back(std::move(js));
  }
  gt["subjects"] = std::move(subjects);
  out.ground_truth = std::move(gt);
  return out;
}

// --- recipe.json -------------------------------------------------------------------------

namespace {

ChannelRecipe channel_from_json(const nlohmann::json& j, double duration) {
  const auto type = j.at("type").get<std::string>();
  if (type == "tone") {
    ToneMix m;
    m.offset = j.value("offset", 0.0);
    for (const auto& t : j.at("tones")) {
      m.tones.push_back({t.at("freq").get<double>(), t.at("amplitude").get<double>(), t.value("phase", 0.0)});
    }
    return m;
  }
  if (type == "bvp") {
    BvpSchedule b;
    if (j.contains("beats")) {
      b.beat_times = j.at("beats").get<std::vector<double>>();
    } else {
      const auto rr = j.at("rr").get<std::vector<double>>();
      b = BvpSchedule::cyclic(rr, j.value("start", 0.5), duration);
    }
    b.width = j.value("width", 0.25);
    b.amplitude = j.value("amplitude", 1.0);
    b.baseline = j.value("baseline", 0.0);
    return b;
  }
  if (type == "startle") {
    StartleTrace tr;
    tr.baseline = j.value("baseline", 0.0);
    tr.hold = j.value("hold", 1.0);
    tr.recovery_tau = j.value("recovery_tau", 4.0);
    for (const auto& s : j.at("startles")) {
      tr.startles.push_back({s.at("onset").get<double>(), s.at("rise").get<double>(), s.at("amplitude").get<double>()});
    }
    return tr;
  }
  if (type == "constant") return ConstantLevel{j.at("value").get<double>()};
  throw input_error("recipe: unknown channel type '" + type + "'");
}

nlohmann::json channel_to_json(const ChannelRecipe& r) {
  return std::visit(overloaded{
                        [](const ToneMix& m) {
                          auto tones = nlohmann::json::array();
                          for (const auto& t : m.tones) {
                            tones.push_back({{"freq", t.freq}, {"amplitude", t.amplitude}, {"phase", t.phase}});
                          }
                          return nlohmann::json{{"type", "tone"}, {"offset", m.offset}, {"tones", tones}};
                        },
                        [](const BvpSchedule& b) {
                          return nlohmann::json{{"type", "bvp"},
                                                {"beats", b.beat_times},
                                                {"width", b.width},
                                                {"amplitude", b.amplitude},
                                                {"baseline", b.baseline}};
                        },
                        [](const StartleTrace& tr) {
                          auto st = nlohmann::json::array();
                          for (const auto& s : tr.startles) {
                            st.push_back({{"onset", s.onset}, {"rise", s.rise}, {"amplitude", s.amplitude}});
                          }
                          return nlohmann::json{{"type", "startle"},
                                                {"baseline", tr.baseline},
                                                {"hold", tr.hold},
                                                {"recovery_tau", tr.recovery_tau},
                                                {"startles", st}};
                        },
                        [](const ConstantLevel& c) { return nlohmann::json{{"type", "constant"}, {"value", c.value}}; },
                    },
                    r);
}

}  // namespace

nlohmann::json recipe_to_json(const SynthRecipe& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["noise_sigma"] = r.noise_sigma;
  nlohmann::json channels = nlohmann::json::object();
  const auto& map = corpus::ChannelMap::canonical();
  for (std::size_t c = 0; c < corpus::kChannels; ++c) channels[std::string(map.name(c))] = channel_to_json(r.channels[c]);
  j["channels"] = std::move(channels);
  return j;
}

DatasetPlan plan_from_json(const nlohmann::json& j) {
  try {
    DatasetPlan plan;
    const double duration = static_cast<double>(corpus::kSamples) / corpus::kFs;
    plan.recipe = silent_recipe();
    plan.recipe.seed = j.value("seed", std::uint64_t{1});
    plan.recipe.noise_sigma = j.value("noise_sigma", 0.0);
    if (!(plan.recipe.noise_sigma >= 0.0)) throw input_error("recipe: noise_sigma must be >= 0");

    const auto& map = corpus::ChannelMap::canonical();
    if (j.contains("channels")) {
      const auto& ch = j.at("channels");
      if (ch.contains("default")) plan.recipe.channels.fill(channel_from_json(ch.at("default"), duration));
      for (const auto& [name, spec] : ch.items()) {
        if (name == "default") continue;
        plan.recipe.channels[map.index(name)] = channel_from_json(spec, duration);
      }
    }

    const auto& subjects = j.at("subjects");
    if (subjects.is_number_unsigned()) {
      const auto n = subjects.get<std::size_t>();
      for (std::size_t s = 0; s < n; ++s) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "s%02zu", s + 1);
        plan.subject_ids.emplace_back(buf);
      }
    } else {
      plan.subject_ids = subjects.get<std::vector<std::string>>();
    }

    if (j.contains("plant") && !j.at("plant").is_null()) {
      const auto& p = j.at("plant");
      PlantRule rule;
      const auto mode = labels::parse_mode(p.at("mode").get<std::string>());
      if (!mode) throw input_error("recipe: unknown plant mode");
      rule.mode = *mode;
      rule.channel = map.index(p.at("channel").get<std::string>());
      rule.tone_hz = p.value("tone_hz", 10.0);
      rule.base_amplitude = p.value("base_amplitude", 1.0);
      rule.step = p.value("step", 1.0);
      validate_plant(rule, plan.recipe.noise_sigma);
      plan.plant = rule;

      const auto& classes = j.contains("classes") ? j.at("classes") : nlohmann::json("alternate");
      if (classes.is_string()) {
        if (classes.get<std::string>() != "alternate") throw input_error("recipe: classes must be 'alternate' or a list");
        plan.classes.assign(plan.subject_ids.size(), alternating_classes(rule.mode));
      } else {
        plan.classes = classes.get<std::vector<std::vector<int>>>();
      }
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("recipe: ") + e.what());
  }
}

}  // namespace emorf::synth
