#include "emorf/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "emorf/common.hpp"

namespace emorf::corpus {

static_assert(std::endian::native == std::endian::little, "corpus I/O assumes a little-endian host");

ChannelMap::ChannelMap() {
  for (std::size_t i = 0; i < kEegChannels; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "EEG%02zu", i + 1);
    names_[i] = buf;
  }
  names_[index_of(Channel::kHeog)] = "hEOG";
  names_[index_of(Channel::kVeog)] = "vEOG";
  names_[index_of(Channel::kZemg)] = "zEMG";
  names_[index_of(Channel::kTemg)] = "tEMG";
  names_[index_of(Channel::kGsr)] = "GSR";
  names_[index_of(Channel::kResp)] = "RESP";
  names_[index_of(Channel::kBvp)] = "BVP";
  names_[index_of(Channel::kTemp)] = "TEMP";
}

const ChannelMap& ChannelMap::canonical() {
  static const ChannelMap map;
  return map;
}

std::size_t ChannelMap::index(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw input_error("unknown channel '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

SubjectRecord::SubjectRecord(std::string subject_id, std::vector<float> signals,
                             std::vector<TrialRatings> ratings)
    : id_(std::move(subject_id)), signals_(std::move(signals)), ratings_(std::move(ratings)) {
  if (signals_.size() != kTrials * kChannels * kSamples) {
    throw input_error(id_ + ": expected " + std::to_string(kTrials * kChannels * kSamples) + " samples, got " +
                      std::to_string(signals_.size()));
  }
  if (ratings_.size() != kTrials) {
    throw input_error(id_ + ": expected " + std::to_string(kTrials) + " rating rows, got " +
                      std::to_string(ratings_.size()));
  }
  for (std::size_t i = 0; i < signals_.size(); ++i) {
    if (!std::isfinite(signals_[i])) {
      const std::size_t trial = i / (kChannels * kSamples);
      const std::size_t ch = (i / kSamples) % kChannels;
      throw input_error(id_ + ": non-finite sample at trial " + std::to_string(trial) + ", channel " +
                        std::to_string(ch) + ", sample " + std::to_string(i % kSamples));
    }
  }
  for (std::size_t t = 0; t < kTrials; ++t) {
    for (float r : ratings_[t]) {
      if (!std::isfinite(r) || r < 1.0f || r > 9.0f) {
        throw input_error(id_ + ": rating " + std::to_string(r) + " of trial " + std::to_string(t + 1) +
                          " outside [1,9]");
      }
    }
  }
}

std::span<const float> SubjectRecord::channel(std::size_t trial, std::size_t channel) const {
  if (trial >= kTrials || channel >= kChannels) throw std::out_of_range("trial/channel index");
  return std::span<const float>(signals_).subspan((trial * kChannels + channel) * kSamples, kSamples);
}

std::vector<Window> windows_of(std::size_t trial_idx) {
  std::vector<Window> out(kWindowsPerTrial);
  for (std::size_t w = 0; w < kWindowsPerTrial; ++w) out[w] = Window{trial_idx, w};
  return out;
}

Manifest read_manifest(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw input_error("manifest not found: " + manifest_path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw input_error("manifest " + manifest_path.string() + ": " + e.what());
  }
  try {
    Manifest m;
    m.fs = j.at("fs").get<double>();
    if (m.fs != kFs) throw input_error("manifest fs must be 128");
    if (j.at("trials").get<std::size_t>() != kTrials || j.at("channels").get<std::size_t>() != kChannels ||
        j.at("samples").get<std::size_t>() != kSamples) {
      throw input_error("manifest shape must be 40 trials x 40 channels x 8064 samples");
    }
    m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    if (m.channel_names.size() != kChannels) throw input_error("manifest must list 40 channel names");
    std::unordered_set<std::string> seen(m.channel_names.begin(), m.channel_names.end());
    if (seen.size() != kChannels) throw input_error("manifest channel names are not unique");
    for (const auto& s : j.at("subjects")) {
      m.subjects.push_back({s.at("id").get<std::string>(), s.at("signals").get<std::string>(),
                            s.at("labels").get<std::string>()});
    }
    if (m.subjects.empty()) throw input_error("manifest lists no subjects");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw input_error("manifest " + manifest_path.string() + ": " + e.what());
  }
}

std::vector<TrialRatings> read_labels_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw input_error(path.string() + ": empty labels file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "trial,valence,arousal,dominance,liking") {
    throw input_error(path.string() + ": unexpected header '" + line + "'");
  }
  std::vector<TrialRatings> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      cells.push_back(rest.substr(0, pos));
    }
    cells.push_back(rest);
    if (cells.size() != 5) throw input_error(path.string() + ": expected 5 columns in '" + line + "'");
    if (parse_int(cells[0]) != static_cast<long long>(out.size() + 1)) {
      throw input_error(path.string() + ": trial ids must run 1..40 in order");
    }
    TrialRatings r{};
    for (std::size_t k = 0; k < kRatings; ++k) r[k] = static_cast<float>(parse_double(cells[k + 1]));
    out.push_back(r);
  }
  if (out.size() != kTrials) {
    throw input_error(path.string() + ": expected 40 rows, got " + std::to_string(out.size()));
  }
  return out;
}

std::string labels_csv(const std::vector<TrialRatings>& ratings) {
  std::string s = "trial,valence,arousal,dominance,liking\n";
  for (std::size_t t = 0; t < ratings.size(); ++t) {
    s += std::to_string(t + 1);
    for (float r : ratings[t]) {
      s += ',';
      s += format_double(r);
    }
    s += '\n';
  }
  return s;
}

SubjectRecord load_subject(const std::string& id, const std::filesystem::path& signals_path,
                           const std::filesystem::path& labels_path) {
  if (!std::filesystem::exists(signals_path)) throw input_error("missing signal file " + signals_path.string());
  const auto bytes = std::filesystem::file_size(signals_path);
  if (bytes != kSignalBytes) {
    throw input_error(signals_path.string() + ": size mismatch, expected " + std::to_string(kSignalBytes) +
                      " bytes, got " + std::to_string(bytes));
  }
  std::vector<float> signals(kTrials * kChannels * kSamples);
  std::ifstream in(signals_path, std::ios::binary);
  in.read(reinterpret_cast<char*>(signals.data()), static_cast<std::streamsize>(kSignalBytes));
  if (!in) throw input_error("short read on " + signals_path.string());
  return SubjectRecord(id, std::move(signals), read_labels_csv(labels_path));
}

std::vector<SubjectRecord> load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<SubjectRecord> out;
  out.reserve(m.subjects.size());
  for (const auto& s : m.subjects) out.push_back(load_subject(s.id, base / s.signals, base / s.labels));
  return out;
}

void write_dataset(const std::filesystem::path& out_dir, std::span<const SubjectRecord> records) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["fs"] = static_cast<int>(kFs);
  manifest["trials"] = kTrials;
  manifest["channels"] = kChannels;
  manifest["samples"] = kSamples;
  manifest["channel_names"] = ChannelMap::canonical().names();
  manifest["subjects"] = nlohmann::json::array();
  for (const auto& rec : records) {
    const std::string sig = rec.subject_id() + ".f32";
    const std::string lab = rec.subject_id() + "_labels.csv";
    const auto data = rec.signals();
    write_file_atomic(out_dir / sig,
                      std::string_view(reinterpret_cast<const char*>(data.data()), data.size_bytes()));
    write_file_atomic(out_dir / lab, labels_csv(rec.ratings()));
    manifest["subjects"].push_back({{"id", rec.subject_id()}, {"signals", sig}, {"labels", lab}});
  }
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace emorf::corpus
