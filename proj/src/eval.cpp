#include "emorf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "emorf/common.hpp"

namespace emorf::eval {

namespace {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(stream * 0x100000001b3ULL + index));
}

constexpr std::uint64_t kFoldStream = 1;
constexpr std::uint64_t kSubjectStream = 2;

std::vector<int> row_labels(const features::FeatureMatrix& m, labels::LabelMode mode) {
  return labels::label_all(m.ratings, mode);
}

std::vector<int> class_ids(labels::LabelMode mode) {
  std::vector<int> c(static_cast<std::size_t>(labels::class_count(mode)));
  std::iota(c.begin(), c.end(), 1);
  return c;
}

/// Fits a classifier on `train` rows, or a constant one when the rows hold a single class.
std::unique_ptr<forest::Classifier> train_on(const features::FeatureMatrix& m, std::span<const int> y_all,
                                             std::span<const std::size_t> train, const ClassifierFactory& make,
                                             std::uint64_t seed, bool& single_class) {
  std::vector<int> y;
  y.reserve(train.size());
  for (std::size_t r : train) y.push_back(y_all[r]);
  single_class = std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
  if (single_class) {
    if (y.empty()) throw std::invalid_argument("empty training fold");
    return std::make_unique<forest::ConstantClassifier>(y.front());
  }
  const auto buf = gather_rows(m, train);
  auto clf = make(seed);
  clf->fit(forest::MatrixView(buf, train.size(), m.n_features), y);
  return clf;
}

std::vector<int> predict_rows(const forest::Classifier& clf, const features::FeatureMatrix& m,
                              std::span<const std::size_t> rows) {
  const auto buf = gather_rows(m, rows);
  return clf.predict(forest::MatrixView(buf, rows.size(), m.n_features));
}

void score_fold(FoldResult& fold, std::span<const int> predicted, std::span<const int> actual) {
  std::vector<double> indicator(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) indicator[i] = predicted[i] == actual[i] ? 0.0 : 100.0;
  const auto s = summarize(indicator);
  fold.error = s.mean;
  fold.error_std = s.std;
}

void finish_summaries(CvReport& report) {
  std::vector<double> errors;
  std::vector<double> stds;
  for (const auto& f : report.folds) {
    errors.push_back(f.error);
    stds.push_back(f.error_std);
    if (f.single_class) report.flagged_folds.push_back(f.index);
  }
  if (!errors.empty()) {
    report.fold_error_summary = summarize(errors);
    report.fold_std_summary = summarize(stds);
  }
}

/// Majority label per trial of the given rows, compared to that trial's label.
std::vector<VideoVerdict> truncate_by_trial(const features::FeatureMatrix& m, std::span<const std::size_t> rows,
                                            std::span<const int> predicted, std::span<const int> y_all) {
  std::map<std::pair<std::uint32_t, std::uint16_t>, std::vector<std::size_t>> by_video;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& k = m.keys[rows[i]];
    by_video[{k.subject, k.trial}].push_back(i);
  }
  std::vector<VideoVerdict> out;
  for (const auto& [video, idx] : by_video) {
    std::vector<int> p;
    for (std::size_t i : idx) p.push_back(predicted[i]);
    out.push_back({m.subjects[video.first], video.second, truncate_votes(p), y_all[rows[idx.front()]]});
  }
  return out;
}

TruncationReport make_truncation(std::vector<VideoVerdict> verdicts) {
  TruncationReport t;
  t.verdicts = std::move(verdicts);
  if (t.verdicts.empty()) return t;
  const auto wrong = std::count_if(t.verdicts.begin(), t.verdicts.end(),
                                   [](const VideoVerdict& v) { return v.predicted != v.actual; });
  t.error = 100.0 * static_cast<double>(wrong) / static_cast<double>(t.verdicts.size());
  t.accuracy = 100.0 - t.error;
  return t;
}

double truncated_error_of(std::span<const VideoVerdict> v) {
  if (v.empty()) return 0.0;
  const auto wrong = std::count_if(v.begin(), v.end(), [](const VideoVerdict& x) { return x.predicted != x.actual; });
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(v.size());
}

}  // namespace

// --- Statistics ----------------------------------------------------------------------

nlohmann::json Summary::to_json() const {
  return {{"mean", mean}, {"median", median}, {"std", std}, {"min", min}, {"max", max}};
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty input");
  Summary s;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  // A constant input must come back exactly.
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    s.mean = values.front();
  }
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(acc / (n - 1.0));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

std::vector<HistogramBin> histogram(std::span<const double> percentages) {
  std::vector<HistogramBin> bins(10);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lo = 10.0 * static_cast<double>(b);
    bins[b].hi = bins[b].lo + 10.0;
  }
  for (double v : percentages) {
    if (!(v >= 0.0 && v <= 100.0)) throw std::invalid_argument("histogram: value outside [0,100]");
    const auto b = std::min<std::size_t>(static_cast<std::size_t>(std::floor(v / 10.0)), 9);
    ++bins[b].count;
  }
  return bins;
}

std::string histogram_csv(std::span<const HistogramBin> bins) {
  std::string s = "bin_lo,bin_hi,count\n";
  for (const auto& b : bins) {
    s += format_double(b.lo) + "," + format_double(b.hi) + "," + std::to_string(b.count) + "\n";
  }
  return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: need equal lengths >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw degenerate_error("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// --- Neighbor graph ----------------------------------------------------------------------

nlohmann::json NeighborGraph::to_json() const {
  nlohmann::json j;
  j["subjects"] = subjects;
  j["threshold"] = threshold;
  auto rho_json = nlohmann::json::array();
  for (const auto& row : rho) {
    auto r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    rho_json.push_back(std::move(r));
  }
  j["rho"] = std::move(rho_json);
  j["adjacency"] = adjacency;
  auto fb = nlohmann::json::array();
  for (const auto& [a, b] : fallback_edges) fb.push_back({a, b});
  j["fallback_edges"] = std::move(fb);
  return j;
}

NeighborGraph build_neighbor_graph(const std::vector<std::vector<double>>& ratings, double rho_threshold,
                                   std::vector<std::string> subjects) {
  const std::size_t n = ratings.size();
  NeighborGraph g;
  if (subjects.empty()) {
    for (std::size_t i = 0; i < n; ++i) subjects.push_back("s" + std::to_string(i + 1));
  }
  if (subjects.size() != n) throw std::invalid_argument("build_neighbor_graph: subject name count mismatch");
  g.subjects = std::move(subjects);
  g.threshold = rho_threshold;
  g.rho.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t i = 0; i < n; ++i) {
    g.rho[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      try {
        g.rho[i][j] = g.rho[j][i] = pearson(ratings[i], ratings[j]);
      } catch (const degenerate_error&) {
        // Undefined correlation: the pair is excluded.
      }
    }
  }
  std::vector<std::vector<bool>> edge(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && g.rho[i][j] > rho_threshold) edge[i][j] = true;
    }
  }
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    if (std::any_of(edge[i].begin(), edge[i].end(), [](bool b) { return b; })) continue;
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double r = g.rho[i][j];
      const double rb = g.rho[i][best];
      if (!std::isnan(r) && (std::isnan(rb) || r > rb)) best = j;
    }
    edge[i][best] = edge[best][i] = true;
    g.fallback_edges.emplace_back(i, best);
  }
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (edge[i][j]) g.adjacency[i].push_back(j);
    }
  }
  return g;
}

std::vector<std::vector<double>> subject_rating_vectors(const features::FeatureMatrix& m, corpus::Rating dim) {
  std::vector<std::vector<double>> out(m.subjects.size(), std::vector<double>(corpus::kTrials, 0.0));
  std::vector<std::vector<bool>> seen(m.subjects.size(), std::vector<bool>(corpus::kTrials, false));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& k = m.keys[r];
    out[k.subject][k.trial] = m.ratings[r][static_cast<std::size_t>(dim)];
    seen[k.subject][k.trial] = true;
  }
  for (const auto& s : seen) {
    if (std::find(s.begin(), s.end(), false) != s.end()) {
      throw input_error("subject_rating_vectors: every subject needs all 40 trials");
    }
  }
  return out;
}

// --- Folds ----------------------------------------------------------------------------------

std::vector<Fold> kfold_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (k > n) throw std::invalid_argument("kfold: k exceeds the number of rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<Fold> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].test.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                         order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].test.begin(), folds[f].test.end());
    pos += size;
  }
  for (auto& f : folds) {
    std::vector<bool> in_test(n, false);
    for (std::size_t r : f.test) in_test[r] = true;
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_test[r]) f.train.push_back(r);
    }
  }
  return folds;
}

std::vector<Fold> loto_folds(const features::FeatureMatrix& m) {
  std::map<std::uint16_t, std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.keys[r].subject != m.keys.front().subject) {
      throw std::invalid_argument("loto_folds: matrix must hold a single subject");
    }
    rows_of[m.keys[r].trial].push_back(r);
  }
  std::vector<Fold> folds;
  for (const auto& [trial, test] : rows_of) {
    Fold f;
    f.test = test;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.keys[r].trial != trial) f.train.push_back(r);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<Fold> loso_folds(const features::FeatureMatrix& m) {
  std::vector<Fold> folds(m.subjects.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t s = 0; s < folds.size(); ++s) {
      (m.keys[r].subject == s ? folds[s].test : folds[s].train).push_back(r);
    }
  }
  return folds;
}

std::vector<double> gather_rows(const features::FeatureMatrix& m, std::span<const std::size_t> rows) {
  std::vector<double> buf;
  buf.reserve(rows.size() * m.n_features);
  for (std::size_t r : rows) {
    const auto v = m.row(r);
    buf.insert(buf.end(), v.begin(), v.end());
  }
  return buf;
}

// --- Voting -----------------------------------------------------------------------------------

int truncate_votes(std::span<const int> predictions) {
  if (predictions.empty()) throw std::invalid_argument("truncate_votes: no predictions");
  std::map<int, std::size_t> votes;
  for (int p : predictions) ++votes[p];
  int best = votes.begin()->first;
  std::size_t best_n = 0;
  for (const auto& [cls, n] : votes) {
    if (n > best_n) {
      best = cls;
      best_n = n;
    }
  }
  return best;
}

std::vector<int> majority_vote(const std::vector<std::vector<int>>& predictions) {
  if (predictions.empty()) throw std::invalid_argument("majority_vote: no predictors");
  const std::size_t n = predictions.front().size();
  std::vector<int> out(n);
  std::vector<int> column(predictions.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t p = 0; p < predictions.size(); ++p) column[p] = predictions[p].at(r);
    out[r] = truncate_votes(column);
  }
  return out;
}

// --- Reports -------------------------------------------------------------------------------------

nlohmann::json TruncationReport::to_json() const {
  auto v = nlohmann::json::array();
  for (const auto& x : verdicts) {
    v.push_back({{"subject", x.subject}, {"trial", x.trial}, {"predicted", x.predicted}, {"actual", x.actual}});
  }
  return {{"error", error}, {"accuracy", accuracy}, {"videos", std::move(v)}};
}

nlohmann::json CvReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  auto folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    nlohmann::json jf{{"index", f.index},     {"label", f.label},         {"n_train", f.n_train},
                      {"n_test", f.n_test},   {"error", f.error},         {"error_std", f.error_std},
                      {"single_class", f.single_class}};
    if (f.truncated_error) jf["truncated_error"] = *f.truncated_error;
    folds_json.push_back(std::move(jf));
  }
  j["folds"] = std::move(folds_json);
  j["fold_error_summary"] = fold_error_summary.to_json();
  j["fold_std_summary"] = fold_std_summary.to_json();
  auto subj = nlohmann::json::array();
  for (const auto& s : subjects) {
    nlohmann::json js{{"subject", s.subject}, {"window_error", s.window_error}, {"fold_errors", s.fold_errors.to_json()}};
    if (s.truncated_error) js["truncated_error"] = *s.truncated_error;
    subj.push_back(std::move(js));
  }
  j["subjects"] = std::move(subj);
  j["confusion"] = confusion.to_json();
  j["flagged_folds"] = flagged_folds;
  return j;
}

// --- Protocols --------------------------------------------------------------------------------------

CvReport kfold_cv(const forest::MatrixView& x, std::span<const int> y, std::size_t k, const ClassifierFactory& make,
                  const RunOptions& opts) {
  if (y.size() != x.rows()) throw std::invalid_argument("kfold_cv: label count mismatch");
  const auto folds = kfold_folds(x.rows(), k, opts.seed);
  std::vector<int> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  CvReport report;
  report.protocol = "kfold";
  report.folds.resize(folds.size());
  std::vector<std::vector<int>> predictions(folds.size());
  parallel_for(folds.size(), opts.workers, [&](std::size_t f) {
    const auto& fold = folds[f];
    std::vector<double> train_buf;
    std::vector<int> y_train;
    for (std::size_t r : fold.train) {
      const auto row = x.row(r);
      train_buf.insert(train_buf.end(), row.begin(), row.end());
      y_train.push_back(y[r]);
    }
    std::vector<double> test_buf;
    std::vector<int> y_test;
    for (std::size_t r : fold.test) {
      const auto row = x.row(r);
      test_buf.insert(test_buf.end(), row.begin(), row.end());
      y_test.push_back(y[r]);
    }
    FoldResult& res = report.folds[f];
    res.index = f;
    res.label = std::to_string(f + 1);
    res.n_train = fold.train.size();
    res.n_test = fold.test.size();
    res.single_class = std::adjacent_find(y_train.begin(), y_train.end(), std::not_equal_to<>()) == y_train.end();
    std::unique_ptr<forest::Classifier> clf;
    if (res.single_class) {
      clf = std::make_unique<forest::ConstantClassifier>(y_train.front());
    } else {
      clf = make(derive_seed(opts.seed, kFoldStream, f));
      clf->fit(forest::MatrixView(train_buf, fold.train.size(), x.cols()), y_train);
    }
    predictions[f] = clf->predict(forest::MatrixView(test_buf, fold.test.size(), x.cols()));
    score_fold(res, predictions[f], y_test);
  });

  report.confusion = forest::ConfusionMatrix(classes);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t i = 0; i < folds[f].test.size(); ++i) {
      if (!std::binary_search(classes.begin(), classes.end(), predictions[f][i])) continue;
      report.confusion.add(y[folds[f].test[i]], predictions[f][i]);
    }
  }
  finish_summaries(report);
  return report;
}

LotoResult loto_cv(const features::FeatureMatrix& subject, labels::LabelMode mode, const ClassifierFactory& make,
                   const RunOptions& opts) {
  const auto folds = loto_folds(subject);
  const auto y = row_labels(subject, mode);

  LotoResult out;
  out.cv.protocol = "loto";
  out.cv.folds.resize(folds.size());
  std::vector<std::vector<int>> predictions(folds.size());
  std::vector<VideoVerdict> verdicts(folds.size());

  parallel_for(folds.size(), opts.workers, [&](std::size_t f) {
    const auto& fold = folds[f];
    FoldResult& res = out.cv.folds[f];
    res.index = f;
    res.label = "trial " + std::to_string(subject.keys[fold.test.front()].trial + 1);
    res.n_train = fold.train.size();
    res.n_test = fold.test.size();
    const auto clf = train_on(subject, y, fold.train, make, derive_seed(opts.seed, kFoldStream, f), res.single_class);
    predictions[f] = predict_rows(*clf, subject, fold.test);
    std::vector<int> actual;
    for (std::size_t r : fold.test) actual.push_back(y[r]);
    score_fold(res, predictions[f], actual);
    const auto v = truncate_by_trial(subject, fold.test, predictions[f], y);
    verdicts[f] = v.front();
    res.truncated_error = truncated_error_of(v);
  });

  out.cv.confusion = forest::ConfusionMatrix(class_ids(mode));
  std::size_t wrong = 0;
  std::size_t total = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t i = 0; i < folds[f].test.size(); ++i) {
      out.cv.confusion.add(y[folds[f].test[i]], predictions[f][i]);
      wrong += predictions[f][i] != y[folds[f].test[i]] ? 1 : 0;
      ++total;
    }
  }
  finish_summaries(out.cv);
  out.truncation = make_truncation(std::move(verdicts));

  SubjectResult sr;
  sr.subject = subject.subjects.front();
  sr.window_error = total == 0 ? 0.0 : 100.0 * static_cast<double>(wrong) / static_cast<double>(total);
  sr.truncated_error = out.truncation.error;
  sr.fold_errors = out.cv.fold_error_summary;
  out.cv.subjects.push_back(sr);
  return out;
}

LosoResult loso_cv(const features::FeatureMatrix& all, labels::LabelMode mode, const ClassifierFactory& make,
                   LosoScope scope, const NeighborGraph* graph, const RunOptions& opts) {
  const std::size_t n_subjects = all.subjects.size();
  if (n_subjects < 2) throw std::invalid_argument("loso_cv: need at least 2 subjects");
  if (scope != LosoScope::kAll) {
    if (graph == nullptr || graph->adjacency.size() != n_subjects) {
      throw std::invalid_argument("loso_cv: neighbour scope needs a graph over the same subjects");
    }
    for (const auto& adj : graph->adjacency) {
      if (adj.empty()) throw std::invalid_argument("loso_cv: subject without neighbours");
    }
  }
  const auto folds = loso_folds(all);
  const auto y = row_labels(all, mode);

  // Personalized models, one per subject that neighbours someone.
  std::vector<std::unique_ptr<forest::Classifier>> personal(n_subjects);
  if (scope == LosoScope::kNeighbors) {
    std::vector<bool> needed(n_subjects, false);
    for (const auto& adj : graph->adjacency) {
      for (std::size_t j : adj) needed[j] = true;
    }
    parallel_for(n_subjects, opts.workers, [&](std::size_t s) {
      if (!needed[s]) return;
      bool single = false;
      personal[s] = train_on(all, y, folds[s].test, make, derive_seed(opts.seed, kSubjectStream, s), single);
    });
  }

  LosoResult out;
  out.cv.protocol = scope == LosoScope::kAll ? "loso" : scope == LosoScope::kNeighbors ? "loso-neighbors"
                                                                                         : "loso-neighbors-pooled";
  out.cv.folds.resize(n_subjects);
  std::vector<std::vector<int>> predictions(n_subjects);
  std::vector<std::vector<VideoVerdict>> verdicts(n_subjects);

  parallel_for(n_subjects, opts.workers, [&](std::size_t s) {
    const auto& test = folds[s].test;
    FoldResult& res = out.cv.folds[s];
    res.index = s;
    res.label = all.subjects[s];
    res.n_test = test.size();
    if (scope == LosoScope::kNeighbors) {
      std::vector<std::vector<int>> votes;
      for (std::size_t j : graph->adjacency[s]) {
        votes.push_back(predict_rows(*personal[j], all, test));
        res.n_train += folds[j].test.size();
      }
      predictions[s] = majority_vote(votes);
    } else {
      std::vector<std::size_t> train;
      if (scope == LosoScope::kAll) {
        train = folds[s].train;
      } else {
        for (std::size_t j : graph->adjacency[s]) train.insert(train.end(), folds[j].test.begin(), folds[j].test.end());
        std::sort(train.begin(), train.end());
      }
      res.n_train = train.size();
      const auto clf = train_on(all, y, train, make, derive_seed(opts.seed, kFoldStream, s), res.single_class);
      predictions[s] = predict_rows(*clf, all, test);
    }
    std::vector<int> actual;
    for (std::size_t r : test) actual.push_back(y[r]);
    score_fold(res, predictions[s], actual);
    verdicts[s] = truncate_by_trial(all, test, predictions[s], y);
    res.truncated_error = truncated_error_of(verdicts[s]);
  });

  out.cv.confusion = forest::ConfusionMatrix(class_ids(mode));
  std::vector<VideoVerdict> all_verdicts;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    for (std::size_t i = 0; i < folds[s].test.size(); ++i) out.cv.confusion.add(y[folds[s].test[i]], predictions[s][i]);
    SubjectResult sr;
    sr.subject = all.subjects[s];
    sr.window_error = out.cv.folds[s].error;
    sr.truncated_error = out.cv.folds[s].truncated_error;
    const double e = sr.window_error;
    sr.fold_errors = summarize(std::span<const double>(&e, 1));
    out.cv.subjects.push_back(sr);
    all_verdicts.insert(all_verdicts.end(), verdicts[s].begin(), verdicts[s].end());
  }
  finish_summaries(out.cv);
  out.truncation = make_truncation(std::move(all_verdicts));
  return out;
}

}  // namespace emorf::eval
