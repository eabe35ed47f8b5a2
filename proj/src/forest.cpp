#include "emorf/forest.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "emorf/common.hpp"

namespace emorf::forest {

MatrixView::MatrixView(std::span<const double> values, std::size_t rows, std::size_t cols)
    : values_(values), rows_(rows), cols_(cols) {
  if (values.size() != rows * cols) throw std::invalid_argument("MatrixView: size does not match rows x cols");
}

// --- Params --------------------------------------------------------------------

nlohmann::json ForestParams::to_json() const {
  nlohmann::json j;
  j["n_trees"] = n_trees;
  j["mtry"] = mtry;
  j["min_node_size"] = min_node_size;
  j["seed"] = seed;
  j["bootstrap"] = bootstrap;
  if (sampsize) {
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [cls, n] : *sampsize) s[std::to_string(cls)] = n;
    j["sampsize"] = s;
  } else {
    j["sampsize"] = nullptr;
  }
  return j;
}

ForestParams ForestParams::from_json(const nlohmann::json& j) {
  ForestParams p;
  p.n_trees = j.at("n_trees").get<std::size_t>();
  p.mtry = j.at("mtry").get<std::size_t>();
  p.min_node_size = j.at("min_node_size").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.bootstrap = j.at("bootstrap").get<bool>();
  if (j.contains("sampsize") && !j.at("sampsize").is_null()) {
    std::map<int, std::size_t> s;
    for (const auto& [k, v] : j.at("sampsize").items()) s[std::stoi(k)] = v.get<std::size_t>();
    p.sampsize = std::move(s);
  }
  return p;
}

// --- Confusion matrix -------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<int> classes)
    : classes_(std::move(classes)), counts_(classes_.size(), std::vector<std::uint64_t>(classes_.size(), 0)) {}

ConfusionMatrix ConfusionMatrix::from_counts(std::vector<int> classes, std::vector<std::vector<std::uint64_t>> counts) {
  if (counts.size() != classes.size()) throw std::invalid_argument("confusion counts: row count mismatch");
  for (const auto& row : counts) {
    if (row.size() != classes.size()) throw std::invalid_argument("confusion counts: column count mismatch");
  }
  ConfusionMatrix cm(std::move(classes));
  cm.counts_ = std::move(counts);
  return cm;
}

std::size_t ConfusionMatrix::index_of(int class_id) const {
  auto it = std::find(classes_.begin(), classes_.end(), class_id);
  if (it == classes_.end()) throw std::invalid_argument("confusion matrix: unknown class " + std::to_string(class_id));
  return static_cast<std::size_t>(it - classes_.begin());
}

void ConfusionMatrix::add(int observed, int estimated, std::uint64_t n) {
  counts_[index_of(observed)][index_of(estimated)] += n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t observed_idx) const {
  const auto& row = counts_.at(observed_idx);
  return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < classes_.size(); ++i) t += row_sum(i);
  return t;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t c = 0;
  for (std::size_t i = 0; i < classes_.size(); ++i) c += counts_[i][i];
  return c;
}

double ConfusionMatrix::class_error(std::size_t observed_idx) const {
  const auto n = row_sum(observed_idx);
  if (n == 0) return 0.0;
  return 1.0 - static_cast<double>(counts_[observed_idx][observed_idx]) / static_cast<double>(n);
}

double ConfusionMatrix::overall_error() const {
  const auto n = total();
  if (n == 0) return 0.0;
  return 1.0 - static_cast<double>(correct()) / static_cast<double>(n);
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json j;
  j["classes"] = classes_;
  j["counts"] = counts_;
  std::vector<double> errors;
  for (std::size_t i = 0; i < classes_.size(); ++i) errors.push_back(class_error(i));
  j["class_errors"] = errors;
  j["overall_error"] = overall_error();
  return j;
}

// --- Impurity ------------------------------------------------------------------------

double gini_impurity(std::span<const std::size_t> class_counts) {
  const std::size_t n = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  if (n == 0) throw std::invalid_argument("gini_impurity: empty node");
  double sum_sq = 0.0;
  for (std::size_t c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

std::map<int, std::size_t> class_counts(std::span<const int> y) {
  std::map<int, std::size_t> out;
  for (int c : y) ++out[c];
  return out;
}

std::map<int, std::size_t> stratified_sampsize(const std::map<int, std::size_t>& counts, double ratio) {
  if (counts.empty()) return {};
  std::size_t smallest = counts.begin()->second;
  for (const auto& [cls, n] : counts) smallest = std::min(smallest, n);
  const auto cap = static_cast<std::size_t>(ratio * static_cast<double>(smallest));
  std::map<int, std::size_t> out;
  for (const auto& [cls, n] : counts) out[cls] = std::min(n, cap);
  return out;
}

// --- Tree growing ----------------------------------------------------------------------

int Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].leaf_class;
}

namespace {

using Wide = __int128;

/// Weighted Gini split quality sum_c L_c^2 / nL + sum_c R_c^2 / nR kept as an
/// exact fraction. Maximizing it maximizes the impurity decrease.
struct SplitScore {
  Wide num = 0;
  Wide den = 1;

  bool better_than(const SplitScore& o) const { return num * o.den > o.num * den; }
};

SplitScore make_score(std::uint64_t sum_sq_left, std::uint64_t n_left, std::uint64_t sum_sq_right,
                      std::uint64_t n_right) {
  return {static_cast<Wide>(sum_sq_left) * n_right + static_cast<Wide>(sum_sq_right) * n_left,
          static_cast<Wide>(n_left) * n_right};
}

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  // Adjacent doubles can round the midpoint onto `hi`.
  return mid < hi ? mid : lo;
}

std::size_t majority(std::span<const std::size_t> counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

class TreeGrower {
 public:
  TreeGrower(const MatrixView& x, std::span<const std::size_t> y_idx, std::span<const int> classes,
             const ForestParams& params, Rng& rng, std::vector<double>& importance)
      : x_(x), y_(y_idx), classes_(classes), params_(params), rng_(rng), importance_(importance),
        features_(x.cols()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree grow(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    Tree tree;
    tree.nodes.emplace_back();
    struct Pending {
      std::size_t node, begin, end;
    };
    std::vector<Pending> stack{{0, 0, samples_.size()}};
    std::vector<std::size_t> counts(classes_.size());
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();

      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = p.begin; i < p.end; ++i) ++counts[y_[samples_[i]]];
      const std::size_t n = p.end - p.begin;
      const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;

      std::optional<Split> split;
      if (!pure && n > params_.min_node_size) split = best_split(p.begin, p.end, counts);
      if (!split) {
        auto& leaf = tree.nodes[p.node];
        leaf.leaf_class = classes_[majority(counts)];
        leaf.count = n;
        continue;
      }

      importance_[split->feature] += split->decrease;
      auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                   samples_.begin() + static_cast<std::ptrdiff_t>(p.end), [&](std::size_t s) {
                                     return x_.at(s, split->feature) <= split->threshold;
                                   });
      const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());

      const auto left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[p.node];
      node.feature = static_cast<int>(split->feature);
      node.threshold = split->threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({static_cast<std::size_t>(left + 1), mid, p.end});
      stack.push_back({static_cast<std::size_t>(left), p.begin, mid});
    }
    return tree;
  }

 private:
  struct Split {
    std::size_t feature;
    double threshold;
    double decrease;
  };

  std::vector<std::size_t> sample_features() {
    const std::size_t f = features_.size();
    const std::size_t m = params_.mtry;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.below(f - i));
      std::swap(features_[i], features_[j]);
    }
    std::vector<std::size_t> chosen(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  std::optional<Split> best_split(std::size_t begin, std::size_t end, std::span<const std::size_t> node_counts) {
    const std::size_t n = end - begin;
    const std::size_t k = classes_.size();
    std::uint64_t node_sum_sq = 0;
    for (std::size_t c : node_counts) node_sum_sq += static_cast<std::uint64_t>(c) * c;

    std::optional<Split> best;
    SplitScore best_score;
    std::vector<std::size_t> left(k);
    std::vector<std::size_t> right(k);

    for (std::size_t f : sample_features()) {
      pairs_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t s = samples_[i];
        pairs_.emplace_back(x_.at(s, f), y_[s]);
      }
      std::sort(pairs_.begin(), pairs_.end());
      if (pairs_.front().first == pairs_.back().first) continue;

      std::fill(left.begin(), left.end(), 0);
      std::copy(node_counts.begin(), node_counts.end(), right.begin());
      std::uint64_t sum_sq_left = 0;
      std::uint64_t sum_sq_right = node_sum_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t c = pairs_[i].second;
        sum_sq_left += 2 * left[c] + 1;
        sum_sq_right -= 2 * right[c] - 1;
        ++left[c];
        --right[c];
        if (!(pairs_[i].first < pairs_[i + 1].first)) continue;
        const std::uint64_t n_left = i + 1;
        const std::uint64_t n_right = n - n_left;
        const SplitScore score = make_score(sum_sq_left, n_left, sum_sq_right, n_right);
        if (!best || score.better_than(best_score)) {
          best_score = score;
          const double decrease = static_cast<double>(sum_sq_left) / static_cast<double>(n_left) +
                                  static_cast<double>(sum_sq_right) / static_cast<double>(n_right) -
                                  static_cast<double>(node_sum_sq) / static_cast<double>(n);
          best = Split{f, midpoint(pairs_[i].first, pairs_[i + 1].first), std::max(decrease, 0.0)};
        }
      }
    }
    return best;
  }

  const MatrixView& x_;
  std::span<const std::size_t> y_;
  std::span<const int> classes_;
  const ForestParams& params_;
  Rng& rng_;
  std::vector<double>& importance_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, std::size_t>> pairs_;
};

}  // namespace

ForestModel fit(const MatrixView& x, std::span<const int> y, const ForestParams& params, unsigned workers) {
  const std::size_t n = x.rows();
  const std::size_t nf = x.cols();
  if (y.size() != n) throw std::invalid_argument("fit: label count does not match rows");
  if (n < 2) throw std::invalid_argument("fit: need at least 2 samples");
  if (nf < 1) throw std::invalid_argument("fit: need at least 1 feature");
  if (params.n_trees < 1) throw std::invalid_argument("fit: n_trees must be >= 1");
  if (params.mtry < 1 || params.mtry > nf) {
    throw std::invalid_argument("fit: mtry " + std::to_string(params.mtry) + " outside [1, " + std::to_string(nf) +
                                "]");
  }
  const auto counts = class_counts(y);
  if (counts.size() < 2) throw std::invalid_argument("fit: training data contains a single class");

  ForestModel model;
  model.params_ = params;
  model.n_features_ = nf;
  model.n_samples_ = n;
  for (const auto& [cls, c] : counts) model.classes_.push_back(cls);

  std::vector<std::size_t> y_idx(n);
  std::vector<std::vector<std::size_t>> rows_of_class(model.classes_.size());
  for (std::size_t i = 0; i < n; ++i) {
    y_idx[i] = static_cast<std::size_t>(std::lower_bound(model.classes_.begin(), model.classes_.end(), y[i]) -
                                        model.classes_.begin());
    rows_of_class[y_idx[i]].push_back(i);
  }

  std::vector<std::size_t> per_class_draws;
  if (params.sampsize) {
    for (const auto& [cls, want] : *params.sampsize) {
      if (!counts.contains(cls)) throw std::invalid_argument("fit: sampsize names absent class " + std::to_string(cls));
    }
    for (std::size_t c = 0; c < model.classes_.size(); ++c) {
      auto it = params.sampsize->find(model.classes_[c]);
      if (it == params.sampsize->end()) {
        throw std::invalid_argument("fit: sampsize missing class " + std::to_string(model.classes_[c]));
      }
      if (!params.bootstrap && it->second > rows_of_class[c].size()) {
        throw std::invalid_argument("fit: sampsize exceeds class population without replacement");
      }
      per_class_draws.push_back(it->second);
    }
  }

  model.trees_.resize(params.n_trees);
  model.inbag_.assign(params.n_trees * n, 0);
  std::vector<std::vector<double>> importance(params.n_trees, std::vector<double>(nf, 0.0));

  parallel_for(params.n_trees, workers, [&](std::size_t t) {
    Rng rng(params.seed ^ static_cast<std::uint64_t>(t));
    std::vector<std::size_t> samples;
    if (params.sampsize) {
      for (std::size_t c = 0; c < rows_of_class.size(); ++c) {
        auto pool = rows_of_class[c];
        const std::size_t draws = per_class_draws[c];
        if (params.bootstrap) {
          for (std::size_t d = 0; d < draws; ++d) samples.push_back(pool[rng.below(pool.size())]);
        } else {
          for (std::size_t d = 0; d < draws; ++d) {
            std::swap(pool[d], pool[d + rng.below(pool.size() - d)]);
            samples.push_back(pool[d]);
          }
        }
      }
    } else if (params.bootstrap) {
      samples.resize(n);
      for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
    } else {
      samples.resize(n);
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    for (std::size_t s : samples) ++model.inbag_[t * n + s];
    if (samples.empty()) throw std::invalid_argument("fit: empty bootstrap sample");

    TreeGrower grower(x, y_idx, model.classes_, params, rng, importance[t]);
    model.trees_[t] = grower.grow(std::move(samples));
  });

  model.importance_.assign(nf, 0.0);
  for (const auto& per_tree : importance) {
    for (std::size_t f = 0; f < nf; ++f) model.importance_[f] += per_tree[f];
  }
  return model;
}

// --- Prediction -------------------------------------------------------------------------

std::vector<std::size_t> ForestModel::votes(std::span<const double> x) const {
  std::vector<std::size_t> v(classes_.size(), 0);
  for (const auto& tree : trees_) {
    const int c = tree.predict(x);
    ++v[static_cast<std::size_t>(std::lower_bound(classes_.begin(), classes_.end(), c) - classes_.begin())];
  }
  return v;
}

int ForestModel::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw std::invalid_argument("predict: expected " + std::to_string(n_features_) + " features, got " +
                                std::to_string(x.size()));
  }
  return classes_[majority(votes(x))];
}

std::vector<int> ForestModel::predict_batch(const MatrixView& x, unsigned workers) const {
  if (x.cols() != n_features_) {
    throw std::invalid_argument("predict_batch: expected " + std::to_string(n_features_) + " features, got " +
                                std::to_string(x.cols()));
  }
  std::vector<int> out(x.rows());
  parallel_for(x.rows(), workers, [&](std::size_t r) { out[r] = classes_[majority(votes(x.row(r)))]; });
  return out;
}

// --- Serialization -------------------------------------------------------------------------

nlohmann::json ForestModel::to_json() const {
  nlohmann::json j;
  j["params"] = params_.to_json();
  j["classes"] = classes_;
  j["n_features"] = n_features_;
  j["registry_version"] = registry_version_;
  j["importance"] = importance_;
  auto trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    auto nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"leaf", node.leaf_class}, {"n", node.count}});
      } else {
        nodes.push_back({{"f", node.feature}, {"t", node.threshold}, {"l", node.left}, {"r", node.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  return j;
}

std::string ForestModel::to_json_string() const { return to_json().dump() + "\n"; }

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  ForestModel m;
  try {
    m.params_ = ForestParams::from_json(j.at("params"));
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.n_features_ = j.at("n_features").get<std::size_t>();
    m.registry_version_ = j.value("registry_version", "");
    if (j.contains("importance")) m.importance_ = j.at("importance").get<std::vector<double>>();
    if (m.importance_.size() != m.n_features_) m.importance_.assign(m.n_features_, 0.0);
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      for (const auto& jn : jt.at("nodes")) {
        TreeNode node;
        if (jn.contains("leaf")) {
          node.leaf_class = jn.at("leaf").get<int>();
          node.count = jn.at("n").get<std::size_t>();
        } else {
          node.feature = jn.at("f").get<int>();
          node.threshold = jn.at("t").get<double>();
          node.left = jn.at("l").get<int>();
          node.right = jn.at("r").get<int>();
        }
        tree.nodes.push_back(node);
      }
      const auto size = static_cast<int>(tree.nodes.size());
      for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        if (node.left <= 0 || node.left >= size || node.right <= 0 || node.right >= size ||
            static_cast<std::size_t>(node.feature) >= m.n_features_) {
          throw input_error("model: malformed tree node");
        }
      }
      if (tree.nodes.empty()) throw input_error("model: empty tree");
      m.trees_.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("model: ") + e.what());
  }
  if (m.trees_.size() != m.params_.n_trees) throw input_error("model: tree count does not match params");
  if (!std::is_sorted(m.classes_.begin(), m.classes_.end())) throw input_error("model: classes must be sorted");
  return m;
}

// --- OOB and importance ------------------------------------------------------------------------

nlohmann::json OobReport::to_json() const {
  return {{"overall_error", overall_error},
          {"class_errors", class_errors},
          {"confusion", confusion.to_json()},
          {"evaluated", evaluated},
          {"excluded", excluded}};
}

OobReport report_from_confusion(const ConfusionMatrix& cm) {
  OobReport r;
  r.confusion = cm;
  r.overall_error = cm.overall_error();
  for (std::size_t i = 0; i < cm.classes().size(); ++i) r.class_errors.push_back(cm.class_error(i));
  r.evaluated = static_cast<std::size_t>(cm.total());
  return r;
}

OobReport oob_report(const ForestModel& model, const MatrixView& x, std::span<const int> y) {
  if (!model.has_inbag() || x.rows() != model.n_samples() || y.size() != x.rows()) {
    throw std::invalid_argument("oob_report: model was not trained on this data");
  }
  const auto& classes = model.classes();
  ConfusionMatrix cm(classes);
  std::size_t excluded = 0;
  std::vector<std::size_t> v(classes.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::fill(v.begin(), v.end(), 0);
    std::size_t voters = 0;
    for (std::size_t t = 0; t < model.trees().size(); ++t) {
      if (model.inbag(t, i) != 0) continue;
      const int c = model.trees()[t].predict(x.row(i));
      ++v[static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), c) - classes.begin())];
      ++voters;
    }
    if (voters == 0) {
      ++excluded;
      continue;
    }
    cm.add(y[i], classes[majority(v)]);
  }
  OobReport r = report_from_confusion(cm);
  r.excluded = excluded;
  return r;
}

std::vector<ImportanceEntry> gini_importance(const ForestModel& model, std::span<const std::string> names) {
  const auto& sums = model.importance_sum();
  const double trees = static_cast<double>(model.trees().size());
  std::vector<ImportanceEntry> out;
  for (std::size_t f = 0; f < sums.size(); ++f) {
    out.push_back({f, f < names.size() ? names[f] : "f" + std::to_string(f), sums[f] / trees});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.importance > b.importance; });
  return out;
}

// --- Classifier adapters ------------------------------------------------------------------------

ForestClassifier::ForestClassifier(ForestParams params, std::optional<double> balance_ratio, unsigned workers)
    : params_(std::move(params)), balance_ratio_(balance_ratio), workers_(workers) {}

void ForestClassifier::fit(const MatrixView& x, std::span<const int> y) {
  ForestParams p = params_;
  if (balance_ratio_) p.sampsize = stratified_sampsize(class_counts(y), *balance_ratio_);
  model_ = forest::fit(x, y, p, workers_);
}

std::vector<int> ForestClassifier::predict(const MatrixView& x) const {
  if (!model_) throw std::logic_error("ForestClassifier: predict before fit");
  return model_->predict_batch(x, workers_);
}

void ConstantClassifier::fit(const MatrixView&, std::span<const int> y) {
  const auto counts = class_counts(y);
  if (counts.empty()) throw std::invalid_argument("ConstantClassifier: no labels");
  std::size_t best = 0;
  for (const auto& [cls, n] : counts) {
    if (n > best) {
      best = n;
      label_ = cls;
    }
  }
}

std::vector<int> ConstantClassifier::predict(const MatrixView& x) const { return std::vector<int>(x.rows(), label_); }

}  // namespace emorf::forest
