#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "emorf/forest.hpp"
#include "support.hpp"

using namespace emorf;
using namespace emorf::forest;
using testing::Dataset;

namespace {

MatrixView view(const Dataset& d) { return MatrixView(d.x, d.rows(), d.cols); }

ForestParams single_tree(std::size_t features) {
  ForestParams p;
  p.n_trees = 1;
  p.mtry = features;
  p.bootstrap = false;
  p.min_node_size = 1;
  return p;
}

ForestModel leaf_forest(const std::vector<int>& leaf_classes, std::vector<int> classes) {
  nlohmann::json j;
  ForestParams p;
  p.n_trees = leaf_classes.size();
  p.mtry = 1;
  j["params"] = p.to_json();
  j["classes"] = classes;
  j["n_features"] = 1;
  auto trees = nlohmann::json::array();
  for (int c : leaf_classes) trees.push_back({{"nodes", {{{"leaf", c}, {"n", 1}}}}});
  j["trees"] = trees;
  return ForestModel::from_json(j);
}

}  // namespace

TEST_CASE("gini impurity") {
  CHECK(gini_impurity(std::vector<std::size_t>{10, 0, 0, 0}) == 0.0);
  CHECK(gini_impurity(std::vector<std::size_t>{5, 5}) == doctest::Approx(0.5));
  CHECK(gini_impurity(std::vector<std::size_t>{10, 10, 0, 0}) == doctest::Approx(0.5));
  CHECK(gini_impurity(std::vector<std::size_t>{1, 1, 1, 1}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(gini_impurity(std::vector<std::size_t>{0, 0}), std::invalid_argument);
}

TEST_CASE("stratified sampsize") {
  using Counts = std::map<int, std::size_t>;
  CHECK(stratified_sampsize(Counts{{1, 2000}, {2, 100}, {3, 150}, {4, 80}}, 6.0) ==
        Counts{{1, 480}, {2, 100}, {3, 150}, {4, 80}});
  CHECK(stratified_sampsize(Counts{{1, 50}, {2, 50}}, 6.0) == Counts{{1, 50}, {2, 50}});
  CHECK(stratified_sampsize(Counts{{1, 90}, {2, 80}}, 6.0) == Counts{{1, 90}, {2, 80}});
  CHECK(class_counts(std::vector<int>{2, 1, 2, 2}) == Counts{{1, 1}, {2, 3}});
}

TEST_CASE("separable blobs") {
  const auto d = testing::blobs(100, 2, 2, 2, 6.0, 1);
  ForestParams p;
  p.n_trees = 50;
  p.mtry = 1;
  const auto model = fit(view(d), d.y, p);
  const auto oob = oob_report(model, view(d), d.y);
  CHECK(oob.overall_error < 0.05);
  CHECK(oob.evaluated + oob.excluded == d.rows());

  const auto pred = model.predict_batch(view(d));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == d.y[i];
  CHECK(static_cast<double>(correct) > 0.99 * static_cast<double>(d.rows()));
}

TEST_CASE("a full tree shatters consistent data") {
  const auto d = testing::blobs(40, 3, 4, 2, 1.0, 2);
  const auto model = fit(view(d), d.y, single_tree(4));
  CHECK(model.predict_batch(view(d)) == d.y);
}

TEST_CASE("single tree matches the exhaustive CART oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = testing::micro_dataset(rng);
    if (class_counts(d.y).size() < 2) continue;
    const auto model = fit(view(d), d.y, single_tree(d.cols));
    const testing::BruteForceCart oracle(d);
    CHECK(model.predict_batch(view(d)) == oracle.training_predictions());
  }
}

TEST_CASE("determinism across seeds and workers") {
  const auto d = testing::blobs(60, 4, 8, 4, 2.0, 3);
  ForestParams p;
  p.n_trees = 20;
  p.mtry = 3;
  p.seed = 77;
  const auto a = fit(view(d), d.y, p, 1).to_json_string();
  CHECK(fit(view(d), d.y, p, 1).to_json_string() == a);
  CHECK(fit(view(d), d.y, p, 3).to_json_string() == a);
  p.seed = 78;
  CHECK(fit(view(d), d.y, p, 1).to_json_string() != a);
}

TEST_CASE("model json round trip") {
  const auto d = testing::blobs(30, 3, 5, 3, 2.0, 4);
  ForestParams p;
  p.n_trees = 5;
  p.mtry = 2;
  p.sampsize = std::map<int, std::size_t>{{1, 10}, {2, 10}, {3, 10}};
  auto model = fit(view(d), d.y, p);
  model.set_registry_version("v1-test");
  const auto j = model.to_json();
  CHECK(j.at("params").at("sampsize").at("2") == 10);
  CHECK(j.at("trees").size() == 5);
  const auto back = ForestModel::from_json(nlohmann::json::parse(model.to_json_string()));
  CHECK(back.to_json_string() == model.to_json_string());
  CHECK(back.registry_version() == "v1-test");
  CHECK(back.predict_batch(view(d)) == model.predict_batch(view(d)));

  auto broken = j;
  broken["trees"][0]["nodes"][0] = {{"f", 0}, {"t", 0.0}, {"l", 99}, {"r", 1}};
  CHECK_THROWS_AS(ForestModel::from_json(broken), input_error);
  CHECK_THROWS_AS(ForestModel::from_json(nlohmann::json{{"params", 1}}), input_error);
}

TEST_CASE("vote ties go to the lowest class") {
  std::vector<int> leaves;
  for (int c = 1; c <= 4; ++c) {
    const int n[] = {30, 30, 25, 15};
    leaves.insert(leaves.end(), static_cast<std::size_t>(n[c - 1]), c);
  }
  std::reverse(leaves.begin(), leaves.end());
  const auto model = leaf_forest(leaves, {1, 2, 3, 4});
  const std::vector<double> x{0.0};
  CHECK(model.votes(x) == std::vector<std::size_t>{30, 30, 25, 15});
  CHECK(model.predict(x) == 1);
  CHECK(leaf_forest({3, 3, 3}, {1, 2, 3}).predict(x) == 3);
  CHECK_THROWS(model.predict(std::vector<double>{0.0, 1.0}));
}

TEST_CASE("fit argument validation") {
  const auto d = testing::blobs(10, 2, 3, 2, 2.0, 5);
  ForestParams p;
  p.n_trees = 3;
  p.mtry = 4;
  CHECK_THROWS(fit(view(d), d.y, p));
  p.mtry = 0;
  CHECK_THROWS(fit(view(d), d.y, p));
  p.mtry = 2;
  CHECK_THROWS(fit(view(d), std::vector<int>(d.rows(), 1), p));
  p.sampsize = std::map<int, std::size_t>{{1, 5}, {7, 5}};
  CHECK_THROWS(fit(view(d), d.y, p));
}

TEST_CASE("confusion arithmetic") {
  const auto cm = ConfusionMatrix::from_counts({1, 2, 3, 4}, {{31823, 689, 845, 222},
                                                              {4221, 12068, 799, 237},
                                                              {3170, 580, 13882, 323},
                                                              {2802, 617, 539, 7823}});
  const auto r = report_from_confusion(cm);
  CHECK(cm.total() == 80640);
  CHECK(r.class_errors[0] == doctest::Approx(0.0523).epsilon(1e-3));
  CHECK(r.class_errors[1] == doctest::Approx(5257.0 / 17325.0));
  CHECK(r.overall_error == doctest::Approx(15044.0 / 80640.0));
  CHECK(std::abs(100.0 * r.overall_error - 18.70) <= 0.1);

  ConfusionMatrix m({1, 2});
  m.add(1, 1, 3);
  m.add(2, 1);
  CHECK(m.class_error(0) == 0.0);
  CHECK(m.class_error(1) == 1.0);
  CHECK(m.overall_error() == 0.25);
  CHECK(ConfusionMatrix({1, 2}).overall_error() == 0.0);
  const auto j = m.to_json();
  CHECK(j.at("counts") == nlohmann::json{{3, 0}, {1, 0}});
}

TEST_CASE("out-of-bag share is close to 1/e") {
  const auto d = testing::blobs(5000, 2, 2, 2, 1.0, 6);
  ForestParams p;
  p.n_trees = 20;
  p.mtry = 1;
  const auto model = fit(view(d), d.y, p);
  double share = 0.0;
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    std::size_t out = 0, total = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      out += model.inbag(t, i) == 0;
      total += model.inbag(t, i);
    }
    CHECK(total == d.rows());
    share += static_cast<double>(out) / static_cast<double>(d.rows());
  }
  share /= static_cast<double>(p.n_trees);
  CHECK(share >= 0.35);
  CHECK(share <= 0.39);
}

TEST_CASE("stratified bootstrap draws the exact class counts") {
  const auto d = testing::imbalanced(600, 0.1, 3, 1.0, 7);
  ForestParams p;
  p.n_trees = 10;
  p.mtry = 2;
  p.sampsize = stratified_sampsize(class_counts(d.y), 2.0);
  REQUIRE(p.sampsize->at(1) == 120);
  const auto model = fit(view(d), d.y, p);
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    std::map<int, std::size_t> drawn;
    for (std::size_t i = 0; i < d.rows(); ++i) drawn[d.y[i]] += model.inbag(t, i);
    CHECK(drawn == *p.sampsize);
  }
}

TEST_CASE("monotone rescaling of a column changes nothing") {
  const auto d = testing::blobs(80, 3, 4, 3, 1.5, 8);
  auto warped = d;
  for (std::size_t i = 0; i < warped.rows(); ++i) {
    auto& v = warped.x[i * warped.cols + 1];
    v = std::exp(v) * 10.0 - 3.0;
  }
  // Without bootstrap every row is in-bag, so each split induces the same partition on both copies.
  // Out-of-bag rows may fall either side of a midpoint, so only in-bag predictions are comparable.
  ForestParams p;
  p.n_trees = 15;
  p.mtry = 2;
  p.bootstrap = false;
  const auto a = fit(view(d), d.y, p);
  const auto b = fit(view(warped), warped.y, p);
  CHECK(a.predict_batch(view(d)) == b.predict_batch(view(warped)));
  REQUIRE(a.trees().size() == b.trees().size());
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    const auto& na = a.trees()[t].nodes;
    const auto& nb = b.trees()[t].nodes;
    REQUIRE(na.size() == nb.size());
    for (std::size_t i = 0; i < na.size(); ++i) {
      CHECK(na[i].feature == nb[i].feature);
      CHECK(na[i].leaf_class == nb[i].leaf_class);
      CHECK(na[i].count == nb[i].count);
    }
  }
}

TEST_CASE("row order permutation keeps the OOB error stable") {
  const auto d = testing::blobs(200, 4, 20, 4, 3.0, 9);
  std::vector<std::size_t> perm(d.rows());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(10);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  Dataset shuffled;
  shuffled.cols = d.cols;
  for (auto i : perm) {
    shuffled.x.insert(shuffled.x.end(), d.x.begin() + static_cast<std::ptrdiff_t>(i * d.cols),
                      d.x.begin() + static_cast<std::ptrdiff_t>((i + 1) * d.cols));
    shuffled.y.push_back(d.y[i]);
  }
  ForestParams p;
  p.n_trees = 100;
  p.mtry = 4;
  const double a = oob_report(fit(view(d), d.y, p), view(d), d.y).overall_error;
  const double b = oob_report(fit(view(shuffled), shuffled.y, p), view(shuffled), shuffled.y).overall_error;
  CHECK(std::abs(a - b) * 100.0 <= 0.5);
}

TEST_CASE("gini importance") {
  Dataset d;
  d.cols = 3;
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const int c = 1 + i % 2;
    d.x.push_back(c == 1 ? rng.uniform() : 2.0 + rng.uniform());
    d.x.push_back(rng.uniform());
    d.x.push_back(0.0);  // constant, never split on
    d.y.push_back(c);
  }
  ForestParams p;
  p.n_trees = 30;
  p.mtry = 2;
  const auto model = fit(view(d), d.y, p);
  const std::vector<std::string> names{"a", "b", "c"};
  const auto ranking = gini_importance(model, names);
  REQUIRE(ranking.size() == 3);
  CHECK(ranking[0].name == "a");
  CHECK(ranking[0].importance > 5.0 * ranking[1].importance);
  CHECK(ranking[2].name == "c");
  CHECK(ranking[2].importance == 0.0);
  for (const auto& e : ranking) CHECK(e.importance >= 0.0);

  Dataset one;
  one.cols = 1;
  for (int i = 0; i < 50; ++i) {
    one.x.push_back(static_cast<double>(i));
    one.y.push_back(i < 25 ? 1 : 2);
  }
  p.mtry = 1;
  const auto solo = gini_importance(fit(view(one), one.y, p));
  REQUIRE(solo.size() == 1);
  CHECK(solo[0].importance > 0.0);
  CHECK(solo[0].name == "f0");
}

TEST_CASE("classifier contract") {
  const auto d = testing::blobs(40, 2, 3, 2, 5.0, 12);
  ForestParams p;
  p.n_trees = 10;
  p.mtry = 2;
  ForestClassifier rf(p, 6.0);
  rf.fit(view(d), d.y);
  CHECK(rf.model().params().sampsize.has_value());
  CHECK(rf.predict(view(d)).size() == d.rows());

  ConstantClassifier constant;
  constant.fit(view(d), d.y);
  CHECK(constant.label() == 1);
  CHECK(constant.predict(view(d)) == std::vector<int>(d.rows(), 1));
}
