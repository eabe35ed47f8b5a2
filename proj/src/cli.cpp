#include "emorf/cli.hpp"

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "emorf/common.hpp"
#include "emorf/corpus.hpp"
#include "emorf/eval.hpp"
#include "emorf/features.hpp"
#include "emorf/synthgen.hpp"

namespace emorf::cli {

namespace {

using features::FeatureMatrix;
using features::FeatureRegistry;

std::filesystem::path manifest_path(const std::filesystem::path& data) {
  return std::filesystem::is_directory(data) ? data / "manifest.json" : data;
}

FeatureMatrix load_features(const RunConfig& cfg) {
  auto m = features::read_features_csv(cfg.data);
  if (m.rows() == 0) throw input_error(cfg.data.string() + ": no feature rows");
  if (cfg.normalize) features::normalize_per_subject(m);
  return m;
}

forest::ForestParams params_for(const RunConfig& cfg, std::span<const int> y) {
  auto p = cfg.forest;
  if (cfg.balanced) p.sampsize = forest::stratified_sampsize(forest::class_counts(y), cfg.ratio);
  return p;
}

void require_two_classes(std::span<const int> y, const std::string& what) {
  if (forest::class_counts(y).size() < 2) throw input_error(what + ": labels contain a single class");
}

eval::ClassifierFactory factory_for(const RunConfig& cfg) {
  return [cfg](std::uint64_t seed) {
    auto p = cfg.forest;
    p.seed = seed;
    return std::make_unique<forest::ForestClassifier>(
        p, cfg.balanced ? std::optional<double>(cfg.ratio) : std::nullopt, 1);
  };
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

// --- Commands --------------------------------------------------------------------------

int cmd_extract(const RunConfig& cfg) {
  const auto records = corpus::load_dataset(manifest_path(cfg.data));
  std::vector<FeatureMatrix> parts;
  features::ExtractOptions opts;
  opts.workers = cfg.workers;
  for (const auto& rec : records) parts.push_back(features::extract_all(rec, opts));
  const auto m = FeatureMatrix::concat(parts);
  features::write_features_csv(cfg.out, m);
  std::cout << "rows: " << m.rows() << "\ncolumns: " << m.n_features << "\nsubjects: " << m.subjects.size() << "\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg) {
  const auto m = load_features(cfg);
  const auto y = labels::label_all(m.ratings, cfg.label_mode);
  require_two_classes(y, "train");
  const auto params = params_for(cfg, y);
  auto model = forest::fit(forest::MatrixView(m.values, m.rows(), m.n_features), y, params, cfg.workers);
  model.set_registry_version(FeatureRegistry::canonical().version());
  write_file_atomic(cfg.out, model.to_json_string());
  std::cout << "trees: " << model.trees().size() << "\nrows: " << m.rows() << "\n";
  return kOk;
}

nlohmann::json oob_result(const RunConfig& cfg, const FeatureMatrix& m, std::vector<double>& unit_accuracy) {
  const auto fit_and_report = [&](const FeatureMatrix& part) {
    const auto y = labels::label_all(part.ratings, cfg.label_mode);
    require_two_classes(y, "oob");
    const forest::MatrixView x(part.values, part.rows(), part.n_features);
    const auto model = forest::fit(x, y, params_for(cfg, y), cfg.workers);
    auto j = forest::oob_report(model, x, y).to_json();
    j["params"] = model.params().to_json();
    return j;
  };
  nlohmann::json out;
  if (!cfg.personalized) {
    out = fit_and_report(m);
    unit_accuracy.push_back(100.0 * (1.0 - out["overall_error"].get<double>()));
    return out;
  }
  auto per_subject = nlohmann::json::array();
  std::vector<double> errors;
  for (std::size_t s = 0; s < m.subjects.size(); ++s) {
    auto j = fit_and_report(m.subject_rows(s));
    j["subject"] = m.subjects[s];
    errors.push_back(100.0 * j["overall_error"].get<double>());
    unit_accuracy.push_back(100.0 - errors.back());
    per_subject.push_back(std::move(j));
  }
  out["subjects"] = std::move(per_subject);
  out["oob_error_summary"] = eval::summarize(errors).to_json();
  return out;
}

nlohmann::json loto_result(const RunConfig& cfg, const FeatureMatrix& m, std::vector<double>& unit_accuracy) {
  const auto make = factory_for(cfg);
  auto per_subject = nlohmann::json::array();
  std::vector<double> fold_means, fold_stds, truncated, window_errors;
  for (std::size_t s = 0; s < m.subjects.size(); ++s) {
    const auto r = eval::loto_cv(m.subject_rows(s), cfg.label_mode, make, {cfg.forest.seed, cfg.workers});
    nlohmann::json j = r.cv.to_json();
    j["subject"] = m.subjects[s];
    j["truncation"] = r.truncation.to_json();
    per_subject.push_back(std::move(j));
    fold_means.push_back(r.cv.fold_error_summary.mean);
    fold_stds.push_back(r.cv.fold_std_summary.mean);
    window_errors.push_back(r.cv.subjects.front().window_error);
    truncated.push_back(r.truncation.error);
    unit_accuracy.push_back(r.truncation.accuracy);
  }
  return {{"subjects", std::move(per_subject)},
          {"summary",
           {{"of_subject_fold_mean", eval::summarize(fold_means).to_json()},
            {"of_subject_fold_std", eval::summarize(fold_stds).to_json()},
            {"window_error", eval::summarize(window_errors).to_json()},
            {"truncated_error", eval::summarize(truncated).to_json()}}}};
}

std::string cluster_dimension(const RunConfig& cfg) {
  return cfg.label_mode == labels::LabelMode::kArousal ? "arousal" : cfg.dimension;
}

corpus::Rating rating_of(const std::string& dimension) {
  if (dimension == "valence") return corpus::Rating::kValence;
  if (dimension == "arousal") return corpus::Rating::kArousal;
  if (dimension == "dominance") return corpus::Rating::kDominance;
  throw input_error("unknown dimension '" + dimension + "'");
}

nlohmann::json loso_result(const RunConfig& cfg, const FeatureMatrix& m, std::vector<double>& unit_accuracy) {
  std::optional<eval::NeighborGraph> graph;
  auto scope = eval::LosoScope::kAll;
  if (cfg.protocol == "loso-neighbors") {
    const auto dim = cluster_dimension(cfg);
    graph = eval::build_neighbor_graph(eval::subject_rating_vectors(m, rating_of(dim)), cfg.rho.value_or(default_rho(dim)),
                                       m.subjects);
    scope = cfg.pooled ? eval::LosoScope::kNeighborsPooled : eval::LosoScope::kNeighbors;
  }
  const auto r = eval::loso_cv(m, cfg.label_mode, factory_for(cfg), scope, graph ? &*graph : nullptr,
                               {cfg.forest.seed, cfg.workers});
  std::vector<double> truncated;
  for (const auto& s : r.cv.subjects) {
    unit_accuracy.push_back(100.0 - s.window_error);
    truncated.push_back(*s.truncated_error);
  }
  nlohmann::json j = r.cv.to_json();
  j["truncation"] = r.truncation.to_json();
  j["truncated_error_summary"] = eval::summarize(truncated).to_json();
  if (graph) j["graph"] = graph->to_json();
  return j;
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto m = load_features(cfg);
  std::vector<double> unit_accuracy;
  nlohmann::json result;
  if (cfg.protocol == "oob") {
    result = oob_result(cfg, m, unit_accuracy);
  } else if (cfg.protocol == "kfold") {
    const auto y = labels::label_all(m.ratings, cfg.label_mode);
    require_two_classes(y, "kfold");
    const auto r = eval::kfold_cv(forest::MatrixView(m.values, m.rows(), m.n_features), y, cfg.folds,
                                  factory_for(cfg), {cfg.forest.seed, cfg.workers});
    for (const auto& f : r.folds) unit_accuracy.push_back(100.0 - f.error);
    result = r.to_json();
  } else if (cfg.protocol == "loto") {
    result = loto_result(cfg, m, unit_accuracy);
  } else {
    result = loso_result(cfg, m, unit_accuracy);
  }

  const auto bins = eval::histogram(unit_accuracy);
  nlohmann::json report;
  report["config"] = cfg.to_json();
  report["registry_version"] = FeatureRegistry::canonical().version();
  report["protocol"] = cfg.protocol;
  report["result"] = std::move(result);
  auto hist = nlohmann::json::array();
  for (const auto& b : bins) hist.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"count", b.count}});
  report["histogram"] = std::move(hist);

  std::filesystem::create_directories(cfg.out);
  write_json(cfg.out / "report.json", report);
  write_file_atomic(cfg.out / "histogram.csv", eval::histogram_csv(bins));
  std::cout << "report: " << (cfg.out / "report.json").string() << "\n";
  return kOk;
}

int cmd_importance(const RunConfig& cfg) {
  const auto model = forest::ForestModel::from_json(nlohmann::json::parse(read_file(cfg.model)));
  const auto& reg = FeatureRegistry::canonical();
  std::vector<std::string> names;
  if (model.n_features() == reg.size()) {
    names = reg.names();
    if (model.registry_version() != reg.version()) {
      std::cerr << "warning: model registry " << model.registry_version() << " differs from " << reg.version() << "\n";
    }
  }
  const auto ranking = forest::gini_importance(model, names);
  std::string csv = "rank,feature,importance\n";
  double total = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    csv += std::to_string(i + 1) + "," + ranking[i].name + "," + format_double(ranking[i].importance) + "\n";
    total += ranking[i].importance;
  }
  write_file_atomic(cfg.out, csv);
  std::cout << "features: " << ranking.size() << "\nimportance_sum: " << format_double(total) << "\n";
  return kOk;
}

int cmd_predict(const RunConfig& cfg) {
  const auto model = forest::ForestModel::from_json(nlohmann::json::parse(read_file(cfg.model)));
  if (model.registry_version() != FeatureRegistry::canonical().version()) {
    std::cerr << "warning: model registry " << model.registry_version() << " differs from "
              << FeatureRegistry::canonical().version() << "\n";
  }
  const auto m = load_features(cfg);
  const auto pred = model.predict_batch(forest::MatrixView(m.values, m.rows(), m.n_features), cfg.workers);
  std::string csv = "subject,trial,window,predicted\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& k = m.keys[r];
    csv += m.subjects[k.subject] + "," + std::to_string(k.trial) + "," + std::to_string(k.window) + "," +
           std::to_string(pred[r]) + "\n";
  }
  write_file_atomic(cfg.out, csv);
  return kOk;
}

int cmd_cluster(const RunConfig& cfg) {
  const auto manifest = manifest_path(cfg.data);
  const auto m = corpus::read_manifest(manifest);
  const auto dim = rating_of(cfg.dimension);
  std::vector<std::vector<double>> ratings;
  std::vector<std::string> ids;
  for (const auto& s : m.subjects) {
    const auto r = corpus::read_labels_csv(manifest.parent_path() / s.labels);
    std::vector<double> v;
    for (const auto& row : r) v.push_back(row[static_cast<std::size_t>(dim)]);
    ratings.push_back(std::move(v));
    ids.push_back(s.id);
  }
  const auto graph = eval::build_neighbor_graph(ratings, cfg.rho.value_or(default_rho(cfg.dimension)), ids);
  auto j = graph.to_json();
  j["dimension"] = cfg.dimension;
  write_json(cfg.out, j);
  std::cout << "subjects: " << ids.size() << "\nfallback_edges: " << graph.fallback_edges.size() << "\n";
  return kOk;
}

int cmd_synth(const RunConfig& cfg) {
  const auto plan = synth::plan_from_json(nlohmann::json::parse(read_file(cfg.data)));
  const auto ds = synth::generate(plan, cfg.workers);
  corpus::write_dataset(cfg.out, ds.subjects);
  write_json(cfg.out / "ground_truth.json", ds.ground_truth);
  std::cout << "subjects: " << ds.subjects.size() << "\n";
  return kOk;
}

}  // namespace

double default_rho(const std::string& dimension) { return dimension == "arousal" ? 0.30 : 0.35; }

void RunConfig::validate() const {
  static const std::vector<std::string> protocols = {"oob", "kfold", "loto", "loso", "loso-neighbors"};
  if (std::find(protocols.begin(), protocols.end(), protocol) == protocols.end()) {
    throw input_error("unknown protocol '" + protocol + "'");
  }
  if (forest.n_trees < 1) throw input_error("--trees must be >= 1");
  if (forest.mtry < 1) throw input_error("--mtry must be >= 1");
  if (!(ratio > 0.0)) throw input_error("--ratio must be positive");
  if (rho && !(*rho >= -1.0 && *rho <= 1.0)) throw input_error("--rho must lie in [-1, 1]");
  if (folds < 2) throw input_error("--folds must be >= 2");
  if (dimension != "valence" && dimension != "arousal" && dimension != "dominance") {
    throw input_error("--dimension must be valence, arousal or dominance");
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["data"] = data.string();
  j["out"] = out.string();
  if (!model.empty()) j["model"] = model.string();
  j["label_mode"] = labels::to_string(label_mode);
  j["forest"] = forest.to_json();
  j["balanced"] = balanced;
  j["ratio"] = ratio;
  j["protocol"] = protocol;
  j["rho"] = rho ? nlohmann::json(*rho) : nlohmann::json(nullptr);
  j["dimension"] = dimension;
  j["folds"] = folds;
  j["personalized"] = personalized;
  j["pooled"] = pooled;
  j["normalize"] = normalize;
  j["workers"] = workers;
  return j;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Physiological emotion recognition with handcrafted features and random forests"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string mode = "quad";
  bool no_normalize = false;
  std::size_t trees = cfg.forest.n_trees;
  std::size_t mtry = cfg.forest.mtry;
  std::uint64_t seed = cfg.forest.seed;
  double rho = 0.0;

  auto add_forest = [&](CLI::App* sub) {
    sub->add_option("--label-mode", mode, "valence | arousal | quad | oct")->capture_default_str();
    sub->add_option("--trees", trees, "trees per forest")->capture_default_str();
    sub->add_option("--mtry", mtry, "features tried per split")->capture_default_str();
    sub->add_flag("--balanced", cfg.balanced, "stratified bootstrap (minority-preserving)");
    sub->add_option("--ratio", cfg.ratio, "per-class cap as a multiple of the smallest class")->capture_default_str();
    sub->add_option("--seed", seed, "master seed")->capture_default_str();
    sub->add_flag("--no-normalize", no_normalize, "skip per-subject z-scoring");
  };

  auto* extract = app.add_subcommand("extract", "corpus -> features.csv");
  extract->add_option("--data", cfg.data, "corpus directory or manifest.json")->required();
  extract->add_option("--out", cfg.out, "features.csv path")->required();

  auto* train = app.add_subcommand("train", "features.csv -> model.json");
  train->add_option("--data", cfg.data, "features.csv")->required();
  train->add_option("--out", cfg.out, "model.json path")->required();
  add_forest(train);

  auto* evaluate = app.add_subcommand("evaluate", "run an evaluation protocol");
  evaluate->add_option("--data", cfg.data, "features.csv")->required();
  evaluate->add_option("--out", cfg.out, "output directory")->required();
  evaluate->add_option("--protocol", cfg.protocol, "oob | kfold | loto | loso | loso-neighbors")->capture_default_str();
  evaluate->add_option("--folds", cfg.folds, "k for kfold")->capture_default_str();
  evaluate->add_option("--rho", rho, "neighbour correlation threshold (default 0.35 valence, 0.30 arousal)");
  evaluate->add_option("--dimension", cfg.dimension, "rating used for clustering with quad/oct labels");
  evaluate->add_flag("--personalized", cfg.personalized, "oob: one model per subject");
  evaluate->add_flag("--pooled", cfg.pooled, "loso-neighbors: train one model on the neighbours' pooled rows");
  add_forest(evaluate);

  auto* importance = app.add_subcommand("importance", "model.json -> ranking.csv");
  importance->add_option("--model", cfg.model, "model.json")->required();
  importance->add_option("--out", cfg.out, "ranking.csv path")->required();

  auto* predict = app.add_subcommand("predict", "model.json + features.csv -> predictions.csv");
  predict->add_option("--model", cfg.model, "model.json")->required();
  predict->add_option("--data", cfg.data, "features.csv")->required();
  predict->add_option("--out", cfg.out, "predictions.csv path")->required();
  predict->add_flag("--no-normalize", no_normalize, "skip per-subject z-scoring");

  auto* cluster = app.add_subcommand("cluster", "subject similarity graph from ratings");
  cluster->add_option("--data", cfg.data, "corpus directory or manifest.json")->required();
  cluster->add_option("--out", cfg.out, "graph.json path")->required();
  cluster->add_option("--dimension", cfg.dimension, "valence | arousal | dominance")->capture_default_str();
  cluster->add_option("--rho", rho, "correlation threshold");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus from recipe.json");
  synth_cmd->add_option("--recipe", cfg.data, "recipe.json")->required();
  synth_cmd->add_option("--out", cfg.out, "output corpus directory")->required();

  for (auto* sub : {extract, train, evaluate, importance, predict, cluster, synth_cmd}) {
    sub->add_option("--workers", cfg.workers, "worker threads (0 = all cores)")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    const auto parsed_mode = labels::parse_mode(mode);
    if (!parsed_mode) throw input_error("unknown --label-mode '" + mode + "'");
    cfg.label_mode = *parsed_mode;
    cfg.forest.n_trees = trees;
    cfg.forest.mtry = mtry;
    cfg.forest.seed = seed;
    cfg.normalize = !no_normalize;
    cfg.workers = resolve_workers(cfg.workers);
    for (auto* sub : {evaluate, cluster}) {
      if (sub->parsed() && sub->count("--rho") > 0) cfg.rho = rho;
    }
    cfg.validate();

    if (cfg.command == "extract") return cmd_extract(cfg);
    if (cfg.command == "train") return cmd_train(cfg);
    if (cfg.command == "evaluate") return cmd_evaluate(cfg);
    if (cfg.command == "importance") return cmd_importance(cfg);
    if (cfg.command == "predict") return cmd_predict(cfg);
    if (cfg.command == "cluster") return cmd_cluster(cfg);
    if (cfg.command == "synth") return cmd_synth(cfg);
    throw input_error("unknown command");
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"emorf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace emorf::cli
