// Acceptance suite: one PASS/FAIL line per criterion.
//   vaxcast_acceptance [--only 3,8] [--data-dir DIR] [--work-dir DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "vaxcast/data.hpp"
#include "vaxcast/evaluation.hpp"
#include "vaxcast/forest.hpp"
#include "vaxcast/normal.hpp"
#include "vaxcast/pipeline.hpp"
#include "vaxcast/probit.hpp"
#include "vaxcast/rng.hpp"
#include "vaxcast/selection.hpp"
#include "vaxcast/synth.hpp"

namespace fs = std::filesystem;
using namespace vaxcast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string data_dir = VAXCAST_DATA_DIR;
fs::path work_dir;

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

const synth::GeneratorConfig& calibrated() {
  static const auto config = synth::GeneratorConfig::load(data_dir + "/default_gen.json");
  return config;
}

std::map<std::string, double> table_targets() {
  std::ifstream in(data_dir + "/ame_targets.json");
  return nlohmann::json::parse(in).at("ame").get<std::map<std::string, double>>();
}

// Five training years of 50,000 and one held-out year of 45,000, restricted.
struct Population {
  Dataset train;
  Dataset test;
};

Population population(std::uint64_t seed) {
  auto config = calibrated();
  config.seed = seed;
  config.n = 50000;
  const std::vector<int> years{2009, 2010, 2011, 2012, 2013};
  Population p;
  p.train = apply_restrictions(synth::generate_years(config, years)).data;
  config.n = 45000;
  config.year = 2014;
  config.seed = derive_seed(seed, 2014);
  p.test = apply_restrictions(synth::generate(config)).data;
  return p;
}

const Population& reference_population() {
  static const auto p = population(1);
  return p;
}

forest::ForestConfig default_forest(std::uint64_t seed) {
  forest::ForestConfig c;
  c.seed = seed;
  return c;
}

// 1 ------------------------------------------------------------------------

Outcome score_matches_finite_differences() {
  auto config = calibrated();
  config.n = 500;
  config.seed = 11;
  config.missingness.clear();
  const auto data = synth::generate(config);
  const std::vector<std::string> terms{"age", "bmi", "female", "diabetes", "quebec", "arthritis", "family_doctor"};
  Eigen::MatrixXd x(data.size(), terms.size() + 1);
  Eigen::VectorXd y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    x(i, 0) = 1.0;
    for (std::size_t k = 0; k < terms.size(); ++k) x(i, k + 1) = data.column(terms[k])[i];
    y(i) = data.outcome()[i];
  }
  const probit::Likelihood lik(x, y);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  const double h = 1e-5;
  for (int point = 0; point < 20; ++point) {
    Eigen::VectorXd beta(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) beta(k) = unit(gen) / (x.col(k).norm() / std::sqrt(500.0) * 3.0);
    const auto g = lik.gradient(beta);
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      Eigen::VectorXd up = beta, down = beta;
      up(k) += h;
      down(k) -= h;
      const double fd = (lik.value(up) - lik.value(down)) / (2.0 * h);
      worst = std::max(worst, std::fabs(g(k) - fd) / std::max(1.0, std::fabs(fd)));
    }
  }
  return {worst < 1e-6, "max relative error " + sci(worst)};
}

// 2 ------------------------------------------------------------------------

Outcome mle_matches_grid_search() {
  const std::vector<double> xs{-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  const std::vector<int> ys{0, 0, 1, 0, 1, 0, 1, 1};
  const Schema schema({{"age", FeatureKind::continuous, "demo", ""}, {"x", FeatureKind::continuous, "x", ""}});
  std::vector<Record> records;
  for (std::size_t i = 0; i < xs.size(); ++i) records.push_back({{40.0, xs[i]}, ys[i], 2014, 1.0});
  const auto data = Dataset::from_records(schema, records, Source::synthetic);
  const std::vector<std::string> terms{"x"};
  const auto fit = probit::fit(data, terms, "flushot");

  double best = -INFINITY, best_a = 0.0, best_b = 0.0;
  for (int i = 0; i <= 600; ++i) {
    for (int j = 0; j <= 600; ++j) {
      const double a = -3.0 + 0.01 * i, b = -3.0 + 0.01 * j;
      double ll = 0.0;
      for (std::size_t r = 0; r < xs.size(); ++r) {
        const double p = norm_cdf(a + b * xs[r]);
        ll += ys[r] ? std::log(p) : std::log1p(-p);
      }
      if (ll > best) {
        best = ll;
        best_a = a;
        best_b = b;
      }
    }
  }
  const double da = std::fabs(fit.coefficients(0) - best_a), db = std::fabs(fit.coefficients(1) - best_b);
  return {fit.converged && da <= 0.02 && db <= 0.02,
          "fit (" + fmt(fit.coefficients(0)) + ", " + fmt(fit.coefficients(1)) + ") grid (" + fmt(best_a, 2) + ", " +
              fmt(best_b, 2) + ")"};
}

// 3 ------------------------------------------------------------------------

Outcome ames_recovered() {
  auto config = calibrated();
  config.n = 200000;
  config.seed = 2024;
  const auto data = apply_restrictions(synth::generate(config)).data;
  const auto names = data.schema().names();
  const auto fit = probit::fit(data, names, "flushot");
  const auto stats = probit::marginal_effects(fit, data);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, target] : table_targets()) {
    const auto it = std::find_if(stats.begin(), stats.end(), [&](const auto& s) { return s.term == name; });
    const double err = std::fabs(it->ame - target);
    std::cerr << "  " << name << " " << fmt(100 * it->ame, 2) << " vs " << fmt(100 * target, 2) << "\n";
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  }
  return {worst <= 0.01, "worst |AME - target| " + fmt(100 * worst, 3) + " pp (" + worst_name + ") on " +
                             std::to_string(data.size()) + " records"};
}

// 4 ------------------------------------------------------------------------

Outcome null_group_eliminated() {
  auto config = calibrated();
  config.latent_coefficients["no_seatbelt"] = 0.0;
  config.latent_coefficients["phone_driving"] = 0.0;
  config.elder_shift.erase("no_seatbelt");
  config.elder_shift.erase("phone_driving");
  config.n = 10000;
  int null_dropped = 0, strong_dropped = 0;
  for (int run = 0; run < 100; ++run) {
    config.seed = derive_seed(404, static_cast<std::uint64_t>(run));
    const auto data = apply_restrictions(synth::generate(config)).data;
    const auto result = probit::eliminate_groups(data, data.schema(), "flushot");
    const auto& kept = result.kept_groups;
    if (std::find(kept.begin(), kept.end(), "drive") == kept.end()) ++null_dropped;
    if (std::find(kept.begin(), kept.end(), "province") == kept.end()) ++strong_dropped;
  }
  return {null_dropped >= 90 && strong_dropped == 0, "null group dropped " + std::to_string(null_dropped) +
                                                         "/100, province dropped " + std::to_string(strong_dropped) +
                                                         "/100"};
}

// 5 ------------------------------------------------------------------------

Outcome metric_identities() {
  const ConfusionMatrix m{9, 1, 8, 2};
  const auto r = metrics(m);
  const bool exact = r.ppv && *r.ppv == 0.9 && r.npv && *r.npv == 0.8 && r.acc == 0.85;

  std::mt19937_64 gen(55);
  std::uniform_int_distribution<int> level(0, 99);
  std::vector<double> scores(500);
  std::vector<std::uint8_t> truth(500);
  for (std::size_t i = 0; i < 500; ++i) {
    scores[i] = level(gen) / 100.0;
    truth[i] = static_cast<std::uint8_t>(gen() & 1u);
  }
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < 500; ++i)
    for (std::size_t j = 0; j < 500; ++j)
      if (truth[i] == 1 && truth[j] == 0) {
        pairs += 1.0;
        wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
  const double diff = std::fabs(*auc(scores, truth) - wins / pairs);
  return {exact && diff <= 1e-12, std::string("ppv/npv/acc ") + (exact ? "exact" : "mismatch") +
                                      ", |auc - pair count| " + sci(diff)};
}

// 6 ------------------------------------------------------------------------

Outcome forest_reduces_to_tree() {
  auto config = calibrated();
  config.n = 3000;
  config.seed = 66;
  config.missingness.clear();
  const auto data = synth::generate(config);
  std::vector<std::size_t> train_rows(2000), test_rows(1000);
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::iota(test_rows.begin(), test_rows.end(), std::size_t{2000});
  const auto train = data.subset(train_rows), test = data.subset(test_rows);

  forest::ForestConfig single;
  single.n_trees = 1;
  single.bagging = false;
  single.features_per_split = forest::FeaturesPerSplit::all();
  single.seed = 9;
  const auto model = forest::train_forest(train, "flushot", single);
  Rng rng(derive_seed(9, 0));
  const auto tree = forest::train_tree(train, "flushot", forest::TreeOptions{}, rng);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    agree += forest::predict(model, test, i).cls == tree.predict([&](std::size_t j) { return test.value(i, j); });

  const Schema xor_schema({{"age", FeatureKind::continuous, "demo", ""},
                           {"a", FeatureKind::binary, "a", ""},
                           {"b", FeatureKind::binary, "b", ""}});
  std::vector<Record> records;
  const int counts[2][2] = {{40, 30}, {20, 10}};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int k = 0; k < counts[a][b]; ++k) records.push_back({{40.0, double(a), double(b)}, a ^ b, 2014, 1.0});
  const auto xor_data = Dataset::from_records(xor_schema, records, Source::synthetic);
  forest::TreeOptions depth2;
  depth2.max_depth = 2;
  depth2.features = {"a", "b"};
  Rng xor_rng(1);
  const auto xor_tree = forest::train_tree(xor_data, "flushot", depth2, xor_rng);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xor_data.size(); ++i)
    correct += xor_tree.predict([&](std::size_t j) { return xor_data.value(i, j); }) == xor_data.labels()[i];
  const double xor_acc = static_cast<double>(correct) / static_cast<double>(xor_data.size());
  return {agree == test.size() && xor_acc == 1.0,
          "agreement " + std::to_string(agree) + "/1000, XOR training accuracy " + fmt(xor_acc, 3)};
}

// 7 ------------------------------------------------------------------------

Outcome bootstrap_coverage() {
  auto config = calibrated();
  config.n = 10000;
  config.seed = 77;
  config.missingness.clear();
  const auto data = synth::generate(config);
  const auto model = forest::train_forest(data, "flushot", default_forest(7));
  const double oob = std::accumulate(model.oob_fraction.begin(), model.oob_fraction.end(), 0.0) /
                     static_cast<double>(model.oob_fraction.size());
  const double in_bag = 1.0 - oob;
  const double expected = 1.0 - std::exp(-1.0);
  return {std::fabs(in_bag - expected) <= 0.01 && std::fabs(oob - (1.0 - expected)) <= 0.01,
          "mean in-bag fraction " + fmt(in_bag) + ", out-of-bag " + fmt(oob) + " over " +
              std::to_string(model.trees.size()) + " trees"};
}

// 8 ------------------------------------------------------------------------

std::map<std::uint64_t, pipeline::SplitSearchResult> searches;

Outcome boundary_recovered() {
  const std::vector<int> grid{30, 40, 50, 60, 70};
  int hits = 0;
  std::ostringstream picks;
  for (std::uint64_t run = 1; run <= 10; ++run) {
    const auto& p = run == 1 ? reference_population() : population(run);
    const auto result = pipeline::split_search(p.train, p.test, grid, default_forest(run));
    hits += result.chosen_boundary == 60;
    picks << (run > 1 ? "," : "") << result.chosen_boundary;
    searches[run] = result;
    std::cerr << "  run " << run << ":";
    for (const auto& [b, m] : result.per_boundary)
      std::cerr << " " << b << "[" << fmt(m.young_ppv.value_or(NAN)) << "/" << fmt(m.old_npv.value_or(NAN)) << "]";
    std::cerr << "\n";
  }
  return {hits >= 9, "chose 60 in " + std::to_string(hits) + "/10 runs (" + picks.str() + ")"};
}

// 9 ------------------------------------------------------------------------

Outcome near_bayes_accuracy() {
  const auto& p = reference_population();
  const auto model = pipeline::train_composite(p.train, 60, default_forest(90));
  const auto truth = p.test.labels();
  std::size_t correct = 0;
  double bayes = 0.0;
  std::vector<double> row(p.test.schema().size());
  for (std::size_t i = 0; i < p.test.size(); ++i) {
    correct += pipeline::predict_composite(model, p.test, i).cls == truth[i];
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = p.test.value(i, j);
    const double q = norm_cdf(synth::latent_index(calibrated(), row));
    bayes += std::max(q, 1.0 - q);
  }
  const double n = static_cast<double>(p.test.size());
  const double acc = correct / n, optimal = bayes / n;
  return {optimal - acc <= 0.02, "composite " + fmt(acc) + " vs Bayes-optimal " + fmt(optimal) + " (gap " +
                                     fmt(100 * (optimal - acc), 2) + " pp)"};
}

// 10 -----------------------------------------------------------------------

double young_ppv(const pipeline::CompositeModel& model, const Dataset& test) {
  const auto young = test.age_at_most(model.boundary);
  std::vector<std::uint8_t> cls;
  for (std::size_t i = 0; i < young.size(); ++i) cls.push_back(pipeline::predict_composite(model, young, i).cls);
  return metrics(confusion(cls, young.labels())).ppv.value_or(NAN);
}

Outcome qualitative_patterns() {
  const auto& p = reference_population();
  std::ostringstream detail;
  bool ok = true;

  pipeline::SplitSearchResult at60;
  if (searches.count(1)) {
    at60 = searches[1];
  } else {
    const std::vector<int> grid{60};
    at60 = pipeline::split_search(p.train, p.test, grid, default_forest(1));
  }
  const auto& m = at60.per_boundary.at(60);
  const bool a = m.young_ppv && m.old_npv && *m.young_ppv > *m.old_npv;
  detail << "(a) " << (a ? "ok" : "FAIL") << " young PPV " << fmt(m.young_ppv.value_or(NAN)) << " > old NPV "
         << fmt(m.old_npv.value_or(NAN));
  ok &= a;

  const auto full = pipeline::train_composite(p.train, 60, default_forest(100), pipeline::YoungTraining::full);
  const auto sub = pipeline::train_composite(p.train, 60, default_forest(100), pipeline::YoungTraining::subset);
  const double ppv_full = young_ppv(full, p.test), ppv_sub = young_ppv(sub, p.test);
  const bool b = ppv_full >= ppv_sub - 0.01;
  detail << "; (b) " << (b ? "ok" : "FAIL") << " full " << fmt(ppv_full) << " vs subset " << fmt(ppv_sub);
  ok &= b;

  const std::vector<std::string> top6{"age", "arthritis", "family_doctor", "diabetes", "regular_checkup",
                                      "heart_disease"};
  int methods_ok = 0;
  std::optional<selection::FeatureRanking> info_gain;
  for (auto method : selection::all_rank_methods()) {
    const auto r = selection::rank(p.train, "flushot", method);
    const bool all_in = std::all_of(top6.begin(), top6.end(), [&](const auto& f) { return r.position(f) < 10; });
    methods_ok += all_in;
    std::cerr << "  " << selection::to_string(method) << ":";
    for (std::size_t i = 0; i < 12; ++i) std::cerr << " " << r.order[i];
    std::cerr << "\n";
    if (method == selection::RankMethod::info_gain) info_gain = r;
  }
  const bool c = methods_ok >= 3;
  detail << "; (c) " << (c ? "ok" : "FAIL") << " top six in top ten for " << methods_ok << "/4 methods";
  ok &= c;

  const std::vector<std::size_t> steps{6, 47};
  const auto curve = selection::incremental_eval(p.train, p.test, *info_gain, steps, default_forest(101));
  const bool d = curve[1].metrics.acc >= curve[0].metrics.acc - 0.01;
  detail << "; (d) " << (d ? "ok" : "FAIL") << " acc@47 " << fmt(curve[1].metrics.acc) << " vs acc@6 "
         << fmt(curve[0].metrics.acc);
  ok &= d;
  return {ok, detail.str()};
}

// 11 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome deterministic_commands() {
  const auto dir = work_dir / "determinism";
  fs::create_directories(dir);
  const std::string schema = data_dir + "/schema47.json", gen = data_dir + "/default_gen.json";
  auto path = [&](const std::string& name) { return (dir / name).string(); };
  std::ostringstream sink;

  // Each entry produces one artifact; it is run three times (threads 1, 1, 3).
  struct Step {
    std::string artifact;
    std::vector<std::string> args;
    bool threaded;
  };
  const std::vector<Step> steps{
      {"train.csv", {"generate", "--config", gen, "--n", "4000", "--seed", "5", "--years", "2012,2013"}, false},
      {"test.csv", {"generate", "--config", gen, "--n", "3000", "--seed", "6"}, false},
      {"calibrated.json",
       {"calibrate", "--config", gen, "--targets", data_dir + "/ame_targets.json", "--n", "20000", "--seed", "3"},
       false},
      {"fit.json", {"fit", "--data", path("train.csv"), "--schema", schema, "--eliminate"}, false},
      {"ranks.json", {"rank", "--data", path("train.csv"), "--schema", schema}, false},
      {"forest.json", {"train", "--train", path("train.csv"), "--schema", schema, "--seed", "8", "--trees", "8"}, true},
      {"curve.csv",
       {"curve", "--train", path("train.csv"), "--test", path("test.csv"), "--schema", schema, "--steps", "6,47",
        "--seed", "8", "--trees", "6"},
       true},
      {"fig2.csv",
       {"split-search", "--train", path("train.csv"), "--test", path("test.csv"), "--schema", schema, "--grid",
        "40,60", "--seed", "4", "--trees", "6"},
       true},
      {"composite.json",
       {"train-composite", "--train", path("train.csv"), "--schema", schema, "--seed", "2", "--trees", "6"},
       true},
      {"eval.json",
       {"evaluate", "--model", path("composite.json"), "--data", path("test.csv"), "--schema", schema},
       false},
      {"assignments.csv",
       {"predict", "--model", path("composite.json"), "--data", path("test.csv"), "--schema", schema, "--policies"},
       false},
  };
  std::vector<std::string> differing;
  for (const auto& step : steps) {
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "1", "3"}) {
      auto args = step.args;
      args.push_back("--out");
      args.push_back(path(step.artifact));
      if (step.threaded) {
        args.push_back("--threads");
        args.push_back(threads);
      }
      if (cli::run(args, sink, sink) != 0) return {false, step.args.front() + " failed: " + sink.str()};
      outputs.push_back(slurp(path(step.artifact)));
    }
    if (outputs[0] != outputs[1] || outputs[0] != outputs[2]) differing.push_back(step.artifact);
  }
  std::string detail = std::to_string(steps.size()) + " artifacts byte-identical across reruns and thread counts";
  if (!differing.empty()) {
    detail = "differing:";
    for (const auto& d : differing) detail += " " + d;
  }
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  work_dir = fs::temp_directory_path() / "vaxcast_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else if (arg == "--data-dir" && i + 1 < argc) {
      data_dir = argv[++i];
    } else if (arg == "--work-dir" && i + 1 < argc) {
      work_dir = argv[++i];
    } else {
      std::cerr << "usage: vaxcast_acceptance [--only N,M] [--data-dir DIR] [--work-dir DIR]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"probit score vs central differences", score_matches_finite_differences},
      {"probit MLE vs grid search", mle_matches_grid_search},
      {"marginal effect recovery", ames_recovered},
      {"null-group elimination", null_group_eliminated},
      {"metric identities and AUC", metric_identities},
      {"forest/tree reduction and XOR", forest_reduces_to_tree},
      {"bootstrap coverage", bootstrap_coverage},
      {"planted boundary recovery", boundary_recovered},
      {"Bayes-gap bound", near_bayes_accuracy},
      {"qualitative patterns", qualitative_patterns},
      {"determinism", deterministic_commands},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome result;
    try {
      result = criteria[k].second();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !result.pass;
    std::printf("[%s] criterion %2d  %-38s %s (%.1fs)\n", result.pass ? "PASS" : "FAIL", id,
                criteria[k].first.c_str(), result.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
