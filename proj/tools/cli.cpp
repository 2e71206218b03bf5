#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vaxcast/data.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/evaluation.hpp"
#include "vaxcast/forest.hpp"
#include "vaxcast/pipeline.hpp"
#include "vaxcast/probit.hpp"
#include "vaxcast/selection.hpp"
#include "vaxcast/synth.hpp"

namespace vaxcast::cli {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("cli", "failed writing '" + path + "'");
}

void write_json(const std::string& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

// Shortest text that parses back to the same double.
std::string number(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string number(const std::optional<double>& v) { return v ? number(*v) : "NA"; }

Dataset load_data(const std::vector<std::string>& paths, const Schema& schema) {
  std::vector<Dataset> parts;
  for (const auto& p : paths) parts.push_back(read_csv(p, schema));
  return parts.size() == 1 ? std::move(parts.front()) : Dataset::concat(parts);
}

// Explicitly given options of a parsed subcommand, enough to rebuild argv.
json invocation(const CLI::App& sub) {
  json options = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help" || names.front() == "threads" || opt->count() == 0) continue;
    if (opt->get_type_size() == 0)
      options[names.front()] = true;
    else
      options[names.front()] = opt->results();
  }
  return {{"command", sub.get_name()}, {"version", kVersion}, {"options", std::move(options)}};
}

struct ForestOptions {
  std::size_t trees = 25;
  std::size_t max_depth = 20;
  std::string features_per_split = "sqrt";
  bool no_bagging = false;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  void attach(CLI::App* sub) {
    sub->add_option("--trees", trees, "number of trees")->capture_default_str();
    sub->add_option("--max-depth", max_depth, "maximum tree depth")->capture_default_str();
    sub->add_option("--features-per-split", features_per_split, "sqrt, all or a count")->capture_default_str();
    sub->add_flag("--no-bagging", no_bagging, "train every tree on the full set");
    sub->add_option("--seed", seed, "random seed")->required();
    sub->add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();
  }

  forest::ForestConfig config() const {
    forest::ForestConfig c;
    c.n_trees = trees;
    c.max_depth = max_depth;
    c.features_per_split = forest::FeaturesPerSplit::parse(features_per_split);
    c.bagging = !no_bagging;
    c.seed = seed;
    c.threads = threads;
    return c;
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// generate ----------------------------------------------------------------

struct GenerateCmd {
  std::string config, out, report;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<int> years;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "generator config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--n", n, "records per year (overrides the config)");
    sub->add_option("--seed", seed, "random seed")->required();
    sub->add_option("--years", years, "survey years, e.g. 2009,2010")->delimiter(',');
    sub->add_option("--out", out, "output CSV")->required();
    sub->add_option("--report", report, "optional JSON report");
  }

  void run(const CLI::App& sub, Context& ctx) const {
    auto cfg = synth::GeneratorConfig::load(config);
    if (n > 0) cfg.n = n;
    cfg.seed = seed;
    const auto yrs = years.empty() ? std::vector<int>{cfg.year} : years;
    const auto data = synth::generate_years(cfg, yrs);
    write_csv(out, data);
    if (!report.empty())
      write_json(report, {{"invocation", invocation(sub)},
                          {"generator", cfg.to_json()},
                          {"years", yrs},
                          {"records", data.size()},
                          {"summary", to_json(summarize(data))}});
    ctx.out << "wrote " << data.size() << " records to " << out << "\n";
  }
};

// calibrate ---------------------------------------------------------------

struct CalibrateCmd {
  std::string config, targets, out;
  std::size_t n = 200000;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  int max_sweeps = 60;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "base generator config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--targets", targets, "AME targets JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--n", n, "simulation sample size")->capture_default_str();
    sub->add_option("--seed", seed, "simulation seed")->required();
    sub->add_option("--tolerance", tolerance, "max AME error (probability units)")->capture_default_str();
    sub->add_option("--max-sweeps", max_sweeps, "coordinate sweeps")->capture_default_str();
    sub->add_option("--out", out, "calibrated config JSON")->required();
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto base = synth::GeneratorConfig::load(config);
    const auto doc = load_json(targets);
    synth::CalibrationOptions opts;
    opts.n = n;
    opts.seed = seed;
    opts.tolerance = tolerance;
    opts.max_sweeps = max_sweeps;
    std::map<std::string, double> ames;
    try {
      ames = doc.at("ame").get<std::map<std::string, double>>();
      if (doc.contains("prevalence")) opts.prevalence = doc.at("prevalence").get<double>();
    } catch (const json::exception& e) {
      throw Error("synth", std::string("malformed targets file: ") + e.what());
    }
    const auto result = synth::calibrate(ames, base, opts);
    auto doc_out = result.config.to_json();
    doc_out["calibration"] = {{"invocation", invocation(sub)},
                              {"targets", ames},
                              {"target_prevalence", opts.prevalence ? json(*opts.prevalence) : json(nullptr)},
                              {"achieved", result.achieved},
                              {"achieved_prevalence", result.achieved_prevalence},
                              {"sweeps", result.sweeps}};
    write_json(out, doc_out);
    ctx.out << "calibrated " << ames.size() << " coefficients in " << result.sweeps << " sweeps\n";
  }
};

// fit ---------------------------------------------------------------------

struct FitCmd {
  std::vector<std::string> data, terms;
  std::string schema, out, test = "wald";
  bool eliminate = false;
  int max_rounds = 4;

  void attach(CLI::App* sub) {
    sub->add_option("--data", data, "input CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--terms", terms, "terms to fit (default: every feature)")->delimiter(',');
    sub->add_flag("--eliminate", eliminate, "drop groups that fail a joint test at 5%");
    sub->add_option("--test", test, "group test: wald or lr")
        ->check(CLI::IsMember({"wald", "lr"}))
        ->capture_default_str();
    sub->add_option("--max-rounds", max_rounds, "elimination rounds")->capture_default_str();
    sub->add_option("--out", out, "report JSON")->required();
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto restricted = apply_restrictions(load_data(data, sch));
    const auto& d = restricted.data;
    json report = {{"invocation", invocation(sub)}, {"restrictions", to_json(restricted.report)}};
    probit::ProbitFit fit;
    if (eliminate) {
      const auto kind = test == "lr" ? probit::TestKind::likelihood_ratio : probit::TestKind::wald;
      auto result = probit::eliminate_groups(d, sch, sch.outcome_name(), max_rounds, kind);
      report["elimination"] = to_json(result);
      fit = std::move(result.fit);
    } else {
      const auto names = terms.empty() ? sch.names() : terms;
      fit = probit::fit(d, names, sch.outcome_name());
    }
    json ames = json::array();
    for (const auto& s : probit::marginal_effects(fit, d)) ames.push_back(to_json(s));
    json tests = json::array();
    for (const auto& g : sch.groups()) {
      std::vector<std::string> members;
      for (auto j : sch.members(g))
        if (fit.term_index(sch.feature(j).name)) members.push_back(sch.feature(j).name);
      if (!members.empty()) tests.push_back(to_json(probit::group_test(fit, members, g)));
    }
    report["fit"] = to_json(fit);
    report["marginal_effects"] = std::move(ames);
    report["group_tests"] = std::move(tests);
    write_json(out, report);
    ctx.out << "fit " << fit.terms.size() << " terms on " << fit.n_used << " records, pseudo R2 "
            << fit.pseudo_r2 << "\n";
  }
};

// rank --------------------------------------------------------------------

struct RankCmd {
  std::vector<std::string> data;
  std::string schema, out, method = "all";

  void attach(CLI::App* sub) {
    sub->add_option("--data", data, "input CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--method", method, "info_gain, gain_ratio, chi_squared, symmetric_uncertainty or all")
        ->capture_default_str();
    sub->add_option("--out", out, "report JSON")->required();
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto d = apply_restrictions(load_data(data, sch)).data;
    const auto methods = method == "all" ? selection::all_rank_methods()
                                         : std::vector<selection::RankMethod>{selection::parse_rank_method(method)};
    json rankings = json::array();
    for (auto m : methods) {
      const auto r = selection::rank(d, sch.outcome_name(), m);
      rankings.push_back(to_json(r));
      ctx.out << selection::to_string(m) << ":";
      for (std::size_t i = 0; i < std::min<std::size_t>(6, r.order.size()); ++i) ctx.out << " " << r.order[i];
      ctx.out << "\n";
    }
    write_json(out, {{"invocation", invocation(sub)}, {"records", d.size()}, {"rankings", std::move(rankings)}});
  }
};

// curve -------------------------------------------------------------------

struct CurveCmd {
  std::vector<std::string> train, test;
  std::string schema, out, report, ranks, method = "info_gain", classifier = "forest";
  std::vector<std::size_t> steps;
  ForestOptions forest;

  void attach(CLI::App* sub) {
    sub->add_option("--train", train, "training CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--test", test, "test CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--ranks", ranks, "rank report from training data (default: rank --train)")
        ->check(CLI::ExistingFile);
    sub->add_option("--method", method, "ranking method")->capture_default_str();
    sub->add_option("--classifier", classifier, "forest, naive_bayes or tree")
        ->check(CLI::IsMember({"forest", "naive_bayes", "tree"}))
        ->capture_default_str();
    sub->add_option("--steps", steps, "feature counts (default 6, 9, 12, ... , all)")->delimiter(',');
    forest.attach(sub);
    sub->add_option("--out", out, "curve CSV")->required();
    sub->add_option("--report", report, "optional JSON report");
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto tr = apply_restrictions(load_data(train, sch)).data;
    const auto te = apply_restrictions(load_data(test, sch)).data;
    const auto wanted = selection::parse_rank_method(method);
    std::optional<selection::FeatureRanking> ranking;
    if (ranks.empty()) {
      ranking = selection::rank(tr, sch.outcome_name(), wanted);
    } else {
      const auto doc = load_json(ranks);
      for (const auto& r : doc.at("rankings"))
        if (r.at("method").get<std::string>() == selection::to_string(wanted)) ranking = selection::ranking_from_json(r);
      if (!ranking) throw Error("selection", "'" + ranks + "' has no " + method + " ranking");
    }
    auto ks = steps;
    if (ks.empty()) {
      for (std::size_t k = 6; k < sch.size(); k += 3) ks.push_back(k);
      ks.push_back(sch.size());
    }
    selection::ClassifierSpec spec = forest.config();
    if (classifier == "naive_bayes") spec = selection::NaiveBayesSpec{};
    if (classifier == "tree") spec = selection::SingleTreeSpec{forest.max_depth, forest.seed};
    const auto curve = selection::incremental_eval(tr, te, *ranking, ks, spec);
    std::ostringstream csv;
    csv << "n_features,ppv,npv,acc,auc\n";
    json points = json::array();
    for (const auto& p : curve) {
      csv << p.n_features << "," << number(p.metrics.ppv) << "," << number(p.metrics.npv) << ","
          << number(p.metrics.acc) << "," << number(p.metrics.auc) << "\n";
      points.push_back(to_json(p));
    }
    write_text(out, csv.str());
    if (!report.empty())
      write_json(report, {{"invocation", invocation(sub)},
                          {"classifier", selection::classifier_name(spec)},
                          {"forest", to_json(forest.config())},
                          {"ranking", to_json(*ranking)},
                          {"points", std::move(points)}});
    ctx.out << "evaluated " << curve.size() << " prefixes\n";
  }
};

// train -------------------------------------------------------------------

struct TrainCmd {
  std::vector<std::string> train, features;
  std::string schema, out;
  ForestOptions forest;

  void attach(CLI::App* sub) {
    sub->add_option("--train", train, "training CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--features", features, "features to use (default: all)")->delimiter(',');
    forest.attach(sub);
    sub->add_option("--out", out, "forest model JSON")->required();
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto tr = apply_restrictions(load_data(train, sch)).data;
    const auto model = forest::train_forest(tr, sch.outcome_name(), forest.config(), features);
    auto doc = to_json(model);
    doc["invocation"] = invocation(sub);
    write_json(out, doc);
    ctx.out << "trained " << model.trees.size() << " trees on " << tr.size() << " records\n";
  }
};

// split-search ------------------------------------------------------------

struct SplitSearchCmd {
  std::vector<std::string> train, test;
  std::string schema, out, report;
  std::vector<int> grid{30, 40, 50, 60, 70};
  ForestOptions forest;

  void attach(CLI::App* sub) {
    sub->add_option("--train", train, "training CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--test", test, "test CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--grid", grid, "ascending boundary ages")->delimiter(',');
    forest.attach(sub);
    sub->add_option("--out", out, "per-boundary CSV")->required();
    sub->add_option("--report", report, "optional JSON report");
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto tr = apply_restrictions(load_data(train, sch)).data;
    const auto te = apply_restrictions(load_data(test, sch)).data;
    const auto result = pipeline::split_search(tr, te, grid, forest.config());
    std::ostringstream csv;
    csv << "boundary,young_ppv,old_npv,young_n,old_n\n";
    for (const auto& [b, m] : result.per_boundary)
      csv << b << "," << number(m.young_ppv) << "," << number(m.old_npv) << "," << m.young_n << "," << m.old_n
          << "\n";
    write_text(out, csv.str());
    for (const auto& s : result.skipped)
      ctx.err << "vaxcast: warning: pipeline: boundary " << s.boundary << " skipped (" << s.reason << ")\n";
    if (!report.empty()) {
      auto doc = to_json(result);
      doc["invocation"] = invocation(sub);
      doc["forest"] = to_json(forest.config());
      write_json(report, doc);
    }
    ctx.out << "chosen boundary " << result.chosen_boundary << "\n";
  }
};

// train-composite ---------------------------------------------------------

struct TrainCompositeCmd {
  std::vector<std::string> train;
  std::string schema, out, young_training = "full";
  int boundary = 60;
  ForestOptions forest;

  void attach(CLI::App* sub) {
    sub->add_option("--train", train, "training CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--boundary", boundary, "age boundary")->capture_default_str();
    sub->add_option("--young-training", young_training, "full or subset")
        ->check(CLI::IsMember({"full", "subset"}))
        ->capture_default_str();
    forest.attach(sub);
    sub->add_option("--out", out, "composite model JSON")->required();
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto tr = apply_restrictions(load_data(train, sch)).data;
    const auto model = pipeline::train_composite(tr, boundary, forest.config(),
                                                 pipeline::parse_young_training(young_training));
    auto doc = to_json(model);
    doc["invocation"] = invocation(sub);
    write_json(out, doc);
    ctx.out << "trained composite at boundary " << boundary << " (old expert on " << model.old_model.n_train
            << " records)\n";
  }
};

// evaluate / predict ------------------------------------------------------

struct LoadedModel {
  std::optional<forest::Forest> single;
  std::optional<pipeline::CompositeModel> composite;
};

LoadedModel load_model(const std::string& path) {
  const auto doc = load_json(path);
  const auto kind = doc.value("kind", std::string{});
  LoadedModel m;
  if (kind == "forest")
    m.single = forest::forest_from_json(doc);
  else if (kind == "composite")
    m.composite = pipeline::composite_from_json(doc);
  else
    throw Error("cli", "'" + path + "' is not a forest or composite model");
  return m;
}

void check_model_schema(const LoadedModel& m, const Schema& schema) {
  const auto& expected = m.single ? m.single->schema_fingerprint : m.composite->schema_fingerprint;
  if (expected != schema.fingerprint())
    throw FingerprintMismatchError("schema fingerprint mismatch: model expects " + expected + ", data has " +
                                   schema.fingerprint());
}

// Schema positions the model reads, including the routing age of a composite.
std::vector<std::size_t> model_inputs(const LoadedModel& m, const Schema& schema) {
  if (m.single) return m.single->feature_index;
  auto inputs = m.composite->young_model.feature_index;
  const auto& old = m.composite->old_model.feature_index;
  inputs.insert(inputs.end(), old.begin(), old.end());
  inputs.push_back(schema.age_index());
  return inputs;
}

struct Scored {
  std::vector<std::uint8_t> cls;
  std::vector<double> score;
  std::vector<pipeline::Expert> expert;
};

Scored score_all(const LoadedModel& m, const Dataset& d) {
  Scored s;
  if (m.single) {
    for (const auto& p : forest::predict_all(*m.single, d)) {
      s.cls.push_back(p.cls);
      s.score.push_back(p.score);
    }
  } else {
    for (const auto& p : pipeline::predict_composite_all(*m.composite, d)) {
      s.cls.push_back(p.cls);
      s.score.push_back(p.score);
      s.expert.push_back(p.expert_used);
    }
  }
  return s;
}

struct EvaluateCmd {
  std::vector<std::string> data;
  std::string model, schema, out, roc;

  void attach(CLI::App* sub) {
    sub->add_option("--model", model, "forest or composite model JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data, "test CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--roc-points", roc, "optional ROC CSV");
    sub->add_option("--out", out, "report JSON")->required();
  }

  void run(const CLI::App& sub, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto m = load_model(model);
    check_model_schema(m, sch);
    const auto d = apply_restrictions(load_data(data, sch)).data;
    const auto s = score_all(m, d);
    const auto truth = d.labels();
    const auto overall = metrics(confusion(s.cls, truth), s.score, truth);
    json report = {{"invocation", invocation(sub)}, {"model_kind", m.single ? "forest" : "composite"},
                   {"metrics", to_json(overall)}};
    if (m.composite) {
      json experts = json::object();
      for (auto e : {pipeline::Expert::young, pipeline::Expert::old}) {
        std::vector<std::uint8_t> cls, y;
        std::vector<double> sc;
        for (std::size_t i = 0; i < d.size(); ++i)
          if (s.expert[i] == e) {
            cls.push_back(s.cls[i]);
            y.push_back(truth[i]);
            sc.push_back(s.score[i]);
          }
        if (!cls.empty()) experts[std::string(pipeline::to_string(e))] = to_json(metrics(confusion(cls, y), sc, y));
      }
      std::map<std::string, std::size_t> policies;
      for (std::size_t i = 0; i < d.size(); ++i)
        ++policies[std::string(pipeline::to_string(pipeline::policy_for(s.expert[i], s.cls[i])))];
      report["boundary"] = m.composite->boundary;
      report["experts"] = std::move(experts);
      report["policy_counts"] = policies;
    }
    write_json(out, report);
    if (!roc.empty()) {
      std::ostringstream csv;
      csv << "threshold,tpr,fpr\n";
      for (const auto& p : roc_points(s.score, truth))
        csv << number(p.threshold) << "," << number(p.tpr) << "," << number(p.fpr) << "\n";
      write_text(roc, csv.str());
    }
    ctx.out << "ppv " << number(overall.ppv) << " npv " << number(overall.npv) << " acc " << overall.acc << "\n";
  }
};

struct PredictCmd {
  std::vector<std::string> data;
  std::string model, schema, out;
  bool policies = false;

  void attach(CLI::App* sub) {
    sub->add_option("--model", model, "forest or composite model JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data, "input CSV files")->required()->check(CLI::ExistingFile);
    sub->add_option("--schema", schema, "schema JSON")->required()->check(CLI::ExistingFile);
    sub->add_flag("--policies", policies, "add the promotion policy per record (composite only)");
    sub->add_option("--out", out, "predictions CSV")->required();
  }

  void run(const CLI::App&, Context& ctx) const {
    const auto sch = Schema::load(schema);
    const auto m = load_model(model);
    check_model_schema(m, sch);
    if (policies && !m.composite) throw Error("cli", "--policies needs a composite model");
    const auto all = load_data(data, sch);
    const auto inputs = model_inputs(m, sch);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (std::none_of(inputs.begin(), inputs.end(), [&](std::size_t j) { return is_missing(all.value(i, j)); }))
        rows.push_back(i);
    const auto d = all.subset(rows);
    const auto s = score_all(m, d);
    std::ostringstream csv;
    csv << "row,class,score";
    if (m.composite) csv << ",expert";
    if (policies) csv << ",policy";
    csv << "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
      csv << rows[i] << "," << int{s.cls[i]} << "," << number(s.score[i]);
      if (m.composite) csv << "," << pipeline::to_string(s.expert[i]);
      if (policies) csv << "," << pipeline::to_string(pipeline::policy_for(s.expert[i], s.cls[i]));
      csv << "\n";
    }
    write_text(out, csv.str());
    ctx.out << "wrote " << d.size() << " predictions to " << out;
    if (rows.size() < all.size()) ctx.out << " (" << all.size() - rows.size() << " records with missing inputs skipped)";
    ctx.out << "\n";
  }
};

// Rebuilds argv from a report's invocation block.
std::vector<std::string> replay_args(const json& doc) {
  const json* inv = nullptr;
  if (doc.contains("invocation"))
    inv = &doc.at("invocation");
  else if (doc.contains("calibration") && doc.at("calibration").contains("invocation"))
    inv = &doc.at("calibration").at("invocation");
  if (!inv) throw Error("cli", "report has no invocation block");
  if (inv->value("version", std::string{}) != kVersion)
    throw Error("cli", "report was written by vaxcast " + inv->value("version", std::string("?")));
  std::vector<std::string> args{inv->at("command").get<std::string>()};
  for (const auto& [name, value] : inv->at("options").items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + name);
      continue;
    }
    for (const auto& v : value) args.push_back("--" + name + "=" + v.get<std::string>());
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vaxcast: flu-shot uptake modelling and screening"};
  app.name("vaxcast");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenerateCmd generate;
  CalibrateCmd calibrate;
  FitCmd fit;
  RankCmd rank;
  CurveCmd curve;
  TrainCmd train;
  SplitSearchCmd split;
  TrainCompositeCmd composite;
  EvaluateCmd evaluate;
  PredictCmd predict;
  std::string replay_path;
  std::size_t replay_threads = 0;

  std::map<std::string, std::function<void(const CLI::App&, Context&)>> handlers;
  auto reg = [&](auto& cmd, const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    cmd.attach(sub);
    handlers[name] = [&cmd](const CLI::App& s, Context& c) { cmd.run(s, c); };
  };
  reg(generate, "generate", "draw a synthetic population");
  reg(calibrate, "calibrate", "solve latent coefficients for target marginal effects");
  reg(fit, "fit", "probit fit, marginal effects and group tests");
  reg(rank, "rank", "rank features against the outcome");
  reg(curve, "curve", "accuracy as ranked features are added");
  reg(train, "train", "train a random forest");
  reg(split, "split-search", "evaluate age boundaries for a two-expert model");
  reg(composite, "train-composite", "train the age-routed two-expert model");
  reg(evaluate, "evaluate", "score a model on labelled data");
  reg(predict, "predict", "predict classes and promotion policies");
  auto* replay = app.add_subcommand("replay", "rerun the command recorded in a report");
  replay->add_option("--report", replay_path, "report or model JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--threads", replay_threads, "worker threads for the rerun");

  Context ctx{out, err};
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "vaxcast: error: cli: " << msg << "\n";
    return 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    if (sub->get_name() == "replay") {
      auto again = replay_args(load_json(replay_path));
      if (replay_threads > 0 && again.front() != "generate" && again.front() != "calibrate" &&
          again.front() != "fit" && again.front() != "rank" && again.front() != "evaluate" &&
          again.front() != "predict")
        again.push_back("--threads=" + std::to_string(replay_threads));
      return run(again, out, err);
    }
    handlers.at(sub->get_name())(*sub, ctx);
  } catch (const Error& e) {
    err << "vaxcast: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "vaxcast: error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace vaxcast::cli
