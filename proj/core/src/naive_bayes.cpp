#include <cmath>

#include "tree_internal.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/selection.hpp"

namespace vaxcast::forest {

NaiveBayesModel train_naive_bayes(const Dataset& data, const std::string& outcome,
                                  std::span<const std::string> features) {
  const auto& schema = data.schema();
  if (outcome != schema.outcome_name()) throw SchemaMismatchError("unknown outcome '" + outcome + "'");
  const auto labels = data.labels();
  if (labels.empty()) throw Error("forest", "cannot train on an empty dataset");

  NaiveBayesModel model;
  model.schema_fingerprint = schema.fingerprint();
  model.feature_index = detail::resolve_features(schema, features);
  std::array<double, 2> class_count{};
  for (auto y : labels) class_count[y] += 1.0;
  const double n = static_cast<double>(labels.size());
  for (int c = 0; c < 2; ++c) model.log_prior[c] = std::log((class_count[c] + 1.0) / (n + 2.0));

  for (auto j : model.feature_index) {
    const auto& spec = schema.feature(j);
    model.features.push_back(spec.name);
    const auto col = data.column(j);
    std::vector<double> cuts;
    std::size_t levels = 2;
    if (spec.kind == FeatureKind::continuous) {
      cuts = selection::equal_frequency_bins(col).cuts;
      levels = cuts.size() + 1;
    }
    const selection::Binning binning{cuts};
    std::array<std::vector<double>, 2> counts{std::vector<double>(levels, 0.0), std::vector<double>(levels, 0.0)};
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (is_missing(col[i])) throw Error("forest", "missing value in feature '" + spec.name + "'");
      const std::size_t level = spec.kind == FeatureKind::binary ? (col[i] != 0.0 ? 1 : 0) : binning.bin(col[i]);
      counts[labels[i]][level] += 1.0;
    }
    for (int c = 0; c < 2; ++c)
      for (auto& v : counts[c]) v = std::log((v + 1.0) / (class_count[c] + static_cast<double>(levels)));
    model.cuts.push_back(std::move(cuts));
    model.log_likelihood.push_back(std::move(counts));
  }
  return model;
}

namespace {

void check_fingerprint(const NaiveBayesModel& model, const Schema& schema) {
  const auto fp = schema.fingerprint();
  if (fp != model.schema_fingerprint)
    throw FingerprintMismatchError("schema fingerprint mismatch: model expects " + model.schema_fingerprint +
                                   ", data has " + fp);
}

template <typename ValueOf>
Prediction classify(const NaiveBayesModel& model, ValueOf&& value) {
  std::array<double, 2> score = model.log_prior;
  for (std::size_t k = 0; k < model.feature_index.size(); ++k) {
    const double v = value(model.feature_index[k]);
    if (is_missing(v)) throw Error("forest", "missing value in feature '" + model.features[k] + "'");
    const auto& table = model.log_likelihood[k];
    const bool binary = model.cuts[k].empty() && table[0].size() == 2;
    const std::size_t level = binary ? (v != 0.0 ? 1 : 0) : selection::Binning{model.cuts[k]}.bin(v);
    for (int c = 0; c < 2; ++c) score[c] += table[c][level];
  }
  Prediction p;
  p.score = 1.0 / (1.0 + std::exp(score[0] - score[1]));
  p.cls = p.score > 0.5 ? 1 : 0;
  return p;
}

}  // namespace

Prediction predict_nb(const NaiveBayesModel& model, const Dataset& data, std::size_t row) {
  check_fingerprint(model, data.schema());
  return classify(model, [&](std::size_t j) { return data.value(row, j); });
}

Prediction predict_nb(const NaiveBayesModel& model, const Schema& schema, const Record& record) {
  check_fingerprint(model, schema);
  return classify(model, [&](std::size_t j) { return record.values.at(j); });
}

}  // namespace vaxcast::forest
