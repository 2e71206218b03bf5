#include "vaxcast/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vaxcast/error.hpp"

namespace vaxcast {

using nlohmann::json;

std::string_view to_string(FeatureKind kind) noexcept {
  return kind == FeatureKind::binary ? "binary" : "continuous";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "binary") return FeatureKind::binary;
  if (text == "continuous") return FeatureKind::continuous;
  throw SchemaMismatchError("unknown feature kind '" + std::string(text) + "'");
}

std::string_view to_string(Source source) noexcept {
  return source == Source::synthetic ? "synthetic" : "ingested";
}

Schema::Schema(std::vector<FeatureSpec> features, std::string outcome_name, std::string age_name,
               RestrictionColumns restrictions)
    : features_(std::move(features)),
      outcome_name_(std::move(outcome_name)),
      age_name_(std::move(age_name)),
      restrictions_(std::move(restrictions)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaMismatchError("feature with empty name");
    if (f.group.empty()) throw SchemaMismatchError("feature '" + f.name + "' has no group");
    if (!seen.insert(f.name).second) throw SchemaMismatchError("duplicate feature '" + f.name + "'");
  }
  for (const char* reserved : {"year", "weight"})
    if (seen.contains(reserved)) throw SchemaMismatchError(std::string("reserved column name '") + reserved + "'");
  if (seen.contains(outcome_name_)) throw SchemaMismatchError("outcome '" + outcome_name_ + "' listed as a feature");
  const auto age = index_of(age_name_);
  if (!age) throw SchemaMismatchError("schema has no age column '" + age_name_ + "'");
  if (features_[*age].kind != FeatureKind::continuous)
    throw SchemaMismatchError("age column '" + age_name_ + "' must be continuous");
  age_index_ = *age;
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name == name) return i;
  return std::nullopt;
}

std::size_t Schema::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw SchemaMismatchError("unknown feature '" + std::string(name) + "'");
}

std::vector<std::string> Schema::groups() const {
  std::vector<std::string> out;
  for (const auto& f : features_)
    if (std::find(out.begin(), out.end(), f.group) == out.end()) out.push_back(f.group);
  return out;
}

std::vector<std::size_t> Schema::members(std::string_view group) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].group == group) out.push_back(i);
  return out;
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::string Schema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& f : features_) {
    feed(f.name);
    feed(to_string(f.kind));
  }
  feed(outcome_name_);
  feed(age_name_);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json Schema::to_json() const {
  json features = json::array();
  for (const auto& f : features_) {
    json entry = {{"name", f.name}, {"kind", to_string(f.kind)}, {"group", f.group}};
    if (!f.description.empty()) entry["description"] = f.description;
    features.push_back(std::move(entry));
  }
  return {{"outcome", outcome_name_},
          {"age", age_name_},
          {"restrictions",
           {{"education_group", restrictions_.education_group},
            {"income", restrictions_.income},
            {"marital_group", restrictions_.marital_group}}},
          {"features", std::move(features)}};
}

Schema Schema::from_json(const json& doc) {
  try {
    std::vector<FeatureSpec> features;
    for (const auto& entry : doc.at("features")) {
      features.push_back({entry.at("name").get<std::string>(),
                          feature_kind_from_string(entry.at("kind").get<std::string>()),
                          entry.at("group").get<std::string>(), entry.value("description", std::string{})});
    }
    RestrictionColumns restrictions;
    if (doc.contains("restrictions")) {
      const auto& r = doc.at("restrictions");
      restrictions.education_group = r.value("education_group", restrictions.education_group);
      restrictions.income = r.value("income", restrictions.income);
      restrictions.marital_group = r.value("marital_group", restrictions.marital_group);
    }
    return Schema(std::move(features), doc.value("outcome", std::string("flushot")),
                  doc.value("age", std::string("age")), std::move(restrictions));
  } catch (const json::exception& e) {
    throw SchemaMismatchError(std::string("malformed schema document: ") + e.what());
  }
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("schema file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

namespace {

void check_binary(double v, const std::string& what) {
  if (!is_missing(v) && v != 0.0 && v != 1.0)
    throw SchemaMismatchError(what + " must be 0, 1 or missing");
}

}  // namespace

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> columns, std::vector<double> outcome,
                 std::vector<int> years, std::vector<double> weights, Source source)
    : schema_(std::move(schema)),
      columns_(std::move(columns)),
      outcome_(std::move(outcome)),
      years_(std::move(years)),
      weights_(std::move(weights)),
      source_(source) {
  const std::size_t n = outcome_.size();
  if (columns_.size() != schema_.size())
    throw SchemaMismatchError("dataset has " + std::to_string(columns_.size()) + " columns, schema has " +
                              std::to_string(schema_.size()));
  if (years_.size() != n || weights_.size() != n)
    throw SchemaMismatchError("year/weight columns do not match record count");
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& spec = schema_.feature(j);
    if (columns_[j].size() != n) throw SchemaMismatchError("column '" + spec.name + "' has wrong length");
    for (std::size_t i = 0; i < n; ++i) {
      const double v = columns_[j][i];
      if (spec.kind == FeatureKind::binary) {
        check_binary(v, "binary feature '" + spec.name + "' (row " + std::to_string(i) + ")");
      } else if (!is_missing(v) && !std::isfinite(v)) {
        throw SchemaMismatchError("non-finite value in '" + spec.name + "' (row " + std::to_string(i) + ")");
      }
    }
  }
  const auto& age = columns_[schema_.age_index()];
  for (std::size_t i = 0; i < n; ++i) {
    const double a = age[i];
    if (is_missing(a) || a < 12.0 || a > 110.0 || a != std::floor(a))
      throw SchemaMismatchError("age must be an integer in [12, 110] (row " + std::to_string(i) + ")");
    check_binary(outcome_[i], "outcome (row " + std::to_string(i) + ")");
    if (years_[i] < 2009 || years_[i] > 2014)
      throw SchemaMismatchError("survey year must be in [2009, 2014] (row " + std::to_string(i) + ")");
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i]))
      throw SchemaMismatchError("weight must be nonnegative (row " + std::to_string(i) + ")");
  }
}

Dataset Dataset::from_records(Schema schema, std::span<const Record> records, Source source) {
  const std::size_t n = records.size();
  std::vector<std::vector<double>> columns(schema.size(), std::vector<double>(n));
  std::vector<double> outcome(n);
  std::vector<int> years(n);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (r.values.size() != schema.size())
      throw SchemaMismatchError("record " + std::to_string(i) + " has " + std::to_string(r.values.size()) +
                                " values, schema has " + std::to_string(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) columns[j][i] = r.values[j];
    outcome[i] = r.outcome ? static_cast<double>(*r.outcome) : kMissing;
    years[i] = r.year;
    weights[i] = r.weight;
  }
  return Dataset(std::move(schema), std::move(columns), std::move(outcome), std::move(years), std::move(weights),
                 source);
}

Record Dataset::record(std::size_t row) const {
  Record r;
  r.values.reserve(columns_.size());
  for (const auto& c : columns_) r.values.push_back(c.at(row));
  if (!is_missing(outcome_[row])) r.outcome = static_cast<int>(outcome_[row]);
  r.year = years_[row];
  r.weight = weights_[row];
  return r;
}

std::vector<std::uint8_t> Dataset::labels() const {
  std::vector<std::uint8_t> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (is_missing(outcome_[i])) throw Error("data", "outcome missing at row " + std::to_string(i));
    out[i] = outcome_[i] != 0.0 ? 1 : 0;
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.schema_ = schema_;
  out.source_ = source_;
  out.columns_.assign(columns_.size(), {});
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    auto& dst = out.columns_[j];
    dst.reserve(rows.size());
    for (auto r : rows) dst.push_back(columns_[j].at(r));
  }
  out.outcome_.reserve(rows.size());
  out.years_.reserve(rows.size());
  out.weights_.reserve(rows.size());
  for (auto r : rows) {
    out.outcome_.push_back(outcome_.at(r));
    out.years_.push_back(years_[r]);
    out.weights_.push_back(weights_[r]);
  }
  return out;
}

Dataset Dataset::age_at_most(double boundary) const {
  const auto age = ages();
  return filter([&](const Dataset&, std::size_t i) { return age[i] <= boundary; });
}

Dataset Dataset::age_above(double boundary) const {
  const auto age = ages();
  return filter([&](const Dataset&, std::size_t i) { return age[i] > boundary; });
}

Dataset Dataset::concat(std::span<const Dataset> parts) {
  if (parts.empty()) throw Error("data", "concat of zero datasets");
  Dataset out;
  out.schema_ = parts.front().schema_;
  out.source_ = parts.front().source_;
  out.columns_.assign(out.schema_.size(), {});
  const std::string fp = out.schema_.fingerprint();
  for (const auto& p : parts) {
    if (p.schema_.fingerprint() != fp) throw SchemaMismatchError("concat of datasets with different schemas");
    for (std::size_t j = 0; j < out.columns_.size(); ++j)
      out.columns_[j].insert(out.columns_[j].end(), p.columns_[j].begin(), p.columns_[j].end());
    out.outcome_.insert(out.outcome_.end(), p.outcome_.begin(), p.outcome_.end());
    out.years_.insert(out.years_.end(), p.years_.begin(), p.years_.end());
    out.weights_.insert(out.weights_.end(), p.weights_.begin(), p.weights_.end());
    if (p.source_ != out.source_) out.source_ = Source::ingested;
  }
  return out;
}

Restricted apply_restrictions(const Dataset& data) {
  const auto& schema = data.schema();
  const auto& cols = schema.restrictions();
  const auto education = schema.members(cols.education_group);
  const auto marital = schema.members(cols.marital_group);
  if (education.empty()) throw SchemaMismatchError("schema has no '" + cols.education_group + "' group");
  if (marital.empty()) throw SchemaMismatchError("schema has no '" + cols.marital_group + "' group");
  const std::size_t income = schema.require(cols.income);

  auto any_missing = [&](const std::vector<std::size_t>& members, std::size_t row) {
    return std::any_of(members.begin(), members.end(),
                       [&](std::size_t j) { return is_missing(data.value(row, j)); });
  };

  RestrictionReport report;
  std::vector<std::size_t> keep;
  keep.reserve(data.size());
  const auto outcome = data.outcome();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (is_missing(outcome[i])) {
      ++report.excluded_missing_outcome;
    } else if (any_missing(education, i)) {
      ++report.excluded_missing_education;
    } else if (is_missing(data.value(i, income))) {
      ++report.excluded_missing_income;
    } else if (any_missing(marital, i)) {
      ++report.excluded_missing_marital;
    } else {
      keep.push_back(i);
    }
  }
  report.retained = keep.size();
  return {data.subset(keep), report};
}

std::vector<ColumnSummary> summarize(const Dataset& data) {
  if (data.empty()) throw Error("data", "cannot summarize an empty dataset");
  auto describe = [](std::string name, std::span<const double> values) {
    ColumnSummary s{std::move(name)};
    long double sum = 0.0L;
    for (double v : values)
      if (!is_missing(v)) {
        sum += v;
        ++s.count;
      }
    if (s.count == 0) {
      s.mean = kMissing;
      s.sd = kMissing;
      return s;
    }
    const long double mean = sum / static_cast<long double>(s.count);
    long double ss = 0.0L;
    for (double v : values)
      if (!is_missing(v)) ss += (v - mean) * (v - mean);
    s.mean = static_cast<double>(mean);
    s.sd = s.count > 1 ? static_cast<double>(std::sqrt(ss / static_cast<long double>(s.count - 1))) : 0.0;
    return s;
  };
  std::vector<ColumnSummary> out;
  out.push_back(describe(data.schema().outcome_name(), data.outcome()));
  for (std::size_t j = 0; j < data.schema().size(); ++j)
    out.push_back(describe(data.schema().feature(j).name, data.column(j)));
  return out;
}

json to_json(const RestrictionReport& r) {
  return {{"excluded_missing_outcome", r.excluded_missing_outcome},
          {"excluded_missing_education", r.excluded_missing_education},
          {"excluded_missing_income", r.excluded_missing_income},
          {"excluded_missing_marital", r.excluded_missing_marital},
          {"retained", r.retained}};
}

json to_json(const std::vector<ColumnSummary>& summary) {
  json rows = json::array();
  for (const auto& s : summary) {
    json row = {{"name", s.name}, {"count", s.count}};
    row["mean"] = is_missing(s.mean) ? json(nullptr) : json(s.mean);
    row["sd"] = is_missing(s.sd) ? json(nullptr) : json(s.sd);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace vaxcast
