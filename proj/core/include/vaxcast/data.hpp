#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace vaxcast {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double value) noexcept { return std::isnan(value); }

enum class FeatureKind { binary, continuous };

std::string_view to_string(FeatureKind kind) noexcept;
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::binary;
  std::string group;
  std::string description;
};

// Column names used by the sample restrictions. Education and marital status
// are one-hot groups, so a record is "missing education" when any member of
// the education group is missing.
struct RestrictionColumns {
  std::string education_group = "education";
  std::string income = "income";
  std::string marital_group = "marital";
};

// Ordered predictor set. Age is one of the predictors (continuous) and is
// also what the composite model routes on.
class Schema {
 public:
  Schema() = default;
  Schema(std::vector<FeatureSpec> features, std::string outcome_name = "flushot",
         std::string age_name = "age", RestrictionColumns restrictions = {});

  std::span<const FeatureSpec> features() const noexcept { return features_; }
  std::size_t size() const noexcept { return features_.size(); }
  const FeatureSpec& feature(std::size_t index) const { return features_.at(index); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  // Throws SchemaMismatchError when the name is unknown.
  std::size_t require(std::string_view name) const;

  const std::string& outcome_name() const noexcept { return outcome_name_; }
  const std::string& age_name() const noexcept { return age_name_; }
  std::size_t age_index() const noexcept { return age_index_; }
  const RestrictionColumns& restrictions() const noexcept { return restrictions_; }

  // Group labels in order of first appearance.
  std::vector<std::string> groups() const;
  std::vector<std::size_t> members(std::string_view group) const;
  std::vector<std::string> names() const;

  // 16 hex digits, FNV-1a over names, kinds and the outcome/age columns.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static Schema from_json(const nlohmann::json& doc);
  static Schema load(const std::string& path);

  friend bool operator==(const Schema& a, const Schema& b) { return a.fingerprint() == b.fingerprint(); }

 private:
  std::vector<FeatureSpec> features_;
  std::string outcome_name_ = "flushot";
  std::string age_name_ = "age";
  RestrictionColumns restrictions_;
  std::size_t age_index_ = 0;
};

// One surveyed individual. `values` is aligned with the schema's feature
// order; missing cells hold kMissing.
struct Record {
  std::vector<double> values;
  std::optional<int> outcome;
  int year = 2014;
  double weight = 1.0;
};

enum class Source { synthetic, ingested };

std::string_view to_string(Source source) noexcept;

// Column-major table of records. Immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  // Takes ownership of the columns and validates every cell against the
  // schema; throws SchemaMismatchError on the first violation.
  Dataset(Schema schema, std::vector<std::vector<double>> columns, std::vector<double> outcome,
          std::vector<int> years, std::vector<double> weights, Source source);

  static Dataset from_records(Schema schema, std::span<const Record> records, Source source);

  const Schema& schema() const noexcept { return schema_; }
  Source source() const noexcept { return source_; }
  std::size_t size() const noexcept { return outcome_.size(); }
  bool empty() const noexcept { return outcome_.empty(); }

  std::span<const double> column(std::size_t feature) const { return columns_.at(feature); }
  std::span<const double> column(std::string_view name) const { return column(schema_.require(name)); }
  std::span<const double> ages() const { return columns_.at(schema_.age_index()); }
  // Outcome per row as 0.0 / 1.0 / kMissing.
  std::span<const double> outcome() const noexcept { return outcome_; }
  std::span<const int> years() const noexcept { return years_; }
  std::span<const double> weights() const noexcept { return weights_; }

  double value(std::size_t row, std::size_t feature) const { return columns_[feature][row]; }
  Record record(std::size_t row) const;

  // Outcome as 0/1 labels; throws if any outcome is missing.
  std::vector<std::uint8_t> labels() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  template <typename Predicate>
  Dataset filter(Predicate&& keep) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i)
      if (keep(*this, i)) rows.push_back(i);
    return subset(rows);
  }

  // Rows with age <= boundary (young) or age > boundary (old).
  Dataset age_at_most(double boundary) const;
  Dataset age_above(double boundary) const;

  static Dataset concat(std::span<const Dataset> parts);

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> outcome_;
  std::vector<int> years_;
  std::vector<double> weights_;
  Source source_ = Source::synthetic;
};

// CSV with header: schema features in order, then `year` and the outcome
// column. An optional `weight` column is accepted. Missing cells are empty or
// "NA".
Dataset read_csv(std::istream& in, const Schema& schema, const std::string& origin = "<stream>");
Dataset read_csv(const std::string& path, const Schema& schema);
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::string& path, const Dataset& data);

struct RestrictionReport {
  std::size_t excluded_missing_outcome = 0;
  std::size_t excluded_missing_education = 0;
  std::size_t excluded_missing_income = 0;
  std::size_t excluded_missing_marital = 0;
  std::size_t retained = 0;

  std::size_t total() const noexcept {
    return excluded_missing_outcome + excluded_missing_education + excluded_missing_income +
           excluded_missing_marital + retained;
  }
};

struct Restricted {
  Dataset data;
  RestrictionReport report;
};

// Drops records missing outcome, education, income or marital status. Each
// excluded record is attributed to the first rule it violates, in that order.
Restricted apply_restrictions(const Dataset& data);

struct ColumnSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;  // divisor n - 1; 0 when n < 2
  std::size_t count = 0;
};

// Outcome first, then every feature in schema order. Missing values are
// skipped per column.
std::vector<ColumnSummary> summarize(const Dataset& data);

nlohmann::json to_json(const RestrictionReport& report);
nlohmann::json to_json(const std::vector<ColumnSummary>& summary);

}  // namespace vaxcast
