#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vaxcast/data.hpp"
#include "vaxcast/forest.hpp"
#include "vaxcast/rng.hpp"

namespace vaxcast::forest::detail {

// Each used feature re-coded as the rank of its value among the distinct
// values seen in training, so split search is counting rather than sorting.
struct CodedMatrix {
  std::vector<std::vector<std::uint32_t>> codes;  // [feature][row]
  std::vector<std::vector<double>> levels;        // [feature] sorted distinct values
  std::vector<std::size_t> schema_index;
  std::vector<std::uint8_t> labels;
  std::size_t max_levels = 0;

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t features() const noexcept { return codes.size(); }
};

CodedMatrix encode(const Dataset& data, std::span<const std::size_t> features);

std::vector<std::size_t> resolve_features(const Schema& schema, std::span<const std::string> names);

// Grows one tree on `rows` (may contain repeats, as in a bootstrap sample).
DecisionTree grow(const CodedMatrix& matrix, std::vector<std::uint32_t> rows, std::size_t max_depth,
                  std::size_t features_per_split, Rng& rng);

}  // namespace vaxcast::forest::detail
