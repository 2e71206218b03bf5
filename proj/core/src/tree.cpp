#include <algorithm>
#include <cmath>
#include <numeric>

#include "tree_internal.hpp"
#include "vaxcast/error.hpp"

namespace vaxcast::forest {

std::size_t FeaturesPerSplit::resolve(std::size_t feature_count) const {
  if (feature_count == 0) throw Error("forest", "no features to split on");
  switch (mode) {
    case Mode::all:
      return feature_count;
    case Mode::fixed:
      if (count < 1 || count > feature_count)
        throw Error("forest", "features_per_split must be in [1, " + std::to_string(feature_count) + "]");
      return count;
    case Mode::sqrt:
      break;
  }
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(feature_count))));
}

std::string FeaturesPerSplit::to_string() const {
  switch (mode) {
    case Mode::all:
      return "all";
    case Mode::fixed:
      return std::to_string(count);
    case Mode::sqrt:
      break;
  }
  return "sqrt";
}

FeaturesPerSplit FeaturesPerSplit::parse(std::string_view text) {
  if (text == "sqrt") return {};
  if (text == "all") return all();
  std::size_t k = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw Error("forest", "features_per_split must be sqrt, all or a count");
    k = k * 10 + static_cast<std::size_t>(c - '0');
  }
  if (text.empty() || k == 0) throw Error("forest", "features_per_split must be sqrt, all or a count");
  return fixed(k);
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    const auto [at, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes_[static_cast<std::size_t>(at)];
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

std::size_t DecisionTree::leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

bool operator==(const DecisionTree& a, const DecisionTree& b) {
  if (a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& x = a.nodes_[i];
    const auto& y = b.nodes_[i];
    if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.right != y.right ||
        x.cls != y.cls || x.counts != y.counts)
      return false;
  }
  return true;
}

namespace detail {

std::vector<std::size_t> resolve_features(const Schema& schema, std::span<const std::string> names) {
  std::vector<std::size_t> out;
  if (names.empty()) {
    out.resize(schema.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  for (const auto& name : names) out.push_back(schema.require(name));
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw Error("forest", "duplicate feature in list");
  return out;
}

CodedMatrix encode(const Dataset& data, std::span<const std::size_t> features) {
  if (data.empty()) throw Error("forest", "cannot train on an empty dataset");
  CodedMatrix m;
  m.labels = data.labels();
  m.schema_index.assign(features.begin(), features.end());
  const std::size_t n = data.size();
  for (const std::size_t j : features) {
    const auto col = data.column(j);
    std::vector<double> levels;
    levels.reserve(n);
    for (double v : col) {
      if (is_missing(v))
        throw Error("forest", "missing value in feature '" + data.schema().feature(j).name + "'");
      levels.push_back(v);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<std::uint32_t> codes(n);
    if (levels.size() == 2 && levels[0] == 0.0 && levels[1] == 1.0) {
      for (std::size_t i = 0; i < n; ++i) codes[i] = col[i] != 0.0 ? 1u : 0u;
    } else {
      for (std::size_t i = 0; i < n; ++i)
        codes[i] = static_cast<std::uint32_t>(std::lower_bound(levels.begin(), levels.end(), col[i]) - levels.begin());
    }
    m.max_levels = std::max(m.max_levels, levels.size());
    m.codes.push_back(std::move(codes));
    m.levels.push_back(std::move(levels));
  }
  return m;
}

namespace {

double entropy2(double a, double b) {
  const double n = a + b;
  if (a == 0.0 || b == 0.0) return 0.0;
  const double pa = a / n, pb = b / n;
  return -(pa * std::log2(pa) + pb * std::log2(pb));
}

// Gains at or below this are treated as zero; they are rounding residue of
// splits that do not separate the classes.
constexpr double kMinGain = 1e-12;

struct Split {
  std::size_t feature = 0;  // index into the coded matrix
  std::uint32_t cut = 0;    // rows with code <= cut go left
  std::uint32_t next = 0;   // smallest code on the right
  double gain = 0.0;
};

class Grower {
 public:
  Grower(const CodedMatrix& m, std::size_t max_depth, std::size_t mtry, Rng& rng)
      : m_(m), max_depth_(max_depth), mtry_(mtry), rng_(rng), hist_(m.max_levels), perm_(m.features()) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    touched_.reserve(m.max_levels);
  }

  DecisionTree run(std::vector<std::uint32_t> rows) {
    rows_ = std::move(rows);
    if (rows_.empty()) throw Error("forest", "cannot grow a tree on zero rows");
    nodes_.clear();
    nodes_.emplace_back();
    struct Task {
      int node;
      std::size_t begin, end, depth;
    };
    std::vector<Task> stack{{0, 0, rows_.size(), 0}};
    while (!stack.empty()) {
      const Task t = stack.back();
      stack.pop_back();
      std::array<std::uint32_t, 2> counts{};
      for (std::size_t i = t.begin; i < t.end; ++i) ++counts[m_.labels[rows_[i]]];
      auto& node = nodes_[static_cast<std::size_t>(t.node)];
      node.counts = counts;
      node.cls = counts[1] > counts[0] ? 1 : 0;
      if (t.depth >= max_depth_ || counts[0] == 0 || counts[1] == 0) continue;

      const Split best = find_split(t.begin, t.end, counts);
      if (best.gain <= kMinGain) continue;

      const auto& codes = m_.codes[best.feature];
      const auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                      rows_.begin() + static_cast<std::ptrdiff_t>(t.end),
                                      [&](std::uint32_t r) { return codes[r] <= best.cut; });
      const auto split_at = static_cast<std::size_t>(mid - rows_.begin());
      const auto& levels = m_.levels[best.feature];
      const int left = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      nodes_.emplace_back();
      auto& parent = nodes_[static_cast<std::size_t>(t.node)];
      parent.feature = static_cast<int>(m_.schema_index[best.feature]);
      parent.threshold = 0.5 * (levels[best.cut] + levels[best.next]);
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({left + 1, split_at, t.end, t.depth + 1});
      stack.push_back({left, t.begin, split_at, t.depth + 1});
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  Split find_split(std::size_t begin, std::size_t end, const std::array<std::uint32_t, 2>& counts) {
    // Partial Fisher-Yates: the first mtry slots of perm_ become the sample.
    const std::size_t f = perm_.size();
    for (std::size_t k = 0; k < mtry_; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng_.below(f - k));
      std::swap(perm_[k], perm_[pick]);
    }
    candidates_.assign(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(candidates_.begin(), candidates_.end());

    const double total0 = counts[0], total1 = counts[1];
    const double n = total0 + total1;
    const double parent = entropy2(total0, total1);
    Split best;
    for (const std::size_t feature : candidates_) {
      const auto& codes = m_.codes[feature];
      if (m_.levels[feature].size() < 2) continue;
      touched_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t r = rows_[i];
        auto& h = hist_[codes[r]];
        if (h[0] + h[1] == 0) touched_.push_back(codes[r]);
        ++h[m_.labels[r]];
      }
      if (touched_.size() >= 2) {
        std::sort(touched_.begin(), touched_.end());
        double left0 = 0.0, left1 = 0.0;
        for (std::size_t k = 0; k + 1 < touched_.size(); ++k) {
          const auto& h = hist_[touched_[k]];
          left0 += h[0];
          left1 += h[1];
          const double nl = left0 + left1;
          const double right0 = total0 - left0, right1 = total1 - left1;
          const double gain =
              parent - (nl / n) * entropy2(left0, left1) - ((n - nl) / n) * entropy2(right0, right1);
          if (gain > best.gain) best = {feature, touched_[k], touched_[k + 1], gain};
        }
      }
      for (const auto c : touched_) hist_[c] = {0, 0};
    }
    return best;
  }

  const CodedMatrix& m_;
  std::size_t max_depth_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<std::array<std::uint32_t, 2>> hist_;
  std::vector<std::uint32_t> touched_;
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> candidates_;
  std::vector<std::uint32_t> rows_;
  std::vector<DecisionTree::Node> nodes_;
};

}  // namespace

DecisionTree grow(const CodedMatrix& matrix, std::vector<std::uint32_t> rows, std::size_t max_depth,
                  std::size_t features_per_split, Rng& rng) {
  if (features_per_split < 1 || features_per_split > matrix.features())
    throw Error("forest", "features_per_split out of range");
  Grower grower(matrix, max_depth, features_per_split, rng);
  return grower.run(std::move(rows));
}

}  // namespace detail

DecisionTree train_tree(const Dataset& data, const std::string& outcome, const TreeOptions& options, Rng& rng) {
  if (outcome != data.schema().outcome_name()) throw SchemaMismatchError("unknown outcome '" + outcome + "'");
  const auto features = detail::resolve_features(data.schema(), options.features);
  const auto matrix = detail::encode(data, features);
  std::vector<std::uint32_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0u);
  return detail::grow(matrix, std::move(rows), options.max_depth, options.features_per_split.resolve(features.size()),
                      rng);
}

}  // namespace vaxcast::forest
