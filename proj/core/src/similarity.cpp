#include "funnelkit/similarity.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace funnelkit {
namespace {

// Items of `a` that also occur in `b`, in a's order, with b's original index.
struct Shared {
  std::vector<std::size_t> b_index;  // b position of the i-th shared item in a-order
};

Shared shared_items(const ResultList& a, const ResultList& b) {
  std::unordered_map<std::string_view, std::size_t> pos_b;
  pos_b.reserve(b.items.size());
  for (std::size_t i = 0; i < b.items.size(); ++i) pos_b.emplace(b.items[i].str(), i);
  Shared s;
  for (const auto& id : a.items) {
    if (auto it = pos_b.find(id.str()); it != pos_b.end()) s.b_index.push_back(it->second);
  }
  return s;
}

}  // namespace

double jaccard(const ResultList& a, const ResultList& b) {
  if (a.items.empty() && b.items.empty()) return 1.0;
  std::unordered_set<std::string_view> set_a;
  for (const auto& id : a.items) set_a.insert(id.str());
  std::unordered_set<std::string_view> set_b;
  std::size_t inter = 0;
  for (const auto& id : b.items) {
    if (set_b.insert(id.str()).second && set_a.contains(id.str())) ++inter;
  }
  const std::size_t uni = set_a.size() + set_b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> spearman_shared(const ResultList& a, const ResultList& b) {
  const Shared s = shared_items(a, b);
  const std::size_t n = s.b_index.size();
  if (n < 2) return std::nullopt;
  // Dense rank in a is the position i in a-order; dense rank in b is the
  // number of shared items with a smaller b index.
  std::vector<std::size_t> order(s.b_index);
  std::vector<std::size_t> sorted(order);
  std::sort(sorted.begin(), sorted.end());
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto rank_b =
        static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), order[i]) - sorted.begin());
    const double d = static_cast<double>(i) - static_cast<double>(rank_b);
    sum_d2 += d * d;
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * sum_d2 / (nn * (nn * nn - 1.0));
}

SimilarityScore similarity(const ResultList& a, const ResultList& b) {
  SimilarityScore s;
  s.jaccard = jaccard(a, b);
  s.n_shared = shared_items(a, b).b_index.size();
  s.spearman = spearman_shared(a, b);
  return s;
}

}  // namespace funnelkit
