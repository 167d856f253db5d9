#pragma once

// Rank-list similarity. Jaccard captures content overlap; Spearman over the
// shared items captures order change among the content both lists keep.

#include <cstddef>
#include <optional>

#include "funnelkit/types.hpp"

namespace funnelkit {

struct SimilarityScore {
  double jaccard = 1.0;
  std::optional<double> spearman;  // defined only when n_shared >= 2
  std::size_t n_shared = 0;
};

// |A ∩ B| / |A ∪ B|; two empty lists have similarity 1.
double jaccard(const ResultList& a, const ResultList& b);

// Spearman's rho over the shared items, with each list's ranks re-densified
// to 1..n over those items.
std::optional<double> spearman_shared(const ResultList& a, const ResultList& b);

SimilarityScore similarity(const ResultList& a, const ResultList& b);

}  // namespace funnelkit
