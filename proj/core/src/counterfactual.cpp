#include "funnelkit/counterfactual.hpp"

#include <algorithm>
#include <numeric>

#include "funnelkit/error.hpp"
#include "funnelkit/parallel.hpp"
#include "funnelkit/similarity.hpp"

namespace funnelkit {

double Scorer::score(const CandidateFeatures& c) const {
  if (c.features.size() != weights.size()) {
    throw Error("scorer '" + variant.name + "' has dimension " + std::to_string(weights.size()) +
                " but candidate '" + c.item.str() + "' has " + std::to_string(c.features.size()));
  }
  return score(c.features, c.attributes);
}

double Scorer::score(std::span<const double> features, const Attributes& attributes) const {
  if (features.size() != weights.size()) {
    throw Error("scorer '" + variant.name + "' has dimension " + std::to_string(weights.size()) +
                " but features have " + std::to_string(features.size()));
  }
  double s = std::inner_product(weights.begin(), weights.end(), features.begin(), 0.0);
  for (const auto& rule : boosts) {
    auto it = attributes.find(rule.attr);
    if (it != attributes.end() && it->second == rule.value) s += rule.boost;
  }
  return s;
}

ResultList reconstruct(const CounterfactualRecord& record, const Scorer& scorer, int k) {
  if (k < 1) throw Error("reconstruct: k must be >= 1");
  const auto& cands = record.candidates;
  std::vector<double> scores(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) scores[i] = scorer.score(cands[i]);

  std::vector<std::size_t> idx(cands.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::size_t x, std::size_t y) {
                      if (scores[x] != scores[y]) return scores[x] > scores[y];
                      return cands[x].item < cands[y].item;
                    });
  ResultList out;
  out.k = k;
  out.items.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.items.push_back(cands[idx[i]].item);
  return out;
}

ReconstructionQuality quality_check(std::span<const CounterfactualRecord> records,
                                    const Scorer& production_scorer) {
  if (records.empty()) throw Error("quality_check: no records");
  std::vector<SimilarityScore> sims(records.size());
  std::vector<char> exact(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = records[i];
    const ResultList rebuilt = reconstruct(r, production_scorer, r.served_results.k);
    sims[i] = similarity(rebuilt, r.served_results);
    exact[i] = rebuilt.items == r.served_results.items ? 1 : 0;
  });

  ReconstructionQuality q;
  q.n_queries = records.size();
  double sum_j = 0.0;
  double sum_s = 0.0;
  std::size_t n_exact = 0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    sum_j += sims[i].jaccard;
    if (sims[i].spearman) {
      sum_s += *sims[i].spearman;
      ++q.n_spearman;
    }
    n_exact += static_cast<std::size_t>(exact[i]);
  }
  const double n = static_cast<double>(records.size());
  q.mean_jaccard = sum_j / n;
  q.mean_spearman = q.n_spearman > 0 ? sum_s / static_cast<double>(q.n_spearman) : 0.0;
  q.exact_match_rate = static_cast<double>(n_exact) / n;
  return q;
}

std::vector<ReconstructedPair> reconstruct_pair(std::span<const CounterfactualRecord> records,
                                                const Scorer& scorer_a, const Scorer& scorer_b, int k) {
  std::vector<ReconstructedPair> out(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    out[i].query_id = records[i].context.query_id;
    out[i].a = reconstruct(records[i], scorer_a, k);
    out[i].b = reconstruct(records[i], scorer_b, k);
  });
  return out;
}

}  // namespace funnelkit
