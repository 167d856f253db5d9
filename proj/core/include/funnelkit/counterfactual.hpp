#pragma once

// Counterfactual reconstruction: re-rank logged candidates with any variant's
// scorer and quality-check the pipeline against what was actually served.

#include <span>
#include <string>
#include <vector>

#include "funnelkit/types.hpp"

namespace funnelkit {

// Adds `boost` to every candidate whose item metadata has attr == value.
struct BoostRule {
  std::string attr;
  std::string value;
  double boost = 0.0;

  friend bool operator==(const BoostRule&, const BoostRule&) = default;
};

// Linear scorer plus additive boost rules.
struct Scorer {
  VariantId variant;
  std::vector<double> weights;
  std::vector<BoostRule> boosts;

  double score(const CandidateFeatures& c) const;
  double score(std::span<const double> features, const Attributes& attributes) const;

  friend bool operator==(const Scorer&, const Scorer&) = default;
};

struct ReconstructionQuality {
  double mean_jaccard = 0.0;
  double mean_spearman = 0.0;  // over queries where spearman is defined
  std::size_t n_spearman = 0;
  double exact_match_rate = 0.0;
  std::size_t n_queries = 0;
};

struct ReconstructedPair {
  std::string query_id;
  ResultList a;
  ResultList b;
};

// Candidates sorted by descending score, ties by ascending item id,
// truncated to k. Throws Error on dimension mismatch or k < 1.
ResultList reconstruct(const CounterfactualRecord& record, const Scorer& scorer, int k);

// Reconstructs each record with the production scorer at the served depth and
// compares against served_results. Throws Error on empty input.
ReconstructionQuality quality_check(std::span<const CounterfactualRecord> records,
                                    const Scorer& production_scorer);

std::vector<ReconstructedPair> reconstruct_pair(std::span<const CounterfactualRecord> records,
                                                const Scorer& scorer_a, const Scorer& scorer_b, int k);

}  // namespace funnelkit
