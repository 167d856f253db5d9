#pragma once

#include <algorithm>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "funnelkit/counterfactual.hpp"
#include "funnelkit/types.hpp"

namespace fktest {

inline funnelkit::ResultList list(std::initializer_list<const char*> ids, int k = 0) {
  funnelkit::ResultList r;
  for (const char* id : ids) r.items.emplace_back(id);
  r.k = k > 0 ? k : std::max<int>(1, static_cast<int>(r.items.size()));
  return r;
}

inline funnelkit::CandidateFeatures cand(const char* id, std::vector<double> f, funnelkit::Attributes attrs = {}) {
  return {funnelkit::ItemId(id), std::move(f), std::move(attrs)};
}

inline funnelkit::Scorer scorer(std::string name, std::vector<double> w, std::vector<funnelkit::BoostRule> boosts = {}) {
  funnelkit::Scorer s;
  s.variant.name = std::move(name);
  s.weights = std::move(w);
  s.boosts = std::move(boosts);
  return s;
}

inline funnelkit::CounterfactualRecord record(std::string qid, std::vector<funnelkit::CandidateFeatures> cands,
                                              funnelkit::Attributes attrs = {}) {
  funnelkit::CounterfactualRecord r;
  r.context.query_id = qid;
  r.context.user_id = "u_" + qid;
  r.context.query_text = "text " + qid;
  r.context.attributes = std::move(attrs);
  r.candidates = std::move(cands);
  r.served_variant.name = "prod";
  return r;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("funnelkit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fktest
