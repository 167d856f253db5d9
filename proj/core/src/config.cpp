#include "funnelkit/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <toml.hpp>

#include "funnelkit/jsonl.hpp"
#include "funnelkit/offline_validate.hpp"
#include "funnelkit/verify.hpp"

namespace funnelkit {
namespace {

using Kind = FunnelConfigError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& msg) { throw FunnelConfigError(kind, msg); }

// Typed access to one TOML table that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool present() const { return table_ != nullptr; }
  bool has(std::string_view key) const { return table_ && table_->contains(key); }

  const toml::node* node(std::string_view key) {
    if (!table_) return nullptr;
    seen_.emplace(key);
    return table_->get(key);
  }

  std::string where(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  template <typename T>
  void integer(std::string_view key, T& out, long long lo = 0) {
    const toml::node* n = node(key);
    if (!n) return;
    auto v = n->value<std::int64_t>();
    if (!n->is_integer() || !v) fail(Kind::invalid_value, "key '" + where(key) + "' must be an integer");
    if (*v < lo) fail(Kind::invalid_value, "key '" + where(key) + "' must be >= " + std::to_string(lo));
    out = static_cast<T>(*v);
  }

  void seed(std::string_view key, std::uint64_t& out) {
    const toml::node* n = node(key);
    if (!n) return;
    auto v = n->value<std::int64_t>();
    if (!n->is_integer() || !v || *v < 0) fail(Kind::invalid_value, "key '" + where(key) + "' must be a non-negative integer");
    out = static_cast<std::uint64_t>(*v);
  }

  void real(std::string_view key, double& out) {
    const toml::node* n = node(key);
    if (!n) return;
    auto v = n->value<double>();
    if (!(n->is_floating_point() || n->is_integer()) || !v || !std::isfinite(*v)) {
      fail(Kind::invalid_value, "key '" + where(key) + "' must be a finite number");
    }
    out = *v;
  }

  void real(std::string_view key, std::optional<double>& out) {
    if (!has(key)) {
      node(key);
      return;
    }
    double v = 0.0;
    real(key, v);
    out = v;
  }

  void boolean(std::string_view key, bool& out) {
    const toml::node* n = node(key);
    if (!n) return;
    if (!n->is_boolean()) fail(Kind::invalid_value, "key '" + where(key) + "' must be a boolean");
    out = *n->value<bool>();
  }

  void string(std::string_view key, std::string& out) {
    const toml::node* n = node(key);
    if (!n) return;
    if (!n->is_string()) fail(Kind::invalid_value, "key '" + where(key) + "' must be a string");
    out = *n->value<std::string>();
  }

  void strings(std::string_view key, std::vector<std::string>& out) {
    const toml::node* n = node(key);
    if (!n) return;
    const toml::array* a = n->as_array();
    if (!a) fail(Kind::invalid_value, "key '" + where(key) + "' must be an array of strings");
    out.clear();
    for (const auto& e : *a) {
      if (!e.is_string()) fail(Kind::invalid_value, "key '" + where(key) + "' must be an array of strings");
      out.push_back(*e.value<std::string>());
    }
  }

  void reals(std::string_view key, std::vector<double>& out) {
    const toml::node* n = node(key);
    if (!n) return;
    const toml::array* a = n->as_array();
    if (!a) fail(Kind::invalid_value, "key '" + where(key) + "' must be an array of numbers");
    out.clear();
    for (const auto& e : *a) {
      auto v = e.value<double>();
      if (!(e.is_floating_point() || e.is_integer()) || !v) {
        fail(Kind::invalid_value, "key '" + where(key) + "' must be an array of numbers");
      }
      out.push_back(*v);
    }
  }

  const toml::table* table(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(Kind::invalid_value, "key '" + where(key) + "' must be a table");
    return n->as_table();
  }

  const toml::array* array_of_tables(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    const toml::array* a = n->as_array();
    if (!a || !a->is_array_of_tables()) fail(Kind::invalid_value, "key '" + where(key) + "' must be an array of tables");
    return a;
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, _] : *table_) {
      const std::string key(k.str());
      if (!seen_.count(key)) fail(Kind::unknown_key, "unknown key '" + where(key) + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const toml::table* table_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

const toml::table* table_or_fail(const toml::node* n, const std::string& where) {
  if (!n) return nullptr;
  if (!n->is_table()) fail(Kind::invalid_value, "key '" + where + "' must be a table");
  return n->as_table();
}

void read_world(Section s, FunnelConfig& c) {
  auto& w = c.world;
  if (s.has("seed")) c.world_seed_explicit = true;
  s.seed("seed", w.seed);
  s.integer("n_items", w.n_items, 1);
  s.integer("n_users", w.n_users, 1);
  s.integer("n_queries", w.n_queries, 1);
  s.integer("feature_dim", w.feature_dim, 1);
  s.integer("retrieval_depth", w.retrieval_depth, 1);
  s.integer("display_k", w.display_k, 1);
  s.real("examination_decay", w.examination_decay);
  s.real("relevance_click_prob", w.relevance_click_prob);
  s.real("nonrelevance_click_prob", w.nonrelevance_click_prob);
  s.real("long_query_share", w.long_query_share);
  s.real("podcast_share", w.podcast_share);
  s.real("podcast_long_affinity", w.podcast_long_affinity);
  s.real("popularity_weight", w.popularity_weight);
  s.real("relevance_noise", w.relevance_noise);
  s.real("relevance_threshold", w.relevance_threshold);
  s.real("user_scale_spread", w.user_scale_spread);
  std::string mode = w.relevance_mode == RelevanceMode::single_best ? "single_best" : "threshold";
  s.string("relevance_mode", mode);
  if (mode == "threshold") {
    w.relevance_mode = RelevanceMode::threshold;
  } else if (mode == "single_best") {
    w.relevance_mode = RelevanceMode::single_best;
  } else {
    fail(Kind::invalid_value, "key 'world.relevance_mode' must be \"threshold\" or \"single_best\"");
  }
  s.integer("max_enumeration", w.max_enumeration, 1);
  s.finish();
  try {
    validate(w);
  } catch (const ConfigError& e) {
    fail(Kind::invalid_value, std::string("world: ") + e.what());
  }
}

Scorer read_variant(Section s, const std::string& name) {
  Scorer sc;
  sc.variant.name = name;
  s.reals("weights", sc.weights);
  if (sc.weights.empty()) fail(Kind::invalid_value, "variant '" + name + "' needs a non-empty 'weights' array");
  if (const toml::array* boosts = s.array_of_tables("boosts")) {
    for (std::size_t i = 0; i < boosts->size(); ++i) {
      Section b((*boosts)[i].as_table(), s.where("boosts") + "[" + std::to_string(i) + "]");
      BoostRule r;
      b.string("attr", r.attr);
      b.string("value", r.value);
      b.real("boost", r.boost);
      if (r.attr.empty()) fail(Kind::invalid_value, "key '" + b.where("attr") + "' is required");
      b.finish();
      sc.boosts.push_back(std::move(r));
    }
  }
  s.finish();
  return sc;
}

void read_validate(Section s, ValidateSettings& v) {
  s.integer("k", v.k, 1);
  s.real("w_max", v.w_max);
  if (!(v.w_max >= 1.0)) fail(Kind::invalid_value, "key 'offline_validate.w_max' must be >= 1");
  std::vector<std::string> sources;
  s.strings("sources", sources);
  for (const auto& src : sources) {
    auto parsed = parse_judgment_source(src);
    if (!parsed) fail(Kind::invalid_value, "unknown judgment source '" + src + "' in offline_validate.sources");
    v.sources.insert(*parsed);
  }
  s.real("examination_decay", v.examination_decay);
  if (v.examination_decay && !(*v.examination_decay > 0.0 && *v.examination_decay <= 1.0)) {
    fail(Kind::invalid_value, "key 'offline_validate.examination_decay' must be in (0, 1]");
  }
  s.finish();
}

void read_interleave(Section s, InterleaveConfig& c) {
  s.integer("n_queries", c.n_queries);
  s.integer("k", c.k, 1);
  s.real("alpha", c.alpha);
  s.finish();
}

void read_abtest(Section s, AbTestConfig& c) {
  s.integer("n_users", c.n_users);
  s.strings("metrics", c.metrics);
  for (const auto& m : c.metrics) {
    if (!is_known_metric(m)) fail(Kind::invalid_value, "unknown metric '" + m + "' in abtest.metrics");
  }
  if (c.metrics.empty()) fail(Kind::invalid_value, "key 'abtest.metrics' must not be empty");
  std::string filter(to_string(c.filter));
  s.string("filter", filter);
  auto level = parse_exposure_level(filter);
  if (!level) fail(Kind::invalid_value, "key 'abtest.filter' must be none, query_level or user_level");
  c.filter = *level;
  if (s.has("cuped_covariate")) {
    std::string cov;
    s.string("cuped_covariate", cov);
    if (cov != "pre_success_rate") fail(Kind::invalid_value, "key 'abtest.cuped_covariate' supports only \"pre_success_rate\"");
    c.cuped_covariate = cov;
  } else {
    s.node("cuped_covariate");
  }
  s.real("alpha", c.alpha);
  s.real("treatment_share", c.treatment_share);
  s.real("rho_mix", c.rho_mix);
  s.integer("min_units", c.min_units);
  s.string("salt", c.salt);
  s.integer("k", c.k, 1);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail(Kind::invalid_value, "key 'abtest.alpha' must be in (0, 1)");
  if (!(c.treatment_share > 0.0 && c.treatment_share < 1.0)) {
    fail(Kind::invalid_value, "key 'abtest.treatment_share' must be in (0, 1)");
  }
  if (c.rho_mix && !(*c.rho_mix > 0.0)) fail(Kind::invalid_value, "key 'abtest.rho_mix' must be > 0");
  s.finish();
}

void read_bandit(Section s, BanditSettings& b) {
  s.integer("horizon", b.horizon, 1);
  s.integer("k", b.k, 1);
  std::string strategy(to_string(b.config.strategy));
  s.string("strategy", strategy);
  auto parsed = parse_bandit_strategy(strategy);
  if (!parsed) fail(Kind::invalid_value, "key 'bandit.strategy' must be thompson or epsilon_greedy");
  b.config.strategy = *parsed;
  s.real("epsilon", b.config.epsilon);
  s.real("prior_alpha", b.config.prior_alpha);
  s.real("prior_beta", b.config.prior_beta);
  if (!(b.config.epsilon >= 0.0 && b.config.epsilon <= 1.0)) fail(Kind::invalid_value, "key 'bandit.epsilon' must be in [0, 1]");
  if (!(b.config.prior_alpha > 0.0 && b.config.prior_beta > 0.0)) {
    fail(Kind::invalid_value, "bandit priors must be > 0");
  }
  s.finish();
}

void read_bo(Section s, BoSettings& b) {
  std::string mode = b.mode == BoMode::online ? "online" : "offline";
  s.string("mode", mode);
  if (mode == "offline") {
    b.mode = BoMode::offline;
  } else if (mode == "online") {
    b.mode = BoMode::online;
    b.config.kernel.noise_variance = 0.1;
  } else {
    fail(Kind::invalid_value, "key 'bo.mode' must be offline or online");
  }
  s.integer("budget", b.config.budget, 1);
  s.integer("initial_design", b.config.initial_design, 1);
  s.integer("n_candidates", b.config.n_candidates, 1);
  s.real("signal_variance", b.config.kernel.signal_variance);
  s.real("length_scale", b.config.kernel.length_scale);
  s.real("noise_variance", b.config.kernel.noise_variance);
  if (!(b.config.kernel.signal_variance > 0.0 && b.config.kernel.length_scale > 0.0 &&
        b.config.kernel.noise_variance >= 0.0)) {
    fail(Kind::invalid_value, "bo kernel parameters must be positive");
  }
  s.string("attr", b.attr);
  s.string("value", b.value);
  s.real("target", b.target);
  s.integer("k", b.k, 1);
  if (const toml::array* params = s.array_of_tables("parameters")) {
    for (std::size_t i = 0; i < params->size(); ++i) {
      Section p((*params)[i].as_table(), "bo.parameters[" + std::to_string(i) + "]");
      TemplateParameter tp;
      p.string("name", tp.name);
      std::string target = "weight";
      p.string("target", target);
      if (target == "weight") {
        tp.target = TemplateParameter::Target::weight;
      } else if (target == "boost") {
        tp.target = TemplateParameter::Target::boost;
      } else {
        fail(Kind::invalid_value, "key '" + p.where("target") + "' must be weight or boost");
      }
      p.integer("index", tp.index);
      p.real("lo", tp.lo);
      p.real("hi", tp.hi);
      if (tp.name.empty()) fail(Kind::invalid_value, "key '" + p.where("name") + "' is required");
      if (!(tp.hi > tp.lo)) fail(Kind::invalid_value, "bo parameter '" + tp.name + "' needs hi > lo");
      p.finish();
      b.parameters.push_back(std::move(tp));
    }
  }
  if (b.parameters.size() > 8) fail(Kind::invalid_value, "bo supports at most 8 parameters");
  s.finish();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Splits "stage.rest" when the prefix names a stage.
std::pair<std::optional<Stage>, std::string> split_qualified(const std::string& stat) {
  const auto dot = stat.find('.');
  if (dot != std::string::npos) {
    if (auto s = parse_stage(std::string_view(stat).substr(0, dot))) return {s, stat.substr(dot + 1)};
  }
  return {std::nullopt, stat};
}

void resolve_criteria(Section& root, FunnelConfig& c) {
  const toml::array* list = root.array_of_tables("criteria");
  if (!list) return;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list->size(); ++i) {
    Section s((*list)[i].as_table(), "criteria[" + std::to_string(i) + "]");
    Criterion cr;
    std::string stage_name;
    std::string cmp;
    std::string kind = "necessary";
    s.string("id", cr.id);
    s.string("stage", stage_name);
    s.string("stat", cr.stat);
    s.string("cmp", cmp);
    s.real("threshold", cr.threshold);
    s.string("kind", kind);
    if (!s.has("threshold")) fail(Kind::invalid_value, "key '" + s.where("threshold") + "' is required");
    s.finish();
    if (cr.id.empty()) fail(Kind::invalid_value, "key '" + s.where("id") + "' is required");
    if (!ids.insert(cr.id).second) fail(Kind::invalid_value, "duplicate criterion id '" + cr.id + "'");
    if (cr.stat.empty()) fail(Kind::invalid_value, "criterion '" + cr.id + "' needs a 'stat'");
    auto parsed_cmp = parse_comparator(cmp);
    if (!parsed_cmp) fail(Kind::invalid_value, "criterion '" + cr.id + "' has invalid cmp '" + cmp + "'");
    cr.cmp = *parsed_cmp;
    auto parsed_kind = parse_criterion_kind(kind);
    if (!parsed_kind) fail(Kind::invalid_value, "criterion '" + cr.id + "' has invalid kind '" + kind + "'");
    cr.kind = *parsed_kind;

    auto stage = parse_stage(stage_name);
    if (!stage) fail(Kind::unknown_stage, "criterion '" + cr.id + "' names unknown stage '" + stage_name + "'");
    if (!c.has_stage(*stage)) {
      fail(Kind::unknown_stage, "criterion '" + cr.id + "' belongs to stage '" + stage_name +
                                    "' which is not in the configured stages");
    }
    cr.stage = stage_name;
    const auto pos = [&](Stage s) {
      return static_cast<std::size_t>(std::find(c.stages.begin(), c.stages.end(), s) - c.stages.begin());
    };
    const std::size_t own = pos(*stage);

    auto [qualifier, bare] = split_qualified(cr.stat);
    std::optional<Stage> source;
    if (qualifier) {
      if (!c.has_stage(*qualifier) || !stage_produces(c, *qualifier, bare)) {
        fail(Kind::dangling_statistic, "criterion '" + cr.id + "' references statistic '" + cr.stat +
                                           "' that no configured stage produces");
      }
      source = qualifier;
    } else {
      if (stage_produces(c, *stage, bare)) {
        source = stage;
      } else {
        for (std::size_t p = own; p-- > 0;) {
          if (stage_produces(c, c.stages[p], bare)) {
            source = c.stages[p];
            break;
          }
        }
        for (std::size_t p = own + 1; !source && p < c.stages.size(); ++p) {
          if (stage_produces(c, c.stages[p], bare)) source = c.stages[p];
        }
      }
      if (!source) {
        fail(Kind::dangling_statistic,
             "criterion '" + cr.id + "' references statistic '" + cr.stat + "' that no configured stage produces");
      }
    }
    if (pos(*source) > own) {
      fail(Kind::later_stage_reference, "criterion '" + cr.id + "' at stage '" + stage_name +
                                            "' references statistic '" + bare + "' of later stage '" +
                                            std::string(to_string(*source)) + "'");
    }
    cr.stat = bare;
    c.criteria.push_back(ResolvedCriterion{cr, *stage, *source});
  }

  std::set<Stage> sufficient;
  for (const auto& rc : c.criteria) {
    if (rc.criterion.kind == CriterionKind::sufficient) sufficient.insert(rc.stage);
  }
  if (sufficient.size() > 1) {
    std::string names;
    for (Stage s : c.stages) {
      if (!sufficient.count(s)) continue;
      names += names.empty() ? "" : ", ";
      names += to_string(s);
    }
    fail(Kind::multiple_sufficient_stages, "sufficient criteria are allowed in at most one stage, found in: " + names);
  }
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::reconstruction_quality:
      return "reconstruction_quality";
    case Stage::offline_verify:
      return "offline_verify";
    case Stage::offline_validate:
      return "offline_validate";
    case Stage::interleave:
      return "interleave";
    case Stage::abtest:
      return "abtest";
    case Stage::bandit:
      return "bandit";
    case Stage::bo:
      return "bo";
  }
  return "unknown";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> kAll{Stage::reconstruction_quality, Stage::offline_verify, Stage::offline_validate,
                                       Stage::interleave,             Stage::abtest,         Stage::bandit,
                                       Stage::bo};
  return kAll;
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

bool FunnelConfig::has_stage(Stage s) const { return std::find(stages.begin(), stages.end(), s) != stages.end(); }

std::vector<Criterion> FunnelConfig::criteria_for(Stage stage) const {
  std::vector<Criterion> out;
  for (const auto& rc : criteria) {
    if (rc.stage == stage) out.push_back(rc.criterion);
  }
  return out;
}

bool stage_produces(const FunnelConfig& c, Stage stage, std::string_view stat) {
  switch (stage) {
    case Stage::reconstruction_quality:
      return stat == "mean_jaccard" || stat == "mean_spearman" || stat == "exact_match_rate" || stat == "n_queries";
    case Stage::offline_verify:
      return is_verification_statistic(stat, c.verify.segment_attrs);
    case Stage::offline_validate:
      return is_offline_validation_statistic(stat);
    case Stage::interleave:
      return is_interleave_statistic(stat);
    case Stage::abtest:
      return is_abtest_statistic(stat, c.abtest.metrics);
    case Stage::bandit: {
      const std::string names[] = {c.control, c.candidate};
      return is_bandit_statistic(stat, names);
    }
    case Stage::bo: {
      ScorerTemplate t;
      t.parameters = c.bo.parameters;
      return is_bo_statistic(stat, t);
    }
  }
  return false;
}

FunnelConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML syntax error: " << e.description() << " at line " << e.source().begin.line;
    fail(Kind::syntax, msg.str());
  }

  FunnelConfig c;
  Section root(&doc, "");
  root.seed("seed", c.seed);
  std::string out_dir;
  root.string("output_dir", out_dir);
  if (!out_dir.empty()) c.output_dir = resolve(base_dir, out_dir);

  std::vector<std::string> stage_names;
  root.strings("stages", stage_names);
  if (stage_names.empty()) fail(Kind::invalid_value, "key 'stages' must list at least one stage");
  for (const auto& name : stage_names) {
    auto s = parse_stage(name);
    if (!s) fail(Kind::unknown_stage, "unknown stage '" + name + "'");
    if (c.has_stage(*s)) fail(Kind::invalid_value, "stage '" + name + "' listed twice");
    c.stages.push_back(*s);
  }

  root.string("control", c.control);
  root.string("candidate", c.candidate);
  if (const toml::table* variants = root.table("variants")) {
    for (const auto& [name, node] : *variants) {
      const std::string n(name.str());
      c.variants.emplace(n, read_variant(Section(table_or_fail(&node, "variants." + n), "variants." + n), n));
    }
  }
  for (const auto* role : {&c.control, &c.candidate}) {
    if (!c.variants.count(*role)) {
      fail(Kind::missing_variant, "variant '" + *role + "' is not defined under [variants]");
    }
  }
  if (c.control == c.candidate) fail(Kind::invalid_value, "control and candidate must name different variants");
  if (c.control_scorer().weights.size() != c.candidate_scorer().weights.size()) {
    fail(Kind::invalid_value, "variants '" + c.control + "' and '" + c.candidate + "' have different weight dimensions");
  }

  read_world(Section(root.table("world"), "world"), c);
  if (!c.world_seed_explicit) c.world.seed = c.seed;

  if (const toml::table* data = root.table("data")) {
    Section d(data, "data");
    std::string p;
    if (d.has("counterfactual_log")) {
      d.string("counterfactual_log", p);
      c.data.counterfactual_log = resolve(base_dir, p);
    }
    if (d.has("interaction_log")) {
      d.string("interaction_log", p);
      c.data.interaction_log = resolve(base_dir, p);
    }
    if (d.has("judgments")) {
      d.string("judgments", p);
      c.data.judgments = resolve(base_dir, p);
    }
    d.finish();
    if ((c.data.interaction_log || c.data.judgments) && !c.data.counterfactual_log) {
      fail(Kind::invalid_value, "data.interaction_log and data.judgments require data.counterfactual_log");
    }
  }

  if (const toml::table* t = root.table("offline_verify")) {
    Section s(t, "offline_verify");
    s.strings("segment_attrs", c.verify.segment_attrs);
    s.finish();
  }
  if (const toml::table* t = root.table("reconstruction_quality")) Section(t, "reconstruction_quality").finish();
  read_validate(Section(root.table("offline_validate"), "offline_validate"), c.validate);
  read_interleave(Section(root.table("interleave"), "interleave"), c.interleave);
  read_abtest(Section(root.table("abtest"), "abtest"), c.abtest);
  read_bandit(Section(root.table("bandit"), "bandit"), c.bandit);
  read_bo(Section(root.table("bo"), "bo"), c.bo);
  if (c.has_stage(Stage::bo) && c.bo.parameters.empty()) {
    fail(Kind::invalid_value, "stage 'bo' needs at least one [[bo.parameters]] entry");
  }
  apply_seed(c, c.seed);
  resolve_criteria(root, c);
  root.finish();
  return c;
}

FunnelConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(text, base);
}

void apply_seed(FunnelConfig& c, std::uint64_t seed) {
  c.seed = seed;
  if (!c.world_seed_explicit) c.world.seed = seed;
  c.interleave.seed = seed;
  c.abtest.seed = seed;
  c.bandit.config.seed = seed;
  c.bo.config.seed = seed;
}

}  // namespace funnelkit
