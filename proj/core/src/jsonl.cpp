#include "funnelkit/jsonl.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "funnelkit/error.hpp"

namespace funnelkit {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Field accessors that turn missing/mistyped fields into ParseErrors.
const json& field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + name + "'", line);
  return *it;
}

std::string get_string(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (!v.is_string()) throw ParseError(std::string("field '") + name + "' must be a string", line);
  return v.get<std::string>();
}

std::int64_t get_int(const json& obj, const char* name, std::size_t line) {
  const json& v = field(obj, name, line);
  if (!v.is_number_integer()) {
    throw ParseError(std::string("field '") + name + "' must be an integer", line);
  }
  return v.get<std::int64_t>();
}

double get_number(const json& v, const std::string& name, std::size_t line) {
  if (!v.is_number()) throw ParseError("field '" + name + "' must be a number", line);
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError("field '" + name + "' must be finite", line);
  return d;
}

Attributes get_attributes(const json& obj, const char* name, std::size_t line) {
  Attributes out;
  auto it = obj.find(name);
  if (it == obj.end()) return out;
  if (!it->is_object()) throw ParseError(std::string("field '") + name + "' must be an object", line);
  for (const auto& [k, v] : it->items()) {
    if (!v.is_string()) {
      throw ParseError(std::string("field '") + name + "." + k + "' must be a string", line);
    }
    out.emplace(k, v.get<std::string>());
  }
  return out;
}

ItemId get_item(const json& obj, const char* name, std::size_t line) {
  std::string s = get_string(obj, name, line);
  if (s.empty()) throw ParseError(std::string("field '") + name + "' must be a non-empty item id", line);
  return ItemId(std::move(s));
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON (") + e.what() + ")", line_no);
      }
      if (!obj.is_object()) throw ParseError("record must be a JSON object", line_no);
      fn(obj, line_no);
    }
    pos = end + 1;
  }
}

CounterfactualRecord parse_counterfactual(const json& obj, std::size_t line) {
  CounterfactualRecord r;
  const json& ctx = field(obj, "context", line);
  if (!ctx.is_object()) throw ParseError("field 'context' must be an object", line);
  r.context.query_id = get_string(ctx, "query_id", line);
  if (r.context.query_id.empty()) throw ParseError("field 'context.query_id' must be non-empty", line);
  r.context.user_id = get_string(ctx, "user_id", line);
  r.context.query_text = get_string(ctx, "query_text", line);
  r.context.timestamp = get_int(ctx, "timestamp", line);
  if (r.context.timestamp < 0) throw ParseError("field 'context.timestamp' must be >= 0", line);
  r.context.attributes = get_attributes(ctx, "attributes", line);

  const json& cands = field(obj, "candidates", line);
  if (!cands.is_array()) throw ParseError("field 'candidates' must be an array", line);
  if (cands.empty()) throw ParseError("field 'candidates' must be non-empty", line);
  std::set<ItemId> candidate_ids;
  for (const json& c : cands) {
    if (!c.is_object()) throw ParseError("candidate must be an object", line);
    CandidateFeatures cf;
    cf.item = get_item(c, "item", line);
    const json& feats = field(c, "features", line);
    if (!feats.is_array()) throw ParseError("field 'features' must be an array", line);
    cf.features.reserve(feats.size());
    for (const json& f : feats) cf.features.push_back(get_number(f, "features", line));
    cf.attributes = get_attributes(c, "attributes", line);
    if (!candidate_ids.insert(cf.item).second) {
      throw ParseError("duplicate item '" + cf.item.str() + "' in candidates", line);
    }
    r.candidates.push_back(std::move(cf));
  }
  const std::size_t dim = r.candidates.front().features.size();
  for (const auto& c : r.candidates) {
    if (c.features.size() != dim) throw ParseError("field 'features' has inconsistent dimension", line);
  }

  const json& var = field(obj, "served_variant", line);
  if (!var.is_object()) throw ParseError("field 'served_variant' must be an object", line);
  r.served_variant.name = get_string(var, "name", line);
  if (r.served_variant.name.empty()) throw ParseError("field 'served_variant.name' must be non-empty", line);
  if (auto it = var.find("parameters"); it != var.end()) {
    if (!it->is_object()) throw ParseError("field 'served_variant.parameters' must be an object", line);
    for (const auto& [k, v] : it->items()) {
      r.served_variant.parameters.emplace(k, get_number(v, "served_variant.parameters." + k, line));
    }
  }

  const json& served = field(obj, "served_results", line);
  if (!served.is_object()) throw ParseError("field 'served_results' must be an object", line);
  const std::int64_t k = get_int(served, "k", line);
  if (k < 1) throw ParseError("field 'served_results.k' must be >= 1", line);
  r.served_results.k = static_cast<int>(k);
  const json& items = field(served, "items", line);
  if (!items.is_array()) throw ParseError("field 'served_results.items' must be an array", line);
  std::set<ItemId> seen;
  for (const json& it : items) {
    if (!it.is_string() || it.get<std::string>().empty()) {
      throw ParseError("field 'served_results.items' must hold non-empty strings", line);
    }
    ItemId id(it.get<std::string>());
    if (!seen.insert(id).second) {
      throw ParseError("duplicate item '" + id.str() + "' in served_results", line);
    }
    if (!candidate_ids.contains(id)) {
      throw ParseError("served item '" + id.str() + "' is not among candidates", line);
    }
    r.served_results.items.push_back(std::move(id));
  }
  if (r.served_results.items.size() > static_cast<std::size_t>(k)) {
    throw ParseError("field 'served_results.items' longer than k", line);
  }
  return r;
}

Interaction parse_interaction(const json& obj, std::size_t line) {
  Interaction r;
  r.query_id = get_string(obj, "query_id", line);
  r.item = get_item(obj, "item", line);
  const std::int64_t rank = get_int(obj, "rank", line);
  if (rank < 1) throw ParseError("field 'rank' must be >= 1", line);
  r.rank = static_cast<int>(rank);
  const std::string action = get_string(obj, "action", line);
  auto a = parse_action(action);
  if (!a) throw ParseError("field 'action' has unknown value '" + action + "'", line);
  r.action = *a;
  const json& s = field(obj, "success", line);
  if (!s.is_boolean()) throw ParseError("field 'success' must be a boolean", line);
  r.success = s.get<bool>();
  if (r.success && r.action == Action::none) {
    throw ParseError("field 'success' is true but action is none", line);
  }
  return r;
}

Judgment parse_judgment(const json& obj, std::size_t line) {
  Judgment j;
  j.query_id = get_string(obj, "query_id", line);
  j.item = get_item(obj, "item", line);
  const std::int64_t rel = get_int(obj, "relevance", line);
  if (rel < 0) throw ParseError("field 'relevance' must be >= 0", line);
  j.relevance = static_cast<int>(rel);
  const std::string src = get_string(obj, "source", line);
  auto s = parse_judgment_source(src);
  if (!s) throw ParseError("field 'source' has unknown value '" + src + "'", line);
  j.source = *s;
  if (obj.contains("logged_rank")) {
    const std::int64_t r = get_int(obj, "logged_rank", line);
    if (r < 1) throw ParseError("field 'logged_rank' must be >= 1", line);
    j.logged_rank = static_cast<int>(r);
  }
  return j;
}

template <typename T>
std::string serialize_records(const std::vector<T>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::vector<CounterfactualRecord> parse_counterfactual_log(std::string_view text) {
  std::vector<CounterfactualRecord> out;
  std::unordered_set<std::string> query_ids;
  std::size_t dim = 0;
  bool have_dim = false;
  for_each_line(text, [&](const json& obj, std::size_t line) {
    CounterfactualRecord r = parse_counterfactual(obj, line);
    if (!query_ids.insert(r.context.query_id).second) {
      throw ParseError("duplicate query_id '" + r.context.query_id + "'", line);
    }
    const std::size_t d = r.candidates.front().features.size();
    if (have_dim && d != dim) {
      throw ParseError("field 'features' dimension " + std::to_string(d) +
                           " differs from log dimension " + std::to_string(dim),
                       line);
    }
    dim = d;
    have_dim = true;
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<Interaction> parse_interaction_log(std::string_view text) {
  std::vector<Interaction> out;
  for_each_line(text, [&](const json& obj, std::size_t line) {
    out.push_back(parse_interaction(obj, line));
  });
  return out;
}

std::vector<Judgment> parse_judgment_log(std::string_view text) {
  std::vector<Judgment> out;
  std::set<std::tuple<std::string, std::string, JudgmentSource>> keys;
  for_each_line(text, [&](const json& obj, std::size_t line) {
    Judgment j = parse_judgment(obj, line);
    if (!keys.emplace(j.query_id, j.item.str(), j.source).second) {
      throw ParseError("duplicate judgment for (query_id, item, source)", line);
    }
    out.push_back(std::move(j));
  });
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<CounterfactualRecord> read_counterfactual_log(const std::filesystem::path& path) {
  return parse_counterfactual_log(read_text_file(path));
}
std::vector<Interaction> read_interaction_log(const std::filesystem::path& path) {
  return parse_interaction_log(read_text_file(path));
}
std::vector<Judgment> read_judgment_log(const std::filesystem::path& path) {
  return parse_judgment_log(read_text_file(path));
}

LogRecords parse_log(const std::filesystem::path& path, LogSchema schema) {
  switch (schema) {
    case LogSchema::counterfactual:
      return read_counterfactual_log(path);
    case LogSchema::interaction:
      return read_interaction_log(path);
    case LogSchema::judgment:
      return read_judgment_log(path);
  }
  throw Error("unknown log schema");
}

ojson to_json(const ResultList& r) {
  ojson items = ojson::array();
  for (const auto& id : r.items) items.push_back(id.str());
  ojson out;
  out["items"] = std::move(items);
  out["k"] = r.k;
  return out;
}

ojson to_json(const CounterfactualRecord& r) {
  ojson ctx;
  ctx["query_id"] = r.context.query_id;
  ctx["user_id"] = r.context.user_id;
  ctx["query_text"] = r.context.query_text;
  ctx["timestamp"] = r.context.timestamp;
  ctx["attributes"] = ojson::object();
  for (const auto& [k, v] : r.context.attributes) ctx["attributes"][k] = v;

  ojson cands = ojson::array();
  for (const auto& c : r.candidates) {
    ojson cj;
    cj["item"] = c.item.str();
    cj["features"] = c.features;
    if (!c.attributes.empty()) {
      cj["attributes"] = ojson::object();
      for (const auto& [k, v] : c.attributes) cj["attributes"][k] = v;
    }
    cands.push_back(std::move(cj));
  }

  ojson var;
  var["name"] = r.served_variant.name;
  var["parameters"] = ojson::object();
  for (const auto& [k, v] : r.served_variant.parameters) var["parameters"][k] = v;

  ojson out;
  out["context"] = std::move(ctx);
  out["candidates"] = std::move(cands);
  out["served_variant"] = std::move(var);
  out["served_results"] = to_json(r.served_results);
  return out;
}

ojson to_json(const Interaction& r) {
  ojson out;
  out["query_id"] = r.query_id;
  out["item"] = r.item.str();
  out["rank"] = r.rank;
  out["action"] = std::string(to_string(r.action));
  out["success"] = r.success;
  return out;
}

ojson to_json(const Judgment& r) {
  ojson out;
  out["query_id"] = r.query_id;
  out["item"] = r.item.str();
  out["relevance"] = r.relevance;
  out["source"] = std::string(to_string(r.source));
  if (r.logged_rank) out["logged_rank"] = *r.logged_rank;
  return out;
}

std::string serialize_log(const std::vector<CounterfactualRecord>& records) {
  return serialize_records(records);
}
std::string serialize_log(const std::vector<Interaction>& records) { return serialize_records(records); }
std::string serialize_log(const std::vector<Judgment>& records) { return serialize_records(records); }

}  // namespace funnelkit
