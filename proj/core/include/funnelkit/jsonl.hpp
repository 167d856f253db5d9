#pragma once

// JSONL log formats: one record per line, snake_case field names matching
// the domain types.

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "funnelkit/types.hpp"

namespace funnelkit {

enum class LogSchema { counterfactual, interaction, judgment };

using LogRecords = std::variant<std::vector<CounterfactualRecord>, std::vector<Interaction>,
                                std::vector<Judgment>>;

// Parses a whole file. Throws ParseError (with 1-based line number) on a
// malformed line or an invariant violation; throws Error if unreadable.
LogRecords parse_log(const std::filesystem::path& path, LogSchema schema);

std::vector<CounterfactualRecord> parse_counterfactual_log(std::string_view text);
std::vector<Interaction> parse_interaction_log(std::string_view text);
std::vector<Judgment> parse_judgment_log(std::string_view text);

std::vector<CounterfactualRecord> read_counterfactual_log(const std::filesystem::path& path);
std::vector<Interaction> read_interaction_log(const std::filesystem::path& path);
std::vector<Judgment> read_judgment_log(const std::filesystem::path& path);

std::string serialize_log(const std::vector<CounterfactualRecord>& records);
std::string serialize_log(const std::vector<Interaction>& records);
std::string serialize_log(const std::vector<Judgment>& records);

nlohmann::ordered_json to_json(const CounterfactualRecord& r);
nlohmann::ordered_json to_json(const Interaction& r);
nlohmann::ordered_json to_json(const Judgment& r);
nlohmann::ordered_json to_json(const ResultList& r);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace funnelkit
