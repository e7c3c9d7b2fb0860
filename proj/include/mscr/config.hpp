#pragma once

#include "mscr/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mscr::config {

using Json = nlohmann::json;

/** @brief Effective scenario document plus where it came from. */
struct Scenario {
    Json doc = Json::object();
    std::filesystem::path base_dir = ".";  // relative paths in the document resolve here
    std::optional<std::filesystem::path> source;
    std::string input_sha256;              // hash of the input file bytes, empty without a file
    std::vector<std::string> overrides;

    /// Section object, empty when absent.
    const Json& section(const std::string& name) const;
    std::filesystem::path resolve(const std::string& p) const;
    /// Hash of the canonical dump of the effective document.
    std::string effective_sha256() const;
};

/// Reject unknown keys and mistyped values; messages name the dotted key.
void validate(const Json& doc);

/// Apply "a.b.c=value"; the value is parsed as JSON and falls back to a string.
void apply_override(Json& doc, const std::string& assignment);

/// Read, apply overrides, validate. Throws ConfigError.
Scenario load(const std::optional<std::filesystem::path>& file,
              const std::vector<std::string>& overrides = {});

/// Typed lookups with defaults; the schema has already checked types.
double number(const Json& section, const char* key, double fallback);
int integer(const Json& section, const char* key, int fallback);
bool boolean(const Json& section, const char* key, bool fallback);
std::string string(const Json& section, const char* key, const std::string& fallback);
std::vector<double> numbers(const Json& section, const char* key, std::vector<double> fallback);

/// Text listing every section and key with its type, for --help.
std::string schema_summary();

}  // namespace mscr::config
