#pragma once

// Scenario files are JSON. A file may pull a shared fleet definition in
// through "include"; strategies are assigned by "default_strategy" plus
// per-producer overrides in "strategies". Every config is first resolved
// into a canonical JSON document with all defaults filled in, and only that
// document is turned into a ScenarioConfig.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "elmarket/simulation.hpp"

namespace elmarket::config {

using Json = nlohmann::json;

/// Validation failure; `field` is a dotted path such as
/// "producers[3].capacity".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Reads a config file, follows its include and returns the resolved
/// document. Throws ConfigError for schema problems, std::runtime_error
/// when a file cannot be read.
Json load_resolved(const std::filesystem::path& path);

/// Resolves an already-parsed document; relative includes are looked up
/// in `base_dir`.
Json resolve(const Json& doc, const std::filesystem::path& base_dir);

/// Parses a resolved document and validates the result.
sim::ScenarioConfig to_scenario(const Json& resolved);

/// Canonical document for a scenario (the inverse of to_scenario).
Json to_json(const sim::ScenarioConfig& cfg);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const Json& resolved);

/// Sets a field of a resolved document by dotted path. Producers are
/// addressed by id ("producers.C6.strategy.kind") or all at once
/// ("producers.*.strategy.alpha"). Setting a strategy kind resets that
/// strategy's parameters to their defaults. Unknown fields throw
/// ConfigError.
void set_field(Json& resolved, const std::string& path, const Json& value);

/// Parses a sweep/override value: JSON literal if it parses, else string.
Json parse_value(const std::string& text);

}  // namespace elmarket::config
