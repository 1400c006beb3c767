#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dias/deflator.hpp"
#include "dias/error.hpp"
#include "dias/simulator.hpp"

namespace dias::io {

using json = nlohmann::json;

// Document problem with a stable code such as SCHEMA_UNKNOWN_KEY.
class SchemaError : public Error {
 public:
  SchemaError(std::string code, const std::string& message)
      : Error(ErrorCode::Schema, message), schema_code_(std::move(code)) {}

  [[nodiscard]] const std::string& schema_code() const noexcept { return schema_code_; }

 private:
  std::string schema_code_;
};

std::vector<std::string> preset_names();
json preset(std::string_view name);

// Applies the optional "preset" key: the named preset patched by the rest of
// the document.
json resolve(const json& document);

// 64-bit FNV-1a over the compact, key-sorted dump.
std::uint64_t document_hash(const json& document);
std::string hash_hex(std::uint64_t hash);

struct ScenarioDocument {
  json resolved;
  std::uint64_t hash = 0;
  std::vector<std::string> class_names;  // index = priority - 1
  Scenario scenario;
  // Sprint constants declared in the document, whether or not the policy
  // uses them.
  std::optional<SprintConfig> sprint;
};

ScenarioDocument parse_scenario(const json& document);
json read_json(const std::filesystem::path& path);
ScenarioDocument load_scenario(const std::filesystem::path& path);

// Class index (0-based) from a name or a 1-based priority string.
std::size_t class_index(const ScenarioDocument& doc, std::string_view key);

TimeDist parse_time(const json& value, const std::string& where);
CountPmf parse_count(const json& value, const std::string& where);

struct PlanRequest {
  TargetSpec targets;
  // Per-class mean-latency cap relative to the preemptive baseline.
  std::vector<std::optional<double>> mean_latency_vs_preemptive;
  AccuracyCurve curve = AccuracyCurve::default_curve();
  std::vector<double> theta_grid{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<std::optional<double>> timeout_grid{std::nullopt};
  int replications = 10;
};

PlanRequest parse_targets(const json& document, const ScenarioDocument& scenario);

}  // namespace dias::io
