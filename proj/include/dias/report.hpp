#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dias/scenario_io.hpp"

namespace dias::io {

// Single-run or replicated metrics with per-run detail.
json metrics_document(const ScenarioDocument& doc, const std::vector<SimulationMetrics>& runs);

struct MetricsSummary {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string policy;
  std::vector<std::string> class_names;
  AggregatedMetrics metrics;
};

MetricsSummary read_metrics(const json& document);
std::string summary_table(const MetricsSummary& summary);

// One JSON object per line: a header, then one record per job.
void write_event_log(std::ostream& out, const ScenarioDocument& doc, const SimulationMetrics& run);

json predict_document(const ScenarioDocument& doc);
std::string predict_table(const json& prediction);

struct GridAxis {
  std::string key;
  std::vector<json> values;
};

// "key=v1,v2,..."; values are JSON literals, bare words become strings.
GridAxis parse_grid(std::string_view text);

// Document with one grid assignment applied. Keys: theta_map.<class>,
// theta_reduce.<class>, timeout_s.<class>, policy, target_utilization, seed,
// horizon_s, slots, or a JSON pointer starting with '/'.
json apply_assignment(const json& resolved, const ScenarioDocument& base, const std::string& key, const json& value);

struct SweepRow {
  std::vector<json> point;  // one value per axis
  std::string scenario_hash;
  std::string class_name;   // "all" for global metrics
  std::string metric;
  Estimate value;
};

struct SweepResult {
  std::vector<std::string> keys;
  std::uint64_t seed = 0;
  int runs = 0;
  std::vector<SweepRow> rows;
};

SweepResult sweep(const json& document, const std::vector<GridAxis>& axes, int runs);
std::string sweep_csv(const SweepResult& result);
json sweep_document(const SweepResult& result);

PlanResult plan(const ScenarioDocument& doc, const PlanRequest& request, Predictor predictor = {});
json plan_document(const ScenarioDocument& doc, const PlanResult& result);
std::string plan_table(const ScenarioDocument& doc, const PlanResult& result);

}  // namespace dias::io
