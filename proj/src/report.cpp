#include "dias/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dias::io {
namespace {
// NaN is not valid JSON; empty classes carry null.
json number_or_null(double x) { return std::isnan(x) ? json(nullptr) : json(x); }
double number_from(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

json nan_safe(const Estimate& e) { return json{{"mean", number_or_null(e.mean)}, {"half_width", number_or_null(e.half_width)}}; }
Estimate nan_safe_of(const json& j) { return {number_from(j.at("mean")), number_from(j.at("half_width"))}; }

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string optional_json(const std::optional<double>& x) { return x ? fmt("%.6g", *x) : "-"; }

const char* kClassMetrics[] = {"jobs", "mean_response_s", "p95_response_s", "mean_queueing_s", "mean_execution_s"};

}  // namespace

json metrics_document(const ScenarioDocument& doc, const std::vector<SimulationMetrics>& runs) {
  const auto agg = aggregate(runs);
  json classes = json::array();
  for (std::size_t k = 0; k < agg.classes.size(); ++k) {
    const auto& c = agg.classes[k];
    classes.push_back(json{{"class", k + 1},
                           {"name", doc.class_names[k]},
                           {"jobs", nan_safe(c.jobs)},
                           {"mean_response_s", nan_safe(c.mean_response)},
                           {"p95_response_s", nan_safe(c.p95_response)},
                           {"mean_queueing_s", nan_safe(c.mean_queueing)},
                           {"mean_execution_s", nan_safe(c.mean_execution)}});
  }
  json per_run = json::array();
  for (const auto& r : runs) {
    json rc = json::array();
    for (const auto& c : r.classes) {
      rc.push_back(json{{"jobs", c.jobs},
                        {"mean_response_s", number_or_null(c.mean_response)},
                        {"p95_response_s", number_or_null(c.p95_response)},
                        {"mean_queueing_s", number_or_null(c.mean_queueing)},
                        {"mean_execution_s", number_or_null(c.mean_execution)}});
    }
    per_run.push_back(json{{"seed", r.seed},
                           {"classes", rc},
                           {"resource_waste", r.resource_waste},
                           {"energy_j", r.energy},
                           {"busy_time_s", r.busy_time},
                           {"sprint_time_s", r.sprint_time},
                           {"evicted_time_s", r.evicted_time},
                           {"end_time_s", r.end_time}});
  }
  return json{{"document", "dias.metrics"},
              {"version", 1},
              {"scenario_hash", hash_hex(doc.hash)},
              {"seed", agg.seed},
              {"runs", agg.runs},
              {"policy", std::string(to_string(doc.scenario.policy.kind))},
              {"classes", classes},
              {"resource_waste", nan_safe(agg.resource_waste)},
              {"energy_j", nan_safe(agg.energy)},
              {"busy_time_s", nan_safe(agg.busy_time)},
              {"sprint_time_s", nan_safe(agg.sprint_time)},
              {"per_run", per_run}};
}

MetricsSummary read_metrics(const json& document) {
  try {
    if (document.at("document") != "dias.metrics") {
      throw SchemaError("SCHEMA_INVALID_VALUE", "not a metrics document");
    }
    MetricsSummary s;
    s.scenario_hash = document.at("scenario_hash").get<std::string>();
    s.seed = document.at("seed").get<std::uint64_t>();
    s.policy = document.at("policy").get<std::string>();
    s.metrics.seed = s.seed;
    s.metrics.runs = document.at("runs").get<std::size_t>();
    for (const auto& c : document.at("classes")) {
      s.class_names.push_back(c.at("name").get<std::string>());
      AggregatedClass a;
      a.jobs = nan_safe_of(c.at("jobs"));
      a.mean_response = nan_safe_of(c.at("mean_response_s"));
      a.p95_response = nan_safe_of(c.at("p95_response_s"));
      a.mean_queueing = nan_safe_of(c.at("mean_queueing_s"));
      a.mean_execution = nan_safe_of(c.at("mean_execution_s"));
      s.metrics.classes.push_back(a);
    }
    s.metrics.resource_waste = nan_safe_of(document.at("resource_waste"));
    s.metrics.energy = nan_safe_of(document.at("energy_j"));
    s.metrics.busy_time = nan_safe_of(document.at("busy_time_s"));
    s.metrics.sprint_time = nan_safe_of(document.at("sprint_time_s"));
    return s;
  } catch (const json::exception& e) {
    throw SchemaError("SCHEMA_INVALID_VALUE", std::string("malformed metrics document: ") + e.what());
  }
}

std::string summary_table(const MetricsSummary& s) {
  std::ostringstream os;
  os << "scenario " << s.scenario_hash << "  policy " << s.policy << "  seed " << s.seed << "  runs "
     << s.metrics.runs << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s %18s %18s %18s %18s\n", "class", "jobs", "mean_resp_s", "p95_resp_s",
                "queue_s", "exec_s");
  os << line;
  auto cell = [](const Estimate& e) {
    return fmt("%.3f", e.mean) + " +- " + fmt("%.3f", e.half_width);
  };
  for (std::size_t k = 0; k < s.metrics.classes.size(); ++k) {
    const auto& c = s.metrics.classes[k];
    std::snprintf(line, sizeof line, "%-12s %10.1f %18s %18s %18s %18s\n", s.class_names[k].c_str(), c.jobs.mean,
                  cell(c.mean_response).c_str(), cell(c.p95_response).c_str(), cell(c.mean_queueing).c_str(),
                  cell(c.mean_execution).c_str());
    os << line;
  }
  os << "resource_waste " << cell(s.metrics.resource_waste) << "\n";
  os << "energy_j       " << cell(s.metrics.energy) << "\n";
  os << "busy_time_s    " << cell(s.metrics.busy_time) << "\n";
  os << "sprint_time_s  " << cell(s.metrics.sprint_time) << "\n";
  return os.str();
}

void write_event_log(std::ostream& out, const ScenarioDocument& doc, const SimulationMetrics& run) {
  out << json{{"scenario_hash", hash_hex(doc.hash)},
              {"seed", run.seed},
              {"policy", std::string(to_string(doc.scenario.policy.kind))},
              {"jobs", run.log.size()}}
             .dump()
      << "\n";
  for (const auto& job : run.log) {
    json attempts = json::array();
    for (const auto& a : job.attempts) {
      json rec{{"dispatch_s", a.dispatch}, {"end_s", a.end}, {"evicted", a.evicted}, {"base_work_s", a.base_work}};
      rec["sprint_start_s"] = a.sprint_start ? json(*a.sprint_start) : json(nullptr);
      rec["sprint_end_s"] = a.sprint_end ? json(*a.sprint_end) : json(nullptr);
      attempts.push_back(std::move(rec));
    }
    out << json{{"job", job.id},
                {"class", job.job_class},
                {"arrival_s", job.arrival},
                {"tasks", job.tasks},
                {"attempts", attempts},
                {"completion_s", job.completion}}
               .dump()
        << "\n";
  }
}

json predict_document(const ScenarioDocument& doc) {
  const auto& s = doc.scenario;
  json classes = json::array();
  std::vector<double> means;
  for (std::size_t k = 0; k < s.classes.size(); ++k) {
    const auto drops = s.policy.drops_for(k);
    const double m = mean_processing_time(s.classes[k], drops, s.cluster);
    means.push_back(m);
    json row{{"class", k + 1},
             {"name", doc.class_names[k]},
             {"theta_map", drops.map},
             {"theta_reduce", drops.reduce},
             {"mean_processing_s", m}};
    const auto ph = processing_time_ph(s.classes[k], drops, s.cluster);
    if (ph) {
      row["model"] = "phase_type";
      row["phases"] = ph->phases();
      row["scv"] = scv(*ph);
      row["p95_processing_s"] = quantile(*ph, 0.95);
    } else {
      row["model"] = "mean_only";
    }
    classes.push_back(std::move(row));
  }
  json out{{"document", "dias.prediction"},
           {"version", 1},
           {"scenario_hash", hash_hex(doc.hash)},
           {"seed", s.seed},
           {"policy", std::string(to_string(s.policy.kind))},
           {"classes", classes}};
  if (s.arrivals) {
    const auto rates = class_rates(*s.arrivals);
    out["arrival_rates_per_s"] = rates;
    out["offered_load"] = offered_load(*s.arrivals, means);
  }
  return out;
}

std::string predict_table(const json& p) {
  std::ostringstream os;
  os << "scenario " << p.at("scenario_hash").get<std::string>() << "  policy " << p.at("policy").get<std::string>()
     << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %8s %8s %16s %16s %8s\n", "class", "theta_m", "theta_r", "mean_proc_s",
                "p95_proc_s", "scv");
  os << line;
  for (const auto& c : p.at("classes")) {
    const bool ph = c.contains("p95_processing_s");
    std::snprintf(line, sizeof line, "%-12s %8.3f %8.3f %16.4f %16s %8s\n", c.at("name").get<std::string>().c_str(),
                  c.at("theta_map").get<double>(), c.at("theta_reduce").get<double>(),
                  c.at("mean_processing_s").get<double>(),
                  ph ? fmt("%.4f", c.at("p95_processing_s").get<double>()).c_str() : "-",
                  ph ? fmt("%.4f", c.at("scv").get<double>()).c_str() : "-");
    os << line;
  }
  if (p.contains("offered_load")) os << "offered_load " << fmt("%.4f", p.at("offered_load").get<double>()) << "\n";
  return os.str();
}

GridAxis parse_grid(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw SchemaError("SCHEMA_INVALID_VALUE", "grid must look like key=v1,v2,...");
  }
  GridAxis axis;
  axis.key = std::string(text.substr(0, eq));
  std::string rest(text.substr(eq + 1));
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw SchemaError("SCHEMA_INVALID_VALUE", "empty value in grid '" + axis.key + "'");
    try {
      axis.values.push_back(json::parse(item));
    } catch (const json::parse_error&) {
      axis.values.emplace_back(item);
    }
  }
  if (axis.values.empty()) throw SchemaError("SCHEMA_INVALID_VALUE", "grid '" + axis.key + "' has no values");
  return axis;
}

json apply_assignment(const json& resolved, const ScenarioDocument& base, const std::string& key, const json& value) {
  json doc = resolved;
  const std::size_t n = base.class_names.size();
  auto class_of = [&](std::string_view prefix) { return class_index(base, std::string_view(key).substr(prefix.size())); };
  auto ensure_drops = [&]() -> json& {
    json& policy = doc["policy"];
    if (!policy.contains("drop_ratios")) {
      policy["drop_ratios"] = json::array();
      for (std::size_t k = 0; k < n; ++k) policy["drop_ratios"].push_back(json{{"map", 0.0}, {"reduce", 0.0}});
    }
    const std::string kind = policy.value("kind", "");
    const auto parsed = policy_kind_from_string(kind);
    if (parsed == PolicyKind::Preemptive || parsed == PolicyKind::NonPreemptive) policy["kind"] = "differential_approx";
    return policy["drop_ratios"];
  };
  if (key.rfind("theta_map.", 0) == 0) {
    ensure_drops()[class_of("theta_map.")]["map"] = value;
  } else if (key.rfind("theta_reduce.", 0) == 0) {
    ensure_drops()[class_of("theta_reduce.")]["reduce"] = value;
  } else if (key.rfind("timeout_s.", 0) == 0) {
    if (!doc.contains("sprint")) throw SchemaError("SCHEMA_MISSING_KEY", "timeout grid needs a sprint block");
    doc["sprint"]["timeouts_s"][class_of("timeout_s.")] = (value.is_string() && value == "none") ? json(nullptr) : value;
    doc["policy"]["kind"] = "dias";
  } else if (key == "policy") {
    doc["policy"]["kind"] = value;
    const auto kind = policy_kind_from_string(value.get<std::string>());
    if (kind == PolicyKind::Preemptive || kind == PolicyKind::NonPreemptive) doc["policy"].erase("drop_ratios");
  } else if (key == "target_utilization" || key == "seed" || key == "horizon_s" || key == "warmup_s") {
    doc[key] = value;
  } else if (key == "slots") {
    doc["cluster"]["slots"] = value;
  } else if (!key.empty() && key.front() == '/') {
    doc[json::json_pointer(key)] = value;
  } else {
    throw SchemaError("SCHEMA_INVALID_VALUE", "unknown grid key '" + key + "'");
  }
  return doc;
}

SweepResult sweep(const json& document, const std::vector<GridAxis>& axes, int runs) {
  if (runs < 1) throw SchemaError("SCHEMA_INVALID_VALUE", "runs must be >= 1");
  const auto base = parse_scenario(document);
  SweepResult result;
  result.seed = base.scenario.seed;
  result.runs = runs;
  for (const auto& a : axes) result.keys.push_back(a.key);

  // Row-major over the axes, first axis slowest.
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    json doc = base.resolved;
    std::vector<json> point;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      point.push_back(axes[i].values[idx[i]]);
      doc = apply_assignment(doc, base, axes[i].key, point.back());
    }
    const auto parsed = parse_scenario(doc);
    const auto agg = replicate(parsed.scenario, runs);
    const std::string hash = hash_hex(parsed.hash);
    for (std::size_t k = 0; k < agg.classes.size(); ++k) {
      const auto& c = agg.classes[k];
      const Estimate values[] = {c.jobs, c.mean_response, c.p95_response, c.mean_queueing, c.mean_execution};
      for (std::size_t m = 0; m < 5; ++m) {
        result.rows.push_back({point, hash, parsed.class_names[k], kClassMetrics[m], values[m]});
      }
    }
    result.rows.push_back({point, hash, "all", "resource_waste", agg.resource_waste});
    result.rows.push_back({point, hash, "all", "energy_j", agg.energy});
    result.rows.push_back({point, hash, "all", "busy_time_s", agg.busy_time});
    result.rows.push_back({point, hash, "all", "sprint_time_s", agg.sprint_time});

    std::size_t i = axes.size();
    while (i > 0) {
      --i;
      if (++idx[i] < axes[i].values.size()) break;
      idx[i] = 0;
      if (i == 0) return result;
    }
    if (axes.empty()) return result;
  }
}

namespace {

std::string csv_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "none";
  return v.dump();
}

std::string csv_number(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  for (const auto& k : r.keys) os << k << ",";
  os << "class,metric,mean,half_width,runs,seed,scenario_hash\n";
  for (const auto& row : r.rows) {
    for (const auto& v : row.point) os << csv_value(v) << ",";
    os << row.class_name << "," << row.metric << "," << csv_number(row.value.mean) << ","
       << csv_number(row.value.half_width) << "," << r.runs << "," << r.seed << "," << row.scenario_hash << "\n";
  }
  return os.str();
}

json sweep_document(const SweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json point = json::object();
    for (std::size_t i = 0; i < r.keys.size(); ++i) point[r.keys[i]] = row.point[i];
    rows.push_back(json{{"point", point},
                        {"scenario_hash", row.scenario_hash},
                        {"class", row.class_name},
                        {"metric", row.metric},
                        {"mean", number_or_null(row.value.mean)},
                        {"half_width", number_or_null(row.value.half_width)}});
  }
  return json{{"document", "dias.sweep"}, {"version", 1}, {"seed", r.seed}, {"runs", r.runs}, {"rows", rows}};
}

PlanResult plan(const ScenarioDocument& doc, const PlanRequest& request, Predictor predictor) {
  if (!predictor) predictor = simulation_predictor(request.replications);
  const std::size_t n = doc.class_names.size();
  TargetSpec targets = request.targets;

  bool relative = false;
  for (const auto& r : request.mean_latency_vs_preemptive) relative = relative || r.has_value();
  if (relative) {
    Scenario baseline = doc.scenario;
    baseline.policy = preemptive_policy();
    const auto latencies = predictor(baseline);
    for (std::size_t k = 0; k < n; ++k) {
      if (!request.mean_latency_vs_preemptive[k]) continue;
      const double cap = *request.mean_latency_vs_preemptive[k] * latencies[k].first.mean;
      auto& t = targets.classes[k].max_mean_latency;
      t = t ? std::min(*t, cap) : cap;
    }
  }

  Scenario base = doc.scenario;
  const std::vector<DropRatios> zero(n);
  if (doc.sprint) {
    base.policy = dias_policy(zero, *doc.sprint);
  } else {
    base.policy = differential_approx_policy(zero);
  }
  auto table = enumerate_candidates(base, targets, request.curve, request.theta_grid, request.timeout_grid, predictor);
  auto result = choose(std::move(table), targets);
  return result;
}

json plan_document(const ScenarioDocument& doc, const PlanResult& result) {
  const std::size_t n = doc.class_names.size();
  auto candidate_json = [&](const Candidate& c) {
    json out = json::array();
    for (std::size_t k = 0; k < n; ++k) {
      out.push_back(json{{"class", doc.class_names[k]},
                         {"theta_map", c.theta[k]},
                         {"timeout_s", c.timeout[k] ? json(*c.timeout[k]) : json(nullptr)}});
    }
    return out;
  };
  json rows = json::array();
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& row = result.table[i];
    json preds = json::array();
    for (std::size_t k = 0; k < row.predictions.size(); ++k) {
      const auto& p = row.predictions[k];
      preds.push_back(json{{"class", doc.class_names[k]},
                           {"mean_latency_s", nan_safe(p.mean_latency)},
                           {"p95_latency_s", nan_safe(p.p95_latency)},
                           {"mean_processing_s", p.mean_processing},
                           {"relative_error_pct", p.relative_error}});
    }
    rows.push_back(json{{"index", i},
                        {"candidate", candidate_json(row.candidate)},
                        {"screened_out", row.screened_out},
                        {"screen_reason", row.screen_reason},
                        {"offered_load", row.offered_load},
                        {"feasible", row.feasible},
                        {"violation", row.violation},
                        {"predictions", preds}});
  }
  const auto& norm = result.normalization;
  return json{{"document", "dias.plan"},
              {"version", 1},
              {"scenario_hash", hash_hex(doc.hash)},
              {"seed", doc.scenario.seed},
              {"feasible", result.feasible},
              {"chosen", result.chosen},
              {"chosen_candidate", candidate_json(result.chosen_row().candidate)},
              {"score", result.score},
              {"normalization",
               {{"latency_min_s", norm.latency_min},
                {"latency_max_s", norm.latency_max},
                {"error_min_pct", norm.error_min},
                {"error_max_pct", norm.error_max}}},
              {"table", rows}};
}

std::string plan_table(const ScenarioDocument& doc, const PlanResult& result) {
  std::ostringstream os;
  os << "scenario " << hash_hex(doc.hash) << "  " << (result.feasible ? "feasible" : "no feasible candidate")
     << "  chosen #" << result.chosen << "\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& row = result.table[i];
    os << (i == result.chosen ? "* " : "  ") << "#" << i;
    for (std::size_t k = 0; k < row.candidate.theta.size(); ++k) {
      os << "  " << doc.class_names[k] << ":theta=" << fmt("%.3g", row.candidate.theta[k])
         << ",T=" << optional_json(row.candidate.timeout[k]);
      if (!row.screened_out) os << ",mean=" << fmt("%.3f", row.predictions[k].mean_latency.mean);
    }
    os << (row.screened_out ? "  screened: " + row.screen_reason : row.feasible ? "  ok" : "  violates targets")
       << "\n";
  }
  return os.str();
}

}  // namespace dias::io
