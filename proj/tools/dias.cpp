#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dias/report.hpp"

namespace {

using dias::io::json;

constexpr int kOk = 0;
constexpr int kSchema = 2;
constexpr int kInfeasible = 3;
constexpr int kRuntime = 4;

struct Options {
  std::string scenario;
  std::string out;
  std::string format = "json";
  std::string targets;
  std::string events;
  std::string metrics;
  std::string preset_name;
  std::vector<std::string> grid;
  int runs = 1;
  std::optional<std::uint64_t> seed;
};

void report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out.empty() || opt.out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(opt.out);
  if (!f) throw dias::io::SchemaError("SCHEMA_UNWRITABLE", "cannot write '" + opt.out + "'");
  f << text;
}

void human(const std::string& text) {
  if (isatty(STDERR_FILENO)) std::cerr << text;
}

json load_document(const Options& opt) {
  json doc = dias::io::read_json(opt.scenario);
  if (opt.seed) {
    doc = dias::io::resolve(doc);
    doc["seed"] = *opt.seed;
  }
  return doc;
}

void require_format(const Options& opt, bool csv_allowed) {
  if (opt.format == "json" || (csv_allowed && opt.format == "csv")) return;
  throw dias::io::SchemaError("SCHEMA_INVALID_VALUE", "unsupported --format '" + opt.format + "' for this command");
}

int cmd_validate(const Options& opt) {
  require_format(opt, false);
  const auto doc = dias::io::parse_scenario(load_document(opt));
  json out{{"document", "dias.validation"},
           {"valid", true},
           {"scenario_hash", dias::io::hash_hex(doc.hash)},
           {"seed", doc.scenario.seed},
           {"classes", doc.class_names},
           {"policy", std::string(dias::to_string(doc.scenario.policy.kind))}};
  emit(opt, out.dump(2) + "\n");
  human("valid scenario " + dias::io::hash_hex(doc.hash) + "\n");
  return kOk;
}

int cmd_predict(const Options& opt) {
  require_format(opt, false);
  const auto doc = dias::io::parse_scenario(load_document(opt));
  const auto p = dias::io::predict_document(doc);
  emit(opt, p.dump(2) + "\n");
  human(dias::io::predict_table(p));
  return kOk;
}

int cmd_simulate(const Options& opt) {
  require_format(opt, false);
  if (opt.runs < 1) throw dias::io::SchemaError("SCHEMA_INVALID_VALUE", "--runs must be >= 1");
  const auto doc = dias::io::parse_scenario(load_document(opt));
  const auto& s = doc.scenario;
  if (s.arrivals) {
    std::vector<double> means;
    for (std::size_t k = 0; k < s.classes.size(); ++k) {
      means.push_back(dias::mean_processing_time(s.classes[k], s.policy.drops_for(k), s.cluster));
    }
    const double load = dias::offered_load(*s.arrivals, means);
    if (load >= 1.0) {
      report_error("UNSTABLE_LOAD", "offered load " + std::to_string(load) + " is at least 1");
      return kInfeasible;
    }
  }
  const auto runs = dias::run_replications(s, opt.runs);
  const auto m = dias::io::metrics_document(doc, runs);
  if (!opt.events.empty()) {
    std::ofstream f(opt.events);
    if (!f) throw dias::io::SchemaError("SCHEMA_UNWRITABLE", "cannot write '" + opt.events + "'");
    dias::io::write_event_log(f, doc, runs.front());
  }
  emit(opt, m.dump(2) + "\n");
  human(dias::io::summary_table(dias::io::read_metrics(m)));
  return kOk;
}

int cmd_sweep(const Options& opt) {
  require_format(opt, true);
  std::vector<dias::io::GridAxis> axes;
  for (const auto& g : opt.grid) axes.push_back(dias::io::parse_grid(g));
  const auto result = dias::io::sweep(load_document(opt), axes, opt.runs);
  if (opt.format == "csv") {
    emit(opt, dias::io::sweep_csv(result));
  } else {
    emit(opt, dias::io::sweep_document(result).dump(2) + "\n");
  }
  human("sweep: " + std::to_string(result.rows.size()) + " rows\n");
  return kOk;
}

int cmd_plan(const Options& opt) {
  require_format(opt, false);
  const auto doc = dias::io::parse_scenario(load_document(opt));
  const auto request = dias::io::parse_targets(dias::io::read_json(opt.targets), doc);
  const auto result = dias::io::plan(doc, request);
  emit(opt, dias::io::plan_document(doc, result).dump(2) + "\n");
  human(dias::io::plan_table(doc, result));
  if (!result.feasible) {
    report_error("PLAN_INFEASIBLE", "no candidate meets the targets; least-violating candidate reported");
    return kInfeasible;
  }
  return kOk;
}

int cmd_report(const Options& opt) {
  const auto summary = dias::io::read_metrics(dias::io::read_json(opt.metrics));
  emit(opt, dias::io::summary_table(summary));
  return kOk;
}

int cmd_preset(const Options& opt) {
  if (opt.preset_name.empty()) {
    emit(opt, json(dias::io::preset_names()).dump() + "\n");
  } else {
    emit(opt, dias::io::preset(opt.preset_name).dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential approximation and sprinting toolkit"};
  app.require_subcommand(1);
  Options opt;

  auto scenario_opts = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "Scenario document (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output path (default stdout)");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--seed", opt.seed, "Override the scenario seed");
  };

  auto* validate = app.add_subcommand("validate", "Check a scenario document");
  scenario_opts(validate);
  auto* predict = app.add_subcommand("predict", "Analytic per-class processing times");
  scenario_opts(predict);
  auto* simulate = app.add_subcommand("simulate", "Run the simulator");
  scenario_opts(simulate);
  simulate->add_option("--runs", opt.runs, "Replications");
  simulate->add_option("--events", opt.events, "Write the first run's event log (JSON lines)");
  auto* sweep = app.add_subcommand("sweep", "Simulate over a parameter grid");
  scenario_opts(sweep);
  sweep->add_option("--runs", opt.runs, "Replications per grid point");
  sweep->add_option("--grid", opt.grid, "key=v1,v2,... (repeatable)")->required();
  auto* plan = app.add_subcommand("plan", "Search drop ratios and sprint timeouts");
  scenario_opts(plan);
  plan->add_option("--targets", opt.targets, "Targets document (JSON)")->required()->check(CLI::ExistingFile);
  auto* report = app.add_subcommand("report", "Summary table from a metrics document");
  report->add_option("--metrics", opt.metrics, "Metrics document")->required()->check(CLI::ExistingFile);
  report->add_option("--out", opt.out, "Output path (default stdout)");
  auto* presets = app.add_subcommand("preset", "List presets or print one");
  presets->add_option("name", opt.preset_name, "Preset name");
  presets->add_option("--out", opt.out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("USAGE", e.what());
    return kSchema;
  }
  if (sweep->parsed() && opt.runs == 1 && sweep->count("--runs") == 0) opt.runs = 5;
  if (sweep->parsed() && sweep->count("--format") == 0) opt.format = "csv";

  try {
    if (validate->parsed()) return cmd_validate(opt);
    if (predict->parsed()) return cmd_predict(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (plan->parsed()) return cmd_plan(opt);
    if (report->parsed()) return cmd_report(opt);
    if (presets->parsed()) return cmd_preset(opt);
  } catch (const dias::io::SchemaError& e) {
    report_error(e.schema_code(), e.what());
    return kSchema;
  } catch (const dias::Error& e) {
    report_error(dias::code_name(e.code()), e.what());
    return e.code() == dias::ErrorCode::HorizonTooShort ? kInfeasible : kRuntime;
  } catch (const std::exception& e) {
    report_error("RUNTIME", e.what());
    return kRuntime;
  }
  return kRuntime;
}
