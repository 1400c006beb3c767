#include "dias/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dias::io {
namespace {

[[noreturn]] void fail(const std::string& code, const std::string& message) { throw SchemaError(code, message); }

std::string join(const std::string& where, std::string_view key) {
  return where.empty() ? std::string(key) : where + "." + std::string(key);
}

std::string indexed(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

// Object view that rejects keys outside `allowed`.
class Fields {
 public:
  Fields(const json& value, std::string where, std::initializer_list<std::string_view> allowed)
      : value_(value), where_(std::move(where)) {
    if (!value.is_object()) fail("SCHEMA_TYPE", (where_.empty() ? "document" : where_) + " must be an object");
    for (const auto& [key, _] : value.items()) {
      bool known = false;
      for (auto a : allowed) known = known || key == a;
      if (!known) fail("SCHEMA_UNKNOWN_KEY", "unknown key '" + join(where_, key) + "'");
    }
  }

  [[nodiscard]] bool has(std::string_view key) const {
    auto it = value_.find(key);
    return it != value_.end() && !it->is_null();
  }
  [[nodiscard]] const json& at(std::string_view key) const {
    if (!has(key)) fail("SCHEMA_MISSING_KEY", "missing key '" + path(key) + "'");
    return *value_.find(key);
  }
  [[nodiscard]] std::string path(std::string_view key) const { return join(where_, key); }

  [[nodiscard]] double number(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_number()) fail("SCHEMA_TYPE", path(key) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail("SCHEMA_INVALID_VALUE", path(key) + " must be finite");
    return x;
  }
  [[nodiscard]] double number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  [[nodiscard]] double rate(std::string_view key) const {
    const double x = number(key);
    if (!(x > 0.0)) fail("SCHEMA_RATE_NONPOSITIVE", path(key) + " must be > 0");
    return x;
  }
  [[nodiscard]] double nonnegative(std::string_view key) const {
    const double x = number(key);
    if (x < 0.0) fail("SCHEMA_NEGATIVE_VALUE", path(key) + " must be >= 0");
    return x;
  }
  [[nodiscard]] long long integer(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail("SCHEMA_TYPE", path(key) + " must be an integer");
    return v.get<long long>();
  }
  [[nodiscard]] std::string string(std::string_view key) const {
    const auto& v = at(key);
    if (!v.is_string()) fail("SCHEMA_TYPE", path(key) + " must be a string");
    return v.get<std::string>();
  }

 private:
  const json& value_;
  std::string where_;
};

const json& array_at(const json& v, const std::string& where) {
  if (!v.is_array()) fail("SCHEMA_TYPE", where + " must be an array");
  return v;
}

double number_in(const json& v, const std::string& where) {
  if (!v.is_number()) fail("SCHEMA_TYPE", where + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail("SCHEMA_INVALID_VALUE", where + " must be finite");
  return x;
}

std::vector<double> numbers(const json& v, const std::string& where) {
  std::vector<double> out;
  for (std::size_t i = 0; i < array_at(v, where).size(); ++i) out.push_back(number_in(v[i], indexed(where, i)));
  return out;
}

Eigen::MatrixXd matrix(const json& v, const std::string& where) {
  const auto& rows = array_at(v, where);
  if (rows.empty()) fail("SCHEMA_INVALID_VALUE", where + " must not be empty");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = numbers(rows[static_cast<std::size_t>(i)], indexed(where, static_cast<std::size_t>(i)));
    if (static_cast<Eigen::Index>(row.size()) != n) fail("SCHEMA_INVALID_VALUE", where + " must be square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

// Library errors raised while building values from a document are document
// errors.
template <class F>
auto guarded(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    const std::string code = e.code() == ErrorCode::NonPositiveRate ? "SCHEMA_RATE_NONPOSITIVE" : "SCHEMA_INVALID_VALUE";
    fail(code, where + ": " + e.what());
  }
}

// ---- presets -------------------------------------------------------------

json exp_mean(double m) { return json{{"exponential_mean_s", m}}; }

json mapreduce_class(const std::string& name, double mean_processing) {
  return json{{"name", name},
              {"setup", exp_mean(5.0)},
              {"mean_processing_s", mean_processing},
              {"stages",
               json::array({json{{"name", "map"},
                                 {"tasks", 50},
                                 {"task_time", exp_mean(1.0)},
                                 {"drop", "map"},
                                 {"gap_after", exp_mean(5.0)}},
                            json{{"name", "reduce"}, {"tasks", 20}, {"task_time", exp_mean(1.0)}, {"drop", "reduce"}}})}};
}

json triangle_count_class(const std::string& name, double mean_processing) {
  json stages = json::array();
  for (int i = 1; i <= 6; ++i) {
    stages.push_back(json{{"name", "shuffle_map_" + std::to_string(i)},
                          {"tasks", 50},
                          {"task_time", exp_mean(1.0)},
                          {"drop", "map"},
                          {"gap_after", exp_mean(1.0)}});
  }
  stages.push_back(json{{"name", "result"}, {"tasks", 50}, {"task_time", exp_mean(1.0)}, {"drop", "reduce"}});
  return json{{"name", name}, {"setup", exp_mean(5.0)}, {"mean_processing_s", mean_processing}, {"stages", stages}};
}

json sprint_constants(json timeouts) {
  return json{{"timeouts_s", std::move(timeouts)},
              {"speed_factor", 2.5},
              {"budget_j", 22000.0},
              {"replenish_rate_w", 9.0},
              {"budget_cap_j", 22000.0}};
}

json power_constants() { return json{{"base_w", 180.0}, {"sprint_w", 270.0}, {"idle_w", 0.0}}; }

std::map<std::string, json> make_presets() {
  std::map<std::string, json> p;
  p["reference_two_priority"] = json{
      {"cluster", {{"slots", 20}}},
      {"classes", json::array({mapreduce_class("low", 148.5), mapreduce_class("high", 99.8)})},
      {"arrivals", {{"marked_poisson_per_min", {9.0, 1.0}}}},
      {"target_utilization", 0.8},
      {"policy", {{"kind", "preemptive"}}},
      {"sprint", sprint_constants(json::array({nullptr, 65.0}))},
      {"power", power_constants()},
      {"horizon_s", 2.0e6},
      {"seed", 1}};
  p["three_priority"] = json{
      {"cluster", {{"slots", 20}}},
      {"classes", json::array({mapreduce_class("low", 24.0), mapreduce_class("medium", 19.6),
                               mapreduce_class("high", 12.0)})},
      {"arrivals", {{"marked_poisson_per_min", {1.15, 0.92, 0.23}}}},
      {"target_utilization", 0.8},
      {"policy", {{"kind", "preemptive"}}},
      {"sprint", sprint_constants(json::array({nullptr, nullptr, 65.0}))},
      {"power", power_constants()},
      {"horizon_s", 5.0e5},
      {"seed", 1}};
  p["triangle_count"] = json{
      {"cluster", {{"slots", 20}}},
      {"classes", json::array({triangle_count_class("low", 148.5), triangle_count_class("high", 99.8)})},
      {"arrivals", {{"marked_poisson_per_min", {9.0, 1.0}}}},
      {"target_utilization", 0.8},
      {"policy", {{"kind", "preemptive"}}},
      {"sprint", sprint_constants(json::array({nullptr, 65.0}))},
      {"power", power_constants()},
      {"horizon_s", 2.0e6},
      {"seed", 1}};
  return p;
}

const std::map<std::string, json>& presets() {
  static const auto table = make_presets();
  return table;
}

// ---- pieces --------------------------------------------------------------

DropTarget parse_drop(const std::string& s, const std::string& where) {
  if (s == "none") return DropTarget::None;
  if (s == "map") return DropTarget::Map;
  if (s == "reduce") return DropTarget::Reduce;
  fail("SCHEMA_INVALID_VALUE", where + " must be one of none, map, reduce");
}

StageSpec parse_stage(const json& v, const std::string& where) {
  Fields f(v, where, {"name", "tasks", "task_time", "waves", "drop", "gap_after"});
  StageSpec s;
  s.name = f.has("name") ? f.string("name") : std::string();
  s.tasks = parse_count(f.at("tasks"), f.path("tasks"));
  s.task_time = f.has("task_time") ? parse_time(f.at("task_time"), f.path("task_time")) : TimeDist::exponential(1.0);
  if (f.has("waves")) {
    const auto& waves = array_at(f.at("waves"), f.path("waves"));
    for (std::size_t i = 0; i < waves.size(); ++i) s.waves.push_back(parse_time(waves[i], indexed(f.path("waves"), i)));
    if (!f.has("task_time")) s.task_time = TimeDist::zero();
  } else if (!f.has("task_time")) {
    fail("SCHEMA_MISSING_KEY", "missing key '" + f.path("task_time") + "'");
  }
  s.drop = f.has("drop") ? parse_drop(f.string("drop"), f.path("drop")) : DropTarget::None;
  s.gap_after = f.has("gap_after") ? parse_time(f.at("gap_after"), f.path("gap_after")) : TimeDist::zero();
  return s;
}

ClassWorkload rescaled(const ClassWorkload& w, double factor) {
  ClassWorkload out = w;
  out.setup = w.setup.scaled(factor);
  if (w.overhead_at_90) out.overhead_at_90 = *w.overhead_at_90 * factor;
  for (auto& s : out.stages) {
    s.task_time = s.task_time.scaled(factor);
    for (auto& wave : s.waves) wave = wave.scaled(factor);
    s.gap_after = s.gap_after.scaled(factor);
  }
  return out;
}

ClassWorkload parse_class(const json& v, const std::string& where, const ClusterSpec& cluster,
                          std::string& name) {
  Fields f(v, where, {"name", "setup", "stages", "model", "overhead_at_90_s", "mean_processing_s"});
  name = f.has("name") ? f.string("name") : std::string();
  ClassWorkload w;
  if (f.has("model")) {
    if (f.has("stages") || f.has("setup")) {
      fail("SCHEMA_CONFLICT", where + " takes either 'model' or 'setup' and 'stages'");
    }
    Fields m(f.at("model"), f.path("model"),
             {"map_tasks", "reduce_tasks", "overhead_rate_per_s", "map_rate_per_s", "shuffle_rate_per_s",
              "reduce_rate_per_s", "durations"});
    JobClassSpec spec;
    spec.map_counts = parse_count(m.at("map_tasks"), m.path("map_tasks"));
    spec.reduce_counts = parse_count(m.at("reduce_tasks"), m.path("reduce_tasks"));
    spec.mu_overhead = m.rate("overhead_rate_per_s");
    spec.mu_map = m.rate("map_rate_per_s");
    spec.mu_shuffle = m.rate("shuffle_rate_per_s");
    spec.mu_reduce = m.rate("reduce_rate_per_s");
    const std::string durations = m.has("durations") ? m.string("durations") : "exponential";
    if (durations == "exponential") {
      w = guarded(where, [&] { return task_level_workload(spec, name); });
    } else if (durations == "deterministic") {
      w = guarded(where, [&] { return deterministic_workload(spec, name); });
    } else {
      fail("SCHEMA_INVALID_VALUE", m.path("durations") + " must be exponential or deterministic");
    }
  } else {
    w.name = name;
    w.setup = f.has("setup") ? parse_time(f.at("setup"), f.path("setup")) : TimeDist::zero();
    const auto& stages = array_at(f.at("stages"), f.path("stages"));
    for (std::size_t i = 0; i < stages.size(); ++i) w.stages.push_back(parse_stage(stages[i], indexed(f.path("stages"), i)));
  }
  if (f.has("overhead_at_90_s")) {
    const double o = f.number("overhead_at_90_s");
    if (!(o > 0.0)) fail("SCHEMA_RATE_NONPOSITIVE", f.path("overhead_at_90_s") + " must be > 0");
    w.overhead_at_90 = o;
  }
  guarded(where, [&] { w.validate(); return 0; });
  if (f.has("mean_processing_s")) {
    const double target = f.number("mean_processing_s");
    if (!(target > 0.0)) fail("SCHEMA_RATE_NONPOSITIVE", f.path("mean_processing_s") + " must be > 0");
    const double current = guarded(where, [&] { return mean_processing_time(w, DropRatios{}, cluster); });
    if (!(current > 0.0)) fail("SCHEMA_INVALID_VALUE", where + " has zero processing time to rescale");
    w = rescaled(w, target / current);
  }
  return w;
}

MarkedArrivalProcess parse_process(const Fields& f, std::size_t n_classes) {
  auto check_size = [&](std::size_t n, const std::string& where) {
    if (n != n_classes) {
      fail("SCHEMA_CLASS_COUNT", where + " has " + std::to_string(n) + " entries for " +
                                     std::to_string(n_classes) + " classes");
    }
  };
  if (f.has("marked_poisson_per_s") || f.has("marked_poisson_per_min")) {
    const bool per_min = f.has("marked_poisson_per_min");
    const std::string key = per_min ? "marked_poisson_per_min" : "marked_poisson_per_s";
    auto rates = numbers(f.at(key), f.path(key));
    check_size(rates.size(), f.path(key));
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (rates[i] < 0.0) fail("SCHEMA_RATE_NONPOSITIVE", indexed(f.path(key), i) + " must be >= 0");
      if (per_min) rates[i] /= 60.0;
    }
    return guarded(f.path(key), [&] { return make_marked_poisson(rates); });
  }
  Fields m(f.at("mmap"), f.path("mmap"), {"d0_per_s", "marked_per_s"});
  Eigen::MatrixXd d0 = matrix(m.at("d0_per_s"), m.path("d0_per_s"));
  std::vector<Eigen::MatrixXd> marked;
  const auto& list = array_at(m.at("marked_per_s"), m.path("marked_per_s"));
  for (std::size_t i = 0; i < list.size(); ++i) marked.push_back(matrix(list[i], indexed(m.path("marked_per_s"), i)));
  check_size(marked.size(), m.path("marked_per_s"));
  return guarded(f.path("mmap"), [&] { return MarkedArrivalProcess(std::move(d0), std::move(marked)); });
}

SprintConfig parse_sprint(const json& v, const std::string& where, std::size_t n_classes) {
  Fields f(v, where, {"timeouts_s", "speed_factor", "budget_j", "replenish_rate_w", "budget_cap_j"});
  SprintConfig s;
  const auto& t = array_at(f.at("timeouts_s"), f.path("timeouts_s"));
  if (t.size() != n_classes) fail("SCHEMA_CLASS_COUNT", f.path("timeouts_s") + " needs one entry per class");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].is_null()) {
      s.timeouts.emplace_back();
    } else {
      const double x = number_in(t[i], indexed(f.path("timeouts_s"), i));
      if (x < 0.0) fail("SCHEMA_NEGATIVE_VALUE", indexed(f.path("timeouts_s"), i) + " must be >= 0");
      s.timeouts.emplace_back(x);
    }
  }
  s.speed_factor = f.number_or("speed_factor", 2.5);
  if (!(s.speed_factor > 1.0)) fail("SCHEMA_INVALID_VALUE", f.path("speed_factor") + " must be > 1");
  s.budget = f.nonnegative("budget_j");
  s.replenish_rate = f.has("replenish_rate_w") ? f.nonnegative("replenish_rate_w") : 0.0;
  s.budget_cap = f.has("budget_cap_j") ? f.nonnegative("budget_cap_j") : s.budget;
  return s;
}

std::vector<DropRatios> parse_drops(const json& v, const std::string& where, std::size_t n_classes) {
  const auto& list = array_at(v, where);
  if (list.size() != n_classes) fail("SCHEMA_CLASS_COUNT", where + " needs one entry per class");
  std::vector<DropRatios> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    Fields f(list[i], indexed(where, i), {"map", "reduce"});
    DropRatios d{f.number_or("map", 0.0), f.number_or("reduce", 0.0)};
    guarded(indexed(where, i), [&] {
      validate_drop_ratio(d.map);
      validate_drop_ratio(d.reduce);
      return 0;
    });
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : presets()) names.push_back(name);
  return names;
}

json preset(std::string_view name) {
  auto it = presets().find(std::string(name));
  if (it == presets().end()) fail("SCHEMA_UNKNOWN_PRESET", "unknown preset '" + std::string(name) + "'");
  return it->second;
}

json resolve(const json& document) {
  if (!document.is_object()) fail("SCHEMA_TYPE", "document must be an object");
  auto it = document.find("preset");
  if (it == document.end()) return document;
  if (!it->is_string()) fail("SCHEMA_TYPE", "preset must be a string");
  json base = preset(it->get<std::string>());
  json patch = document;
  patch.erase("preset");
  base.merge_patch(patch);
  return base;
}

std::uint64_t document_hash(const json& document) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : document.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

TimeDist parse_time(const json& value, const std::string& where) {
  Fields f(value, where, {"deterministic_s", "exponential_rate_per_s", "exponential_mean_s", "erlang", "phase_type"});
  if (value.size() != 1) fail("SCHEMA_INVALID_VALUE", where + " must hold exactly one distribution key");
  if (f.has("deterministic_s")) return TimeDist::deterministic(f.nonnegative("deterministic_s"));
  if (f.has("exponential_rate_per_s")) return TimeDist::exponential(f.rate("exponential_rate_per_s"));
  if (f.has("exponential_mean_s")) return TimeDist::exponential(1.0 / f.rate("exponential_mean_s"));
  if (f.has("erlang")) {
    Fields e(f.at("erlang"), f.path("erlang"), {"phases", "mean_s"});
    const auto k = e.integer("phases");
    if (k < 1) fail("SCHEMA_INVALID_VALUE", e.path("phases") + " must be >= 1");
    const double m = e.rate("mean_s");
    return TimeDist::phase_type(guarded(where, [&] { return make_erlang_with_mean(static_cast<int>(k), m); }));
  }
  Fields p(f.at("phase_type"), f.path("phase_type"), {"initial", "subgen_per_s"});
  const auto init = numbers(p.at("initial"), p.path("initial"));
  Eigen::MatrixXd a = matrix(p.at("subgen_per_s"), p.path("subgen_per_s"));
  Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(init.size()));
  return TimeDist::phase_type(guarded(where, [&] { return PhaseTypeDist(alpha, a); }));
}

CountPmf parse_count(const json& value, const std::string& where) {
  if (value.is_number_integer()) {
    const auto n = value.get<long long>();
    if (n < 1) fail("SCHEMA_INVALID_VALUE", where + " must be >= 1");
    return CountPmf::point(static_cast<int>(n));
  }
  Fields f(value, where, {"point", "uniform", "pmf", "masses"});
  if (value.size() != 1) fail("SCHEMA_INVALID_VALUE", where + " must hold exactly one count key");
  if (f.has("point")) return parse_count(f.at("point"), f.path("point"));
  if (f.has("uniform")) {
    const auto b = numbers(f.at("uniform"), f.path("uniform"));
    if (b.size() != 2) fail("SCHEMA_INVALID_VALUE", f.path("uniform") + " must be [lo, hi]");
    return guarded(where, [&] { return CountPmf::uniform(static_cast<int>(b[0]), static_cast<int>(b[1])); });
  }
  if (f.has("pmf")) {
    auto probs = numbers(f.at("pmf"), f.path("pmf"));
    return guarded(where, [&] { return CountPmf(std::move(probs)); });
  }
  std::map<int, double> masses;
  const auto& m = f.at("masses");
  if (!m.is_object()) fail("SCHEMA_TYPE", f.path("masses") + " must be an object");
  for (const auto& [key, val] : m.items()) {
    int count = 0;
    try {
      std::size_t used = 0;
      count = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      fail("SCHEMA_INVALID_VALUE", f.path("masses") + " keys must be task counts");
    }
    masses[count] = number_in(val, join(f.path("masses"), key));
  }
  return guarded(where, [&] { return CountPmf::from_map(masses); });
}

ScenarioDocument parse_scenario(const json& document) {
  ScenarioDocument doc;
  doc.resolved = resolve(document);
  doc.hash = document_hash(doc.resolved);
  const Fields f(doc.resolved, "",
                 {"name", "description", "cluster", "classes", "arrivals", "target_utilization", "policy", "sprint",
                  "power", "horizon_s", "warmup_s", "seed"});
  Scenario& s = doc.scenario;

  if (f.has("cluster")) {
    Fields c(f.at("cluster"), "cluster", {"slots"});
    const auto slots = c.integer("slots");
    if (slots < 1) fail("SCHEMA_INVALID_VALUE", "cluster.slots must be >= 1");
    s.cluster.slots = static_cast<int>(slots);
  }

  const auto& classes = array_at(f.at("classes"), "classes");
  if (classes.empty()) fail("SCHEMA_INVALID_VALUE", "classes must not be empty");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    std::string name;
    s.classes.push_back(parse_class(classes[i], indexed("classes", i), s.cluster, name));
    if (name.empty()) name = std::to_string(i + 1);
    for (const auto& other : doc.class_names) {
      if (other == name) fail("SCHEMA_INVALID_VALUE", "duplicate class name '" + name + "'");
    }
    doc.class_names.push_back(name);
  }
  const std::size_t n = s.classes.size();

  s.horizon = f.rate("horizon_s");
  if (f.has("warmup_s")) s.warmup = f.nonnegative("warmup_s");
  if (f.has("seed")) {
    const auto seed = f.integer("seed");
    if (seed < 0) fail("SCHEMA_INVALID_VALUE", "seed must be >= 0");
    s.seed = static_cast<std::uint64_t>(seed);
  }

  Fields a(f.at("arrivals"), "arrivals", {"marked_poisson_per_s", "marked_poisson_per_min", "mmap", "trace"});
  if (f.at("arrivals").size() != 1) fail("SCHEMA_INVALID_VALUE", "arrivals must hold exactly one process key");
  if (a.has("trace")) {
    const auto& trace = array_at(a.at("trace"), "arrivals.trace");
    for (std::size_t i = 0; i < trace.size(); ++i) {
      Fields e(trace[i], indexed("arrivals.trace", i), {"time_s", "class"});
      const double t = e.nonnegative("time_s");
      int k = 0;
      if (e.at("class").is_string()) {
        k = static_cast<int>(class_index(doc, e.string("class"))) + 1;
      } else {
        k = static_cast<int>(e.integer("class"));
      }
      if (k < 1 || static_cast<std::size_t>(k) > n) fail("SCHEMA_INVALID_VALUE", e.path("class") + " is out of range");
      s.arrival_trace.push_back({t, k});
    }
    if (f.has("target_utilization")) fail("SCHEMA_CONFLICT", "target_utilization needs a stochastic arrival process");
  } else {
    s.arrivals = parse_process(a, n);
    if (f.has("target_utilization")) {
      const double rho = f.number("target_utilization");
      if (!(rho > 0.0 && rho < 1.0)) fail("SCHEMA_INVALID_VALUE", "target_utilization must be in (0, 1)");
      std::vector<double> means;
      for (const auto& c : s.classes) means.push_back(mean_processing_time(c, DropRatios{}, s.cluster));
      s.arrivals = guarded("target_utilization", [&] { return calibrate_for_utilization(*s.arrivals, means, rho); });
    }
  }

  if (f.has("power")) {
    Fields p(f.at("power"), "power", {"base_w", "sprint_w", "idle_w"});
    s.power.base = p.has("base_w") ? p.nonnegative("base_w") : s.power.base;
    s.power.sprint = p.has("sprint_w") ? p.nonnegative("sprint_w") : s.power.sprint;
    s.power.idle = p.has("idle_w") ? p.nonnegative("idle_w") : s.power.idle;
    if (!(s.power.sprint > s.power.base)) fail("SCHEMA_INVALID_VALUE", "power.sprint_w must exceed power.base_w");
  }
  if (f.has("sprint")) doc.sprint = parse_sprint(f.at("sprint"), "sprint", n);

  Fields pol(f.at("policy"), "policy", {"kind", "drop_ratios"});
  const std::string kind_name = pol.string("kind");
  const auto kind = guarded("policy.kind", [&] { return policy_kind_from_string(kind_name); });
  std::vector<DropRatios> drops;
  if (pol.has("drop_ratios")) drops = parse_drops(pol.at("drop_ratios"), "policy.drop_ratios", n);
  switch (kind) {
    case PolicyKind::Preemptive:
    case PolicyKind::NonPreemptive:
      for (const auto& d : drops) {
        if (d.map != 0.0 || d.reduce != 0.0) {
          fail("SCHEMA_CONFLICT", "policy " + kind_name + " does not drop tasks; use differential_approx");
        }
      }
      s.policy = kind == PolicyKind::Preemptive ? preemptive_policy() : non_preemptive_policy();
      break;
    case PolicyKind::DifferentialApprox:
      s.policy = differential_approx_policy(drops);
      break;
    case PolicyKind::DiasFull:
      if (!doc.sprint) fail("SCHEMA_MISSING_KEY", "policy dias needs a sprint block");
      s.policy = dias_policy(drops, *doc.sprint);
      break;
  }
  guarded("scenario", [&] { s.validate(); return 0; });
  return doc;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("SCHEMA_UNREADABLE", "cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail("SCHEMA_PARSE", path.string() + ": " + e.what());
  }
}

ScenarioDocument load_scenario(const std::filesystem::path& path) { return parse_scenario(read_json(path)); }

std::size_t class_index(const ScenarioDocument& doc, std::string_view key) {
  for (std::size_t i = 0; i < doc.class_names.size(); ++i) {
    if (doc.class_names[i] == key) return i;
  }
  try {
    std::size_t used = 0;
    const int k = std::stoi(std::string(key), &used);
    if (used == key.size() && k >= 1 && static_cast<std::size_t>(k) <= doc.class_names.size()) {
      return static_cast<std::size_t>(k - 1);
    }
  } catch (const std::exception&) {
  }
  fail("SCHEMA_INVALID_VALUE", "unknown class '" + std::string(key) + "'");
}

PlanRequest parse_targets(const json& document, const ScenarioDocument& scenario) {
  PlanRequest req;
  const Fields f(document, "targets",
                 {"classes", "latency_weight", "accuracy_weight", "theta_grid", "timeout_grid_s", "replications",
                  "accuracy_curve"});
  const std::size_t n = scenario.class_names.size();
  const auto& classes = f.at("classes");
  req.targets.classes.resize(n);
  req.mean_latency_vs_preemptive.resize(n);
  if (!classes.is_object()) fail("SCHEMA_TYPE", "targets.classes must be an object keyed by class");
  for (const auto& [key, value] : classes.items()) {
    const std::size_t k = class_index(scenario, key);
    const std::string where = "targets.classes." + key;
    Fields c(value, where,
             {"max_relative_error_pct", "max_mean_latency_s", "max_p95_latency_s", "max_mean_latency_vs_preemptive"});
    auto& t = req.targets.classes[k];
    if (c.has("max_relative_error_pct")) t.max_relative_error = c.nonnegative("max_relative_error_pct");
    if (c.has("max_mean_latency_s")) t.max_mean_latency = c.nonnegative("max_mean_latency_s");
    if (c.has("max_p95_latency_s")) t.max_p95_latency = c.nonnegative("max_p95_latency_s");
    if (c.has("max_mean_latency_vs_preemptive")) {
      req.mean_latency_vs_preemptive[k] = c.rate("max_mean_latency_vs_preemptive");
    }
  }
  req.targets.latency_weight = f.has("latency_weight") ? f.nonnegative("latency_weight") : 1.0;
  req.targets.accuracy_weight = f.has("accuracy_weight") ? f.nonnegative("accuracy_weight") : 0.0;
  if (f.has("theta_grid")) req.theta_grid = numbers(f.at("theta_grid"), "targets.theta_grid");
  if (f.has("timeout_grid_s")) {
    req.timeout_grid.clear();
    const auto& g = array_at(f.at("timeout_grid_s"), "targets.timeout_grid_s");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i].is_null()) {
        req.timeout_grid.emplace_back();
      } else {
        req.timeout_grid.emplace_back(number_in(g[i], indexed("targets.timeout_grid_s", i)));
      }
    }
  }
  if (f.has("replications")) {
    const auto r = f.integer("replications");
    if (r < 1) fail("SCHEMA_INVALID_VALUE", "targets.replications must be >= 1");
    req.replications = static_cast<int>(r);
  }
  if (f.has("accuracy_curve")) {
    Fields c(f.at("accuracy_curve"), "targets.accuracy_curve", {"points", "measured_up_to"});
    std::vector<AccuracyCurve::Point> pts;
    const auto& list = array_at(c.at("points"), "targets.accuracy_curve.points");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto xy = numbers(list[i], indexed("targets.accuracy_curve.points", i));
      if (xy.size() != 2) fail("SCHEMA_INVALID_VALUE", "accuracy curve points are [drop_ratio, error_pct]");
      pts.push_back({xy[0], xy[1]});
    }
    std::optional<double> measured;
    if (c.has("measured_up_to")) measured = c.number("measured_up_to");
    req.curve = guarded("targets.accuracy_curve", [&] { return AccuracyCurve(std::move(pts), measured); });
  }
  guarded("targets", [&] { req.targets.validate(n); return 0; });
  return req;
}

}  // namespace dias::io
