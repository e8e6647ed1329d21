#include "cbo/serialization.hpp"

#include <cmath>
#include <limits>

#include "cbo/error.hpp"

namespace cbo {
namespace {

using nlohmann::json;

json Number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double NumberOr(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  return j[key].get<double>();
}

std::optional<double> OptionalNumber(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw InvalidArgument(std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

const std::string& Require(const json& j, const char* key, std::string& scratch) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw InvalidArgument(std::string("missing string field '") + key + "'");
  }
  scratch = j[key].get<std::string>();
  return scratch;
}

ParamValue ValueFromJson(const json& j, const ParamSpec& spec) {
  switch (spec.kind) {
    case ParamKind::kCategorical:
      if (!j.is_string()) throw InvalidArgument("'" + spec.name + "' expects a category string");
      return j.get<std::string>();
    case ParamKind::kInteger:
      if (j.is_number_integer()) return j.get<std::int64_t>();
      if (j.is_number() && j.get<double>() == std::round(j.get<double>())) {
        return static_cast<std::int64_t>(j.get<double>());
      }
      throw InvalidArgument("'" + spec.name + "' expects an integer");
    case ParamKind::kContinuous:
      if (!j.is_number()) throw InvalidArgument("'" + spec.name + "' expects a number");
      return j.get<double>();
  }
  throw InvalidArgument("unreachable parameter kind");
}

}  // namespace

json ToJson(const ParamValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

json ToJson(const ParamValues& values) {
  json out = json::object();
  for (const auto& [k, v] : values) out[k] = ToJson(v);
  return out;
}

ParamValues ParamValuesFromJson(const json& j, const SearchSpace& space) {
  if (!j.is_object()) throw InvalidArgument("parameter values must be a JSON object");
  ParamValues out;
  for (const auto& [k, v] : j.items()) {
    const auto& params = space.params();
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const ParamSpec& p) { return p.name == k; });
    if (it == params.end()) throw InvalidArgument("unknown parameter '" + k + "'");
    out.emplace(k, ValueFromJson(v, *it));
  }
  return out;
}

json ToJson(const ParamSpec& spec) {
  json j;
  j["name"] = spec.name;
  switch (spec.kind) {
    case ParamKind::kContinuous: j["kind"] = "continuous"; break;
    case ParamKind::kInteger: j["kind"] = "integer"; break;
    case ParamKind::kCategorical: j["kind"] = "categorical"; break;
  }
  if (spec.kind == ParamKind::kCategorical) {
    j["categories"] = spec.categories;
  } else {
    if (spec.kind == ParamKind::kInteger) {
      j["low"] = static_cast<std::int64_t>(spec.low);
      j["high"] = static_cast<std::int64_t>(spec.high);
    } else {
      j["low"] = spec.low;
      j["high"] = spec.high;
    }
    j["scale"] = spec.scale == Scale::kLog ? "log" : "linear";
  }
  if (spec.default_value) j["default"] = ToJson(*spec.default_value);
  return j;
}

ParamSpec ParamSpecFromJson(const json& j) {
  if (!j.is_object()) throw InvalidArgument("parameter entry must be an object");
  std::string name;
  std::string kind;
  Require(j, "name", name);
  Require(j, "kind", kind);
  Scale scale = Scale::kLinear;
  if (j.contains("scale")) {
    const auto s = j["scale"].get<std::string>();
    if (s == "log") scale = Scale::kLog;
    else if (s != "linear") throw InvalidArgument("parameter '" + name + "': unknown scale '" + s + "'");
  }
  ParamSpec spec;
  auto bound = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw InvalidArgument("parameter '" + name + "' needs numeric '" + key + "'");
    }
    return j[key].get<double>();
  };
  if (kind == "continuous") {
    spec = ParamSpec::Continuous(name, bound("low"), bound("high"), scale);
  } else if (kind == "integer") {
    const double lo = bound("low");
    const double hi = bound("high");
    if (lo != std::round(lo) || hi != std::round(hi)) {
      throw InvalidArgument("integer parameter '" + name + "' needs integral bounds");
    }
    spec = ParamSpec::Integer(name, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi), scale);
  } else if (kind == "categorical") {
    if (!j.contains("categories") || !j["categories"].is_array()) {
      throw InvalidArgument("categorical parameter '" + name + "' needs 'categories'");
    }
    spec = ParamSpec::Categorical(name, j["categories"].get<std::vector<std::string>>());
  } else {
    throw InvalidArgument("parameter '" + name + "': unknown kind '" + kind + "'");
  }
  if (j.contains("default")) spec.default_value = ValueFromJson(j["default"], spec);
  return spec;
}

json ToJson(const SearchSpace& space) {
  json out = json::array();
  for (const auto& p : space.params()) out.push_back(ToJson(p));
  return out;
}

SearchSpace SearchSpaceFromJson(const json& j) {
  if (!j.is_array()) throw InvalidArgument("search space must be a JSON array");
  std::vector<ParamSpec> params;
  for (const auto& entry : j) params.push_back(ParamSpecFromJson(entry));
  return SearchSpace(std::move(params));
}

json ToJson(const ProblemSpec& p) {
  json j;
  j["task"] = ToString(p.task);
  j["threshold"] = p.threshold;
  j["baseline_runtime"] = p.baseline_runtime ? json(*p.baseline_runtime) : json(nullptr);
  j["baseline_metric"] = p.baseline_metric ? json(*p.baseline_metric) : json(nullptr);
  j["space"] = ToJson(p.space);
  j["budget"] = p.budget;
  j["n_init"] = p.n_init;
  return j;
}

ProblemSpec ProblemSpecFromJson(const json& j) {
  ProblemSpec p;
  std::string task;
  p.task = ParseTask(Require(j, "task", task));
  p.threshold = j.at("threshold").get<double>();
  p.baseline_runtime = OptionalNumber(j, "baseline_runtime");
  p.baseline_metric = OptionalNumber(j, "baseline_metric");
  p.space = SearchSpaceFromJson(j.at("space"));
  p.budget = j.at("budget").get<std::size_t>();
  p.n_init = j.value("n_init", std::size_t{0});
  return p;
}

json ToJson(const Observation& o) {
  json j;
  j["iteration"] = o.iteration;
  j["params"] = ToJson(o.values);
  j["x"] = o.x;
  j["raw_runtime"] = Number(o.raw_runtime);
  j["raw_metric"] = Number(o.raw_metric);
  j["y_f"] = Number(o.y_f);
  j["y_c"] = Number(o.y_c);
  j["feasible"] = o.feasible();
  j["failed"] = o.failed;
  j["metric_clamped"] = o.metric_clamped;
  j["diagnostic"] = o.diagnostic;
  return j;
}

Observation ObservationFromJson(const json& j, const SearchSpace& space) {
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  Observation o;
  o.iteration = j.at("iteration").get<std::size_t>();
  o.values = ParamValuesFromJson(j.at("params"), space);
  o.x = j.at("x").get<std::vector<double>>();
  o.raw_runtime = NumberOr(j, "raw_runtime", kNaN);
  o.raw_metric = NumberOr(j, "raw_metric", kNaN);
  o.y_f = NumberOr(j, "y_f", kNaN);
  o.y_c = NumberOr(j, "y_c", kNaN);
  o.failed = j.at("failed").get<bool>();
  o.metric_clamped = j.value("metric_clamped", false);
  o.diagnostic = j.value("diagnostic", std::string());
  return o;
}

json ToJson(const OptimizerState& s) {
  json j;
  j["snapshot_version"] = 1;
  j["problem"] = ToJson(s.problem);
  j["mode"] = ToString(s.mode);
  j["seed"] = s.seed;
  j["baseline_runtime"] = s.baseline_runtime ? json(*s.baseline_runtime) : json(nullptr);
  j["baseline_metric"] = s.baseline_metric ? json(*s.baseline_metric) : json(nullptr);
  j["observations"] = json::array();
  for (const auto& o : s.observations) j["observations"].push_back(ToJson(o));
  return j;
}

OptimizerState OptimizerStateFromJson(const json& j) {
  if (j.value("snapshot_version", 0) != 1) throw InvalidArgument("unsupported snapshot version");
  OptimizerState s;
  s.problem = ProblemSpecFromJson(j.at("problem"));
  s.mode = ParseMode(j.at("mode").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.baseline_runtime = OptionalNumber(j, "baseline_runtime");
  s.baseline_metric = OptionalNumber(j, "baseline_metric");
  for (const auto& o : j.at("observations")) {
    s.observations.push_back(ObservationFromJson(o, s.problem.space));
  }
  return s;
}

}  // namespace cbo
