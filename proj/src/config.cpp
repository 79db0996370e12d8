#include "elmarket/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace elmarket::config {

namespace {

using strategy::MarginalCost;
using strategy::PriceForecast;
using strategy::Random;
using strategy::SurplusForecast;

constexpr int kMaxIncludeDepth = 8;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
}

void check_keys(const Json& j, const std::string& path, const std::set<std::string>& allowed) {
  check_object(j, path);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(join(path, key), "unknown field");
  }
}

double get_number(const Json& j, const std::string& key, const std::string& path, double dflt) {
  if (!j.contains(key)) return dflt;
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(join(path, key), "must be finite");
  return d;
}

long long get_integer(const Json& j, const std::string& key, const std::string& path,
                      long long dflt) {
  if (!j.contains(key)) return dflt;
  const Json& v = j.at(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15)
      return static_cast<long long>(d);
  }
  throw ConfigError(join(path, key), "expected an integer");
}

std::uint64_t get_seed(const Json& j, const std::string& key, const std::string& path,
                       std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  const Json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError(join(path, key), "expected a nonnegative integer");
}

bool get_bool(const Json& j, const std::string& key, const std::string& path, bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return j.at(key).get<bool>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& path,
                       const std::string& dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
  return j.at(key).get<std::string>();
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.filename().string(), std::string("malformed JSON: ") + e.what());
  }
}

// Object values merge key by key; anything else in `over` replaces `base`.
void merge_into(Json& base, const Json& over) {
  for (const auto& [key, value] : over.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

Json expand_includes(const Json& doc, const std::filesystem::path& base_dir, int depth) {
  check_object(doc, "");
  if (!doc.contains("include")) return doc;
  if (depth >= kMaxIncludeDepth) throw ConfigError("include", "includes nested too deeply");
  const std::string rel = get_string(doc, "include", "", "");
  std::filesystem::path inc = base_dir / rel;
  if (!std::filesystem::exists(inc)) {
    const std::filesystem::path preset = std::filesystem::path(ELMARKET_PRESET_DIR) / rel;
    if (!std::filesystem::exists(preset)) throw ConfigError("include", "file not found: " + rel);
    inc = preset;
  }
  Json merged = expand_includes(read_json(inc), inc.parent_path(), depth + 1);
  Json own = doc;
  own.erase("include");
  merge_into(merged, own);
  return merged;
}

Json resolve_strategy(const Json& s, const std::string& path, const Json& producer) {
  check_object(s, path);
  const std::string kind = get_string(s, "kind", path, "");
  if (kind.empty()) throw ConfigError(join(path, "kind"), "missing strategy kind");
  Json out{{"kind", kind}};
  if (kind == "random") {
    check_keys(s, path, {"kind", "low", "high"});
    if (s.contains("low")) out["low"] = get_number(s, "low", path, 0.0);
    if (s.contains("high")) out["high"] = get_number(s, "high", path, 0.0);
  } else if (kind == "marginal_cost") {
    check_keys(s, path, {"kind"});
  } else if (kind == "price_forecast") {
    check_keys(s, path, {"kind", "alpha"});
    const double fleet_alpha = get_number(producer, "alpha", "", PriceForecast{}.alpha);
    out["alpha"] = get_number(s, "alpha", path, fleet_alpha);
  } else if (kind == "surplus_forecast") {
    check_keys(s, path, {"kind", "beta1_pct", "beta2_pct", "gamma1_pct", "gamma2_pct", "grid_points"});
    const SurplusForecast d;
    out["beta1_pct"] = get_number(s, "beta1_pct", path, d.beta1_pct);
    out["beta2_pct"] = get_number(s, "beta2_pct", path, d.beta2_pct);
    out["gamma1_pct"] = get_number(s, "gamma1_pct", path, d.gamma1_pct);
    out["gamma2_pct"] = get_number(s, "gamma2_pct", path, d.gamma2_pct);
    out["grid_points"] = get_integer(s, "grid_points", path, d.grid_points);
  } else {
    throw ConfigError(join(path, "kind"),
                      "unknown strategy '" + kind +
                          "' (expected random, marginal_cost, price_forecast or surplus_forecast)");
  }
  return out;
}

Json resolve_model(const Json& m, const std::string& path, const forecast::ModelSettings& d) {
  const bool fraction = d.epsilon_units == forecast::EpsilonUnits::fraction_of_range;
  const std::string eps_key = fraction ? "epsilon_fraction" : "epsilon";
  check_keys(m, path, {"c", eps_key, "sigma", "kkt_tolerance", "max_passes"});
  return Json{{"c", get_number(m, "c", path, d.svr.c)},
              {eps_key, get_number(m, eps_key, path, d.svr.epsilon)},
              {"sigma", get_number(m, "sigma", path, d.svr.kernel.sigma)},
              {"kkt_tolerance", get_number(m, "kkt_tolerance", path, d.svr.kkt_tolerance)},
              {"max_passes", get_integer(m, "max_passes", path, d.svr.max_passes)}};
}

forecast::ModelSettings parse_model(const Json& m, forecast::ModelSettings s) {
  const bool fraction = s.epsilon_units == forecast::EpsilonUnits::fraction_of_range;
  s.svr.c = m.at("c").get<double>();
  s.svr.epsilon = m.at(fraction ? "epsilon_fraction" : "epsilon").get<double>();
  s.svr.kernel.sigma = m.at("sigma").get<double>();
  s.svr.kkt_tolerance = m.at("kkt_tolerance").get<double>();
  s.svr.max_passes = static_cast<int>(m.at("max_passes").get<long long>());
  return s;
}

Json model_json(const forecast::ModelSettings& s) {
  const bool fraction = s.epsilon_units == forecast::EpsilonUnits::fraction_of_range;
  return Json{{"c", s.svr.c},
              {fraction ? "epsilon_fraction" : "epsilon", s.svr.epsilon},
              {"sigma", s.svr.kernel.sigma},
              {"kkt_tolerance", s.svr.kkt_tolerance},
              {"max_passes", s.svr.max_passes}};
}

strategy::StrategyParams parse_strategy(const Json& s) {
  const std::string kind = s.at("kind").get<std::string>();
  if (kind == "random") {
    Random r;
    if (s.contains("low")) r.low = s.at("low").get<double>();
    if (s.contains("high")) r.high = s.at("high").get<double>();
    return r;
  }
  if (kind == "marginal_cost") return MarginalCost{};
  if (kind == "price_forecast") return PriceForecast{s.at("alpha").get<double>()};
  SurplusForecast sf;
  sf.beta1_pct = s.at("beta1_pct").get<double>();
  sf.beta2_pct = s.at("beta2_pct").get<double>();
  sf.gamma1_pct = s.at("gamma1_pct").get<double>();
  sf.gamma2_pct = s.at("gamma2_pct").get<double>();
  sf.grid_points = static_cast<int>(s.at("grid_points").get<long long>());
  return sf;
}

Json strategy_json(const strategy::StrategyParams& p) {
  Json out{{"kind", std::string(strategy::kind_name(p))}};
  if (const auto* r = std::get_if<Random>(&p)) {
    if (r->low) out["low"] = *r->low;
    if (r->high) out["high"] = *r->high;
  } else if (const auto* f = std::get_if<PriceForecast>(&p)) {
    out["alpha"] = f->alpha;
  } else if (const auto* s = std::get_if<SurplusForecast>(&p)) {
    out["beta1_pct"] = s->beta1_pct;
    out["beta2_pct"] = s->beta2_pct;
    out["gamma1_pct"] = s->gamma1_pct;
    out["gamma2_pct"] = s->gamma2_pct;
    out["grid_points"] = s->grid_points;
  }
  return out;
}

// "producers[3].capacity: must be positive" -> field and message.
ConfigError from_validation(const std::string& what) {
  const auto pos = what.find(": ");
  if (pos == std::string::npos) return ConfigError("<config>", what);
  return ConfigError(what.substr(0, pos), what.substr(pos + 2));
}

}  // namespace

Json resolve(const Json& doc, const std::filesystem::path& base_dir) {
  const Json d = expand_includes(doc, base_dir, 0);
  check_keys(d, "", {"name", "seed", "stages", "market", "load", "learning", "producers",
                     "default_strategy", "strategies", "report_ranges", "description"});
  const sim::ScenarioConfig defaults;
  Json out;
  out["name"] = get_string(d, "name", "", defaults.name);
  out["seed"] = get_seed(d, "seed", "", defaults.master_seed);
  if (d.contains("description")) out["description"] = get_string(d, "description", "", "");

  const Json stages = d.value("stages", Json::object());
  check_keys(stages, "stages", {"preliminary_days", "strategic_days"});
  out["stages"] = {
      {"preliminary_days", get_integer(stages, "preliminary_days", "stages", defaults.preliminary_days)},
      {"strategic_days", get_integer(stages, "strategic_days", "stages", defaults.strategic_days)}};

  const Json market = d.value("market", Json::object());
  check_keys(market, "market", {"price_cap"});
  out["market"] = {{"price_cap", get_number(market, "price_cap", "market", defaults.price_cap)}};

  const Json load = d.value("load", Json::object());
  check_keys(load, "load",
             {"base", "daily_amplitude", "weekend_factor", "noise_sigma", "peak_hour", "seed"});
  const auto& L = defaults.load;
  out["load"] = {{"base", get_number(load, "base", "load", L.base)},
                 {"daily_amplitude", get_number(load, "daily_amplitude", "load", L.daily_amplitude)},
                 {"weekend_factor", get_number(load, "weekend_factor", "load", L.weekend_factor)},
                 {"noise_sigma", get_number(load, "noise_sigma", "load", L.noise_sigma)},
                 {"peak_hour", get_integer(load, "peak_hour", "load", L.peak_hour)},
                 {"seed", get_seed(load, "seed", "load", L.seed)}};

  const Json learning = d.value("learning", Json::object());
  check_keys(learning, "learning",
             {"window_days", "retrain_every_days", "forecast_during_preliminary", "price_model",
              "surplus_model"});
  out["learning"] = {
      {"window_days", get_integer(learning, "window_days", "learning", defaults.window_days)},
      {"retrain_every_days",
       get_integer(learning, "retrain_every_days", "learning", defaults.retrain_every_days)},
      {"forecast_during_preliminary",
       get_bool(learning, "forecast_during_preliminary", "learning",
                defaults.forecast_during_preliminary)},
      {"price_model", resolve_model(learning.value("price_model", Json::object()),
                                    "learning.price_model", defaults.price_model)},
      {"surplus_model", resolve_model(learning.value("surplus_model", Json::object()),
                                      "learning.surplus_model", defaults.surplus_model)}};

  if (!d.contains("producers")) throw ConfigError("producers", "missing producers section");
  const Json& producers = d.at("producers");
  if (!producers.is_array() || producers.empty())
    throw ConfigError("producers", "expected a non-empty list");

  const Json overrides = d.value("strategies", Json::object());
  check_object(overrides, "strategies");
  std::set<std::string> ids;
  Json plist = Json::array();
  for (std::size_t i = 0; i < producers.size(); ++i) {
    const std::string path = "producers[" + std::to_string(i) + "]";
    const Json& p = producers[i];
    check_keys(p, path, {"id", "marginal_cost", "capacity", "alpha", "rng_seed", "strategy"});
    if (!p.contains("id")) throw ConfigError(join(path, "id"), "missing producer id");
    const std::string id = get_string(p, "id", path, "");
    if (!ids.insert(id).second) throw ConfigError(join(path, "id"), "duplicate producer id '" + id + "'");
    if (!p.contains("capacity")) throw ConfigError(join(path, "capacity"), "missing capacity");
    Json q{{"id", id},
           {"marginal_cost", get_number(p, "marginal_cost", path, sim::Producer{}.marginal_cost)},
           {"capacity", get_number(p, "capacity", path, 0.0)}};
    if (p.contains("alpha")) q["alpha"] = get_number(p, "alpha", path, 0.0);
    if (p.contains("rng_seed")) q["rng_seed"] = get_seed(p, "rng_seed", path, 0);
    if (overrides.contains(id)) {
      q["strategy"] = resolve_strategy(overrides.at(id), "strategies." + id, q);
    } else if (p.contains("strategy")) {
      q["strategy"] = resolve_strategy(p.at("strategy"), join(path, "strategy"), q);
    } else if (d.contains("default_strategy")) {
      q["strategy"] = resolve_strategy(d.at("default_strategy"), "default_strategy", q);
    } else {
      q["strategy"] = Json{{"kind", "random"}};
    }
    plist.push_back(std::move(q));
  }
  for (const auto& [id, s] : overrides.items()) {
    if (!ids.contains(id)) throw ConfigError("strategies." + id, "no producer with this id");
  }
  out["producers"] = std::move(plist);

  Json ranges = Json::array();
  const Json rin = d.value("report_ranges", Json::array());
  if (!rin.is_array()) throw ConfigError("report_ranges", "expected a list");
  for (std::size_t i = 0; i < rin.size(); ++i) {
    const std::string path = "report_ranges[" + std::to_string(i) + "]";
    check_keys(rin[i], path, {"name", "first_day", "last_day"});
    ranges.push_back({{"name", get_string(rin[i], "name", path, "range" + std::to_string(i))},
                      {"first_day", get_integer(rin[i], "first_day", path, 1)},
                      {"last_day", get_integer(rin[i], "last_day", path, 1)}});
  }
  out["report_ranges"] = std::move(ranges);
  return out;
}

Json load_resolved(const std::filesystem::path& path) {
  return resolve(read_json(path), path.parent_path());
}

sim::ScenarioConfig to_scenario(const Json& r) {
  sim::ScenarioConfig cfg;
  cfg.name = r.at("name").get<std::string>();
  cfg.master_seed = r.at("seed").get<std::uint64_t>();
  cfg.preliminary_days = static_cast<int>(r.at("stages").at("preliminary_days").get<long long>());
  cfg.strategic_days = static_cast<int>(r.at("stages").at("strategic_days").get<long long>());
  cfg.price_cap = r.at("market").at("price_cap").get<double>();
  const Json& l = r.at("load");
  cfg.load.base = l.at("base").get<double>();
  cfg.load.daily_amplitude = l.at("daily_amplitude").get<double>();
  cfg.load.weekend_factor = l.at("weekend_factor").get<double>();
  cfg.load.noise_sigma = l.at("noise_sigma").get<double>();
  cfg.load.peak_hour = static_cast<int>(l.at("peak_hour").get<long long>());
  cfg.load.seed = l.at("seed").get<std::uint64_t>();
  const Json& le = r.at("learning");
  cfg.window_days = static_cast<int>(le.at("window_days").get<long long>());
  cfg.retrain_every_days = static_cast<int>(le.at("retrain_every_days").get<long long>());
  cfg.forecast_during_preliminary = le.at("forecast_during_preliminary").get<bool>();
  cfg.price_model = parse_model(le.at("price_model"), cfg.price_model);
  cfg.surplus_model = parse_model(le.at("surplus_model"), cfg.surplus_model);
  for (const Json& p : r.at("producers")) {
    sim::Producer q;
    q.id = p.at("id").get<std::string>();
    q.marginal_cost = p.at("marginal_cost").get<double>();
    q.capacity = p.at("capacity").get<double>();
    if (p.contains("rng_seed")) q.rng_seed = p.at("rng_seed").get<std::uint64_t>();
    q.strategy = parse_strategy(p.at("strategy"));
    cfg.producers.push_back(std::move(q));
  }
  for (const Json& rr : r.at("report_ranges")) {
    cfg.report_ranges.push_back({rr.at("name").get<std::string>(),
                                 static_cast<int>(rr.at("first_day").get<long long>()),
                                 static_cast<int>(rr.at("last_day").get<long long>())});
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw from_validation(e.what());
  }
  return cfg;
}

Json to_json(const sim::ScenarioConfig& cfg) {
  Json out;
  out["name"] = cfg.name;
  out["seed"] = cfg.master_seed;
  out["stages"] = {{"preliminary_days", cfg.preliminary_days},
                   {"strategic_days", cfg.strategic_days}};
  out["market"] = {{"price_cap", cfg.price_cap}};
  out["load"] = {{"base", cfg.load.base},
                 {"daily_amplitude", cfg.load.daily_amplitude},
                 {"weekend_factor", cfg.load.weekend_factor},
                 {"noise_sigma", cfg.load.noise_sigma},
                 {"peak_hour", cfg.load.peak_hour},
                 {"seed", cfg.load.seed}};
  out["learning"] = {{"window_days", cfg.window_days},
                     {"retrain_every_days", cfg.retrain_every_days},
                     {"forecast_during_preliminary", cfg.forecast_during_preliminary},
                     {"price_model", model_json(cfg.price_model)},
                     {"surplus_model", model_json(cfg.surplus_model)}};
  Json plist = Json::array();
  for (const auto& p : cfg.producers) {
    Json q{{"id", p.id},
           {"marginal_cost", p.marginal_cost},
           {"capacity", p.capacity},
           {"strategy", strategy_json(p.strategy)}};
    if (p.rng_seed) q["rng_seed"] = *p.rng_seed;
    plist.push_back(std::move(q));
  }
  out["producers"] = std::move(plist);
  Json ranges = Json::array();
  for (const auto& r : cfg.report_ranges) {
    ranges.push_back({{"name", r.name}, {"first_day", r.first_day}, {"last_day", r.last_day}});
  }
  out["report_ranges"] = std::move(ranges);
  return out;
}

std::string config_hash(const Json& resolved) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : resolved.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

void set_field(Json& resolved, const std::string& path, const Json& value) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty() || path.empty()) throw ConfigError("<empty>", "empty field path");
  for (const auto& p : parts) {
    if (p.empty()) throw ConfigError(path, "malformed field path");
  }

  // Walks `parts[from..]` below `node`. The last key must already exist
  // unless it is one of the optional fields; the re-resolve below rejects
  // optional fields that do not belong where they were put.
  auto assign = [&](Json& node, std::size_t from, bool strict) -> bool {
    Json* cur = &node;
    for (std::size_t k = from; k + 1 < parts.size(); ++k) {
      if (!cur->is_object() || !cur->contains(parts[k])) {
        if (strict) throw ConfigError(path, "unknown field");
        return false;
      }
      cur = &(*cur)[parts[k]];
    }
    const std::string& last = parts.back();
    const bool optional = last == "low" || last == "high" || last == "rng_seed" || last == "alpha";
    if (!cur->is_object() || (!cur->contains(last) && !(strict && optional))) {
      if (strict) throw ConfigError(path, "unknown field");
      return false;
    }
    if (last == "kind" && parts.size() >= 2 && parts[parts.size() - 2] == "strategy") {
      if (cur->value("kind", Json()) != value) *cur = Json{{"kind", value}};
    } else {
      (*cur)[last] = value;
    }
    return true;
  };

  Json doc = resolved;
  if (parts[0] == "producers") {
    if (parts.size() < 3) throw ConfigError(path, "expected producers.<id>.<field>");
    bool any = false;
    for (Json& p : doc.at("producers")) {
      if (parts[1] == "*") {
        any = assign(p, 2, false) || any;
      } else if (p.at("id") == parts[1]) {
        any = assign(p, 2, true);
      }
    }
    if (!any) {
      throw ConfigError(path, parts[1] == "*" ? "no producer has this field" : "no producer with id '" + parts[1] + "'");
    }
  } else {
    assign(doc, 0, true);
  }
  try {
    resolved = resolve(doc, {});
  } catch (const ConfigError& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace elmarket::config
