#include "elmarket/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "elmarket/config.hpp"
#include "elmarket/outputs.hpp"
#include "elmarket/simulation.hpp"

namespace elmarket::cli {

namespace {

namespace fs = std::filesystem;

struct Prepared {
  config::Json resolved;
  sim::ScenarioConfig scenario;
};

Prepared prepare(const config::Json& resolved) {
  return {resolved, config::to_scenario(resolved)};
}

std::string pretty(const config::Json& j) { return j.dump(2) + "\n"; }

std::string safe_dir_name(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out.empty() ? "value" : out;
}

// Runs one scenario and writes its artifacts; returns the report.
sim::ScenarioReport execute(const Prepared& p, const fs::path& dir) {
  out::RunManifest m;
  m.scenario_name = p.scenario.name;
  m.config_hash = config::config_hash(p.resolved);
  m.master_seed = p.scenario.master_seed;
  m.output_dir = dir.string();
  m.started_at = out::utc_now();
  const sim::ScenarioResult result = sim::run_scenario(p.scenario);
  m.finished_at = out::utc_now();
  out::write_run(dir, p.scenario, result, pretty(p.resolved), m);
  return result.report;
}

void print_summary(std::ostream& os, const sim::ScenarioConfig& cfg, const sim::ScenarioReport& rep,
                   const fs::path& dir) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: strategic surplus %.3f MEUR, last-15-day price %.3f EUR/MWh",
                cfg.name.c_str(), rep.total(cfg.strategic_days > 0 ? "strategic" : "preliminary") / 1e6,
                rep.daily_average.empty() ? 0.0 : rep.final_average_price(15));
  os << buf << " -> " << dir.string() << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const config::ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

config::Json load_with_seed(const RunOptions& opt) {
  config::Json resolved = config::load_resolved(locate_config(opt.config));
  if (opt.seed) resolved["seed"] = *opt.seed;
  return resolved;
}

}  // namespace

fs::path locate_config(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path presets(ELMARKET_PRESET_DIR);
  for (const fs::path& candidate : {presets / arg, presets / (arg + ".json")}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw std::runtime_error("config file not found: " + arg);
}

SweepSpec parse_sweep_spec(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("sweep spec must look like field=v1,v2,...");
  SweepSpec s;
  s.field = text.substr(0, eq);
  const std::string list = text.substr(eq + 1);
  std::size_t start = 0;
  while (start <= list.size() && !list.empty()) {
    const auto comma = list.find(',', start);
    const std::string v = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (v.empty()) throw std::invalid_argument("sweep spec contains an empty value");
    s.values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (s.values.empty()) throw std::invalid_argument("sweep value list is empty");
  return s;
}

int cmd_validate(const std::string& config_arg, std::ostream& os, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(config::load_resolved(locate_config(config_arg)));
    os << pretty(p.resolved);
    char buf[128];
    std::snprintf(buf, sizeof buf, "HHI %.1f\n", sim::hhi(p.scenario.producers));
    os << buf;
    os << "config hash " << config::config_hash(p.resolved) << "\n";
    return kExitOk;
  });
}

int cmd_run(const RunOptions& opt, std::ostream& os, std::ostream& err) {
  return guarded(err, [&] {
    const Prepared p = prepare(load_with_seed(opt));
    const fs::path dir = opt.out_dir.empty() ? fs::path("runs") / safe_dir_name(p.scenario.name) : opt.out_dir;
    const sim::ScenarioReport rep = execute(p, dir);
    if (!opt.quiet) print_summary(os, p.scenario, rep, dir);
    return kExitOk;
  });
}

int cmd_sweep(const RunOptions& opt, const std::string& parameter_spec, std::ostream& os,
              std::ostream& err) {
  return guarded(err, [&] {
    const SweepSpec spec = parse_sweep_spec(parameter_spec);
    const config::Json base = load_with_seed(opt);

    // Every variant is resolved and validated before anything runs.
    std::vector<Prepared> runs;
    for (const auto& v : spec.values) {
      config::Json doc = base;
      config::set_field(doc, spec.field, config::parse_value(v));
      doc["name"] = base.at("name").get<std::string>() + " [" + spec.field + "=" + v + "]";
      runs.push_back(prepare(doc));
    }
    const fs::path root =
        opt.out_dir.empty() ? fs::path("runs") / (safe_dir_name(base.at("name").get<std::string>()) + "_sweep")
                            : opt.out_dir;
    std::vector<fs::path> dirs;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%02zu_", k);
      dirs.push_back(root / (prefix + safe_dir_name(spec.values[k])));
    }

    std::vector<std::optional<sim::ScenarioReport>> reports(runs.size());
    std::vector<std::string> failures(runs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k; (k = next++) < runs.size();) {
        try {
          reports[k] = execute(runs[k], dirs[k]);
        } catch (const std::exception& e) {
          failures[k] = e.what();
        }
      }
    };
    const std::size_t n_threads =
        std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, runs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int status = kExitOk;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (!failures[k].empty()) {
        err << "sub-run " << spec.values[k] << " failed: " << failures[k] << "\n";
        status = kExitRuntime;
      }
    }
    if (status != kExitOk) return status;

    std::ofstream csv(root / "comparison.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + (root / "comparison.csv").string());
    csv << "value,run_dir,config_hash,preliminary_surplus_eur,strategic_surplus_eur,total_eur,"
           "final15_avg_price_eur_mwh,shortage_hours\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& rep = *reports[k];
      const double pre = rep.total("preliminary");
      const double strat = runs[k].scenario.strategic_days > 0 ? rep.total("strategic") : 0.0;
      csv << spec.values[k] << ',' << dirs[k].filename().string() << ','
          << config::config_hash(runs[k].resolved) << ',' << out::fmt6(pre) << ','
          << out::fmt6(strat) << ',' << out::fmt6(pre + strat) << ','
          << out::fmt6(rep.daily_average.empty() ? 0.0 : rep.final_average_price(15)) << ','
          << rep.shortage_count << '\n';
      if (!opt.quiet) print_summary(os, runs[k].scenario, rep, dirs[k]);
    }
    if (!csv) throw std::runtime_error("failed writing comparison.csv");
    if (!opt.quiet) os << "comparison: " << (root / "comparison.csv").string() << "\n";
    return kExitOk;
  });
}

int main(int argc, char** argv) {
  CLI::App app{"Agent-based electricity market simulator"};
  app.require_subcommand(1);

  RunOptions opt;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string sweep_spec;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config, "Scenario file or bundled preset name")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_flag("--quiet", opt.quiet, "Print nothing on success");
  };
  CLI::App* run = app.add_subcommand("run", "Run one scenario");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Run one scenario per value of a field");
  add_common(sweep);
  sweep->add_option("parameter", sweep_spec, "field=v1,v2,... (dotted field path)")->required();
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario and print it resolved");
  validate->add_option("config", opt.config, "Scenario file or bundled preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }
  if (!out_dir.empty()) opt.out_dir = out_dir;
  for (CLI::App* sub : {run, sweep}) {
    if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;
  }

  if (run->parsed()) return cmd_run(opt, std::cout, std::cerr);
  if (sweep->parsed()) return cmd_sweep(opt, sweep_spec, std::cout, std::cerr);
  return cmd_validate(opt.config, std::cout, std::cerr);
}

}  // namespace elmarket::cli
