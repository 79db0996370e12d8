#pragma once

// File artifacts of a run: CSV time series, a plain-text surplus table,
// static SVG line charts and a run manifest.

#include <filesystem>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "elmarket/simulation.hpp"

namespace elmarket::out {

/// Fixed-point with six decimals; negative zero prints as zero.
std::string fmt6(double v);

void write_hourly_csv(std::ostream& os, const sim::ScenarioConfig& cfg,
                      const forecast::MarketHistory& h);
void write_daily_csv(std::ostream& os, const sim::ScenarioReport& rep);
void write_surplus_summary_csv(std::ostream& os, const sim::ScenarioReport& rep);
void write_report(std::ostream& os, const sim::ScenarioConfig& cfg, const sim::ScenarioReport& rep);

/// Reads an hourly.csv back into a history. The file does not carry
/// offered quantities, so each imported bid's quantity is its dispatched
/// energy; producers dispatched at a bid equal to the clearing price are
/// marked marginal.
forecast::MarketHistory read_hourly_csv(std::istream& is);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static line chart with axes, ticks and an optional dashed reference line.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series,
                           std::optional<double> reference_y = std::nullopt);

struct RunManifest {
  std::string scenario_name;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  std::string started_at;   // UTC, ISO 8601
  std::string finished_at;
};

std::string manifest_json(const RunManifest& m);

/// Current UTC time as ISO 8601.
std::string utc_now();

/// Writes every artifact of a finished run into `dir` (created if needed).
/// Throws std::runtime_error when a file cannot be written.
void write_run(const std::filesystem::path& dir, const sim::ScenarioConfig& cfg,
               const sim::ScenarioResult& result, const std::string& resolved_config_json,
               const RunManifest& manifest);

}  // namespace elmarket::out
