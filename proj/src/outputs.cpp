#include "elmarket/outputs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace elmarket::out {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("hourly.csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Round-number tick spacing giving roughly `target` ticks over [lo, hi].
double nice_step(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  if (!(raw > 0.0)) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
  if (!os) throw std::runtime_error("failed writing " + p.string());
}

template <class F>
std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

}  // namespace

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

void write_hourly_csv(std::ostream& os, const sim::ScenarioConfig& cfg,
                      const forecast::MarketHistory& h) {
  os << "day,hour,day_type,load_mwh,mcp_eur_mwh,shortage";
  for (const auto& p : cfg.producers) {
    os << ',' << p.id << "_bid_price," << p.id << "_dispatched_mwh," << p.id << "_surplus_eur";
  }
  os << '\n';
  for (const auto& r : h.records()) {
    os << r.day << ',' << r.hour << ','
       << (r.day_type == DayType::Weekday ? "weekday" : "weekend") << ',' << fmt6(r.load) << ','
       << fmt6(r.result.mcp) << ',' << (r.result.shortage ? 1 : 0);
    for (const auto& p : cfg.producers) {
      const auto* b = r.bid_of(p.id);
      os << ',' << fmt6(b ? b->bid.price : 0.0) << ',' << fmt6(r.result.dispatched(p.id)) << ','
         << fmt6(r.surplus_of(p.id));
    }
    os << '\n';
  }
}

void write_daily_csv(std::ostream& os, const sim::ScenarioReport& rep) {
  os << "day,avg_price_eur_mwh\n";
  for (const auto& [day, avg] : rep.daily_average) os << day << ',' << fmt6(avg) << '\n';
}

void write_surplus_summary_csv(std::ostream& os, const sim::ScenarioReport& rep) {
  const auto& pre = rep.surplus("preliminary");
  const bool has_strategic = rep.surplus_by_range.size() > 1 &&
                             rep.surplus_by_range[1].first.name == "strategic";
  os << "producer_id,preliminary_surplus_eur,strategic_surplus_eur,total_eur\n";
  for (const auto& id : rep.producer_ids) {
    const double a = pre.at(id);
    const double b = has_strategic ? rep.surplus("strategic").at(id) : 0.0;
    os << id << ',' << fmt6(a) << ',' << fmt6(b) << ',' << fmt6(a + b) << '\n';
  }
}

void write_report(std::ostream& os, const sim::ScenarioConfig& cfg,
                  const sim::ScenarioReport& rep) {
  char line[256];
  os << "Scenario: " << cfg.name << "\n";
  os << "Days: " << cfg.preliminary_days << " preliminary + " << cfg.strategic_days
     << " strategic, price cap " << num(cfg.price_cap) << " EUR/MWh, seed " << cfg.master_seed
     << "\n";
  os << "Fleet: " << cfg.producers.size() << " producers, " << num(cfg.total_capacity(), 1)
     << " MWh, HHI " << num(rep.hhi, 1) << "\n\n";

  std::vector<const sim::DayRange*> ranges;
  for (const auto& [range, totals] : rep.surplus_by_range) ranges.push_back(&range);

  std::snprintf(line, sizeof line, "%-10s %9s %-17s", "producer", "capacity", "strategy");
  os << line;
  for (const auto* r : ranges) {
    std::snprintf(line, sizeof line, " %14s", (r->name + " MEUR").c_str());
    os << line;
  }
  os << '\n';
  auto row = [&](const std::string& id, const std::string& cap, const std::string& kind,
                 auto&& value_of) {
    std::snprintf(line, sizeof line, "%-10s %9s %-17s", id.c_str(), cap.c_str(), kind.c_str());
    os << line;
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      std::snprintf(line, sizeof line, " %12s", num(value_of(k) / 1e6, 3).c_str());
      os << line;
    }
    os << '\n';
  };
  for (const auto& p : cfg.producers) {
    row(p.id, num(p.capacity, 1), std::string(strategy::kind_name(p.strategy)),
        [&](std::size_t k) { return rep.surplus_by_range[k].second.at(p.id); });
  }
  row("total", num(cfg.total_capacity(), 1), "",
      [&](std::size_t k) { return rep.total(rep.surplus_by_range[k].first.name); });

  os << "\nShortage hours: " << rep.shortage_count << "\n";
  if (!rep.daily_average.empty()) {
    const int n = std::min<int>(15, static_cast<int>(rep.daily_average.size()));
    os << "Average price, last " << n << " days: " << num(rep.final_average_price(n), 3)
       << " EUR/MWh\n";
  }
  if (rep.unconverged_trainings > 0) {
    os << "Model trainings accepted without reaching the KKT tolerance: "
       << rep.unconverged_trainings << "\n";
  }
}

forecast::MarketHistory read_hourly_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("hourly.csv is empty");
  const auto header = split_csv(line);
  static const std::vector<std::string> fixed{"day", "hour", "day_type", "load_mwh",
                                              "mcp_eur_mwh", "shortage"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()) ||
      (header.size() - fixed.size()) % 3 != 0)
    throw std::runtime_error("hourly.csv: unexpected header");
  std::vector<ProducerId> ids;
  const std::string suffix = "_bid_price";
  for (std::size_t c = fixed.size(); c < header.size(); c += 3) {
    const std::string& col = header[c];
    if (col.size() <= suffix.size() || col.compare(col.size() - suffix.size(), suffix.size(), suffix) != 0)
      throw std::runtime_error("hourly.csv: unexpected column " + col);
    ids.push_back(col.substr(0, col.size() - suffix.size()));
  }

  forecast::MarketHistory h;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw std::runtime_error("hourly.csv line " + std::to_string(line_no) + ": wrong column count");
    forecast::HourRecord r;
    r.day = static_cast<int>(to_double(cells[0], line_no));
    r.hour = static_cast<int>(to_double(cells[1], line_no));
    if (cells[2] == "weekday") r.day_type = DayType::Weekday;
    else if (cells[2] == "weekend") r.day_type = DayType::Weekend;
    else throw std::runtime_error("hourly.csv line " + std::to_string(line_no) + ": bad day_type");
    r.load = to_double(cells[3], line_no);
    r.result.mcp = to_double(cells[4], line_no);
    r.result.shortage = cells[5] == "1";
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double price = to_double(cells[6 + 3 * k], line_no);
      const double q = to_double(cells[7 + 3 * k], line_no);
      const double s = to_double(cells[8 + 3 * k], line_no);
      r.bids.push_back({{ids[k], price, q}, BidRationale::random});
      if (q > 0.0) {
        r.result.dispatch[ids[k]] = q;
        if (price == r.result.mcp) r.result.marginal_producer_ids.insert(ids[k]);
      }
      r.surplus[ids[k]] = s;
    }
    h.append(std::move(r));
  }
  return h;
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series,
                           std::optional<double> reference_y) {
  constexpr double W = 900, H = 420, L = 70, R = 20, T = 40, B = 55;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (reference_y) {
    y0 = std::min(y0, *reference_y);
    y1 = std::max(y1, *reference_y);
  }
  y0 = std::min(y0, 0.0);
  if (x1 <= x0) x1 = x0 + 1;
  const double ystep = nice_step(y0, y1 > y0 ? y1 : y0 + 1, 6);
  y0 = std::floor(y0 / ystep) * ystep;
  y1 = std::ceil((y1 > y0 ? y1 : y0 + 1) / ystep) * ystep;
  if (y1 <= y0) y1 = y0 + ystep;

  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape_xml(title) << "</text>\n";
  for (double y = y0; y <= y1 + 1e-9 * ystep; y += ystep) {
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << num(py(y)) << "\" y2=\""
       << num(py(y)) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">"
       << num(y, ystep < 1 ? 2 : 0) << "</text>\n";
  }
  const double xstep = nice_step(x0, x1, 10);
  for (double x = std::ceil(x0 / xstep) * xstep; x <= x1 + 1e-9 * xstep; x += xstep) {
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << num(x, xstep < 1 ? 2 : 0) << "</text>\n";
  }
  os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << H - B << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" x2=\"" << L << "\" y1=\"" << T << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape_xml(x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";
  if (reference_y) {
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << num(py(*reference_y))
       << "\" y2=\"" << num(py(*reference_y)) << "\" stroke=\"#555\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (i) os << ' ';
      os << num(px(s.x[i])) << ',' << num(py(s.y[i]));
    }
    os << "\"/>\n";
    if (!s.label.empty()) {
      const double ly = T + 14 + 16 * static_cast<double>(k);
      os << "<line x1=\"" << W - R - 150 << "\" x2=\"" << W - R - 130 << "\" y1=\"" << ly - 4
         << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << W - R - 124 << "\" y=\"" << ly << "\">" << escape_xml(s.label)
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["scenario"] = m.scenario_name;
  j["config_hash"] = m.config_hash;
  j["master_seed"] = m.master_seed;
  j["output_dir"] = m.output_dir;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["resolved_config"] = "config.resolved.json";
  return j.dump(2) + "\n";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run(const std::filesystem::path& dir, const sim::ScenarioConfig& cfg,
               const sim::ScenarioResult& result, const std::string& resolved_config_json,
               const RunManifest& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
  const auto& rep = result.report;

  write_file(dir / "hourly.csv",
             render([&](std::ostream& os) { write_hourly_csv(os, cfg, result.history); }));
  write_file(dir / "daily.csv", render([&](std::ostream& os) { write_daily_csv(os, rep); }));
  write_file(dir / "surplus_summary.csv",
             render([&](std::ostream& os) { write_surplus_summary_csv(os, rep); }));
  write_file(dir / "report.txt", render([&](std::ostream& os) { write_report(os, cfg, rep); }));

  Series hourly{"clearing price", {}, {}};
  for (std::size_t i = 0; i < rep.hourly_prices.size(); ++i) {
    hourly.x.push_back(1.0 + static_cast<double>(i) / kHoursPerDay);
    hourly.y.push_back(rep.hourly_prices[i]);
  }
  const double mc = cfg.producers.front().marginal_cost;
  write_file(dir / "price_evolution.svg",
             svg_line_chart(cfg.name + ": hourly clearing price", "day", "EUR/MWh", {hourly}, mc));
  Series daily{"daily average", {}, {}};
  for (const auto& [day, avg] : rep.daily_average) {
    daily.x.push_back(day);
    daily.y.push_back(avg);
  }
  write_file(dir / "daily_average.svg",
             svg_line_chart(cfg.name + ": daily average price", "day", "EUR/MWh", {daily}, mc));
  write_file(dir / "config.resolved.json", resolved_config_json);
  write_file(dir / "manifest.json", manifest_json(manifest));
}

}  // namespace elmarket::out
