#include "redlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace redlab {

using nlohmann::json;

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("report.csv: bad number '" + s + "'");
  return v;
}

template <class T>
T parse_integer(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("report.csv: bad integer '" + s + "'");
  return v;
}

Verdict verdict_from(const std::string& s) {
  for (Verdict v : {Verdict::holds, Verdict::violated, Verdict::not_applicable, Verdict::exceeded}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("report.csv: unknown verdict '" + s + "'");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

const std::string& csv_header() {
  static const std::string header =
      "scenario,model_id,m,replicate,seed,measured_risk,bound_value,eps_opt,verdict,se,wall_time_ms";
  return header;
}

std::string rows_to_csv(const std::vector<ReportRow>& rows, bool timing) {
  std::ostringstream os;
  os << csv_header() << '\n';
  for (const auto& r : rows) {
    os << quote(r.scenario) << ',' << quote(r.model_id) << ',' << r.m << ',' << r.replicate << ',' << r.seed << ','
       << format_double(r.measured_risk) << ',' << (r.bound_value ? format_double(*r.bound_value) : "unbounded")
       << ',' << format_double(r.eps_opt) << ',' << to_string(r.verdict) << ',' << format_double(r.se) << ','
       << (timing ? format_double(r.wall_time_ms) : "0") << '\n';
  }
  return os.str();
}

std::vector<ReportRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw ConfigError("report.csv: header mismatch");
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) {
      throw ConfigError("report.csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                        " fields, expected 11");
    }
    ReportRow r;
    r.scenario = f[0];
    r.model_id = f[1];
    r.m = parse_integer<std::size_t>(f[2]);
    r.replicate = parse_integer<long>(f[3]);
    r.seed = parse_integer<std::uint64_t>(f[4]);
    r.measured_risk = parse_double(f[5]);
    if (f[6] != "unbounded") r.bound_value = parse_double(f[6]);
    r.eps_opt = parse_double(f[7]);
    r.verdict = verdict_from(f[8]);
    r.se = parse_double(f[9]);
    r.wall_time_ms = parse_double(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

json rows_to_json(const std::vector<ReportRow>& rows, bool timing) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"scenario", r.scenario},
                   {"model_id", r.model_id},
                   {"m", r.m},
                   {"replicate", r.replicate},
                   {"seed", r.seed},
                   {"measured_risk", number_or_null(r.measured_risk)},
                   {"bound_value", r.bound_value ? json(*r.bound_value) : json("unbounded")},
                   {"eps_opt", number_or_null(r.eps_opt)},
                   {"verdict", to_string(r.verdict)},
                   {"se", number_or_null(r.se)},
                   {"wall_time_ms", timing ? r.wall_time_ms : 0.0}});
  }
  return out;
}

bool scenario_has_plot(const std::string& scenario) {
  return scenario == "landmark-sweep" || scenario == "direct-sweep" || scenario == "transfer";
}

std::string summary_text(const RunResult& run, bool timing) {
  std::ostringstream os;
  const std::string scenario = to_string(run.config.scenario);
  os << "scenario: " << scenario << '\n';
  os << "config: " << config_to_json(run.config).dump() << '\n';

  std::map<std::string, std::size_t> counts;
  for (const auto& r : run.rows) ++counts[to_string(r.verdict)];
  os << "rows: " << run.rows.size();
  for (const auto& [verdict, n] : counts) os << "  " << verdict << "=" << n;
  os << '\n';

  if (scenario_has_plot(scenario)) {
    std::map<std::string, std::vector<ReportRow>> by_model;
    for (const auto& r : run.rows) by_model[r.model_id].push_back(r);
    for (const auto& [model, rows] : by_model) {
      std::set<std::size_t> ms;
      for (const auto& r : rows)
        if (r.replicate >= 0 && r.m > 0) ms.insert(r.m);
      if (ms.size() < 3) continue;
      try {
        const SlopeFit fit = fit_slope(rows);
        const bool inside = fit.slope >= -1.25 && fit.slope <= -0.75;
        os << "slope " << model << ": " << fixed(fit.slope, 4) << " (r2 " << fixed(fit.r2, 4) << ", " << fit.points
           << " points) " << (inside ? "inside" : "outside") << " [-1.25, -0.75]\n";
        for (const auto& n : fit.notes) os << "  note: " << n << '\n';
      } catch (const NumericalError& e) {
        os << "slope " << model << ": not fitted (" << e.what() << ")\n";
      }
    }
  }

  for (const auto& r : run.rows) {
    if (r.replicate != -1) continue;
    os << "aggregate " << r.model_id << " m=" << r.m << ": " << to_string(r.verdict) << " (measured "
       << format_double(r.measured_risk) << ", bound "
       << (r.bound_value ? format_double(*r.bound_value) : std::string("unbounded")) << ")\n";
  }
  for (const auto& r : run.rows) {
    if (r.verdict == Verdict::violated) {
      os << "violated: " << r.model_id << " m=" << r.m << " replicate " << r.replicate << " measured "
         << format_double(r.measured_risk) << " bound "
         << (r.bound_value ? format_double(*r.bound_value) : std::string("unbounded")) << '\n';
    }
  }
  for (const auto& n : run.notes) os << "note: " << n << '\n';
  if (timing) os << "wall time: " << fixed(run.total_ms, 1) << " ms\n";
  return os.str();
}

std::string render_svg(const std::vector<ReportRow>& rows, const std::string& scenario) {
  struct Series {
    std::map<std::size_t, std::vector<double>> risk;
    std::map<std::size_t, double> bound;
  };
  std::map<std::string, Series> series;
  for (const auto& r : rows) {
    if (r.scenario != scenario || r.m == 0) continue;
    if (r.replicate >= 0 && r.measured_risk > 0.0 && std::isfinite(r.measured_risk)) {
      series[r.model_id].risk[r.m].push_back(r.measured_risk);
    }
    if (r.replicate == -1 && r.bound_value && *r.bound_value > 0.0) series[r.model_id].bound[r.m] = *r.bound_value;
  }

  double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = HUGE_VAL, ymax = -HUGE_VAL;
  auto extend = [&](double x, double y) {
    xmin = std::min(xmin, std::log10(x));
    xmax = std::max(xmax, std::log10(x));
    ymin = std::min(ymin, std::log10(y));
    ymax = std::max(ymax, std::log10(y));
  };
  for (const auto& [id, s] : series) {
    for (const auto& [m, v] : s.risk) extend(static_cast<double>(m), median_of(v));
    for (const auto& [m, b] : s.bound) extend(static_cast<double>(m), b);
  }

  const double W = 720, H = 480, L = 80, R = 200, T = 40, B = 60;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << scenario << ": median risk vs m</text>\n";
  if (xmin > xmax) {
    os << "<text x=\"" << L << "\" y=\"" << H / 2 << "\">no positive risks to plot</text>\n</svg>\n";
    return os.str();
  }
  xmin = std::floor(xmin);
  xmax = std::ceil(xmax);
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (xmax == xmin) xmax += 1;
  if (ymax == ymin) ymax += 1;
  auto px = [&](double m) { return L + (std::log10(m) - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double v) { return H - B - (std::log10(v) - ymin) / (ymax - ymin) * (H - T - B); };

  os << "<g stroke=\"#ccc\">\n";
  for (double e = xmin; e <= xmax; e += 1) {
    const double x = L + (e - xmin) / (xmax - xmin) * (W - L - R);
    os << "<line x1=\"" << fixed(x) << "\" y1=\"" << T << "\" x2=\"" << fixed(x) << "\" y2=\"" << H - B << "\"/>\n";
  }
  for (double e = ymin; e <= ymax; e += 1) {
    const double y = H - B - (e - ymin) / (ymax - ymin) * (H - T - B);
    os << "<line x1=\"" << L << "\" y1=\"" << fixed(y) << "\" x2=\"" << W - R << "\" y2=\"" << fixed(y) << "\"/>\n";
  }
  os << "</g>\n";
  for (double e = xmin; e <= xmax; e += 1) {
    const double x = L + (e - xmin) / (xmax - xmin) * (W - L - R);
    os << "<text x=\"" << fixed(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  }
  for (double e = ymin; e <= ymax; e += 1) {
    const double y = H - B - (e - ymin) / (ymax - ymin) * (H - T - B);
    os << "<text x=\"" << L - 8 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">m</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::size_t k = 0;
  for (const auto& [id, s] : series) {
    const char* color = palette[k % 6];
    std::ostringstream risk_pts, bound_pts;
    for (const auto& [m, v] : s.risk) {
      const double x = px(static_cast<double>(m)), y = py(median_of(v));
      risk_pts << fixed(x) << ',' << fixed(y) << ' ';
      os << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    for (const auto& [m, b] : s.bound) bound_pts << fixed(px(static_cast<double>(m))) << ',' << fixed(py(b)) << ' ';
    if (!s.risk.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << risk_pts.str()
         << "\"/>\n";
    }
    if (!s.bound.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\" points=\""
         << bound_pts.str() << "\"/>\n";
    }
    const double ly = T + 16 + 36 * static_cast<double>(k);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 36 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << W - R + 42 << "\" y=\"" << ly + 4 << "\">" << id << "</text>\n";
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly + 16 << "\" x2=\"" << W - R + 36 << "\" y2=\"" << ly + 16
       << "\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << W - R + 42 << "\" y=\"" << ly + 20 << "\">bound</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> write_outputs(const RunResult& run, const std::string& dir, bool timing) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir: cannot create '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("output_dir: cannot write '" + path + "'");
    out << content;
    written.push_back(path);
  };
  const std::string csv = rows_to_csv(run.rows, timing);
  put("report.csv", csv);
  put("summary.txt", summary_text(run, timing));
  const std::string scenario = to_string(run.config.scenario);
  if (scenario_has_plot(scenario)) put("plot_" + scenario + ".svg", render_svg(rows_from_csv(csv), scenario));
  return written;
}

}  // namespace redlab
