#include "dynembed/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dynembed/errors.hpp"

namespace dynembed::plot {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 180, kTop = 50, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string escape(const std::string& s) {
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

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

double plot_w() { return kWidth - kLeft - kRight; }
double plot_h() { return kHeight - kTop - kBottom; }
double y_of(double v) { return kTop + plot_h() * (1.0 - std::clamp(v, 0.0, 1.0)); }

void header(std::ostringstream& o, const std::string& title, const std::string& y_label) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
    << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0, y = y_of(v);
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + plot_w()) << "\" y2=\""
      << num(y) << "\" stroke=\"#dddddd\"/>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << num(v)
      << "</text>\n";
  }
  o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
    << num(kTop + plot_h()) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + plot_h()) << "\" x2=\"" << num(kLeft + plot_w())
    << "\" y2=\"" << num(kTop + plot_h()) << "\" stroke=\"black\"/>\n";
  o << "<text x=\"18\" y=\"" << num(kTop + plot_h() / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << num(kTop + plot_h() / 2) << ")\">" << escape(y_label) << "</text>\n";
}

void legend(std::ostringstream& o, const std::vector<std::string>& keys) {
  const double x = kLeft + plot_w() + 20;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(i);
    o << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 10) << "\" width=\"12\" height=\"12\" fill=\"" << color(i)
      << "\"/>\n";
    o << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y) << "\">" << escape(keys[i]) << "</text>\n";
  }
}

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ParseError(1, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (csv.columns.empty()) {
      csv.columns = std::move(fields);
    } else if (fields.size() != csv.columns.size()) {
      throw ParseError(line_no, "expected " + std::to_string(csv.columns.size()) + " fields");
    } else {
      csv.rows.push_back(std::move(fields));
    }
  }
  if (csv.columns.empty()) throw ParseError(1, "empty CSV");
  return csv;
}

double parse_number(const std::string& s) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ArgumentError("not a number: '" + s + "'");
  return x;
}

}  // namespace

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& groups) {
  std::vector<std::string> keys;
  for (const auto& g : groups) {
    for (const auto& [key, _] : g.bars) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
  }
  if (groups.empty() || keys.empty()) throw ArgumentError("bar chart needs at least one bar");

  std::ostringstream o;
  header(o, title, y_label);
  const double group_w = plot_w() / static_cast<double>(groups.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(keys.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double x0 = kLeft + group_w * static_cast<double>(gi) + group_w * 0.1;
    for (const auto& [key, value] : groups[gi].bars) {
      const auto ki = static_cast<std::size_t>(std::find(keys.begin(), keys.end(), key) - keys.begin());
      const double x = x0 + bar_w * static_cast<double>(ki), y = y_of(value);
      o << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w) << "\" height=\""
        << num(kTop + plot_h() - y) << "\" fill=\"" << color(ki) << "\"><title>" << escape(groups[gi].label) << ' '
        << escape(key) << ": " << num(value) << "</title></rect>\n";
    }
    o << "<text x=\"" << num(x0 + group_w * 0.4) << "\" y=\"" << num(kTop + plot_h() + 18)
      << "\" text-anchor=\"middle\">" << escape(groups[gi].label) << "</text>\n";
  }
  legend(o, keys);
  o << "</svg>\n";
  return o.str();
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& [x, _] : s.points) {
      lo = any ? std::min(lo, x) : x;
      hi = any ? std::max(hi, x) : x;
      any = true;
    }
  }
  if (!any) throw ArgumentError("line chart needs at least one point");
  if (hi == lo) {
    lo -= 1;
    hi += 1;
  }
  auto x_of = [&](double x) { return kLeft + plot_w() * (x - lo) / (hi - lo); };

  std::ostringstream o;
  header(o, title, y_label);
  std::vector<double> ticks;
  for (const auto& s : series) {
    for (const auto& p : s.points) ticks.push_back(p.first);
  }
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (double t : ticks) {
    char label[32];
    std::snprintf(label, sizeof label, "%g", t);
    o << "<text x=\"" << num(x_of(t)) << "\" y=\"" << num(kTop + plot_h() + 18) << "\" text-anchor=\"middle\">"
      << label << "</text>\n";
  }
  o << "<text x=\"" << num(kLeft + plot_w() / 2) << "\" y=\"" << num(kHeight - 16) << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < series.size(); ++i) {
    keys.push_back(series[i].label);
    auto points = series[i].points;
    std::sort(points.begin(), points.end());
    o << "<polyline fill=\"none\" stroke=\"" << color(i) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < points.size(); ++j) {
      o << (j ? " " : "") << num(x_of(points[j].first)) << ',' << num(y_of(points[j].second));
    }
    o << "\"/>\n";
    for (const auto& [x, y] : points) {
      o << "<circle cx=\"" << num(x_of(x)) << "\" cy=\"" << num(y_of(y)) << "\" r=\"3\" fill=\"" << color(i)
        << "\"/>\n";
    }
  }
  legend(o, keys);
  o << "</svg>\n";
  return o.str();
}

std::string report_chart(const std::vector<std::string>& report_csvs) {
  // method -> embed size -> (target -> map)
  std::map<std::string, std::map<int, std::map<int, double>>> maps;
  std::vector<std::string> order;
  for (const auto& text : report_csvs) {
    const Csv csv = parse_csv(text);
    const auto cm = csv.column("method"), cd = csv.column("embed_dim"), ct = csv.column("target"),
               cv = csv.column("map");
    for (const auto& row : csv.rows) {
      if (!maps.count(row[cm])) order.push_back(row[cm]);
      maps[row[cm]][static_cast<int>(parse_number(row[cd]))][static_cast<int>(parse_number(row[ct]))] =
          parse_number(row[cv]);
    }
  }
  std::vector<BarGroup> groups;
  for (const auto& method : order) {
    BarGroup g{method, {}};
    for (const auto& [d, per_target] : maps[method]) {
      double total = 0;
      for (const auto& [_, m] : per_target) total += m;
      g.bars.emplace_back("d=" + std::to_string(d), total / static_cast<double>(per_target.size()));
    }
    groups.push_back(std::move(g));
  }
  return bar_chart("Mean MAP by method and embedding size", "mean MAP", groups);
}

std::string sweep_chart(const std::vector<std::string>& sweep_csvs) {
  std::vector<Series> series;
  std::string axis;
  for (const auto& text : sweep_csvs) {
    const Csv csv = parse_csv(text);
    const auto cm = csv.column("method"), ca = csv.column("axis"), cv = csv.column("value"),
               ct = csv.column("target"), cmap = csv.column("map");
    for (const auto& row : csv.rows) {
      if (row[ct] != "mean") continue;
      axis = row[ca];
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.label == row[cm]; });
      if (it == series.end()) {
        series.push_back({row[cm], {}});
        it = std::prev(series.end());
      }
      it->points.emplace_back(parse_number(row[cv]), parse_number(row[cmap]));
    }
  }
  if (series.empty()) throw ArgumentError("sweep is empty");
  const std::string x_label = axis == "history" ? "training steps" : axis;
  return line_chart("Mean MAP against " + x_label, x_label, "mean MAP", series);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("cannot write " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace dynembed::plot
