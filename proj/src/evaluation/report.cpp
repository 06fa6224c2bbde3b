#include "expe/evaluation/report.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "expe/error.hpp"

namespace expe::eval {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string general(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string xml_escape(const std::string& s) {
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

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << kReportCsvHeader << '\n';
  for (const auto& r : report.rows) {
    os << csv_field(r.model) << ',' << csv_field(r.encoding) << ',' << general(r.scale) << ',' << r.multiple << ','
       << r.eval_len << ',' << (r.error ? "" : fixed(r.loss, 6)) << ',' << (r.error ? "" : fixed(r.std_error, 6))
       << ',' << r.tokens << ',' << r.seed << ',' << (r.diverged ? "true" : "false") << '\n';
  }
  return os.str();
}

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row = {{"model", r.model},       {"encoding", r.encoding}, {"scale", r.scale},
                {"multiple", r.multiple}, {"eval_len", r.eval_len}, {"loss_nats", r.loss},
                {"stderr", r.std_error},  {"tokens", r.tokens},     {"seed", r.seed},
                {"diverged", r.diverged}, {"error", r.error ? json(*r.error) : json(nullptr)}};
    if (r.error) {
      row["loss_nats"] = nullptr;
      row["stderr"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  return {{"schema_version", report.schema_version},
          {"train_seq_len", report.train_seq_len},
          {"metadata", report.metadata},
          {"rows", rows}};
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport report;
    report.schema_version = j.at("schema_version").get<int>();
    report.train_seq_len = j.at("train_seq_len").get<std::size_t>();
    if (j.contains("metadata")) report.metadata = j.at("metadata");
    for (const auto& row : j.at("rows")) {
      EvalRow r;
      r.model = row.at("model").get<std::string>();
      r.encoding = row.at("encoding").get<std::string>();
      r.scale = row.at("scale").get<double>();
      r.multiple = row.at("multiple").get<std::size_t>();
      r.eval_len = row.at("eval_len").get<std::size_t>();
      r.tokens = row.at("tokens").get<std::size_t>();
      r.seed = row.at("seed").get<std::uint64_t>();
      r.diverged = row.at("diverged").get<bool>();
      if (row.contains("error") && !row.at("error").is_null()) {
        r.error = row.at("error").get<std::string>();
      } else {
        r.loss = row.at("loss_nats").get<double>();
        r.std_error = row.at("stderr").get<double>();
      }
      report.rows.push_back(std::move(r));
    }
    return report;
  } catch (const json::exception& e) {
    throw ReportMergeError(std::string("malformed report: ") + e.what());
  }
}

EvalReport compare_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractError("compare_report: no reports given");
  EvalReport merged;
  merged.schema_version = reports.front().schema_version;
  merged.train_seq_len = reports.front().train_seq_len;
  json sources = json::array();
  for (const auto& r : reports) {
    if (r.schema_version != merged.schema_version) {
      throw ReportMergeError("cannot merge report schema versions " + std::to_string(merged.schema_version) +
                             " and " + std::to_string(r.schema_version));
    }
    if (r.train_seq_len != merged.train_seq_len) {
      throw ReportMergeError("cannot merge reports trained at lengths " + std::to_string(merged.train_seq_len) +
                             " and " + std::to_string(r.train_seq_len));
    }
    merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    sources.push_back(r.metadata);
  }
  std::stable_sort(merged.rows.begin(), merged.rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return std::tie(a.model, a.multiple, a.scale) < std::tie(b.model, b.multiple, b.scale);
  });
  merged.metadata = reports.size() == 1 ? reports.front().metadata : json{{"sources", sources}};
  return merged;
}

std::string report_svg(const EvalReport& report, const std::string& title) {
  constexpr double W = 720, H = 440, left = 70, right = 200, top = 40, bottom = 60;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : report.rows) {
    if (r.error) continue;
    series[r.model + " / " + r.encoding + " x" + general(r.scale)].emplace_back(std::log2(r.eval_len), r.loss);
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (const auto& [x, y] : pts) {
      if (first) {
        x0 = x1 = x;
        y0 = y1 = y;
        first = false;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  if (y1 - y0 < 1e-9) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * (H - top - bottom); };

  static constexpr std::array colors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n"
     << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  for (double x = std::ceil(x0); x <= x1 + 1e-9; x += 1) {
    os << "<text x=\"" << px(x) << "\" y=\"" << H - bottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << std::llround(std::exp2(x))
       << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = y0 + (y1 - y0) * i / 4;
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(y, 2) << "</text>\n";
  }
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 18
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">evaluation length (tokens)</text>\n"
     << "<text x=\"18\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 18 " << (top + H - bottom) / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">loss (nats)</text>\n";
  std::size_t k = 0;
  for (const auto& [name, pts] : series) {
    const auto* color = colors[k % colors.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    for (const auto& [x, y] : pts) {
      os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 16.0 * static_cast<double>(k);
    os << "<line x1=\"" << W - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << W - right + 34 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">"
       << xml_escape(name) << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

ReportPaths write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem,
                         bool with_svg) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
  };
  ReportPaths paths{dir / (stem + ".csv"), dir / (stem + ".json"), std::nullopt};
  write(paths.csv, report_csv(report));
  write(paths.json, report_to_json(report).dump(2) + "\n");
  if (with_svg) {
    paths.svg = dir / (stem + ".svg");
    write(*paths.svg, report_svg(report));
  }
  return paths;
}

json report_metadata(const json& config) {
  std::string describe = "unknown";
  if (FILE* p = popen("git describe --always --dirty 2>/dev/null", "r")) {
    std::array<char, 256> buf{};
    std::string out;
    while (fgets(buf.data(), buf.size(), p)) out += buf.data();
    if (pclose(p) == 0 && !out.empty()) describe = out.substr(0, out.find_last_not_of("\n\r") + 1);
  }
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config.dump()) h = (h ^ c) * 1099511628211ull;
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << h;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return {{"git_describe", describe}, {"config_hash", hash.str()}, {"timestamp", ts.str()}};
}

}  // namespace expe::eval
