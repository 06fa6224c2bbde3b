#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expe/evaluation/eval.hpp"

namespace expe::eval {

inline constexpr const char* kReportCsvHeader = "model,encoding,scale,multiple,eval_len,loss_nats,stderr,tokens,seed,diverged";

// Header plus one line per row. Rows with an error leave loss_nats and
// stderr empty.
std::string report_csv(const EvalReport& report);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Loss against evaluation length (log2 axis), one line per
// (model, encoding, scale). Error rows are skipped.
std::string report_svg(const EvalReport& report, const std::string& title = "loss vs evaluation length");

// Concatenates the rows of every report and sorts them by (model, multiple,
// scale). Throws ReportMergeError when schema versions or training lengths
// disagree.
EvalReport compare_report(const std::vector<EvalReport>& reports);

struct ReportPaths {
  std::filesystem::path csv;
  std::filesystem::path json;
  std::optional<std::filesystem::path> svg;
};

ReportPaths write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem,
                         bool with_svg = true);

// git describe of the working directory (or "unknown"), a hash of the config
// text, and a UTC timestamp.
nlohmann::json report_metadata(const nlohmann::json& config);

}  // namespace expe::eval
