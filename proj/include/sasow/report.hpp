#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sasow/evaluation.hpp"

namespace sasow {

// JSON with a fixed key order. Infinite biases are written as "-inf"/"inf".
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// A list of reports plus a comparison table (S, U, HM, AUC, Sta., Obj.).
std::string reports_to_json(const std::vector<EvalReport>& reports);
std::vector<EvalReport> reports_from_json(const std::string& text);

void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// bias,seen_acc,unseen_acc per line.
std::string curve_to_csv(const EvalReport& report);

// Fixed-width text table for terminals, values in percent.
std::string format_table(const std::vector<EvalReport>& reports);

}  // namespace sasow
