#include "sasow/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sasow/detail/csv.hpp"
#include "sasow/detail/files.hpp"

namespace sasow {

using nlohmann::ordered_json;

namespace {

ordered_json encode_bias(double b) {
  if (b == std::numeric_limits<double>::infinity()) return "inf";
  if (b == -std::numeric_limits<double>::infinity()) return "-inf";
  return b;
}

double decode_bias(const ordered_json& j) {
  if (j.is_string()) {
    if (j == "inf") return std::numeric_limits<double>::infinity();
    if (j == "-inf") return -std::numeric_limits<double>::infinity();
    throw InputError("report: bad bias value " + j.dump());
  }
  return j.get<double>();
}

ordered_json encode(const EvalReport& r) {
  ordered_json j;
  j["variant"] = to_string(r.variant);
  j["best_seen"] = r.best_seen;
  j["best_unseen"] = r.best_unseen;
  j["best_hm"] = r.best_hm;
  j["auc"] = r.auc;
  j["state_acc"] = r.state_acc;
  j["object_acc"] = r.object_acc;
  j["alpha"] = r.alpha;
  j["seen_samples"] = r.seen_samples;
  j["unseen_samples"] = r.unseen_samples;
  ordered_json curve = ordered_json::array();
  for (const auto& p : r.curve) {
    ordered_json point;
    point["bias"] = encode_bias(p.bias);
    point["seen_acc"] = p.seen_acc;
    point["unseen_acc"] = p.unseen_acc;
    curve.push_back(std::move(point));
  }
  j["curve"] = std::move(curve);
  return j;
}

EvalReport decode(const ordered_json& j) {
  EvalReport r;
  r.variant = parse_variant(j.at("variant").get<std::string>());
  r.best_seen = j.at("best_seen").get<double>();
  r.best_unseen = j.at("best_unseen").get<double>();
  r.best_hm = j.at("best_hm").get<double>();
  r.auc = j.at("auc").get<double>();
  r.state_acc = j.at("state_acc").get<double>();
  r.object_acc = j.at("object_acc").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.seen_samples = j.at("seen_samples").get<std::size_t>();
  r.unseen_samples = j.at("unseen_samples").get<std::size_t>();
  for (const auto& p : j.at("curve")) {
    r.curve.push_back({decode_bias(p.at("bias")), p.at("seen_acc").get<double>(), p.at("unseen_acc").get<double>()});
  }
  return r;
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ordered_json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
}

}  // namespace

std::string report_to_json(const EvalReport& report) { return encode(report).dump(2) + "\n"; }

EvalReport report_from_json(const std::string& text) {
  return guarded([&] { return decode(ordered_json::parse(text)); });
}

std::string reports_to_json(const std::vector<EvalReport>& reports) {
  ordered_json j;
  ordered_json table = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json row;
    row["method"] = to_string(r.variant);
    row["S"] = r.best_seen;
    row["U"] = r.best_unseen;
    row["HM"] = r.best_hm;
    row["AUC"] = r.auc;
    row["Sta."] = r.state_acc;
    row["Obj."] = r.object_acc;
    table.push_back(std::move(row));
  }
  j["table"] = std::move(table);
  ordered_json all = ordered_json::array();
  for (const auto& r : reports) all.push_back(encode(r));
  j["reports"] = std::move(all);
  return j.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json(const std::string& text) {
  return guarded([&] {
    std::vector<EvalReport> out;
    const ordered_json j = ordered_json::parse(text);
    for (const auto& r : j.at("reports")) out.push_back(decode(r));
    return out;
  });
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  detail::write_file(path, report_to_json(report));
}

EvalReport load_report(const std::filesystem::path& path) { return report_from_json(detail::read_file(path)); }

std::string curve_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "bias,seen_acc,unseen_acc\n";
  for (const auto& p : report.curve) {
    out << (std::isinf(p.bias) ? (p.bias > 0 ? "inf" : "-inf") : detail::format_double(p.bias)) << ','
        << detail::format_double(p.seen_acc) << ',' << detail::format_double(p.unseen_acc) << '\n';
  }
  return out.str();
}

std::string format_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %7s %7s %7s %7s %7s %7s\n", "Method", "S", "U", "HM", "AUC", "Sta.", "Obj.");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-8s %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f\n", to_string(r.variant).c_str(),
                  100 * r.best_seen, 100 * r.best_unseen, 100 * r.best_hm, 100 * r.auc, 100 * r.state_acc,
                  100 * r.object_acc);
    out << line;
  }
  return out.str();
}

}  // namespace sasow
