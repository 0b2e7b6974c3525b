#include "vtpmd/report.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace vtpmd {

using ordered_json = nlohmann::ordered_json;

std::string compression_report_json(const CompressionReport& report) {
  ordered_json j;
  j["model_name"] = report.model_name;
  j["rate"] = report.rate;
  j["method"] = report.method;
  j["policy"] = report.policy;
  j["layers"] = ordered_json::array();
  for (const LayerReport& layer : report.layers) {
    ordered_json row;
    row["name"] = layer.name;
    row["shape_before"] = layer.shape_before;
    row["shape_after"] = layer.shape_after;
    row["rank"] = layer.rank;
    row["params_before"] = layer.params_before;
    row["params_after"] = layer.params_after;
    row["flops_before"] = layer.flops_before;
    row["flops_after"] = layer.flops_after;
    row["rel_err"] = layer.rel_err;
    j["layers"].push_back(std::move(row));
  }
  j["totals"] = {{"params_before", report.totals.params_before},
                 {"params_after", report.totals.params_after},
                 {"flops_before", report.totals.flops_before},
                 {"flops_after", report.totals.flops_after}};
  j["tool_version"] = report.tool_version;
  return j.dump(2) + "\n";
}

namespace {

ordered_json method_result_json(const LstsqMethodResult& res) {
  ordered_json j;
  if (!res.ok) {
    j["error"] = res.error;
    return j;
  }
  j["solution"] = res.solution.data();
  j["residual_norm"] = res.residual_norm;
  if (std::isnan(res.solution_error)) {
    j["solution_error"] = nullptr;
  } else if (std::isinf(res.solution_error)) {
    j["solution_error"] = "inf";
  } else {
    j["solution_error"] = res.solution_error;
  }
  j["wall_time"] = res.wall_time_seconds;
  return j;
}

}  // namespace

std::string lstsq_report_json(const LstsqReport& report) {
  ordered_json j;
  j["normal_equations"] = method_result_json(report.normal_equations);
  j["qr"] = method_result_json(report.qr);
  j["svd"] = method_result_json(report.svd);
  return j.dump(2) + "\n";
}

std::string render_report_table(const std::string& json_text) {
  const ordered_json j = ordered_json::parse(json_text);

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"layer", "shape", "rank", "params", "params'", "flops",
                  "flops'", "rel_err"});

  auto shape_str = [](const ordered_json& s) {
    return s[0].dump() + "x" + s[1].dump();
  };
  for (const auto& layer : j.at("layers")) {
    char err[32];
    std::snprintf(err, sizeof(err), "%.3e", layer.at("rel_err").get<double>());
    rows.push_back({layer.at("name").get<std::string>(),
                    shape_str(layer.at("shape_before")) + " -> " +
                        shape_str(layer.at("shape_after")),
                    layer.at("rank").dump(), layer.at("params_before").dump(),
                    layer.at("params_after").dump(),
                    layer.at("flops_before").dump(),
                    layer.at("flops_after").dump(), err});
  }
  const auto& totals = j.at("totals");
  rows.push_back({"total", "", "", totals.at("params_before").dump(),
                  totals.at("params_after").dump(),
                  totals.at("flops_before").dump(),
                  totals.at("flops_after").dump(), ""});

  std::vector<std::size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }

  std::ostringstream out;
  out << j.at("model_name").get<std::string>() << "  rate="
      << j.at("rate").dump() << "  method="
      << j.at("method").get<std::string>() << "  policy="
      << j.at("policy").get<std::string>() << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out << rows[r][c];
      if (c + 1 < rows[r].size()) {
        out << std::string(widths[c] - rows[r][c].size() + 2, ' ');
      }
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < widths.size(); ++c) {
        total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
      }
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

}  // namespace vtpmd
