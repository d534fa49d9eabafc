/// Report emission: long-format CSV and a minimal internal SVG line-chart
/// writer (keeps the toolchain dependency-free and the output diffable).
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ditto/rollout.hpp"

namespace ditto::report {

void write_report_csv(const rollout::EvalReport& report, const std::filesystem::path& path);
rollout::EvalReport read_report_csv(const std::filesystem::path& path);

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

/// Axis-fitted polyline chart with a legend; linear scales.
void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series);

/// Group report rows by (scenario, variant) into chart series over `axis`.
std::vector<Series> series_from_report(const rollout::EvalReport& report,
                                       const std::string& axis);

}  // namespace ditto::report
