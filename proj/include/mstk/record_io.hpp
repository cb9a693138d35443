#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mstk/metrics.hpp"

namespace mstk {

/// Version of the metrics CSV column layout and JSON record schema.
inline constexpr int kMetricsSchemaVersion = 1;

/// Population-level metric columns, in CSV order. The first sixteen are the
/// standard comparison panels (fractions, sizes, tortuosity, areas,
/// formation factors, total TPB density).
const std::vector<std::string>& metric_columns();
const std::vector<std::string>& comparison_metrics();

/// Value of a named metric column; nullopt for flagged (non-percolating or
/// absent-phase) entries.
std::optional<double> metric_value(const MetricsRecord& r, const std::string& column);

nlohmann::json to_json(const MetricsRecord& r);

/// Full CSV layout: row_type,id,nx,ny,nz,spacing, the metric columns, then
/// percolating_<phase> flags. Flagged values are written as empty cells.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);

/// Writes one row per record plus "mean" and "std" aggregate rows.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);

/// Parsed "volume" rows of a metrics CSV.
struct MetricsTable {
  std::vector<std::string> ids;
  std::map<std::string, std::vector<std::optional<double>>> columns;
};

MetricsTable read_metrics_csv(const std::filesystem::path& path);
MetricsTable parse_metrics_csv(std::istream& in, const std::string& source_name = "<csv>");

std::string format_number(double v);

}  // namespace mstk
