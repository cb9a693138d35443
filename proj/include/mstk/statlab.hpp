#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace mstk {

/// Version of the comparison CSV/JSON report layout.
inline constexpr int kReportSchemaVersion = 1;

struct MetricPopulation {
  std::string metric;
  std::string source;  // e.g. "original", "gan", "ellipsoid"
  std::vector<std::string> ids;
  std::vector<double> values;  // finite values only
  std::size_t excluded = 0;    // flagged (non-percolating / absent) entries

  /// Splits optional values into finite values and an excluded count.
  static MetricPopulation from_optional(std::string metric, std::string source,
                                        std::span<const std::string> ids,
                                        std::span<const std::optional<double>> values);
};

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

struct KdeCurve {
  double bandwidth = 0;
  std::vector<double> grid;
  std::vector<double> density;
};

/// Quantile of sorted data by linear interpolation between order statistics
/// (h = (n - 1) p, the "type 7" rule).
double quantile_sorted(std::span<const double> sorted, double p);

struct DistributionSummary {
  std::size_t n = 0;
  double mean = 0;
  double std = 0;  // sample std, n - 1 denominator (0 when n == 1)
  double min = 0;
  double max = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double iqr = 0;
  double whisker_lo = 0;  // q1 - 1.5 iqr
  double whisker_hi = 0;  // q3 + 1.5 iqr
  std::vector<double> outliers;  // ascending
  Histogram histogram;
  std::optional<KdeCurve> kde;   // absent when the population is degenerate
};

DistributionSummary summarize(const MetricPopulation& pop, std::size_t bins = 20);

/// Gaussian KDE on a 256-point grid spanning the data +- 3 bandwidths. The
/// default bandwidth is Silverman's 1.06 sd n^(-1/5). The curve is scaled so
/// its trapezoid integral over the grid is exactly one.
KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth = std::nullopt,
             std::size_t points = 256);

/// Equal-width bins over [min, max]; a constant sample gets one unit-wide bin.
Histogram histogram(std::span<const double> values, std::size_t bins);
/// Counts against fixed edges (shared across sources); values outside are
/// clamped into the end bins.
Histogram histogram(std::span<const double> values, std::span<const double> edges);

/// |[q1a,q3a] ∩ [q1b,q3b]| / |union|. Two identical zero-width boxes give 1.
double iqr_overlap(const DistributionSummary& a, const DistributionSummary& b);

/// Area between the empirical quantile functions (first-order Wasserstein
/// distance of the two empirical distributions).
double quantile_distance(std::span<const double> a, std::span<const double> b);

struct PairScore {
  std::string source_a;
  std::string source_b;
  double iqr_overlap = 0;
  double distance = 0;
};

struct MetricComparison {
  std::string metric;
  std::map<std::string, DistributionSummary> summaries;  // by source
  std::map<std::string, std::vector<double>> values;     // by source, as given
  std::vector<PairScore> pairs;
  std::vector<double> shared_edges;  // histogram edges common to all sources
};

struct ComparisonReport {
  std::vector<std::string> sources;
  std::vector<MetricComparison> metrics;
  std::vector<std::string> warnings;
};

/// `populations[source][metric]`. Metrics missing from a source are omitted
/// for that source with a warning; a metric needs at least two sources.
ComparisonReport compare(
    const std::map<std::string, std::map<std::string, MetricPopulation>>& populations,
    const std::vector<std::string>& metrics, std::size_t bins = 20);

nlohmann::json to_json(const ComparisonReport& report);

/// Writes summary.csv, report.json and per-metric hist_<metric>.svg and
/// box_<metric>.svg files. Output is a pure function of the report.
void emit_report(const ComparisonReport& report, const std::filesystem::path& out_dir);

std::string render_histogram_svg(const MetricComparison& m, const std::vector<std::string>& sources);
std::string render_boxplot_svg(const MetricComparison& m, const std::vector<std::string>& sources);

}  // namespace mstk
