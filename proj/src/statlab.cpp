#include "mstk/statlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace mstk {

MetricPopulation MetricPopulation::from_optional(std::string metric, std::string source,
                                                 std::span<const std::string> ids,
                                                 std::span<const std::optional<double>> values) {
  MetricPopulation p;
  p.metric = std::move(metric);
  p.source = std::move(source);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] && std::isfinite(*values[i])) {
      p.values.push_back(*values[i]);
      p.ids.push_back(i < ids.size() ? ids[i] : std::to_string(i));
    } else {
      ++p.excluded;
    }
  }
  return p;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  if (values.empty()) return {{0.0, 1.0}, {0}};
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  std::vector<double> edges;
  if (*mx == *mn) {
    edges = {*mn - 0.5, *mn + 0.5};
  } else {
    edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k)
      edges[k] = *mn + (*mx - *mn) * static_cast<double>(k) / static_cast<double>(bins);
    edges.back() = *mx;
  }
  return histogram(values, edges);
}

Histogram histogram(std::span<const double> values, std::span<const double> edges) {
  if (edges.size() < 2) throw std::invalid_argument("histogram needs at least two edges");
  Histogram h{{edges.begin(), edges.end()}, std::vector<std::size_t>(edges.size() - 1, 0)};
  for (double v : values) {
    // Bins are [e_k, e_{k+1}); the last one is closed.
    auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
    std::size_t k = it == h.edges.begin() ? 0 : static_cast<std::size_t>(it - h.edges.begin()) - 1;
    k = std::min(k, h.counts.size() - 1);
    ++h.counts[k];
  }
  return h;
}

KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth, std::size_t points) {
  if (values.empty()) throw std::invalid_argument("KDE of an empty sample");
  if (points < 2) throw std::invalid_argument("KDE grid needs at least two points");
  const double n = static_cast<double>(values.size());
  KdeCurve c;
  if (bandwidth) {
    if (!(*bandwidth > 0)) throw std::invalid_argument("KDE bandwidth must be positive");
    c.bandwidth = *bandwidth;
  } else {
    if (values.size() < 2) throw std::invalid_argument("automatic KDE bandwidth needs n >= 2");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1));
    if (!(sd > 0)) throw std::invalid_argument("automatic KDE bandwidth needs a nonzero spread");
    c.bandwidth = 1.06 * sd * std::pow(n, -0.2);
  }
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn - 3 * c.bandwidth, hi = *mx + 3 * c.bandwidth;
  c.grid.resize(points);
  c.density.resize(points);
  const double norm = 1.0 / (n * c.bandwidth * std::sqrt(2 * std::numbers::pi));
  for (std::size_t k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    double acc = 0;
    for (double v : values) {
      const double u = (x - v) / c.bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    c.grid[k] = x;
    c.density[k] = acc * norm;
  }
  double integral = 0;
  for (std::size_t k = 1; k < points; ++k)
    integral += 0.5 * (c.density[k] + c.density[k - 1]) * (c.grid[k] - c.grid[k - 1]);
  for (double& d : c.density) d /= integral;
  return c;
}

DistributionSummary summarize(const MetricPopulation& pop, std::size_t bins) {
  if (pop.values.empty())
    throw std::invalid_argument("cannot summarize empty population " + pop.metric + "/" + pop.source);
  std::vector<double> v = pop.values;
  std::sort(v.begin(), v.end());
  DistributionSummary s;
  s.n = v.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = s.n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  s.iqr = s.q3 - s.q1;
  s.whisker_lo = s.q1 - 1.5 * s.iqr;
  s.whisker_hi = s.q3 + 1.5 * s.iqr;
  for (double x : v)
    if (x < s.whisker_lo || x > s.whisker_hi) s.outliers.push_back(x);
  s.histogram = histogram(v, bins);
  if (s.n >= 2 && s.std > 0) s.kde = kde(v);
  return s;
}

double iqr_overlap(const DistributionSummary& a, const DistributionSummary& b) {
  const double lo = std::max(a.q1, b.q1), hi = std::min(a.q3, b.q3);
  const double inter = std::max(0.0, hi - lo);
  const double uni = std::max(a.q3, b.q3) - std::min(a.q1, b.q1);
  if (uni <= 0) return a.q1 == b.q1 ? 1.0 : 0.0;
  if (hi < lo) return 0.0;
  return inter / uni;
}

double quantile_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("distance needs nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  // Q(u) = x[ceil(u n) - 1]; walk the merged breakpoints i/n and j/m.
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double u = 0, acc = 0;
  while (i < x.size() && j < y.size()) {
    const double ui = static_cast<double>(i + 1) / n, uj = static_cast<double>(j + 1) / m;
    const double next = std::min(ui, uj);
    acc += (next - u) * std::abs(x[i] - y[j]);
    u = next;
    if (ui <= next) ++i;
    if (uj <= next) ++j;
  }
  return acc;
}

ComparisonReport compare(
    const std::map<std::string, std::map<std::string, MetricPopulation>>& populations,
    const std::vector<std::string>& metrics, std::size_t bins) {
  if (populations.size() < 2) throw std::invalid_argument("comparison needs at least two sources");
  ComparisonReport r;
  for (const auto& [source, _] : populations) r.sources.push_back(source);
  for (const auto& metric : metrics) {
    MetricComparison mc;
    mc.metric = metric;
    for (const auto& [source, pops] : populations) {
      const auto it = pops.find(metric);
      if (it == pops.end()) {
        r.warnings.push_back("metric " + metric + " missing from source " + source);
        continue;
      }
      if (it->second.values.empty()) {
        r.warnings.push_back("metric " + metric + " has no finite values in source " + source);
        continue;
      }
      mc.summaries.emplace(source, summarize(it->second, bins));
      mc.values.emplace(source, it->second.values);
    }
    if (mc.summaries.size() < 2) {
      r.warnings.push_back("metric " + metric + " omitted: fewer than two sources");
      continue;
    }
    std::vector<double> pooled;
    for (const auto& [_, v] : mc.values) pooled.insert(pooled.end(), v.begin(), v.end());
    mc.shared_edges = histogram(pooled, bins).edges;
    for (auto& [source, s] : mc.summaries) s.histogram = histogram(mc.values[source], mc.shared_edges);
    for (auto a = mc.summaries.begin(); a != mc.summaries.end(); ++a)
      for (auto b = std::next(a); b != mc.summaries.end(); ++b)
        mc.pairs.push_back({a->first, b->first, iqr_overlap(a->second, b->second),
                            quantile_distance(mc.values[a->first], mc.values[b->first])});
    r.metrics.push_back(std::move(mc));
  }
  return r;
}

}  // namespace mstk
