#include "mstk/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <queue>
#include <string>
#include <tuple>

namespace mstk {

GradientVolume sobel_gradient(const GrayscaleVolume& g) {
  const Dims d = g.dims();
  if (d.nx < 3 || d.ny < 3 || d.nz < 3)
    throw VolumeError("Sobel filtering needs at least 3 voxels per axis, got " + to_string(d));
  static constexpr int kSmooth[3] = {1, 2, 1};
  static constexpr int kDiff[3] = {-1, 0, 1};

  GradientVolume out{d, g.spacing(), std::vector<double>(d.count())};
  const auto clampi = [](long v, std::uint32_t n) {
    return static_cast<std::uint32_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
  };
  std::size_t i = 0;
  for (std::uint32_t z = 0; z < d.nz; ++z)
    for (std::uint32_t y = 0; y < d.ny; ++y)
      for (std::uint32_t x = 0; x < d.nx; ++x, ++i) {
        long gx = 0, gy = 0, gz = 0;
        for (int dz = 0; dz < 3; ++dz) {
          const std::uint32_t zz = clampi(static_cast<long>(z) + dz - 1, d.nz);
          for (int dy = 0; dy < 3; ++dy) {
            const std::uint32_t yy = clampi(static_cast<long>(y) + dy - 1, d.ny);
            for (int dx = 0; dx < 3; ++dx) {
              const std::uint32_t xx = clampi(static_cast<long>(x) + dx - 1, d.nx);
              const long v = g.at(xx, yy, zz);
              gx += kDiff[dx] * kSmooth[dy] * kSmooth[dz] * v;
              gy += kSmooth[dx] * kDiff[dy] * kSmooth[dz] * v;
              gz += kSmooth[dx] * kSmooth[dy] * kDiff[dz] * v;
            }
          }
        }
        out.values[i] = std::sqrt(static_cast<double>(gx * gx + gy * gy + gz * gz));
      }
  return out;
}

std::uint64_t DensityMap::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void DensityMap::write_csv(std::ostream& out) const {
  out << "intensity_bin,gradient_bin,count\n";
  for (std::size_t i = 0; i < intensity_bins(); ++i)
    for (std::size_t j = 0; j < gradient_bins(); ++j)
      if (const auto c = count(i, j)) out << i << ',' << j << ',' << c << '\n';
}

namespace {

std::vector<double> edges_over(double lo, double hi, std::size_t bins) {
  if (hi <= lo) hi = lo + 1.0;
  std::vector<double> e(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    e[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

std::size_t bin_of(double v, const std::vector<double>& edges) {
  const std::size_t bins = edges.size() - 1;
  const double t = (v - edges.front()) / (edges.back() - edges.front());
  const auto k = static_cast<std::size_t>(std::max(0.0, t * static_cast<double>(bins)));
  return std::min(k, bins - 1);
}

void check_same_dims(const GrayscaleVolume& g, const GradientVolume& grad) {
  if (g.dims() != grad.dims)
    throw VolumeError("gradient dims " + to_string(grad.dims) + " differ from image dims " +
                      to_string(g.dims()));
}

}  // namespace

DensityMap density_map(const GrayscaleVolume& g, const GradientVolume& grad,
                       std::size_t intensity_bins, std::size_t gradient_bins) {
  if (intensity_bins == 0 || gradient_bins == 0)
    throw std::invalid_argument("density map needs at least one bin per axis");
  check_same_dims(g, grad);
  const auto [imin, imax] = std::minmax_element(g.data().begin(), g.data().end());
  const auto [gmin, gmax] = std::minmax_element(grad.values.begin(), grad.values.end());
  DensityMap m;
  m.intensity_edges = edges_over(*imin, *imax, intensity_bins);
  m.gradient_edges = edges_over(*gmin / kGradientNormalization,
                                *gmax / kGradientNormalization, gradient_bins);
  m.counts.assign(intensity_bins * gradient_bins, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t a = bin_of(g[i], m.intensity_edges);
    const std::size_t b = bin_of(grad.normalized(i), m.gradient_edges);
    ++m.counts[a * gradient_bins + b];
  }
  return m;
}

void SeedBounds::validate() const {
  for (Phase p : kPhases) {
    const SeedBox& b = (*this)[p];
    if (b.intensity_lo > b.intensity_hi || b.gradient_lo >= b.gradient_hi)
      throw std::invalid_argument(std::string("empty seed box for phase ") + phase_name(p));
  }
  for (std::size_t a = 0; a < boxes.size(); ++a)
    for (std::size_t b = a + 1; b < boxes.size(); ++b) {
      const SeedBox& u = boxes[a];
      const SeedBox& v = boxes[b];
      const bool intensity_apart = u.intensity_hi < v.intensity_lo || v.intensity_hi < u.intensity_lo;
      const bool gradient_apart = u.gradient_hi <= v.gradient_lo || v.gradient_hi <= u.gradient_lo;
      if (!intensity_apart && !gradient_apart)
        throw std::invalid_argument("seed boxes of phases " + std::to_string(a + 1) + " and " +
                                    std::to_string(b + 1) + " overlap");
    }
}

SeedVolume select_seeds(const GrayscaleVolume& g, const GradientVolume& grad,
                        const SeedBounds& bounds) {
  check_same_dims(g, grad);
  bounds.validate();
  SeedVolume s{g.dims(), std::vector<std::uint8_t>(g.size(), 0), {}};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double intensity = g[i];
    const double gradient = grad.normalized(i);
    for (Phase p : kPhases) {
      if (bounds[p].contains(intensity, gradient)) {
        s.markers[i] = static_cast<std::uint8_t>(p);
        ++s.counts[slot(p)];
        break;
      }
    }
  }
  for (Phase p : kPhases)
    if (s.counts[slot(p)] == 0)
      throw SeedingError(p, std::string("no seed voxels for phase ") +
                                std::to_string(static_cast<int>(p)) + " (" + phase_name(p) + ")");
  return s;
}

SegmentedVolume watershed(const GradientVolume& grad, const SeedVolume& seeds) {
  const Dims d = grad.dims;
  if (seeds.dims != d || seeds.markers.size() != d.count())
    throw VolumeError("seed volume does not match gradient dims");
  std::array<std::size_t, kPhaseCount> present{};
  for (auto m : seeds.markers)
    if (m >= 1 && m <= 3) ++present[m - 1];
  for (Phase p : kPhases)
    if (present[slot(p)] == 0)
      throw SeedingError(p, std::string("watershed needs seeds for phase ") + phase_name(p));

  using Entry = std::tuple<double, std::uint64_t, std::size_t>;  // priority, order, voxel
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<std::uint8_t> label = seeds.markers;
  std::uint64_t order = 0;
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i] != 0) queue.emplace(grad.values[i], order++, i);

  const std::size_t sx = 1, sy = d.nx, sz = static_cast<std::size_t>(d.nx) * d.ny;
  while (!queue.empty()) {
    const std::size_t i = std::get<2>(queue.top());
    queue.pop();
    const std::uint32_t x = static_cast<std::uint32_t>(i % d.nx);
    const std::uint32_t y = static_cast<std::uint32_t>((i / d.nx) % d.ny);
    const std::uint32_t z = static_cast<std::uint32_t>(i / sz);
    const auto visit = [&](std::size_t j) {
      if (label[j] == 0) {
        label[j] = label[i];
        queue.emplace(grad.values[j], order++, j);
      }
    };
    if (x > 0) visit(i - sx);
    if (x + 1 < d.nx) visit(i + sx);
    if (y > 0) visit(i - sy);
    if (y + 1 < d.ny) visit(i + sy);
    if (z > 0) visit(i - sz);
    if (z + 1 < d.nz) visit(i + sz);
  }
  return SegmentedVolume(d, grad.spacing, std::move(label));
}

SegmentationResult segment_pipeline(const GrayscaleVolume& g, const SegmentationConfig& config) {
  const GradientVolume grad = sobel_gradient(g);
  DensityMap density = density_map(g, grad, config.intensity_bins, config.gradient_bins);
  const SeedVolume seeds = select_seeds(g, grad, config.bounds);
  return {watershed(grad, seeds), seeds.counts, std::move(density)};
}

}  // namespace mstk
