#include "mstk/synthgen.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace mstk {

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

// Uniform random rotation from a normalized Gaussian quaternion.
Mat3 random_rotation(Rng& rng) {
  double q[4];
  double norm = 0;
  do {
    norm = 0;
    for (double& c : q) {
      c = rng.normal();
      norm += c * c;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

// Spatial hash over ellipsoid centers with cells at least as large as the
// biggest bounding diameter, so overlaps only occur between adjacent cells.
class CenterGrid {
 public:
  explicit CenterGrid(double cell) : cell_(std::max(cell, 1e-9)) {}

  void insert(const Ellipsoid& e, std::size_t id) { cells_[key(cell_of(e.center))].push_back(id); }

  template <class F>
  void for_near(const Vec3& p, F&& f) const {
    const auto c = cell_of(p);
    for (long dz = -1; dz <= 1; ++dz)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (std::size_t id : it->second) f(id);
        }
  }

 private:
  std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p[0] / cell_)), static_cast<long>(std::floor(p[1] / cell_)),
            static_cast<long>(std::floor(p[2] / cell_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    const auto u = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1fffff; };
    return u(c[0]) | (u(c[1]) << 21) | (u(c[2]) << 42);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

Vec3 random_point_in(const Ellipsoid& e, Rng& rng) {
  Vec3 u;
  do {
    for (double& c : u) c = rng.uniform(-1.0, 1.0);
  } while (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] > 1.0);
  Vec3 p = e.center;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p[k] += e.axes[i][k] * e.semi_axes[i] * u[i];
  return p;
}

double overlap_with(const Ellipsoid& e, const std::vector<Ellipsoid>& placed,
                    const std::vector<std::size_t>& candidates, int samples, Rng& rng) {
  if (candidates.empty() || samples <= 0) return 0.0;
  int inside = 0;
  for (int s = 0; s < samples; ++s) {
    const Vec3 p = random_point_in(e, rng);
    for (std::size_t id : candidates)
      if (placed[id].normalized_radius(p) <= 1.0) {
        ++inside;
        break;
      }
  }
  return static_cast<double>(inside) / samples;
}

}  // namespace

LogNormalParams lognormal_from_moments(const SizeMoments& m) {
  if (!(m.mean > 0) || !(m.std > 0))
    throw std::invalid_argument("log-normal moments need mean > 0 and std > 0");
  const double s2 = std::log1p((m.std * m.std) / (m.mean * m.mean));
  return {std::log(m.mean) - 0.5 * s2, std::sqrt(s2)};
}

void SynthConfig::validate() const {
  double sum = 0;
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("phase fractions must lie in (0, 1)");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("phase fractions must sum to 1, got " + std::to_string(sum));
  lognormal_from_moments(ni);
  lognormal_from_moments(ysz);
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
    throw std::invalid_argument("synthetic domain dims must be positive");
  if (!(spacing > 0)) throw std::invalid_argument("spacing must be positive");
  if (!(aspect_min > 0) || aspect_min > aspect_max)
    throw std::invalid_argument("aspect ratio range must satisfy 0 < min <= max");
  if (overlap_threshold < 0 || overlap_threshold > 1)
    throw std::invalid_argument("overlap threshold must lie in [0, 1]");
  if (retries < 1 || overlap_samples < 1)
    throw std::invalid_argument("retries and overlap_samples must be >= 1");
  if (octants && (dims.nx % 2 || dims.ny % 2 || dims.nz % 2))
    throw std::invalid_argument("octant split needs even dims");
}

double Ellipsoid::volume() const {
  return 4.0 / 3.0 * std::numbers::pi * semi_axes[0] * semi_axes[1] * semi_axes[2];
}

double Ellipsoid::normalized_radius(const std::array<double, 3>& p) const {
  const Vec3 d = {p[0] - center[0], p[1] - center[1], p[2] - center[2]};
  double acc = 0;
  for (int i = 0; i < 3; ++i) {
    const double u = (axes[i][0] * d[0] + axes[i][1] * d[1] + axes[i][2] * d[2]) / semi_axes[i];
    acc += u * u;
  }
  return std::sqrt(acc);
}

double Ellipsoid::bound() const { return std::max({semi_axes[0], semi_axes[1], semi_axes[2]}); }

std::vector<Ellipsoid> sample_phase(const SynthConfig& cfg, Phase phase, double volume, Rng& rng) {
  if (phase == Phase::Pore) throw std::invalid_argument("the pore phase is not packed");
  const LogNormalParams ln = lognormal_from_moments(phase == Phase::Ni ? cfg.ni : cfg.ysz);
  std::vector<Ellipsoid> out;
  double total = 0;
  while (total < volume) {
    Ellipsoid e;
    e.phase = phase;
    const double r = 0.5 * std::exp(ln.mu + ln.sigma * rng.normal());
    const double a1 = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    const double a2 = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    e.semi_axes = {r * a1, r * a2, r / (a1 * a2)};
    e.axes = random_rotation(rng);
    total += e.volume();
    out.push_back(e);
  }
  return out;
}

EllipsoidPack sample_ellipsoids(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  EllipsoidPack p;
  p.extent = {cfg.dims.nx * cfg.spacing, cfg.dims.ny * cfg.spacing, cfg.dims.nz * cfg.spacing};
  const double domain = p.extent[0] * p.extent[1] * p.extent[2];
  for (Phase ph : {Phase::Ni, Phase::YSZ}) {
    auto part = sample_phase(cfg, ph, cfg.fractions[slot(ph)] * domain, rng);
    p.ellipsoids.insert(p.ellipsoids.end(), part.begin(), part.end());
  }
  return p;
}

double estimate_overlap(const Ellipsoid& e, const std::vector<Ellipsoid>& placed, int samples,
                        Rng& rng) {
  std::vector<std::size_t> all(placed.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return overlap_with(e, placed, all, samples, rng);
}

void pack(std::vector<Ellipsoid> sized, const SynthConfig& cfg, Rng& rng, EllipsoidPack& into) {
  const double min_extent = std::min({into.extent[0], into.extent[1], into.extent[2]});
  double max_bound = 0;
  for (const auto& e : sized) max_bound = std::max(max_bound, e.bound());
  for (const auto& e : into.ellipsoids) max_bound = std::max(max_bound, e.bound());
  for (const auto& e : sized)
    if (2.0 * e.bound() > min_extent)
      throw std::invalid_argument("domain too small for an ellipsoid of semi-axis " +
                                  std::to_string(e.bound()) + " um");

  std::stable_sort(sized.begin(), sized.end(),
                   [](const Ellipsoid& a, const Ellipsoid& b) { return a.volume() > b.volume(); });
  CenterGrid grid(2.0 * max_bound);
  for (std::size_t i = 0; i < into.ellipsoids.size(); ++i) grid.insert(into.ellipsoids[i], i);

  std::vector<std::size_t> near;
  for (Ellipsoid e : sized) {
    Vec3 best_center{};
    double best_overlap = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < cfg.retries; ++attempt) {
      for (int k = 0; k < 3; ++k) e.center[k] = rng.uniform(0.0, into.extent[k]);
      near.clear();
      grid.for_near(e.center, [&](std::size_t id) {
        const Ellipsoid& o = into.ellipsoids[id];
        double d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += (o.center[k] - e.center[k]) * (o.center[k] - e.center[k]);
        const double reach = o.bound() + e.bound();
        if (d2 < reach * reach) near.push_back(id);
      });
      const double ov = overlap_with(e, into.ellipsoids, near, cfg.overlap_samples, rng);
      if (ov < best_overlap) {
        best_overlap = ov;
        best_center = e.center;
      }
      if (ov <= cfg.overlap_threshold) break;
    }
    e.center = best_center;
    e.overlap = best_overlap;
    grid.insert(e, into.ellipsoids.size());
    into.ellipsoids.push_back(e);
  }
}

EllipsoidPack pack(EllipsoidPack sized, const SynthConfig& cfg, Rng& rng) {
  EllipsoidPack out;
  out.extent = sized.extent;
  pack(std::move(sized.ellipsoids), cfg, rng, out);
  return out;
}

Voxelizer::Voxelizer(Dims dims, double spacing)
    : dims_(dims),
      spacing_(spacing),
      best_(dims.count(), std::numeric_limits<float>::infinity()),
      label_(dims.count(), static_cast<std::uint8_t>(Phase::Pore)) {
  counts_[0] = dims.count();
}

void Voxelizer::add(const Ellipsoid& e) {
  const double b = e.bound();
  long lo[3], hi[3];
  for (int k = 0; k < 3; ++k) {
    lo[k] = std::max(0L, static_cast<long>(std::floor((e.center[k] - b) / spacing_ - 0.5)));
    hi[k] = std::min(static_cast<long>(dims_[k]) - 1,
                     static_cast<long>(std::ceil((e.center[k] + b) / spacing_ - 0.5)));
  }
  for (long z = lo[2]; z <= hi[2]; ++z)
    for (long y = lo[1]; y <= hi[1]; ++y)
      for (long x = lo[0]; x <= hi[0]; ++x) {
        const double rho = e.normalized_radius(
            {(x + 0.5) * spacing_, (y + 0.5) * spacing_, (z + 0.5) * spacing_});
        if (rho > 1.0) continue;
        const std::size_t i = (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
        const auto r = static_cast<float>(rho);
        if (r < best_[i]) {
          best_[i] = r;
          --counts_[label_[i] - 1];
          label_[i] = static_cast<std::uint8_t>(e.phase);
          ++counts_[label_[i] - 1];
        }
      }
}

std::array<double, 3> Voxelizer::fractions() const {
  const double n = static_cast<double>(label_.size());
  return {counts_[0] / n, counts_[1] / n, counts_[2] / n};
}

SegmentedVolume Voxelizer::volume() const { return SegmentedVolume(dims_, spacing_, label_); }

SegmentedVolume voxelize(const EllipsoidPack& pack, const SynthConfig& cfg) {
  Voxelizer v(cfg.dims, cfg.spacing);
  for (const auto& e : pack.ellipsoids) v.add(e);
  return v.volume();
}

std::vector<SegmentedVolume> split_octants(const SegmentedVolume& v) {
  const Dims d = v.dims();
  if (d.nx % 2 || d.ny % 2 || d.nz % 2)
    throw std::invalid_argument("octant split needs even dims, got " + to_string(d));
  const Dims half{d.nx / 2, d.ny / 2, d.nz / 2};
  std::vector<SegmentedVolume> out;
  for (std::uint32_t oz = 0; oz < 2; ++oz)
    for (std::uint32_t oy = 0; oy < 2; ++oy)
      for (std::uint32_t ox = 0; ox < 2; ++ox)
        out.push_back(crop(v, {ox * half.nx, oy * half.ny, oz * half.nz}, half));
  return out;
}

std::vector<SegmentedVolume> generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::array<double, 3> extent = {cfg.dims.nx * cfg.spacing, cfg.dims.ny * cfg.spacing,
                                        cfg.dims.nz * cfg.spacing};
  const double domain = extent[0] * extent[1] * extent[2];

  // Overlaps eat into the placed volume. Topping up afterwards drops small
  // particles into the big ones, so instead inflate the sampled volume per
  // phase and repack from scratch (largest first) a few times, then top up
  // whatever is still missing.
  std::array<double, 3> inflate = {1.0, 1.0, 1.0};
  EllipsoidPack placed;
  std::optional<Voxelizer> vox;
  constexpr int kCalibrationPasses = 4;
  for (int pass = 0; pass < kCalibrationPasses; ++pass) {
    EllipsoidPack sized;
    sized.extent = extent;
    for (Phase ph : {Phase::Ni, Phase::YSZ}) {
      auto part = sample_phase(cfg, ph, inflate[slot(ph)] * cfg.fractions[slot(ph)] * domain, rng);
      sized.ellipsoids.insert(sized.ellipsoids.end(), part.begin(), part.end());
    }
    placed = pack(std::move(sized), cfg, rng);
    vox.emplace(cfg.dims, cfg.spacing);
    for (const auto& e : placed.ellipsoids) vox->add(e);
    const auto f = vox->fractions();
    bool close = true;
    for (Phase ph : {Phase::Ni, Phase::YSZ}) {
      const std::size_t k = slot(ph);
      if (std::abs(cfg.fractions[k] - f[k]) > cfg.fill_tolerance) close = false;
      inflate[k] *= std::clamp(cfg.fractions[k] / std::max(f[k], 1e-3), 0.5, 2.0);
    }
    if (close) break;
  }

  constexpr int kMaxRounds = 200;
  for (int round = 0; round < kMaxRounds; ++round) {
    const auto f = vox->fractions();
    bool done = true;
    for (Phase ph : {Phase::Ni, Phase::YSZ}) {
      const double deficit = cfg.fractions[slot(ph)] - f[slot(ph)];
      if (deficit <= cfg.fill_tolerance) continue;
      done = false;
      const std::size_t first = placed.ellipsoids.size();
      pack(sample_phase(cfg, ph, deficit * domain, rng), cfg, rng, placed);
      for (std::size_t i = first; i < placed.ellipsoids.size(); ++i) vox->add(placed.ellipsoids[i]);
    }
    if (done) break;
  }

  SegmentedVolume whole = vox->volume();
  if (!cfg.octants) return {std::move(whole)};
  return split_octants(whole);
}

GrayscaleVolume grayscale_render(const SegmentedVolume& s, const std::array<double, 3>& intensity,
                                 double noise_std, std::uint64_t seed) {
  for (double v : intensity)
    if (v < 0 || v > 255) throw std::invalid_argument("phase intensities must lie in [0, 255]");
  if (noise_std < 0) throw std::invalid_argument("noise std must be non-negative");
  Rng rng(seed);
  std::vector<std::uint8_t> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double v = intensity[s[i] - 1];
    if (noise_std > 0) v += noise_std * rng.normal();
    out[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  }
  return GrayscaleVolume(s.dims(), s.spacing(), std::move(out));
}

}  // namespace mstk
