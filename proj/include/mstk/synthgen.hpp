#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mstk/rng.hpp"
#include "mstk/volume.hpp"

namespace mstk {

/// Arithmetic moments of a log-normal equivalent-sphere diameter, in um.
struct SizeMoments {
  double mean = 0.5;
  double std = 0.1;
};

/// Parameters of the underlying normal, matched to the arithmetic moments:
/// sigma^2 = ln(1 + std^2/mean^2), mu = ln(mean) - sigma^2/2.
struct LogNormalParams {
  double mu = 0;
  double sigma = 0;
};
LogNormalParams lognormal_from_moments(const SizeMoments& m);

/// Ellipsoid-packing generator settings. The defaults are anode-like values
/// inferred from typical Ni/YSZ anode statistics (pore 0.21, Ni 0.37, YSZ
/// 0.42; Ni ~0.55 um, YSZ ~0.50 um); they are not published inputs.
struct SynthConfig {
  std::array<double, 3> fractions = {0.21, 0.37, 0.42};  // pore, Ni, YSZ
  SizeMoments ni{0.55, 0.10};
  SizeMoments ysz{0.50, 0.08};
  Dims dims{96, 96, 96};
  double spacing = kDefaultSpacing;
  double aspect_min = 0.7;  // bounds of the two independent axis ratios
  double aspect_max = 1.3;
  double overlap_threshold = 0.3;
  int retries = 64;
  int overlap_samples = 48;
  /// Phase-fraction tolerance of the fill-to-target loop in generate().
  double fill_tolerance = 0.003;
  bool octants = false;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct Ellipsoid {
  std::array<double, 3> center{};    // um
  std::array<double, 3> semi_axes{};  // um
  std::array<std::array<double, 3>, 3> axes{};  // rows: orthonormal local frame
  Phase phase = Phase::Ni;
  double overlap = 0;  // soft overlap accepted at placement

  double volume() const;
  /// sqrt(sum (u_i / a_i)^2) in the local frame; <= 1 inside.
  double normalized_radius(const std::array<double, 3>& p) const;
  /// Radius of the bounding sphere.
  double bound() const;
};

struct EllipsoidPack {
  std::vector<Ellipsoid> ellipsoids;
  std::array<double, 3> extent{};  // um
};

/// Draws sized, oriented, labeled ellipsoids whose total volume per solid
/// phase reaches fraction * domain volume. Centers are left at zero.
EllipsoidPack sample_ellipsoids(const SynthConfig& cfg, Rng& rng);

/// Draws ellipsoids of one phase until their volume reaches `volume` um^3.
std::vector<Ellipsoid> sample_phase(const SynthConfig& cfg, Phase phase, double volume, Rng& rng);

/// Fraction of `e`'s volume inside any ellipsoid of `placed`, estimated from
/// `samples` points drawn uniformly in `e`.
double estimate_overlap(const Ellipsoid& e, const std::vector<Ellipsoid>& placed, int samples,
                        Rng& rng);

/// Sequential random placement, largest first. A candidate center is accepted
/// once its estimated overlap is at most the threshold; after the retry
/// budget the least-overlapping candidate is taken. Ellipsoids already in
/// `into` act as obstacles.
void pack(std::vector<Ellipsoid> sized, const SynthConfig& cfg, Rng& rng, EllipsoidPack& into);
EllipsoidPack pack(EllipsoidPack sized, const SynthConfig& cfg, Rng& rng);

/// Incremental rasterizer: a voxel takes the phase of the ellipsoid with the
/// smallest normalized radius among those containing its center; ties keep
/// the earlier ellipsoid; uncovered voxels are pore.
class Voxelizer {
 public:
  Voxelizer(Dims dims, double spacing);
  void add(const Ellipsoid& e);
  std::array<double, 3> fractions() const;
  SegmentedVolume volume() const;

 private:
  Dims dims_;
  double spacing_;
  std::vector<float> best_;
  std::vector<std::uint8_t> label_;
  std::array<std::size_t, 3> counts_{};
};

SegmentedVolume voxelize(const EllipsoidPack& pack, const SynthConfig& cfg);

/// sample -> pack -> voxelize, then tops up each solid phase until its
/// fraction is within fill_tolerance of the target. With cfg.octants the
/// result is split into 8 octants (dims must be even).
std::vector<SegmentedVolume> generate(const SynthConfig& cfg);

std::vector<SegmentedVolume> split_octants(const SegmentedVolume& v);

/// Phase intensity plus Gaussian noise, rounded and clamped to [0, 255].
GrayscaleVolume grayscale_render(const SegmentedVolume& s, const std::array<double, 3>& intensity,
                                 double noise_std, std::uint64_t seed);

}  // namespace mstk
