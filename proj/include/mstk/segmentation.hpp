#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "mstk/volume.hpp"

namespace mstk {

/// Unnormalized 3D Sobel response of a unit-slope ramp. Seed bounds are given
/// in gradient units divided by this factor, so a ramp of slope c reads as c.
inline constexpr double kGradientNormalization = 32.0;

/// Euclidean norm of the three Sobel responses, raw kernel weights.
struct GradientVolume {
  Dims dims;
  double spacing = kDefaultSpacing;
  std::vector<double> values;

  double normalized(std::size_t i) const { return values[i] / kGradientNormalization; }
};

/// 3x3x3 Sobel filters ({-1,0,1} derivative, {1,2,1} smoothing on both
/// transverse axes) with edge-replicated borders. Needs every dim >= 3.
GradientVolume sobel_gradient(const GrayscaleVolume& g);

/// Intensity x normalized-gradient histogram.
struct DensityMap {
  std::vector<double> intensity_edges;  // bins + 1 entries
  std::vector<double> gradient_edges;
  std::vector<std::uint64_t> counts;    // counts[i * gradient_bins() + j]

  std::size_t intensity_bins() const { return intensity_edges.size() - 1; }
  std::size_t gradient_bins() const { return gradient_edges.size() - 1; }
  std::uint64_t count(std::size_t i, std::size_t j) const {
    return counts[i * gradient_bins() + j];
  }
  std::uint64_t total() const;
  /// Rows of (intensity_bin, gradient_bin, count) for nonzero cells.
  void write_csv(std::ostream& out) const;
};

DensityMap density_map(const GrayscaleVolume& g, const GradientVolume& grad,
                       std::size_t intensity_bins = 256, std::size_t gradient_bins = 64);

/// Seed box of one phase: intensity in [intensity_lo, intensity_hi] (closed)
/// and normalized gradient in [gradient_lo, gradient_hi) (half-open).
struct SeedBox {
  double intensity_lo = 0;
  double intensity_hi = 0;
  double gradient_lo = 0;
  double gradient_hi = 0;

  bool contains(double intensity, double gradient) const {
    return intensity >= intensity_lo && intensity <= intensity_hi && gradient >= gradient_lo &&
           gradient < gradient_hi;
  }
};

struct SeedBounds {
  std::array<SeedBox, kPhaseCount> boxes{};

  SeedBox& operator[](Phase p) { return boxes[slot(p)]; }
  const SeedBox& operator[](Phase p) const { return boxes[slot(p)]; }
  /// Throws std::invalid_argument if any two boxes intersect or a box is empty.
  void validate() const;
};

/// Markers: 0 = unseeded, otherwise the phase label.
struct SeedVolume {
  Dims dims;
  std::vector<std::uint8_t> markers;
  std::array<std::size_t, kPhaseCount> counts{};
};

class SeedingError : public std::runtime_error {
 public:
  SeedingError(Phase phase, const std::string& what) : std::runtime_error(what), phase_(phase) {}
  Phase phase() const { return phase_; }

 private:
  Phase phase_;
};

SeedVolume select_seeds(const GrayscaleVolume& g, const GradientVolume& grad,
                        const SeedBounds& bounds);

/// Marker-controlled flood over 6-neighbors, lowest gradient first. Ties are
/// resolved by insertion order; seeds enter in raster order. A voxel takes the
/// label of the neighbor that first reaches it.
SegmentedVolume watershed(const GradientVolume& grad, const SeedVolume& seeds);

struct SegmentationConfig {
  SeedBounds bounds;
  std::size_t intensity_bins = 256;
  std::size_t gradient_bins = 64;
};

struct SegmentationResult {
  SegmentedVolume labels;
  std::array<std::size_t, kPhaseCount> seed_counts{};
  DensityMap density;
};

SegmentationResult segment_pipeline(const GrayscaleVolume& g, const SegmentationConfig& config);

}  // namespace mstk
