#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mstk/volume.hpp"

namespace mstk {

template <class T>
using PhaseArray = std::array<T, kPhaseCount>;

enum class Connectivity : int { Six = 6, TwentySix = 26 };

/// Domain face bits used for boundary-touch flags and activity policies.
enum Face : std::uint8_t {
  kXMin = 1 << 0,
  kXMax = 1 << 1,
  kYMin = 1 << 2,
  kYMax = 1 << 3,
  kZMin = 1 << 4,
  kZMax = 1 << 5,
  kAnyFace = 0x3f,
};

PhaseArray<double> volume_fractions(const SegmentedVolume& s);

// --- inscribed-sphere size -------------------------------------------------

/// Per-voxel diameter (um) of the largest digitized ball inside the phase
/// that covers the voxel; zero outside the phase. A ball is the set of voxel
/// centers strictly closer to its center than the nearest non-phase voxel
/// center (voxels beyond the domain count as non-phase). Centers range over
/// the half-voxel lattice; the diameter is the ball's extent in voxels along
/// its shortest axis, so an isolated voxel measures 1 and an n-voxel slab n.
std::vector<double> local_thickness(const SegmentedVolume& s, Phase phase);

struct SizeStats {
  double mean = 0;  // um
  double std = 0;   // population std over phase voxels
  std::size_t voxels = 0;
};

/// Volume-weighted diameter statistics; nullopt for an absent phase.
std::optional<SizeStats> particle_size(const SegmentedVolume& s, Phase phase);
std::optional<SizeStats> size_stats(const SegmentedVolume& s, Phase phase,
                                    const std::vector<double>& thickness);

// --- interfaces --------------------------------------------------------------

/// Number of voxel faces with label a on one side and b on the other.
std::size_t interface_face_count(const SegmentedVolume& s, Phase a, Phase b);
/// Interfacial area per unit volume (um^2/um^3), times `correction`.
double interfacial_area(const SegmentedVolume& s, Phase a, Phase b, double correction = 1.0);

/// Slot of an unordered phase pair: (pore,Ni)=0, (pore,YSZ)=1, (Ni,YSZ)=2.
std::size_t pair_slot(Phase a, Phase b);
inline constexpr std::array<std::array<Phase, 2>, 3> kPhasePairs = {
    {{Phase::Pore, Phase::Ni}, {Phase::Pore, Phase::YSZ}, {Phase::Ni, Phase::YSZ}}};

// --- connectivity ----------------------------------------------------------

struct ComponentLabeling {
  static constexpr std::int32_t kNone = -1;
  std::vector<std::int32_t> component;  // per voxel, kNone outside the phase
  std::vector<std::size_t> sizes;       // per component
  std::vector<std::uint8_t> faces;      // per component, Face bits touched

  std::size_t count() const { return sizes.size(); }
};

/// Components numbered in raster order of their first voxel.
ComponentLabeling connected_components(const SegmentedVolume& s, Phase phase,
                                       Connectivity conn = Connectivity::TwentySix);

// --- transport -------------------------------------------------------------

/// Geodesic tortuosity along one axis (0=x, 1=y, 2=z): the within-phase
/// shortest path from any inlet-face voxel to each reachable outlet-face
/// voxel, averaged over reachable outlet voxels. The average is taken in
/// both directions (each face serving once as inlet) and their mean, plus
/// one voxel for the two half-voxels at the faces, is divided by the domain
/// length. Step lengths are Euclidean (1, sqrt 2, sqrt 3). nullopt when the
/// phase does not percolate along the axis.
std::optional<double> tortuosity_factor(const SegmentedVolume& s, Phase phase, int axis,
                                        Connectivity conn = Connectivity::TwentySix);

struct PhaseTortuosity {
  std::array<std::optional<double>, 3> axes;
  /// Mean over the percolating axes; nullopt if none percolates.
  std::optional<double> mean() const;
};

PhaseTortuosity tortuosity(const SegmentedVolume& s, Phase phase,
                           Connectivity conn = Connectivity::TwentySix);

/// K = theta / tau; non-percolating stays non-percolating.
std::optional<double> formation_factor(double theta, std::optional<double> tau);

// --- triple phase boundary ---------------------------------------------------

/// Faces that make a component "active", per phase. The default counts a
/// network as active if it touches any domain face.
struct ActivePolicy {
  PhaseArray<std::uint8_t> faces = {kAnyFace, kAnyFace, kAnyFace};
};

struct TpbResult {
  std::size_t total_edges = 0;
  std::size_t active_edges = 0;
  double total_density = 0;   // um / um^3
  double active_density = 0;
};

/// A voxel edge with four neighboring voxels is a TPB segment when those
/// voxels carry all three phases. It is active when, for every phase, each
/// of its adjacent voxels of that phase lies in a component touching one of
/// the policy faces.
TpbResult tpb_density(const SegmentedVolume& s, const ActivePolicy& policy = {},
                      Connectivity conn = Connectivity::TwentySix);

// --- full record -------------------------------------------------------------

struct MetricOptions {
  Connectivity component_connectivity = Connectivity::TwentySix;
  Connectivity geodesic_connectivity = Connectivity::TwentySix;
  ActivePolicy active;
  double area_correction = 1.0;
};

struct MetricsRecord {
  std::string id;
  Dims dims;
  double spacing = kDefaultSpacing;
  PhaseArray<double> theta{};
  PhaseArray<std::optional<double>> d_mean;
  PhaseArray<std::optional<double>> d_std;
  PhaseArray<std::array<std::optional<double>, 3>> tau_axes;
  PhaseArray<std::optional<double>> tau;
  PhaseArray<std::optional<double>> formation;
  std::array<double, 3> area{};  // by pair_slot
  double tpb_total = 0;
  double tpb_active = 0;

  bool percolating(Phase p) const { return tau[slot(p)].has_value(); }
};

MetricsRecord metrics_report(const SegmentedVolume& s, std::string id = {},
                             const MetricOptions& options = {});

}  // namespace mstk
