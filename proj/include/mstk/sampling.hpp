#pragma once

#include <cstdint>
#include <vector>

#include "mstk/symmetry.hpp"
#include "mstk/volume.hpp"

namespace mstk {

struct SubvolumeSample {
  Index3 origin;
  SymmetryOp op;
};

/// Draws `count` cubic windows of edge `edge` with origins uniform over the
/// valid range; with `augment`, each window also gets a uniform symmetry op.
/// The sequence is a pure function of (dims, count, edge, seed, augment).
std::vector<SubvolumeSample> plan_subvolumes(const Dims& dims, std::size_t count,
                                             std::uint32_t edge, std::uint64_t seed,
                                             bool augment);

template <VolumeKind K>
std::vector<Volume<K>> sample_subvolumes(const Volume<K>& v, std::size_t count,
                                         std::uint32_t edge, std::uint64_t seed,
                                         bool augment = false);

}  // namespace mstk
