#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mstk/volume.hpp"

namespace mstk {

/// Element of the full octahedral group (order 48) acting on a cubic volume.
///
/// Enumeration: the 24 proper rotations are the signed permutation matrices
/// with determinant +1, sorted in descending lexicographic order of their
/// row-major entries (so index 0 is the identity). Index k + 24 is rotation k
/// composed with point inversion, i.e. the matrix -R_k.
class SymmetryOp {
 public:
  static constexpr int kOrder = 48;
  using Matrix = std::array<std::array<int, 3>, 3>;

  constexpr SymmetryOp() = default;
  explicit SymmetryOp(int index);

  int index() const { return index_; }
  const Matrix& matrix() const;
  bool is_identity() const { return index_ == 0; }

  SymmetryOp inverse() const;
  /// Returns the op equivalent to applying `first` and then `second`.
  static SymmetryOp compose(SymmetryOp first, SymmetryOp second);

  /// Maps a voxel coordinate of an n^3 volume to its image.
  Index3 map(Index3 c, std::uint32_t n) const;

  friend bool operator==(SymmetryOp a, SymmetryOp b) { return a.index_ == b.index_; }

 private:
  int index_ = 0;
};

template <VolumeKind K>
Volume<K> apply_symmetry(const Volume<K>& v, SymmetryOp op);

/// Voxel permutation of an n^3 volume: result[i] is the destination index of
/// source voxel i.
std::vector<std::size_t> symmetry_permutation(SymmetryOp op, std::uint32_t n);

}  // namespace mstk
