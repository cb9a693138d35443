#include "mstk/symmetry.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "mstk/rng.hpp"
#include "mstk/sampling.hpp"

namespace mstk {

namespace {

using Matrix = SymmetryOp::Matrix;

int determinant(const Matrix& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

std::array<Matrix, SymmetryOp::kOrder> build_table() {
  std::vector<Matrix> rotations;
  std::array<int, 3> perm = {0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Matrix m{};
      for (int row = 0; row < 3; ++row) m[row][perm[row]] = (signs >> row) & 1 ? -1 : 1;
      if (determinant(m) == 1) rotations.push_back(m);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(rotations.begin(), rotations.end(), std::greater<>());
  std::array<Matrix, SymmetryOp::kOrder> table{};
  for (std::size_t k = 0; k < 24; ++k) {
    table[k] = rotations[k];
    for (auto& row : rotations[k])
      for (int& e : row) e = -e;
    table[k + 24] = rotations[k];
  }
  return table;
}

const std::array<Matrix, SymmetryOp::kOrder>& table() {
  static const auto t = build_table();
  return t;
}

int find(const Matrix& m) {
  const auto& t = table();
  for (int k = 0; k < SymmetryOp::kOrder; ++k)
    if (t[k] == m) return k;
  throw std::logic_error("matrix outside the octahedral group");
}

}  // namespace

SymmetryOp::SymmetryOp(int index) : index_(index) {
  if (index < 0 || index >= kOrder)
    throw std::out_of_range("symmetry op index must lie in [0, 47]");
}

const SymmetryOp::Matrix& SymmetryOp::matrix() const { return table()[index_]; }

SymmetryOp SymmetryOp::inverse() const {
  Matrix t{};
  const Matrix& m = matrix();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
  return SymmetryOp(find(t));
}

SymmetryOp SymmetryOp::compose(SymmetryOp first, SymmetryOp second) {
  return SymmetryOp(find(multiply(second.matrix(), first.matrix())));
}

Index3 SymmetryOp::map(Index3 c, std::uint32_t n) const {
  // Work in doubled, centered coordinates so the cube center is the origin.
  const long long off = static_cast<long long>(n) - 1;
  const long long u[3] = {2LL * c.x - off, 2LL * c.y - off, 2LL * c.z - off};
  const Matrix& m = matrix();
  std::uint32_t out[3];
  for (int i = 0; i < 3; ++i) {
    const long long w = m[i][0] * u[0] + m[i][1] * u[1] + m[i][2] * u[2];
    out[i] = static_cast<std::uint32_t>((w + off) / 2);
  }
  return {out[0], out[1], out[2]};
}

std::vector<std::size_t> symmetry_permutation(SymmetryOp op, std::uint32_t n) {
  std::vector<std::size_t> dest(static_cast<std::size_t>(n) * n * n);
  std::size_t i = 0;
  for (std::uint32_t z = 0; z < n; ++z)
    for (std::uint32_t y = 0; y < n; ++y)
      for (std::uint32_t x = 0; x < n; ++x, ++i) {
        const Index3 t = op.map({x, y, z}, n);
        dest[i] = (static_cast<std::size_t>(t.z) * n + t.y) * n + t.x;
      }
  return dest;
}

template <VolumeKind K>
Volume<K> apply_symmetry(const Volume<K>& v, SymmetryOp op) {
  if (!v.dims().cubic())
    throw VolumeError("symmetry ops need a cubic volume, got " + to_string(v.dims()));
  if (op.is_identity()) return v;
  const auto dest = symmetry_permutation(op, v.dims().nx);
  std::vector<std::uint8_t> out(v.size());
  for (std::size_t i = 0; i < dest.size(); ++i) out[dest[i]] = v[i];
  return Volume<K>(v.dims(), v.spacing(), std::move(out));
}

template GrayscaleVolume apply_symmetry(const GrayscaleVolume&, SymmetryOp);
template SegmentedVolume apply_symmetry(const SegmentedVolume&, SymmetryOp);

std::vector<SubvolumeSample> plan_subvolumes(const Dims& dims, std::size_t count,
                                             std::uint32_t edge, std::uint64_t seed,
                                             bool augment) {
  if (edge == 0 || edge > dims.nx || edge > dims.ny || edge > dims.nz)
    throw VolumeError("subvolume edge " + std::to_string(edge) + " does not fit in " +
                      to_string(dims));
  Rng rng(seed);
  std::vector<SubvolumeSample> plan;
  plan.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SubvolumeSample s;
    s.origin.x = static_cast<std::uint32_t>(rng.uniform_index(dims.nx - edge + 1));
    s.origin.y = static_cast<std::uint32_t>(rng.uniform_index(dims.ny - edge + 1));
    s.origin.z = static_cast<std::uint32_t>(rng.uniform_index(dims.nz - edge + 1));
    if (augment) s.op = SymmetryOp(static_cast<int>(rng.uniform_index(SymmetryOp::kOrder)));
    plan.push_back(s);
  }
  return plan;
}

template <VolumeKind K>
std::vector<Volume<K>> sample_subvolumes(const Volume<K>& v, std::size_t count,
                                         std::uint32_t edge, std::uint64_t seed, bool augment) {
  std::vector<Volume<K>> out;
  out.reserve(count);
  for (const auto& s : plan_subvolumes(v.dims(), count, edge, seed, augment))
    out.push_back(apply_symmetry(crop(v, s.origin, {edge, edge, edge}), s.op));
  return out;
}

template std::vector<GrayscaleVolume> sample_subvolumes(const GrayscaleVolume&, std::size_t,
                                                        std::uint32_t, std::uint64_t, bool);
template std::vector<SegmentedVolume> sample_subvolumes(const SegmentedVolume&, std::size_t,
                                                        std::uint32_t, std::uint64_t, bool);

}  // namespace mstk
