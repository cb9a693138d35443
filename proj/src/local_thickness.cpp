#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mstk/metrics.hpp"

namespace mstk {

namespace {

// Squared Euclidean distance transform along one line (Felzenszwalb &
// Huttenlocher lower envelope of parabolas). f holds squared distances with
// +inf for "no site yet".
void edt_1d(const double* f, double* d, std::size_t n, std::vector<int>& v,
            std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double fq = f[q] + static_cast<double>(q * q);
    double s = -kInf;
    while (k >= 0) {
      const int p = v[k];
      s = (fq - (f[p] + static_cast<double>(p) * p)) / (2.0 * (static_cast<double>(q) - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = static_cast<int>(q);
    z[k] = k == 0 ? -kInf : s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double dq = static_cast<double>(q) - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

// Squared EDT of a dense 3D grid, in place. Background sites hold 0,
// foreground +inf.
void edt_3d(std::vector<double>& g, std::size_t mx, std::size_t my, std::size_t mz) {
  const std::size_t longest = std::max({mx, my, mz});
  std::vector<double> f(longest), d(longest), z(longest + 1);
  std::vector<int> v(longest);
  const std::size_t stride[3] = {1, mx, mx * my};
  const std::size_t extent[3] = {mx, my, mz};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = extent[axis];
    const std::size_t st = stride[axis];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (std::size_t u = 0; u < extent[a1]; ++u)
      for (std::size_t w = 0; w < extent[a2]; ++w) {
        const std::size_t base = u * stride[a1] + w * stride[a2];
        for (std::size_t q = 0; q < n; ++q) f[q] = g[base + q * st];
        edt_1d(f.data(), d.data(), n, v, z);
        for (std::size_t q = 0; q < n; ++q) g[base + q * st] = d[q];
      }
  }
}

}  // namespace

std::vector<double> local_thickness(const SegmentedVolume& s, Phase phase) {
  const Dims dims = s.dims();
  const auto label = static_cast<std::uint8_t>(phase);
  std::vector<double> thickness(dims.count(), 0.0);
  if (std::none_of(s.data().begin(), s.data().end(), [&](std::uint8_t v) { return v == label; }))
    return thickness;

  // Half-voxel lattice with a one-voxel ring outside the domain: voxel k
  // (k = -1 .. n) sits at lattice index 2k + 2, odd indices are face
  // midpoints. Sites are the centers of non-phase voxels, and every voxel
  // outside the domain counts as non-phase.
  const std::size_t mx = 2 * dims.nx + 3, my = 2 * dims.ny + 3, mz = 2 * dims.nz + 3;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(mx * my * mz, kInf);
  const auto voxel_of = [](std::size_t j, long& k) {
    if (j % 2) return false;
    k = static_cast<long>(j / 2) - 1;
    return true;
  };
  {
    std::size_t idx = 0;
    for (std::size_t jz = 0; jz < mz; ++jz) {
      long kz = 0;
      const bool cz = voxel_of(jz, kz);
      for (std::size_t jy = 0; jy < my; ++jy) {
        long ky = 0;
        const bool cy = voxel_of(jy, ky);
        for (std::size_t jx = 0; jx < mx; ++jx, ++idx) {
          long kx = 0;
          if (!cz || !cy || !voxel_of(jx, kx)) continue;
          const bool outside = kx < 0 || ky < 0 || kz < 0 || kx >= static_cast<long>(dims.nx) ||
                               ky >= static_cast<long>(dims.ny) || kz >= static_cast<long>(dims.nz);
          if (outside || s.at(static_cast<std::uint32_t>(kx), static_cast<std::uint32_t>(ky),
                              static_cast<std::uint32_t>(kz)) != label)
            dist[idx] = 0.0;
        }
      }
    }
  }
  edt_3d(dist, mx, my, mz);

  // Squared distances are integers in half-voxel units.
  std::vector<std::int64_t> r2(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) r2[i] = std::llround(dist[i]);

  // A center c with site distance d carries the digitized ball of voxel
  // centers strictly closer than d. Its diameter is its extent in voxels
  // along the shortest axis, so a ball filling an n-voxel gap measures n
  // whatever the parity of its center. Keep only
  // balls not contained in a neighbor's ball: b(c) lies inside b(c') when
  // d' >= d + |c - c'|, tested exactly on squared integers.
  const auto contained = [](std::int64_t r2c, std::int64_t r2n, std::int64_t step2) {
    const std::int64_t t = r2n - r2c - step2;
    return t >= 0 && t * t >= 4 * r2c * step2;
  };
  struct Center {
    std::int64_t r2;
    std::uint32_t jx, jy, jz;
    int diameter;
  };
  // Lattice offsets of voxel centers from a coordinate of parity p are
  // p, p + 2, ...; the nearest one contributes p^2 = p.
  const auto extent = [](std::int64_t r2, int p, int others) {
    const std::int64_t room = r2 - others;
    int count = 0;
    for (std::int64_t off = p; off * off < room; off += 2) count += off ? 2 : 1;
    return count;
  };
  std::vector<Center> centers;
  for (std::size_t jz = 1; jz + 1 < mz; ++jz)
    for (std::size_t jy = 1; jy + 1 < my; ++jy)
      for (std::size_t jx = 1; jx + 1 < mx; ++jx) {
        const std::size_t i = (jz * my + jy) * mx + jx;
        // d <= 1/2 voxel (1 lattice unit) holds no voxel center of the phase.
        if (r2[i] <= 1) continue;
        bool redundant = false;
        for (int dz = -1; dz <= 1 && !redundant; ++dz)
          for (int dy = -1; dy <= 1 && !redundant; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (!dx && !dy && !dz) continue;
              const std::size_t n = static_cast<std::size_t>(
                  static_cast<std::ptrdiff_t>(i) +
                  (dz * static_cast<std::ptrdiff_t>(my) + dy) * static_cast<std::ptrdiff_t>(mx) + dx);
              if (contained(r2[i], r2[n], dx * dx + dy * dy + dz * dz)) {
                redundant = true;
                break;
              }
            }
        if (redundant) continue;
        const int px = static_cast<int>(jx % 2), py = static_cast<int>(jy % 2),
                  pz = static_cast<int>(jz % 2);
        const int diameter = std::min({extent(r2[i], px, py + pz), extent(r2[i], py, px + pz),
                                       extent(r2[i], pz, px + py)});
        if (diameter > 0)
          centers.push_back({r2[i], static_cast<std::uint32_t>(jx), static_cast<std::uint32_t>(jy),
                             static_cast<std::uint32_t>(jz), diameter});
      }

  // Paint each ball onto the voxel centers strictly inside it. Voxel k has
  // lattice coordinate 2k + 2.
  std::vector<int> best(dims.count(), 0);
  const auto voxel_span = [](std::uint32_t jc, std::uint32_t n, std::int64_t reach2,
                             std::int64_t& lo, std::int64_t& hi) {
    // Voxels k with (2k + 2 - jc)^2 < reach2.
    const double reach = std::sqrt(static_cast<double>(reach2));
    lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((jc - reach - 2) / 2.0)));
    hi = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::ceil((jc + reach - 2) / 2.0)));
  };
  for (const Center& c : centers) {
    std::int64_t z_lo, z_hi;
    voxel_span(c.jz, dims.nz, c.r2, z_lo, z_hi);
    for (std::int64_t z = z_lo; z <= z_hi; ++z) {
      const std::int64_t dz = 2 * z + 2 - c.jz;
      const std::int64_t rem_z = c.r2 - dz * dz;
      if (rem_z <= 0) continue;
      std::int64_t y_lo, y_hi;
      voxel_span(c.jy, dims.ny, rem_z, y_lo, y_hi);
      for (std::int64_t y = y_lo; y <= y_hi; ++y) {
        const std::int64_t dy = 2 * y + 2 - c.jy;
        const std::int64_t rem_y = rem_z - dy * dy;
        if (rem_y <= 0) continue;
        std::int64_t x_lo, x_hi;
        voxel_span(c.jx, dims.nx, rem_y, x_lo, x_hi);
        int* row = best.data() + s.index(0, static_cast<std::uint32_t>(y),
                                                  static_cast<std::uint32_t>(z));
        for (std::int64_t x = x_lo; x <= x_hi; ++x) {
          const std::int64_t dx = 2 * x + 2 - c.jx;
          if (dx * dx < rem_y && row[x] < c.diameter) row[x] = c.diameter;
        }
      }
    }
  }

  for (std::size_t i = 0; i < best.size(); ++i)
    if (s[i] == label) thickness[i] = best[i] * s.spacing();
  return thickness;
}

std::optional<SizeStats> size_stats(const SegmentedVolume& s, Phase phase,
                                    const std::vector<double>& thickness) {
  const auto label = static_cast<std::uint8_t>(phase);
  SizeStats st;
  double sum = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == label) {
      sum += thickness[i];
      ++st.voxels;
    }
  if (st.voxels == 0) return std::nullopt;
  st.mean = sum / static_cast<double>(st.voxels);
  double ss = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == label) ss += (thickness[i] - st.mean) * (thickness[i] - st.mean);
  st.std = std::sqrt(ss / static_cast<double>(st.voxels));
  return st;
}

std::optional<SizeStats> particle_size(const SegmentedVolume& s, Phase phase) {
  return size_stats(s, phase, local_thickness(s, phase));
}

}  // namespace mstk
