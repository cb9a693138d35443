#pragma once

// Deliberately naive reference implementations. They share no code with the
// library beyond the volume type and trade speed for obviousness.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "mstk/rng.hpp"
#include "mstk/volume.hpp"

namespace oracle {

using mstk::Dims;
using mstk::SegmentedVolume;

struct P3 {
  int x, y, z;
};

inline P3 coords(const Dims& d, std::size_t i) {
  return {static_cast<int>(i % d.nx), static_cast<int>((i / d.nx) % d.ny),
          static_cast<int>(i / (static_cast<std::size_t>(d.nx) * d.ny))};
}

inline SegmentedVolume random_three_phase(Dims d, mstk::Rng& rng, double spacing = 0.065) {
  std::vector<std::uint8_t> v(d.count());
  for (auto& x : v) x = static_cast<std::uint8_t>(1 + rng.uniform_index(3));
  return SegmentedVolume(d, spacing, std::move(v));
}

// Every unordered voxel pair at Manhattan distance 1 with labels {a, b}.
inline std::size_t face_count(const SegmentedVolume& s, int a, int b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const P3 p = coords(s.dims(), i), q = coords(s.dims(), j);
      if (std::abs(p.x - q.x) + std::abs(p.y - q.y) + std::abs(p.z - q.z) != 1) continue;
      if ((s[i] == a && s[j] == b) || (s[i] == b && s[j] == a)) ++n;
    }
  return n;
}

// Union-find over all same-phase voxel pairs within the neighborhood.
struct Components {
  std::vector<int> root;  // -1 outside the phase, else canonical voxel index
  std::size_t count = 0;
  std::vector<unsigned> faces;  // by root voxel: face bits touched
};

inline Components components(const SegmentedVolume& s, int phase, int conn) {
  const Dims d = s.dims();
  std::vector<int> parent(s.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      if (s[i] != phase || s[j] != phase) continue;
      const P3 p = coords(d, i), q = coords(d, j);
      const int dx = std::abs(p.x - q.x), dy = std::abs(p.y - q.y), dz = std::abs(p.z - q.z);
      const bool adjacent = conn == 6 ? dx + dy + dz == 1 : std::max({dx, dy, dz}) == 1;
      if (adjacent) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
    }
  Components c;
  c.root.assign(s.size(), -1);
  c.faces.assign(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != phase) continue;
    const int r = find(static_cast<int>(i));
    c.root[i] = r;
    if (r == static_cast<int>(i)) ++c.count;
    const P3 p = coords(d, i);
    unsigned f = 0;
    if (p.x == 0) f |= 1;
    if (p.x == static_cast<int>(d.nx) - 1) f |= 2;
    if (p.y == 0) f |= 4;
    if (p.y == static_cast<int>(d.ny) - 1) f |= 8;
    if (p.z == 0) f |= 16;
    if (p.z == static_cast<int>(d.nz) - 1) f |= 32;
    c.faces[r] |= f;
  }
  return c;
}

// Walks every edge of the voxel-corner lattice and gathers the voxels whose
// closed cubes contain the whole edge.
struct TpbCounts {
  std::size_t total = 0;
  std::size_t active = 0;
};

inline TpbCounts tpb(const SegmentedVolume& s, unsigned policy_faces = 0x3f, int conn = 26) {
  const Dims d = s.dims();
  std::array<Components, 3> comp = {components(s, 1, conn), components(s, 2, conn),
                                    components(s, 3, conn)};
  auto voxel_active = [&](std::size_t i) {
    const Components& c = comp[s[i] - 1];
    return (c.faces[c.root[i]] & policy_faces) != 0;
  };
  TpbCounts out;
  const int X = static_cast<int>(d.nx), Y = static_cast<int>(d.ny), Z = static_cast<int>(d.nz);
  for (int vz = 0; vz <= Z; ++vz)
    for (int vy = 0; vy <= Y; ++vy)
      for (int vx = 0; vx <= X; ++vx)
        for (int axis = 0; axis < 3; ++axis) {
          int e[3] = {vx, vy, vz};
          e[axis] += 1;  // edge from (vx,vy,vz) to e
          if (e[0] > X || e[1] > Y || e[2] > Z) continue;
          std::vector<std::size_t> touching;
          for (int z = 0; z < Z; ++z)
            for (int y = 0; y < Y; ++y)
              for (int x = 0; x < X; ++x) {
                // Cube [x, x+1] x ... must contain both endpoints.
                const bool a = vx >= x && vx <= x + 1 && vy >= y && vy <= y + 1 && vz >= z &&
                               vz <= z + 1;
                const bool b = e[0] >= x && e[0] <= x + 1 && e[1] >= y && e[1] <= y + 1 &&
                               e[2] >= z && e[2] <= z + 1;
                if (a && b) touching.push_back(s.index(x, y, z));
              }
          if (touching.size() != 4) continue;
          bool seen[3] = {false, false, false};
          for (auto i : touching) seen[s[i] - 1] = true;
          if (!(seen[0] && seen[1] && seen[2])) continue;
          ++out.total;
          if (std::all_of(touching.begin(), touching.end(), voxel_active)) ++out.active;
        }
  return out;
}

// Floyd-Warshall over the phase voxels, then the same convention as the
// library: (mean of the two directional outlet means + 1) / n.
inline std::optional<double> tortuosity(const SegmentedVolume& s, int phase, int axis, int conn) {
  const Dims d = s.dims();
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] == phase) nodes.push_back(i);
  const std::size_t m = nodes.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(m * m, inf);
  for (std::size_t a = 0; a < m; ++a) {
    dist[a * m + a] = 0;
    for (std::size_t b = 0; b < m; ++b) {
      const P3 p = coords(d, nodes[a]), q = coords(d, nodes[b]);
      const int dx = std::abs(p.x - q.x), dy = std::abs(p.y - q.y), dz = std::abs(p.z - q.z);
      const int k = dx * dx + dy * dy + dz * dz;
      const bool adjacent = conn == 6 ? k == 1 : (k > 0 && std::max({dx, dy, dz}) == 1);
      if (adjacent) dist[a * m + b] = std::sqrt(static_cast<double>(k));
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        dist[a * m + b] = std::min(dist[a * m + b], dist[a * m + k] + dist[k * m + b]);
  auto along = [&](std::size_t i) {
    const P3 p = coords(d, i);
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  };
  const int n = static_cast<int>(d[axis]);
  auto direction = [&](int from, int to) -> std::optional<double> {
    double sum = 0;
    std::size_t reached = 0;
    for (std::size_t b = 0; b < m; ++b) {
      if (along(nodes[b]) != to) continue;
      double best = inf;
      for (std::size_t a = 0; a < m; ++a)
        if (along(nodes[a]) == from) best = std::min(best, dist[a * m + b]);
      if (best < inf) {
        sum += best;
        ++reached;
      }
    }
    if (reached == 0) return std::nullopt;
    return sum / static_cast<double>(reached);
  };
  const auto fwd = direction(0, n - 1), bwd = direction(n - 1, 0);
  if (!fwd || !bwd) return std::nullopt;
  return ((*fwd + *bwd) / 2 + 1.0) / n;
}

// Inscribed digitized balls, exhaustively: every half-voxel lattice point
// is a candidate center; its ball is the set of voxel centers strictly
// closer than the nearest non-phase voxel center (outside the domain counts
// as non-phase); its diameter is the ball's smallest axis extent in voxels.
// Coordinates are doubled so everything stays integral.
inline std::vector<int> local_thickness_voxels(const SegmentedVolume& s, int phase) {
  const Dims d = s.dims();
  const int X = static_cast<int>(d.nx), Y = static_cast<int>(d.ny), Z = static_cast<int>(d.nz);
  auto inside = [&](int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < X && y < Y && z < Z;
  };
  // Non-phase voxel centers, including one ring beyond the domain (farther
  // ones are never nearest to a center inside the domain).
  std::vector<P3> sites;
  for (int z = -1; z <= Z; ++z)
    for (int y = -1; y <= Y; ++y)
      for (int x = -1; x <= X; ++x)
        if (!inside(x, y, z) || s.at(x, y, z) != phase) sites.push_back({2 * x + 1, 2 * y + 1, 2 * z + 1});
  std::vector<int> best(s.size(), 0);
  for (int cz = 1; cz <= 2 * Z - 1; ++cz)
    for (int cy = 1; cy <= 2 * Y - 1; ++cy)
      for (int cx = 1; cx <= 2 * X - 1; ++cx) {
        long r2 = std::numeric_limits<long>::max();
        for (const P3& q : sites) {
          const long dx = q.x - cx, dy = q.y - cy, dz = q.z - cz;
          r2 = std::min(r2, dx * dx + dy * dy + dz * dz);
        }
        int lo[3] = {1 << 20, 1 << 20, 1 << 20}, hi[3] = {-1, -1, -1};
        std::vector<std::size_t> covered;
        for (int z = 0; z < Z; ++z)
          for (int y = 0; y < Y; ++y)
            for (int x = 0; x < X; ++x) {
              const long dx = 2 * x + 1 - cx, dy = 2 * y + 1 - cy, dz = 2 * z + 1 - cz;
              if (dx * dx + dy * dy + dz * dz >= r2) continue;
              covered.push_back(s.index(x, y, z));
              const int c[3] = {x, y, z};
              for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], c[a]);
                hi[a] = std::max(hi[a], c[a]);
              }
            }
        if (covered.empty()) continue;
        const int diameter = std::min({hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1});
        for (auto i : covered) best[i] = std::max(best[i], diameter);
      }
  return best;
}

// Priority flood with a linear scan for the minimum (priority, insertion).
inline std::vector<std::uint8_t> watershed(const Dims& d, const std::vector<double>& height,
                                           const std::vector<std::uint8_t>& seeds) {
  struct Entry {
    double h;
    std::size_t order;
    std::size_t voxel;
  };
  std::vector<std::uint8_t> label = seeds;
  std::vector<Entry> open;
  std::size_t order = 0;
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i]) open.push_back({height[i], order++, i});
  while (!open.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < open.size(); ++k)
      if (open[k].h < open[best].h || (open[k].h == open[best].h && open[k].order < open[best].order))
        best = k;
    const std::size_t i = open[best].voxel;
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(best));
    const P3 p = coords(d, i);
    const int steps[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    for (const auto& st : steps) {
      const int x = p.x + st[0], y = p.y + st[1], z = p.z + st[2];
      if (x < 0 || y < 0 || z < 0 || x >= static_cast<int>(d.nx) || y >= static_cast<int>(d.ny) ||
          z >= static_cast<int>(d.nz))
        continue;
      const std::size_t j = (static_cast<std::size_t>(z) * d.ny + y) * d.nx + x;
      if (label[j]) continue;
      label[j] = label[i];
      open.push_back({height[j], order++, j});
    }
  }
  return label;
}

// Direct convolution with the explicit 27-tap Sobel kernels.
inline std::vector<double> sobel(const mstk::GrayscaleVolume& g) {
  const Dims d = g.dims();
  auto clampi = [](int v, int n) { return std::clamp(v, 0, n - 1); };
  std::vector<double> out(g.size());
  for (int z = 0; z < static_cast<int>(d.nz); ++z)
    for (int y = 0; y < static_cast<int>(d.ny); ++y)
      for (int x = 0; x < static_cast<int>(d.nx); ++x) {
        double gx = 0, gy = 0, gz = 0;
        for (int k = -1; k <= 1; ++k)
          for (int j = -1; j <= 1; ++j)
            for (int i = -1; i <= 1; ++i) {
              const double v = g.at(clampi(x + i, d.nx), clampi(y + j, d.ny), clampi(z + k, d.nz));
              const int si = 2 - std::abs(i), sj = 2 - std::abs(j), sk = 2 - std::abs(k);
              gx += i * sj * sk * v;
              gy += j * si * sk * v;
              gz += k * si * sj * v;
            }
        out[g.index(x, y, z)] = std::sqrt(gx * gx + gy * gy + gz * gz);
      }
  return out;
}

// Type-7 quantile by the textbook formula on a freshly sorted copy.
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace oracle
