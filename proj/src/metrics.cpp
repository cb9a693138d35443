#include "mstk/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace mstk {

namespace {

struct Offset {
  int dx, dy, dz;
  double length;
};

std::vector<Offset> neighborhood(Connectivity conn) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int k = dx * dx + dy * dy + dz * dz;
        if (k == 0 || (conn == Connectivity::Six && k != 1)) continue;
        out.push_back({dx, dy, dz, std::sqrt(static_cast<double>(k))});
      }
  return out;
}

std::uint8_t faces_of(std::uint32_t x, std::uint32_t y, std::uint32_t z, const Dims& d) {
  std::uint8_t f = 0;
  if (x == 0) f |= kXMin;
  if (x + 1 == d.nx) f |= kXMax;
  if (y == 0) f |= kYMin;
  if (y + 1 == d.ny) f |= kYMax;
  if (z == 0) f |= kZMin;
  if (z + 1 == d.nz) f |= kZMax;
  return f;
}

}  // namespace

PhaseArray<double> volume_fractions(const SegmentedVolume& s) {
  PhaseArray<std::size_t> counts{};
  for (auto v : s.data()) ++counts[v - 1];
  PhaseArray<double> theta{};
  const double n = static_cast<double>(s.size());
  for (std::size_t p = 0; p < theta.size(); ++p) theta[p] = static_cast<double>(counts[p]) / n;
  return theta;
}

std::size_t pair_slot(Phase a, Phase b) {
  if (a == b) throw std::invalid_argument("interface needs two distinct phases");
  const int lo = std::min(static_cast<int>(a), static_cast<int>(b));
  const int hi = std::max(static_cast<int>(a), static_cast<int>(b));
  return lo == 1 ? (hi == 2 ? 0 : 1) : 2;
}

std::size_t interface_face_count(const SegmentedVolume& s, Phase a, Phase b) {
  pair_slot(a, b);
  const auto la = static_cast<std::uint8_t>(a), lb = static_cast<std::uint8_t>(b);
  const Dims d = s.dims();
  const auto is_pair = [&](std::uint8_t u, std::uint8_t v) {
    return (u == la && v == lb) || (u == lb && v == la);
  };
  std::size_t count = 0;
  for (std::uint32_t z = 0; z < d.nz; ++z)
    for (std::uint32_t y = 0; y < d.ny; ++y)
      for (std::uint32_t x = 0; x < d.nx; ++x) {
        const std::uint8_t u = s.at(x, y, z);
        if (x + 1 < d.nx && is_pair(u, s.at(x + 1, y, z))) ++count;
        if (y + 1 < d.ny && is_pair(u, s.at(x, y + 1, z))) ++count;
        if (z + 1 < d.nz && is_pair(u, s.at(x, y, z + 1))) ++count;
      }
  return count;
}

double interfacial_area(const SegmentedVolume& s, Phase a, Phase b, double correction) {
  const double h = s.spacing();
  const double area = static_cast<double>(interface_face_count(s, a, b)) * h * h;
  return correction * area / (static_cast<double>(s.size()) * h * h * h);
}

ComponentLabeling connected_components(const SegmentedVolume& s, Phase phase, Connectivity conn) {
  const Dims d = s.dims();
  const auto label = static_cast<std::uint8_t>(phase);
  const auto nbrs = neighborhood(conn);
  ComponentLabeling out;
  out.component.assign(s.size(), ComponentLabeling::kNone);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < s.size(); ++start) {
    if (s[start] != label || out.component[start] != ComponentLabeling::kNone) continue;
    const auto id = static_cast<std::int32_t>(out.sizes.size());
    out.sizes.push_back(0);
    out.faces.push_back(0);
    out.component[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const auto x = static_cast<std::uint32_t>(i % d.nx);
      const auto y = static_cast<std::uint32_t>((i / d.nx) % d.ny);
      const auto z = static_cast<std::uint32_t>(i / (static_cast<std::size_t>(d.nx) * d.ny));
      ++out.sizes[id];
      out.faces[id] |= faces_of(x, y, z, d);
      for (const Offset& o : nbrs) {
        const long nx = static_cast<long>(x) + o.dx, ny = static_cast<long>(y) + o.dy,
                   nz = static_cast<long>(z) + o.dz;
        if (nx < 0 || ny < 0 || nz < 0 || nx >= d.nx || ny >= d.ny || nz >= d.nz) continue;
        const std::size_t j = s.index(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny),
                                      static_cast<std::uint32_t>(nz));
        if (s[j] == label && out.component[j] == ComponentLabeling::kNone) {
          out.component[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

std::optional<double> tortuosity_factor(const SegmentedVolume& s, Phase phase, int axis,
                                        Connectivity conn) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("axis must be 0, 1 or 2");
  const Dims d = s.dims();
  const auto label = static_cast<std::uint8_t>(phase);
  const auto nbrs = neighborhood(conn);
  const std::uint32_t n = d[axis];
  const auto coord = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    return axis == 0 ? x : (axis == 1 ? y : z);
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(s.size());
  using Entry = std::pair<double, std::size_t>;

  // Mean geodesic from layer `from` to the reachable voxels of layer `to`.
  auto sweep = [&](std::uint32_t from, std::uint32_t to) -> std::optional<double> {
    std::fill(dist.begin(), dist.end(), kInf);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (std::uint32_t z = 0; z < d.nz; ++z)
      for (std::uint32_t y = 0; y < d.ny; ++y)
        for (std::uint32_t x = 0; x < d.nx; ++x) {
          const std::size_t i = s.index(x, y, z);
          if (coord(x, y, z) == from && s[i] == label) {
            dist[i] = 0.0;
            queue.emplace(0.0, i);
          }
        }
    if (queue.empty()) return std::nullopt;

    while (!queue.empty()) {
      const auto [di, i] = queue.top();
      queue.pop();
      if (di > dist[i]) continue;
      const auto x = static_cast<std::uint32_t>(i % d.nx);
      const auto y = static_cast<std::uint32_t>((i / d.nx) % d.ny);
      const auto z = static_cast<std::uint32_t>(i / (static_cast<std::size_t>(d.nx) * d.ny));
      for (const Offset& o : nbrs) {
        const long nx = static_cast<long>(x) + o.dx, ny = static_cast<long>(y) + o.dy,
                   nz = static_cast<long>(z) + o.dz;
        if (nx < 0 || ny < 0 || nz < 0 || nx >= d.nx || ny >= d.ny || nz >= d.nz) continue;
        const std::size_t j = s.index(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny),
                                      static_cast<std::uint32_t>(nz));
        if (s[j] != label) continue;
        const double nd = di + o.length;
        if (nd < dist[j]) {
          dist[j] = nd;
          queue.emplace(nd, j);
        }
      }
    }

    double sum = 0;
    std::size_t reached = 0;
    for (std::uint32_t z = 0; z < d.nz; ++z)
      for (std::uint32_t y = 0; y < d.ny; ++y)
        for (std::uint32_t x = 0; x < d.nx; ++x) {
          const std::size_t i = s.index(x, y, z);
          if (coord(x, y, z) == to && dist[i] < kInf) {
            sum += dist[i];
            ++reached;
          }
        }
    if (reached == 0) return std::nullopt;
    return sum / static_cast<double>(reached);
  };

  // Both directions, so mirroring the volume leaves the value unchanged.
  const auto forward = sweep(0, n - 1);
  if (!forward) return std::nullopt;
  const auto backward = sweep(n - 1, 0);
  return (0.5 * (*forward + *backward) + 1.0) / static_cast<double>(n);
}

std::optional<double> PhaseTortuosity::mean() const {
  double sum = 0;
  int k = 0;
  for (const auto& a : axes)
    if (a) {
      sum += *a;
      ++k;
    }
  if (k == 0) return std::nullopt;
  return sum / k;
}

PhaseTortuosity tortuosity(const SegmentedVolume& s, Phase phase, Connectivity conn) {
  PhaseTortuosity t;
  for (int axis = 0; axis < 3; ++axis) t.axes[axis] = tortuosity_factor(s, phase, axis, conn);
  return t;
}

std::optional<double> formation_factor(double theta, std::optional<double> tau) {
  if (!tau) return std::nullopt;
  if (*tau < 1.0 || theta < 0.0 || theta > 1.0)
    throw std::invalid_argument("formation factor needs tau >= 1 and theta in [0, 1]");
  return theta / *tau;
}

TpbResult tpb_density(const SegmentedVolume& s, const ActivePolicy& policy, Connectivity conn) {
  const Dims d = s.dims();
  PhaseArray<std::vector<std::uint8_t>> active;
  for (Phase p : kPhases) {
    const ComponentLabeling c = connected_components(s, p, conn);
    auto& a = active[slot(p)];
    a.assign(s.size(), 0);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (c.component[i] != ComponentLabeling::kNone)
        a[i] = (c.faces[c.component[i]] & policy.faces[slot(p)]) != 0;
  }

  TpbResult r;
  // Edge along `axis` at layer t: its four voxels differ in the two other axes.
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    if (d[a1] < 2 || d[a2] < 2) continue;
    std::uint32_t c[3];
    for (c[axis] = 0; c[axis] < d[axis]; ++c[axis])
      for (c[a1] = 0; c[a1] + 1 < d[a1]; ++c[a1])
        for (c[a2] = 0; c[a2] + 1 < d[a2]; ++c[a2]) {
          std::size_t idx[4];
          int k = 0;
          for (std::uint32_t u = 0; u < 2; ++u)
            for (std::uint32_t w = 0; w < 2; ++w) {
              std::uint32_t q[3] = {c[0], c[1], c[2]};
              q[a1] += u;
              q[a2] += w;
              idx[k++] = s.index(q[0], q[1], q[2]);
            }
          unsigned mask = 0;
          for (std::size_t i : idx) mask |= 1u << (s[i] - 1);
          if (mask != 0b111) continue;
          ++r.total_edges;
          bool is_active = true;
          for (std::size_t i : idx) is_active = is_active && active[s[i] - 1][i];
          if (is_active) ++r.active_edges;
        }
  }
  const double h = s.spacing();
  const double volume = static_cast<double>(s.size()) * h * h * h;
  r.total_density = static_cast<double>(r.total_edges) * h / volume;
  r.active_density = static_cast<double>(r.active_edges) * h / volume;
  return r;
}

MetricsRecord metrics_report(const SegmentedVolume& s, std::string id, const MetricOptions& options) {
  MetricsRecord rec;
  rec.id = std::move(id);
  rec.dims = s.dims();
  rec.spacing = s.spacing();
  rec.theta = volume_fractions(s);
  for (Phase p : kPhases) {
    const std::size_t k = slot(p);
    if (const auto sz = particle_size(s, p)) {
      rec.d_mean[k] = sz->mean;
      rec.d_std[k] = sz->std;
    }
    const PhaseTortuosity t = tortuosity(s, p, options.geodesic_connectivity);
    rec.tau_axes[k] = t.axes;
    rec.tau[k] = t.mean();
    rec.formation[k] = formation_factor(rec.theta[k], rec.tau[k]);
  }
  for (const auto& [a, b] : kPhasePairs)
    rec.area[pair_slot(a, b)] = interfacial_area(s, a, b, options.area_correction);
  const TpbResult tpb = tpb_density(s, options.active, options.component_connectivity);
  rec.tpb_total = tpb.total_density;
  rec.tpb_active = tpb.active_density;
  return rec;
}

}  // namespace mstk
