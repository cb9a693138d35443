#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "mstk/metrics.hpp"
#include "mstk/synthgen.hpp"

using namespace mstk;

namespace {

Ellipsoid sphere(double r, std::array<double, 3> c, Phase p = Phase::Ni) {
  Ellipsoid e;
  e.center = c;
  e.semi_axes = {r, r, r};
  e.axes = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  e.phase = p;
  return e;
}

std::size_t count_label(const SegmentedVolume& s, Phase p) {
  return static_cast<std::size_t>(std::count(s.data().begin(), s.data().end(), static_cast<std::uint8_t>(p)));
}

}  // namespace

TEST_CASE("log-normal parameters reproduce the arithmetic moments") {
  const auto tight = lognormal_from_moments({0.5, 1e-9});
  CHECK(tight.mu == doctest::Approx(std::log(0.5)));
  CHECK(tight.sigma < 1e-8);
  CHECK_THROWS(lognormal_from_moments({0.5, 0.0}));
  CHECK_THROWS(lognormal_from_moments({-1, 0.1}));

  const SizeMoments m{0.55, 0.10};
  const auto ln = lognormal_from_moments(m);
  Rng rng(2024);
  const int n = 10000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::exp(ln.mu + ln.sigma * rng.normal());
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::abs(mean - m.mean) / m.mean < 0.02);
  CHECK(std::abs(sd - m.std) / m.std < 0.05);
}

TEST_CASE("sampled ellipsoids are volume preserving and oriented") {
  SynthConfig cfg;
  Rng rng(1);
  const auto es = sample_phase(cfg, Phase::YSZ, 5.0, rng);
  double total = 0;
  for (const auto& e : es) {
    CHECK(e.phase == Phase::YSZ);
    const double r = std::cbrt(e.semi_axes[0] * e.semi_axes[1] * e.semi_axes[2]);
    CHECK(e.volume() == doctest::Approx(4.0 / 3 * std::numbers::pi * r * r * r));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0;
        for (int k = 0; k < 3; ++k) dot += e.axes[i][k] * e.axes[j][k];
        CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0));
      }
    total += e.volume();
  }
  CHECK(total >= 5.0);
  CHECK(total - es.back().volume() < 5.0);
  CHECK_THROWS(sample_phase(cfg, Phase::Pore, 1.0, rng));
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.fractions = {0.3, 0.3, 0.3};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.aspect_min = 1.5;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.octants = true;
  bad.dims = {95, 96, 96};
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.overlap_threshold = 1.5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("overlap estimate") {
  Rng rng(9);
  const auto a = sphere(1.0, {0, 0, 0});
  CHECK(estimate_overlap(a, {}, 100, rng) == 0.0);
  CHECK(estimate_overlap(a, {sphere(1.0, {0, 0, 0})}, 100, rng) == 1.0);
  CHECK(estimate_overlap(a, {sphere(1.0, {2.5, 0, 0})}, 100, rng) == 0.0);
  const double d = 1.0;
  const double lens = std::numbers::pi * (4 + d) * (2 - d) * (2 - d) / 12.0;
  const double want = lens / (4.0 / 3 * std::numbers::pi);
  const double got = estimate_overlap(a, {sphere(1.0, {d, 0, 0})}, 20000, rng);
  CHECK(std::abs(got - want) / want < 0.05);
}

TEST_CASE("packing") {
  SynthConfig cfg;
  cfg.dims = {32, 32, 32};
  Rng rng(4);
  EllipsoidPack sized;
  sized.extent = {32 * cfg.spacing, 32 * cfg.spacing, 32 * cfg.spacing};
  sized.ellipsoids = {sphere(0.2, {}), sphere(0.3, {}, Phase::YSZ)};
  const auto p = pack(sized, cfg, rng);
  REQUIRE(p.ellipsoids.size() == 2);
  CHECK(p.ellipsoids[0].phase == Phase::YSZ);  // largest first
  for (const auto& e : p.ellipsoids)
    for (int k = 0; k < 3; ++k) {
      CHECK(e.center[k] >= 0);
      CHECK(e.center[k] < sized.extent[k]);
    }
  CHECK(p.ellipsoids[0].overlap == 0.0);

  sized.ellipsoids = {sphere(2.0, {})};
  CHECK_THROWS_AS(pack(sized, cfg, rng), std::invalid_argument);

  Rng r1(7), r2(7);
  sized.ellipsoids = sample_phase(cfg, Phase::Ni, 0.3, r1);
  Rng tmp(7);
  (void)sample_phase(cfg, Phase::Ni, 0.3, tmp);
  const auto p1 = pack(sized, cfg, r1);
  const auto p2 = pack(sized, cfg, tmp);
  REQUIRE(p1.ellipsoids.size() == p2.ellipsoids.size());
  for (std::size_t i = 0; i < p1.ellipsoids.size(); ++i) CHECK(p1.ellipsoids[i].center == p2.ellipsoids[i].center);
}

TEST_CASE("voxelization") {
  SynthConfig cfg;
  cfg.dims = {24, 24, 24};
  cfg.spacing = 1.0;
  EllipsoidPack p;
  p.extent = {24, 24, 24};
  CHECK(count_label(voxelize(p, cfg), Phase::Pore) == 24u * 24 * 24);

  p.ellipsoids = {sphere(8.0, {12, 12, 12})};
  const double want = 4.0 / 3 * std::numbers::pi * 512;
  const double got = static_cast<double>(count_label(voxelize(p, cfg), Phase::Ni));
  CHECK(std::abs(got - want) / want < 0.05);

  // Nearest normalized distance wins; exact ties keep the earlier ellipsoid.
  p.ellipsoids = {sphere(5.0, {12, 12, 12}, Phase::YSZ), sphere(5.0, {12, 12, 12}, Phase::Ni)};
  CHECK(count_label(voxelize(p, cfg), Phase::Ni) == 0);
  p.ellipsoids = {sphere(3.0, {8.5, 12.5, 12.5}, Phase::YSZ), sphere(3.0, {12.5, 12.5, 12.5}, Phase::Ni)};
  const auto two = voxelize(p, cfg);
  CHECK(two.at(10, 12, 12) == static_cast<std::uint8_t>(Phase::YSZ));  // tie at x = 10.5
  CHECK(two.at(11, 12, 12) == static_cast<std::uint8_t>(Phase::Ni));
  CHECK(count_label(two, Phase::Ni) < count_label(two, Phase::YSZ));

  Voxelizer v(cfg.dims, cfg.spacing);
  for (const auto& e : p.ellipsoids) v.add(e);
  CHECK(v.volume() == two);
  const auto f = v.fractions();
  CHECK(f[0] + f[1] + f[2] == doctest::Approx(1.0));
}

TEST_CASE("octant split") {
  std::vector<std::uint8_t> data(4 * 4 * 4);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(1 + i % 3);
  const SegmentedVolume s({4, 4, 4}, 0.065, data);
  const auto parts = split_octants(s);
  REQUIRE(parts.size() == 8);
  std::multiset<std::uint8_t> all, joined;
  for (auto b : s.data()) all.insert(b);
  for (const auto& p : parts) {
    CHECK(p.dims() == Dims{2, 2, 2});
    for (auto b : p.data()) joined.insert(b);
  }
  CHECK(all == joined);
  CHECK(parts[7].at(1, 1, 1) == s.at(3, 3, 3));
  CHECK(parts[1].at(0, 0, 0) == s.at(2, 0, 0));
  CHECK_THROWS(split_octants(SegmentedVolume({3, 4, 4}, 0.065, std::uint8_t{1})));

  SynthConfig cfg;
  cfg.dims = {48, 48, 48};
  cfg.octants = true;
  cfg.seed = 3;
  const auto out = generate(cfg);
  CHECK(out.size() == 8);
  for (const auto& o : out) CHECK(o.dims() == Dims{24, 24, 24});
}

TEST_CASE("generated volumes hit the target fractions") {
  SynthConfig cfg;
  cfg.dims = {64, 64, 64};
  cfg.seed = 11;
  const auto v = generate(cfg);
  REQUIRE(v.size() == 1);
  const auto f = volume_fractions(v[0]);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(f[k] - cfg.fractions[k]) <= 0.02);
  CHECK(v[0].spacing() == cfg.spacing);

  CHECK(generate(cfg).front() == v[0]);
  cfg.seed = 12;
  CHECK_FALSE(generate(cfg).front() == v[0]);

  const auto ni = particle_size(v[0], Phase::Ni).value();
  CHECK(ni.mean > 0.2);
  CHECK(ni.mean < 0.8);
}

TEST_CASE("an isolated sphere measures its diameter") {
  SynthConfig cfg;
  cfg.dims = {32, 32, 32};
  EllipsoidPack p;
  p.extent = {32 * cfg.spacing, 32 * cfg.spacing, 32 * cfg.spacing};
  p.ellipsoids = {sphere(0.275, {1.04, 1.04, 1.04})};
  const auto s = voxelize(p, cfg);
  const auto ps = particle_size(s, Phase::Ni).value();
  CHECK(std::abs(ps.mean - 0.55) / 0.55 < 0.10);
}

TEST_CASE("grayscale rendering") {
  std::vector<std::uint8_t> data(16 * 16 * 16);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(1 + (i / 7) % 3);
  const SegmentedVolume s({16, 16, 16}, 0.065, data);
  const auto clean = grayscale_render(s, {20, 128, 230}, 0, 1);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(int(clean[i]) == (s[i] == 1 ? 20 : (s[i] == 2 ? 128 : 230)));

  const auto noisy = grayscale_render(s, {20, 128, 230}, 10, 5);
  double sum[3] = {0, 0, 0};
  std::size_t n[3] = {0, 0, 0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    sum[s[i] - 1] += noisy[i];
    ++n[s[i] - 1];
  }
  CHECK(std::abs(sum[0] / n[0] - 20) < 1.0);
  CHECK(std::abs(sum[1] / n[1] - 128) < 1.0);
  CHECK(std::abs(sum[2] / n[2] - 230) < 1.0);
  CHECK(grayscale_render(s, {20, 128, 230}, 10, 5) == noisy);
  CHECK_THROWS(grayscale_render(s, {20, 128, 300}, 0, 1));
  CHECK_THROWS(grayscale_render(s, {20, 128, 230}, -1, 1));
}
