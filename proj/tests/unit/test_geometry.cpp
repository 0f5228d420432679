#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "teegi/geometry.hpp"

using namespace teegi;

namespace {

constexpr double kPi = std::numbers::pi;

ScalpPoint random_hemisphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  while (true) {
    ScalpPoint p{g(rng), g(rng), std::abs(g(rng))};
    const double n = norm(p);
    if (n < 1e-6) continue;
    return {p.x / n, p.y / n, p.z / n};
  }
}

}  // namespace

TEST(Lattice, DefaultSizeIsUnitUpperHemisphere) {
  const auto lat = generate_lattice(402);
  ASSERT_EQ(lat.size(), 402u);
  for (const auto& p : lat.points()) {
    EXPECT_NEAR(norm(p), 1.0, 1e-12);
    EXPECT_GE(p.z, 0.0);
  }
}

TEST(Lattice, SinglePointIsVertex) {
  const auto lat = generate_lattice(1);
  ASSERT_EQ(lat.size(), 1u);
  EXPECT_EQ(lat[0], (ScalpPoint{0, 0, 1}));
}

TEST(Lattice, ZeroIsRejected) { EXPECT_THROW(generate_lattice(0), std::invalid_argument); }

TEST(Lattice, MinimumSpacingByExhaustiveScan) {
  const auto lat = generate_lattice(402);
  double best = 10.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    for (std::size_t j = i + 1; j < lat.size(); ++j) {
      const auto& a = lat[i];
      const auto& b = lat[j];
      // chord length -> angle, independent of the library's distance routine
      const double chord = std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
      best = std::min(best, 2.0 * std::asin(chord / 2.0));
    }
  }
  EXPECT_GE(best, 0.05);
}

TEST(Lattice, Deterministic) {
  const auto a = generate_lattice(402);
  const auto b = generate_lattice(402);
  EXPECT_EQ(a.points(), b.points());
}

TEST(Geodesic, Examples) {
  const ScalpPoint v{0, 0, 1}, x{1, 0, 0}, nx{-1, 0, 0};
  EXPECT_DOUBLE_EQ(geodesic_distance(v, v), 0.0);
  EXPECT_NEAR(geodesic_distance(x, v), kPi / 2, 1e-15);
  EXPECT_NEAR(geodesic_distance(x, nx), kPi, 1e-15);
}

TEST(Geodesic, RejectsNonUnit) {
  EXPECT_THROW(geodesic_distance({0, 0, 1.01}, {0, 0, 1}), std::invalid_argument);
  EXPECT_THROW(geodesic_distance({0, 0, 1}, {0.5, 0, 0.5}), std::invalid_argument);
}

TEST(Geodesic, MetricProperties) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_hemisphere_point(rng);
    const auto b = random_hemisphere_point(rng);
    const auto c = random_hemisphere_point(rng);
    const double ab = geodesic_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, kPi);
    EXPECT_DOUBLE_EQ(ab, geodesic_distance(b, a));
    EXPECT_LE(ab, geodesic_distance(a, c) + geodesic_distance(c, b) + 1e-12);
    EXPECT_NEAR(geodesic_distance(mirror(a), mirror(b)), ab, 1e-12);
  }
}

TEST(Projection, Examples) {
  auto p = azimuthal_projection({0, 0, 1});
  EXPECT_DOUBLE_EQ(p.u, 0.0);
  EXPECT_DOUBLE_EQ(p.v, 0.0);
  p = azimuthal_projection({1, 0, 0});
  EXPECT_NEAR(p.u, kPi / 2, 1e-15);
  EXPECT_NEAR(p.v, 0.0, 1e-15);
  p = azimuthal_projection({0, 1, 0});
  EXPECT_NEAR(p.u, 0.0, 1e-15);
  EXPECT_NEAR(p.v, kPi / 2, 1e-15);
}

TEST(Projection, RadiusEqualsDistanceFromVertexAndIsInjective) {
  const auto lat = generate_lattice(402);
  std::vector<PlanarPoint> uv;
  for (const auto& p : lat.points()) {
    const auto q = azimuthal_projection(p);
    EXPECT_NEAR(std::hypot(q.u, q.v), geodesic_distance(p, {0, 0, 1}), 1e-12);
    EXPECT_LE(std::hypot(q.u, q.v), kPi / 2 + 1e-12);
    uv.push_back(q);
  }
  for (std::size_t i = 0; i < uv.size(); ++i) {
    for (std::size_t j = i + 1; j < uv.size(); ++j) {
      EXPECT_GT(std::hypot(uv[i].u - uv[j].u, uv[i].v - uv[j].v), 1e-6);
    }
  }
}

TEST(Montage, VertexRow) {
  const auto m = load_montage("label,inclination_deg,azimuth_deg\nCz,0,0\n");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m[0].position.x, 0.0, 1e-15);
  EXPECT_NEAR(m[0].position.y, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(m[0].position.z, 1.0);
}

TEST(Montage, DuplicateLabelNamesLine) {
  try {
    load_montage("label,inclination_deg,azimuth_deg\nC3,45,90\nC3,45,-90\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Montage, InclinationRange) {
  try {
    load_montage("label,inclination_deg,azimuth_deg\nO1,115,162\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Montage, MalformedRows) {
  EXPECT_THROW(load_montage("label,inclination_deg,azimuth_deg\nC3,45\n"), ParseError);
  EXPECT_THROW(load_montage("label,inclination_deg,azimuth_deg\nC3,abc,90\n"), ParseError);
  EXPECT_THROW(load_montage("name,incl,az\nC3,45,90\n"), ParseError);
  EXPECT_THROW(load_montage(""), ParseError);
}

TEST(Montage, ShippedMontagesAreValidAndSymmetric) {
  for (const char* file : {"montages/standard_20.csv", "montages/standard_32.csv"}) {
    const auto m = load_montage(read_text_file(oracle::data_path(file)), file);
    EXPECT_NO_THROW(require_classifier_electrodes(m));
    for (const auto& e : m.entries()) {
      const auto twin = m.index_of(mirror_label(e.label));
      ASSERT_TRUE(twin) << e.label;
      const auto& q = m[*twin].position;
      EXPECT_NEAR(q.x, e.position.x, 1e-12);
      EXPECT_NEAR(q.y, -e.position.y, 1e-12);
      EXPECT_NEAR(q.z, e.position.z, 1e-12);
    }
  }
  EXPECT_EQ(oracle::montage32().size(), 32u);
}

TEST(Montage, LeftRightConvention) {
  const auto m = oracle::montage32();
  EXPECT_GT(m[m.require("C3")].position.y, 0.5);
  EXPECT_LT(m[m.require("C4")].position.y, -0.5);
  EXPECT_GT(m[m.require("Fz")].position.x, 0.5);
  EXPECT_LT(m[m.require("Oz")].position.x, -0.9);
}

TEST(Montage, MirrorLabels) {
  EXPECT_EQ(mirror_label("C3"), "C4");
  EXPECT_EQ(mirror_label("C4"), "C3");
  EXPECT_EQ(mirror_label("Cz"), "Cz");
  EXPECT_EQ(mirror_label("FC5"), "FC6");
  EXPECT_EQ(mirror_label("O2"), "O1");
}
