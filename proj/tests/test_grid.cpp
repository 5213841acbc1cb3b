#include <gtest/gtest.h>

#include <random>

#include "edgemix/grid.hpp"

namespace edgemix {
namespace {

DownsampleMask mask_of(std::initializer_list<int> bits) {
  std::vector<std::uint8_t> v;
  for (int b : bits) v.push_back(static_cast<std::uint8_t>(b));
  return DownsampleMask(std::move(v));
}

DownsampleMask first_n(const GridGeometry& g, int n) {
  DownsampleMask m(static_cast<std::size_t>(g.region_count));
  for (int j = 0; j < n; ++j) m.set(static_cast<std::size_t>(j));
  return m;
}

TEST(Geometry, Default1080p) {
  const auto g = default_geometry();
  EXPECT_EQ(g.region_patches, 18);
  EXPECT_EQ(g.region_side_px(), 288);
  EXPECT_EQ(g.padded_width_px, 2016);
  EXPECT_EQ(g.padded_height_px, 1152);
  EXPECT_EQ(g.grid_cols, 7);
  EXPECT_EQ(g.grid_rows, 4);
  EXPECT_EQ(g.region_count, 28);
  EXPECT_EQ(g.full_region_tokens(), 324);
  EXPECT_EQ(g.downsampled_region_tokens(), 81);
}

TEST(Geometry, SingleRegionExamples) {
  const auto small = build_geometry(64, 64, 16, 2, 2);
  EXPECT_EQ(small.region_patches, 4);
  EXPECT_EQ(small.padded_width_px, 64);
  EXPECT_EQ(small.padded_height_px, 64);
  EXPECT_EQ(small.region_count, 1);

  const auto tiny = build_geometry(1, 1, 16, 9, 2);
  EXPECT_EQ(tiny.padded_width_px, 288);
  EXPECT_EQ(tiny.padded_height_px, 288);
  EXPECT_EQ(tiny.grid_cols, 1);
  EXPECT_EQ(tiny.grid_rows, 1);
}

TEST(Geometry, RejectsNonPositive) {
  EXPECT_THROW(build_geometry(0, 1080, 16, 9, 2), InvalidArgument);
  EXPECT_THROW(build_geometry(1920, -1, 16, 9, 2), InvalidArgument);
  EXPECT_THROW(build_geometry(1920, 1080, 0, 9, 2), InvalidArgument);
  EXPECT_THROW(build_geometry(1920, 1080, 16, 0, 2), InvalidArgument);
  EXPECT_THROW(build_geometry(1920, 1080, 16, 9, 0), InvalidArgument);
}

TEST(Geometry, RandomGeometriesMatchClosedForm) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> dim(1, 4000), patch(1, 32), win(1, 16), fac(1, 4);
  for (int i = 0; i < 1000; ++i) {
    const int fw = dim(rng), fh = dim(rng), p = patch(rng), w = win(rng), d = fac(rng);
    const auto g = build_geometry(fw, fh, p, w, d);
    const int r = w * d, side = r * p;
    ASSERT_EQ(g.region_patches, r);
    ASSERT_EQ(g.padded_width_px % side, 0);
    ASSERT_EQ(g.padded_height_px % side, 0);
    ASSERT_GE(g.padded_width_px, fw);
    ASSERT_LT(g.padded_width_px - side, fw);
    ASSERT_GE(g.padded_height_px, fh);
    ASSERT_LT(g.padded_height_px - side, fh);
    ASSERT_EQ(g.grid_cols, g.padded_width_px / side);
    ASSERT_EQ(g.grid_rows, g.padded_height_px / side);
    ASSERT_EQ(g.region_count, g.grid_cols * g.grid_rows);

    const std::int64_t full = static_cast<std::int64_t>(r) * r, low = static_cast<std::int64_t>(w) * w;
    ASSERT_EQ(token_count(g, DownsampleMask(g.region_count)), g.region_count * full);
    DownsampleMask all(g.region_count);
    for (int j = 0; j < g.region_count; ++j) all.set(j);
    ASSERT_EQ(token_count(g, all), g.region_count * low);
    ASSERT_EQ(full, low * d * d);

    DownsampleMask m(g.region_count);
    std::int64_t prev = token_count(g, m);
    for (int j = 0; j < std::min(g.region_count, 8); ++j) {
      m.set(j);
      const auto now = token_count(g, m);
      ASSERT_EQ(prev - now, full - low);
      prev = now;
    }
  }
}

TEST(Geometry, RegionsTileThePaddedFrame) {
  const auto g = build_geometry(700, 300, 8, 3, 2);
  std::int64_t area = 0;
  for (int j = 0; j < g.region_count; ++j) area += static_cast<std::int64_t>(g.region_box(j).area());
  EXPECT_EQ(area, g.padded_area_px());
  std::vector<int> hits(g.region_count, 0);
  for (int y = 0; y < g.padded_height_px; ++y) {
    for (int x = 0; x < g.padded_width_px; ++x) {
      const int j = g.region_of_pixel(x, y);
      ASSERT_GE(j, 0);
      ASSERT_LT(j, g.region_count);
      const Box b = g.region_box(j);
      ASSERT_TRUE(x >= b.x && x < b.right() && y >= b.y && y < b.bottom());
      ++hits[j];
    }
  }
  for (int h : hits) EXPECT_EQ(h, g.region_area_px());
}

TEST(Geometry, RegionsAreRowMajor) {
  const auto g = default_geometry();
  EXPECT_EQ(g.region_box(0).x, 0);
  EXPECT_EQ(g.region_box(1).x, 288);
  EXPECT_EQ(g.region_box(7).y, 288);
  EXPECT_EQ(g.region_box(7).x, 0);
}

TEST(Tokens, DefaultExamples) {
  const auto g = default_geometry();
  EXPECT_EQ(token_count(g, first_n(g, 0)), 9072);
  EXPECT_EQ(token_count(g, first_n(g, 10)), 6642);
  const auto small = build_geometry(64, 64, 16, 2, 2);
  EXPECT_EQ(token_count(small, first_n(small, 0)), 16);
  EXPECT_EQ(token_count(small, first_n(small, 1)), 4);
}

TEST(Tokens, MixedPixelCount) {
  const auto g = default_geometry();
  EXPECT_EQ(mixed_pixel_count(g, first_n(g, 0)), 2322432);
  EXPECT_EQ(mixed_pixel_count(g, first_n(g, 28)), 580608);
  EXPECT_EQ(mixed_pixel_count(g, first_n(g, 14)), 1451520);
}

TEST(Tokens, MaskLengthMustMatch) {
  const auto g = default_geometry();
  EXPECT_THROW(token_count(g, DownsampleMask(27)), InvalidArgument);
}

TEST(Masks, FromTypes) {
  const RegionTypeMap t{RegionType::kSbr, RegionType::kCmr, RegionType::kDor};
  EXPECT_EQ(mask_from_types(t, 0).popcount(), 0);
  EXPECT_EQ(mask_from_types(t, 1), mask_of({0, 1, 0}));
  EXPECT_EQ(mask_from_types(t, 2), mask_of({1, 1, 0}));
  EXPECT_THROW(mask_from_types(t, 3), InvalidArgument);
  EXPECT_THROW(mask_from_types(t, -1), InvalidArgument);
}

TEST(Masks, NeverMarksDorAndNests) {
  std::mt19937 rng(3);
  for (int i = 0; i < 500; ++i) {
    RegionTypeMap t(28);
    for (auto& x : t) x = static_cast<RegionType>(rng() % 3);
    const auto m0 = mask_from_types(t, 0), m1 = mask_from_types(t, 1), m2 = mask_from_types(t, 2);
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (t[j] == RegionType::kDor) {
        ASSERT_FALSE(m1.test(j));
        ASSERT_FALSE(m2.test(j));
      }
      if (m1.test(j)) {
        ASSERT_TRUE(m2.test(j));
      }
    }
    ASSERT_LE(m0.popcount(), m1.popcount());
    ASSERT_LE(m1.popcount(), m2.popcount());
  }
}

TEST(Masks, PackMsbFirst) {
  DownsampleMask m(10);
  m.set(0);
  m.set(7);
  m.set(9);
  const auto bytes = pack_mask(m);
  ASSERT_EQ(bytes.size(), 2u);
  EXPECT_EQ(bytes[0], 0x81);
  EXPECT_EQ(bytes[1], 0x40);
  EXPECT_EQ(mask_to_hex(m), "8140");
  EXPECT_EQ(unpack_mask(bytes, 10), m);
  EXPECT_THROW(unpack_mask(bytes, 17), ParseError);
}

TEST(Masks, PackRoundTripRandom) {
  std::mt19937 rng(9);
  for (int n = 1; n < 70; ++n) {
    DownsampleMask m(n);
    for (int j = 0; j < n; ++j) m.set(j, rng() & 1);
    const auto bytes = pack_mask(m);
    ASSERT_EQ(bytes.size(), static_cast<std::size_t>((n + 7) / 8));
    ASSERT_EQ(unpack_mask(bytes, n), m);
  }
}

}  // namespace
}  // namespace edgemix
