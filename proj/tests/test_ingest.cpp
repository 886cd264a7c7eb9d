#include <gdf/ingest.hpp>
#include <gdf/io.hpp>
#include <gdf/modes.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace {

namespace fs = std::filesystem;
using gdf::Vector;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gdf_ingest_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
  }

  fs::path dir_;
};

gdf::CatalogSpec xy_spec() {
  gdf::CatalogSpec spec;
  spec.coordinate_columns = {"x", "y"};
  spec.weight_column = "w";
  return spec;
}

using Catalog = TempDir;

TEST_F(Catalog, ThreeRowsLoadBitExact) {
  const auto p = write("a.csv", "# comment\nx,y,w\n0.1,0.2,1.5\n-3e-5, 7 ,2\n1e300,0.30000000000000004,0.125\n");
  const auto load = gdf::load_catalog(p, xy_spec());
  ASSERT_EQ(load.sample.size(), 3);
  EXPECT_EQ(load.rows_read, 3u);
  EXPECT_TRUE(load.rejected.empty());
  EXPECT_EQ(load.sample.points()(0, 0), 0.1);
  EXPECT_EQ(load.sample.points()(1, 0), 0.2);
  EXPECT_EQ(load.sample.points()(0, 1), -3e-5);
  EXPECT_EQ(load.sample.points()(1, 1), 7.0);
  EXPECT_EQ(load.sample.points()(0, 2), 1e300);
  EXPECT_EQ(load.sample.points()(1, 2), 0.30000000000000004);
  EXPECT_EQ(load.sample.weight(2), 0.125);
}

TEST_F(Catalog, ColumnsByIndexWithoutHeader) {
  const auto p = write("b.csv", "9,1.0,2.0\n9,3.0,4.0\n");
  gdf::CatalogSpec spec;
  spec.coordinate_columns = {"0", "1"};
  spec.weight_column = "2";
  spec.has_header = false;
  const auto load = gdf::load_catalog(p, spec);
  ASSERT_EQ(load.sample.size(), 2);
  EXPECT_EQ(load.sample.dim(), 2);
  EXPECT_EQ(load.sample.weight(1), 4.0);
}

TEST_F(Catalog, ZeroWeightRowIsRejectedWithItsLine) {
  const auto p = write("c.csv", "x,y,w\n0,0,1\n1,1,0\n2,2,1\n");
  try {
    gdf::load_catalog(p, xy_spec());
    FAIL();
  } catch (const gdf::Error& e) {
    EXPECT_EQ(e.code(), gdf::ErrorCode::Ingestion);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  auto spec = xy_spec();
  spec.rejection_budget = 1;
  const auto load = gdf::load_catalog(p, spec);
  EXPECT_EQ(load.sample.size(), 2);
  ASSERT_EQ(load.rejected.size(), 1u);
  EXPECT_EQ(load.rejected[0].line, 3u);
}

TEST_F(Catalog, MalformedInputs) {
  auto spec = xy_spec();
  spec.rejection_budget = 10;
  const auto load = gdf::load_catalog(write("d.csv", "x,y,w\nabc,0,1\n0,nan,1\n0,0,-1\n0,0\n1,1,inf\n5,5,5\n"), spec);
  EXPECT_EQ(load.rejected.size(), 5u);
  EXPECT_EQ(load.sample.size(), 1);
  EXPECT_THROW(gdf::load_catalog(dir_ / "missing.csv", spec), gdf::Error);
  spec.weight_column = "mass";
  EXPECT_THROW(gdf::load_catalog(write("e.csv", "x,y,w\n0,0,1\n"), spec), gdf::Error);
  EXPECT_THROW(gdf::load_catalog(write("f.csv", "x,y,w\n"), xy_spec()), gdf::Error);
}

TEST_F(Catalog, CsvRoundTripIsBitExact) {
  std::mt19937_64 rng(91);
  const auto s = oracle::random_sample(rng, 200, 3, 2, 1.0, 1e-7, 1e7);
  const auto p = write("round.csv", gdf::io::sample_csv(s));
  gdf::CatalogSpec spec;
  spec.coordinate_columns = {"x0", "x1", "x2"};
  spec.weight_column = "weight";
  const auto back = gdf::load_catalog(p, spec).sample;
  EXPECT_EQ(back.points(), s.points());
  EXPECT_EQ(back.weights(), s.weights());
}

TEST(Io, FormatNumberRoundTrips) {
  std::mt19937_64 rng(92);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(u(rng), static_cast<int>(u(rng)) * 10);
    EXPECT_EQ(std::stod(gdf::io::format_number(v)), v);
  }
  EXPECT_EQ(gdf::io::format_number(0.5), "0.5");
}

TEST(SdssMass, UnitLogArgument) {
  for (double r : {12.0, 17.0, 17.77}) EXPECT_NEAR(gdf::sdss_mass(r, 1.0 / 4.28e8), r, 1e-12);
}

TEST(SdssMass, MidSliceValue) {
  const long double expected = 17.0L - 5.0L * std::log10(4.28e8L * 0.1125L);
  EXPECT_NEAR(gdf::sdss_mass(17.0, 0.1125), static_cast<double>(expected), 1e-12);
  EXPECT_NEAR(gdf::sdss_mass(17.0, 0.1125), -21.41298, 1e-5);
}

TEST(SdssMass, LogLawAndMonotonicity) {
  std::mt19937_64 rng(93);
  std::uniform_real_distribution<double> zr(0.01, 0.3), rr(12.0, 18.0);
  for (int i = 0; i < 200; ++i) {
    const double z = zr(rng), r = rr(rng);
    EXPECT_NEAR(gdf::sdss_mass(r, z) - gdf::sdss_mass(r, 2.0 * z), 5.0 * std::log10(2.0), 1e-12);
    EXPECT_LT(gdf::sdss_mass(r, z * 1.001), gdf::sdss_mass(r, z));
    EXPECT_GT(gdf::sdss_mass(r + 0.01, z), gdf::sdss_mass(r, z));
  }
  EXPECT_THROW(gdf::sdss_mass(17.0, 0.0), gdf::Error);
  EXPECT_THROW(gdf::sdss_mass(17.0, -0.1), gdf::Error);
}

TEST(SdssCatalog, BundledExtractMatchesDeclaredCount) {
  const fs::path p = fs::path(GDF_DATA_DIR) / "sdss_extract.csv";
  const auto declared = gdf::declared_record_count(p);
  ASSERT_TRUE(declared.has_value());
  gdf::SdssSpec spec;
  spec.transform = gdf::MassTransform::Luminous;
  const auto load = gdf::load_sdss_catalog(p, spec);
  EXPECT_EQ(load.rows_read, *declared);
  EXPECT_EQ(static_cast<std::size_t>(load.sample.size()), *declared);
  EXPECT_TRUE((load.sample.weights().array() > 0.0).all());
}

TEST(SdssCatalog, RawProxyWeightsAreNotPositive) {
  // The proxy is magnitude-like and negative for these galaxies, so the
  // untransformed weights violate w > 0 and every row is rejected.
  const fs::path p = fs::path(GDF_DATA_DIR) / "sdss_extract.csv";
  EXPECT_THROW(gdf::load_sdss_catalog(p, gdf::SdssSpec{}), gdf::Error);
}

TEST(SdssCatalog, RedshiftSliceSkipsRows) {
  const fs::path p = fs::path(GDF_DATA_DIR) / "sdss_extract.csv";
  gdf::SdssSpec spec;
  spec.transform = gdf::MassTransform::Luminous;
  spec.redshift_slice = std::make_pair(0.110, 0.1125);
  const auto load = gdf::load_sdss_catalog(p, spec);
  EXPECT_GT(load.sample.size(), 0);
  EXPECT_LT(static_cast<std::size_t>(load.sample.size()), load.rows_read);
  EXPECT_TRUE(load.rejected.empty());
}

gdf::ImageGrid image(int w, int h, std::vector<double> v) {
  gdf::ImageGrid g;
  g.width = w;
  g.height = h;
  g.intensities = std::move(v);
  return g;
}

TEST(Image, SingleSurvivingPixel) {
  const auto s = gdf::image_to_sample(image(2, 2, {1, 0, 0, 0}), 0.15);
  ASSERT_EQ(s.size(), 1);
  EXPECT_EQ(s.point(0), (Vector(2) << 0.5, 0.5).finished());
  EXPECT_EQ(s.weight(0), 1.0);
}

TEST(Image, PixelCentresAndOrientation) {
  const auto img = image(3, 2, {0, 0, 0.5, 0, 0, 1.0});
  const auto down = gdf::image_to_sample(img, 0.0);
  ASSERT_EQ(down.size(), 2);
  EXPECT_EQ(down.point(0), (Vector(2) << 2.5, 0.5).finished());
  EXPECT_EQ(down.weight(0), 0.5);
  gdf::ImageSampleOptions up;
  up.threshold = 0.0;
  up.flip_y = true;
  const auto flipped = gdf::image_to_sample(img, up);
  EXPECT_EQ(flipped.point(0), (Vector(2) << 2.5, 1.5).finished());
  EXPECT_EQ(flipped.point(1), (Vector(2) << 2.5, 0.5).finished());
}

TEST(Image, ThresholdZeroKeepsEveryPositivePixel) {
  std::vector<double> v(35);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + static_cast<double>(i % 4);
  EXPECT_EQ(gdf::image_to_sample(image(7, 5, v), 0.0).size(), 35);
}

TEST(Image, MonotoneInThreshold) {
  std::mt19937_64 rng(94);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(400);
  for (double& x : v) x = u(rng);
  const auto img = image(20, 20, v);
  Eigen::Index prev = img.width * img.height + 1;
  for (double t = 0.0; t < 0.95; t += 0.05) {
    const auto n = gdf::image_to_sample(img, t).size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(Image, UniformFieldHasOneCentralMode) {
  const auto s = gdf::image_to_sample(image(8, 8, std::vector<double>(64, 0.7)), 0.15);
  ASSERT_EQ(s.size(), 64);
  for (Eigen::Index i = 0; i < s.size(); ++i) EXPECT_EQ(s.weight(i), 1.0);
  const auto modes = gdf::collect_modes(gdf::GdfModel(s, 3.0), gdf::AscentConfig{});
  ASSERT_EQ(modes.size(), 1u);
  EXPECT_NEAR(modes.modes[0][0], 4.0, 1e-5);
  EXPECT_NEAR(modes.modes[0][1], 4.0, 1e-5);
}

TEST(Image, Errors) {
  EXPECT_THROW(gdf::image_to_sample(image(2, 2, {0.1, 0.1, 0.1, 1.0}), 1.0), gdf::Error);
  EXPECT_THROW(gdf::image_to_sample(image(2, 2, {0, 0, 0, 0}), 0.0), gdf::Error);
  EXPECT_THROW(gdf::image_to_sample(image(2, 2, {0, 0, 0}), 0.0), gdf::Error);
  EXPECT_THROW(gdf::image_to_sample(image(2, 2, {0, -1, 0, 1}), 0.0), gdf::Error);
}

using Pgm = TempDir;

TEST_F(Pgm, PlainAndRawAgree) {
  const auto plain = gdf::read_pgm(write("a.pgm", "P2\n# c\n3 2\n255\n0 10 20\n30 40 255\n"));
  EXPECT_EQ(plain.width, 3);
  EXPECT_EQ(plain.height, 2);
  EXPECT_EQ(plain.intensities, (std::vector<double>{0, 10, 20, 30, 40, 255}));
  const auto raw = gdf::read_pgm(write("b.pgm", gdf::encode_pgm(plain, 255)));
  EXPECT_EQ(raw.intensities, plain.intensities);
}

TEST_F(Pgm, SixteenBitBigEndian) {
  std::string body = "P5\n2 1\n65535\n";
  body += std::string("\x01\x02\xff\xff", 4);
  const auto img = gdf::read_pgm(write("c.pgm", body));
  EXPECT_EQ(img.intensities, (std::vector<double>{258, 65535}));
  const auto wide = gdf::read_pgm(write("d.pgm", gdf::encode_pgm(img, 65535)));
  EXPECT_EQ(wide.intensities, img.intensities);
  EXPECT_THROW(gdf::read_pgm(write("e.pgm", "P5\n2 1\n255\n\x01")), gdf::Error);
  EXPECT_THROW(gdf::read_pgm(write("f.pgm", "P6\n1 1\n255\n\x01\x01\x01")), gdf::Error);
  EXPECT_THROW(gdf::read_pgm(write("g.pgm", "P2\n1 1\n10\n11\n")), gdf::Error);
}

TEST(BundledImage, Loads) {
  const auto img = gdf::read_pgm(fs::path(GDF_DATA_DIR) / "four_galaxies.pgm");
  EXPECT_EQ(img.width, 96);
  EXPECT_EQ(img.height, 72);
  const auto s = gdf::image_to_sample(img, 0.15);
  EXPECT_GT(s.size(), 500);
  EXPECT_LE(s.weights().maxCoeff(), 1.0);
}

}  // namespace
