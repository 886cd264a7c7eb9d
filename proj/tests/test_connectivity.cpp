#include <gdf/connectivity.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using gdf::AscentConfig;
using gdf::GdfModel;
using gdf::Matrix;
using gdf::Vector;
using gdf::WeightedSample;

Vector vec(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

gdf::ModeSet modes_at(std::vector<Vector> pts) {
  gdf::ModeSet m;
  m.modes = std::move(pts);
  m.values.assign(m.modes.size(), 1.0);
  m.top_eigenvalues.assign(m.modes.size(), -1.0);
  m.basin_counts.assign(m.modes.size(), 0);
  return m;
}

/// Score/normalise oracle written directly from the transition formulas.
std::pair<Matrix, Matrix> chain_oracle(const WeightedSample& s, double h, const std::vector<Vector>& modes) {
  const auto data = oracle::from_sample(s);
  const std::size_t n = data.x.size(), k = modes.size();
  std::vector<long double> w(k);
  for (std::size_t j = 0; j < k; ++j) {
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const long double kk = std::exp(-oracle::sq_dist(oracle::to_point(modes[j]), data.x[i]) / (2.0L * h * h));
      num += data.y[i] * kk;
      den += kk;
    }
    w[j] = num / den;
  }
  Matrix S(n, k), T(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<long double> row;
    long double total = 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
      row.push_back(data.y[j] * std::exp(-oracle::sq_dist(data.x[i], data.x[j]) / (2.0L * h * h)));
      total += row.back();
    }
    for (std::size_t j = 0; j < k; ++j) {
      row.push_back(w[j] * std::exp(-oracle::sq_dist(data.x[i], oracle::to_point(modes[j])) / (2.0L * h * h)));
      total += row.back();
    }
    for (std::size_t j = 0; j < n; ++j) T(i, j) = static_cast<double>(row[j] / total);
    for (std::size_t j = 0; j < k; ++j) S(i, j) = static_cast<double>(row[n + j] / total);
  }
  return {S, T};
}

TEST(ModeWeight, UnitAndConstantMarks) {
  std::mt19937_64 rng(61);
  const auto s = oracle::random_sample(rng, 50, 2);
  EXPECT_EQ(gdf::mode_weight(GdfModel(s.unit_weights(), 0.5), vec(0.1, 0.2)), 1.0);
  const auto c = s.with_weights(Vector::Constant(50, 3.7));
  EXPECT_NEAR(gdf::mode_weight(GdfModel(c, 0.5), vec(0.1, 0.2)), 3.7, 1e-14);
}

TEST(ModeWeight, MatchesRatioOracle) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = oracle::random_sample(rng, 40, 2, 2, 1.0, 0.1, 10.0);
    const Vector mode = s.point(trial);
    const auto data = oracle::from_sample(s);
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const long double k = std::exp(-oracle::sq_dist(oracle::to_point(mode), data.x[i]) / (2.0L * 0.36L));
      num += data.y[i] * k;
      den += k;
    }
    EXPECT_LE(oracle::rel_err(gdf::mode_weight(GdfModel(s, 0.6), mode), static_cast<double>(num / den)), 1e-12);
  }
}

TEST(ModeWeight, UnderflowIsNumericError) {
  const GdfModel m(WeightedSample::from_rows({{0.0, 0.0}}), 0.01);
  try {
    gdf::mode_weight(m, vec(10.0, 0.0));
    FAIL();
  } catch (const gdf::Error& e) {
    EXPECT_EQ(e.code(), gdf::ErrorCode::Numeric);
  }
}

TEST(BuildChain, SinglePointOnItsMode) {
  const GdfModel m(WeightedSample::from_rows({{1.0, 1.0}}, {2.0}), 0.5);
  const auto c = gdf::build_chain(m, modes_at({vec(1.0, 1.0)}));
  EXPECT_DOUBLE_EQ(c.mode_weights[0], 2.0);
  EXPECT_DOUBLE_EQ(c.S(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.T(0, 0), 0.5);
}

TEST(BuildChain, MatchesOracleAndRowsSumToOne) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const auto s = oracle::random_sample(rng, n, 2, 2, 1.0, 0.2, 3.0);
    const std::vector<Vector> modes = {s.point(0) + vec(0.1, 0.0), s.point(n - 1)};
    const double h = 0.8;
    const auto c = gdf::build_chain(GdfModel(s, h), modes_at(modes));
    const auto [S, T] = chain_oracle(s, h, modes);
    EXPECT_LE((c.S - S).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((c.T - T).cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index i = 0; i < n; ++i) EXPECT_NEAR(c.S.row(i).sum() + c.T.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(c.S.minCoeff(), 0.0);
    EXPECT_GE(c.T.minCoeff(), 0.0);
  }
}

TEST(BuildChain, MarkScalingLeavesBlocksUnchanged) {
  std::mt19937_64 rng(64);
  const auto s = oracle::random_sample(rng, 30, 2);
  const auto modes = modes_at({s.point(0), s.point(1)});
  const auto base = gdf::build_chain(GdfModel(s, 0.7), modes);
  for (double c : {1e-3, 1e3}) {
    const auto scaled = gdf::build_chain(GdfModel(s.scaled(c), 0.7), modes);
    EXPECT_LE((base.S - scaled.S).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((base.T - scaled.T).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(oracle::rel_err(c * base.mode_weights[0], scaled.mode_weights[0]), 1e-12);
  }
}

TEST(BuildChain, Errors) {
  const GdfModel m(WeightedSample::from_rows({{0.0, 0.0}, {100.0, 0.0}}), 0.5);
  EXPECT_THROW(gdf::build_chain(m, gdf::ModeSet{}), gdf::Error);
  try {
    gdf::build_chain(m, modes_at({vec(0.0, 0.0)}));
    FAIL();
  } catch (const gdf::Error& e) {
    EXPECT_EQ(e.code(), gdf::ErrorCode::IsolatedPoint);
    EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos);
  }
  gdf::ChainOptions small;
  small.max_points = 1;
  EXPECT_THROW(gdf::build_chain(m, modes_at({vec(0.0, 0.0), vec(100.0, 0.0)}), small), gdf::Error);
}

TEST(Absorb, ZeroTransientBlockGivesS) {
  gdf::ChainBlocks b;
  b.S = Matrix(2, 2);
  b.S << 0.3, 0.7, 1.0, 0.0;
  b.T = Matrix::Zero(2, 2);
  EXPECT_LE((gdf::absorb(b) - b.S).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Absorb, SingleModeAbsorbsEverything) {
  std::mt19937_64 rng(65);
  const auto s = oracle::random_sample(rng, 40, 2);
  const auto c = gdf::build_chain(GdfModel(s, 0.6), modes_at({s.point(3)}));
  const Matrix a = gdf::absorb(c);
  EXPECT_LE((a - Matrix::Ones(40, 1)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Absorb, MatchesMonteCarloOnSmallChains) {
  std::mt19937_64 rng(66);
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::Index n = 2 + trial;
    const auto s = oracle::random_sample(rng, n, 2, 1, 1.0);
    const auto c = gdf::build_chain(GdfModel(s, 1.0), modes_at({s.point(0) + vec(0.5, 0.0), s.point(n - 1) - vec(0.5, 0.0)}));
    const Matrix a = gdf::absorb(c);
    constexpr std::size_t walks = 1'000'000;
    const auto freq = oracle::simulate_absorption(c.S, c.T, walks, 1000 + trial);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-8);
      for (Eigen::Index j = 0; j < 2; ++j) {
        const double p = a(i, j);
        const double se = std::sqrt(p * (1.0 - p) / walks);
        EXPECT_LE(std::abs(freq[i][j] - p), 3.0 * se + 1e-12) << "start " << i << " mode " << j;
      }
    }
  }
}

TEST(Omega, ClosedForms) {
  gdf::ClusterAssignment asg;
  asg.labels = {0, 0, 1, 1};
  asg.modes = modes_at({vec(0, 0), vec(1, 0)});
  const auto s = WeightedSample::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {1.0, 2.0, 3.0, 4.0});
  Matrix separated(4, 2);
  separated << 1, 0, 1, 0, 0, 1, 0, 1;
  EXPECT_EQ(gdf::connectivity_matrix(separated, asg, s)(0, 1), 0.0);
  const Matrix halves = Matrix::Constant(4, 2, 0.5);
  const Matrix om = gdf::connectivity_matrix(halves, asg, s);
  EXPECT_DOUBLE_EQ(om(0, 1), 0.5);
  EXPECT_EQ(om(0, 0), 0.0);
  EXPECT_EQ(om(1, 1), 0.0);
}

TEST(Omega, EmptyClusterRejected) {
  gdf::ClusterAssignment asg;
  asg.labels = {0, 0};
  asg.modes = modes_at({vec(0, 0), vec(1, 0)});
  const auto s = WeightedSample::from_rows({{0, 0}, {0, 1}});
  try {
    gdf::connectivity_matrix(Matrix::Constant(2, 2, 0.5), asg, s);
    FAIL();
  } catch (const gdf::Error& e) {
    EXPECT_EQ(e.code(), gdf::ErrorCode::InvalidInput);
  }
}

TEST(Connectivity, PipelineContracts) {
  std::mt19937_64 rng(67);
  const auto s = oracle::random_sample(rng, 240, 2, 3, 1.0);
  const GdfModel m(s, 0.6);
  const auto asg = gdf::cluster(m, AscentConfig{});
  ASSERT_GE(asg.cluster_count(), 2u);
  const auto r = gdf::connectivity(m, asg);
  for (Eigen::Index i = 0; i < r.A.rows(); ++i) {
    EXPECT_NEAR(r.blocks.S.row(i).sum() + r.blocks.T.row(i).sum(), 1.0, 1e-12);
    EXPECT_NEAR(r.A.row(i).sum(), 1.0, 1e-8);
  }
  EXPECT_GE(r.A.minCoeff(), -1e-12);
  EXPECT_LE(r.A.maxCoeff(), 1.0 + 1e-12);
  EXPECT_EQ(r.omega, r.omega.transpose());
  EXPECT_GE(r.omega.minCoeff(), 0.0);
  EXPECT_LE(r.omega.maxCoeff(), 1.0);
  EXPECT_EQ(r.omega.diagonal(), Vector::Zero(r.omega.rows()));
  EXPECT_GT(r.self_connectivity.minCoeff(), 0.0);
  EXPECT_TRUE((r.blocks.mode_weights.array() > 0.0).all());
}

TEST(Connectivity, SeparationDrivesOmegaToZero) {
  std::mt19937_64 rng(68);
  const double h = 0.5;
  std::normal_distribution<double> nd(0.0, 0.5);
  gdf::Matrix pts(2, 200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    pts(0, i) = (i < 100 ? 0.0 : 20.0 * h) + nd(rng);
    pts(1, i) = nd(rng);
  }
  const WeightedSample s(pts, Vector::Ones(200));
  const GdfModel m(s, h);
  const auto asg = gdf::cluster(m, AscentConfig{});
  ASSERT_EQ(asg.cluster_count(), 2u);
  const auto r = gdf::connectivity(m, asg);
  EXPECT_LE(r.omega(0, 1), 1e-6);
}

TEST(Connectivity, MarkScalingLeavesEverythingUnchanged) {
  std::mt19937_64 rng(69);
  const auto s = oracle::random_sample(rng, 150, 2, 3, 1.0);
  const GdfModel m(s, 0.6);
  const auto asg = gdf::cluster(m, AscentConfig{});
  const auto base = gdf::connectivity(m, asg);
  for (double c : {1e-3, 1e3}) {
    const GdfModel mc(s.scaled(c), 0.6);
    const auto r = gdf::connectivity(mc, gdf::cluster(mc, AscentConfig{}));
    EXPECT_LE((r.A - base.A).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((r.omega - base.omega).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace
