#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bifikle/common.hpp"
#include "bifikle/grid.hpp"
#include "test_support.hpp"

using namespace bifikle;

TEST_CASE("1d trapezoid weights on one and two cells") {
  auto g2 = make_uniform_grid_1d(2, 0.0, 1.0);
  CHECK(g2->weights(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g2->weights(1) == doctest::Approx(0.5).epsilon(1e-15));

  auto g3 = make_uniform_grid_1d(3, 0.0, 1.0);
  CHECK(g3->weights(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g3->weights(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g3->weights(2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("1d weight sum equals interval length") {
  auto g = make_uniform_grid_1d(101, 0.0, 0.1);
  // summation oracle: direct accumulation
  double sum = 0.0;
  for (int i = 0; i < g->points(); ++i) sum += g->weights(i);
  CHECK(std::abs(sum - 0.1) <= 1e-12 * 0.1);
}

TEST_CASE("constructor weight positivity and measure across sizes") {
  for (int n : {2, 7, 33, 128}) {
    auto g = make_uniform_grid_1d(n, -2.0, 3.0);
    CHECK(g->weights.minCoeff() > 0.0);
    CHECK(std::abs(g->weights.sum() - g->measure()) <= 1e-12 * g->measure());
    for (int i = 1; i < n; ++i) CHECK(g->xs[i] > g->xs[i - 1]);
  }
  for (int n : {2, 5, 32}) {
    auto g = make_uniform_grid_2d(n, n);
    CHECK(g->weights.minCoeff() > 0.0);
    CHECK(std::abs(g->weights.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("2d cell-centered grids") {
  auto g = make_uniform_grid_2d(2, 2);
  CHECK(g->points() == 4);
  for (int i = 0; i < 4; ++i) CHECK(g->weights(i) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g->periodic);
  CHECK(g->xs[0] == doctest::Approx(0.25));

  auto g32 = make_uniform_grid_2d(32, 32);
  CHECK(g32->points() == 1024);
  CHECK(std::abs(g32->weights.sum() - 1.0) <= 1e-12);

  auto g128 = make_uniform_grid_2d(128, 128);
  CHECK(g128->points() == 16384);
}

TEST_CASE("constructor errors") {
  CHECK_THROWS_AS(make_uniform_grid_1d(1, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_uniform_grid_1d(4, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_uniform_grid_1d(4, 2.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_uniform_grid_2d(0, 4), InvalidArgument);
  CHECK_THROWS_AS(make_uniform_grid_2d(4, 1), InvalidArgument);
}

TEST_CASE("restriction block means against the hand oracle") {
  auto fine = make_uniform_grid_2d(4, 4);
  auto coarse = make_uniform_grid_2d(2, 2);
  Field f{fine, Eigen::VectorXd::LinSpaced(16, 1.0, 16.0)};
  Field r = restrict_field(f, coarse);
  CHECK(r.values(0) == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(r.values(1) == doctest::Approx(5.5).epsilon(1e-15));
  CHECK(r.values(2) == doctest::Approx(11.5).epsilon(1e-15));
  CHECK(r.values(3) == doctest::Approx(13.5).epsilon(1e-15));
}

TEST_CASE("restriction of constants and integral conservation") {
  auto fine = make_uniform_grid_2d(128, 128);
  auto coarse = make_uniform_grid_2d(32, 32);
  Field c{fine, Eigen::VectorXd::Constant(fine->points(), 3.25)};
  Field rc = restrict_field(c, coarse);
  CHECK((rc.values.array() - 3.25).abs().maxCoeff() <= 1e-14);

  Rng rng = Rng::stream(7, {1});
  Field f{fine, Eigen::VectorXd(fine->points())};
  for (int i = 0; i < fine->points(); ++i) f.values(i) = rng.uniform(-5.0, 5.0);
  Field r = restrict_field(f, coarse);
  CHECK(std::abs(domain_integral(r) - domain_integral(f)) <=
        1e-12 * std::abs(domain_integral(f)) + 1e-14);
}

TEST_CASE("restriction is linear") {
  auto fine = make_uniform_grid_2d(8, 8);
  auto coarse = make_uniform_grid_2d(4, 4);
  Rng rng = Rng::stream(12, {3});
  Field f{fine, Eigen::VectorXd(fine->points())}, g{fine, Eigen::VectorXd(fine->points())};
  for (int i = 0; i < fine->points(); ++i) {
    f.values(i) = rng.uniform(-1.0, 1.0);
    g.values(i) = rng.uniform(-1.0, 1.0);
  }
  const double a = 2.5, b = -0.75;
  Field combo{fine, a * f.values + b * g.values};
  Eigen::VectorXd lhs = restrict_field(combo, coarse).values;
  Eigen::VectorXd rhs = a * restrict_field(f, coarse).values + b * restrict_field(g, coarse).values;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("restriction rejects non-nested extents") {
  auto fine = make_uniform_grid_2d(6, 6);
  auto coarse = make_uniform_grid_2d(4, 4);
  Field f{fine, Eigen::VectorXd::Zero(fine->points())};
  CHECK_THROWS_AS(restrict_field(f, coarse), IncompatibleGrids);
}

TEST_CASE("field csv round trip") {
  testing::TempDir tmp("grid");
  auto g = make_uniform_grid_1d(17, 0.0, 0.1);
  Field f{g, Eigen::VectorXd(g->points())};
  Rng rng = Rng::stream(3, {9});
  for (int i = 0; i < g->points(); ++i) f.values(i) = rng.uniform(-1.0, 1.0);
  write_field_csv(tmp.path / "f.csv", f);
  Field back = read_field_csv(tmp.path / "f.csv");
  CHECK(back.grid->nx == 17);
  CHECK(back.grid->hi_x == doctest::Approx(0.1).epsilon(1e-16));
  CHECK((back.values - f.values).cwiseAbs().maxCoeff() == 0.0);
}
