#include "doctest.h"
#include "rmnet/reduce.hpp"

#include <cmath>

using namespace rmnet;

namespace {

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("jl_project: m = d returns the identity frame immediately") {
  Rng rng(211);
  Dataset ds = random_dataset(10, 6, 2, rng);
  Projection p = jl_project(ds, 6, -1.0, 4, rng);
  CHECK(p.achieved_separation_ratio == 1.0);
  CHECK(p.achieved_separation_ratio >= 5.0 / 12.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(p.matrix[i][j] == (i == j ? 1.0 : 0.0));
}

TEST_CASE("jl_project: random dataset keeps the separation certificate") {
  Rng rng(223);
  Dataset ds = random_dataset(50, 64, 2, rng);
  Projection p = jl_project(ds, 32, -1.0, 64, rng);
  const double eps = separation(ds, NormIndex::finite(2.0));
  // direct recomputation of eps on the image
  Dataset img;
  img.d = 32;
  img.n_classes = 2;
  img.labels = ds.labels;
  for (const auto& x : ds.points) img.points.push_back(p.apply(x));
  const double eps2 = separation(img, NormIndex::finite(2.0));
  CHECK(eps2 >= (5.0 / 12.0) * std::sqrt(0.5) * eps - 1e-12);
  CHECK(eps2 / eps == doctest::Approx(p.achieved_separation_ratio).epsilon(1e-12));
}

TEST_CASE("jl_project: contraction on random pairs and unit vectors") {
  Rng rng(227);
  Dataset ds = random_dataset(20, 24, 2, rng);
  Projection p = jl_project(ds, 8, 0.05, 64, rng);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> u(24);
    for (double& v : u) v = rng.normal();
    const double nu = vec_norm(u);
    CHECK(vec_norm(p.apply(u)) <= nu * (1.0 + 1e-10));
  }
}

TEST_CASE("jl_project: deterministic given the seed") {
  Dataset ds;
  {
    Rng r(5);
    ds = random_dataset(12, 16, 2, r);
  }
  Rng a(99), b(99);
  Projection pa = jl_project(ds, 4, 0.01, 16, a);
  Projection pb = jl_project(ds, 4, 0.01, 16, b);
  CHECK(pa.matrix == pb.matrix);
}

TEST_CASE("jl_project: exhausted retries carry the best ratio in the error") {
  Rng rng(229);
  Dataset ds = random_dataset(30, 16, 2, rng);
  try {
    jl_project(ds, 1, 0.999, 3, rng);  // impossible target
    FAIL("expected retry exhaustion");
  } catch (const ReduceError& e) {
    CHECK(std::string(e.what()).find("best separation ratio") != std::string::npos);
  }
}

TEST_CASE("natural_projection: points already in a basis span keep distances") {
  Dataset ds;
  ds.d = 8;
  ds.n_classes = 2;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> e(8, 0.0);
    e[i] = 2.0 + i;
    ds.points.push_back(e);
    ds.labels.push_back(i % 2 + 1);
  }
  Rng rng(233);
  Projection p = natural_projection(ds, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      std::vector<double> d1(8), d2(4);
      for (int k = 0; k < 8; ++k) d1[k] = ds.points[i][k] - ds.points[j][k];
      auto pi = p.apply(ds.points[i]), pj = p.apply(ds.points[j]);
      for (int k = 0; k < 4; ++k) d2[k] = pi[k] - pj[k];
      CHECK(vec_norm(d2) == doctest::Approx(vec_norm(d1)).epsilon(1e-12));
    }
}

TEST_CASE("natural_projection: exact separation preservation on random data") {
  Rng rng(239);
  Dataset ds = random_dataset(10, 40, 2, rng);
  Projection p = natural_projection(ds, rng);
  Dataset img;
  img.d = 10;
  img.n_classes = 2;
  img.labels = ds.labels;
  for (const auto& x : ds.points) img.points.push_back(p.apply(x));
  const double e1 = separation(ds, NormIndex::finite(2.0));
  const double e2 = separation(img, NormIndex::finite(2.0));
  CHECK(e2 == doctest::Approx(e1).epsilon(1e-10));
  // all pairwise distances preserved exactly
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = i + 1; j < 10; ++j) {
      std::vector<double> d1(40), d2(10);
      for (int k = 0; k < 40; ++k) d1[k] = ds.points[i][k] - ds.points[j][k];
      for (int k = 0; k < 10; ++k) d2[k] = img.points[i][k] - img.points[j][k];
      CHECK(vec_norm(d2) == doctest::Approx(vec_norm(d1)).epsilon(1e-10));
    }
  CHECK_THROWS_AS(natural_projection(random_dataset(10, 4, 2, rng), rng), ReduceError);
}

TEST_CASE("proj_log_dim uses natural logs and the 864 constant") {
  // 864 ln 50 = 3380.6... far above d: m = d
  CHECK(proj_log_dim(50, 64) == 64);
  CHECK(proj_log_dim(2, 100000) ==
        std::max<std::size_t>(std::ceil(864.0 * std::log(2.0)), std::ceil(10.0 * std::log(1e5))));
}

TEST_CASE("relu_safe_bias: norm-bound certificate") {
  std::vector<std::vector<double>> rows = {{1.0, 0.0}, {0.6, 0.8}};
  auto b = relu_safe_bias(rows, 3.0);
  CHECK(b[0] == doctest::Approx(4.0));  // ||row|| * R + 1
  CHECK(b[1] == doctest::Approx(4.0));
  auto bz = relu_safe_bias({{0.0, 0.0}}, 3.0);
  CHECK(bz[0] == doctest::Approx(1.0));

  // Monte-Carlo certificate: all post-bias coordinates nonnegative on the ball
  Rng rng(241);
  auto xs = sample_ball({0.0, 0.0}, 3.0, NormIndex::finite(2.0), rng, 10000);
  for (const auto& x : xs)
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double wx = rows[i][0] * x[0] + rows[i][1] * x[1];
      CHECK(wx + b[i] >= 0.0);
    }
}
