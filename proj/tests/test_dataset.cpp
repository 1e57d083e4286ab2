#include "doctest.h"
#include "rmnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

using namespace rmnet;

TEST_CASE("separation: single differently-labeled pair") {
  Dataset ds;
  ds.d = 2;
  ds.n_classes = 2;
  ds.points = {{1.0, 0.0}, {0.0, 1.0}};
  ds.labels = {1, 2};
  CHECK(separation(ds, NormIndex::finite(2.0)) ==
        doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("width-LB hard dataset has separation 1/2 under l2 and l_inf") {
  for (auto [n, d] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 3}, {6, 3}, {10, 5}}) {
    Dataset ds = gen_width_lb_dataset(n, d);
    CHECK(separation(ds, NormIndex::finite(2.0)) == doctest::Approx(0.5));
    CHECK(separation(ds, NormIndex::infinity()) == doctest::Approx(0.5));
    CHECK(separation(ds, NormIndex::finite(1.0)) == doctest::Approx(0.5));
  }
}

TEST_CASE("gen_width_lb_dataset: structure") {
  Dataset ds = gen_width_lb_dataset(4, 3);
  REQUIRE(ds.size() == 4);
  CHECK(ds.points[0] == std::vector<double>{1, 0, 0});
  CHECK(ds.points[1] == std::vector<double>{0, 1, 0});
  CHECK(ds.points[2] == std::vector<double>{0, 0, 1});
  CHECK(ds.points[3] == std::vector<double>{0, 0, 0});
  CHECK(ds.labels == std::vector<std::size_t>{2, 2, 2, 1});

  Dataset big = gen_width_lb_dataset(6, 3);  // adds 2 e1, 3 e1 labeled 2
  REQUIRE(big.size() == 6);
  CHECK(big.points[4] == std::vector<double>{2, 0, 0});
  CHECK(big.points[5] == std::vector<double>{3, 0, 0});
  CHECK(big.labels[4] == 2);
  CHECK(big.labels[5] == 2);
}

TEST_CASE("scale: separation is homogeneous") {
  Rng rng(41);
  Dataset ds = random_dataset(12, 4, 3, rng);
  const double e2 = separation(ds, NormIndex::finite(2.0));
  const double einf = separation(ds, NormIndex::infinity());
  CHECK(separation(scale(ds, 2.0), NormIndex::finite(2.0)) ==
        doctest::Approx(2.0 * e2).epsilon(1e-12));
  CHECK(separation(scale(ds, 0.5), NormIndex::infinity()) ==
        doctest::Approx(0.5 * einf).epsilon(1e-12));
  CHECK(scale(ds, 1.0).points == ds.points);
  CHECK_THROWS_AS(scale(ds, 0.0), DatasetError);
}

TEST_CASE("epsilon p-q comparison: eps_q <= eps_p <= d^(1/p-1/q) eps_q for p < q") {
  Rng rng(43);
  for (int t = 0; t < 10; ++t) {
    Dataset ds = random_dataset(8, 5, 2, rng);
    const double e1 = separation(ds, NormIndex::finite(1.0));
    const double e2 = separation(ds, NormIndex::finite(2.0));
    const double einf = separation(ds, NormIndex::infinity());
    const double d = 5.0;
    CHECK(e2 <= e1 * (1 + 1e-12));
    CHECK(e1 <= std::pow(d, 1.0 - 0.5) * e2 * (1 + 1e-12));
    CHECK(einf <= e2 * (1 + 1e-12));
    CHECK(e2 <= std::pow(d, 0.5) * einf * (1 + 1e-12));
  }
}

TEST_CASE("sample_ball: samples lie strictly inside for p in {1, 2, 3.5, inf}") {
  Rng rng(47);
  std::vector<double> c{0.5, -1.0, 2.0};
  for (NormIndex p : {NormIndex::finite(1.0), NormIndex::finite(2.0), NormIndex::finite(3.5),
                      NormIndex::infinity()}) {
    auto xs = sample_ball(c, 0.75, p, rng, 2000);
    for (const auto& x : xs) {
      std::vector<double> diff(3);
      for (int j = 0; j < 3; ++j) diff[j] = x[j] - c[j];
      CHECK(norm_p(diff, p) < 0.75);
    }
  }
}

TEST_CASE("sample_ball: determinism given the seed") {
  std::vector<double> c{0.0, 0.0};
  Rng a(1234), b(1234);
  auto xs = sample_ball(c, 1.0, NormIndex::finite(2.0), a, 50);
  auto ys = sample_ball(c, 1.0, NormIndex::finite(2.0), b, 50);
  CHECK(xs == ys);
}

TEST_CASE("sample_ball l2: empirical mean near center (symmetry)") {
  Rng rng(53);
  const std::size_t k = 100000;
  std::vector<double> c{0.2, -0.4, 0.6, 0.0};
  auto xs = sample_ball(c, 1.0, NormIndex::finite(2.0), rng, k);
  for (int j = 0; j < 4; ++j) {
    double mean = 0.0;
    for (const auto& x : xs) mean += x[j];
    mean /= static_cast<double>(k);
    CHECK(std::fabs(mean - c[j]) < 0.02);
  }
}

TEST_CASE("sample_ball l_inf: marginals uniform (KS < 0.02 at 1e5 samples)") {
  Rng rng(59);
  const std::size_t k = 100000;
  std::vector<double> c{0.0, 0.0};
  auto xs = sample_ball(c, 1.0, NormIndex::infinity(), rng, k);
  std::vector<double> m0(k);
  for (std::size_t i = 0; i < k; ++i) m0[i] = (xs[i][0] + 1.0) / 2.0;  // to [0,1]
  std::sort(m0.begin(), m0.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double f = static_cast<double>(i + 1) / static_cast<double>(k);
    ks = std::max(ks, std::fabs(f - m0[i]));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("gen_shattering_instance: single point, J- empty") {
  auto inst = gen_shattering_instance({{1}}, 2);
  CHECK(inst.dataset.points[0] == std::vector<double>{1, 0});   // x1 = e1, label 2
  CHECK(inst.dataset.points[1] == std::vector<double>{-1, 0});  // x2 = -e1, label 1
  CHECK(inst.dataset.labels[0] == 2);
  CHECK(inst.dataset.labels[1] == 1);
}

TEST_CASE("gen_shattering_instance: figure construction d=3 k=3") {
  auto inst = gen_shattering_instance({{1, -1, 1}}, 3);
  CHECK(inst.dataset.points[0] == std::vector<double>{1, -1, 1});
  CHECK(inst.dataset.points[1] == std::vector<double>{-1, 1, -1});
}

TEST_CASE("gen_shattering_instance: separation >= sqrt(k) over random labelings") {
  Rng rng(61);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + rng.below(7);
    const std::size_t k = 1 + rng.below(d);
    const std::size_t groups = 1 + rng.below(3);
    std::vector<std::vector<int>> lab(groups, std::vector<int>(k));
    for (auto& row : lab)
      for (int& y : row) y = rng.uniform() < 0.5 ? 1 : -1;
    auto inst = gen_shattering_instance(lab, d);
    // brute-force pairwise distances over differently-labeled anchors
    CHECK(separation(inst.dataset, NormIndex::finite(2.0)) >=
          std::sqrt(static_cast<double>(k)) - 1e-9);
  }
  CHECK_THROWS_AS(gen_shattering_instance({{1, 1, 1}}, 2), DatasetError);  // k > d
}

TEST_CASE("csv round trip and validation diagnostics") {
  Rng rng(67);
  Dataset ds = random_dataset(9, 3, 3, rng);
  const std::string path = "/tmp/rmnet_test_ds.csv";
  save_csv(ds, path);
  Dataset back = load_csv(path);
  CHECK(back.points == ds.points);
  CHECK(back.labels == ds.labels);

  {
    std::ofstream f(path);
    f << "x1,x2,label\n0.5,0.5,1\n0.5,0.5,2\n";  // duplicate rows
  }
  CHECK_THROWS_AS(load_csv(path), DatasetError);
  {
    std::ofstream f(path);
    f << "x1,x2,label\n0.5,abc,1\n";
  }
  try {
    load_csv(path);
    FAIL("expected parse error");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("column 2") != std::string::npos);
  }
  std::remove(path.c_str());
}
