#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmnet/rng.hpp"

namespace rmnet {

// Norm index p in [1, inf]. Infinity is tagged explicitly because the l_inf
// machinery differs from finite p throughout.
struct NormIndex {
  double p = 2.0;
  bool inf = false;

  static NormIndex finite(double p) { return {p, false}; }
  static NormIndex infinity() { return {0.0, true}; }
  bool is_two() const { return !inf && p == 2.0; }
};

double norm_p(const std::vector<double>& v, NormIndex p);

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// N labeled points in R^d with labels in [C]. Invariants: N >= C >= 2, rows
// pairwise distinct, every class appears.
struct Dataset {
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> labels;  // in [1, C]
  std::size_t d = 0;
  std::size_t n_classes = 0;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

struct RobustSpec {
  NormIndex p = NormIndex::finite(2.0);
  double rho = 0.0;  // in (0,1)

  double mu(const Dataset& ds) const;
};

// (1/2) min over differently-labeled pairs of ||x_i - x_j||_p
double separation(const Dataset& ds, NormIndex p);

Dataset scale(const Dataset& ds, double c);

// k i.i.d. points uniform in the open l_p ball; deterministic given the rng.
std::vector<std::vector<double>> sample_ball(const std::vector<double>& center, double radius,
                                             NormIndex p, Rng& rng, std::size_t k);

// Hard dataset of the width lower bound: basis vectors labeled 2 against the
// origin labeled 1; when n-1 > d the overflow points walk out along e_1.
Dataset gen_width_lb_dataset(std::size_t n, std::size_t d);

struct ShatteringInstance {
  std::vector<std::vector<double>> shatter_points;  // floor(N/2) x k points x_{l,j}
  std::vector<int> shatter_labels;                  // +-1, row-major over (l, j)
  Dataset dataset;                                  // 2*floor(N/2) anchor points, labels {1,2}
  std::size_t groups = 0;
  std::size_t k = 0;
};

// labeling is floor(N/2) x k entries of +-1 (row-major).
ShatteringInstance gen_shattering_instance(const std::vector<std::vector<int>>& labeling,
                                           std::size_t d);

// CSV: header x1,...,xd,label; decimal floats, labels positive integers.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

// test-data helper: n random points in [0, box]^d with labels 1..c, resampled
// until the Dataset invariants hold
Dataset random_dataset(std::size_t n, std::size_t d, std::size_t c, Rng& rng, double box = 1.0);

}  // namespace rmnet
