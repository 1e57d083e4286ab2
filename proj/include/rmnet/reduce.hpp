#pragma once

#include <cstdint>
#include <vector>

#include "rmnet/dataset.hpp"
#include "rmnet/rng.hpp"

namespace rmnet {

// 1-Lipschitz linear dimension reducer: m x d matrix with orthonormal rows.
struct Projection {
  std::vector<std::vector<double>> matrix;  // m rows of length d
  std::size_t m = 0;
  std::size_t d = 0;
  double achieved_separation_ratio = 0.0;
  std::size_t retries_used = 0;

  std::vector<double> apply(const std::vector<double>& x) const;
};

struct ReduceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Random orthonormal frame (QR of a Gaussian) with a checked separation
// certificate: the projected dataset keeps eps' >= target_ratio * eps, retried
// up to max_retries. For m == d returns the identity frame. target_ratio <= 0
// selects the default (5/12) sqrt(m/d).
Projection jl_project(const Dataset& ds, std::size_t m, double target_ratio,
                      std::size_t max_retries, Rng& rng);

// default m for the log-scale projection: min{d, max{ceil(864 ln N), ceil(10 ln d)}}
std::size_t proj_log_dim(std::size_t n, std::size_t d);

// Orthonormal basis of an N-dim subspace containing the points' span:
// separation and pairwise distances preserved exactly. Requires d >= N.
Projection natural_projection(const Dataset& ds, Rng& rng);

// Bias making W x + b >= 0 on ||x||_2 <= radius: b_j = ||row_j||_2 * radius + 1.
std::vector<double> relu_safe_bias(const std::vector<std::vector<double>>& rows, double radius);

}  // namespace rmnet
