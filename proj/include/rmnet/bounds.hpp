#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rmnet/dataset.hpp"
#include "rmnet/net.hpp"

namespace rmnet {

// norm-conversion factor d^(|1/2 - 1/p|) mapping l_p robustness to l_2
double gamma_p(std::size_t d, NormIndex p);

struct LowerBoundReport {
  double width_lb = 0.0;
  double vc_param_lb = 0.0;
  double combined_param_lb = 0.0;
  std::string width_branch;  // which min{} branch fired
  std::string vc_branch;
  double p = 2.0;
  bool p_inf = false;
  // constants are reported as 1: the bounds are order-only
};

double width_lower_bound(std::size_t n, std::size_t d, double rho, NormIndex p);
double vc_param_lower_bound(std::size_t n, std::size_t d, double rho, NormIndex p);
LowerBoundReport lower_bounds(std::size_t n, std::size_t d, double rho, NormIndex p);

// distance from each target to the subspace spanned by the (orthonormal) basis
// rows; p must be 2 or infinity. Returns (min distance, argmin target index).
std::pair<double, std::size_t> subspace_distance(
    const std::vector<std::vector<double>>& targets,
    const std::vector<std::vector<double>>& basis, NormIndex p);

// exact Chebyshev distance min_c ||e - B^T c||_inf via a small LP
double linf_distance_to_span(const std::vector<double>& target,
                             const std::vector<std::vector<double>>& basis);

struct CertificateVerdict {
  bool pass = false;
  double min_distance = 0.0;     // +inf convention when Null(W1) is trivial
  std::size_t worst_i = 0, worst_j = 0;
  double threshold = 0.0;  // 2 mu
  std::string note;
};

// Necessary condition dist_2(x_i - x_j, Null(W1)) >= 2 mu over differently
// labeled pairs. A fail refutes robust memorization; a pass proves nothing.
CertificateVerdict certificate_check(const Network& net, const Dataset& ds,
                                     const RobustSpec& spec);

struct ShatteringResult {
  bool pass = false;
  std::size_t trials = 0, failures = 0;
  std::string note;
};

using MemorizerBuilder = std::function<Network(const Dataset&, double rho)>;

// For random +-1 labelings: build the reduction dataset, construct a robust
// memorizer, apply f' = 2f - 3, and check signs at (interior-shifted)
// shattering points.
ShatteringResult shattering_check(const MemorizerBuilder& builder, std::size_t d, std::size_t k,
                                  std::size_t trials, std::uint64_t seed,
                                  std::size_t groups = 2);

// affine transform of the network output: x -> a * net(x) + c
Network affine_output(const Network& net, double a, double c);

}  // namespace rmnet
