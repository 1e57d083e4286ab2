#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rmnet {

struct LatticeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Translation placing covered points away from the integer lattice: exact b
// achieves distance >= 1/(2N), the quantized b achieves >= 1/(3N), and the
// integer positivity shift moves every translated coordinate to >= 1.
struct GridTranslation {
  std::vector<double> b;            // exact gap midpoints
  std::vector<double> b_quantized;  // b truncated to ceil(log2(6N)) fractional bits
  std::vector<double> positivity_shift;  // integers, applied after subtracting b_quantized
  std::size_t frac_bits = 0;
  double achieved_margin_exact = 0.0;      // min dist(x - b, Z) over covered points
  double achieved_margin_quantized = 0.0;  // min dist(x - b_quantized, Z)
};

// points: covered rows only (the margin guarantee applies to them); all_points
// may be a superset used for the positivity shift. margin_n >= |points|.
GridTranslation grid_translate(const std::vector<std::vector<double>>& points,
                               std::size_t margin_n,
                               const std::vector<std::vector<double>>& all_points = {});

// distance of x to the nearest integer
double dist_to_z(double x);

// log of the unit-ball volume ratio V_d / V_{d-1} = sqrt(pi) G((d+1)/2) / G(d/2+1)
double ball_volume_ratio(std::size_t d);

// log-volume of the l_p ball of radius r in R^d (p <= 0 means infinity)
double log_volume_lp_ball(std::size_t d, double r, double p);

// smallest natural t with 1/t <= V_d mu' eta / (2 d V_{d-1})
std::pair<std::uint64_t, double> error_budget_eta_prime(std::size_t d, double mu_prime,
                                                        double eta);

// bound 2 * eta_len * V_{d-1} / V_d on the normalized slab fraction
double slab_fraction_bound(std::size_t d, double mu, double eta_len);

}  // namespace rmnet
