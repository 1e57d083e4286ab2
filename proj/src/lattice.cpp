#include "rmnet/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmnet {

double dist_to_z(double x) {
  const double f = x - std::floor(x);
  return std::min(f, 1.0 - f);
}

GridTranslation grid_translate(const std::vector<std::vector<double>>& points,
                               std::size_t margin_n,
                               const std::vector<std::vector<double>>& all_points) {
  if (points.empty()) throw LatticeError("grid_translate: no points");
  if (margin_n < points.size())
    throw LatticeError("grid_translate: margin_n must be >= number of covered points");
  const std::size_t d = points[0].size();
  const auto& everyone = all_points.empty() ? points : all_points;

  GridTranslation gt;
  gt.frac_bits = static_cast<std::size_t>(std::ceil(std::log2(6.0 * margin_n)));
  const double scale = std::ldexp(1.0, static_cast<int>(gt.frac_bits));
  gt.b.resize(d);
  gt.b_quantized.resize(d);
  gt.positivity_shift.resize(d);
  gt.achieved_margin_exact = 1.0;
  gt.achieved_margin_quantized = 1.0;

  std::vector<double> fracs;
  for (std::size_t j = 0; j < d; ++j) {
    fracs.clear();
    for (const auto& p : points) fracs.push_back(p[j] - std::floor(p[j]));
    std::sort(fracs.begin(), fracs.end());

    // maximum circular gap; on ties the smallest left endpoint wins, with the
    // wrap gap scanned last
    double best_gap = -1.0, bj = 0.0;
    for (std::size_t i = 0; i + 1 < fracs.size(); ++i) {
      const double g = fracs[i + 1] - fracs[i];
      if (g > best_gap) {
        best_gap = g;
        bj = 0.5 * (fracs[i] + fracs[i + 1]);
      }
    }
    {
      const double g = 1.0 - fracs.back() + fracs.front();
      if (g > best_gap) {
        best_gap = g;
        bj = 0.5 * ((fracs.back() - 1.0) + fracs.front());
      }
    }
    if (best_gap + 1e-12 < 1.0 / static_cast<double>(margin_n))
      throw LatticeError("grid_translate: maximum gap below 1/N (impossible)");
    gt.b[j] = bj;
    gt.b_quantized[j] = std::trunc(bj * scale) / scale;

    for (const auto& p : points) {
      gt.achieved_margin_exact = std::min(gt.achieved_margin_exact, dist_to_z(p[j] - gt.b[j]));
      gt.achieved_margin_quantized =
          std::min(gt.achieved_margin_quantized, dist_to_z(p[j] - gt.b_quantized[j]));
    }
  }

  const double n = static_cast<double>(margin_n);
  if (gt.achieved_margin_exact + 1e-12 < 1.0 / (2.0 * n))
    throw LatticeError("grid_translate: exact margin below 1/(2N)");
  if (gt.achieved_margin_quantized + 1e-12 < 1.0 / (3.0 * n))
    throw LatticeError("grid_translate: quantized margin below 1/(3N)");

  // integer shift centering every translated coordinate (over all points) at
  // >= 1; shifts may be negative, which keeps the floor range small. The extra
  // unit keeps whole robustness balls strictly positive.
  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& p : everyone) lo = std::min(lo, p[j] - gt.b_quantized[j]);
    gt.positivity_shift[j] = std::ceil(-lo) + 1.0;
  }
  return gt;
}

double ball_volume_ratio(std::size_t d) {
  const double dd = static_cast<double>(d);
  return std::exp(0.5 * std::log(M_PI) + std::lgamma((dd + 1.0) / 2.0) -
                  std::lgamma(dd / 2.0 + 1.0));
}

double log_volume_lp_ball(std::size_t d, double r, double p) {
  const double dd = static_cast<double>(d);
  if (p <= 0.0) return dd * std::log(2.0 * r);  // l_inf cube
  return dd * std::log(2.0 * r) + dd * std::lgamma(1.0 / p + 1.0) - std::lgamma(dd / p + 1.0);
}

std::pair<std::uint64_t, double> error_budget_eta_prime(std::size_t d, double mu_prime,
                                                        double eta) {
  if (!(mu_prime > 0.0)) throw LatticeError("error_budget: mu' must be positive");
  if (!(eta > 0.0) || !(eta < 1.0)) throw LatticeError("error_budget: eta must be in (0,1)");
  const double rhs = ball_volume_ratio(d) * mu_prime * eta / (2.0 * static_cast<double>(d));
  const double t = std::ceil(1.0 / rhs);
  const std::uint64_t tn = static_cast<std::uint64_t>(std::max(1.0, t));
  return {tn, 1.0 / static_cast<double>(tn)};
}

double slab_fraction_bound(std::size_t d, double mu, double eta_len) {
  if (!(mu > 0.0)) throw LatticeError("slab_fraction_bound: mu must be positive");
  return 2.0 * eta_len / ball_volume_ratio(d);
}

}  // namespace rmnet
