#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmnet/dataset.hpp"
#include "rmnet/net.hpp"
#include "rmnet/rng.hpp"

namespace rmnet {

enum class Regime { Small, Moderate, Large };

const char* regime_name(Regime r);

struct ConstructError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageLogEntry {
  std::string name;
  ResourceProfile res;
  std::string info;
};

struct RegimeReport {
  Regime regime = Regime::Small;
  double rho = 0.0;
  double p = 2.0;
  bool p_inf = false;
  std::string large_case;  // "I".."V" for the large regime
  double theoretical_param_bound = 0.0;  // matching O~ expression, constant 1
  ResourceProfile achieved;
  std::optional<double> eta_requested, eta_estimated;
  std::uint64_t seed = 0;
  double epsilon = 0.0, mu = 0.0;
  std::size_t proj_dim = 0;
  std::vector<StageLogEntry> stages;
  std::optional<std::size_t> bit_complexity;

  std::string to_json(bool with_timestamp = true) const;
};

// Regime thresholds of the dispatcher: rho <= 1/(5 N sqrt(d)) is small,
// rho <= 1/(5 sqrt(d)) is moderate, above is large.
double small_threshold(std::size_t n, std::size_t d);
double moderate_threshold(std::size_t d);

std::pair<Network, RegimeReport> construct_small_rho(const Dataset& ds, double rho,
                                                     std::uint64_t seed);

std::pair<Network, RegimeReport> construct_moderate_rho(const Dataset& ds, double rho, double eta,
                                                        std::uint64_t seed);

// Memorizer for an index subset: exact on the balls of I, output in {0, y_i}
// with probability >= 1 - eta on every other ball. Preconditions: separation
// >= sqrt(d)/2 and rho = 1/(4 g eps) for the group size g >= |I|.
Network n_alpha_points(const Dataset& ds, const std::vector<std::size_t>& index_set, double rho,
                       double eta, Rng& rng);

std::pair<Network, RegimeReport> construct_large_rho(const Dataset& ds, double rho,
                                                     std::uint64_t seed);

// Width O(d), depth O(N (log(d/gamma^2) + log R)) exact robust memorizer:
// per-point approximate squared distances through triangle-based squaring,
// threshold gates, and a running max over gated labels.
Network base_memorize(const Dataset& ds, double rho);

std::pair<Network, RegimeReport> construct_auto(const Dataset& ds, const RobustSpec& spec,
                                                std::optional<double> eta, std::uint64_t seed);

// l_p wrapper: builds the l_2 construction at rho' = gamma_p(d) rho; requires
// rho' < 1. Moderate-regime error targets rescale by the ball-volume ratio.
std::pair<Network, RegimeReport> construct_lp(const Dataset& ds, const RobustSpec& spec,
                                              std::optional<double> eta, std::uint64_t seed);

enum class QuantizeMode { Analytic, Empirical };

struct QuantizeResult {
  Network net;
  std::size_t bit_complexity = 0;
  std::size_t frac_bits = 0;
  double max_deviation_seen = 0.0;
  bool cleanup_appended = false;
};

// Round all parameters to a dyadic grid. Analytic mode derives the grid from
// the worst-case propagation bound (errors out when the grid underflows
// binary64, advising empirical mode); empirical mode searches the fewest fractional bits
// whose sampled deviation stays within nu over 10^4 points of B_2(0, R) plus
// any caller-supplied probes (pass robustness-ball samples here: uniform
// B_2(0, R) draws almost never land in the balls that matter). The optional
// cleanup head floor(y + 0.5) restores integer labels after a nu <= 0.4 drift.
QuantizeResult quantize_network(const Network& net, double nu, double R, QuantizeMode mode,
                                bool cleanup_head, std::size_t n_classes, std::uint64_t seed,
                                const std::vector<std::vector<double>>* probes = nullptr);

// -- verification -------------------------------------------------------------

struct BallStats {
  std::size_t samples = 0;
  std::size_t matches = 0;
  double wilson_upper = 1.0;
};

struct VerificationStats {
  std::vector<BallStats> balls;
  std::size_t total_samples = 0;
  std::size_t total_matches = 0;
  bool exact = false;          // every sample matched
  double worst_wilson = 0.0;   // max over balls
  std::size_t worst_ball = 0;
  double wall_seconds = 0.0;

  std::string to_json(bool with_timestamp = true) const;
};

double wilson_upper_bound(std::size_t errors, std::size_t n);

VerificationStats verify_robust(const Network& net, const Dataset& ds, const RobustSpec& spec,
                                std::size_t samples_per_ball, std::uint64_t seed,
                                double match_tol = 1e-6);

}  // namespace rmnet
