#pragma once

#include <cstdint>
#include <vector>

#include "rmnet/net.hpp"

namespace rmnet::gadgets {

// -- bit-string segment algebra ----------------------------------------------

// Bits are indexed 1..width from the most significant side, so segment (i, j)
// of a width-w string covers bits i..j and BIN_{1:w}(v) = v.
std::uint64_t bin_segment(std::uint64_t value, std::size_t i, std::size_t j, std::size_t width);
std::size_t bit_width(std::uint64_t value);

// -- elementary pieces ---------------------------------------------------------

// Indicator of [m, n-eta]: 1 there, 0 outside (m-eta, n), linear in the gaps.
// Width 2, depth 2.
Network bump(std::size_t m, std::size_t n, double eta);

// Same shape with arbitrary real interval [lo, hi_plus - eta]; used internally
// where thresholds are not integers.
Network bump_real(double lo, double hi_plus, double eta);

// Tent map phi(z) = sigma(sigma(2z) - sigma(4z - 2)): one peak at 1/2. Width 2, depth 2.
Network triangle();

// floor(x) on [0, 2^n) wherever frac(x) > gamma. Width 5, depth n.
//
// gamma is floored internally to a power of two, which only enlarges the
// guaranteed region and makes every weight dyadic: on inputs that are
// multiples of 2^-20 (and 2n + log2(1/gamma) + 21 <= 53) the output is
// bit-exact; on arbitrary doubles it is within 2^(2n + log2(1/gamma) - 52).
Network floor_gadget(std::size_t n, double gamma);

struct FloorInfo {
  double gamma_used;        // power-of-two gamma actually built
  std::size_t bit_complexity;  // 2n + log2(1/gamma_used)
};
FloorInfo floor_info(std::size_t n, double gamma);

// Flatten(z) = sum_j R^(m-j) floor(z_j), valid on [0, R]^m with frac > gamma.
// Width 5m, depth ceil(log2 R).
Network flatten_gadget(std::size_t m, std::size_t R, double gamma);

struct FlattenOpts {
  // drop the top ramp unit of each Delta block (it vanishes on [0, 2^n_f),
  // which is all the pipelines feed): width 4 per coordinate instead of 5
  bool minimal = false;
  // append a second coarse floor pass floor(v + 1/2, gamma = 1/4) per
  // coordinate, so cell values enter the combining form as exact integers
  // regardless of how fine gamma is
  bool snap = false;
};

// Generalized flatten with explicit per-coordinate integer coefficients and
// floor range n_f (coordinates in [0, 2^n_f)). The pipelines use this with
// construction-time-certified separating coefficients; radix coefficients
// R^(m-j) overflow binary64 once (m+1) log2 R exceeds the mantissa.
Network flatten_with_coeffs(std::size_t m, const std::vector<double>& coeffs, std::size_t n_f,
                            double gamma, const FlattenOpts& opts = {});

// F(x) = w_ceil(i/N2) on [m_i, m_i+1-eta], 0 outside the padded group ranges.
// Width 4 (5 when emitting the grouped-word variant), depth 3*N1 + 2.
// slack extends each gate plateau left by that amount: keys land on the
// plateau even when the upstream floor stage carries a few ulp of drift.
// Requires slack + eta < 1 so integer contracts are unchanged; 0 keeps the
// tight interval geometry.
Network interval_memorizer(const std::vector<std::uint64_t>& sorted_ms, std::size_t n1,
                           std::size_t n2, const std::vector<std::uint64_t>& group_values,
                           double eta, double slack = 0.0);

// Width-12 extractor on input (x, w, u): when x falls in the padded unit
// interval of the j-th key segment of u, outputs the j-th value segment of w;
// 0 outside all padded key intervals. Depth 3n*max(b_u,b_w) + 2n + 2.
//
// The builder cannot see the runtime u; callers that know u must check the
// key segments are pairwise distinct (integer_memorizer does).
Network bit_extractor(std::size_t n, std::size_t bits_key, std::size_t bits_val, double eta,
                      bool input_prescaled = false, double slack = 0.0);

// Exact map m_i -> y_i on the keys, 0 on every other natural number.
// Width 12, depth O(sqrt(N) polylog) via interval grouping + bit extraction.
Network integer_memorizer(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs,
                          double slack = 0.0);

// max(a, b) = a + sigma(b - a), exact for all reals. 2 -> 1.
Network running_max();

// t^2 on [0,1] within 2^(-2k-2), exact at dyadics of level <= k.
// Width <= 5, depth 2k + 1.
Network square_approx(std::size_t k);

}  // namespace rmnet::gadgets
