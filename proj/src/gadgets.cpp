#include "rmnet/gadgets.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace rmnet::gadgets {

namespace {
double pow2(int e) { return std::ldexp(1.0, e); }
}  // namespace

std::size_t bit_width(std::uint64_t value) {
  std::size_t w = 0;
  while (value) {
    ++w;
    value >>= 1;
  }
  return w == 0 ? 1 : w;
}

std::uint64_t bin_segment(std::uint64_t value, std::size_t i, std::size_t j, std::size_t width) {
  if (i < 1 || j < i || j > width) throw NetError("bin_segment: bad indices");
  if (width < bit_width(value) && value != 0) throw NetError("bin_segment: width too small");
  // bit i (from MS side) is bit width-i counted from the LS side
  const std::size_t hi = width - i;       // inclusive, LS-indexed
  const std::size_t lo = width - j;       // inclusive, LS-indexed
  const std::size_t len = hi - lo + 1;
  return (value >> lo) & ((len >= 64) ? ~0ULL : ((1ULL << len) - 1));
}

Network bump_real(double lo, double hi_plus, double eta) {
  if (!(eta > 0.0) || !(eta < 1.0)) throw NetError("bump: eta must be in (0,1)");
  if (!(lo < hi_plus)) throw NetError("bump: need lo < hi");
  NetBuilder nb(1);
  const double k = 1.0 / eta;
  nb.relu_layer({
      Lin(0, -k, lo * k),                  // sigma(-(x - lo)/eta)
      Lin(0, k, -(hi_plus - eta) * k),     // sigma((x - (hi - eta))/eta)
  });
  nb.relu_layer({
      Lin(0, -1.0, 1.0),
      Lin(1, -1.0, 1.0),
  });
  Lin out;
  out.add(0, 1.0).add(1, 1.0).shift(-1.0);
  return nb.output({out});
}

Network bump(std::size_t m, std::size_t n, double eta) {
  if (m >= n) throw NetError("bump: need m < n");
  return bump_real(static_cast<double>(m), static_cast<double>(n), eta);
}

Network triangle() {
  NetBuilder nb(1);
  nb.relu_layer({Lin(0, 2.0), Lin(0, 4.0, -2.0)});
  nb.relu_layer({Lin(0, 1.0).add(1, -1.0)});
  return nb.output({Lin(0, 1.0)});
}

FloorInfo floor_info(std::size_t n, double gamma) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw NetError("floor: gamma must be in (0,1)");
  const int g = static_cast<int>(std::ceil(std::log2(1.0 / gamma)));
  return FloorInfo{pow2(-g), 2 * n + static_cast<std::size_t>(g)};
}

namespace {

// Delta-block iteration: Floor_n(x) = Delta^n(-x/2^n + 1) + x - 1, with the
// relu surrogate of Delta from four units (a fifth ramp at z = 1 would vanish
// on [0,1] anyway, so the carry row fits the width-5 budget). In minimal
// form the top ramp unit is dropped as well: it only matters on [1 - g_n, 1],
// which the range [0, 2^n) never reaches through the iteration.
void emit_floor_block(NetBuilder& nb, std::size_t x_idx, std::size_t n, double gamma,
                      bool minimal, double pre_shift) {
  const double g2 = floor_info(n, gamma).gamma_used;
  const double gn = g2 / pow2(static_cast<int>(n));  // per-level ramp width
  const double k = 1.0 / gn;                         // power of two, exact
  const std::size_t units = minimal ? 3 : 4;

  // first layer reads z = -(x + pre_shift)/2^n + 1 off the incoming rail
  const double a = -1.0 / pow2(static_cast<int>(n));
  auto z_of_input = [&](double coef_shift) {
    return Lin(x_idx, a, 1.0 + a * pre_shift + coef_shift);
  };
  std::vector<Lin> first{
      z_of_input(0.0),          // sigma(z)
      z_of_input(-(0.5 - gn)),  // sigma(z - 1/2 + gn)
      z_of_input(-0.5),         // sigma(z - 1/2)
  };
  if (!minimal) first.push_back(z_of_input(-(1.0 - gn)));  // sigma(z - 1 + gn)
  first.push_back(Lin(x_idx, 1.0, pre_shift));             // carry x
  nb.relu_layer(first);

  // z' = 2 u1 - K u2 + K u3 [- K u4]
  auto z_next = [&](double shift) {
    Lin l;
    l.add(0, 2.0).add(1, -k).add(2, k).shift(shift);
    if (!minimal) l.add(3, -k);
    return l;
  };
  for (std::size_t ell = 1; ell < n; ++ell) {
    std::vector<Lin> rows{
        z_next(0.0),
        z_next(-(0.5 - gn)),
        z_next(-0.5),
    };
    if (!minimal) rows.push_back(z_next(-(1.0 - gn)));
    rows.push_back(Lin(units, 1.0));
    nb.relu_layer(rows);
  }
  // landing layer: v = Delta^n(z) + x - 1, carried on one nonnegative rail
  Lin out = z_next(-1.0);
  out.add(units, 1.0);
  nb.relu_layer({out});
}

Network floor_core(std::size_t n, double gamma, bool minimal, bool snap) {
  if (n < 1) throw NetError("floor: need n >= 1");
  NetBuilder nb(1);
  emit_floor_block(nb, 0, n, gamma, minimal, 0.0);
  if (snap) emit_floor_block(nb, 0, n, 0.25, minimal, 0.5);
  return nb.output({Lin(0, 1.0)});
}

}  // namespace

Network floor_gadget(std::size_t n, double gamma) {
  if (n < 1) throw NetError("floor: need n >= 1");
  const double g2 = floor_info(n, gamma).gamma_used;
  const double gn = g2 / pow2(static_cast<int>(n));
  const double k = 1.0 / gn;
  NetBuilder nb(1);
  const double a = -1.0 / pow2(static_cast<int>(n));
  auto z_of_input = [&](double coef_shift) {
    return Lin(0, a, 1.0 + coef_shift);
  };
  nb.relu_layer({
      z_of_input(0.0),              // sigma(z)
      z_of_input(-(0.5 - gn)),      // sigma(z - 1/2 + gn)
      z_of_input(-0.5),             // sigma(z - 1/2)
      z_of_input(-(1.0 - gn)),      // sigma(z - 1 + gn)
      Lin(0, 1.0),                  // carry x
  });
  auto z_next = [&](double shift) {
    Lin l;
    l.add(0, 2.0).add(1, -k).add(2, k).add(3, -k).shift(shift);
    return l;
  };
  for (std::size_t ell = 1; ell < n; ++ell) {
    nb.relu_layer({
        z_next(0.0),
        z_next(-(0.5 - gn)),
        z_next(-0.5),
        z_next(-(1.0 - gn)),
        Lin(4, 1.0),
    });
  }
  Lin out = z_next(-1.0);
  out.add(4, 1.0);
  return nb.output({out});
}

Network flatten_with_coeffs(std::size_t m, const std::vector<double>& coeffs, std::size_t n_f,
                            double gamma, const FlattenOpts& opts) {
  if (m < 1 || coeffs.size() != m) throw NetError("flatten: bad coefficient count");
  std::vector<Network> floors;
  std::vector<std::pair<std::size_t, std::size_t>> slices;
  floors.reserve(m);
  Network one = (opts.minimal || opts.snap) ? floor_core(n_f, gamma, opts.minimal, opts.snap)
                                            : floor_gadget(n_f, gamma);
  for (std::size_t j = 0; j < m; ++j) {
    floors.push_back(one);
    slices.emplace_back(j, 1);
  }
  Network stacked = stack_parallel(floors, slices);
  NetBuilder comb(m);
  Lin out;
  for (std::size_t j = 0; j < m; ++j) out.add(j, coeffs[j]);
  return compose_serial(stacked, comb.output({out}), Junction::Merge);
}

Network flatten_gadget(std::size_t m, std::size_t R, double gamma) {
  if (R < 2) throw NetError("flatten: need R >= 2");
  const std::size_t n_f =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log2(double(R)))));
  if (static_cast<double>(m) * std::log2(double(R)) > 52.0)
    throw NetError("flatten: radix R^m exceeds binary64 exact-integer range");
  std::vector<double> coeffs(m);
  double c = 1.0;
  for (std::size_t j = m; j-- > 0;) {
    coeffs[j] = c;
    c *= static_cast<double>(R);
  }
  return flatten_with_coeffs(m, coeffs, n_f, gamma);
}

namespace {

// Shared skeleton for the interval memorizer. When u_values is non-null the
// network emits (v, w_sel, u_sel) with v = x+1 clamped; otherwise the scalar
// form. Width 4 (scalar) / 5 (word variant), depth 3*N1 + 2.
Network interval_core(const std::vector<std::uint64_t>& ms, std::size_t n1, std::size_t n2,
                      const std::vector<std::uint64_t>& w_values,
                      const std::vector<std::uint64_t>* u_values, double eta, double slack) {
  if (!(eta > 0.0) || !(eta < 1.0)) throw NetError("interval_memorizer: eta must be in (0,1)");
  if (slack < 0.0 || slack + eta >= 1.0)
    throw NetError("interval_memorizer: need 0 <= slack < 1 - eta");
  const std::size_t n = ms.size();
  if (n == 0) throw NetError("interval_memorizer: no keys");
  if (n1 * n2 < n) throw NetError("interval_memorizer: need N1*N2 >= N");
  if (w_values.size() != n1) throw NetError("interval_memorizer: need N1 group values");
  for (std::size_t i = 1; i < n; ++i)
    if (ms[i] <= ms[i - 1]) throw NetError("interval_memorizer: keys must be strictly increasing");

  const bool words = (u_values != nullptr);
  const double ke = 1.0 / eta;
  NetBuilder nb(1);
  nb.relu_layer({Lin(0, 1.0, 1.0)});  // v = sigma(x + 1)

  // rail indices in the current layer
  std::size_t iv = 0, iw = 0, iu = 0;
  bool has_acc = false;
  for (std::size_t j = 0; j < n1; ++j) {
    // padded group bounds m_{N+1} = ... = m_N
    const std::uint64_t mlo = ms[std::min(j * n2, n - 1)];
    const std::uint64_t mhi = ms[std::min((j + 1) * n2 - 1, n - 1)];
    const double lo = static_cast<double>(mlo) + 1.0 - slack;  // +1: v coordinates
    const double hi1 = static_cast<double>(mhi) + 2.0; // m_hi + 1 shifted

    // layer A: ramps + carries (v, accs)
    {
      std::vector<Lin> rows;
      rows.push_back(Lin(iv, -ke, lo * ke));          // p1
      rows.push_back(Lin(iv, ke, -(hi1 - eta) * ke)); // p2
      rows.push_back(Lin(iv, 1.0));                   // v
      if (has_acc) {
        rows.push_back(Lin(iw, 1.0));
        if (words) rows.push_back(Lin(iu, 1.0));
      }
      nb.relu_layer(rows);
    }
    // layer B: q's + carries (p1=0, p2=1, v=2, wacc=3, uacc=4)
    {
      std::vector<Lin> rows;
      rows.push_back(Lin(0, -1.0, 1.0));  // q1
      rows.push_back(Lin(1, -1.0, 1.0));  // q2
      rows.push_back(Lin(2, 1.0));        // v
      if (has_acc) {
        rows.push_back(Lin(3, 1.0));
        if (words) rows.push_back(Lin(4, 1.0));
      }
      nb.relu_layer(rows);
    }
    // layer C: accumulate w_j (and u_j) times the indicator q1 + q2 - 1
    {
      std::vector<Lin> rows;
      rows.push_back(Lin(2, 1.0));  // v
      const double wj = static_cast<double>(w_values[j]);
      Lin wrow;
      wrow.add(0, wj).add(1, wj).shift(-wj);
      if (has_acc) wrow.add(3, 1.0);
      rows.push_back(wrow);
      if (words) {
        const double uj = static_cast<double>((*u_values)[j]);
        Lin urow;
        urow.add(0, uj).add(1, uj).shift(-uj);
        if (has_acc) urow.add(4, 1.0);
        rows.push_back(urow);
      }
      nb.relu_layer(rows);
      has_acc = true;
      iv = 0;
      iw = 1;
      iu = 2;
    }
  }
  // extraction layer (counts toward the +2)
  if (words) {
    nb.relu_layer({Lin(iv, 1.0), Lin(iw, 1.0), Lin(iu, 1.0)});
    return nb.output({Lin(0, 1.0), Lin(1, 1.0), Lin(2, 1.0)});
  }
  nb.relu_layer({Lin(iw, 1.0)});
  return nb.output({Lin(0, 1.0)});
}

}  // namespace

Network interval_memorizer(const std::vector<std::uint64_t>& sorted_ms, std::size_t n1,
                           std::size_t n2, const std::vector<std::uint64_t>& group_values,
                           double eta, double slack) {
  return interval_core(sorted_ms, n1, n2, group_values, nullptr, eta, slack);
}

// Paired tent-map encodings: after t tent steps the two encodings of a word
// sit exactly 2^(t-B-2) apart, and their order flips precisely when the t-th
// bit (MSB-first) of the word is 1. One relu unit per bit reads this off
// exactly; segment accumulators rebuild the key and value words, and a bump
// against x gates each value segment into the output.
Network bit_extractor(std::size_t n, std::size_t bits_key, std::size_t bits_val, double eta,
                      bool input_prescaled, double slack) {
  if (n < 1 || bits_key < 1 || bits_val < 1) throw NetError("bit_extractor: bad arity");
  if (!(eta > 0.0) || !(eta < 1.0)) throw NetError("bit_extractor: eta must be in (0,1)");
  if (slack < 0.0 || slack + eta >= 1.0) throw NetError("bit_extractor: need 0 <= slack < 1 - eta");
  const std::size_t bu = bits_key, bw = bits_val;
  const std::size_t Bu = n * bu, Bw = n * bw;
  if (Bu > 50 || Bw > 50)
    throw NetError("bit_extractor: packed word exceeds exact binary64 range (n*bits > 50)");
  const std::size_t maxb = std::max(bu, bw);
  const double ke = 1.0 / eta;
  const double gate = pow2(static_cast<int>(bw) + 1);

  NetBuilder nb(3);  // (x, w, u)

  // H layer: tent encodings + shifted x rail
  nb.relu_layer({
      Lin(2, pow2(-(int)Bu), pow2(-(int)Bu - 1)),  // su
      Lin(2, pow2(-(int)Bu), pow2(-(int)Bu - 2)),  // su'
      Lin(1, pow2(-(int)Bw), pow2(-(int)Bw - 1)),  // sw
      Lin(1, pow2(-(int)Bw), pow2(-(int)Bw - 2)),  // sw'
      Lin(0, 1.0, input_prescaled ? 0.0 : 1.0),    // v
  });
  // rail indices after H
  std::size_t su = 0, su2 = 1, sw = 2, sw2 = 3, v = 4;
  std::size_t y = 0, keyacc = 0, valacc = 0, q1 = 0, q2 = 0;
  bool has_y = false, has_q = false;

  for (std::size_t seg = 0; seg < n; ++seg) {
    bool has_key = false, has_val = false;
    for (std::size_t t = 1; t <= maxb; ++t) {
      const bool au = t <= bu, aw = t <= bw;
      // ---- L1: tent working units (or carries) + accs + optional gate
      std::vector<Lin> rows;
      std::size_t a1u = 0, a2u = 0, a1u2 = 0, a2u2 = 0, cu = 0, cu2 = 0;
      std::size_t a1w = 0, a2w = 0, a1w2 = 0, a2w2 = 0, cw = 0, cw2 = 0;
      if (au) {
        a1u = rows.size(); rows.push_back(Lin(su, 2.0));
        a2u = rows.size(); rows.push_back(Lin(su, 4.0, -2.0));
        a1u2 = rows.size(); rows.push_back(Lin(su2, 2.0));
        a2u2 = rows.size(); rows.push_back(Lin(su2, 4.0, -2.0));
      } else {
        cu = rows.size(); rows.push_back(Lin(su, 1.0));
        cu2 = rows.size(); rows.push_back(Lin(su2, 1.0));
      }
      if (aw) {
        a1w = rows.size(); rows.push_back(Lin(sw, 2.0));
        a2w = rows.size(); rows.push_back(Lin(sw, 4.0, -2.0));
        a1w2 = rows.size(); rows.push_back(Lin(sw2, 2.0));
        a2w2 = rows.size(); rows.push_back(Lin(sw2, 4.0, -2.0));
      } else {
        cw = rows.size(); rows.push_back(Lin(sw, 1.0));
        cw2 = rows.size(); rows.push_back(Lin(sw2, 1.0));
      }
      std::size_t ka = 0, va = 0, gu = 0, vv = 0, yy = 0;
      if (has_key) { ka = rows.size(); rows.push_back(Lin(keyacc, 1.0)); }
      if (has_val) { va = rows.size(); rows.push_back(Lin(valacc, 1.0)); }
      if (t == 1 && has_q) {
        // gate of the previous segment: sigma(2^(bw+1)(q1 + q2 - 2) + valacc)
        Lin g;
        g.add(q1, gate).add(q2, gate).add(valacc, 1.0).shift(-2.0 * gate);
        gu = rows.size(); rows.push_back(g);
      }
      vv = rows.size(); rows.push_back(Lin(v, 1.0));
      if (has_y) { yy = rows.size(); rows.push_back(Lin(y, 1.0)); }
      nb.relu_layer(rows);

      // ---- L2: landed iterates + bit indicators + carries (+ y update)
      std::vector<Lin> rows2;
      std::size_t nsu = 0, nsu2 = 0, pu = 0, nsw = 0, nsw2 = 0, pw = 0;
      if (au) {
        Lin s(a1u, 1.0); s.add(a2u, -1.0);
        nsu = rows2.size(); rows2.push_back(s);
        Lin s2(a1u2, 1.0); s2.add(a2u2, -1.0);
        nsu2 = rows2.size(); rows2.push_back(s2);
        const std::size_t tglob = seg * bu + t;
        const double inv_gap = pow2(static_cast<int>(Bu) + 2 - static_cast<int>(tglob));
        Lin p;  // sigma((s' - s)/gap), exactly 0 or 1
        p.add(a1u2, inv_gap).add(a2u2, -inv_gap).add(a1u, -inv_gap).add(a2u, inv_gap);
        pu = rows2.size(); rows2.push_back(p);
      } else {
        nsu = rows2.size(); rows2.push_back(Lin(cu, 1.0));
        nsu2 = rows2.size(); rows2.push_back(Lin(cu2, 1.0));
      }
      if (aw) {
        Lin s(a1w, 1.0); s.add(a2w, -1.0);
        nsw = rows2.size(); rows2.push_back(s);
        Lin s2(a1w2, 1.0); s2.add(a2w2, -1.0);
        nsw2 = rows2.size(); rows2.push_back(s2);
        const std::size_t tglob = seg * bw + t;
        const double inv_gap = pow2(static_cast<int>(Bw) + 2 - static_cast<int>(tglob));
        Lin p;
        p.add(a1w2, inv_gap).add(a2w2, -inv_gap).add(a1w, -inv_gap).add(a2w, inv_gap);
        pw = rows2.size(); rows2.push_back(p);
      } else {
        nsw = rows2.size(); rows2.push_back(Lin(cw, 1.0));
        nsw2 = rows2.size(); rows2.push_back(Lin(cw2, 1.0));
      }
      std::size_t ka2 = 0, va2 = 0, vv2 = 0, yy2 = 0;
      if (has_key) { ka2 = rows2.size(); rows2.push_back(Lin(ka, 1.0)); }
      if (has_val) { va2 = rows2.size(); rows2.push_back(Lin(va, 1.0)); }
      vv2 = rows2.size(); rows2.push_back(Lin(vv, 1.0));
      if (t == 1 && has_q) {
        Lin yrow(gu, 1.0);
        if (has_y) yrow.add(yy, 1.0);
        yy2 = rows2.size(); rows2.push_back(yrow);
        has_y = true;
      } else if (has_y) {
        yy2 = rows2.size(); rows2.push_back(Lin(yy, 1.0));
      }
      nb.relu_layer(rows2);

      // ---- L3: carry iterates, fold bit into accumulators
      std::vector<Lin> rows3;
      std::size_t fsu = rows3.size(); rows3.push_back(Lin(nsu, 1.0));
      std::size_t fsu2 = rows3.size(); rows3.push_back(Lin(nsu2, 1.0));
      std::size_t fka = 0;
      if (au) {
        Lin acc(pu, pow2(static_cast<int>(bu) - static_cast<int>(t)));
        if (has_key) acc.add(ka2, 1.0);
        fka = rows3.size(); rows3.push_back(acc);
        has_key = true;
      } else {  // has_key necessarily true here
        fka = rows3.size(); rows3.push_back(Lin(ka2, 1.0));
      }
      std::size_t fsw = rows3.size(); rows3.push_back(Lin(nsw, 1.0));
      std::size_t fsw2 = rows3.size(); rows3.push_back(Lin(nsw2, 1.0));
      std::size_t fva = 0;
      if (aw) {
        Lin acc(pw, pow2(static_cast<int>(bw) - static_cast<int>(t)));
        if (has_val) acc.add(va2, 1.0);
        fva = rows3.size(); rows3.push_back(acc);
        has_val = true;
      } else {
        fva = rows3.size(); rows3.push_back(Lin(va2, 1.0));
      }
      std::size_t fvv = rows3.size(); rows3.push_back(Lin(vv2, 1.0));
      std::size_t fyy = 0;
      if (has_y) { fyy = rows3.size(); rows3.push_back(Lin(yy2, 1.0)); }
      nb.relu_layer(rows3);

      su = fsu; su2 = fsu2; keyacc = fka; sw = fsw; sw2 = fsw2; valacc = fva; v = fvv;
      if (has_y) y = fyy;
    }

    // ---- boundary B1/B2: bump of v against keyacc + 1
    {
      std::vector<Lin> rows;
      Lin p1; p1.add(keyacc, ke).add(v, -ke).shift((1.0 - slack) * ke);  // ((key+1-slack) - v)/eta
      Lin p2; p2.add(v, ke).add(keyacc, -ke).shift((eta - 2.0) * ke); // (v - (key+2-eta))/eta
      std::size_t ip1 = rows.size(); rows.push_back(p1);
      std::size_t ip2 = rows.size(); rows.push_back(p2);
      std::size_t c0 = rows.size(); rows.push_back(Lin(su, 1.0));
      std::size_t c1 = rows.size(); rows.push_back(Lin(su2, 1.0));
      std::size_t c2 = rows.size(); rows.push_back(Lin(sw, 1.0));
      std::size_t c3 = rows.size(); rows.push_back(Lin(sw2, 1.0));
      std::size_t c4 = rows.size(); rows.push_back(Lin(valacc, 1.0));
      std::size_t c5 = rows.size(); rows.push_back(Lin(v, 1.0));
      std::size_t c6 = 0;
      if (has_y) { c6 = rows.size(); rows.push_back(Lin(y, 1.0)); }
      nb.relu_layer(rows);

      std::vector<Lin> rows2;
      std::size_t iq1 = rows2.size(); rows2.push_back(Lin(ip1, -1.0, 1.0));
      std::size_t iq2 = rows2.size(); rows2.push_back(Lin(ip2, -1.0, 1.0));
      std::size_t d0 = rows2.size(); rows2.push_back(Lin(c0, 1.0));
      std::size_t d1 = rows2.size(); rows2.push_back(Lin(c1, 1.0));
      std::size_t d2 = rows2.size(); rows2.push_back(Lin(c2, 1.0));
      std::size_t d3 = rows2.size(); rows2.push_back(Lin(c3, 1.0));
      std::size_t d4 = rows2.size(); rows2.push_back(Lin(c4, 1.0));
      std::size_t d5 = rows2.size(); rows2.push_back(Lin(c5, 1.0));
      std::size_t d6 = 0;
      if (has_y) { d6 = rows2.size(); rows2.push_back(Lin(c6, 1.0)); }
      nb.relu_layer(rows2);

      q1 = iq1; q2 = iq2; su = d0; su2 = d1; sw = d2; sw2 = d3; valacc = d4; v = d5;
      if (has_y) y = d6;
      has_q = true;
    }
  }

  // G layer: last gate + y carry
  {
    std::vector<Lin> rows;
    Lin g;
    g.add(q1, gate).add(q2, gate).add(valacc, 1.0).shift(-2.0 * gate);
    rows.push_back(g);
    if (has_y) rows.push_back(Lin(y, 1.0));
    nb.relu_layer(rows);
  }
  Lin out(0, 1.0);
  if (has_y) out.add(1, 1.0);
  return nb.output({out});
}

Network integer_memorizer(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& pairs,
                          double slack) {
  if (pairs.empty()) throw NetError("integer_memorizer: no pairs");
  auto sorted = pairs;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].first == sorted[i - 1].first)
      throw NetError("integer_memorizer: duplicate key " + std::to_string(sorted[i].first));

  const std::size_t n = sorted.size();
  std::uint64_t max_key = 0, max_val = 0;
  for (const auto& [m, y] : sorted) {
    max_key = std::max(max_key, m);
    if (y < 1) throw NetError("integer_memorizer: labels must be >= 1");
    max_val = std::max(max_val, y);
  }
  const std::size_t bu = std::max<std::size_t>(2, bit_width(max_key));
  const std::size_t bw = std::max<std::size_t>(2, bit_width(max_val));
  if (bu > 48) throw NetError("integer_memorizer: keys too large for exact binary64 evaluation");

  // group size: sqrt(N) when the packed words stay in exact double range
  const std::size_t word_cap = 50 / std::max(bu, bw);
  const std::size_t ng = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::sqrt(double(n))) + 1, word_cap));
  const std::size_t n1 = (n + ng - 1) / ng;

  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = sorted[i].first;

  std::vector<std::uint64_t> u_words(n1, 0), w_words(n1, 0);
  for (std::size_t j = 0; j < n1; ++j) {
    for (std::size_t k = 0; k < ng; ++k) {
      const std::size_t idx = std::min(j * ng + k, n - 1);
      const bool pad = (j * ng + k >= n);
      u_words[j] = (u_words[j] << bu) | sorted[idx].first;
      w_words[j] = (w_words[j] << bw) | (pad ? 0 : sorted[idx].second);
    }
  }
  // key segments must be pairwise distinct within each word: guaranteed here
  // since keys are globally distinct and padding carries value 0

  Network f1 = interval_core(keys, n1, ng, w_words, &u_words, 0.5, slack);
  Network f2 = bit_extractor(ng, bu, bw, 0.5, /*input_prescaled=*/true, slack);
  return compose_serial(f1, f2, Junction::Merge);
}

Network running_max() {
  NetBuilder nb(2);
  nb.relu_layer({Lin(0, 1.0), Lin(0, -1.0), Lin(1, 1.0).add(0, -1.0)});
  Lin out;
  out.add(0, 1.0).add(1, -1.0).add(2, 1.0);
  return nb.output({out});
}

Network square_approx(std::size_t k) {
  if (k < 1) throw NetError("square_approx: need k >= 1");
  NetBuilder nb(1);
  nb.relu_layer({Lin(0, 1.0), Lin(0, 1.0)});  // v = t, acc = t
  for (std::size_t s = 1; s <= k; ++s) {
    nb.relu_layer({Lin(0, 2.0), Lin(0, 4.0, -2.0), Lin(1, 1.0)});
    const double q = pow2(-2 * static_cast<int>(s));
    Lin acc(2, 1.0);
    acc.add(0, -q).add(1, q);  // acc - phi/4^s, phi = w1 - w2 >= 0 on [0,1]
    nb.relu_layer({Lin(0, 1.0).add(1, -1.0), acc});
  }
  return nb.output({Lin(1, 1.0)});
}

}  // namespace rmnet::gadgets
