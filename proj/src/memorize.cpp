#include "rmnet/memorize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "rmnet/bounds.hpp"
#include "rmnet/gadgets.hpp"
#include "rmnet/lattice.hpp"
#include "rmnet/reduce.hpp"

namespace rmnet {

namespace {

double pow2_floor(double x) {
  if (!(x > 0.0)) throw ConstructError("pow2_floor: nonpositive");
  return std::ldexp(1.0, static_cast<int>(std::floor(std::log2(x))));
}

Network identity_net(std::size_t dim) {
  NetBuilder nb(dim);
  std::vector<Lin> rows;
  for (std::size_t i = 0; i < dim; ++i) rows.emplace_back(i, 1.0);
  return nb.output(rows);
}

// in-place serial append, avoiding the O(chain^2) copies of compose_serial
void append_serial(Network& f, const Network& g, Junction j = Junction::Merge) {
  Network merged = compose_serial(f, g, j);
  f = std::move(merged);
}

// -- stage I: projection, scaling, certified quantization, relu-safe bias ----

struct StageOne {
  Network layer;                          // d -> m, one relu layer + id out
  std::vector<std::vector<double>> z;     // images of the data points
  double eps_img = 0.0;                   // separation of (z, labels)
  double nu = 0.0;
  std::size_t m = 0;
  std::size_t frac_bits = 0;
  double jl_ratio = 0.0;
};

StageOne stage_one(const Dataset& ds, double rho, Rng& rng) {
  const std::size_t n = ds.size(), d = ds.d;
  const double eps = separation(ds, NormIndex::finite(2.0));
  const double mu = rho * eps;
  const std::size_t m = proj_log_dim(n, d);

  Projection proj = jl_project(ds, m, /*default target*/ -1.0, 64, rng);

  const double lip = (11.0 / 9.0) * std::sqrt(static_cast<double>(d)) / eps;
  double rbar = 0.0;
  for (const auto& p : ds.points) rbar = std::max(rbar, norm_p(p, NormIndex::finite(2.0)));
  rbar += mu;

  const double nu = std::min({(109.0 / 11880.0) * std::sqrt(static_cast<double>(m)), mu / 88.0,
                              1.0 / (360.0 * static_cast<double>(n)), 1.0});

  // scaled projection, snapped so that |A_bar x - A x| <= nu on ||x|| <= rbar
  std::vector<std::vector<double>> a(m, std::vector<double>(d));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) a[i][j] = lip * proj.matrix[i][j];
  const double need =
      std::log2(std::sqrt(static_cast<double>(m * d)) * std::max(rbar, 1.0) / nu) + 1.0;
  const std::size_t f1 = static_cast<std::size_t>(std::clamp(std::ceil(need), 0.0, 52.0));
  for (auto& row : a)
    for (double& v : row) v = round_half_even(v, f1);

  std::vector<double> bias = relu_safe_bias(a, rbar);  // + 1 slack absorbs nu
  for (double& v : bias) v = std::ceil(v * std::ldexp(1.0, (int)f1)) / std::ldexp(1.0, (int)f1);

  NetBuilder nb(d);
  std::vector<Lin> rows(m);
  for (std::size_t i = 0; i < m; ++i) {
    rows[i].bias = bias[i];
    for (std::size_t j = 0; j < d; ++j)
      if (a[i][j] != 0.0) rows[i].add(j, a[i][j]);
  }
  nb.relu_layer(rows);
  std::vector<Lin> outs(m);
  for (std::size_t i = 0; i < m; ++i) outs[i] = Lin(i, 1.0);

  StageOne s;
  s.layer = nb.output(outs);
  s.m = m;
  s.nu = nu;
  s.frac_bits = f1;
  s.jl_ratio = proj.achieved_separation_ratio;
  s.z.reserve(n);
  for (const auto& p : ds.points) s.z.push_back(evaluate(s.layer, p));

  Dataset img;
  img.points = s.z;
  img.labels = ds.labels;
  img.d = m;
  img.n_classes = ds.n_classes;
  s.eps_img = separation(img, NormIndex::finite(2.0));
  const double want = std::sqrt(static_cast<double>(m)) / 2.0;
  if (s.eps_img + 1e-9 < want)
    throw ConstructError("stage I: projected separation " + std::to_string(s.eps_img) +
                         " below sqrt(m)/2 = " + std::to_string(want));
  return s;
}

// -- grid indexing: certified separating coefficients -------------------------

struct AuditCell {
  std::vector<std::int64_t> cell;
  std::size_t label;
};

// Integer coefficients c_j such that Sum c_j cell_j is injective on the
// covered cells and never maps an audited foreign cell onto a key of a
// different label. Retries with fresh draws; same-cell label conflicts are a
// construction-invariant violation and throw immediately.
std::vector<double> separating_coeffs(const std::vector<std::vector<std::int64_t>>& cells,
                                      const std::vector<std::size_t>& labels,
                                      const std::vector<AuditCell>& audit, Rng& rng) {
  const std::size_t m = cells[0].size();
  std::map<std::vector<std::int64_t>, std::size_t> cell_label;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto [it, fresh] = cell_label.emplace(cells[i], labels[i]);
    if (!fresh && it->second != labels[i])
      throw ConstructError("grid indexing: two covered points with different labels share a cell");
  }
  const std::size_t pairs =
      cell_label.size() * (cell_label.size() - 1) / 2 + cell_label.size() * audit.size();
  std::uint64_t range = 64;
  while (range < 4 * std::max<std::size_t>(pairs, 1)) range <<= 1;

  std::int64_t max_cell = 1;
  for (const auto& [c, lab] : cell_label)
    for (auto v : c) max_cell = std::max(max_cell, v);
  for (const auto& a : audit)
    for (auto v : a.cell) max_cell = std::max<std::int64_t>(max_cell, std::llabs(v));
  if (static_cast<double>(range) * static_cast<double>(max_cell) * static_cast<double>(m) >
      std::ldexp(1.0, 48))
    throw ConstructError("grid indexing: index range exceeds exact binary64 integers");

  for (std::size_t attempt = 0; attempt < 64; ++attempt) {
    std::vector<std::int64_t> c(m);
    for (auto& v : c) v = 1 + static_cast<std::int64_t>(rng.below(range));
    auto index_of = [&](const std::vector<std::int64_t>& cell) {
      std::int64_t s = 0;
      for (std::size_t j = 0; j < m; ++j) s += c[j] * cell[j];
      return s;
    };
    std::unordered_map<std::int64_t, std::size_t> key_label;
    bool ok = true;
    for (const auto& [cell, lab] : cell_label) {
      auto [it, fresh] = key_label.emplace(index_of(cell), lab);
      if (!fresh) {
        ok = false;  // two distinct cells collided
        break;
      }
    }
    if (ok) {
      for (const auto& a : audit) {
        auto it = key_label.find(index_of(a.cell));
        if (it != key_label.end() && it->second != a.label) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      std::vector<double> out(m);
      for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<double>(c[j]);
      return out;
    }
  }
  throw ConstructError("grid indexing: no separating coefficients after 64 draws");
}

struct IndexingStage {
  Network net;  // m -> 1: translation, floors, combining form
  std::vector<std::pair<std::uint64_t, std::uint64_t>> keys;  // (index, label), deduplicated
  double gamma = 0.0;
  std::size_t n_f = 0;
  GridTranslation gt;
};

// Translate away from the lattice, floor coordinate-wise, combine with
// separating coefficients, and collect the key set of the covered points.
// snap_cells composes a second coarse floor per coordinate so the combining
// form sees exact integers even when gamma is very fine (the moderate regime
// drives gamma far below the binary64 drift of the Delta iteration otherwise).
IndexingStage build_indexing(const std::vector<std::vector<double>>& z_all,
                             const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& covered, std::size_t margin_n,
                             double mu_ball, double gamma_cap, std::size_t audit_per_ball,
                             bool snap_cells, Rng& rng) {
  const std::size_t m = z_all[0].size();
  std::vector<std::vector<double>> cov_pts;
  cov_pts.reserve(covered.size());
  for (std::size_t i : covered) cov_pts.push_back(z_all[i]);

  IndexingStage st;
  st.gt = grid_translate(cov_pts, margin_n, z_all);
  const double margin = st.gt.achieved_margin_quantized;
  if (margin <= mu_ball)
    throw ConstructError("grid indexing: lattice margin does not clear the ball radius");
  st.gamma = pow2_floor(std::min(gamma_cap, (margin - mu_ball) / 2.0));

  auto translate = [&](const std::vector<double>& z) {
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j)
      out[j] = z[j] - st.gt.b_quantized[j] + st.gt.positivity_shift[j];
    return out;
  };

  double zmax = 0.0;
  for (const auto& z : z_all) {
    const auto t = translate(z);
    for (double v : t) zmax = std::max(zmax, v);
  }
  st.n_f = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::log2(zmax + mu_ball + 2.0))));

  auto cell_of = [&](const std::vector<double>& t) {
    std::vector<std::int64_t> c(m);
    for (std::size_t j = 0; j < m; ++j) c[j] = static_cast<std::int64_t>(std::floor(t[j]));
    return c;
  };

  std::vector<std::vector<std::int64_t>> cells;
  std::vector<std::size_t> cell_labels;
  for (std::size_t i : covered) {
    cells.push_back(cell_of(translate(z_all[i])));
    cell_labels.push_back(labels[i]);
  }

  std::vector<AuditCell> audit;
  if (audit_per_ball > 0) {
    std::unordered_set<std::size_t> covered_set(covered.begin(), covered.end());
    std::set<std::pair<std::vector<std::int64_t>, std::size_t>> seen;
    for (std::size_t i = 0; i < z_all.size(); ++i) {
      if (covered_set.count(i)) continue;
      const auto t0 = translate(z_all[i]);
      for (const auto& s : sample_ball(t0, mu_ball, NormIndex::finite(2.0), rng, audit_per_ball)) {
        auto c = cell_of(s);
        if (seen.insert({c, labels[i]}).second) audit.push_back({std::move(c), labels[i]});
      }
    }
  }

  std::vector<double> coeffs = separating_coeffs(cells, cell_labels, audit, rng);

  std::map<std::pair<std::uint64_t, std::uint64_t>, bool> dedup;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    double idx = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      idx += coeffs[j] * static_cast<double>(cells[k][j]);
    dedup[{static_cast<std::uint64_t>(idx), cell_labels[k]}] = true;
  }
  for (const auto& [key, _] : dedup) st.keys.push_back(key);

  // translation layer then floors with the combining form
  NetBuilder tb(m);
  std::vector<Lin> trows(m);
  for (std::size_t j = 0; j < m; ++j)
    trows[j] = Lin(j, 1.0, -st.gt.b_quantized[j] + st.gt.positivity_shift[j]);
  tb.relu_layer(trows);
  std::vector<Lin> touts(m);
  for (std::size_t j = 0; j < m; ++j) touts[j] = Lin(j, 1.0);
  st.net = tb.output(touts);
  gadgets::FlattenOpts fo;
  fo.minimal = true;
  fo.snap = snap_cells;
  append_serial(st.net, gadgets::flatten_with_coeffs(m, coeffs, st.n_f, st.gamma, fo));

  // certified drift budget: the index must land within half the gate slack
  double maxc = 0.0;
  for (double c : coeffs) maxc = std::max(maxc, c);
  const int lt = snap_cells ? 2 : static_cast<int>(std::round(std::log2(1.0 / st.gamma)));
  const double drift = static_cast<double>(m) * maxc *
                       std::ldexp(1.0, 2 * static_cast<int>(st.n_f) + lt - 52);
  if (drift > 0.125)
    throw ConstructError("grid indexing: floor drift budget exceeded (" +
                         std::to_string(drift) + "); index range too large for binary64");
  return st;
}

ResourceProfile log_stage(RegimeReport& rep, const std::string& name, const Network& net,
                          const std::string& info = "") {
  ResourceProfile r = resources(net);
  rep.stages.push_back({name, r, info});
  return r;
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Small: return "small";
    case Regime::Moderate: return "moderate";
    default: return "large";
  }
}

double small_threshold(std::size_t n, std::size_t d) {
  return 1.0 / (5.0 * static_cast<double>(n) * std::sqrt(static_cast<double>(d)));
}

double moderate_threshold(std::size_t d) { return 1.0 / (5.0 * std::sqrt(static_cast<double>(d))); }

// -- small regime --------------------------------------------------------------

std::pair<Network, RegimeReport> construct_small_rho(const Dataset& ds, double rho,
                                                     std::uint64_t seed) {
  ds.validate();
  const std::size_t n = ds.size();
  if (!(rho > 0.0) || rho > small_threshold(n, ds.d) * (1.0 + 1e-12))
    throw ConstructError("small regime requires rho in (0, 1/(5 N sqrt(d))]");

  RegimeReport rep;
  rep.regime = Regime::Small;
  rep.rho = rho;
  rep.seed = seed;
  rep.epsilon = separation(ds, NormIndex::finite(2.0));
  rep.mu = rho * rep.epsilon;
  rep.theoretical_param_bound = std::sqrt(static_cast<double>(n));

  Rng rng1 = Rng::split(seed, 0x101);
  StageOne s1 = stage_one(ds, rho, rng1);
  rep.proj_dim = s1.m;
  log_stage(rep, "projection", s1.layer,
            "m=" + std::to_string(s1.m) + " nu=" + std::to_string(s1.nu) +
                " ratio=" + std::to_string(s1.jl_ratio));

  const double mu3 = 1.0 / (4.0 * static_cast<double>(n));
  std::vector<std::size_t> covered(n);
  for (std::size_t i = 0; i < n; ++i) covered[i] = i;
  Rng rng2 = Rng::split(seed, 0x102);
  IndexingStage idx = build_indexing(s1.z, ds.labels, covered, n, mu3,
                                     1.0 / (4.0 * static_cast<double>(n)), 0,
                                     /*snap_cells=*/false, rng2);
  log_stage(rep, "grid-indexing", idx.net,
            "gamma=" + std::to_string(idx.gamma) + " n_f=" + std::to_string(idx.n_f) +
                " margin=" + std::to_string(idx.gt.achieved_margin_quantized));

  Network mem = gadgets::integer_memorizer(idx.keys, 0.25);
  log_stage(rep, "integer-memorizer", mem, "keys=" + std::to_string(idx.keys.size()));

  Network net = s1.layer;
  append_serial(net, idx.net);
  append_serial(net, mem);
  rep.achieved = resources(net);
  return {std::move(net), std::move(rep)};
}

// -- moderate regime ------------------------------------------------------------

namespace {

// core used by both the public n_alpha_points and the moderate pipeline:
// dataset is the (already projected) point set, I the owned index set.
Network n_alpha_core(const std::vector<std::vector<double>>& z,
                     const std::vector<std::size_t>& labels,
                     const std::vector<std::size_t>& index_set, std::size_t g, double eta,
                     Rng& rng) {
  const std::size_t m = z[0].size();
  const double mu = 1.0 / (4.0 * static_cast<double>(g));
  auto [t, eta_prime] = error_budget_eta_prime(m, mu, eta);
  (void)t;
  IndexingStage idx = build_indexing(z, labels, index_set, g, mu, eta_prime, 192,
                                     /*snap_cells=*/true, rng);
  Network net = idx.net;
  append_serial(net, gadgets::integer_memorizer(idx.keys, 0.25));
  return net;
}

}  // namespace

Network n_alpha_points(const Dataset& ds, const std::vector<std::size_t>& index_set, double rho,
                       double eta, Rng& rng) {
  ds.validate();
  const double eps = separation(ds, NormIndex::finite(2.0));
  if (eps + 1e-9 < std::sqrt(static_cast<double>(ds.d)) / 2.0)
    throw ConstructError("n_alpha_points: separation below sqrt(d)/2");
  if (index_set.empty()) throw ConstructError("n_alpha_points: empty index set");
  const double graw = 1.0 / (4.0 * rho * eps);
  const std::size_t g = static_cast<std::size_t>(std::llround(graw));
  if (g < 1 || std::fabs(graw - static_cast<double>(g)) > 1e-6)
    throw ConstructError("n_alpha_points: rho must equal 1/(4 g eps) for a natural g");
  if (index_set.size() > g)
    throw ConstructError("n_alpha_points: index set exceeds the group size g");
  if (!(eta > 0.0) || !(eta < 1.0)) throw ConstructError("n_alpha_points: eta must be in (0,1)");
  return n_alpha_core(ds.points, ds.labels, index_set, g, eta, rng);
}

std::pair<Network, RegimeReport> construct_moderate_rho(const Dataset& ds, double rho, double eta,
                                                        std::uint64_t seed) {
  ds.validate();
  const std::size_t n = ds.size(), d = ds.d;
  if (rho < small_threshold(n, d) * (1.0 - 1e-12) || rho > moderate_threshold(d) * (1.0 + 1e-12))
    throw ConstructError("moderate regime requires rho in (1/(5 N sqrt(d)), 1/(5 sqrt(d))]");
  if (!(eta > 0.0) || !(eta < 1.0)) throw ConstructError("moderate regime: eta must be in (0,1)");

  RegimeReport rep;
  rep.regime = Regime::Moderate;
  rep.rho = rho;
  rep.seed = seed;
  rep.eta_requested = eta;
  rep.epsilon = separation(ds, NormIndex::finite(2.0));
  rep.mu = rho * rep.epsilon;
  rep.theoretical_param_bound = static_cast<double>(n) *
                                std::pow(static_cast<double>(d), 0.25) * std::sqrt(rho);

  Rng rng1 = Rng::split(seed, 0x201);
  StageOne s1 = stage_one(ds, rho, rng1);
  rep.proj_dim = s1.m;
  const std::size_t m = s1.m;
  log_stage(rep, "projection", s1.layer,
            "m=" + std::to_string(m) + " nu=" + std::to_string(s1.nu));

  // grouping scale: g = floor(1/(5 rho sqrt(d))) points per group
  std::size_t g = static_cast<std::size_t>(std::floor(1.0 / (5.0 * rho * std::sqrt(double(d)))));
  g = std::clamp<std::size_t>(g, 1, n);
  const std::size_t n_groups = (n + g - 1) / g;
  const double eta_group = eta / (16.0 * static_cast<double>(n_groups));
  rep.eta_estimated = eta / 16.0;  // union bound over groups with safety margin

  // chain start: (z, y=0)
  Network chain;
  {
    NetBuilder nb(d);
    const Layer& l1 = s1.layer.layers.front();
    std::vector<Lin> rows(m + 1);
    for (std::size_t i = 0; i < m; ++i) {
      rows[i].bias = l1.b[i];
      for (std::size_t j = 0; j < d; ++j)
        if (l1.at(i, j) != 0.0) rows[i].add(j, l1.at(i, j));
    }
    rows[m] = Lin();  // y rail starts at 0
    nb.relu_layer(rows);
    std::vector<Lin> outs(m + 1);
    for (std::size_t i = 0; i <= m; ++i) outs[i] = Lin(i, 1.0);
    chain = nb.output(outs);
  }

  Rng rng2 = Rng::split(seed, 0x202);
  for (std::size_t j = 0; j < n_groups; ++j) {
    std::vector<std::size_t> idx;
    for (std::size_t i = j * g; i < std::min(n, (j + 1) * g); ++i) idx.push_back(i);
    Network fj = n_alpha_core(s1.z, ds.labels, idx, g, eta_group, rng2);
    if (j == 0)
      log_stage(rep, "group-memorizer", fj,
                "g=" + std::to_string(g) + " groups=" + std::to_string(n_groups) +
                    " eta_group=" + std::to_string(eta_group));
    // widen with carries of (z, y), then the running-max update
    Network aug = stack_parallel({fj, identity_net(m + 1)}, {{0, m}, {0, m + 1}});
    append_serial(chain, aug);
    NetBuilder mb(m + 2);  // [f~, z(m), y]
    std::vector<Lin> rows;
    for (std::size_t kk = 0; kk < m; ++kk) rows.emplace_back(1 + kk, 1.0);
    rows.emplace_back(m + 1, 1.0);                 // y
    rows.push_back(Lin(0, 1.0).add(m + 1, -1.0));  // sigma(f~ - y)
    mb.relu_layer(rows);
    std::vector<Lin> outs(m + 1);
    for (std::size_t kk = 0; kk < m; ++kk) outs[kk] = Lin(kk, 1.0);
    outs[m] = Lin(m, 1.0).add(m + 1, 1.0);  // y + sigma(f~ - y) = max
    append_serial(chain, mb.output(outs));
  }
  {
    NetBuilder ob(m + 1);
    append_serial(chain, ob.output({Lin(m, 1.0)}));
  }
  rep.achieved = resources(chain);
  return {std::move(chain), std::move(rep)};
}

// -- large regime ----------------------------------------------------------------

Network base_memorize(const Dataset& ds, double rho) {
  ds.validate();
  if (!(rho > 0.0) || !(rho < 1.0)) throw ConstructError("base_memorize: rho must be in (0,1)");
  const std::size_t n = ds.size(), d = ds.d;
  const double eps = separation(ds, NormIndex::finite(2.0));
  const double mu = rho * eps;
  const double gamma = (1.0 - rho) * eps;
  double r = 0.0;
  for (const auto& p : ds.points) r = std::max(r, norm_p(p, NormIndex::finite(2.0)));
  const double s = 2.0 * (r + eps);
  const std::size_t k = static_cast<std::size_t>(std::max(
      1.0, std::ceil(0.5 * std::log2(static_cast<double>(d) * s * s / (eps * gamma))) + 2.0));
  const double a_on = mu * mu + eps * gamma;
  const double a_off = (2.0 * eps - mu) * (2.0 * eps - mu) - eps * gamma;
  const double gap = a_off - a_on;  // = 4 eps gamma - 2 eps gamma > 0
  if (!(gap > 0.0)) throw ConstructError("base_memorize: gate gap collapsed");

  NetBuilder nb(d);
  // input two-rail
  {
    std::vector<Lin> rows;
    for (std::size_t j = 0; j < d; ++j) {
      rows.emplace_back(j, 1.0);
      rows.emplace_back(j, -1.0);
    }
    nb.relu_layer(rows);
  }
  bool has_y = false;
  std::size_t y_idx = 0;
  std::size_t carry_gate = 0;  // index of sigma(y_i t_i - y) from the previous block
  bool has_gate = false;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = ds.points[i];
    // diffs: up_j = sigma(x_j - c_j), un_j = sigma(c_j - x_j); x_j = xp - xn
    {
      std::vector<Lin> rows;
      for (std::size_t j = 0; j < d; ++j) {
        rows.push_back(Lin(2 * j, 1.0).add(2 * j + 1, -1.0).shift(-c[j]));
        rows.push_back(Lin(2 * j, -1.0).add(2 * j + 1, 1.0).shift(c[j]));
      }
      if (has_y) {
        Lin yrow(y_idx, 1.0);
        if (has_gate) yrow.add(carry_gate, 1.0);  // fold in max update
        rows.push_back(yrow);
      } else if (has_gate) {
        rows.push_back(Lin(carry_gate, 1.0));
      }
      if (has_gate || has_y) {
        has_y = true;
        y_idx = rows.size() - 1;
        has_gate = false;
      }
      nb.relu_layer(rows);
    }
    // first squaring layer: t_j = (up + un)/s; acc = t; recover x rails
    {
      std::vector<Lin> rows;
      for (std::size_t j = 0; j < d; ++j) {
        Lin t(2 * j, 1.0 / s);
        t.add(2 * j + 1, 1.0 / s);
        Lin w1 = t, w2 = t, acc = t;
        for (auto& term : w1.terms) term.second *= 2.0;
        for (auto& term : w2.terms) term.second *= 4.0;
        w2.shift(-2.0);
        rows.push_back(w1);                                              // 5j
        rows.push_back(w2);                                              // 5j+1
        rows.push_back(acc);                                             // 5j+2
        rows.push_back(Lin(2 * j, 1.0).add(2 * j + 1, -1.0).shift(c[j]));   // xp
        rows.push_back(Lin(2 * j, -1.0).add(2 * j + 1, 1.0).shift(-c[j]));  // xn
      }
      if (has_y) {
        rows.push_back(Lin(y_idx, 1.0));
        y_idx = rows.size() - 1;
      }
      nb.relu_layer(rows);
    }
    // k squaring steps: B then A alternating; layout per j fixed as
    // A: [w1, w2, acc, xp, xn], B: [v, acc, xp, xn]
    for (std::size_t st = 1; st <= k; ++st) {
      const double q = std::ldexp(1.0, -2 * static_cast<int>(st));
      {
        std::vector<Lin> rows;  // B layer
        for (std::size_t j = 0; j < d; ++j) {
          rows.push_back(Lin(5 * j, 1.0).add(5 * j + 1, -1.0));  // v = phi
          rows.push_back(Lin(5 * j + 2, 1.0).add(5 * j, -q).add(5 * j + 1, q));  // acc - phi/4^s
          rows.push_back(Lin(5 * j + 3, 1.0));
          rows.push_back(Lin(5 * j + 4, 1.0));
        }
        if (has_y) {
          rows.push_back(Lin(y_idx, 1.0));
          y_idx = rows.size() - 1;
        }
        nb.relu_layer(rows);
      }
      if (st < k) {
        std::vector<Lin> rows;  // A layer for the next step
        for (std::size_t j = 0; j < d; ++j) {
          rows.push_back(Lin(4 * j, 2.0));
          rows.push_back(Lin(4 * j, 4.0, -2.0));
          rows.push_back(Lin(4 * j + 1, 1.0));
          rows.push_back(Lin(4 * j + 2, 1.0));
          rows.push_back(Lin(4 * j + 3, 1.0));
        }
        if (has_y) {
          rows.push_back(Lin(y_idx, 1.0));
          y_idx = rows.size() - 1;
        }
        nb.relu_layer(rows);
      }
    }
    // gates: s_hat = s^2 sum acc_j (layout B: acc at 4j+1)
    {
      std::vector<Lin> rows;
      Lin g1, g2;
      for (std::size_t j = 0; j < d; ++j) {
        g1.add(4 * j + 1, -s * s);
        g2.add(4 * j + 1, -s * s);
      }
      g1.shift(a_off);
      g2.shift(a_on);
      rows.push_back(g1);
      rows.push_back(g2);
      for (std::size_t j = 0; j < d; ++j) {
        rows.push_back(Lin(4 * j + 2, 1.0));
        rows.push_back(Lin(4 * j + 3, 1.0));
      }
      if (has_y) {
        rows.push_back(Lin(y_idx, 1.0));
        y_idx = rows.size() - 1;
      }
      nb.relu_layer(rows);
    }
    {
      std::vector<Lin> rows;  // gate update: sigma(y_i t_i - y)
      const double yi = static_cast<double>(ds.labels[i]);
      Lin t(0, yi / gap);
      t.add(1, -yi / gap);
      if (has_y) t.add(y_idx, -1.0);
      // x rails back to two-rail layout [xp, xn] per j
      for (std::size_t j = 0; j < d; ++j) {
        rows.push_back(Lin(2 + 2 * j, 1.0));
        rows.push_back(Lin(2 + 2 * j + 1, 1.0));
      }
      if (has_y) {
        rows.push_back(Lin(y_idx, 1.0));
        y_idx = rows.size() - 1;
      }
      rows.push_back(t);
      carry_gate = rows.size() - 1;
      has_gate = true;
      nb.relu_layer(rows);
    }
  }
  Lin out;
  if (has_y) out.add(y_idx, 1.0);
  out.add(carry_gate, 1.0);
  return nb.output({out});
}

std::pair<Network, RegimeReport> construct_large_rho(const Dataset& ds, double rho,
                                                     std::uint64_t seed) {
  ds.validate();
  const std::size_t n = ds.size(), d = ds.d;
  if (!(rho > moderate_threshold(d) * (1.0 - 1e-12)) || !(rho < 1.0))
    throw ConstructError("large regime requires rho in (1/(5 sqrt(d)), 1)");

  RegimeReport rep;
  rep.regime = Regime::Large;
  rep.rho = rho;
  rep.seed = seed;
  rep.epsilon = separation(ds, NormIndex::finite(2.0));
  rep.mu = rho * rep.epsilon;
  rep.theoretical_param_bound = static_cast<double>(n) * static_cast<double>(d) *
                                static_cast<double>(d) * std::pow(rho, 4.0);

  const double ln_n = std::log(static_cast<double>(n));
  const double eps = rep.epsilon;
  double r = 0.0;
  for (const auto& p : ds.points) r = std::max(r, norm_p(p, NormIndex::finite(2.0)));

  Network net;
  if (rho >= 1.0 / 3.0) {
    rep.large_case = "I";
    net = base_memorize(ds, rho);
  } else if (static_cast<double>(d) < 600.0 * ln_n) {
    rep.large_case = "II";
    net = base_memorize(ds, rho);
  } else if (static_cast<double>(n) < 600.0 * ln_n) {
    rep.large_case = "III";
    Rng rng = Rng::split(seed, 0x301);
    Projection phi = natural_projection(ds, rng);
    Dataset img;
    img.d = n;
    img.n_classes = ds.n_classes;
    img.labels = ds.labels;
    for (const auto& p : ds.points) img.points.push_back(phi.apply(p));
    NetBuilder pb(d);
    std::vector<Lin> rows(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (phi.matrix[i][j] != 0.0) rows[i].add(j, phi.matrix[i][j]);
    net = pb.output(rows);
    append_serial(net, base_memorize(img, rho));
  } else {
    const bool case4 = (n >= d);
    rep.large_case = case4 ? "IV" : "V";
    Rng rng = Rng::split(seed, 0x302);

    // effective point set for the JL step (case V routes through natproj first)
    std::vector<std::vector<double>> w_rows;  // m x d linear map
    Dataset img2;
    img2.n_classes = ds.n_classes;
    img2.labels = ds.labels;
    if (case4) {
      const std::size_t m = static_cast<std::size_t>(std::max(
          {std::ceil(9.0 * d * rho * rho), std::ceil(600.0 * ln_n),
           std::ceil(10.0 * std::log(static_cast<double>(d)))}));
      if (m > d) throw ConstructError("large case IV: m exceeds d (threshold violation)");
      const double target = 0.4 * std::sqrt(static_cast<double>(m) / static_cast<double>(d));
      Projection phi = jl_project(ds, m, target, 64, rng);
      w_rows = phi.matrix;
      img2.d = m;
      rep.proj_dim = m;
    } else {
      Projection nat = natural_projection(ds, rng);
      Dataset mid;
      mid.d = n;
      mid.n_classes = ds.n_classes;
      mid.labels = ds.labels;
      for (const auto& p : ds.points) mid.points.push_back(nat.apply(p));
      const std::size_t m = static_cast<std::size_t>(
          std::max(std::ceil(9.0 * n * rho * rho), std::ceil(600.0 * ln_n)));
      if (m > n) throw ConstructError("large case V: m exceeds N (threshold violation)");
      const double target = 0.4 * std::sqrt(static_cast<double>(m) / static_cast<double>(n));
      Projection phi = jl_project(mid, m, target, 64, rng);
      // W = P * V^T
      w_rows.assign(m, std::vector<double>(d, 0.0));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          double acc = 0.0;
          for (std::size_t l = 0; l < n; ++l) acc += phi.matrix[i][l] * nat.matrix[l][j];
          w_rows[i][j] = acc;
        }
      img2.d = m;
      rep.proj_dim = m;
    }
    // first hidden layer sigma(W x + 2R)
    NetBuilder fb(d);
    std::vector<Lin> rows(img2.d);
    for (std::size_t i = 0; i < img2.d; ++i) {
      rows[i].bias = 2.0 * r;
      for (std::size_t j = 0; j < d; ++j)
        if (w_rows[i][j] != 0.0) rows[i].add(j, w_rows[i][j]);
    }
    fb.relu_layer(rows);
    std::vector<Lin> outs(img2.d);
    for (std::size_t i = 0; i < img2.d; ++i) outs[i] = Lin(i, 1.0);
    net = fb.output(outs);
    for (const auto& p : ds.points) img2.points.push_back(evaluate(net, p));

    const double eps2 = separation(img2, NormIndex::finite(2.0));
    if (eps2 + 1e-9 < (6.0 / 5.0) * rho * eps)
      throw ConstructError("large case IV/V: projected separation below (6/5) rho eps");
    log_stage(rep, "projection", net, "m=" + std::to_string(img2.d));
    append_serial(net, base_memorize(img2, 5.0 / 6.0));
  }
  rep.achieved = resources(net);
  return {std::move(net), std::move(rep)};
}

// -- dispatch and l_p wrapper ----------------------------------------------------

std::pair<Network, RegimeReport> construct_auto(const Dataset& ds, const RobustSpec& spec,
                                                std::optional<double> eta, std::uint64_t seed) {
  if (!spec.p.is_two())
    throw ConstructError("construct_auto handles p = 2; use construct_lp for other norms");
  if (!(spec.rho > 0.0) || !(spec.rho < 1.0))
    throw ConstructError("rho must lie in (0,1): the range rho in (0,1) covers the entire regime");
  const double ts = small_threshold(ds.size(), ds.d);
  const double tm = moderate_threshold(ds.d);
  if (spec.rho <= ts) return construct_small_rho(ds, spec.rho, seed);
  if (spec.rho <= tm) {
    if (!eta) throw ConstructError("eta required: moderate regime memorizes with error at most eta");
    return construct_moderate_rho(ds, spec.rho, *eta, seed);
  }
  return construct_large_rho(ds, spec.rho, seed);
}

std::pair<Network, RegimeReport> construct_lp(const Dataset& ds, const RobustSpec& spec,
                                              std::optional<double> eta, std::uint64_t seed) {
  if (spec.p.is_two()) return construct_auto(ds, spec, eta, seed);
  const double gp = gamma_p(ds.d, spec.p);
  const double rho2 = gp * spec.rho;
  if (rho2 >= 1.0)
    throw ConstructError("outside the l_p reduction range: gamma_p(d) * rho = " +
                         std::to_string(rho2) + " >= 1");
  std::optional<double> eta2 = eta;
  if (eta) {
    const double eps_p = separation(ds, spec.p);
    const double eps_2 = separation(ds, NormIndex::finite(2.0));
    const double lvp =
        log_volume_lp_ball(ds.d, spec.rho * eps_p, spec.p.inf ? 0.0 : spec.p.p);
    const double lv2 = log_volume_lp_ball(ds.d, rho2 * eps_2, 2.0);
    eta2 = *eta * std::exp(std::min(0.0, lvp - lv2));
  }
  RobustSpec s2;
  s2.p = NormIndex::finite(2.0);
  s2.rho = rho2;
  auto [net, rep] = construct_auto(ds, s2, eta2, seed);
  rep.p = spec.p.inf ? 0.0 : spec.p.p;
  rep.p_inf = spec.p.inf;
  rep.rho = spec.rho;
  if (eta) rep.eta_requested = *eta;
  return {std::move(net), std::move(rep)};
}

// -- quantization -----------------------------------------------------------------

namespace {

double log2_sum(double a, double b) {  // log2(2^a + 2^b)
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log2(1.0 + std::exp2(lo - hi));
}

Network cleanup_floor_head(std::size_t n_classes) {
  const std::size_t nf = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n_classes) + 2.0))));
  NetBuilder sb(1);
  Network shift = sb.output({Lin(0, 1.0, 0.5)});
  return compose_serial(shift, gadgets::floor_gadget(nf, 0.1), Junction::Merge);
}

}  // namespace

QuantizeResult quantize_network(const Network& net, double nu, double R, QuantizeMode mode,
                                bool cleanup_head, std::size_t n_classes, std::uint64_t seed,
                                const std::vector<std::vector<double>>* probes) {
  if (!(nu > 0.0) || !(nu < 1.0)) throw ConstructError("quantize: nu must be in (0,1)");
  if (!(R >= 1.0)) throw ConstructError("quantize: R must be >= 1");
  QuantizeResult out;
  double max_abs = 0.0;
  for (const Layer& l : net.layers) {
    for (double v : l.w) max_abs = std::max(max_abs, std::fabs(v));
    for (double v : l.b) max_abs = std::max(max_abs, std::fabs(v));
  }
  const double m_param = std::max(1.0, max_abs);

  if (mode == QuantizeMode::Analytic) {
    std::size_t dmax = 1;
    for (const Layer& l : net.layers) dmax = std::max({dmax, l.in_dim, l.out_dim});
    const double dd = static_cast<double>(dmax);
    const double ll = static_cast<double>(net.layers.size());
    const double log2_dm = std::log2(dd) + std::log2(m_param);
    const double log2_s = (ll - 1.0) * log2_dm + std::log2(dd * m_param * ll + R);
    const double log2_q =
        std::log2(dd * ll) + log2_sum(log2_s, 0.0) + (ll - 1.0) * (1.0 + log2_dm);
    // zeta = nu / (D S + 2 D M Q + D)
    double denom = log2_sum(std::log2(dd) + log2_s,
                            1.0 + std::log2(dd) + std::log2(m_param) + log2_q);
    denom = log2_sum(denom, std::log2(dd));
    const double log2_zeta = std::log2(nu) - denom;
    if (log2_zeta < -1020.0)
      throw ConstructError(
          "quantize: analytic-mode grid underflows binary64 dyadics; use empirical mode");
    out.frac_bits = static_cast<std::size_t>(std::max(0.0, std::ceil(-log2_zeta)));
    if (out.frac_bits > 52) out.frac_bits = 52;  // beyond this, snapping is the identity
    FixedPointFormat fmt{out.frac_bits,
                         static_cast<std::size_t>(std::ceil(std::log2(m_param + 1.0)) + 1)};
    out.net = snap_to_grid(net, fmt);
    out.bit_complexity =
        static_cast<std::size_t>(std::max(1.0, std::ceil(std::log2(m_param) - log2_zeta)));
  } else {
    // sampled deviation over B_2(0, R)
    Rng rng = Rng::split(seed, 0x9e11);
    const std::size_t kSamples = 10000;
    std::vector<double> origin(net.input_dim, 0.0);
    auto xs = sample_ball(origin, R, NormIndex::finite(2.0), rng, kSamples);
    if (probes) xs.insert(xs.end(), probes->begin(), probes->end());
    BatchEvaluator ref(net);
    auto ref_out = ref.run(xs);
    auto deviation = [&](std::size_t f) {
      FixedPointFormat fmt{f, static_cast<std::size_t>(std::ceil(std::log2(m_param + 1.0)) + 1)};
      Network snapped = snap_to_grid(net, fmt);
      BatchEvaluator ev(snapped);
      auto got = ev.run(xs);
      double dev = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < got[i].size(); ++j)
          dev = std::max(dev, std::fabs(got[i][j] - ref_out[i][j]));
      return dev;
    };
    if (deviation(52) > nu)
      throw ConstructError("quantize: empirical mode cannot reach nu even at 52 bits");
    std::size_t lo = 0, hi = 52;
    if (deviation(0) <= nu) hi = 0;
    while (lo + 1 < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (deviation(mid) <= nu)
        hi = mid;
      else
        lo = mid;
    }
    // deviation is not perfectly monotone in the bit count (coarse snaps can
    // alias); repair upward until the sampled bound actually holds
    while (hi < 52 && deviation(hi) > nu) ++hi;
    out.frac_bits = hi;
    out.max_deviation_seen = deviation(hi);
    FixedPointFormat fmt{out.frac_bits,
                         static_cast<std::size_t>(std::ceil(std::log2(m_param + 1.0)) + 1)};
    out.net = snap_to_grid(net, fmt);
    out.bit_complexity = out.frac_bits + fmt.int_bits;
  }
  if (cleanup_head) {
    append_serial(out.net, cleanup_floor_head(n_classes));
    out.cleanup_appended = true;
  }
  return out;
}

// -- verification -------------------------------------------------------------------

double wilson_upper_bound(std::size_t errors, std::size_t n) {
  if (n == 0) return 1.0;
  const double z = 1.959963984540054;
  const double phat = static_cast<double>(errors) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double denom = 1.0 + z * z / nn;
  const double center = phat + z * z / (2.0 * nn);
  const double rad = z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn));
  return std::min(1.0, (center + rad) / denom);
}

VerificationStats verify_robust(const Network& net, const Dataset& ds, const RobustSpec& spec,
                                std::size_t samples_per_ball, std::uint64_t seed,
                                double match_tol) {
  const auto t0 = std::chrono::steady_clock::now();
  VerificationStats st;
  if (samples_per_ball == 0) throw ConstructError("verify: need K >= 1 samples per ball");
  const double mu = spec.mu(ds);
  BatchEvaluator ev(net);
  st.balls.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Rng rng = Rng::split(seed, 0xb0000 + i);
    auto xs = sample_ball(ds.points[i], mu, spec.p, rng, samples_per_ball);
    auto out = ev.run_scalar(xs);
    BallStats& b = st.balls[i];
    b.samples = samples_per_ball;
    const double want = static_cast<double>(ds.labels[i]);
    for (double v : out)
      if (std::fabs(v - want) <= match_tol) ++b.matches;
    b.wilson_upper = wilson_upper_bound(b.samples - b.matches, b.samples);
    st.total_samples += b.samples;
    st.total_matches += b.matches;
    if (b.wilson_upper > st.worst_wilson) {
      st.worst_wilson = b.wilson_upper;
      st.worst_ball = i;
    }
  }
  st.exact = (st.total_matches == st.total_samples);
  st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return st;
}

// -- reports ---------------------------------------------------------------------------

std::string RegimeReport::to_json(bool with_timestamp) const {
  nlohmann::json j;
  j["schema"] = "v1";
  j["regime"] = regime_name(regime);
  j["rho"] = rho;
  j["p"] = p_inf ? nlohmann::json("inf") : nlohmann::json(p);
  if (!large_case.empty()) j["large_case"] = large_case;
  j["theoretical_param_bound"] = theoretical_param_bound;
  j["epsilon"] = epsilon;
  j["mu"] = mu;
  if (proj_dim) j["proj_dim"] = proj_dim;
  j["achieved"] = {{"params_all", achieved.params_all},
                   {"params_nonzero", achieved.params_nonzero},
                   {"width", achieved.width},
                   {"depth", achieved.depth}};
  if (bit_complexity) j["achieved"]["bit_complexity"] = *bit_complexity;
  if (eta_requested) j["eta_requested"] = *eta_requested;
  if (eta_estimated) j["eta_estimated"] = *eta_estimated;
  j["seed"] = seed;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"name", s.name},
                           {"params_all", s.res.params_all},
                           {"width", s.res.width},
                           {"depth", s.res.depth},
                           {"info", s.info}});
  if (with_timestamp)
    j["timestamp"] = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
  return j.dump(2);
}

std::string VerificationStats::to_json(bool with_timestamp) const {
  nlohmann::json j;
  j["schema"] = "v1";
  j["total_samples"] = total_samples;
  j["total_matches"] = total_matches;
  j["exact"] = exact;
  j["worst_wilson_upper"] = worst_wilson;
  j["worst_ball"] = worst_ball;
  j["wall_seconds"] = wall_seconds;
  auto balls_j = nlohmann::json::array();
  for (const auto& b : balls)
    balls_j.push_back({{"samples", b.samples},
                       {"matches", b.matches},
                       {"wilson_upper", b.wilson_upper}});
  j["balls"] = std::move(balls_j);
  if (with_timestamp)
    j["timestamp"] = static_cast<std::int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
  return j.dump(2);
}

}  // namespace rmnet
