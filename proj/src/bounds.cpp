#include "rmnet/bounds.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace rmnet {

double gamma_p(std::size_t d, NormIndex p) {
  const double inv_p = p.inf ? 0.0 : 1.0 / p.p;
  return std::pow(static_cast<double>(d), std::fabs(0.5 - inv_p));
}

double width_lower_bound(std::size_t n, std::size_t d, double rho, NormIndex p) {
  const double lead = static_cast<double>(std::min(n - 1, d));
  if (p.inf && rho > 0.5) return lead;
  const double inv_p = p.inf ? 0.0 : 1.0 / p.p;
  const double r = (inv_p > 0.5) ? rho / gamma_p(d, p) : rho;  // p < 2 pays gamma_p
  return r * r * lead;
}

double vc_param_lower_bound(std::size_t n, std::size_t d, double rho, NormIndex p) {
  const double sqn = std::sqrt(static_cast<double>(n));
  const double sqd = std::sqrt(static_cast<double>(d));
  if (p.inf) return std::min(1.0, sqd) * sqn;  // rho^p -> 0 as p -> inf
  const double denom = 1.0 - std::pow(rho, p.p);
  const double branch = (denom <= 0.0) ? std::numeric_limits<double>::infinity()
                                       : 1.0 / std::sqrt(denom);
  return std::min(branch, sqd) * sqn;
}

LowerBoundReport lower_bounds(std::size_t n, std::size_t d, double rho, NormIndex p) {
  LowerBoundReport r;
  r.p = p.inf ? 0.0 : p.p;
  r.p_inf = p.inf;
  r.width_lb = width_lower_bound(n, d, rho, p);
  r.vc_param_lb = vc_param_lower_bound(n, d, rho, p);
  r.width_branch = (n - 1 <= d) ? "N-1" : "d";
  if (p.inf && rho > 0.5) r.width_branch += " (l_inf rho > 1/2)";
  if (!p.inf) {
    const double denom = 1.0 - std::pow(rho, p.p);
    r.vc_branch = (denom > 0.0 && 1.0 / std::sqrt(denom) <= std::sqrt(double(d)))
                      ? "1/sqrt(1-rho^p)"
                      : "sqrt(d)";
  } else {
    r.vc_branch = "1 (p = inf limit)";
  }
  // P = Omega((rho^2 min{N,d} + 1) d + min{...} sqrt(N)), constants reported as 1
  const double inv_p = p.inf ? 0.0 : 1.0 / p.p;
  const double rr = (inv_p > 0.5) ? rho / gamma_p(d, p) : rho;
  r.combined_param_lb =
      (rr * rr * static_cast<double>(std::min(n, d)) + 1.0) * static_cast<double>(d) +
      r.vc_param_lb;
  return r;
}

namespace {

void check_orthonormal(const std::vector<std::vector<double>>& basis) {
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = i; j < basis.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < basis[i].size(); ++k) dot += basis[i][k] * basis[j][k];
      const double want = (i == j) ? 1.0 : 0.0;
      if (std::fabs(dot - want) > 1e-8)
        throw NetError("subspace_distance: basis rows are not orthonormal");
    }
}

// Two-phase dense simplex for min c^T x s.t. A x <= b, x >= 0 (Bland's rule).
// Small and exact enough for the desk-scale Chebyshev problems here.
double simplex_min(std::vector<std::vector<double>> a, std::vector<double> b,
                   std::vector<double> c) {
  const std::size_t m = a.size(), n = c.size();
  // tableau columns: n structural + m slack + m artificial + rhs
  const std::size_t cols = n + 2 * m + 1;
  std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double sgn = (b[i] < 0.0) ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t[i][j] = sgn * a[i][j];
    t[i][n + i] = sgn;               // slack
    t[i][n + m + i] = 1.0;           // artificial
    t[i][cols - 1] = sgn * b[i];
    basis[i] = n + m + i;
  }
  auto run = [&](std::size_t active_cols) {
    for (int iter = 0; iter < 20000; ++iter) {
      // Bland: first improving column that admits a pivot. Columns whose
      // entries are all below the pivot tolerance are roundoff artifacts
      // (these LPs are bounded by construction) and are skipped.
      std::size_t pivot_col = cols, pivot_row = m;
      for (std::size_t j = 0; j < active_cols && pivot_col == cols; ++j) {
        if (t[m][j] >= -1e-9) continue;
        std::size_t pr = m;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
          if (t[i][j] > 1e-9) {
            const double ratio = t[i][cols - 1] / t[i][j];
            if (ratio < best - 1e-12 ||
                (std::fabs(ratio - best) <= 1e-12 && (pr == m || basis[i] < basis[pr]))) {
              best = ratio;
              pr = i;
            }
          }
        }
        if (pr != m) {
          pivot_col = j;
          pivot_row = pr;
        }
      }
      if (pivot_col == cols) return;
      const double pv = t[pivot_row][pivot_col];
      for (std::size_t j = 0; j < cols; ++j) t[pivot_row][j] /= pv;
      for (std::size_t i = 0; i <= m; ++i) {
        if (i == pivot_row) continue;
        const double f = t[i][pivot_col];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < cols; ++j) t[i][j] -= f * t[pivot_row][j];
      }
      basis[pivot_row] = pivot_col;
    }
    throw NetError("simplex: iteration limit");
  };
  // phase 1: minimize sum of artificials
  for (std::size_t j = n + m; j < n + 2 * m; ++j) t[m][j] = 1.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[m][j] -= t[i][j];
  run(n + 2 * m);
  if (t[m][cols - 1] < -1e-7) throw NetError("simplex: infeasible");
  // phase 2
  for (std::size_t j = 0; j < cols; ++j) t[m][j] = 0.0;
  for (std::size_t j = 0; j < n; ++j) t[m][j] = c[j];
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n && t[m][basis[i]] != 0.0) {
      const double f = t[m][basis[i]];
      for (std::size_t j = 0; j < cols; ++j) t[m][j] -= f * t[i][j];
    }
  }
  run(n + m);  // artificials stay out
  return -t[m][cols - 1];
}

}  // namespace

double linf_distance_to_span(const std::vector<double>& target,
                             const std::vector<std::vector<double>>& basis) {
  const std::size_t d = target.size(), k = basis.size();
  // variables: c+ (k), c- (k), t (1); constraints |e - B^T c|_i <= t
  const std::size_t nv = 2 * k + 1;
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> r1(nv, 0.0), r2(nv, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      r1[l] = basis[l][i];
      r1[k + l] = -basis[l][i];
      r2[l] = -basis[l][i];
      r2[k + l] = basis[l][i];
    }
    r1[2 * k] = -1.0;
    r2[2 * k] = -1.0;
    a.push_back(std::move(r1));
    b.push_back(target[i]);
    a.push_back(std::move(r2));
    b.push_back(-target[i]);
  }
  std::vector<double> c(nv, 0.0);
  c[2 * k] = 1.0;
  return simplex_min(std::move(a), std::move(b), std::move(c));
}

std::pair<double, std::size_t> subspace_distance(
    const std::vector<std::vector<double>>& targets,
    const std::vector<std::vector<double>>& basis, NormIndex p) {
  if (targets.empty()) throw NetError("subspace_distance: no targets");
  check_orthonormal(basis);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    const auto& e = targets[ti];
    double dist;
    if (p.inf) {
      dist = linf_distance_to_span(e, basis);
    } else if (p.p == 2.0) {
      double n2 = 0.0;
      for (double v : e) n2 += v * v;
      double proj2 = 0.0;
      for (const auto& u : basis) {
        double dot = 0.0;
        for (std::size_t j = 0; j < e.size(); ++j) dot += u[j] * e[j];
        proj2 += dot * dot;
      }
      dist = std::sqrt(std::max(0.0, n2 - proj2));
    } else {
      throw NetError("subspace_distance: p must be 2 or inf");
    }
    if (dist < best) {
      best = dist;
      arg = ti;
    }
  }
  return {best, arg};
}

CertificateVerdict certificate_check(const Network& net, const Dataset& ds,
                                     const RobustSpec& spec) {
  CertificateVerdict v;
  const double mu = spec.mu(ds);
  v.threshold = 2.0 * mu;
  const Layer& l1 = net.layers.front();
  if (l1.in_dim != ds.d) throw NetError("certificate_check: network/dataset dim mismatch");

  Eigen::MatrixXd w(l1.out_dim, l1.in_dim);
  for (std::size_t i = 0; i < l1.out_dim; ++i)
    for (std::size_t j = 0; j < l1.in_dim; ++j) w(i, j) = l1.at(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double tol = 1e-10 * std::max(smax, 1.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  const std::size_t null_dim = ds.d - rank;

  if (null_dim == 0) {
    v.pass = true;
    v.min_distance = std::numeric_limits<double>::infinity();
    v.note = "Null(W1) trivial; necessary condition holds vacuously (pass proves nothing)";
    return v;
  }
  Eigen::MatrixXd nb = svd.matrixV().rightCols(null_dim);  // d x null_dim, orthonormal

  v.min_distance = std::numeric_limits<double>::infinity();
  Eigen::VectorXd diff(ds.d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      if (ds.labels[i] == ds.labels[j]) continue;
      for (std::size_t k = 0; k < ds.d; ++k) diff(k) = ds.points[i][k] - ds.points[j][k];
      const double dist = (diff - nb * (nb.transpose() * diff)).norm();
      if (dist < v.min_distance) {
        v.min_distance = dist;
        v.worst_i = i;
        v.worst_j = j;
      }
    }
  }
  v.pass = v.min_distance >= v.threshold;
  v.note = v.pass ? "necessary condition holds (pass proves nothing: condition is not sufficient)"
                  : "refuted: a differently-labeled difference approaches Null(W1) within 2 mu";
  return v;
}

Network affine_output(const Network& net, double a, double c) {
  Network out = net;
  Layer& last = out.layers.back();
  for (double& v : last.w) v *= a;
  for (double& v : last.b) v = a * v + c;
  return out;
}

ShatteringResult shattering_check(const MemorizerBuilder& builder, std::size_t d, std::size_t k,
                                  std::size_t trials, std::uint64_t seed, std::size_t groups) {
  if (k > d) throw NetError("shattering_check: need k <= d");
  ShatteringResult res;
  res.trials = trials;
  Rng rng = Rng::split(seed, 0x54a77e2);
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<std::vector<int>> lab(groups, std::vector<int>(k));
    bool has_pos = false, has_neg = false;
    for (auto& row : lab)
      for (int& y : row) {
        y = (rng.uniform() < 0.5) ? 1 : -1;
        (y == 1 ? has_pos : has_neg) = true;
      }
    if (!has_pos) lab[0][0] = 1;
    if (!has_neg) lab[groups - 1][k - 1] = -1;

    ShatteringInstance inst = gen_shattering_instance(lab, d);
    const double rho = std::max(std::sqrt((double(k) - 1.0) / double(k)), 0.3);
    Network f = builder(inst.dataset, rho);
    Network fp = affine_output(f, 2.0, -3.0);

    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = g * k + j;
        const int y = inst.shatter_labels[idx];
        const auto& anchor = inst.dataset.points[2 * g + (y == 1 ? 0 : 1)];
        std::vector<double> z(d);
        const double lam = 1e-6;  // interior point on the segment to the anchor
        for (std::size_t c = 0; c < d; ++c)
          z[c] = (1.0 - lam) * inst.shatter_points[idx][c] + lam * anchor[c];
        const double val = evaluate(fp, z)[0];
        if ((y == 1 && val <= 0.0) || (y == -1 && val >= 0.0)) ++res.failures;
      }
    }
  }
  res.pass = (res.failures == 0);
  res.note = res.pass ? "all labelings realized" : "some shattering points misclassified";
  return res;
}

}  // namespace rmnet
