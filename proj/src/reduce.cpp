#include "rmnet/reduce.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace rmnet {

namespace {

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  return rows;
}

double projected_separation(const Eigen::MatrixXd& p, const Dataset& ds) {
  const std::size_t n = ds.size();
  Eigen::MatrixXd pts(ds.d, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < ds.d; ++j) pts(j, i) = ds.points[i][j];
  Eigen::MatrixXd img = p * pts;  // m x n
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (ds.labels[i] == ds.labels[j]) continue;
      best = std::min(best, (img.col(i) - img.col(j)).norm());
    }
  return 0.5 * best;
}

}  // namespace

std::vector<double> Projection::apply(const std::vector<double>& x) const {
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += matrix[i][j] * x[j];
    out[i] = acc;
  }
  return out;
}

std::size_t proj_log_dim(std::size_t n, std::size_t d) {
  // alpha = 1/6: 24 alpha^-2 = 864; natural logs throughout
  const double a = std::ceil(864.0 * std::log(static_cast<double>(n)));
  const double b = std::ceil(10.0 * std::log(static_cast<double>(d)));
  return std::min<std::size_t>(d, static_cast<std::size_t>(std::max({a, b, 1.0})));
}

Projection jl_project(const Dataset& ds, std::size_t m, double target_ratio,
                      std::size_t max_retries, Rng& rng) {
  const std::size_t d = ds.d;
  if (m < 1 || m > d) throw ReduceError("jl_project: need 1 <= m <= d");
  if (target_ratio <= 0.0)
    target_ratio = (5.0 / 12.0) * std::sqrt(static_cast<double>(m) / static_cast<double>(d));
  const double eps = separation(ds, NormIndex::finite(2.0));

  Projection best;
  best.m = m;
  best.d = d;
  best.achieved_separation_ratio = -1.0;

  if (m == d) {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    best.matrix = to_rows(id);
    best.achieved_separation_ratio = 1.0;
    return best;
  }

  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    Eigen::MatrixXd g(d, m);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, m);
    Eigen::MatrixXd p = q.transpose();  // m x d, orthonormal rows

    const double ratio = projected_separation(p, ds) / eps;
    if (ratio > best.achieved_separation_ratio) {
      best.achieved_separation_ratio = ratio;
      best.matrix = to_rows(p);
      best.retries_used = attempt;
    }
    if (ratio >= target_ratio) return best;
  }
  throw ReduceError("jl_project: retries exhausted; best separation ratio " +
                    std::to_string(best.achieved_separation_ratio) + " < target " +
                    std::to_string(target_ratio) + " (m may be too small for this dataset)");
}

Projection natural_projection(const Dataset& ds, Rng& rng) {
  const std::size_t d = ds.d, n = ds.size();
  if (d < n) throw ReduceError("natural_projection: requires d >= N");
  // Householder QR of [X | G]: the first N columns of Q span a subspace
  // containing Col(X) even when X is rank deficient.
  Eigen::MatrixXd a(d, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) a(j, i) = ds.points[i][j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) a(j, n + i) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, n);

  Projection pr;
  pr.m = n;
  pr.d = d;
  pr.matrix = to_rows(q.transpose());
  pr.achieved_separation_ratio = 1.0;
  return pr;
}

std::vector<double> relu_safe_bias(const std::vector<std::vector<double>>& rows, double radius) {
  std::vector<double> b(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double nrm = 0.0;
    for (double v : rows[i]) nrm += v * v;
    b[i] = std::sqrt(nrm) * radius + 1.0;
  }
  return b;
}

}  // namespace rmnet
