#include "rmnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rmnet {

double norm_p(const std::vector<double>& v, NormIndex p) {
  if (p.inf) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  }
  if (p.p < 1.0) throw DatasetError("norm index p must be >= 1");
  if (p.p == 2.0) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  if (p.p == 1.0) {
    double s = 0.0;
    for (double x : v) s += std::fabs(x);
    return s;
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::fabs(x), p.p);
  return std::pow(s, 1.0 / p.p);
}

void Dataset::validate() const {
  const std::size_t n = points.size();
  if (labels.size() != n) throw DatasetError("points/labels size mismatch");
  if (n_classes < 2) throw DatasetError("need at least 2 classes");
  if (n < n_classes) throw DatasetError("need N >= C");
  std::vector<bool> seen(n_classes + 1, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].size() != d)
      throw DatasetError("row " + std::to_string(i) + " has wrong dimension");
    if (labels[i] < 1 || labels[i] > n_classes)
      throw DatasetError("row " + std::to_string(i) + " label out of [1,C]");
    seen[labels[i]] = true;
  }
  for (std::size_t c = 1; c <= n_classes; ++c)
    if (!seen[c]) throw DatasetError("class " + std::to_string(c) + " has no points");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (points[i] == points[j])
        throw DatasetError("rows " + std::to_string(i) + " and " + std::to_string(j) +
                           " coincide");
}

double RobustSpec::mu(const Dataset& ds) const { return rho * separation(ds, p); }

double separation(const Dataset& ds, NormIndex p) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> diff(ds.d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      if (ds.labels[i] == ds.labels[j]) continue;
      for (std::size_t k = 0; k < ds.d; ++k) diff[k] = ds.points[i][k] - ds.points[j][k];
      best = std::min(best, norm_p(diff, p));
    }
  }
  if (!std::isfinite(best)) throw DatasetError("separation: no differently-labeled pair");
  return 0.5 * best;
}

Dataset scale(const Dataset& ds, double c) {
  if (!(c > 0.0)) throw DatasetError("scale: c must be positive");
  Dataset out = ds;
  for (auto& row : out.points)
    for (double& v : row) v *= c;
  return out;
}

std::vector<std::vector<double>> sample_ball(const std::vector<double>& center, double radius,
                                             NormIndex p, Rng& rng, std::size_t k) {
  if (!(radius > 0.0)) throw DatasetError("sample_ball: radius must be positive");
  if (k < 1) throw DatasetError("sample_ball: k must be >= 1");
  if (!p.inf && p.p < 1.0) throw DatasetError("sample_ball: p outside [1, inf]");
  const std::size_t d = center.size();
  std::vector<std::vector<double>> out(k, std::vector<double>(d));
  for (std::size_t s = 0; s < k; ++s) {
    auto& x = out[s];
    if (p.inf) {
      for (std::size_t j = 0; j < d; ++j) x[j] = center[j] + radius * (2.0 * rng.uniform() - 1.0);
    } else if (p.p == 2.0) {
      double nrm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        x[j] = rng.normal();
        nrm2 += x[j] * x[j];
      }
      const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) /
                       std::sqrt(nrm2);
      for (std::size_t j = 0; j < d; ++j) x[j] = center[j] + r * x[j];
    } else {
      // coordinates with density ~ exp(-|t|^p), then rescale a radius factor
      double nrm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double g = std::pow(rng.gamma(1.0 / p.p), 1.0 / p.p);
        x[j] = (rng.uniform() < 0.5 ? -g : g);
        nrm += std::pow(std::fabs(x[j]), p.p);
      }
      nrm = std::pow(nrm, 1.0 / p.p);
      const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / nrm;
      for (std::size_t j = 0; j < d; ++j) x[j] = center[j] + r * x[j];
    }
  }
  return out;
}

Dataset gen_width_lb_dataset(std::size_t n, std::size_t d) {
  if (n < 3 || d < 2) throw DatasetError("gen_width_lb_dataset: need n >= 3, d >= 2");
  Dataset ds;
  ds.d = d;
  ds.n_classes = 2;
  const std::size_t basis = std::min(n - 1, d);
  for (std::size_t j = 0; j < basis; ++j) {
    std::vector<double> e(d, 0.0);
    e[j] = 1.0;
    ds.points.push_back(std::move(e));
    ds.labels.push_back(2);
  }
  ds.points.emplace_back(d, 0.0);
  ds.labels.push_back(1);
  // overflow points k*e_1, k = 2..(n-d), keep separation 1/2
  for (std::size_t k = 2; ds.points.size() < n; ++k) {
    std::vector<double> e(d, 0.0);
    e[0] = static_cast<double>(k);
    ds.points.push_back(std::move(e));
    ds.labels.push_back(2);
  }
  ds.validate();
  return ds;
}

ShatteringInstance gen_shattering_instance(const std::vector<std::vector<int>>& labeling,
                                           std::size_t d) {
  if (labeling.empty()) throw DatasetError("gen_shattering_instance: empty labeling");
  const std::size_t groups = labeling.size();
  const std::size_t k = labeling[0].size();
  if (k < 1 || k > d) throw DatasetError("gen_shattering_instance: need 1 <= k <= d");
  if (d < 2) throw DatasetError("gen_shattering_instance: need d >= 2");
  ShatteringInstance inst;
  inst.groups = groups;
  inst.k = k;
  inst.dataset.d = d;
  inst.dataset.n_classes = 2;
  for (std::size_t l = 0; l < groups; ++l) {
    if (labeling[l].size() != k) throw DatasetError("gen_shattering_instance: ragged labeling");
    const double c1 = 2.0 * static_cast<double>(d) * static_cast<double>(d) *
                      static_cast<double>(l);
    std::vector<double> pos(d, 0.0), neg(d, 0.0);
    pos[0] = c1;
    neg[0] = c1;
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> xp(d, 0.0);
      xp[0] = c1;
      xp[j] += 1.0;
      inst.shatter_points.push_back(std::move(xp));
      const int y = labeling[l][j];
      if (y != 1 && y != -1) throw DatasetError("gen_shattering_instance: labels must be +-1");
      inst.shatter_labels.push_back(y);
      pos[j] += (y == 1) ? 1.0 : -1.0;
      neg[j] += (y == 1) ? -1.0 : 1.0;
    }
    inst.dataset.points.push_back(std::move(pos));
    inst.dataset.labels.push_back(2);
    inst.dataset.points.push_back(std::move(neg));
    inst.dataset.labels.push_back(1);
  }
  inst.dataset.validate();
  return inst;
}

Dataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DatasetError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DatasetError(path + ": empty file");
  // header x1,...,xd,label
  std::size_t d = 0;
  {
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() < 2 || cols.back() != "label")
      throw DatasetError(path + ": header must be x1,...,xd,label");
    d = cols.size() - 1;
  }
  Dataset ds;
  ds.d = d;
  std::size_t row = 1;
  std::size_t max_label = 0;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> pt;
    while (std::getline(ss, tok, ',')) {
      try {
        pt.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw DatasetError(path + ": row " + std::to_string(row) + ", column " +
                           std::to_string(pt.size() + 1) + ": not a number: '" + tok + "'");
      }
    }
    if (pt.size() != d + 1)
      throw DatasetError(path + ": row " + std::to_string(row) + " has " +
                         std::to_string(pt.size()) + " fields, expected " + std::to_string(d + 1));
    const double lab = pt.back();
    pt.pop_back();
    if (lab < 1.0 || lab != std::floor(lab))
      throw DatasetError(path + ": row " + std::to_string(row) +
                         ": label must be a positive integer");
    ds.points.push_back(std::move(pt));
    ds.labels.push_back(static_cast<std::size_t>(lab));
    max_label = std::max(max_label, ds.labels.back());
  }
  ds.n_classes = max_label;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DatasetError("cannot open for writing: " + path);
  for (std::size_t j = 1; j <= ds.d; ++j) f << "x" << j << ",";
  f << "label\n";
  f.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.points[i]) f << v << ",";
    f << ds.labels[i] << "\n";
  }
}

Dataset random_dataset(std::size_t n, std::size_t d, std::size_t c, Rng& rng, double box) {
  Dataset ds;
  ds.d = d;
  ds.n_classes = c;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pt(d);
    for (double& v : pt) v = box * rng.uniform();
    ds.points.push_back(std::move(pt));
    // first C points pin down one point per class
    ds.labels.push_back(i < c ? i + 1 : 1 + rng.below(c));
  }
  ds.validate();
  return ds;
}

}  // namespace rmnet
