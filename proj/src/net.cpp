#include "rmnet/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "rmnet/kernels.hpp"

namespace rmnet {

std::size_t Network::depth() const {
  std::size_t d = 0;
  for (const auto& l : layers)
    if (l.act == Act::Relu) ++d;
  return d;
}

void Network::validate() const {
  if (layers.empty()) throw NetError("network has no layers");
  std::size_t cur = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.in_dim != cur) throw NetError("dimension chain broken at layer " + std::to_string(i));
    if (l.w.size() != l.in_dim * l.out_dim || l.b.size() != l.out_dim)
      throw NetError("layer " + std::to_string(i) + " has inconsistent storage");
    const bool last = (i + 1 == layers.size());
    if (last && l.act != Act::Id) throw NetError("final layer must have identity activation");
    if (!last && l.act != Act::Relu) throw NetError("hidden layer must have relu activation");
    for (double v : l.w)
      if (!std::isfinite(v)) throw NetError("non-finite weight in layer " + std::to_string(i));
    for (double v : l.b)
      if (!std::isfinite(v)) throw NetError("non-finite bias in layer " + std::to_string(i));
    cur = l.out_dim;
  }
}

void NetBuilder::push(const std::vector<Lin>& rows, Act act) {
  Layer l;
  l.in_dim = dim_;
  l.out_dim = rows.size();
  l.w.assign(l.in_dim * l.out_dim, 0.0);
  l.b.assign(l.out_dim, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    l.b[i] = rows[i].bias;
    for (const auto& [j, c] : rows[i].terms) {
      if (j >= dim_) throw NetError("Lin term references unit beyond layer width");
      l.at(i, j) += c;
    }
  }
  l.act = act;
  net_.layers.push_back(std::move(l));
  dim_ = rows.size();
}

std::vector<double> evaluate(const Network& net, const std::vector<double>& x) {
  if (x.size() != net.input_dim) throw NetError("evaluate: input dimension mismatch");
  std::vector<double> cur = x, next;
  for (const Layer& l : net.layers) {
    next.assign(l.out_dim, 0.0);
    for (std::size_t i = 0; i < l.out_dim; ++i) {
      double acc = l.b[i];
      const double* row = l.w.data() + i * l.in_dim;
      for (std::size_t j = 0; j < l.in_dim; ++j) {
        if (row[j] != 0.0) acc += row[j] * cur[j];
      }
      next[i] = (l.act == Act::Relu && acc < 0.0) ? 0.0 : acc;
    }
    cur.swap(next);
  }
  return cur;
}

Network compose_serial(const Network& f, const Network& g, Junction j) {
  if (f.output_dim() != g.input_dim) throw NetError("compose: f.output_dim != g.input_dim");
  Network out;
  out.input_dim = f.input_dim;
  out.layers.reserve(f.layers.size() + g.layers.size());
  for (std::size_t i = 0; i + 1 < f.layers.size(); ++i) out.layers.push_back(f.layers[i]);
  const Layer& flast = f.layers.back();
  if (j == Junction::Relu) {
    Layer relu_last = flast;
    relu_last.act = Act::Relu;
    out.layers.push_back(std::move(relu_last));
    for (const Layer& l : g.layers) out.layers.push_back(l);
  } else {
    // fuse: g1(flast(x)) = (Wg * Wf) x + (Wg * bf + bg)
    const Layer& g1 = g.layers.front();
    Layer fused;
    fused.in_dim = flast.in_dim;
    fused.out_dim = g1.out_dim;
    fused.act = g1.act;
    fused.w.assign(fused.in_dim * fused.out_dim, 0.0);
    fused.b.assign(fused.out_dim, 0.0);
    for (std::size_t i = 0; i < g1.out_dim; ++i) {
      double acc = g1.b[i];
      for (std::size_t k = 0; k < g1.in_dim; ++k) {
        const double gik = g1.at(i, k);
        if (gik == 0.0) continue;
        acc += gik * flast.b[k];
        for (std::size_t jj = 0; jj < flast.in_dim; ++jj)
          fused.at(i, jj) += gik * flast.at(k, jj);
      }
      fused.b[i] = acc;
    }
    out.layers.push_back(std::move(fused));
    for (std::size_t i = 1; i < g.layers.size(); ++i) out.layers.push_back(g.layers[i]);
  }
  out.validate();
  return out;
}

Network stack_parallel(const std::vector<Network>& nets,
                       const std::vector<std::pair<std::size_t, std::size_t>>& slices) {
  if (nets.empty()) throw NetError("stack: no networks");
  if (!slices.empty() && slices.size() != nets.size())
    throw NetError("stack: slices size mismatch");
  std::size_t input_dim = 0;
  if (slices.empty()) {
    input_dim = nets[0].input_dim;
    for (const Network& n : nets)
      if (n.input_dim != input_dim)
        throw NetError("stack: nets disagree on input_dim and no slices given");
  } else {
    for (std::size_t i = 0; i < nets.size(); ++i) {
      if (slices[i].second != nets[i].input_dim)
        throw NetError("stack: slice length does not match net input_dim");
      input_dim = std::max(input_dim, slices[i].first + slices[i].second);
    }
  }

  // pad shorter nets with relu identity layers before their final map
  std::size_t max_hidden = 0;
  for (const Network& n : nets) max_hidden = std::max(max_hidden, n.layers.size() - 1);
  std::vector<Network> padded = nets;
  for (Network& n : padded) {
    while (n.layers.size() - 1 < max_hidden) {
      const Layer& last = n.layers.back();
      Layer id;
      id.in_dim = id.out_dim = last.in_dim;
      id.w.assign(id.in_dim * id.in_dim, 0.0);
      for (std::size_t i = 0; i < id.in_dim; ++i) id.at(i, i) = 1.0;
      id.b.assign(id.in_dim, 0.0);
      id.act = Act::Relu;
      n.layers.insert(n.layers.end() - 1, std::move(id));
    }
  }

  Network out;
  out.input_dim = input_dim;
  for (std::size_t li = 0; li <= max_hidden; ++li) {
    Layer merged;
    merged.act = padded[0].layers[li].act;
    std::size_t in_dim = 0, out_dim = 0;
    if (li == 0) {
      in_dim = input_dim;
    } else {
      for (const Network& n : padded) in_dim += n.layers[li].in_dim;
    }
    for (const Network& n : padded) out_dim += n.layers[li].out_dim;
    merged.in_dim = in_dim;
    merged.out_dim = out_dim;
    merged.w.assign(in_dim * out_dim, 0.0);
    merged.b.assign(out_dim, 0.0);
    std::size_t row_off = 0, col_off = 0;
    for (std::size_t ni = 0; ni < padded.size(); ++ni) {
      const Layer& l = padded[ni].layers[li];
      const std::size_t coff = (li == 0) ? (slices.empty() ? 0 : slices[ni].first) : col_off;
      for (std::size_t i = 0; i < l.out_dim; ++i) {
        merged.b[row_off + i] = l.b[i];
        for (std::size_t jj = 0; jj < l.in_dim; ++jj)
          merged.at(row_off + i, coff + jj) = l.at(i, jj);
      }
      row_off += l.out_dim;
      if (li > 0) col_off += l.in_dim;
    }
    out.layers.push_back(std::move(merged));
  }
  out.validate();
  return out;
}

ResourceProfile resources(const Network& net) {
  ResourceProfile r;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    r.params_all += (l.in_dim + 1) * l.out_dim;
    for (double v : l.w)
      if (v != 0.0) ++r.params_nonzero;
    for (double v : l.b)
      if (v != 0.0) ++r.params_nonzero;
    if (i + 1 < net.layers.size()) r.width = std::max(r.width, l.out_dim);
    if (l.act == Act::Relu) ++r.depth;
  }
  return r;
}

double round_half_even(double v, std::size_t frac_bits) {
  const double scale = std::ldexp(1.0, static_cast<int>(frac_bits));
  return std::nearbyint(v * scale) / scale;  // FE_TONEAREST = ties to even
}

Network snap_to_grid(const Network& net, const FixedPointFormat& fmt) {
  if (fmt.frac_bits + fmt.int_bits < 1) throw NetError("fixed point format must have >= 1 bit");
  const double bound = std::ldexp(1.0, static_cast<int>(fmt.int_bits));
  Network out = net;
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    Layer& l = out.layers[li];
    auto snap = [&](double v) {
      double s = round_half_even(v, fmt.frac_bits);
      if (std::fabs(s) > bound)
        throw NetError("fixed point overflow (int_bits=" + std::to_string(fmt.int_bits) +
                       ") in layer " + std::to_string(li));
      return s;
    };
    for (double& v : l.w) v = snap(v);
    for (double& v : l.b) v = snap(v);
  }
  return out;
}

std::vector<double> evaluate_fixed_point(const Network& net, const FixedPointFormat& fmt,
                                         const std::vector<double>& x) {
  return evaluate(snap_to_grid(net, fmt), x);
}

Network scale_input(const Network& net, double c) {
  if (!(c > 0.0)) throw NetError("scale_input: c must be positive");
  Network out = net;
  for (double& v : out.layers.front().w) v /= c;
  return out;
}

// -- BatchEvaluator -----------------------------------------------------------

BatchEvaluator::BatchEvaluator(const Network& net) {
  net.validate();
  input_dim_ = net.input_dim;
  output_dim_ = net.output_dim();
  max_dim_ = input_dim_;
  for (const Layer& l : net.layers) {
    max_dim_ = std::max(max_dim_, l.out_dim);
    Prepared p;
    p.in_dim = l.in_dim;
    p.out_dim = l.out_dim;
    p.relu = (l.act == Act::Relu);
    p.b = l.b;
    std::size_t nnz = 0;
    for (double v : l.w)
      if (v != 0.0) ++nnz;
    p.sparse = nnz * 3 < l.w.size();  // CSR pays off below ~1/3 density
    if (p.sparse) {
      p.row_ptr.reserve(l.out_dim + 1);
      p.row_ptr.push_back(0);
      for (std::size_t i = 0; i < l.out_dim; ++i) {
        for (std::size_t j = 0; j < l.in_dim; ++j) {
          const double v = l.at(i, j);
          if (v != 0.0) {
            p.col.push_back(static_cast<std::int32_t>(j));
            p.val.push_back(v);
          }
        }
        p.row_ptr.push_back(static_cast<std::int32_t>(p.col.size()));
      }
    } else {
      p.w = l.w;
    }
    layers_.push_back(std::move(p));
  }
}

std::vector<std::vector<double>> BatchEvaluator::run(
    const std::vector<std::vector<double>>& xs) const {
  const std::size_t n = xs.size();
  std::vector<std::vector<double>> result(n);
  if (n == 0) return result;
  const auto& kt = kernels::active_table();
  constexpr std::size_t kBatch = 64;
  std::vector<double> buf_a(max_dim_ * kBatch), buf_b(max_dim_ * kBatch);
  for (std::size_t start = 0; start < n; start += kBatch) {
    const std::size_t bs = std::min(kBatch, n - start);
    // transpose the chunk into [dim][batch]
    for (std::size_t j = 0; j < input_dim_; ++j)
      for (std::size_t s = 0; s < bs; ++s) buf_a[j * bs + s] = xs[start + s][j];
    double* cur = buf_a.data();
    double* nxt = buf_b.data();
    for (const Prepared& p : layers_) {
      if (p.sparse) {
        kernels::SparseLayout sl{p.row_ptr.data(), p.col.data(), p.val.data()};
        kt.affine_sparse(sl, p.b.data(), p.out_dim, cur, nxt, bs, p.relu);
      } else {
        kt.affine_dense(p.w.data(), p.b.data(), p.out_dim, p.in_dim, cur, nxt, bs, p.relu);
      }
      std::swap(cur, nxt);
    }
    for (std::size_t s = 0; s < bs; ++s) {
      result[start + s].resize(output_dim_);
      for (std::size_t j = 0; j < output_dim_; ++j) result[start + s][j] = cur[j * bs + s];
    }
  }
  return result;
}

std::vector<double> BatchEvaluator::run_scalar(const std::vector<std::vector<double>>& xs) const {
  auto full = run(xs);
  std::vector<double> out(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) out[i] = full[i].at(0);
  return out;
}

// -- JSON ---------------------------------------------------------------------

std::string to_json(const Network& net, const std::string& meta_json) {
  nlohmann::json j;
  j["input_dim"] = net.input_dim;
  j["layers"] = nlohmann::json::array();
  for (const Layer& l : net.layers) {
    nlohmann::json lj;
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < l.out_dim; ++i) {
      auto row = nlohmann::json::array();
      for (std::size_t k = 0; k < l.in_dim; ++k) row.push_back(l.at(i, k));
      rows.push_back(std::move(row));
    }
    lj["w"] = std::move(rows);
    lj["b"] = l.b;
    lj["act"] = (l.act == Act::Relu) ? "relu" : "id";
    j["layers"].push_back(std::move(lj));
  }
  j["meta"] = nlohmann::json::parse(meta_json);
  return j.dump();
}

Network network_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Network net;
  net.input_dim = j.at("input_dim").get<std::size_t>();
  std::size_t cur = net.input_dim;
  for (const auto& lj : j.at("layers")) {
    Layer l;
    const auto& rows = lj.at("w");
    l.out_dim = rows.size();
    l.in_dim = cur;
    l.w.reserve(l.in_dim * l.out_dim);
    for (const auto& row : rows) {
      if (row.size() != l.in_dim) throw NetError("json: ragged weight matrix");
      for (const auto& v : row) l.w.push_back(v.get<double>());
    }
    l.b = lj.at("b").get<std::vector<double>>();
    const std::string act = lj.at("act").get<std::string>();
    if (act == "relu")
      l.act = Act::Relu;
    else if (act == "id")
      l.act = Act::Id;
    else
      throw NetError("json: unknown activation '" + act + "'");
    cur = l.out_dim;
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

void save_network(const Network& net, const std::string& path, const std::string& meta) {
  std::ofstream f(path);
  if (!f) throw NetError("cannot open for writing: " + path);
  f << to_json(net, meta) << "\n";
}

Network load_network(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NetError("cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return network_from_json(ss.str());
}

}  // namespace rmnet
