#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rmnet {

enum class Act : std::uint8_t { Relu, Id };

// One affine map plus activation. Weights are row-major, out_dim x in_dim.
struct Layer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> w;
  std::vector<double> b;
  Act act = Act::Relu;

  double& at(std::size_t i, std::size_t j) { return w[i * in_dim + j]; }
  double at(std::size_t i, std::size_t j) const { return w[i * in_dim + j]; }
};

// Layered ReLU circuit: every layer but the last applies relu, the last is an
// identity-activation affine map. Immutable once built; evaluation is
// re-entrant and safe to share across threads.
struct Network {
  std::size_t input_dim = 0;
  std::vector<Layer> layers;

  std::size_t output_dim() const { return layers.empty() ? input_dim : layers.back().out_dim; }
  // depth = number of relu (hidden) layers
  std::size_t depth() const;
  void validate() const;  // dimension chain, activation pattern, finite params
};

struct ResourceProfile {
  std::size_t params_all = 0;
  std::size_t params_nonzero = 0;
  std::size_t width = 0;  // max hidden layer dim
  std::size_t depth = 0;  // relu layer count
  std::optional<std::size_t> bit_complexity;
};

struct FixedPointFormat {
  std::size_t frac_bits = 0;
  std::size_t int_bits = 1;
};

struct NetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- linear-combination helper for readable gadget construction -------------

// A row expression: sum of (input index, coefficient) terms plus a constant.
struct Lin {
  std::vector<std::pair<std::size_t, double>> terms;
  double bias = 0.0;

  Lin() = default;
  Lin(std::size_t idx, double coef, double c = 0.0) : bias(c) { terms.emplace_back(idx, coef); }
  Lin& add(std::size_t idx, double coef) {
    terms.emplace_back(idx, coef);
    return *this;
  }
  Lin& shift(double c) {
    bias += c;
    return *this;
  }
};

// Builds a Network layer by layer from row expressions.
class NetBuilder {
 public:
  explicit NetBuilder(std::size_t input_dim) : dim_(input_dim) { net_.input_dim = input_dim; }

  std::size_t dim() const { return dim_; }
  void relu_layer(const std::vector<Lin>& rows) { push(rows, Act::Relu); }
  // final identity layer; must be the last call before take()
  Network output(const std::vector<Lin>& rows) {
    push(rows, Act::Id);
    Network n = std::move(net_);
    n.validate();
    return n;
  }

 private:
  void push(const std::vector<Lin>& rows, Act act);
  Network net_;
  std::size_t dim_;
};

// -- core operations ---------------------------------------------------------

std::vector<double> evaluate(const Network& net, const std::vector<double>& x);

enum class Junction {
  Merge,  // fuse f's final affine into g's first layer: depth adds exactly
  Relu,   // keep f's final map as a relu layer (sigma-composition)
};

Network compose_serial(const Network& f, const Network& g, Junction j = Junction::Merge);

// Stack networks side by side. slices[i] = (offset, length) selects each
// net's view of the shared input; pass {} when all nets read the full input.
// Nets of unequal depth are padded with relu identity rows at the end, which
// is only valid when their outputs are nonnegative on the domain of interest.
Network stack_parallel(const std::vector<Network>& nets,
                       const std::vector<std::pair<std::size_t, std::size_t>>& slices = {});

ResourceProfile resources(const Network& net);

// Evaluate with parameters snapped to the fixed-point grid (round half to
// even). Parameters whose magnitude exceeds the int_bits range raise NetError
// naming the offending layer. Activations stay in binary64.
std::vector<double> evaluate_fixed_point(const Network& net, const FixedPointFormat& fmt,
                                         const std::vector<double>& x);

Network snap_to_grid(const Network& net, const FixedPointFormat& fmt);

// net'(x) = net(x / c): divides the first weight matrix by c.
Network scale_input(const Network& net, double c);

double round_half_even(double v, std::size_t frac_bits);

// -- batched evaluation ------------------------------------------------------

// Prepares per-layer kernels (dense or CSR by density) once and evaluates
// many inputs per pass through the runtime-dispatched SIMD table.
class BatchEvaluator {
 public:
  explicit BatchEvaluator(const Network& net);

  // xs is n x input_dim (row per sample); returns n x output_dim
  std::vector<std::vector<double>> run(const std::vector<std::vector<double>>& xs) const;
  // convenience: single output networks
  std::vector<double> run_scalar(const std::vector<std::vector<double>>& xs) const;

 private:
  struct Prepared {
    std::size_t in_dim, out_dim;
    bool relu;
    bool sparse;
    std::vector<double> w;  // dense copy when !sparse
    std::vector<double> b;
    std::vector<std::int32_t> row_ptr, col;
    std::vector<double> val;
  };
  std::vector<Prepared> layers_;
  std::size_t input_dim_ = 0, output_dim_ = 0, max_dim_ = 0;
};

// -- JSON --------------------------------------------------------------------

std::string to_json(const Network& net, const std::string& meta_json = "{}");
Network network_from_json(const std::string& text);
void save_network(const Network& net, const std::string& path, const std::string& meta = "{}");
Network load_network(const std::string& path);

}  // namespace rmnet
