#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slicebench/rng.hpp"

namespace slicebench::nn {

enum class Activation : std::uint8_t { kLinear = 0, kRelu = 1, kGelu = 2, kTanh = 3 };

/// Dense layer y = act(W x + b); W is (out x in).
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Activation activation = Activation::kLinear;
};

struct LayerGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

using Gradients = std::vector<LayerGrad>;

/// Per-layer inputs and pre-activations recorded by a forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
};

struct BackwardResult {
  Gradients params;        // empty when parameter gradients were not requested
  Eigen::MatrixXd input;   // d loss / d input, same shape as the forward input
};

/// Scalar activation and derivative. GELU uses the tanh approximation
///   0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
double activate(Activation a, double x);
double activate_derivative(Activation a, double x);

/// Fixed-topology multilayer perceptron in 64-bit precision. Batched calls
/// take one sample per column.
class Mlp {
 public:
  Mlp() = default;

  /// widths = {input, hidden..., output}. A single width is the identity map.
  /// Parameters are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, Rng& rng);

  explicit Mlp(std::vector<Layer> layers, std::size_t input_width);

  std::size_t input_size() const { return input_width_; }
  std::size_t output_size() const;
  std::size_t depth() const { return layers_.size(); }
  std::size_t parameter_count() const;
  std::vector<std::size_t> widths() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;
  Eigen::VectorXd forward(std::span<const double> x) const;

  /// Reverse pass for d loss / d output = grad_out (same shape as the output).
  BackwardResult backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                          bool param_grads = true) const;

  /// this <- tau * source + (1 - tau) * this.
  void soft_update_from(const Mlp& source, double tau);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  bool all_finite() const;

  /// Flat parameter copy (layer by layer, weight row-major then bias).
  std::vector<double> flatten() const;

 private:
  std::vector<Layer> layers_;
  std::size_t input_width_ = 0;
};

Gradients zero_gradients(const Mlp& net);
double gradient_norm(const Gradients& g);
bool all_finite(const Gradients& g);
/// a += scale * b
void accumulate(Gradients& a, const Gradients& b, double scale = 1.0);

/// Bias-corrected Adam.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(Mlp& net, const Gradients& grads);

  double learning_rate() const { return lr_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double epsilon() const { return eps_; }
  std::uint64_t steps() const { return t_; }

  void write(std::ostream& os) const;
  static Adam read(std::istream& is);

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t t_ = 0;
  Gradients m_;
  Gradients v_;
};

/// Checkpoint layout (little-endian):
///   char[4] "SBNN" | u32 version | u32 layer count L | u64 widths[L + 1] |
///   u8 activation[L] | per layer: f64 weight (row-major, out x in), f64 bias[out]
inline constexpr std::uint32_t kMlpFormatVersion = 1;

void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

}  // namespace slicebench::nn
