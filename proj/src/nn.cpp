#include "slicebench/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "slicebench/errors.hpp"

namespace slicebench::nn {

namespace {

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluC = 0.044715;
constexpr char kMlpMagic[4] = {'S', 'B', 'N', 'N'};
constexpr char kAdamMagic[4] = {'S', 'B', 'A', 'D'};
constexpr std::uint32_t kAdamFormatVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw CheckpointError("checkpoint truncated");
  return value;
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(os, m(r, c));
}

void get_matrix(std::istream& is, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(is);
}

void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(os, v(i));
}

void get_vector(std::istream& is, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get<double>(is);
}

void check_magic(std::istream& is, const char (&magic)[4]) {
  char buf[4];
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw CheckpointError("bad checkpoint magic");
}

Eigen::MatrixXd apply(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kLinear: return z;
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kGelu: {
      const Eigen::ArrayXXd x = z.array();
      return (0.5 * x * (1.0 + (kGeluK * (x + kGeluC * x.cube())).tanh())).matrix();
    }
  }
  return z;
}

Eigen::MatrixXd apply_derivative(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kLinear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::kRelu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::kGelu: {
      const Eigen::ArrayXXd x = z.array();
      const Eigen::ArrayXXd t = (kGeluK * (x + kGeluC * x.cube())).tanh();
      return (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluK * (1.0 + 3.0 * kGeluC * x.square()))
          .matrix();
    }
  }
  return z;
}

}  // namespace

double activate(Activation a, double x) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = x;
  return apply(a, m)(0, 0);
}

double activate_derivative(Activation a, double x) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = x;
  return apply_derivative(a, m)(0, 0);
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, Rng& rng) {
  if (widths.empty()) throw ShapeMismatch("Mlp needs at least an input width");
  input_width_ = widths.front();
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(widths[i]);
    const auto out = static_cast<Eigen::Index>(widths[i + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer layer;
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = u(rng);
    layer.activation = i + 2 == widths.size() ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<Layer> layers, std::size_t input_width)
    : layers_(std::move(layers)), input_width_(input_width) {
  std::size_t width = input_width_;
  for (const auto& l : layers_) {
    if (static_cast<std::size_t>(l.weight.cols()) != width || l.bias.size() != l.weight.rows())
      throw ShapeMismatch("Mlp layers have inconsistent widths");
    width = static_cast<std::size_t>(l.weight.rows());
  }
}

std::size_t Mlp::output_size() const {
  return layers_.empty() ? input_width_ : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w{input_width_};
  for (const auto& l : layers_) w.push_back(static_cast<std::size_t>(l.weight.rows()));
  return w;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_width_)
    throw ShapeMismatch("Mlp::forward: input width " + std::to_string(x.rows()) + " != " +
                        std::to_string(input_width_));
  Eigen::MatrixXd h = x;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    h = apply(l.activation, z);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  if (static_cast<std::size_t>(x.rows()) != input_width_)
    throw ShapeMismatch("Mlp::forward: input width " + std::to_string(x.rows()) + " != " +
                        std::to_string(input_width_));
  cache.inputs.clear();
  cache.pre.clear();
  Eigen::MatrixXd h = x;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weight * h;
    z.colwise() += l.bias;
    cache.inputs.push_back(std::move(h));
    h = apply(l.activation, z);
    cache.pre.push_back(std::move(z));
  }
  return h;
}

Eigen::VectorXd Mlp::forward(std::span<const double> x) const {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward(Eigen::MatrixXd(v)).col(0);
}

BackwardResult Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                             bool param_grads) const {
  if (cache.inputs.size() != layers_.size())
    throw ShapeMismatch("Mlp::backward: cache does not match the network");
  BackwardResult out;
  if (layers_.empty()) {
    out.input = grad_out;
    return out;
  }
  if (grad_out.rows() != cache.pre.back().rows() || grad_out.cols() != cache.pre.back().cols())
    throw ShapeMismatch("Mlp::backward: output gradient shape mismatch");
  if (param_grads) out.params.resize(layers_.size());
  Eigen::MatrixXd g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Layer& l = layers_[i];
    const Eigen::MatrixXd dz = g.cwiseProduct(apply_derivative(l.activation, cache.pre[i]));
    if (param_grads) {
      out.params[i].weight.noalias() = dz * cache.inputs[i].transpose();
      out.params[i].bias = dz.rowwise().sum();
    }
    g.noalias() = l.weight.transpose() * dz;
  }
  out.input = std::move(g);
  return out;
}

void Mlp::soft_update_from(const Mlp& source, double tau) {
  if (source.layers_.size() != layers_.size()) throw ShapeMismatch("soft update between different nets");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].weight = tau * source.layers_[i].weight + (1.0 - tau) * layers_[i].weight;
    layers_[i].bias = tau * source.layers_[i].bias + (1.0 - tau) * layers_[i].bias;
  }
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (const auto& l : net.layers())
    g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                 Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

double gradient_norm(const Gradients& g) {
  double sq = 0.0;
  for (const auto& l : g) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(sq);
}

bool all_finite(const Gradients& g) {
  for (const auto& l : g)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

void accumulate(Gradients& a, const Gradients& b, double scale) {
  if (a.size() != b.size()) throw ShapeMismatch("gradient accumulate: layer count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].weight += scale * b[i].weight;
    a[i].bias += scale * b[i].bias;
  }
}

Adam::Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
      m_(zero_gradients(net)), v_(zero_gradients(net)) {}

void Adam::step(Mlp& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.size() != layers.size() || m_.size() != layers.size())
    throw ShapeMismatch("Adam::step: gradient/parameter layout mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = eps_ * std::sqrt(c2);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    m_[i].weight = beta1_ * m_[i].weight + (1.0 - beta1_) * grads[i].weight;
    v_[i].weight = beta2_ * v_[i].weight + (1.0 - beta2_) * grads[i].weight.cwiseAbs2();
    m_[i].bias = beta1_ * m_[i].bias + (1.0 - beta1_) * grads[i].bias;
    v_[i].bias = beta2_ * v_[i].bias + (1.0 - beta2_) * grads[i].bias.cwiseAbs2();
    layers[i].weight.array() -= step * m_[i].weight.array() / (v_[i].weight.array().sqrt() + eps_hat);
    layers[i].bias.array() -= step * m_[i].bias.array() / (v_[i].bias.array().sqrt() + eps_hat);
  }
}

void Adam::write(std::ostream& os) const {
  os.write(kAdamMagic, 4);
  put<std::uint32_t>(os, kAdamFormatVersion);
  put<double>(os, lr_);
  put<double>(os, beta1_);
  put<double>(os, beta2_);
  put<double>(os, eps_);
  put<std::uint64_t>(os, t_);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m_.size()));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m_[i].weight.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m_[i].weight.cols()));
    put_matrix(os, m_[i].weight);
    put_vector(os, m_[i].bias);
    put_matrix(os, v_[i].weight);
    put_vector(os, v_[i].bias);
  }
}

Adam Adam::read(std::istream& is) {
  check_magic(is, kAdamMagic);
  if (get<std::uint32_t>(is) != kAdamFormatVersion) throw CheckpointError("unsupported optimizer version");
  Adam a;
  a.lr_ = get<double>(is);
  a.beta1_ = get<double>(is);
  a.beta2_ = get<double>(is);
  a.eps_ = get<double>(is);
  a.t_ = get<std::uint64_t>(is);
  const auto n = get<std::uint32_t>(is);
  a.m_.resize(n);
  a.v_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    a.m_[i] = {Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    a.v_[i] = {Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    get_matrix(is, a.m_[i].weight);
    get_vector(is, a.m_[i].bias);
    get_matrix(is, a.v_[i].weight);
    get_vector(is, a.v_[i].bias);
  }
  return a;
}

void write_mlp(std::ostream& os, const Mlp& net) {
  os.write(kMlpMagic, 4);
  put<std::uint32_t>(os, kMlpFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(net.depth()));
  for (std::size_t w : net.widths()) put<std::uint64_t>(os, w);
  for (const auto& l : net.layers()) put<std::uint8_t>(os, static_cast<std::uint8_t>(l.activation));
  for (const auto& l : net.layers()) {
    put_matrix(os, l.weight);
    put_vector(os, l.bias);
  }
  if (!os) throw CheckpointError("failed to write network");
}

Mlp read_mlp(std::istream& is) {
  check_magic(is, kMlpMagic);
  const auto version = get<std::uint32_t>(is);
  if (version != kMlpFormatVersion)
    throw CheckpointError("unsupported network format version " + std::to_string(version));
  const auto depth = get<std::uint32_t>(is);
  std::vector<std::size_t> widths(depth + 1);
  for (auto& w : widths) w = static_cast<std::size_t>(get<std::uint64_t>(is));
  std::vector<Layer> layers(depth);
  for (auto& l : layers) {
    const auto tag = get<std::uint8_t>(is);
    if (tag > static_cast<std::uint8_t>(Activation::kTanh)) throw CheckpointError("unknown activation tag");
    l.activation = static_cast<Activation>(tag);
  }
  for (std::uint32_t i = 0; i < depth; ++i) {
    layers[i].weight.resize(static_cast<Eigen::Index>(widths[i + 1]), static_cast<Eigen::Index>(widths[i]));
    layers[i].bias.resize(static_cast<Eigen::Index>(widths[i + 1]));
    get_matrix(is, layers[i].weight);
    get_vector(is, layers[i].bias);
  }
  return Mlp(std::move(layers), widths.front());
}

}  // namespace slicebench::nn
