#include "cocoa/neuralnet.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cocoa/dataset.hpp"  // format_double
#include "cocoa/rng.hpp"

namespace cocoa {

namespace {

void validate_spec(const MlpSpec& spec) {
  if (spec.layer_sizes.size() < 2)
    throw std::invalid_argument("MlpSpec: need at least input and output sizes");
  for (const std::size_t s : spec.layer_sizes)
    if (s == 0) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
}

double stable_softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
  validate_spec(spec_);
  Rng rng = Rng(spec_.init_seed).split("neuralnet.init");
  const std::size_t layers = spec_.layer_sizes.size() - 1;
  weights_.reserve(layers);
  biases_.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = static_cast<double>(spec_.layer_sizes[l]);
    const auto fan_out = static_cast<double>(spec_.layer_sizes[l + 1]);
    // He-style for relu, Xavier for tanh.
    const double limit = spec_.activation == Activation::relu
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(spec_.layer_sizes[l + 1], spec_.layer_sizes[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = rng.uniform(-limit, limit);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(spec_.layer_sizes[l + 1])));
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::MatrixXd& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r)
      flat.push_back(biases_[l](r));
  }
  return flat;
}

void Mlp::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("Mlp::set_parameters: size mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r)
      biases_[l](r) = flat[k++];
  }
}

void Mlp::add_weight_decay(double l2, std::vector<double>& grad) const {
  if (l2 == 0.0) return;
  if (grad.size() != param_count())
    throw std::invalid_argument("Mlp::add_weight_decay: size mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::MatrixXd& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) grad[k++] += l2 * w(r, c);
    k += static_cast<std::size_t>(biases_[l].size());
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x).col(0);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  Trace trace;
  return forward_trace(inputs, trace);
}

Eigen::MatrixXd Mlp::forward_trace(const Eigen::MatrixXd& inputs,
                                   Trace& trace) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_size())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  trace.activations.clear();
  trace.activations.reserve(weights_.size() + 1);
  trace.activations.push_back(inputs);
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    const bool last = l + 1 == weights_.size();
    if (last) {
      trace.output_preact = z;
      if (spec_.output_activation == OutputActivation::sigmoid)
        a = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      else
        a = std::move(z);
    } else if (spec_.activation == Activation::relu) {
      a = z.cwiseMax(0.0);
    } else {
      a = z.array().tanh().matrix();
    }
    trace.activations.push_back(a);
  }
  return a;
}

void Mlp::backward_from_preactivation(const Trace& trace, Eigen::MatrixXd dz,
                                      std::vector<double>& grad) const {
  if (grad.size() != param_count())
    throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");
  // Per-layer offsets into the flat gradient.
  std::vector<std::size_t> offsets(weights_.size());
  std::size_t off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  for (std::size_t li = weights_.size(); li-- > 0;) {
    const Eigen::MatrixXd& a_prev = trace.activations[li];
    const Eigen::MatrixXd dw = dz * a_prev.transpose();
    const Eigen::VectorXd db = dz.rowwise().sum();
    std::size_t k = offsets[li];
    for (Eigen::Index r = 0; r < dw.rows(); ++r)
      for (Eigen::Index c = 0; c < dw.cols(); ++c) grad[k++] += dw(r, c);
    for (Eigen::Index r = 0; r < db.size(); ++r) grad[k++] += db(r);
    if (li == 0) break;
    Eigen::MatrixXd da = weights_[li].transpose() * dz;
    const Eigen::MatrixXd& a = trace.activations[li];  // hidden activations
    if (spec_.activation == Activation::relu) {
      dz = da.cwiseProduct(
          a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    } else {
      dz = da.cwiseProduct(
          a.unaryExpr([](double v) { return 1.0 - v * v; }));
    }
  }
}

void Mlp::backward_trace(const Trace& trace,
                         const Eigen::MatrixXd& output_grad,
                         std::vector<double>& grad) const {
  Eigen::MatrixXd dz = output_grad;
  if (spec_.output_activation == OutputActivation::sigmoid) {
    const Eigen::MatrixXd& p = trace.activations.back();
    dz = dz.cwiseProduct(
        p.unaryExpr([](double v) { return v * (1.0 - v); }));
  }
  backward_from_preactivation(trace, std::move(dz), grad);
}

namespace {

void check_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, LossKind loss) {
  if (inputs.cols() == 0) throw std::invalid_argument("backward: empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != net.input_size())
    throw std::invalid_argument("backward: input dimension mismatch");
  if (static_cast<std::size_t>(targets.rows()) != net.output_size() ||
      targets.cols() != inputs.cols())
    throw std::invalid_argument("backward: target shape mismatch");
  if (loss == LossKind::bce) {
    if (net.spec().output_activation != OutputActivation::sigmoid)
      throw std::invalid_argument("backward: bce requires sigmoid output");
    if ((targets.array() < 0.0).any() || (targets.array() > 1.0).any())
      throw std::invalid_argument("backward: bce targets outside [0,1]");
  }
}

}  // namespace

BackwardResult backward(const Mlp& net, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, LossKind loss) {
  check_batch(net, inputs, targets, loss);
  Mlp::Trace trace;
  const Eigen::MatrixXd out = net.forward_trace(inputs, trace);
  const double inv_b = 1.0 / static_cast<double>(inputs.cols());

  BackwardResult result;
  result.grad.assign(net.param_count(), 0.0);
  if (loss == LossKind::mse) {
    const Eigen::MatrixXd err = out - targets;
    result.loss = err.squaredNorm() * inv_b;
    net.backward_trace(trace, 2.0 * inv_b * err, result.grad);
  } else {
    const Eigen::MatrixXd& z = trace.output_preact;
    double total = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      for (Eigen::Index r = 0; r < z.rows(); ++r)
        total += stable_softplus(z(r, c)) - targets(r, c) * z(r, c);
    result.loss = total * inv_b;
    // d(loss)/dz = (sigmoid(z) - y) / B; bypasses the output sigmoid.
    net.backward_from_preactivation(trace, inv_b * (out - targets),
                                    result.grad);
  }
  return result;
}

double loss_value(const Mlp& net, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, LossKind loss) {
  check_batch(net, inputs, targets, loss);
  Mlp::Trace trace;
  const Eigen::MatrixXd out = net.forward_trace(inputs, trace);
  const double inv_b = 1.0 / static_cast<double>(inputs.cols());
  if (loss == LossKind::mse) return (out - targets).squaredNorm() * inv_b;
  const Eigen::MatrixXd& z = trace.output_preact;
  double total = 0.0;
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (Eigen::Index r = 0; r < z.rows(); ++r)
      total += stable_softplus(z(r, c)) - targets(r, c) * z(r, c);
  return total * inv_b;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate,
                     std::size_t n_params)
    : kind_(kind), lr_(learning_rate) {
  if (!(lr_ >= 0.0))
    throw std::invalid_argument("Optimizer: learning rate must be >= 0");
  if (kind_ == OptimizerKind::adam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::step(std::vector<double>& params,
                     const std::vector<double>& grad) {
  if (params.size() != grad.size())
    throw std::invalid_argument("Optimizer::step: size mismatch");
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k)
      params[k] -= lr_ * grad[k];
    return;
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("Optimizer::step: parameter count changed");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = beta1 * m_[k] + (1.0 - beta1) * grad[k];
    v_[k] = beta2 * v_[k] + (1.0 - beta2) * grad[k] * grad[k];
    params[k] -= lr_ * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + eps);
  }
}

TrainResult train(Mlp net, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, const TrainSpec& spec,
                  LossKind loss) {
  if (!(spec.learning_rate >= 0.0))
    throw std::invalid_argument("train: learning_rate must be >= 0");
  if (spec.batch_size == 0)
    throw std::invalid_argument("train: batch_size must be >= 1");
  check_batch(net, inputs, targets, loss);

  const std::size_t n = static_cast<std::size_t>(inputs.cols());
  std::vector<double> params = net.parameters();
  Optimizer opt(spec.optimizer, spec.learning_rate, params.size());
  Rng rng = Rng(spec.seed).split("neuralnet.train");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{std::move(net), {}};
  result.loss_trace.reserve(spec.epochs);
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += spec.batch_size) {
      const std::size_t b = std::min(spec.batch_size, n - start);
      Eigen::MatrixXd bx(inputs.rows(), static_cast<Eigen::Index>(b));
      Eigen::MatrixXd by(targets.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t k = 0; k < b; ++k) {
        bx.col(static_cast<Eigen::Index>(k)) =
            inputs.col(static_cast<Eigen::Index>(order[start + k]));
        by.col(static_cast<Eigen::Index>(k)) =
            targets.col(static_cast<Eigen::Index>(order[start + k]));
      }
      BackwardResult back = backward(result.net, bx, by, loss);
      result.net.add_weight_decay(spec.l2, back.grad);
      opt.step(params, back.grad);
      result.net.set_parameters(params);
      epoch_loss += back.loss * static_cast<double>(b);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train: loss diverged at epoch " +
                               std::to_string(epoch));
    result.loss_trace.push_back(epoch_loss);
  }
  return result;
}

std::string activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

std::string output_activation_name(OutputActivation a) {
  return a == OutputActivation::identity ? "identity" : "sigmoid";
}

namespace {

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::runtime_error("checkpoint: unknown activation " + s);
}

OutputActivation output_activation_from_name(const std::string& s) {
  if (s == "identity") return OutputActivation::identity;
  if (s == "sigmoid") return OutputActivation::sigmoid;
  throw std::runtime_error("checkpoint: unknown output activation " + s);
}

}  // namespace

void write_mlp(const Mlp& net, std::ostream& out) {
  out << "MLPCKPT 1\n";
  out << "layers";
  for (const std::size_t s : net.spec().layer_sizes) out << ' ' << s;
  out << '\n';
  out << "activation " << activation_name(net.spec().activation) << ' '
      << output_activation_name(net.spec().output_activation) << '\n';
  const std::vector<double> params = net.parameters();
  out << "params " << params.size() << '\n';
  for (const double p : params) out << format_double(p) << '\n';
}

Mlp read_mlp(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != "MLPCKPT" || version != 1)
    throw std::runtime_error("checkpoint: bad MLP header");
  std::string key;
  in >> key;
  if (key != "layers") throw std::runtime_error("checkpoint: expected layers");
  MlpSpec spec;
  std::string rest;
  std::getline(in, rest);
  std::istringstream sizes(rest);
  std::size_t s;
  while (sizes >> s) spec.layer_sizes.push_back(s);
  std::string act, out_act;
  in >> key >> act >> out_act;
  if (key != "activation")
    throw std::runtime_error("checkpoint: expected activation");
  spec.activation = activation_from_name(act);
  spec.output_activation = output_activation_from_name(out_act);
  std::size_t count = 0;
  in >> key >> count;
  if (key != "params") throw std::runtime_error("checkpoint: expected params");
  Mlp net(spec);
  if (count != net.param_count())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  std::vector<double> params(count);
  for (double& p : params) {
    if (!(in >> p)) throw std::runtime_error("checkpoint: truncated params");
  }
  net.set_parameters(params);
  return net;
}

void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
  write_mlp(net, out);
  if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  return read_mlp(in);
}

}  // namespace cocoa
