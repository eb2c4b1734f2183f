#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cocoa {

enum class Activation { relu, tanh };
enum class OutputActivation { identity, sigmoid };
enum class LossKind { mse, bce };
enum class OptimizerKind { sgd, adam };

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input .. output, at least 2 entries
  Activation activation = Activation::relu;
  OutputActivation output_activation = OutputActivation::identity;
  std::uint64_t init_seed = 0;
};

struct TrainSpec {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double l2 = 0.0;  // weight decay on weights, not biases
  std::uint64_t seed = 0;
};

// Dense feedforward network with explicit backpropagation. Parameters are
// exposed as one flat vector (per layer: row-major weights, then biases) so
// optimizers and checkpoints treat the network as a plain coordinate vector.
class Mlp {
 public:
  explicit Mlp(const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_size() const { return spec_.layer_sizes.front(); }
  std::size_t output_size() const { return spec_.layer_sizes.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  std::size_t param_count() const;

  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);
  // Adds l2 * w to the weight coordinates of grad (biases untouched).
  void add_weight_decay(double l2, std::vector<double>& grad) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Columns are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  // Cached activations for one batch, consumed by the backward pass.
  struct Trace {
    std::vector<Eigen::MatrixXd> activations;  // A_0 (input) .. A_L (output)
    Eigen::MatrixXd output_preact;             // Z_L
  };

  Eigen::MatrixXd forward_trace(const Eigen::MatrixXd& inputs,
                                Trace& trace) const;
  // Accumulates dLoss/dparams into grad given dLoss/d(output) for the
  // batch recorded in trace. grad must have param_count() entries.
  void backward_trace(const Trace& trace, const Eigen::MatrixXd& output_grad,
                      std::vector<double>& grad) const;
  // Same, but output_grad is dLoss/dZ_L (output pre-activation). Used by
  // losses that fold the output nonlinearity into the loss for stability.
  void backward_from_preactivation(const Trace& trace,
                                   Eigen::MatrixXd output_preact_grad,
                                   std::vector<double>& grad) const;

  const Eigen::MatrixXd& weight(std::size_t layer) const {
    return weights_[layer];
  }
  const Eigen::VectorXd& bias(std::size_t layer) const {
    return biases_[layer];
  }

 private:
  MlpSpec spec_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Batch loss and full gradient. mse works with either output activation;
// bce requires a sigmoid output and targets in [0,1] and is computed in the
// numerically stable logit form. Loss is averaged over the batch and summed
// over output coordinates.
BackwardResult backward(const Mlp& net, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, LossKind loss);

double loss_value(const Mlp& net, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, LossKind loss);

// First-order update rule over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t n_params);
  void step(std::vector<double>& params, const std::vector<double>& grad);

 private:
  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  Mlp net;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

// Minibatch training; same (net, data, spec) always produces bit-identical
// parameters. Throws if the loss turns non-finite, naming the epoch.
TrainResult train(Mlp net, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, const TrainSpec& spec,
                  LossKind loss);

// Versioned text checkpoint: layer sizes plus row-major parameter arrays.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);
void write_mlp(const Mlp& net, std::ostream& out);
Mlp read_mlp(std::istream& in);

std::string activation_name(Activation a);
std::string output_activation_name(OutputActivation a);

}  // namespace cocoa
