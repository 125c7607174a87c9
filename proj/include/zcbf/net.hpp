#ifndef ZCBF_NET_HPP
#define ZCBF_NET_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "zcbf/dynamics.hpp"

namespace zcbf {

enum class Activation : std::uint32_t { Tanh = 1 };

const char* activation_name(Activation a);

/// Value of the barrier network and its gradient with respect to the input.
struct DualEval {
  double value = 0.0;
  Eigen::VectorXd input_grad;
};

/// Fully connected scalar field W(x; theta) with tanh hidden units and a tanh
/// output, so the output lies in (-1, 1).
///
/// Parameter layout (layout version 1): for each layer l in order, the weight
/// matrix W_l (dims[l+1] x dims[l], row-major) followed by the bias b_l
/// (dims[l+1] entries).
class BarrierNet {
 public:
  static constexpr std::uint32_t kLayoutVersion = 1;

  BarrierNet(std::vector<int> layer_dims, Eigen::VectorXd theta);

  /// LeCun-normal weights (std 1/sqrt(fan_in)), zero biases.
  static BarrierNet init(std::vector<int> layer_dims, std::uint64_t seed);
  static std::size_t param_count(const std::vector<int>& layer_dims);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  Eigen::Index num_params() const { return theta_.size(); }
  Activation hidden_activation() const { return Activation::Tanh; }
  Activation output_activation() const { return Activation::Tanh; }

  const Eigen::VectorXd& theta() const { return theta_; }
  void set_theta(const Eigen::VectorXd& theta);

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMatrix> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(dims_[layer + 1]) * dims_[layer];
  }

  double forward(const StateVector& x) const;
  DualEval forward_with_input_grad(const StateVector& x) const;

 private:
  void check_input(const StateVector& x) const;

  std::vector<int> dims_;
  std::vector<Eigen::Index> offsets_;
  Eigen::VectorXd theta_;
};

/// Per-sample loss l(W, grad_x W) together with its partial derivatives.
/// Leave d_grad empty when the loss does not depend on grad_x W.
struct SampleLoss {
  double value = 0.0;
  double d_value = 0.0;
  Eigen::VectorXd d_grad;
};

/// One mean-reduced term  weight * mean_i l(x_i)  of a batch loss. `points`
/// holds states as columns; `batch` selects the columns. The loss callback
/// receives the column index and the network evaluation at that column.
struct LossTerm {
  const Eigen::MatrixXd* points = nullptr;
  std::span<const Eigen::Index> batch;
  double weight = 1.0;
  bool uses_input_grad = false;
  std::function<SampleLoss(Eigen::Index, const DualEval&)> loss;
};

struct LossGradient {
  double total = 0.0;
  std::vector<double> term_means;  // unweighted mean of each term
  Eigen::VectorXd grad;            // d total / d theta
};

/// Scratch buffers for the extended (value + input tangent) forward pass and
/// its adjoint. Reuse one per thread.
class NetWorkspace {
 public:
  explicit NetWorkspace(const BarrierNet& net);

 private:
  friend double accumulate_sample_gradient(const BarrierNet&, const StateVector&,
                                           const std::function<SampleLoss(const DualEval&)>&,
                                           double, bool, Eigen::Ref<Eigen::VectorXd>,
                                           NetWorkspace&);
  std::vector<Eigen::VectorXd> act_;      // act_[0] = x, act_[l+1] = tanh(z_l)
  std::vector<Eigen::MatrixXd> tangent_;  // d act_[l] / dx
  std::vector<Eigen::MatrixXd> pre_tangent_;
  Eigen::VectorXd act_bar_, z_bar_, tmp_;
  Eigen::MatrixXd tangent_bar_, pre_tangent_bar_;
  DualEval eval_;
};

/// Adds weight * d l(W(x), grad W(x)) / d theta into `grad` and returns
/// l. The adjoint runs through the input-tangent recurrence too, so losses
/// containing grad_x W get their mixed second derivatives exactly.
double accumulate_sample_gradient(const BarrierNet& net, const StateVector& x,
                                  const std::function<SampleLoss(const DualEval&)>& loss,
                                  double weight, bool uses_input_grad,
                                  Eigen::Ref<Eigen::VectorXd> grad, NetWorkspace& ws);

/// Exact parameter gradient of  sum_k weight_k * mean_{i in batch_k} l_k.
/// Throws std::invalid_argument for an empty batch or a missing callback.
LossGradient loss_param_grad(const BarrierNet& net, std::span<const LossTerm> terms);

// Checkpoints. Binary layout, all fields little-endian:
//   char[8]  magic "ZCBFNET\0"
//   u32      format version (1)
//   u32      number of layer dims d, then d x u32 dims
//   u32      hidden activation id, u32 output activation id (1 = tanh)
//   f64      alpha used in training
//   u64      parameter count p, then p x f64 parameters (layout above)
struct Checkpoint {
  BarrierNet net;
  double alpha;
};

void save_checkpoint(const std::filesystem::path& path, const BarrierNet& net, double alpha);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Plain-text export: header lines then one parameter per line in %.17g.
void export_text(const std::filesystem::path& path, const BarrierNet& net, double alpha);
Checkpoint import_text(const std::filesystem::path& path);

}  // namespace zcbf

#endif  // ZCBF_NET_HPP
