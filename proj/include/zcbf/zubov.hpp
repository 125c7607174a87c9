#ifndef ZCBF_ZUBOV_HPP
#define ZCBF_ZUBOV_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "zcbf/dynamics.hpp"
#include "zcbf/net.hpp"

namespace zcbf {

/// beta(s) = tanh(alpha s): the solution of beta' = alpha (1 - beta)(1 + beta),
/// beta(0) = 0, used to squash an unbounded barrier into [0, 1).
double beta(double s, double alpha);

/// f(x) + g(x) u_ref(x)
Eigen::VectorXd closed_loop_field(const ControlAffineSystem& sys, const ReferenceController& ref,
                                  const StateVector& x);

/// Squared distance from x to the safe anchor set S (zero inside S).
double phi(const ControlAffineSystem& sys, const StateVector& x);

/// Zubov residual  grad W . f_cl + alpha (1 + W)(1 - W) phi  from an
/// evaluation of W and its input gradient.
double zubov_residual(const DualEval& w, const Eigen::VectorXd& field, double phi_value, double alpha);

double residual(const BarrierNet& net, const ControlAffineSystem& sys, const ReferenceController& ref,
                double alpha, const StateVector& x);

/// Target value of W on the domain boundary: 1 outside the safe set, beta(B0)
/// where the system marks the boundary as inside it.
double bc_target(const ControlAffineSystem& sys, double alpha, const StateVector& y);

struct LossWeights {
  double residual = 1.0;
  double boundary = 1.0;
  double safe = 5.0;
  double unsafe = 5.0;
};

struct TrainConfig {
  double alpha = 1.0;
  LossWeights weights;
  int n_interior = 10000;
  int n_boundary = 2000;
  int n_safe = 2000;
  int n_unsafe = 2000;
  int batch_size = 512;
  double learning_rate = 1e-3;
  int max_epochs = 2000;
  double loss_threshold = 1e-4;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {16, 16};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Training points, one state per column.
struct SampleBank {
  Eigen::MatrixXd interior;
  Eigen::MatrixXd boundary;
  Eigen::VectorXd boundary_target;
  Eigen::MatrixXd safe;
  Eigen::MatrixXd unsafe;
};

Eigen::MatrixXd sample_interior(const DomainBox& box, int count, std::mt19937_64& rng);
/// Picks a non-periodic coordinate, pins it to one of its two faces, and
/// draws the rest uniformly.
Eigen::MatrixXd sample_boundary(const ControlAffineSystem& sys, int count, std::mt19937_64& rng);
/// Rejection sampling of the domain restricted to a region.
Eigen::MatrixXd sample_region(const DomainBox& box, const RegionSpec& region, int count,
                              std::mt19937_64& rng);

SampleBank make_sample_bank(const ControlAffineSystem& sys, const TrainConfig& cfg, std::mt19937_64& rng);

struct LossReport {
  int epoch = 0;
  double l_r = 0.0;
  double l_b = 0.0;
  double l_safe = 0.0;
  double l_unsafe = 0.0;
  double total = 0.0;
};

/// Column indices into each bank for one optimisation step.
struct BatchSelection {
  std::span<const Eigen::Index> interior;
  std::span<const Eigen::Index> boundary;
  std::span<const Eigen::Index> safe;
  std::span<const Eigen::Index> unsafe;
};

/// Sample bank plus the per-point quantities the residual needs (closed-loop
/// field and phi), computed once.
class ZubovProblem {
 public:
  ZubovProblem(const ControlAffineSystem& sys, const ReferenceController& ref, const TrainConfig& cfg,
               SampleBank bank);

  const SampleBank& bank() const { return bank_; }
  const TrainConfig& config() const { return cfg_; }

  /// Weighted four-term loss and its exact parameter gradient. Empty
  /// boundary/safe/unsafe selections drop their term; an empty interior
  /// selection throws.
  LossGradient evaluate(const BarrierNet& net, const BatchSelection& batch) const;

 private:
  TrainConfig cfg_;
  SampleBank bank_;
  Eigen::MatrixXd field_;  // closed-loop field at each interior point
  Eigen::VectorXd phi_;
};

/// The four losses and their weighted total over a batch.
LossReport losses(const BarrierNet& net, const ZubovProblem& problem, const BatchSelection& batch);

class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, b1_, b2_, eps_;
  double b1_pow_ = 1.0, b2_pow_ = 1.0;
  Eigen::VectorXd m_, v_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  BarrierNet net;
  std::vector<LossReport> history;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const LossReport&)>;

/// Mini-batch Adam training. One epoch is a shuffled pass over the interior
/// points in batches of cfg.batch_size; each step pairs the interior batch
/// with equally sized random draws from the boundary, safe and unsafe banks.
/// Deterministic for a fixed cfg.seed.
TrainResult train(const ControlAffineSystem& sys, const ReferenceController& ref, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

std::vector<int> layer_dims_for(const ControlAffineSystem& sys, const TrainConfig& cfg);

}  // namespace zcbf

#endif  // ZCBF_ZUBOV_HPP
