#include "zcbf/zubov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace zcbf {

double beta(double s, double alpha) { return std::tanh(alpha * s); }

Eigen::VectorXd closed_loop_field(const ControlAffineSystem& sys, const ReferenceController& ref,
                                  const StateVector& x) {
  sys.check_state(x);
  return sys.field(x, ref.evaluate(x));
}

double phi(const ControlAffineSystem& sys, const StateVector& x) { return sys.safe.squared_distance(x); }

double zubov_residual(const DualEval& w, const Eigen::VectorXd& field, double phi_value, double alpha) {
  return w.input_grad.dot(field) + alpha * (1.0 + w.value) * (1.0 - w.value) * phi_value;
}

double residual(const BarrierNet& net, const ControlAffineSystem& sys, const ReferenceController& ref,
                double alpha, const StateVector& x) {
  return zubov_residual(net.forward_with_input_grad(x), closed_loop_field(sys, ref, x), phi(sys, x), alpha);
}

double bc_target(const ControlAffineSystem& sys, double alpha, const StateVector& y) {
  if (sys.boundary_in_safe_set && sys.boundary_in_safe_set(y)) {
    const double b0 = sys.boundary_barrier ? sys.boundary_barrier(y) : 0.0;
    return beta(b0, alpha);
  }
  return 1.0;
}

void TrainConfig::validate() const {
  auto fail = [](const char* key, const char* what) {
    throw std::invalid_argument(std::string("train.") + key + " " + what);
  };
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha", "must be positive");
  if (!(weights.residual > 0.0)) fail("weights.residual", "must be positive");
  if (!(weights.boundary > 0.0)) fail("weights.boundary", "must be positive");
  if (!(weights.safe > 0.0)) fail("weights.safe", "must be positive");
  if (!(weights.unsafe > 0.0)) fail("weights.unsafe", "must be positive");
  if (n_interior <= 0) fail("n_interior", "must be positive");
  if (n_boundary <= 0) fail("n_boundary", "must be positive");
  if (n_safe <= 0) fail("n_safe", "must be positive");
  if (n_unsafe <= 0) fail("n_unsafe", "must be positive");
  if (batch_size <= 0) fail("batch_size", "must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (max_epochs < 0) fail("max_epochs", "must be non-negative");
  if (!(loss_threshold >= 0.0)) fail("loss_threshold", "must be non-negative");
  if (hidden.empty()) fail("hidden", "needs at least one hidden layer");
  for (int h : hidden) {
    if (h <= 0) fail("hidden", "widths must be positive");
  }
}

std::vector<int> layer_dims_for(const ControlAffineSystem& sys, const TrainConfig& cfg) {
  std::vector<int> dims;
  dims.push_back(sys.n);
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);
  return dims;
}

// ---------------------------------------------------------------------------
// Sampling

Eigen::MatrixXd sample_interior(const DomainBox& box, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd pts(box.dim(), count);
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < box.dim(); ++i) {
      pts(i, j) = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    }
  }
  return pts;
}

Eigen::MatrixXd sample_boundary(const ControlAffineSystem& sys, int count, std::mt19937_64& rng) {
  std::vector<int> faces;
  for (int i = 0; i < sys.n; ++i) {
    if (sys.periodic.empty() || !sys.periodic[static_cast<std::size_t>(i)]) faces.push_back(i);
  }
  if (faces.empty()) throw std::invalid_argument("boundary sampling: every coordinate is periodic");
  Eigen::MatrixXd pts = sample_interior(sys.domain, count, rng);
  std::uniform_int_distribution<std::size_t> pick_face(0, faces.size() - 1);
  std::bernoulli_distribution upper_side(0.5);
  for (int j = 0; j < count; ++j) {
    const int c = faces[pick_face(rng)];
    pts(c, j) = upper_side(rng) ? sys.domain.upper[c] : sys.domain.lower[c];
  }
  return pts;
}

Eigen::MatrixXd sample_region(const DomainBox& box, const RegionSpec& region, int count,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd pts(box.dim(), count);
  Eigen::VectorXd x(box.dim());
  const long long max_draws = 10000LL * std::max(count, 1);
  long long draws = 0;
  for (int j = 0; j < count;) {
    if (++draws > max_draws) throw std::runtime_error("region sampling: acceptance rate too low");
    for (int i = 0; i < box.dim(); ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    if (region.contains(x)) pts.col(j++) = x;
  }
  return pts;
}

SampleBank make_sample_bank(const ControlAffineSystem& sys, const TrainConfig& cfg, std::mt19937_64& rng) {
  SampleBank bank;
  bank.interior = sample_interior(sys.domain, cfg.n_interior, rng);
  bank.boundary = sample_boundary(sys, cfg.n_boundary, rng);
  bank.boundary_target.resize(cfg.n_boundary);
  for (int j = 0; j < cfg.n_boundary; ++j) {
    bank.boundary_target[j] = bc_target(sys, cfg.alpha, bank.boundary.col(j));
  }
  bank.safe = sample_region(sys.domain, sys.safe, cfg.n_safe, rng);
  bank.unsafe = sample_region(sys.domain, sys.unsafe, cfg.n_unsafe, rng);
  return bank;
}

// ---------------------------------------------------------------------------
// Losses

ZubovProblem::ZubovProblem(const ControlAffineSystem& sys, const ReferenceController& ref,
                           const TrainConfig& cfg, SampleBank bank)
    : cfg_(cfg), bank_(std::move(bank)) {
  const Eigen::Index count = bank_.interior.cols();
  field_.resize(sys.n, count);
  phi_.resize(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const StateVector x = bank_.interior.col(j);
    field_.col(j) = closed_loop_field(sys, ref, x);
    phi_[j] = phi(sys, x);
  }
}

LossGradient ZubovProblem::evaluate(const BarrierNet& net, const BatchSelection& batch) const {
  if (batch.interior.empty()) throw std::invalid_argument("losses: empty interior batch");
  const double alpha = cfg_.alpha;

  std::vector<LossTerm> terms;
  terms.reserve(4);
  terms.push_back({&bank_.interior, batch.interior, cfg_.weights.residual, true,
                   [this, alpha](Eigen::Index i, const DualEval& e) {
                     const double p = phi_[i];
                     const double r = zubov_residual(e, field_.col(i), p, alpha);
                     SampleLoss out;
                     out.value = r * r;
                     out.d_value = 2.0 * r * (-2.0 * alpha * e.value * p);
                     out.d_grad = (2.0 * r) * field_.col(i);
                     return out;
                   }});
  if (!batch.boundary.empty()) {
    terms.push_back({&bank_.boundary, batch.boundary, cfg_.weights.boundary, false,
                     [this](Eigen::Index i, const DualEval& e) {
                       const double d = e.value - bank_.boundary_target[i];
                       return SampleLoss{d * d, 2.0 * d, {}};
                     }});
  }
  if (!batch.safe.empty()) {
    terms.push_back({&bank_.safe, batch.safe, cfg_.weights.safe, false,
                     [](Eigen::Index, const DualEval& e) {
                       return SampleLoss{e.value * e.value, 2.0 * e.value, {}};
                     }});
  }
  if (!batch.unsafe.empty()) {
    terms.push_back({&bank_.unsafe, batch.unsafe, cfg_.weights.unsafe, false,
                     [](Eigen::Index, const DualEval& e) {
                       const double d = e.value - 1.0;
                       return SampleLoss{d * d, 2.0 * d, {}};
                     }});
  }
  LossGradient lg = loss_param_grad(net, terms);

  // Re-expand term means to the fixed (r, b, safe, unsafe) order.
  std::vector<double> means(4, 0.0);
  std::size_t k = 0;
  means[0] = lg.term_means[k++];
  if (!batch.boundary.empty()) means[1] = lg.term_means[k++];
  if (!batch.safe.empty()) means[2] = lg.term_means[k++];
  if (!batch.unsafe.empty()) means[3] = lg.term_means[k++];
  lg.term_means = std::move(means);
  return lg;
}

LossReport losses(const BarrierNet& net, const ZubovProblem& problem, const BatchSelection& batch) {
  const LossGradient lg = problem.evaluate(net, batch);
  const auto& w = problem.config().weights;
  LossReport r;
  r.l_r = lg.term_means[0];
  r.l_b = lg.term_means[1];
  r.l_safe = lg.term_means[2];
  r.l_unsafe = lg.term_means[3];
  r.total = w.residual * r.l_r + w.boundary * r.l_b + w.safe * r.l_safe + w.unsafe * r.l_unsafe;
  return r;
}

// ---------------------------------------------------------------------------
// Optimiser and training loop

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  b1_pow_ *= b1_;
  b2_pow_ *= b2_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 / (1.0 - b1_pow_);
  const double c2 = 1.0 / (1.0 - b2_pow_);
  params.array() -= lr_ * (m_.array() * c1) / ((v_.array() * c2).sqrt() + eps_);
}

namespace {

void draw_indices(std::vector<Eigen::Index>& out, Eigen::Index bank_size, int batch, std::mt19937_64& rng) {
  const auto count = static_cast<std::size_t>(std::min<Eigen::Index>(batch, bank_size));
  out.resize(count);
  std::uniform_int_distribution<Eigen::Index> pick(0, bank_size - 1);
  for (auto& i : out) i = pick(rng);
}

}  // namespace

TrainResult train(const ControlAffineSystem& sys, const ReferenceController& ref, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (ref.input_dim() != sys.m) throw std::invalid_argument("train: reference controller input size mismatch");

  BarrierNet net = BarrierNet::init(layer_dims_for(sys, cfg), cfg.seed);
  TrainResult result{net, {}, false};
  if (cfg.max_epochs == 0) return result;

  std::mt19937_64 sample_rng(cfg.seed ^ 0x5a5a5a5a5a5a5a5aULL);
  std::mt19937_64 batch_rng(cfg.seed ^ 0x3c3c3c3c3c3c3c3cULL);

  const auto fresh_ref = ref.clone();
  fresh_ref->reset();
  const ZubovProblem problem(sys, *fresh_ref, cfg, make_sample_bank(sys, cfg, sample_rng));
  const SampleBank& bank = problem.bank();

  Adam adam(net.num_params(), cfg.learning_rate);
  Eigen::VectorXd theta = net.theta();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(bank.interior.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<Eigen::Index> boundary_idx, safe_idx, unsafe_idx;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto& w = cfg.weights;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), batch_rng);
    LossReport report;
    report.epoch = epoch;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      draw_indices(boundary_idx, bank.boundary.cols(), cfg.batch_size, batch_rng);
      draw_indices(safe_idx, bank.safe.cols(), cfg.batch_size, batch_rng);
      draw_indices(unsafe_idx, bank.unsafe.cols(), cfg.batch_size, batch_rng);
      const BatchSelection sel{std::span<const Eigen::Index>(order.data() + start, len), boundary_idx,
                               safe_idx, unsafe_idx};

      const LossGradient lg = problem.evaluate(net, sel);
      if (!std::isfinite(lg.total) || !lg.grad.allFinite()) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << " (loss " << lg.total << ")";
        throw TrainingDiverged(os.str());
      }
      report.l_r += lg.term_means[0];
      report.l_b += lg.term_means[1];
      report.l_safe += lg.term_means[2];
      report.l_unsafe += lg.term_means[3];
      ++steps;

      adam.step(theta, lg.grad);
      net.set_theta(theta);
    }
    report.l_r /= steps;
    report.l_b /= steps;
    report.l_safe /= steps;
    report.l_unsafe /= steps;
    report.total = w.residual * report.l_r + w.boundary * report.l_b + w.safe * report.l_safe +
                   w.unsafe * report.l_unsafe;
    result.history.push_back(report);
    if (on_epoch) on_epoch(report);
    if (report.total < cfg.loss_threshold) {
      result.early_stopped = true;
      break;
    }
  }
  result.net = net;
  return result;
}

}  // namespace zcbf
