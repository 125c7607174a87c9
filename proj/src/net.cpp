#include "zcbf/net.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace zcbf {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
  }
  return "unknown";
}

std::size_t BarrierNet::param_count(const std::vector<int>& dims) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    count += static_cast<std::size_t>(dims[i]) * dims[i + 1] + dims[i + 1];
  }
  return count;
}

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 3) {
    throw std::invalid_argument("barrier net: need input, at least one hidden layer, and output");
  }
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("barrier net: layer widths must be positive");
  }
  if (dims.back() != 1) throw std::invalid_argument("barrier net: output width must be 1");
}

}  // namespace

BarrierNet::BarrierNet(std::vector<int> layer_dims, Eigen::VectorXd theta)
    : dims_(std::move(layer_dims)), theta_(std::move(theta)) {
  check_dims(dims_);
  if (static_cast<std::size_t>(theta_.size()) != param_count(dims_)) {
    throw std::invalid_argument("barrier net: parameter vector length does not match layer dims");
  }
  offsets_.resize(dims_.size() - 1);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_[l] = off;
    off += static_cast<Eigen::Index>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
  }
}

BarrierNet BarrierNet::init(std::vector<int> layer_dims, std::uint64_t seed) {
  check_dims(layer_dims);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(layer_dims)));
  std::mt19937_64 rng(seed);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    for (int k = 0; k < fan_in * fan_out; ++k) theta[off + k] = normal(rng);
    off += static_cast<Eigen::Index>(fan_in) * fan_out + fan_out;
  }
  return BarrierNet(std::move(layer_dims), std::move(theta));
}

void BarrierNet::set_theta(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) throw std::invalid_argument("barrier net: theta size mismatch");
  theta_ = theta;
}

Eigen::Map<const BarrierNet::RowMatrix> BarrierNet::weight(int layer) const {
  return {theta_.data() + offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<const Eigen::VectorXd> BarrierNet::bias(int layer) const {
  return {theta_.data() + bias_offset(layer), dims_[layer + 1]};
}

void BarrierNet::check_input(const StateVector& x) const {
  if (x.size() != dims_.front()) {
    std::ostringstream os;
    os << "barrier net: input has dimension " << x.size() << ", expected " << dims_.front();
    throw std::invalid_argument(os.str());
  }
}

double BarrierNet::forward(const StateVector& x) const {
  check_input(x);
  Eigen::VectorXd a = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::VectorXd z = weight(l) * a + bias(l);
    a = z.array().tanh().matrix();
  }
  return a[0];
}

DualEval BarrierNet::forward_with_input_grad(const StateVector& x) const {
  check_input(x);
  Eigen::VectorXd a = x;
  Eigen::MatrixXd tangent = Eigen::MatrixXd::Identity(input_dim(), input_dim());
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::VectorXd z = weight(l) * a + bias(l);
    a = z.array().tanh().matrix();
    Eigen::MatrixXd pre = weight(l) * tangent;
    tangent = (1.0 - a.array().square()).matrix().asDiagonal() * pre;
  }
  return {a[0], tangent.row(0).transpose()};
}

NetWorkspace::NetWorkspace(const BarrierNet& net) {
  const auto& dims = net.layer_dims();
  const int n = dims.front();
  act_.resize(dims.size());
  tangent_.resize(dims.size());
  pre_tangent_.resize(dims.size() - 1);
  for (std::size_t l = 0; l < dims.size(); ++l) {
    act_[l].resize(dims[l]);
    tangent_[l].resize(dims[l], n);
  }
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) pre_tangent_[l].resize(dims[l + 1], n);
  tangent_[0].setIdentity();
  eval_.input_grad.resize(n);
}

double accumulate_sample_gradient(const BarrierNet& net, const StateVector& x,
                                  const std::function<SampleLoss(const DualEval&)>& loss,
                                  double weight, bool uses_input_grad,
                                  Eigen::Ref<Eigen::VectorXd> grad, NetWorkspace& ws) {
  using RowMatrix = BarrierNet::RowMatrix;
  const int layers = net.num_layers();
  if (x.size() != net.input_dim()) throw std::invalid_argument("barrier net: input dimension mismatch");

  // Extended forward: activations and their input tangents d a_l / dx.
  ws.act_[0] = x;
  for (int l = 0; l < layers; ++l) {
    const auto W = net.weight(l);
    ws.act_[l + 1].noalias() = W * ws.act_[l];
    ws.act_[l + 1] += net.bias(l);
    ws.act_[l + 1] = ws.act_[l + 1].array().tanh().matrix();
    if (uses_input_grad) {
      ws.pre_tangent_[l].noalias() = W * ws.tangent_[l];
      ws.tangent_[l + 1].noalias() =
          (1.0 - ws.act_[l + 1].array().square()).matrix().asDiagonal() * ws.pre_tangent_[l];
    }
  }

  ws.eval_.value = ws.act_[layers][0];
  if (uses_input_grad) {
    ws.eval_.input_grad = ws.tangent_[layers].row(0).transpose();
  } else {
    ws.eval_.input_grad.resize(0);
  }
  const SampleLoss sl = loss(ws.eval_);

  // Adjoint of the extended forward.
  const bool through_tangent = uses_input_grad && sl.d_grad.size() > 0;
  ws.act_bar_.resize(1);
  ws.act_bar_[0] = weight * sl.d_value;
  if (through_tangent) ws.tangent_bar_ = weight * sl.d_grad.transpose();

  for (int l = layers - 1; l >= 0; --l) {
    const auto& a = ws.act_[l + 1];
    // tmp = tanh'(z) = 1 - a^2 ; tanh''(z) = -2 a (1 - a^2)
    ws.tmp_ = (1.0 - a.array().square()).matrix();
    ws.z_bar_ = ws.act_bar_.cwiseProduct(ws.tmp_);
    if (through_tangent) {
      const Eigen::VectorXd mixed = ws.tangent_bar_.cwiseProduct(ws.pre_tangent_[l]).rowwise().sum();
      ws.z_bar_.array() -= 2.0 * a.array() * ws.tmp_.array() * mixed.array();
      ws.pre_tangent_bar_.noalias() = ws.tmp_.asDiagonal() * ws.tangent_bar_;
    }

    const int out = net.layer_dims()[l + 1];
    const int in = net.layer_dims()[l];
    Eigen::Map<RowMatrix> W_bar(grad.data() + net.weight_offset(l), out, in);
    W_bar.noalias() += ws.z_bar_ * ws.act_[l].transpose();
    if (through_tangent) W_bar.noalias() += ws.pre_tangent_bar_ * ws.tangent_[l].transpose();
    grad.segment(net.bias_offset(l), out) += ws.z_bar_;

    if (l > 0) {
      const auto W = net.weight(l);
      ws.act_bar_.noalias() = W.transpose() * ws.z_bar_;
      if (through_tangent) ws.tangent_bar_.noalias() = W.transpose() * ws.pre_tangent_bar_;
    }
  }
  return sl.value;
}

LossGradient loss_param_grad(const BarrierNet& net, std::span<const LossTerm> terms) {
  LossGradient out;
  out.grad = Eigen::VectorXd::Zero(net.num_params());
  NetWorkspace ws(net);
  for (const auto& term : terms) {
    if (term.points == nullptr || !term.loss) {
      throw std::invalid_argument("loss term: missing sample points or loss callback");
    }
    if (term.batch.empty()) throw std::invalid_argument("loss term: empty batch");
    const double per_sample = term.weight / static_cast<double>(term.batch.size());
    double sum = 0.0;
    for (Eigen::Index idx : term.batch) {
      const auto wrapped = [&](const DualEval& e) { return term.loss(idx, e); };
      sum += accumulate_sample_gradient(net, term.points->col(idx), wrapped, per_sample,
                                        term.uses_input_grad, out.grad, ws);
    }
    const double mean = sum / static_cast<double>(term.batch.size());
    out.term_means.push_back(mean);
    out.total += term.weight * mean;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr std::array<char, 8> kMagic = {'Z', 'C', 'B', 'F', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const BarrierNet& net, double alpha) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kFormatVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.layer_dims().size()));
  for (int d : net.layer_dims()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.hidden_activation()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.output_activation()));
  put_le<double>(os, alpha);
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(net.num_params()));
  for (Eigen::Index i = 0; i < net.num_params(); ++i) put_le<double>(os, net.theta()[i]);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = get_le<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto ndims = get_le<std::uint32_t>(is);
  if (ndims < 3 || ndims > 64) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<int> dims(ndims);
  for (auto& d : dims) d = static_cast<int>(get_le<std::uint32_t>(is));
  const auto hidden = get_le<std::uint32_t>(is);
  const auto output = get_le<std::uint32_t>(is);
  if (hidden != static_cast<std::uint32_t>(Activation::Tanh) ||
      output != static_cast<std::uint32_t>(Activation::Tanh)) {
    throw std::runtime_error("checkpoint: unknown activation id");
  }
  const double alpha = get_le<double>(is);
  const auto count = get_le<std::uint64_t>(is);
  if (count != BarrierNet::param_count(dims)) {
    throw std::runtime_error("checkpoint: parameter count does not match layer dims");
  }
  Eigen::VectorXd theta(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = get_le<double>(is);
  return {BarrierNet(std::move(dims), std::move(theta)), alpha};
}

void export_text(const std::filesystem::path& path, const BarrierNet& net, double alpha) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("text export: cannot open " + path.string());
  char buf[64];
  os << "zcbf-net " << kFormatVersion << '\n';
  os << "dims";
  for (int d : net.layer_dims()) os << ' ' << d;
  os << '\n';
  os << "hidden_activation " << activation_name(net.hidden_activation()) << '\n';
  os << "output_activation " << activation_name(net.output_activation()) << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", alpha);
  os << "alpha " << buf << '\n';
  os << "theta " << net.num_params() << '\n';
  for (Eigen::Index i = 0; i < net.num_params(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", net.theta()[i]);
    os << buf << '\n';
  }
}

Checkpoint import_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("text import: cannot open " + path.string());
  std::string key;
  std::uint32_t version = 0;
  is >> key >> version;
  if (key != "zcbf-net" || version != kFormatVersion) {
    throw std::runtime_error("text import: bad header in " + path.string());
  }
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  std::istringstream dims_line(line);
  dims_line >> key;
  if (key != "dims") throw std::runtime_error("text import: expected dims line");
  std::vector<int> dims;
  for (int d; dims_line >> d;) dims.push_back(d);
  std::string act;
  is >> key >> act;
  if (key != "hidden_activation" || act != "tanh") throw std::runtime_error("text import: bad hidden activation");
  is >> key >> act;
  if (key != "output_activation" || act != "tanh") throw std::runtime_error("text import: bad output activation");
  double alpha = 0.0;
  std::string alpha_text;
  is >> key >> alpha_text;
  if (key != "alpha") throw std::runtime_error("text import: expected alpha");
  alpha = std::strtod(alpha_text.c_str(), nullptr);
  Eigen::Index count = 0;
  is >> key >> count;
  if (key != "theta") throw std::runtime_error("text import: expected theta");
  Eigen::VectorXd theta(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    std::string v;
    if (!(is >> v)) throw std::runtime_error("text import: truncated parameter list");
    theta[i] = std::strtod(v.c_str(), nullptr);
  }
  return {BarrierNet(std::move(dims), std::move(theta)), alpha};
}

}  // namespace zcbf
