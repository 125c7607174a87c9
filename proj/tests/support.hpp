#ifndef ZCBF_TEST_SUPPORT_HPP
#define ZCBF_TEST_SUPPORT_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "zcbf/dynamics.hpp"
#include "zcbf/net.hpp"

namespace zcbf::test {

// Random network with nonzero biases so every tanh sits off its symmetric point.
inline BarrierNet random_net(const std::vector<int>& dims, std::uint64_t seed, double bias_scale = 0.3) {
  BarrierNet net = BarrierNet::init(dims, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> nd(0.0, bias_scale);
  Eigen::VectorXd theta = net.theta();
  for (int l = 0; l < net.num_layers(); ++l) {
    for (int k = 0; k < dims[l + 1]; ++k) theta[net.bias_offset(l) + k] = nd(rng);
  }
  net.set_theta(theta);
  return net;
}

inline StateVector uniform_in(const DomainBox& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  StateVector x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
  return x;
}

inline Eigen::VectorXd gaussian(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double floor = 1e-8) {
  return (got - want).norm() / std::max(want.norm(), floor);
}

inline double rel_err(double got, double want, double floor = 1e-8) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("zcbf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace zcbf::test

#endif  // ZCBF_TEST_SUPPORT_HPP
