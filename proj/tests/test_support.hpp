// Shared helpers and independent oracles for the test suites. Everything
// here is deliberately written without the library's linear-algebra or
// network code paths so it can serve as a second, independent route.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cocoa/dataset.hpp"
#include "cocoa/neuralnet.hpp"

namespace testsup {

// Dense solve by Gaussian elimination with partial pivoting. Plain loops,
// no Eigen.
inline std::vector<double> gaussian_solve(std::vector<std::vector<double>> a,
                                          std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0)
      throw std::runtime_error("gaussian_solve: singular matrix");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// Naive re-implementation of the dense forward pass: nested loops over the
// layer weights pulled out of the network.
inline std::vector<double> naive_forward(const cocoa::Mlp& net,
                                         const std::vector<double>& input) {
  std::vector<double> a = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weight(l);
    const auto& bias = net.bias(l);
    std::vector<double> z(static_cast<std::size_t>(w.rows()), 0.0);
    for (std::size_t r = 0; r < z.size(); ++r) {
      double s = bias(static_cast<Eigen::Index>(r));
      for (std::size_t c = 0; c < a.size(); ++c)
        s += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) *
             a[c];
      z[r] = s;
    }
    const bool last = l + 1 == net.layer_count();
    for (double& v : z) {
      if (last) {
        if (net.spec().output_activation == cocoa::OutputActivation::sigmoid)
          v = 1.0 / (1.0 + std::exp(-v));
      } else if (net.spec().activation == cocoa::Activation::relu) {
        v = v > 0.0 ? v : 0.0;
      } else {
        v = std::tanh(v);
      }
    }
    a = std::move(z);
  }
  return a;
}

// Central finite-difference gradient of the batch loss with respect to
// every parameter.
inline std::vector<double> fd_gradient(const cocoa::Mlp& net,
                                       const Eigen::MatrixXd& inputs,
                                       const Eigen::MatrixXd& targets,
                                       cocoa::LossKind loss, double h = 1e-5) {
  cocoa::Mlp probe = net;
  std::vector<double> params = net.parameters();
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    probe.set_parameters(params);
    const double up = cocoa::loss_value(probe, inputs, targets, loss);
    params[k] = saved - h;
    probe.set_parameters(params);
    const double down = cocoa::loss_value(probe, inputs, targets, loss);
    params[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  probe.set_parameters(params);
  return grad;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline std::string temp_path(const std::string& name) {
  return std::string("cocoa_test_") + name;
}

}  // namespace testsup
