// Copyright 2026 The fsdbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "fsd/numerics/tensor.hpp"
#include "fsd/rng.hpp"

namespace fsd::testing {

inline std::vector<double> normal_values(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, sd);
  return v;
}

inline num::Tensor randn(num::Shape shape, std::uint64_t seed, bool requires_grad = false,
                         double sd = 1.0) {
  const std::size_t n = num::shape_size(shape);
  return num::Tensor::from(std::move(shape), normal_values(n, seed, sd), requires_grad);
}

// Random n x n orthogonal matrix from the QR factor of a Gaussian matrix.
inline num::Tensor random_orthogonal(std::size_t n, std::uint64_t seed) {
  std::vector<double> g = normal_values(n * n, seed);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      g.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(m)};
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> q = qr.householderQ();
  return num::Tensor::from({n, n}, std::vector<double>(q.data(), q.data() + n * n));
}

// Uniform [-1, 1) entries.
inline num::Tensor randu(num::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::vector<double> v(num::shape_size(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return num::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// HSIC by explicit double sums over centered Gram entries.
inline double hsic_double_sum(const std::vector<std::vector<double>>& e1,
                              const std::vector<std::vector<double>>& e2) {
  const std::size_t n = e1.size();
  auto kernel = [n](const std::vector<std::vector<double>>& e) {
    std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t f = 0; f < e[i].size(); ++f) k[i][j] += e[i][f] * e[j][f];
    std::vector<double> row(n, 0.0), col(n, 0.0);
    double all = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        row[i] += k[i][j] / n;
        col[j] += k[i][j] / n;
        all += k[i][j] / (n * n);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k[i][j] = k[i][j] - row[i] - col[j] + all;
    return k;
  };
  auto kc = kernel(e1), lc = kernel(e2);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += kc[i][j] * lc[j][i];
  return s / static_cast<double>((n - 1) * (n - 1));
}

inline std::vector<std::vector<double>> rows_of(const num::Tensor& t) {
  const std::size_t n = t.dim(0), f = t.size() / n;
  std::vector<std::vector<double>> out(n, std::vector<double>(f));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out[i][j] = t.at(i * f + j);
  return out;
}

inline double cka_double_sum(const num::Tensor& a, const num::Tensor& b) {
  auto ra = rows_of(a), rb = rows_of(b);
  return hsic_double_sum(ra, rb) / std::sqrt(hsic_double_sum(ra, ra) * hsic_double_sum(rb, rb));
}

}  // namespace fsd::testing
