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

#include "fsd/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "fsd/errors.hpp"

namespace fsd::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

Tensor binary(const char* name, const Tensor& a, const Tensor& b, BinOp op) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  Shape shape;
  if (a.shape() == b.shape()) {
    shape = a.shape();
  } else if (nb == 1) {
    shape = a.shape();
  } else if (na == 1) {
    shape = b.shape();
  } else {
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const std::size_t n = shape_size(shape);
  const std::size_t sa = na == 1 ? 0 : 1;
  const std::size_t sb = nb == 1 ? 0 : 1;
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i * sa];
    const double y = bv[i * sb];
    switch (op) {
      case BinOp::kAdd: out[i] = x + y; break;
      case BinOp::kSub: out[i] = x - y; break;
      case BinOp::kMul: out[i] = x * y; break;
      case BinOp::kDiv:
        if (y == 0.0) throw DomainError("div: division by zero");
        out[i] = x / y;
        break;
    }
  }
  return make_result(name, std::move(shape), std::move(out), {a, b}, [n, sa, sb, op](Node& self) {
    const auto& g = self.grad;
    const auto& x = parent_value(self, 0);
    const auto& y = parent_value(self, 1);
    double* ga = parent_grad(self, 0);
    double* gb = parent_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i * sa];
      const double yi = y[i * sb];
      switch (op) {
        case BinOp::kAdd:
          if (ga) ga[i * sa] += g[i];
          if (gb) gb[i * sb] += g[i];
          break;
        case BinOp::kSub:
          if (ga) ga[i * sa] += g[i];
          if (gb) gb[i * sb] -= g[i];
          break;
        case BinOp::kMul:
          if (ga) ga[i * sa] += g[i] * yi;
          if (gb) gb[i * sb] += g[i] * xi;
          break;
        case BinOp::kDiv:
          if (ga) ga[i * sa] += g[i] / yi;
          if (gb) gb[i * sb] -= g[i] * xi / (yi * yi);
          break;
      }
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  const auto im = static_cast<Eigen::Index>(m), ik = static_cast<Eigen::Index>(k),
             in = static_cast<Eigen::Index>(n);
  std::vector<double> out(m * n);
  MMap(out.data(), im, in).noalias() = CMap(a.data().data(), im, ik) * CMap(b.data().data(), ik, in);
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [im, ik, in](Node& self) {
    CMap g(self.grad.data(), im, in);
    if (double* ga = parent_grad(self, 0)) {
      MMap(ga, im, ik).noalias() += g * CMap(parent_value(self, 1).data(), ik, in).transpose();
    }
    if (double* gb = parent_grad(self, 1)) {
      MMap(gb, ik, in).noalias() += CMap(parent_value(self, 0).data(), im, ik).transpose() * g;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", a, b, BinOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", a, b, BinOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", a, b, BinOp::kMul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary("div", a, b, BinOp::kDiv); }

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= c;
  return make_result("scale", a.shape(), std::move(out), {a}, [c](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += c * self.grad[i];
    }
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v += c;
  return make_result("add_scalar", a.shape(), std::move(out), {a}, [](Node& self) {
    accumulate(self, 0, self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor trace(const Tensor& a) {
  require_rank("trace", a, 2);
  const std::size_t n = a.dim(0);
  if (a.dim(1) != n) throw ShapeError("trace: matrix is not square " + shape_string(a.shape()));
  auto av = a.data();
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) t += av[i * n + i];
  return make_result("trace", {1}, {t}, {a}, [n](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) ga[i * n + i] += self.grad[0];
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {1}, {s}, {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("mean", {1}, {s * inv}, {a}, [inv](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0] * inv;
    }
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(av[i] > 0.0)) throw DomainError("log: input must be strictly positive");
    out[i] = std::log(av[i]);
  }
  return make_result("log", a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const auto& x = parent_value(self, 0);
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += self.grad[i] / x[i];
    }
  });
}

Tensor sqrt(const Tensor& a) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (av[i] < 0.0) throw DomainError("sqrt: input must be nonnegative");
    out[i] = std::sqrt(av[i]);
  }
  return make_result("sqrt", a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.value.size(); ++i) {
        if (self.value[i] > 0.0) ga[i] += self.grad[i] * 0.5 / self.value[i];
      }
    }
  });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  return make_result("exp", a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += self.grad[i] * self.value[i];
    }
  });
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * av[i];
  return make_result("square", a.shape(), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const auto& x = parent_value(self, 0);
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * x[i] * self.grad[i];
    }
  });
}

Tensor l2_norm(const Tensor& v) {
  double ss = 0.0;
  for (double x : v.data()) ss += x * x;
  const double norm = std::sqrt(ss);
  return make_result("l2_norm", {1}, {norm}, {v}, [norm](Node& self) {
    if (norm == 0.0) return;
    if (double* ga = parent_grad(self, 0)) {
      const auto& x = parent_value(self, 0);
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += self.grad[0] * x[i] / norm;
    }
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(av[i], lo, hi);
  return make_result("clamp", a.shape(), std::move(out), {a}, [lo, hi](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const auto& x = parent_value(self, 0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= lo && x[i] <= hi) ga[i] += self.grad[i];
      }
    }
  });
}

Tensor softmax_rows(const Tensor& logits, double tau) {
  require_rank("softmax_rows", logits, 2);
  if (!(tau > 0.0)) throw DomainError("softmax_rows: temperature must be positive");
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  auto x = logits.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp((row[j] - mx) / tau);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return make_result("softmax_rows", {m, n}, std::move(out), {logits}, [m, n, tau](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* g = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[j] * (g[j] - dot) / tau;
    }
  });
}

Tensor log_softmax_rows(const Tensor& logits, double tau) {
  require_rank("log_softmax_rows", logits, 2);
  if (!(tau > 0.0)) throw DomainError("log_softmax_rows: temperature must be positive");
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  auto x = logits.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp((row[j] - mx) / tau);
    const double lse = std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (row[j] - mx) / tau - lse;
  }
  return make_result("log_softmax_rows", {m, n}, std::move(out), {logits}, [m, n, tau](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = self.value.data() + i * n;
      const double* g = self.grad.data() + i * n;
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += g[j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += (g[j] - std::exp(y[j]) * gs) / tau;
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  return make_result("reshape", std::move(shape), a.to_vector(), {a}, [](Node& self) {
    accumulate(self, 0, self.grad);
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  if (a.rank() == 0 || count == 0 || begin + count > a.dim(0)) {
    throw ShapeError("slice_rows: range out of bounds for " + shape_string(a.shape()));
  }
  const std::size_t row = a.size() / a.dim(0);
  Shape shape = a.shape();
  shape[0] = count;
  auto av = a.data();
  std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin * row),
                          av.begin() + static_cast<std::ptrdiff_t>((begin + count) * row));
  const std::size_t offset = begin * row;
  return make_result("slice_rows", std::move(shape), std::move(out), {a}, [offset](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[offset + i] += self.grad[i];
    }
  });
}

Tensor stack(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw ShapeError("stack: no inputs");
  std::vector<double> out;
  out.reserve(scalars.size());
  for (const Tensor& s : scalars) out.push_back(s.item());
  return make_result("stack", {scalars.size()}, std::move(out), scalars, [](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (double* gi = parent_grad(self, i)) gi[0] += self.grad[i];
    }
  });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& bias) {
  require_rank("add_row_broadcast", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) throw ShapeError("add_row_broadcast: bias width differs from rows");
  auto xv = x.data();
  auto bv = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return make_result("add_row_broadcast", {m, n}, std::move(out), {x, bias}, [m, n](Node& self) {
    accumulate(self, 0, self.grad);
    if (double* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad[i * n + j];
    }
  });
}

Tensor mul_const(const Tensor& x, std::vector<double> factors) {
  if (factors.size() != x.size()) throw ShapeError("mul_const: factor count differs from size");
  auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factors[i];
  return make_result("mul_const", x.shape(), std::move(out), {x},
                     [f = std::move(factors)](Node& self) {
                       if (double* ga = parent_grad(self, 0)) {
                         for (std::size_t i = 0; i < f.size(); ++i) ga[i] += self.grad[i] * f[i];
                       }
                     });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank("layer_norm_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.size() != n || bias.size() != n) {
    throw ShapeError("layer_norm_rows: gain/bias width differs from rows");
  }
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  std::vector<double> out(m * n);
  // Normalized inputs and inverse deviations are kept for the backward pass.
  std::vector<double> xhat(m * n);
  std::vector<double> inv_std(m);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu *= inv_n;
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var *= inv_n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(
      "layer_norm_rows", {m, n}, std::move(out), {x, gain, bias},
      [m, n, inv_n, xh = std::move(xhat), is = std::move(inv_std)](Node& self) {
        const auto& g = self.grad;
        const auto& gv = parent_value(self, 1);
        double* gx = parent_grad(self, 0);
        double* gg = parent_grad(self, 1);
        double* gb = parent_grad(self, 2);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = g[i * n + j] * gv[j];
            mean_d += d;
            mean_dx += d * xh[i * n + j];
            if (gg) gg[j] += g[i * n + j] * xh[i * n + j];
            if (gb) gb[j] += g[i * n + j];
          }
          if (!gx) continue;
          mean_d *= inv_n;
          mean_dx *= inv_n;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = g[i * n + j] * gv[j];
            gx[i * n + j] += is[i] * (d - mean_d - xh[i * n + j] * mean_dx);
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 * 0.5));
  }
  return make_result("gelu", x.shape(), std::move(out), {x}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      const auto& v = parent_value(self, 0);
      const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(v[i] * std::numbers::sqrt2 * 0.5));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v[i] * v[i]);
        ga[i] += self.grad[i] * (cdf + v[i] * pdf);
      }
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids) {
  require_rank("gather_rows", table, 2);
  const std::size_t rows = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  auto tv = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(rows) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  return make_result("gather_rows", {ids.size(), d}, std::move(out), {table},
                     [d, idx = std::vector<std::int32_t>(ids.begin(), ids.end())](Node& self) {
                       if (double* gt = parent_grad(self, 0)) {
                         for (std::size_t i = 0; i < idx.size(); ++i) {
                           double* dst = gt + static_cast<std::size_t>(idx[i]) * d;
                           const double* src = self.grad.data() + i * d;
                           for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                         }
                       }
                     });
}

Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           std::span<const std::uint8_t> mask, std::size_t batch,
                           std::size_t seq, std::size_t heads) {
  require_rank("multihead_attention", q, 2);
  require_same_shape("multihead_attention", q, k);
  require_same_shape("multihead_attention", q, v);
  const std::size_t rows = batch * seq;
  const std::size_t d = q.dim(1);
  if (q.dim(0) != rows || mask.size() != rows) {
    throw ShapeError("multihead_attention: packed rows differ from batch*seq");
  }
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("multihead_attention: width not divisible by head count");
  }
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  auto qv = q.data();
  auto kv = k.data();
  auto vv = v.data();
  std::vector<double> out(rows * d, 0.0);
  // probs[((b * heads + h) * seq + i) * seq + j]; masked keys stay exactly 0.
  std::vector<double> probs(batch * heads * seq * seq, 0.0);
  std::vector<double> scores(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* mb = mask.data() + b * seq;
    if (std::none_of(mb, mb + seq, [](std::uint8_t m) { return m != 0; })) {
      throw ShapeError("multihead_attention: sample " + std::to_string(b) + " has no unmasked token");
    }
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < seq; ++i) {
        const double* qi = qv.data() + (b * seq + i) * d + off;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j) {
          if (!mb[j]) continue;
          const double* kj = kv.data() + (b * seq + j) * d + off;
          double s = 0.0;
          for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
          scores[j] = s * sc;
          mx = std::max(mx, scores[j]);
        }
        double* p = probs.data() + ((b * heads + h) * seq + i) * seq;
        double z = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          if (!mb[j]) continue;
          p[j] = std::exp(scores[j] - mx);
          z += p[j];
        }
        double* oi = out.data() + (b * seq + i) * d + off;
        for (std::size_t j = 0; j < seq; ++j) {
          if (!mb[j]) continue;
          p[j] /= z;
          const double* vj = vv.data() + (b * seq + j) * d + off;
          for (std::size_t t = 0; t < dh; ++t) oi[t] += p[j] * vj[t];
        }
      }
    }
  }
  return make_result(
      "multihead_attention", {rows, d}, std::move(out), {q, k, v},
      [batch, seq, heads, d, dh, sc, p_all = std::move(probs),
       m = std::vector<std::uint8_t>(mask.begin(), mask.end())](Node& self) {
        const auto& qv = parent_value(self, 0);
        const auto& kv = parent_value(self, 1);
        const auto& vv = parent_value(self, 2);
        double* gq = parent_grad(self, 0);
        double* gk = parent_grad(self, 1);
        double* gv = parent_grad(self, 2);
        const auto& go = self.grad;
        std::vector<double> dp(seq);
        for (std::size_t b = 0; b < batch; ++b) {
          const std::uint8_t* mb = m.data() + b * seq;
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < seq; ++i) {
              const double* p = p_all.data() + ((b * heads + h) * seq + i) * seq;
              const double* goi = go.data() + (b * seq + i) * d + off;
              double dot = 0.0;
              for (std::size_t j = 0; j < seq; ++j) {
                if (!mb[j]) continue;
                const double* vj = vv.data() + (b * seq + j) * d + off;
                double s = 0.0;
                for (std::size_t t = 0; t < dh; ++t) s += goi[t] * vj[t];
                dp[j] = s;
                dot += p[j] * s;
                if (gv) {
                  double* gvj = gv + (b * seq + j) * d + off;
                  for (std::size_t t = 0; t < dh; ++t) gvj[t] += p[j] * goi[t];
                }
              }
              const double* qi = qv.data() + (b * seq + i) * d + off;
              for (std::size_t j = 0; j < seq; ++j) {
                if (!mb[j]) continue;
                const double ds = p[j] * (dp[j] - dot) * sc;
                const double* kj = kv.data() + (b * seq + j) * d + off;
                if (gq) {
                  double* gqi = gq + (b * seq + i) * d + off;
                  for (std::size_t t = 0; t < dh; ++t) gqi[t] += ds * kj[t];
                }
                if (gk) {
                  double* gkj = gk + (b * seq + j) * d + off;
                  for (std::size_t t = 0; t < dh; ++t) gkj[t] += ds * qi[t];
                }
              }
            }
          }
        }
      });
}

Tensor zero_masked_rows(const Tensor& x, std::span<const std::uint8_t> mask) {
  require_rank("zero_masked_rows", x, 2);
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (mask.size() != rows) throw ShapeError("zero_masked_rows: mask length differs from rows");
  std::vector<double> out = x.to_vector();
  for (std::size_t i = 0; i < rows; ++i) {
    if (!mask[i]) std::fill_n(out.data() + i * d, d, 0.0);
  }
  return make_result("zero_masked_rows", {rows, d}, std::move(out), {x},
                     [d, m = std::vector<std::uint8_t>(mask.begin(), mask.end())](Node& self) {
                       if (double* ga = parent_grad(self, 0)) {
                         for (std::size_t i = 0; i < m.size(); ++i) {
                           if (!m[i]) continue;
                           for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += self.grad[i * d + j];
                         }
                       }
                     });
}

Tensor masked_mean_pool(const Tensor& x, std::span<const std::uint8_t> mask, std::size_t batch,
                        std::size_t seq) {
  require_rank("masked_mean_pool", x, 2);
  const std::size_t d = x.dim(1);
  if (x.dim(0) != batch * seq || mask.size() != batch * seq) {
    throw ShapeError("masked_mean_pool: packed rows differ from batch*seq");
  }
  auto xv = x.data();
  std::vector<double> out(batch * d, 0.0);
  std::vector<double> inv_count(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < seq; ++i) {
      if (!mask[b * seq + i]) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) out[b * d + j] += xv[(b * seq + i) * d + j];
    }
    if (count == 0) throw ShapeError("masked_mean_pool: sample without unmasked tokens");
    inv_count[b] = 1.0 / static_cast<double>(count);
    for (std::size_t j = 0; j < d; ++j) out[b * d + j] *= inv_count[b];
  }
  return make_result("masked_mean_pool", {batch, d}, std::move(out), {x},
                     [batch, seq, d, ic = std::move(inv_count),
                      m = std::vector<std::uint8_t>(mask.begin(), mask.end())](Node& self) {
                       double* ga = parent_grad(self, 0);
                       if (!ga) return;
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t i = 0; i < seq; ++i) {
                           if (!m[b * seq + i]) continue;
                           for (std::size_t j = 0; j < d; ++j)
                             ga[(b * seq + i) * d + j] += self.grad[b * d + j] * ic[b];
                         }
                     });
}

Tensor first_token_pool(const Tensor& x, std::size_t batch, std::size_t seq) {
  require_rank("first_token_pool", x, 2);
  const std::size_t d = x.dim(1);
  if (x.dim(0) != batch * seq) throw ShapeError("first_token_pool: packed rows differ from batch*seq");
  auto xv = x.data();
  std::vector<double> out(batch * d);
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(xv.data() + b * seq * d, d, out.data() + b * d);
  return make_result("first_token_pool", {batch, d}, std::move(out), {x}, [batch, seq, d](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < d; ++j) ga[b * seq * d + j] += self.grad[b * d + j];
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t m = logits.dim(0), n = logits.dim(1);
  if (labels.size() != m) throw ShapeError("cross_entropy: label count differs from rows");
  auto x = logits.data();
  std::vector<double> probs(m * n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n) {
      throw ShapeError("cross_entropy: label outside class range");
    }
    const double* row = x.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(row[j] - mx);
      z += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    total += (std::log(z) + mx) - row[static_cast<std::size_t>(labels[i])];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  return make_result("cross_entropy", {1}, {total * inv_m}, {logits},
                     [m, n, inv_m, p = std::move(probs),
                      y = std::vector<std::int32_t>(labels.begin(), labels.end())](Node& self) {
                       double* ga = parent_grad(self, 0);
                       if (!ga) return;
                       const double g = self.grad[0] * inv_m;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) {
                           const double target = static_cast<std::size_t>(y[i]) == j ? 1.0 : 0.0;
                           ga[i * n + j] += g * (p[i * n + j] - target);
                         }
                     });
}

Tensor pairwise_euclidean(const Tensor& a, const Tensor& b) {
  require_rank("pairwise_euclidean", a, 2);
  require_rank("pairwise_euclidean", b, 2);
  const std::size_t n = a.dim(0), m = b.dim(0), f = a.dim(1);
  if (b.dim(1) != f) throw ShapeError("pairwise_euclidean: feature widths differ");
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double ss = 0.0;
      for (std::size_t t = 0; t < f; ++t) {
        const double diff = av[i * f + t] - bv[j * f + t];
        ss += diff * diff;
      }
      out[i * m + j] = std::sqrt(ss);
    }
  return make_result("pairwise_euclidean", {n, m}, std::move(out), {a, b}, [n, m, f](Node& self) {
    const auto& av = parent_value(self, 0);
    const auto& bv = parent_value(self, 1);
    double* ga = parent_grad(self, 0);
    double* gb = parent_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double dist = self.value[i * m + j];
        if (dist == 0.0) continue;
        const double w = self.grad[i * m + j] / dist;
        for (std::size_t t = 0; t < f; ++t) {
          const double diff = av[i * f + t] - bv[j * f + t];
          if (ga) ga[i * f + t] += w * diff;
          if (gb) gb[j * f + t] -= w * diff;
        }
      }
  });
}

Tensor pairwise_cosine(const Tensor& a, const Tensor& b, double eps) {
  require_rank("pairwise_cosine", a, 2);
  require_rank("pairwise_cosine", b, 2);
  const std::size_t n = a.dim(0), m = b.dim(0), f = a.dim(1);
  if (b.dim(1) != f) throw ShapeError("pairwise_cosine: feature widths differ");
  auto av = a.data();
  auto bv = b.data();
  auto norms = [f](std::span<const double> x, std::size_t rows) {
    std::vector<double> r(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      double ss = 0.0;
      for (std::size_t t = 0; t < f; ++t) ss += x[i * f + t] * x[i * f + t];
      r[i] = std::sqrt(ss);
    }
    return r;
  };
  std::vector<double> na = norms(av, n), nb = norms(bv, m);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < f; ++t) dot += av[i * f + t] * bv[j * f + t];
      out[i * m + j] = dot / (std::max(na[i], eps) * std::max(nb[j], eps));
    }
  return make_result(
      "pairwise_cosine", {n, m}, std::move(out), {a, b},
      [n, m, f, eps, na = std::move(na), nb = std::move(nb)](Node& self) {
        const auto& av = parent_value(self, 0);
        const auto& bv = parent_value(self, 1);
        double* ga = parent_grad(self, 0);
        double* gb = parent_grad(self, 1);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            const double g = self.grad[i * m + j];
            if (g == 0.0) continue;
            const double c = self.value[i * m + j];
            const double denom = std::max(na[i], eps) * std::max(nb[j], eps);
            // Floored norms are constants, so their direction term drops out.
            const double ra = na[i] > eps ? c / (na[i] * na[i]) : 0.0;
            const double rb = nb[j] > eps ? c / (nb[j] * nb[j]) : 0.0;
            for (std::size_t t = 0; t < f; ++t) {
              const double ai = av[i * f + t], bj = bv[j * f + t];
              if (ga) ga[i * f + t] += g * (bj / denom - ra * ai);
              if (gb) gb[j * f + t] += g * (ai / denom - rb * bj);
            }
          }
      });
}

}  // namespace fsd::num
