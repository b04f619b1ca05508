#include "spt/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "spt/error.hpp"

namespace spt::ops {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::atomic<bool> g_softmax_fault{false};

const NodePtr& node_of(const Tensor& t) {
  if (!t.defined()) throw ContractError("operation on an undefined tensor");
  return t.node();
}

// Builds the output tensor and, when recording is on and any input needs a
// gradient, wires it into the tape.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   std::string_view op, std::function<void(Node&)> backward) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  out->op = op;
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const Tensor* in : inputs) needs = needs || node_of(*in)->requires_grad;
  }
  if (needs) {
    out->requires_grad = true;
    out->is_leaf = false;
    for (const Tensor* in : inputs) out->inputs.push_back(node_of(*in));
    out->backward = std::move(backward);
  }
  return Tensor(std::move(out));
}

Tensor make_result_n(Shape shape, std::vector<double> data, std::span<const Tensor> inputs,
                     std::string_view op, std::function<void(Node&)> backward) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  out->op = op;
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const auto& in : inputs) needs = needs || node_of(in)->requires_grad;
  }
  if (needs) {
    out->requires_grad = true;
    out->is_leaf = false;
    for (const auto& in : inputs) out->inputs.push_back(node_of(in));
    out->backward = std::move(backward);
  }
  return Tensor(std::move(out));
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

void require_rank(const Tensor& t, std::size_t rank, std::string_view op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, std::string_view op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  return make_result({m, n}, std::move(out), {&a, &b}, "matmul", [m, k, n](Node& self) {
    const auto& g = self.grad;
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bn.data[p * n + j];
          an.grad[i * k + p] += acc;
        }
    }
    if (bn.requires_grad) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = an.data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) bn.grad[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner dimensions disagree for " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()) + "^T");
  }
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
      out[i * n + j] = acc;
    }
  return make_result({m, n}, std::move(out), {&a, &b}, "matmul_nt", [m, k, n](Node& self) {
    const auto& g = self.grad;
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double gv = g[i * n + j];
        if (gv == 0.0) continue;
        if (an.requires_grad)
          for (std::size_t p = 0; p < k; ++p) an.grad[i * k + p] += gv * bn.data[j * k + p];
        if (bn.requires_grad)
          for (std::size_t p = 0; p < k; ++p) bn.grad[j * k + p] += gv * an.data[i * k + p];
      }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, "add", [](Node& self) {
    for (std::size_t in = 0; in < 2; ++in) {
      if (!wants(self, in)) continue;
      auto& g = self.inputs[in]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, "sub", [](Node& self) {
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, "mul", [](Node& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad)
      for (std::size_t i = 0; i < an.grad.size(); ++i) an.grad[i] += self.grad[i] * bn.data[i];
    if (bn.requires_grad)
      for (std::size_t i = 0; i < bn.grad.size(); ++i) bn.grad[i] += self.grad[i] * an.data[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * factor;
  return make_result(a.shape(), std::move(out), {&a}, "scale", [factor](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor square(const Tensor& a) {
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * A[i];
  return make_result(a.shape(), std::move(out), {&a}, "square", [](Node& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += 2.0 * in.data[i] * self.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  auto A = a.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(A[i]);
  return make_result(a.shape(), std::move(out), {&a}, "exp", [](Node& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += self.data[i] * self.grad[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.dim(0) != n) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not fit " +
                         shape_to_string(x.shape()));
  }
  auto X = x.data();
  auto B = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = X[i * n + j] + B[j];
  return make_result({m, n}, std::move(out), {&x, &bias}, "add_bias", [m, n](Node& self) {
    if (wants(self, 0)) {
      auto& g = self.inputs[0]->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = self.inputs[1]->grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor gelu(const Tensor& x) {
  auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * X[i] * (1.0 + std::erf(X[i] / std::numbers::sqrt2));
  return make_result(x.shape(), std::move(out), {&x}, "gelu", [](Node& self) {
    auto& in = *self.inputs[0];
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < in.grad.size(); ++i) {
      const double v = in.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      in.grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result({}, {acc}, {&a}, "sum", [](Node& self) {
    auto& g = self.inputs[0]->grad;
    const double gv = self.grad[0];
    for (auto& v : g) v += gv;
  });
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  const auto split = split_at(a.shape(), axis, "sum_axis");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto A = a.data();
  std::vector<double> out(split.outer * split.inner, 0.0);
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t l = 0; l < split.len; ++l)
      for (std::size_t in = 0; in < split.inner; ++in)
        out[o * split.inner + in] += A[(o * split.len + l) * split.inner + in];
  return make_result(std::move(out_shape), std::move(out), {&a}, "sum_axis", [split](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t l = 0; l < split.len; ++l)
        for (std::size_t in = 0; in < split.inner; ++in)
          g[(o * split.len + l) * split.inner + in] += self.grad[o * split.inner + in];
  });
}

Tensor add_n(std::span<const Tensor> scalars) {
  double acc = 0.0;
  for (const auto& s : scalars) {
    if (s.numel() != 1) throw DimensionError("add_n: non-scalar input " + shape_to_string(s.shape()));
    acc += s.data()[0];
  }
  return make_result_n({}, {acc}, scalars, "add_n", [](Node& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->grad[0] += self.grad[0];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto split = split_at(x.shape(), axis, "softmax");
  auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t in = 0; in < split.inner; ++in) {
      auto idx = [&](std::size_t l) { return (o * split.len + l) * split.inner + in; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < split.len; ++l) mx = std::max(mx, X[idx(l)]);
      double total = 0.0;
      for (std::size_t l = 0; l < split.len; ++l) {
        out[idx(l)] = std::exp(X[idx(l)] - mx);
        total += out[idx(l)];
      }
      for (std::size_t l = 0; l < split.len; ++l) out[idx(l)] /= total;
    }
  return make_result(x.shape(), std::move(out), {&x}, "softmax", [split](Node& self) {
    auto& g = self.inputs[0]->grad;
    const double sign = testing::softmax_gradient_fault() ? -1.0 : 1.0;
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t in = 0; in < split.inner; ++in) {
        auto idx = [&](std::size_t l) { return (o * split.len + l) * split.inner + in; };
        double dot = 0.0;
        for (std::size_t l = 0; l < split.len; ++l) dot += self.grad[idx(l)] * self.data[idx(l)];
        for (std::size_t l = 0; l < split.len; ++l)
          g[idx(l)] += sign * self.data[idx(l)] * (self.grad[idx(l)] - dot);
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const auto split = split_at(x.shape(), axis, "log_softmax");
  auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t o = 0; o < split.outer; ++o)
    for (std::size_t in = 0; in < split.inner; ++in) {
      auto idx = [&](std::size_t l) { return (o * split.len + l) * split.inner + in; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < split.len; ++l) mx = std::max(mx, X[idx(l)]);
      double total = 0.0;
      for (std::size_t l = 0; l < split.len; ++l) total += std::exp(X[idx(l)] - mx);
      const double log_z = mx + std::log(total);
      for (std::size_t l = 0; l < split.len; ++l) out[idx(l)] = X[idx(l)] - log_z;
    }
  return make_result(x.shape(), std::move(out), {&x}, "log_softmax", [split](Node& self) {
    auto& g = self.inputs[0]->grad;
    const double sign = testing::softmax_gradient_fault() ? -1.0 : 1.0;
    for (std::size_t o = 0; o < split.outer; ++o)
      for (std::size_t in = 0; in < split.inner; ++in) {
        auto idx = [&](std::size_t l) { return (o * split.len + l) * split.inner + in; };
        double total = 0.0;
        for (std::size_t l = 0; l < split.len; ++l) total += self.grad[idx(l)];
        for (std::size_t l = 0; l < split.len; ++l)
          g[idx(l)] += sign * (self.grad[idx(l)] - std::exp(self.data[idx(l)]) * total);
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n}) {
    throw DimensionError("layer_norm: gain " + shape_to_string(gain.shape()) + " / bias " +
                         shape_to_string(bias.shape()) + " do not fit " + shape_to_string(x.shape()));
  }
  auto X = x.data();
  auto G = gain.data();
  auto B = bias.data();
  std::vector<double> out(m * n);
  // Saved normalized values and inverse deviations for the backward rule.
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += X[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = X[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (X[i * n + j] - mean) * inv;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = h * G[j] + B[j];
    }
  }
  return make_result({m, n}, std::move(out), {&x, &gain, &bias}, "layer_norm",
                     [m, n, xhat, inv_std](Node& self) {
                       auto& xn = *self.inputs[0];
                       auto& gn = *self.inputs[1];
                       auto& bn = *self.inputs[2];
                       const auto& H = *xhat;
                       for (std::size_t i = 0; i < m; ++i) {
                         double sum_d = 0.0, sum_dh = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           const double gv = self.grad[i * n + j];
                           if (gn.requires_grad) gn.grad[j] += gv * H[i * n + j];
                           if (bn.requires_grad) bn.grad[j] += gv;
                           const double d = gv * gn.data[j];
                           sum_d += d;
                           sum_dh += d * H[i * n + j];
                         }
                         if (!xn.requires_grad) continue;
                         const double inv = (*inv_std)[i];
                         const double nn = static_cast<double>(n);
                         for (std::size_t j = 0; j < n; ++j) {
                           const double d = self.grad[i * n + j] * gn.data[j];
                           xn.grad[i * n + j] += inv / nn * (nn * d - sum_d - H[i * n + j] * sum_dh);
                         }
                       }
                     });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  for (auto id : ids) {
    if (id >= vocab) {
      throw InputError("embedding: id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
  }
  auto T = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(T.begin() + ids[r] * d, d, out.begin() + r * d);
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return make_result({ids.size(), d}, std::move(out), {&table}, "embedding",
                     [d, saved = std::move(saved)](Node& self) {
                       auto& g = self.inputs[0]->grad;
                       for (std::size_t r = 0; r < saved.size(); ++r)
                         for (std::size_t j = 0; j < d; ++j) g[saved[r] * d + j] += self.grad[r * d + j];
                     });
}

Tensor first_rows(const Tensor& x, std::size_t count) {
  if (x.rank() < 1 || count > x.dim(0)) {
    throw DimensionError("first_rows: cannot take " + std::to_string(count) + " rows of " +
                         shape_to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[0] = count;
  const std::size_t n = shape_numel(out_shape);
  auto X = x.data();
  std::vector<double> out(X.begin(), X.begin() + static_cast<std::ptrdiff_t>(n));
  return make_result(std::move(out_shape), std::move(out), {&x}, "first_rows", [n](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (start + count > n) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + "," + std::to_string(start + count) +
                         ") exceed " + shape_to_string(x.shape()));
  }
  auto X = x.data();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = X[i * n + start + j];
  return make_result({m, count}, std::move(out), {&x}, "slice_cols", [m, n, start, count](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * n + start + j] += self.grad[i * count + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto P = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = P[i * widths[k] + j];
    offset += widths[k];
  }
  return make_result_n({m, total}, std::move(out), parts, "concat_cols", [m, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      auto& in = *self.inputs[k];
      if (in.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) in.grad[i * widths[k] + j] += self.grad[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  const Shape inner = parts.front().shape();
  for (const auto& p : parts) require_same_shape(parts.front(), p, "stack");
  const std::size_t block = shape_numel(inner);
  std::vector<double> out;
  out.reserve(block * parts.size());
  for (const auto& p : parts) {
    auto d = p.data();
    out.insert(out.end(), d.begin(), d.end());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return make_result_n(std::move(shape), std::move(out), parts, "stack", [block](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      for (std::size_t i = 0; i < block; ++i) in.grad[i] += self.grad[k * block + i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  auto X = x.data();
  return make_result(std::move(shape), {X.begin(), X.end()}, {&x}, "reshape", [](Node& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor cross_entropy_row(const Tensor& log_probs, const Tensor& target_row) {
  require_rank(log_probs, 1, "cross_entropy_row");
  require_rank(target_row, 1, "cross_entropy_row");
  if (log_probs.dim(0) != target_row.dim(0)) {
    throw DimensionError("cross_entropy_row: length mismatch " + shape_to_string(log_probs.shape()) + " vs " +
                         shape_to_string(target_row.shape()));
  }
  auto L = log_probs.data();
  auto T = target_row.data();
  double loss = 0.0;
  for (std::size_t e = 0; e < L.size(); ++e)
    if (T[e] != 0.0) loss -= T[e] * L[e];
  return make_result({}, {loss}, {&log_probs, &target_row}, "cross_entropy_row", [](Node& self) {
    auto& ln = *self.inputs[0];
    auto& tn = *self.inputs[1];
    const double gv = self.grad[0];
    if (ln.requires_grad)
      for (std::size_t e = 0; e < ln.grad.size(); ++e)
        if (tn.data[e] != 0.0) ln.grad[e] -= gv * tn.data[e];
    if (tn.requires_grad)
      for (std::size_t e = 0; e < tn.grad.size(); ++e) tn.grad[e] -= gv * ln.data[e];
  });
}

Tensor weighted_cross_entropy(const Tensor& log_probs, std::span<const double> targets,
                              std::span<const double> weights, double divisor) {
  require_rank(log_probs, 2, "weighted_cross_entropy");
  const std::size_t n = log_probs.dim(0), c = log_probs.dim(1);
  if (targets.size() != n * c || weights.size() != n) {
    throw DimensionError("weighted_cross_entropy: targets/weights do not fit " +
                         shape_to_string(log_probs.shape()));
  }
  if (!(divisor > 0.0)) throw ContractError("weighted_cross_entropy: divisor must be positive");
  auto L = log_probs.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t e = 0; e < c; ++e)
      if (targets[i * c + e] != 0.0) row -= targets[i * c + e] * L[i * c + e];
    loss += weights[i] * row;
  }
  loss /= divisor;
  std::vector<double> coeff(n * c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = 0; e < c; ++e) coeff[i * c + e] = -weights[i] * targets[i * c + e] / divisor;
  return make_result({}, {loss}, {&log_probs}, "weighted_cross_entropy", [coeff = std::move(coeff)](Node& self) {
    auto& g = self.inputs[0]->grad;
    const double gv = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i)
      if (coeff[i] != 0.0) g[i] += gv * coeff[i];
  });
}

Tensor nll_at(const Tensor& log_probs, std::size_t row, std::size_t col) {
  require_rank(log_probs, 2, "nll_at");
  const std::size_t c = log_probs.dim(1);
  if (row >= log_probs.dim(0) || col >= c) {
    throw DimensionError("nll_at: index (" + std::to_string(row) + "," + std::to_string(col) + ") outside " +
                         shape_to_string(log_probs.shape()));
  }
  const std::size_t idx = row * c + col;
  return make_result({}, {-log_probs.data()[idx]}, {&log_probs}, "nll_at",
                     [idx](Node& self) { self.inputs[0]->grad[idx] -= self.grad[0]; });
}

}  // namespace spt::ops

namespace spt::testing {

void set_softmax_gradient_fault(bool enabled) { spt::ops::g_softmax_fault.store(enabled); }
bool softmax_gradient_fault() { return spt::ops::g_softmax_fault.load(); }

}  // namespace spt::testing
