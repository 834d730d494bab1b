// Copyright 2026 The sentsimp Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sentsimp/tensor.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "sentsimp/error.h"

namespace sentsimp {
namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward reaches the node
  bool requires_grad = false;
  bool backward_done = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads self.grad and accumulates into the inputs' gradients.
  std::function<void(Node& self)> backward_fn;
};

struct OpAccess {
  static Node& node(const Tensor& t) {
    if (!t.node_) throw ContractError("operation on an undefined tensor");
    return *t.node_;
  }
  static const std::shared_ptr<Node>& ptr(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

}  // namespace detail

namespace {

using detail::Node;
using detail::OpAccess;

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_seq{1};

std::vector<double>& grad_of(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
}

// Builds an op output. Records the inputs only when some input needs a
// gradient and recording is enabled; the caller then sets backward_fn.
std::shared_ptr<Node> make_output(Shape shape, std::vector<double> data, const char* op,
                                  std::initializer_list<const Tensor*> inputs) {
  check_finite(data, op);
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  out->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  if (g_grad_enabled) {
    for (const Tensor* t : inputs) {
      if (OpAccess::node(*t).requires_grad) out->requires_grad = true;
    }
    if (out->requires_grad) {
      for (const Tensor* t : inputs) out->inputs.push_back(OpAccess::ptr(*t));
    }
  }
  return out;
}

// For each flat index over `out` batch dims, offsets into two broadcast
// operands (in units of whole matrices / rows).
struct BroadcastMap {
  Shape out_dims;
  std::vector<std::size_t> a_index;
  std::vector<std::size_t> b_index;
};

BroadcastMap broadcast_dims(const Shape& a, const Shape& b, const char* op,
                            const Shape& full_a, const Shape& full_b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  Shape ap(rank, 1), bp(rank, 1);
  std::copy(a.begin(), a.end(), ap.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), bp.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (ap[i] != bp[i] && ap[i] != 1 && bp[i] != 1) {
      throw ContractError(std::string(op) + ": cannot broadcast " +
                          shape_to_string(full_a) + " with " + shape_to_string(full_b));
    }
    out[i] = std::max(ap[i], bp[i]);
  }
  BroadcastMap map;
  map.out_dims = out;
  const std::size_t total = shape_numel(out);
  map.a_index.resize(total);
  map.b_index.resize(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat, ai = 0, bi = 0, astride = 1, bstride = 1;
    for (std::size_t d = rank; d-- > 0;) {
      const std::size_t coord = rem % out[d];
      rem /= out[d];
      if (ap[d] != 1) ai += coord * astride;
      if (bp[d] != 1) bi += coord * bstride;
      astride *= ap[d];
      bstride *= bp[d];
    }
    map.a_index[flat] = ai;
    map.b_index[flat] = bi;
  }
  return map;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor handle

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ContractError("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_to_string(shape));
  }
  check_finite(data, "from_data");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  n->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const { return OpAccess::node(*this).shape; }
std::size_t Tensor::numel() const { return OpAccess::node(*this).data.size(); }
std::span<const double> Tensor::data() const { return OpAccess::node(*this).data; }
std::span<double> Tensor::mutable_data() { return OpAccess::node(*this).data; }

double Tensor::item() const {
  const auto& n = OpAccess::node(*this);
  if (n.data.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(n.shape));
  }
  return n.data[0];
}

bool Tensor::requires_grad() const { return OpAccess::node(*this).requires_grad; }
bool Tensor::has_grad() const { return !OpAccess::node(*this).grad.empty(); }

std::span<const double> Tensor::grad() const {
  const auto& n = OpAccess::node(*this);
  if (n.grad.empty()) throw ContractError("tensor has no gradient; run backward first");
  return n.grad;
}

void Tensor::clear_grad() { OpAccess::node(*this).grad.clear(); }
bool Tensor::is_leaf() const { return !OpAccess::node(*this).backward_fn; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2 || as[as.size() - 1] != bs[bs.size() - 2]) {
    throw ContractError("matmul: shape mismatch " + shape_to_string(as) + " x " +
                        shape_to_string(bs));
  }
  const std::size_t m = as[as.size() - 2], k = as.back(), n = bs.back();
  const Shape abatch(as.begin(), as.end() - 2);
  const Shape bbatch(bs.begin(), bs.end() - 2);
  auto map = std::make_shared<BroadcastMap>(broadcast_dims(abatch, bbatch, "matmul", as, bs));

  Shape out_shape = map->out_dims;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(shape_numel(out_shape), 0.0);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t batch = 0; batch < map->a_index.size(); ++batch) {
    const double* A = ad.data() + map->a_index[batch] * m * k;
    const double* B = bd.data() + map->b_index[batch] * k * n;
    double* C = out.data() + batch * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }

  auto node = make_output(std::move(out_shape), std::move(out), "matmul", {&a, &b});
  if (node->requires_grad) {
    node->backward_fn = [map, m, k, n](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      const double* G = self.grad.data();
      for (std::size_t batch = 0; batch < map->a_index.size(); ++batch) {
        const double* Gb = G + batch * m * n;
        const double* A = na.data.data() + map->a_index[batch] * m * k;
        const double* B = nb.data.data() + map->b_index[batch] * k * n;
        if (na.requires_grad) {
          double* dA = grad_of(na).data() + map->a_index[batch] * m * k;
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = Gb + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = B + p * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              dA[i * k + p] += acc;
            }
          }
        }
        if (nb.requires_grad) {
          double* dB = grad_of(nb).data() + map->b_index[batch] * k * n;
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = Gb + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = A[i * k + p];
              double* drow = dB + p * n;
              for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
            }
          }
        }
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor transpose(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ContractError("transpose: rank < 2 " + shape_to_string(s));
  const std::size_t r = s[s.size() - 2], c = s.back();
  const std::size_t batches = x.numel() / (r * c);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t b = 0; b < batches; ++b) {
    const double* X = xd.data() + b * r * c;
    double* Y = out.data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) Y[j * r + i] = X[i * c + j];
    }
  }
  auto node = make_output(std::move(out_shape), std::move(out), "transpose", {&x});
  if (node->requires_grad) {
    node->backward_fn = [r, c, batches](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (std::size_t b = 0; b < batches; ++b) {
        const double* G = self.grad.data() + b * r * c;
        double* D = dx.data() + b * r * c;
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) D[i * c + j] += G[j * r + i];
        }
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()))) {
    throw ContractError("add: shape " + shape_to_string(bs) +
                        " is not a trailing slice of " + shape_to_string(as));
  }
  const std::size_t inner = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % inner];
  auto node = make_output(as, std::move(out), "add", {&a, &b});
  if (node->requires_grad) {
    node->backward_fn = [inner](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      if (na.requires_grad) {
        auto& da = grad_of(na);
        for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
      }
      if (nb.requires_grad) {
        auto& db = grad_of(nb);
        for (std::size_t i = 0; i < self.grad.size(); ++i) db[i % inner] += self.grad[i];
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractError("mul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                        shape_to_string(b.shape()));
  }
  std::vector<double> out(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto node = make_output(a.shape(), std::move(out), "mul", {&a, &b});
  if (node->requires_grad) {
    node->backward_fn = [](Node& self) {
      Node& na = *self.inputs[0];
      Node& nb = *self.inputs[1];
      if (na.requires_grad) {
        auto& da = grad_of(na);
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * nb.data[i];
      }
      if (nb.requires_grad) {
        auto& db = grad_of(nb);
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i] * na.data[i];
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  auto node = make_output(x.shape(), std::move(out), "scale", {&x});
  if (node->requires_grad) {
    node->backward_fn = [factor](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * factor;
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto node = make_output(Shape{}, {total}, "sum", {&x});
  if (node->requires_grad) {
    node->backward_fn = [](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (double& d : dx) d += self.grad[0];
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor masked_softmax(const Tensor& x, const Mask& mask) {
  const Shape& xs = x.shape();
  if (xs.empty()) throw ContractError("masked_softmax: scalar input");
  if (mask.shape.size() != xs.size() || mask.keep.size() != shape_numel(mask.shape)) {
    throw ContractError("masked_softmax: mask shape " + shape_to_string(mask.shape) +
                        " incompatible with " + shape_to_string(xs));
  }
  for (std::size_t d = 0; d < xs.size(); ++d) {
    const bool last = d + 1 == xs.size();
    if (mask.shape[d] != xs[d] && (last || mask.shape[d] != 1)) {
      throw ContractError("masked_softmax: mask shape " + shape_to_string(mask.shape) +
                          " incompatible with " + shape_to_string(xs));
    }
  }
  const std::size_t n = xs.back();
  const std::size_t rows = x.numel() / n;
  const Shape xlead(xs.begin(), xs.end() - 1);
  const Shape mlead(mask.shape.begin(), mask.shape.end() - 1);
  const auto map = broadcast_dims(xlead, mlead, "masked_softmax", xs, mask.shape);

  std::vector<double> out(x.numel(), 0.0);
  auto keep = std::make_shared<std::vector<std::uint8_t>>(x.numel());
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * n;
    const std::uint8_t* mrow = mask.keep.data() + map.b_index[r] * n;
    double* orow = out.data() + r * n;
    double mx = -INFINITY;
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow[j]) {
        mx = any ? std::max(mx, row[j]) : row[j];
        any = true;
      }
    }
    if (!any) {
      throw ContractError("masked_softmax: row " + std::to_string(r) + " is fully masked");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow[j]) {
        orow[j] = std::exp(row[j] - mx);
        total += orow[j];
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow[j]) orow[j] /= total;
      (*keep)[r * n + j] = mrow[j] ? 1 : 0;
    }
  }

  auto node = make_output(xs, std::move(out), "masked_softmax", {&x});
  if (node->requires_grad) {
    node->backward_fn = [n, rows, keep](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = self.data.data() + r * n;
        const double* g = self.grad.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
        for (std::size_t j = 0; j < n; ++j) {
          if ((*keep)[r * n + j]) dx[r * n + j] += y[j] * (g[j] - dot);
        }
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Shape& xs = x.shape();
  if (xs.empty() || xs.back() == 0) throw ContractError("layer_norm: empty last dimension");
  const std::size_t d = xs.back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ContractError("layer_norm: gain/bias must have shape [" + std::to_string(d) +
                        "], got " + shape_to_string(gain.shape()) + " and " +
                        shape_to_string(bias.shape()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * inv;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = gd[j] * h + bd[j];
    }
  }
  auto node = make_output(xs, std::move(out), "layer_norm", {&x, &gain, &bias});
  if (node->requires_grad) {
    node->backward_fn = [d, rows, xhat, inv_std](Node& self) {
      Node& nx = *self.inputs[0];
      Node& ng = *self.inputs[1];
      Node& nbias = *self.inputs[2];
      const double* G = self.grad.data();
      if (ng.requires_grad) {
        auto& dg = grad_of(ng);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < d; ++j) dg[j] += G[r * d + j] * (*xhat)[r * d + j];
        }
      }
      if (nbias.requires_grad) {
        auto& db = grad_of(nbias);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < d; ++j) db[j] += G[r * d + j];
        }
      }
      if (nx.requires_grad) {
        auto& dx = grad_of(nx);
        const double dd = static_cast<double>(d);
        std::vector<double> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* h = xhat->data() + r * d;
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = G[r * d + j] * ng.data[j];
            sum_dh += dh[j];
            sum_dh_h += dh[j] * h[j];
          }
          const double inv = (*inv_std)[r];
          for (std::size_t j = 0; j < d; ++j) {
            dx[r * d + j] += inv / dd * (dd * dh[j] - sum_dh - h[j] * sum_dh_h);
          }
        }
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

namespace {
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xd[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluScale * (v + kGeluCubic * v * v * v)));
  }
  auto node = make_output(x.shape(), std::move(out), "gelu", {&x});
  if (node->requires_grad) {
    node->backward_fn = [](Node& self) {
      Node& nx = *self.inputs[0];
      auto& dx = grad_of(nx);
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double v = nx.data[i];
        const double t = std::tanh(kGeluScale * (v + kGeluCubic * v * v * v));
        const double dt = (1.0 - t * t) * kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
        dx[i] += self.grad[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor embedding(const Tensor& table, std::span<const TokenId> ids, const Shape& ids_shape) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) throw ContractError("embedding: table must be [V, d], got " + shape_to_string(ts));
  if (shape_numel(ids_shape) != ids.size()) {
    throw ContractError("embedding: " + std::to_string(ids.size()) +
                        " ids do not fill shape " + shape_to_string(ids_shape));
  }
  const std::size_t vocab = ts[0], d = ts[1];
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ContractError("embedding: id " + std::to_string(id) + " out of range for " +
                          std::to_string(vocab) + " rows");
    }
  }
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  std::vector<double> out(ids.size() * d);
  const auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  auto node = make_output(std::move(out_shape), std::move(out), "embedding", {&table});
  if (node->requires_grad) {
    auto saved = std::make_shared<std::vector<TokenId>>(ids.begin(), ids.end());
    node->backward_fn = [saved, d](Node& self) {
      auto& dt = grad_of(*self.inputs[0]);
      for (std::size_t i = 0; i < saved->size(); ++i) {
        double* row = dt.data() + static_cast<std::size_t>((*saved)[i]) * d;
        const double* g = self.grad.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += g[j];
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                     TokenId ignore_id) {
  const Shape& ls = logits.shape();
  if (ls.empty()) throw ContractError("cross_entropy: scalar logits");
  const std::size_t vocab = ls.back();
  const std::size_t rows = logits.numel() / vocab;
  if (targets.size() != rows) {
    throw ContractError("cross_entropy: " + std::to_string(targets.size()) +
                        " targets for logits " + shape_to_string(ls));
  }
  std::size_t count = 0;
  for (TokenId t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw ContractError("cross_entropy: target " + std::to_string(t) +
                          " out of range for vocabulary " + std::to_string(vocab));
    }
    ++count;
  }
  if (count == 0) throw ContractError("cross_entropy: every position is ignored");

  const auto xd = logits.data();
  auto lse = std::make_shared<std::vector<double>>(rows, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const double* row = xd.data() + r * vocab;
    double mx = row[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) s += std::exp(row[j] - mx);
    (*lse)[r] = mx + std::log(s);
    total += (*lse)[r] - row[static_cast<std::size_t>(targets[r])];
  }
  const double inv_count = 1.0 / static_cast<double>(count);
  auto node = make_output(Shape{}, {total * inv_count}, "cross_entropy", {&logits});
  if (node->requires_grad) {
    auto saved = std::make_shared<std::vector<TokenId>>(targets.begin(), targets.end());
    node->backward_fn = [saved, lse, vocab, rows, inv_count, ignore_id](Node& self) {
      Node& nx = *self.inputs[0];
      auto& dx = grad_of(nx);
      const double g = self.grad[0] * inv_count;
      for (std::size_t r = 0; r < rows; ++r) {
        const TokenId t = (*saved)[r];
        if (t == ignore_id) continue;
        const double* row = nx.data.data() + r * vocab;
        double* drow = dx.data() + r * vocab;
        for (std::size_t j = 0; j < vocab; ++j) drow[j] += g * std::exp(row[j] - (*lse)[r]);
        drow[static_cast<std::size_t>(t)] -= g;
      }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto factors = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*factors)[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = xd[i] * (*factors)[i];
  }
  auto node = make_output(x.shape(), std::move(out), "dropout", {&x});
  if (node->requires_grad) {
    node->backward_fn = [factors](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * (*factors)[i];
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
  const Shape& s = x.shape();
  if (s.size() != 3 || heads == 0 || s[2] % heads != 0) {
    throw ContractError("split_heads: cannot split " + shape_to_string(s) + " into " +
                        std::to_string(heads) + " heads");
  }
  const std::size_t B = s[0], L = s[1], d = s[2], dh = d / heads;
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xd.data() + (b * L + l) * d + h * dh, dh,
                    out.data() + ((b * heads + h) * L + l) * dh);
  auto node = make_output(Shape{B, heads, L, dh}, std::move(out), "split_heads", {&x});
  if (node->requires_grad) {
    node->backward_fn = [B, L, d, heads, dh](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l)
          for (std::size_t h = 0; h < heads; ++h) {
            const double* g = self.grad.data() + ((b * heads + h) * L + l) * dh;
            double* dst = dx.data() + (b * L + l) * d + h * dh;
            for (std::size_t e = 0; e < dh; ++e) dst[e] += g[e];
          }
    };
  }
  return OpAccess::wrap(std::move(node));
}

Tensor merge_heads(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ContractError("merge_heads: expected rank 4, got " + shape_to_string(s));
  const std::size_t B = s[0], heads = s[1], L = s[2], dh = s[3], d = heads * dh;
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < L; ++l)
        std::copy_n(xd.data() + ((b * heads + h) * L + l) * dh, dh,
                    out.data() + (b * L + l) * d + h * dh);
  auto node = make_output(Shape{B, L, d}, std::move(out), "merge_heads", {&x});
  if (node->requires_grad) {
    node->backward_fn = [B, L, d, heads, dh](Node& self) {
      auto& dx = grad_of(*self.inputs[0]);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t l = 0; l < L; ++l) {
            const double* g = self.grad.data() + (b * L + l) * d + h * dh;
            double* dst = dx.data() + ((b * heads + h) * L + l) * dh;
            for (std::size_t e = 0; e < dh; ++e) dst[e] += g[e];
          }
    };
  }
  return OpAccess::wrap(std::move(node));
}

// ---------------------------------------------------------------------------
// Backward

void backward(const Tensor& loss) {
  Node& root = OpAccess::node(loss);
  if (root.data.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_to_string(root.shape));
  }
  if (root.backward_done) {
    throw ContractError("backward: already ran on this graph; rebuild it first");
  }
  if (!root.requires_grad) {
    throw ContractError("backward: loss does not depend on any tensor that requires grad");
  }

  // Reachable recorded nodes, replayed in reverse execution order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{&root};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->seq > b->seq; });

  for (Node* n : order) {
    if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
  }
  grad_of(root)[0] += 1.0;
  for (Node* n : order) {
    if (n->backward_fn) n->backward_fn(*n);
  }
  root.backward_done = true;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
  const std::array<Tensor, 1> params{x};
  return grad_check([&f, &x] { return f(x); }, params, h, x.numel(), 0);
}

double grad_check(const std::function<Tensor()>& loss_fn, std::span<const Tensor> params,
                  double h, std::size_t max_coords, std::uint64_t seed) {
  return grad_check_report(loss_fn, params, h, max_coords, seed).max_rel_error;
}

GradCheckReport grad_check_report(const std::function<Tensor()>& loss_fn,
                                  std::span<const Tensor> params, double h,
                                  std::size_t max_coords, std::uint64_t seed,
                                  double magnitude_floor) {
  for (Tensor p : params) {
    if (!p.requires_grad()) throw ContractError("grad_check: parameter does not require grad");
    p.clear_grad();
  }
  const Tensor loss = loss_fn();
  GradCheckReport report;
  report.loss = loss.item();
  backward(loss);

  Rng rng(seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor p = params[t];
    const std::vector<double> analytic =
        p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                     : std::vector<double>(p.numel(), 0.0);
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      rng.shuffle(coords);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    auto data = p.mutable_data();
    for (std::size_t i : coords) {
      const double saved = data[i];
      double plus, minus;
      {
        NoGradGuard no_grad;
        data[i] = saved + h;
        plus = loss_fn().item();
        data[i] = saved - h;
        minus = loss_fn().item();
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double magnitude = std::max(std::abs(analytic[i]), std::abs(numeric));
      const double abs_error = std::abs(analytic[i] - numeric);
      const double rel = abs_error / std::max(magnitude, 1e-8);
      ++report.probes;
      report.max_abs_error = std::max(report.max_abs_error, abs_error);
      if (magnitude >= magnitude_floor) {
        ++report.probes_above_floor;
        report.max_rel_error_above_floor = std::max(report.max_rel_error_above_floor, rel);
      }
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = t;
        report.worst_coord = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace sentsimp
