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

#ifndef SENTSIMP_TENSOR_H_
#define SENTSIMP_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sentsimp/rng.h"
#include "sentsimp/types.h"

namespace sentsimp {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct Node;
struct OpAccess;
}  // namespace detail

// Dense row-major float64 tensor with reverse-mode gradients.
//
// A Tensor is a shared handle: copies alias the same storage, the way a
// parameter is shared between a model and its optimizer. Every op records
// its output in execution order (when gradients are enabled and an input
// requires them); backward() replays those records once in reverse.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view, for initialization, optimizers and perturbation.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  // Gradient exists only after backward() reached this tensor.
  bool has_grad() const;
  std::span<const double> grad() const;
  void clear_grad();

  // True for tensors not produced by a recorded op.
  bool is_leaf() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;

  friend struct detail::OpAccess;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Keep-mask for masked_softmax. Same rank as the scores; each dimension
// either matches or is 1 (broadcast). Nonzero = attend.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;
};

// [.., m, k] x [.., k, n] -> [.., m, n], batch dims broadcast numpy-style.
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two dimensions.
Tensor transpose(const Tensor& x);
// b's shape must equal a trailing slice of a's shape; b repeats over the rest.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);

// Softmax over the last dimension; masked entries are exactly 0.
Tensor masked_softmax(const Tensor& x, const Mask& mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);
// Gathers rows of table [V, d]; output shape is ids_shape + [d].
Tensor embedding(const Tensor& table, std::span<const TokenId> ids,
                 const Shape& ids_shape);
// Mean negative log-likelihood over positions whose target != ignore_id.
// logits [.., V]; targets has one entry per logits row.
Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets,
                     TokenId ignore_id);
// Inverted dropout. rate 0 returns x unchanged.
Tensor dropout(const Tensor& x, double rate, Rng& rng);
// [B, L, h*dh] -> [B, h, L, dh] and back.
Tensor split_heads(const Tensor& x, std::size_t heads);
Tensor merge_heads(const Tensor& x);

// Accumulates d loss / d t into every reachable tensor that requires grad.
// Throws ContractError on a non-scalar loss or a second call on one graph.
void backward(const Tensor& loss);

// Max relative error between the analytic gradient of f at x and central
// differences (f(x+h) - f(x-h)) / 2h, over every coordinate of x.
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double h = 1e-5);

// Same comparison for a loss that closes over several parameters. At most
// `max_coords` coordinates per tensor are probed (all when the tensor is
// smaller), chosen with `seed`.
double grad_check(const std::function<Tensor()>& loss_fn,
                  std::span<const Tensor> params, double h,
                  std::size_t max_coords, std::uint64_t seed);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;  // index into params
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double max_abs_error = 0.0;
  // Largest relative error over probes with max(|analytic|, |numeric|) >=
  // `magnitude_floor`, and how many probes qualified.
  double max_rel_error_above_floor = 0.0;
  std::size_t probes_above_floor = 0;
  std::size_t probes = 0;
  double loss = 0.0;
};

// grad_check with the worst coordinate and absolute errors broken out.
GradCheckReport grad_check_report(const std::function<Tensor()>& loss_fn,
                                  std::span<const Tensor> params, double h,
                                  std::size_t max_coords, std::uint64_t seed,
                                  double magnitude_floor = 1e-6);

}  // namespace sentsimp

#endif  // SENTSIMP_TENSOR_H_
