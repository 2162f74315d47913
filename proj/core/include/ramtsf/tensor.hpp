#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ramtsf/errors.hpp"
#include "ramtsf/rng.hpp"

namespace ramtsf {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

enum class RunMode { train, eval };

// Additive pre-softmax mask value for disallowed attention positions.
// exp(kMaskedLogit - rowmax) underflows to exactly zero.
inline constexpr double kMaskedLogit = -1e30;

// ---------------------------------------------------------------------------
// Scalar-operation accounting.
//
// Every forward op reports its cost under a fixed convention (multiply-add
// counts as 2; see the table in cost.hpp). Costs are routed to the counter
// installed on the current thread, if any; backward passes never count.
// ---------------------------------------------------------------------------

struct FlopCounter {
  int64_t flops = 0;
};

class FlopCounterScope {
 public:
  explicit FlopCounterScope(FlopCounter& counter);
  ~FlopCounterScope();
  FlopCounterScope(const FlopCounterScope&) = delete;
  FlopCounterScope& operator=(const FlopCounterScope&) = delete;

 private:
  FlopCounter* prev_;
};

void count_flops(int64_t n);

// Disables tape construction on the current thread (evaluation, cost probes).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on demand during backward
  bool requires_grad = false;
  bool backward_ran = false;  // set on the node backward() was called on
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major tensor of doubles with reverse-mode autodiff.
//
// A Tensor is a shared handle to a graph node. Ops whose inputs require
// gradients record parents and a backprop closure; backward() walks the DAG
// in reverse topological order exactly once. Values are immutable once
// produced by an op; only leaves may be mutated (initialization, optimizer
// steps), which is what keeps independent model instances safe to run on
// separate threads.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(int64_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t dim() const;
  int64_t size(int64_t axis) const;
  int64_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();  // leaves only (no recorded parents)
  double item() const;               // scalar tensors
  double at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  detail::TensorNode* node() const { return node_.get(); }
  std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// ---------------------------------------------------------------------------
// Ops. All validate shapes and reject non-finite results.
// ---------------------------------------------------------------------------

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax along `axis` (negative axes count from the end) with temperature
// beta > 0: y_i = exp(beta*(x_i - max)) / sum_j exp(beta*(x_j - max)).
Tensor softmax(const Tensor& x, int64_t axis, double beta = 1.0);

// Normalizes the last axis to zero mean / unit variance, then applies the
// learnable per-feature gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Inverted dropout: zeroes with probability p in train mode and scales
// survivors by 1/(1-p); identity in eval mode or when p == 0.
Tensor dropout(const Tensor& x, double p, RunMode mode, Rng& rng);

// x[..., d_in] x w[d_in, d_out] + b[d_out], applied row-wise.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& x, double s);
Tensor abs(const Tensor& x);
Tensor rsqrt(const Tensor& x);  // 1/sqrt(x), x > 0

// Axis permutation; empty axes means reverse order (matrix transpose for 2-D).
Tensor transpose(const Tensor& x, std::vector<int64_t> axes = {});
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_last_axis(std::span<const Tensor> parts);
Tensor slice_last_axis(const Tensor& x, int64_t start, int64_t len);
Tensor concat_rows(std::span<const Tensor> parts);  // 2-D, axis 0
Tensor slice_rows(const Tensor& x, int64_t start, int64_t len);

// Row gather: out[i, :] = table[idx[i], :]. Gradients scatter-add back.
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx);

Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

// [T,N,d] layout helpers. `node` yields N matrices [T,d]; `time` yields
// T matrices [N,d]. stack() is the exact inverse (bitwise round trip).
enum class SplitAxis { node, time };
std::vector<Tensor> split(const Tensor& e, SplitAxis axis);
Tensor stack(std::span<const Tensor> parts, SplitAxis axis);

// Constant [n,n] with 0 on and below the diagonal, kMaskedLogit above.
Tensor causal_mask(int64_t n);

// Reverse-mode sweep from a scalar loss. Each graph node is visited exactly
// once; calling backward twice on the same node throws StateError.
void backward(const Tensor& loss);

}  // namespace ramtsf
