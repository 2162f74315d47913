#include "ramtsf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace ramtsf {

namespace {

thread_local FlopCounter* g_counter = nullptr;
thread_local bool g_grad_enabled = true;

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NotFiniteError(std::string(op) + " produced a non-finite value");
    }
  }
}

void validate_shape(const Shape& s, const char* where) {
  if (s.empty()) throw ShapeError(std::string(where) + ": rank-0 shapes are not supported");
  for (int64_t e : s) {
    if (e <= 0) {
      throw ShapeError(std::string(where) + ": non-positive extent in shape " + shape_str(s));
    }
  }
}

// C[m,n] = A[m,k] * B[k,n]
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  std::fill(c, c + m * n, 0.0);
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Out[m,k] += G[m,n] * B[k,n]^T
void mm_nt_acc(const double* g, const double* b, double* out, int64_t m, int64_t n, int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* orow = out + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      orow[p] += acc;
    }
  }
}

// Out[k,n] += A[m,k]^T * G[m,n]
void mm_tn_acc(const double* a, const double* g, double* out, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

using NodePtr = std::shared_ptr<detail::TensorNode>;

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(detail::TensorNode&)> backprop) {
  check_finite(data, op);
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool taped = false;
  if (g_grad_enabled && backprop) {
    for (const Tensor& t : inputs) {
      if (t.defined() && t.requires_grad()) {
        taped = true;
        break;
      }
    }
  }
  if (taped) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) {
      if (t.defined()) node->parents.push_back(t.node_ptr());
    }
    node->backprop = std::move(backprop);
  }
  return Tensor::wrap(node);
}

int64_t normalize_axis(int64_t axis, int64_t dim, const char* op) {
  int64_t a = axis < 0 ? axis + dim : axis;
  if (a < 0 || a >= dim) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(dim));
  }
  return a;
}

}  // namespace

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

FlopCounterScope::FlopCounterScope(FlopCounter& counter) : prev_(g_counter) {
  g_counter = &counter;
}

FlopCounterScope::~FlopCounterScope() { g_counter = prev_; }

void count_flops(int64_t n) {
  if (g_counter != nullptr) g_counter->flops += n;
}

NoGradScope::NoGradScope() : prev_(g_grad_enabled) { g_grad_enabled = false; }

NoGradScope::~NoGradScope() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Tensor basics
// ---------------------------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape, "Tensor::full");
  auto node = std::make_shared<detail::TensorNode>();
  node->data.assign(static_cast<size_t>(shape_numel(shape)), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape, "Tensor::from_data");
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("Tensor::from_data: " + std::to_string(data.size()) +
                     " values for shape " + shape_str(shape));
  }
  check_finite(data, "Tensor::from_data");
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::identity(int64_t n) {
  if (n <= 0) throw ShapeError("Tensor::identity: non-positive size");
  std::vector<double> d(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) d[static_cast<size_t>(i * n + i)] = 1.0;
  return from_data({n, n}, std::move(d));
}

const Shape& Tensor::shape() const {
  if (!node_) throw StateError("shape() on an empty tensor");
  return node_->shape;
}

int64_t Tensor::dim() const { return static_cast<int64_t>(shape().size()); }

int64_t Tensor::size(int64_t axis) const {
  int64_t a = normalize_axis(axis, dim(), "Tensor::size");
  return shape()[static_cast<size_t>(a)];
}

int64_t Tensor::numel() const {
  if (!node_) throw StateError("numel() on an empty tensor");
  return node_->numel();
}

std::span<const double> Tensor::data() const {
  if (!node_) throw StateError("data() on an empty tensor");
  return {node_->data.data(), node_->data.size()};
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw StateError("mutable_data() on an empty tensor");
  if (node_->backprop) {
    throw StateError("mutable_data() is restricted to leaf tensors");
  }
  return {node_->data.data(), node_->data.size()};
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs a one-element tensor, got " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) {
    throw ShapeError("at(): " + std::to_string(idx.size()) + " indices for rank " +
                     std::to_string(s.size()));
  }
  int64_t flat = 0;
  size_t k = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= s[k]) throw ShapeError("at(): index out of range");
    flat = flat * s[k] + i;
    ++k;
  }
  return node_->data[static_cast<size_t>(flat)];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw StateError("grad() before backward populated it");
  return {node_->grad.data(), node_->grad.size()};
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw StateError("mutable_grad() on an empty tensor");
  node_->ensure_grad();
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2) {
    throw ShapeError("matmul: needs 2-D operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  int64_t m = a.size(0), k = a.size(1), k2 = b.size(0), n = b.size(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(m * n));
  mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  count_flops(2 * m * k * n);
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return make_result({m, n}, std::move(out), "matmul", {a, b},
                     [an, bn, m, k, n](detail::TensorNode& self) {
                       if (an->requires_grad) {
                         an->ensure_grad();
                         mm_nt_acc(self.grad.data(), bn->data.data(), an->grad.data(), m, n, k);
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         mm_tn_acc(an->data.data(), self.grad.data(), bn->grad.data(), m, k, n);
                       }
                     });
}

Tensor softmax(const Tensor& x, int64_t axis, double beta) {
  if (!(beta > 0.0)) throw ValueError("softmax: temperature must be positive");
  int64_t ax = normalize_axis(axis, x.dim(), "softmax");
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < ax; ++i) outer *= s[static_cast<size_t>(i)];
  int64_t n = s[static_cast<size_t>(ax)];
  for (size_t i = static_cast<size_t>(ax) + 1; i < s.size(); ++i) inner *= s[i];
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* xd = x.data().data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      double mx = xd[base];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, xd[base + j * inner]);
      double sum = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        double e = std::exp(beta * (xd[base + j * inner] - mx));
        out[static_cast<size_t>(base + j * inner)] = e;
        sum += e;
      }
      for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(base + j * inner)] /= sum;
    }
  }
  count_flops(5 * x.numel());
  NodePtr xn = x.node_ptr();
  return make_result(s, std::move(out), "softmax", {x},
                     [xn, outer, n, inner, beta](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t o = 0; o < outer; ++o) {
                         for (int64_t in = 0; in < inner; ++in) {
                           const int64_t base = o * n * inner + in;
                           double dot = 0.0;
                           for (int64_t j = 0; j < n; ++j) {
                             const size_t p = static_cast<size_t>(base + j * inner);
                             dot += self.grad[p] * self.data[p];
                           }
                           for (int64_t j = 0; j < n; ++j) {
                             const size_t p = static_cast<size_t>(base + j * inner);
                             xn->grad[p] += beta * self.data[p] * (self.grad[p] - dot);
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.dim() < 1) throw ShapeError("layer_norm: empty shape");
  int64_t d = x.shape().back();
  if (gain.dim() != 1 || gain.size(0) != d || bias.dim() != 1 || bias.size(0) != d) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
  }
  if (!(eps > 0.0)) throw ValueError("layer_norm: eps must be positive");
  int64_t rows = x.numel() / d;
  std::vector<double> out(static_cast<size_t>(x.numel()));
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  const double* xd = x.data().data();
  const double* gd = gain.data().data();
  const double* bd = bias.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xd + r * d;
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(r)] = inv;
    for (int64_t j = 0; j < d; ++j) {
      double xh = (row[j] - mu) * inv;
      (*xhat)[static_cast<size_t>(r * d + j)] = xh;
      out[static_cast<size_t>(r * d + j)] = xh * gd[j] + bd[j];
    }
  }
  count_flops(8 * x.numel());
  NodePtr xn = x.node_ptr(), gn = gain.node_ptr(), bn = bias.node_ptr();
  return make_result(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                     [xn, gn, bn, xhat, inv_std, rows, d](detail::TensorNode& self) {
                       for (int64_t r = 0; r < rows; ++r) {
                         const double* gy = self.grad.data() + r * d;
                         const double* xh = xhat->data() + r * d;
                         if (gn->requires_grad) {
                           gn->ensure_grad();
                           for (int64_t j = 0; j < d; ++j) gn->grad[static_cast<size_t>(j)] += gy[j] * xh[j];
                         }
                         if (bn->requires_grad) {
                           bn->ensure_grad();
                           for (int64_t j = 0; j < d; ++j) bn->grad[static_cast<size_t>(j)] += gy[j];
                         }
                         if (xn->requires_grad) {
                           xn->ensure_grad();
                           double m1 = 0.0, m2 = 0.0;
                           std::vector<double> gxh(static_cast<size_t>(d));
                           for (int64_t j = 0; j < d; ++j) {
                             gxh[static_cast<size_t>(j)] = gy[j] * gn->data[static_cast<size_t>(j)];
                             m1 += gxh[static_cast<size_t>(j)];
                             m2 += gxh[static_cast<size_t>(j)] * xh[j];
                           }
                           m1 /= static_cast<double>(d);
                           m2 /= static_cast<double>(d);
                           double inv = (*inv_std)[static_cast<size_t>(r)];
                           for (int64_t j = 0; j < d; ++j) {
                             xn->grad[static_cast<size_t>(r * d + j)] +=
                                 inv * (gxh[static_cast<size_t>(j)] - m1 - xh[j] * m2);
                           }
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double p, RunMode mode, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ValueError("dropout: rate must be in [0, 1)");
  if (mode == RunMode::eval || p == 0.0) return x;
  int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  const double keep_scale = 1.0 / (1.0 - p);
  const double* xd = x.data().data();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double m = rng.uniform() < p ? 0.0 : keep_scale;
    (*mask)[static_cast<size_t>(i)] = m;
    out[static_cast<size_t>(i)] = xd[i] * m;
  }
  count_flops(2 * n);
  NodePtr xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), "dropout", {x},
                     [xn, mask, n](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                         xn->grad[static_cast<size_t>(i)] +=
                             self.grad[static_cast<size_t>(i)] * (*mask)[static_cast<size_t>(i)];
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.dim() != 2) throw ShapeError("linear: weight must be 2-D");
  int64_t din = w.size(0), dout = w.size(1);
  if (x.shape().back() != din) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  }
  if (b.dim() != 1 || b.size(0) != dout) {
    throw ShapeError("linear: bias must be [" + std::to_string(dout) + "]");
  }
  int64_t m = x.numel() / din;
  std::vector<double> out(static_cast<size_t>(m * dout));
  mm_nn(x.data().data(), w.data().data(), out.data(), m, din, dout);
  const double* bd = b.data().data();
  for (int64_t r = 0; r < m; ++r) {
    double* row = out.data() + r * dout;
    for (int64_t j = 0; j < dout; ++j) row[j] += bd[j];
  }
  count_flops(2 * m * din * dout + m * dout);
  Shape os = x.shape();
  os.back() = dout;
  NodePtr xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
  return make_result(std::move(os), std::move(out), "linear", {x, w, b},
                     [xn, wn, bn, m, din, dout](detail::TensorNode& self) {
                       if (xn->requires_grad) {
                         xn->ensure_grad();
                         mm_nt_acc(self.grad.data(), wn->data.data(), xn->grad.data(), m, dout, din);
                       }
                       if (wn->requires_grad) {
                         wn->ensure_grad();
                         mm_tn_acc(xn->data.data(), self.grad.data(), wn->grad.data(), m, din, dout);
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         for (int64_t r = 0; r < m; ++r) {
                           for (int64_t j = 0; j < dout; ++j) {
                             bn->grad[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(r * dout + j)];
                           }
                         }
                       }
                     });
}

Tensor relu(const Tensor& x) {
  int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = xd[i] > 0.0 ? xd[i] : 0.0;
  count_flops(n);
  NodePtr xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), "relu", {x},
                     [xn, n](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                         if (xn->data[static_cast<size_t>(i)] > 0.0) {
                           xn->grad[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)];
                         }
                       }
                     });
}

namespace {

Tensor elementwise_pair(const Tensor& a, const Tensor& b, const char* op,
                        double (*fwd)(double, double),
                        void (*bwd)(double ga_in, double av, double bv, double* ga, double* gb)) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(ad[i], bd[i]);
  count_flops(n);
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return make_result(a.shape(), std::move(out), op, {a, b},
                     [an, bn, n, bwd](detail::TensorNode& self) {
                       double* ga = nullptr;
                       double* gb = nullptr;
                       if (an->requires_grad) {
                         an->ensure_grad();
                         ga = an->grad.data();
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         gb = bn->grad.data();
                       }
                       for (int64_t i = 0; i < n; ++i) {
                         const size_t p = static_cast<size_t>(i);
                         bwd(self.grad[p], an->data[p], bn->data[p], ga ? ga + i : nullptr,
                             gb ? gb + i : nullptr);
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_pair(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double* ga, double* gb) {
        if (ga) *ga += g;
        if (gb) *gb += g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_pair(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double* ga, double* gb) {
        if (ga) *ga += g;
        if (gb) *gb -= g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_pair(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double av, double bv, double* ga, double* gb) {
        if (ga) *ga += g * bv;
        if (gb) *gb += g * av;
      });
}

Tensor scale(const Tensor& x, double s) {
  if (!std::isfinite(s)) throw ValueError("scale: factor must be finite");
  int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = xd[i] * s;
  count_flops(n);
  NodePtr xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), "scale", {x},
                     [xn, n, s](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                         xn->grad[static_cast<size_t>(i)] += s * self.grad[static_cast<size_t>(i)];
                       }
                     });
}

Tensor abs(const Tensor& x) {
  int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = std::fabs(xd[i]);
  count_flops(n);
  NodePtr xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), "abs", {x},
                     [xn, n](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                         double v = xn->data[static_cast<size_t>(i)];
                         double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                         xn->grad[static_cast<size_t>(i)] += sign * self.grad[static_cast<size_t>(i)];
                       }
                     });
}

Tensor rsqrt(const Tensor& x) {
  int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < n; ++i) {
    if (!(xd[i] > 0.0)) throw ValueError("rsqrt: inputs must be positive");
    out[static_cast<size_t>(i)] = 1.0 / std::sqrt(xd[i]);
  }
  count_flops(2 * n);
  NodePtr xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), "rsqrt", {x},
                     [xn, n](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t i = 0; i < n; ++i) {
                         const size_t p = static_cast<size_t>(i);
                         double y = self.data[p];
                         xn->grad[p] += -0.5 * y * y * y * self.grad[p];
                       }
                     });
}

namespace {

// Applies fn(dst_index, src_index) over every element of the permuted tensor.
template <typename Fn>
void for_each_permuted(const Shape& in_shape, const std::vector<int64_t>& axes, Fn&& fn) {
  const int64_t rank = static_cast<int64_t>(in_shape.size());
  Shape out_shape(in_shape.size());
  for (int64_t i = 0; i < rank; ++i) out_shape[static_cast<size_t>(i)] = in_shape[static_cast<size_t>(axes[static_cast<size_t>(i)])];
  std::vector<int64_t> in_strides(in_shape.size(), 1);
  for (int64_t i = rank - 2; i >= 0; --i) {
    in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i + 1)] * in_shape[static_cast<size_t>(i + 1)];
  }
  std::vector<int64_t> idx(in_shape.size(), 0);
  const int64_t total = shape_numel(in_shape);
  for (int64_t dst = 0; dst < total; ++dst) {
    int64_t src = 0;
    for (int64_t i = 0; i < rank; ++i) {
      src += idx[static_cast<size_t>(i)] * in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];
    }
    fn(dst, src);
    for (int64_t i = rank - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < out_shape[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
}

}  // namespace

Tensor transpose(const Tensor& x, std::vector<int64_t> axes) {
  const int64_t rank = x.dim();
  if (axes.empty()) {
    axes.resize(static_cast<size_t>(rank));
    for (int64_t i = 0; i < rank; ++i) axes[static_cast<size_t>(i)] = rank - 1 - i;
  }
  if (static_cast<int64_t>(axes.size()) != rank) {
    throw ShapeError("transpose: permutation size does not match rank");
  }
  std::vector<bool> seen(static_cast<size_t>(rank), false);
  for (int64_t a : axes) {
    if (a < 0 || a >= rank || seen[static_cast<size_t>(a)]) {
      throw ShapeError("transpose: invalid permutation");
    }
    seen[static_cast<size_t>(a)] = true;
  }
  Shape os(static_cast<size_t>(rank));
  for (int64_t i = 0; i < rank; ++i) os[static_cast<size_t>(i)] = x.size(axes[static_cast<size_t>(i)]);
  std::vector<double> out(static_cast<size_t>(x.numel()));
  const double* xd = x.data().data();
  for_each_permuted(x.shape(), axes, [&](int64_t dst, int64_t src) {
    out[static_cast<size_t>(dst)] = xd[src];
  });
  NodePtr xn = x.node_ptr();
  Shape in_shape = x.shape();
  return make_result(std::move(os), std::move(out), "transpose", {x},
                     [xn, in_shape, axes](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for_each_permuted(in_shape, axes, [&](int64_t dst, int64_t src) {
                         xn->grad[static_cast<size_t>(src)] += self.grad[static_cast<size_t>(dst)];
                       });
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  validate_shape(shape, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  NodePtr xn = x.node_ptr();
  return make_result(std::move(shape), std::move(out), "reshape", {x},
                     [xn](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
                     });
}

Tensor concat_last_axis(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_last_axis: no inputs");
  const Shape& lead = parts[0].shape();
  int64_t total_last = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != lead.size() ||
        !std::equal(s.begin(), s.end() - 1, lead.begin())) {
      throw ShapeError("concat_last_axis: leading dimensions disagree");
    }
    total_last += s.back();
  }
  int64_t rows = parts[0].numel() / lead.back();
  Shape os = lead;
  os.back() = total_last;
  std::vector<double> out(static_cast<size_t>(rows * total_last));
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const Tensor& p : parts) {
    int64_t w = p.shape().back();
    const double* pd = p.data().data();
    for (int64_t r = 0; r < rows; ++r) {
      std::copy(pd + r * w, pd + (r + 1) * w, out.data() + r * total_last + off);
    }
    offsets.push_back(off);
    off += w;
  }
  std::vector<Tensor> held(parts.begin(), parts.end());
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(os);
  node->data = std::move(out);
  check_finite(node->data, "concat_last_axis");
  bool taped = false;
  if (grad_enabled()) {
    for (const Tensor& p : held) taped = taped || p.requires_grad();
  }
  if (taped) {
    node->requires_grad = true;
    std::vector<NodePtr> pn;
    for (const Tensor& p : held) {
      node->parents.push_back(p.node_ptr());
      pn.push_back(p.node_ptr());
    }
    node->backprop = [pn, offsets, rows, total_last](detail::TensorNode& self) {
      for (size_t i = 0; i < pn.size(); ++i) {
        if (!pn[i]->requires_grad) continue;
        pn[i]->ensure_grad();
        int64_t w = pn[i]->shape.back();
        for (int64_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * total_last + offsets[i];
          double* dst = pn[i]->grad.data() + r * w;
          for (int64_t j = 0; j < w; ++j) dst[j] += g[j];
        }
      }
    };
  }
  return Tensor::wrap(std::move(node));
}

Tensor slice_last_axis(const Tensor& x, int64_t start, int64_t len) {
  int64_t w = x.shape().back();
  if (start < 0 || len <= 0 || start + len > w) {
    throw ShapeError("slice_last_axis: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") outside width " + std::to_string(w));
  }
  int64_t rows = x.numel() / w;
  Shape os = x.shape();
  os.back() = len;
  std::vector<double> out(static_cast<size_t>(rows * len));
  const double* xd = x.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    std::copy(xd + r * w + start, xd + r * w + start + len, out.data() + r * len);
  }
  NodePtr xn = x.node_ptr();
  return make_result(std::move(os), std::move(out), "slice_last_axis", {x},
                     [xn, start, len, rows, w](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (int64_t r = 0; r < rows; ++r) {
                         const double* g = self.grad.data() + r * len;
                         double* dst = xn->grad.data() + r * w + start;
                         for (int64_t j = 0; j < len; ++j) dst[j] += g[j];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  int64_t cols = -1, rows_total = 0;
  for (const Tensor& p : parts) {
    if (p.dim() != 2) throw ShapeError("concat_rows: needs 2-D inputs");
    if (cols < 0) cols = p.size(1);
    if (p.size(1) != cols) throw ShapeError("concat_rows: column counts disagree");
    rows_total += p.size(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rows_total * cols));
  std::vector<int64_t> row_offsets;
  int64_t off = 0;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    row_offsets.push_back(off);
    off += p.size(0);
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = {rows_total, cols};
  node->data = std::move(out);
  check_finite(node->data, "concat_rows");
  bool taped = false;
  if (grad_enabled()) {
    for (const Tensor& p : parts) taped = taped || p.requires_grad();
  }
  if (taped) {
    node->requires_grad = true;
    std::vector<NodePtr> pn;
    for (const Tensor& p : parts) {
      node->parents.push_back(p.node_ptr());
      pn.push_back(p.node_ptr());
    }
    node->backprop = [pn, row_offsets, cols](detail::TensorNode& self) {
      for (size_t i = 0; i < pn.size(); ++i) {
        if (!pn[i]->requires_grad) continue;
        pn[i]->ensure_grad();
        int64_t r0 = row_offsets[i];
        int64_t nr = pn[i]->shape[0];
        const double* g = self.grad.data() + r0 * cols;
        for (int64_t j = 0; j < nr * cols; ++j) pn[i]->grad[static_cast<size_t>(j)] += g[j];
      }
    };
  }
  return Tensor::wrap(std::move(node));
}

Tensor slice_rows(const Tensor& x, int64_t start, int64_t len) {
  if (x.dim() != 2) throw ShapeError("slice_rows: needs a 2-D input");
  int64_t rows = x.size(0), cols = x.size(1);
  if (start < 0 || len <= 0 || start + len > rows) {
    throw ShapeError("slice_rows: range outside row count");
  }
  std::vector<double> out(x.data().begin() + start * cols,
                          x.data().begin() + (start + len) * cols);
  NodePtr xn = x.node_ptr();
  return make_result({len, cols}, std::move(out), "slice_rows", {x},
                     [xn, start, len, cols](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       double* dst = xn->grad.data() + start * cols;
                       for (int64_t j = 0; j < len * cols; ++j) dst[j] += self.grad[static_cast<size_t>(j)];
                     });
}

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx) {
  if (table.dim() != 2) throw ShapeError("gather_rows: table must be 2-D");
  int64_t rows = table.size(0), d = table.size(1);
  if (idx.empty()) throw ShapeError("gather_rows: empty index list");
  for (int64_t i : idx) {
    if (i < 0 || i >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " outside table with " +
                       std::to_string(rows) + " rows");
    }
  }
  int64_t m = static_cast<int64_t>(idx.size());
  std::vector<double> out(static_cast<size_t>(m * d));
  const double* td = table.data().data();
  for (int64_t i = 0; i < m; ++i) {
    std::copy(td + idx[static_cast<size_t>(i)] * d, td + (idx[static_cast<size_t>(i)] + 1) * d,
              out.data() + i * d);
  }
  NodePtr tn = table.node_ptr();
  auto idx_copy = std::make_shared<std::vector<int64_t>>(idx);
  return make_result({m, d}, std::move(out), "gather_rows", {table},
                     [tn, idx_copy, m, d](detail::TensorNode& self) {
                       if (!tn->requires_grad) return;
                       tn->ensure_grad();
                       for (int64_t i = 0; i < m; ++i) {
                         const double* g = self.grad.data() + i * d;
                         double* dst = tn->grad.data() + (*idx_copy)[static_cast<size_t>(i)] * d;
                         for (int64_t j = 0; j < d; ++j) dst[j] += g[j];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  count_flops(x.numel());
  NodePtr xn = x.node_ptr();
  return make_result({1}, {s}, "sum", {x},
                     [xn](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       double g = self.grad[0];
                       for (double& v : xn->grad) v += g;
                     });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  double n = static_cast<double>(x.numel());
  count_flops(x.numel() + 1);
  NodePtr xn = x.node_ptr();
  return make_result({1}, {s / n}, "mean", {x},
                     [xn, n](detail::TensorNode& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       double g = self.grad[0] / n;
                       for (double& v : xn->grad) v += g;
                     });
}

std::vector<Tensor> split(const Tensor& e, SplitAxis axis) {
  if (e.dim() != 3) throw ShapeError("split: expected [T,N,d], got " + shape_str(e.shape()));
  int64_t t = e.size(0), n = e.size(1), d = e.size(2);
  const double* ed = e.data().data();
  NodePtr en = e.node_ptr();
  std::vector<Tensor> outs;
  if (axis == SplitAxis::node) {
    outs.reserve(static_cast<size_t>(n));
    for (int64_t nn = 0; nn < n; ++nn) {
      std::vector<double> buf(static_cast<size_t>(t * d));
      for (int64_t tt = 0; tt < t; ++tt) {
        std::copy(ed + (tt * n + nn) * d, ed + (tt * n + nn + 1) * d, buf.data() + tt * d);
      }
      outs.push_back(make_result({t, d}, std::move(buf), "split", {e},
                                 [en, nn, t, n, d](detail::TensorNode& self) {
                                   if (!en->requires_grad) return;
                                   en->ensure_grad();
                                   for (int64_t tt = 0; tt < t; ++tt) {
                                     const double* g = self.grad.data() + tt * d;
                                     double* dst = en->grad.data() + (tt * n + nn) * d;
                                     for (int64_t c = 0; c < d; ++c) dst[c] += g[c];
                                   }
                                 }));
    }
  } else {
    outs.reserve(static_cast<size_t>(t));
    for (int64_t tt = 0; tt < t; ++tt) {
      std::vector<double> buf(ed + tt * n * d, ed + (tt + 1) * n * d);
      outs.push_back(make_result({n, d}, std::move(buf), "split", {e},
                                 [en, tt, n, d](detail::TensorNode& self) {
                                   if (!en->requires_grad) return;
                                   en->ensure_grad();
                                   double* dst = en->grad.data() + tt * n * d;
                                   for (int64_t c = 0; c < n * d; ++c) dst[c] += self.grad[static_cast<size_t>(c)];
                                 }));
    }
  }
  return outs;
}

Tensor stack(std::span<const Tensor> parts, SplitAxis axis) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  for (const Tensor& p : parts) {
    if (p.dim() != 2 || p.shape() != parts[0].shape()) {
      throw ShapeError("stack: all inputs must share one 2-D shape");
    }
  }
  int64_t r = parts[0].size(0), c = parts[0].size(1);
  int64_t t, n;
  if (axis == SplitAxis::node) {
    t = r;
    n = static_cast<int64_t>(parts.size());
  } else {
    t = static_cast<int64_t>(parts.size());
    n = r;
  }
  std::vector<double> out(static_cast<size_t>(t * n * c));
  if (axis == SplitAxis::node) {
    for (int64_t nn = 0; nn < n; ++nn) {
      const double* pd = parts[static_cast<size_t>(nn)].data().data();
      for (int64_t tt = 0; tt < t; ++tt) {
        std::copy(pd + tt * c, pd + (tt + 1) * c, out.data() + (tt * n + nn) * c);
      }
    }
  } else {
    for (int64_t tt = 0; tt < t; ++tt) {
      const double* pd = parts[static_cast<size_t>(tt)].data().data();
      std::copy(pd, pd + n * c, out.data() + tt * n * c);
    }
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = {t, n, c};
  node->data = std::move(out);
  check_finite(node->data, "stack");
  bool taped = false;
  if (grad_enabled()) {
    for (const Tensor& p : parts) taped = taped || p.requires_grad();
  }
  if (taped) {
    node->requires_grad = true;
    std::vector<NodePtr> pn;
    for (const Tensor& p : parts) {
      node->parents.push_back(p.node_ptr());
      pn.push_back(p.node_ptr());
    }
    bool by_node = axis == SplitAxis::node;
    node->backprop = [pn, t, n, c, by_node](detail::TensorNode& self) {
      if (by_node) {
        for (int64_t nn = 0; nn < n; ++nn) {
          if (!pn[static_cast<size_t>(nn)]->requires_grad) continue;
          pn[static_cast<size_t>(nn)]->ensure_grad();
          double* dst = pn[static_cast<size_t>(nn)]->grad.data();
          for (int64_t tt = 0; tt < t; ++tt) {
            const double* g = self.grad.data() + (tt * n + nn) * c;
            for (int64_t j = 0; j < c; ++j) dst[tt * c + j] += g[j];
          }
        }
      } else {
        for (int64_t tt = 0; tt < t; ++tt) {
          if (!pn[static_cast<size_t>(tt)]->requires_grad) continue;
          pn[static_cast<size_t>(tt)]->ensure_grad();
          double* dst = pn[static_cast<size_t>(tt)]->grad.data();
          const double* g = self.grad.data() + tt * n * c;
          for (int64_t j = 0; j < n * c; ++j) dst[j] += g[j];
        }
      }
    };
  }
  return Tensor::wrap(std::move(node));
}

Tensor causal_mask(int64_t n) {
  if (n <= 0) throw ShapeError("causal_mask: size must be positive");
  std::vector<double> m(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) m[static_cast<size_t>(i * n + j)] = kMaskedLogit;
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = {n, n};
  node->data = std::move(m);
  return Tensor::wrap(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw StateError("backward: empty tensor");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  detail::TensorNode* root = loss.node();
  if (!root->requires_grad) {
    throw StateError("backward: tensor is not on the tape (no gradient path)");
  }
  if (root->backward_ran) {
    throw StateError("backward: already ran on this tensor; rebuild the graph first");
  }
  root->backward_ran = true;

  // Post-order DFS over the requires-grad subgraph.
  std::vector<detail::TensorNode*> order;
  struct Frame {
    detail::TensorNode* node;
    size_t child = 0;
  };
  std::vector<Frame> dfs;
  std::unordered_set<detail::TensorNode*> visited;
  dfs.push_back({root});
  visited.insert(root);
  while (!dfs.empty()) {
    Frame& f = dfs.back();
    if (f.child < f.node->parents.size()) {
      detail::TensorNode* p = f.node->parents[f.child++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        dfs.push_back({p});
      }
    } else {
      order.push_back(f.node);
      dfs.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
  }
}

}  // namespace ramtsf
