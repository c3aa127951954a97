#include "ibiumad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "ibiumad/kernels.hpp"

namespace ibiumad {
namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  if (shape_numel(shape) != data.size())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  for (std::size_t e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->id = g_next_id.fetch_add(1);
  return impl;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v)
    if (std::isnan(x)) throw std::domain_error(std::string(op) + ": produced NaN");
}

// Builds an op output; records history only when some input needs grad.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   const char* op, BackwardFn backward) {
  bool needs = false;
  if (g_grad_enabled)
    for (const Tensor* t : inputs) needs = needs || (t->defined() && t->requires_grad());
  check_finite(data, op);
  auto impl = make_impl(std::move(shape), std::move(data), needs);
  impl->op = op;
  if (needs) {
    for (const Tensor* t : inputs) impl->parents.push_back(t->defined() ? t->impl() : nullptr);
    impl->backward = std::move(backward);
  }
  return Tensor(impl);
}

Tensor make_result_vec(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                       const char* op, BackwardFn backward) {
  bool needs = false;
  if (g_grad_enabled)
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  check_finite(data, op);
  auto impl = make_impl(std::move(shape), std::move(data), needs);
  impl->op = op;
  if (needs) {
    for (const Tensor& t : inputs) impl->parents.push_back(t.impl());
    impl->backward = std::move(backward);
  }
  return Tensor(impl);
}

// Gradient buffer of parent i, or nullptr when that parent does not need grad.
double* pgrad(TensorImpl& node, std::size_t i) {
  auto& p = node.parents[i];
  if (!p || !p->requires_grad) return nullptr;
  p->ensure_grad();
  return p->grad.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
}

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& x) {
  const std::size_t d = x.shape().back();
  return {x.numel() / d, d};
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor --------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(shape_numel(shape), value);
  return Tensor(make_impl(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> d(shape_numel(shape));
  for (double& v : d) v = rng.normal(0.0, stddev);
  return Tensor(make_impl(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) throw DimensionError("axis out of range");
  return impl_->shape[axis];
}
std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<double> Tensor::data() { return impl_->data; }
std::span<const double> Tensor::data() const { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return impl_->grad.size() == impl_->data.size(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::grad_mut() {
  impl_->ensure_grad();
  return impl_->grad;
}
void Tensor::zero_grad() {
  if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}
std::uint64_t Tensor::id() const { return impl_->id; }
const char* Tensor::op() const { return impl_->op; }

Tensor Tensor::detach() const { return Tensor(make_impl(shape(), impl_->data, false)); }
Tensor Tensor::clone() const { return Tensor(make_impl(shape(), impl_->data, requires_grad())); }

void Tensor::backward() const {
  if (numel() != 1) throw DimensionError("backward() needs a scalar, got " + shape_str(shape()));
  if (!requires_grad()) return;
  // Iterative post-order DFS gives a topological order of the recorded graph.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  impl_->ensure_grad();
  impl_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward && node->grad.size() == node->data.size()) node->backward(*node);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- elementwise ---------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(out), {&a, &b}, "add", [](TensorImpl& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* g = pgrad(n, k))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_result(a.shape(), std::move(out), {&a, &b}, "sub", [](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (double* g = pgrad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {&a, &b}, "mul", [](TensorImpl& n) {
    const auto& av = n.parents[0]->data;
    const auto& bv = n.parents[1]->data;
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    if (double* g = pgrad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * s;
  return make_result(a.shape(), std::move(out), {&a}, "scale", [s](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * s;
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + s;
  return make_result(a.shape(), std::move(out), {&a}, "add_scalar", [](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

// ReLU'(0) is taken as 0; gradient checks exclude inputs at the kink.
Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) > 0.0 ? x.at(i) : 0.0;
  return make_result(x.shape(), std::move(out), {&x}, "relu", [](TensorImpl& n) {
    const auto& xv = n.parents[0]->data;
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        if (xv[i] > 0.0) g[i] += n.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.at(i);
    out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_result(x.shape(), std::move(out), {&x}, "sigmoid", [](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        g[i] += n.grad[i] * n.data[i] * (1.0 - n.data[i]);
  });
}

Tensor square(const Tensor& x) { return mul(x, x); }

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {&x}, "sum", [](TensorImpl& n) {
    if (double* g = pgrad(n, 0)) {
      const std::size_t len = n.parents[0]->data.size();
      for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {&x}, "reshape", [](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

namespace {
thread_local FrozenStopGradients* frozen_stops = nullptr;
}  // namespace

FrozenStopGradients::FrozenStopGradients() : previous_(frozen_stops) { frozen_stops = this; }
FrozenStopGradients::~FrozenStopGradients() { frozen_stops = previous_; }

Tensor FrozenStopGradients::next(const Tensor& x) {
  if (cursor_ == values_.size()) {
    values_.push_back(x.detach());
    return values_[cursor_++];
  }
  const Tensor& v = values_[cursor_++];
  if (v.shape() != x.shape()) throw DimensionError("frozen stop_gradient: replay order changed");
  return v;
}

Tensor stop_gradient(const Tensor& x) { return frozen_stops ? frozen_stops->next(x) : x.detach(); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat axis out of range");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != s0.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t i = 0; i < s0.size(); ++i)
      if (i != axis && p.shape()[i] != s0[i])
        throw DimensionError("concat extent mismatch " + shape_str(p.shape()) + " vs " + shape_str(s0));
    out_shape[axis] += p.shape()[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  const std::size_t out_axis = out_shape[axis];
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.shape()[axis];
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.data().begin() + o * len * inner, len * inner,
                  out.begin() + (o * out_axis + off) * inner);
    off += len;
  }
  return make_result_vec(out_shape, std::move(out), parts, "concat",
                         [offsets, outer, inner, out_axis](TensorImpl& n) {
                           for (std::size_t k = 0; k < n.parents.size(); ++k) {
                             double* g = pgrad(n, k);
                             if (!g) continue;
                             const std::size_t len = n.parents[k]->data.size() / (outer * inner);
                             for (std::size_t o = 0; o < outer; ++o)
                               for (std::size_t i = 0; i < len * inner; ++i)
                                 g[o * len * inner + i] += n.grad[(o * out_axis + offsets[k]) * inner + i];
                           }
                         });
}

// ---- linear algebra --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dims differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  kernels::matmul(a.data(), b.data(), out, m, k, n);
  return make_result({m, n}, std::move(out), {&a, &b}, "matmul", [m, k, n](TensorImpl& node) {
    const auto& av = node.parents[0]->data;
    const auto& bv = node.parents[1]->data;
    if (double* g = pgrad(node, 0)) kernels::matmul_add_bt(node.grad, bv, {g, m * k}, m, n, k);
    if (double* g = pgrad(node, 1)) kernels::matmul_add_at(av, node.grad, {g, k * n}, m, k, n);
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.at(i * c + j);
  return make_result({c, r}, std::move(out), {&x}, "transpose", [r, c](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.grad[j * r + i];
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_bias");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (bias.numel() != d) throw DimensionError("add_row_bias: bias length mismatch");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.at(i * d + j) + bias.at(j);
  return make_result(x.shape(), std::move(out), {&x, &bias}, "add_row_bias", [rows, d](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (double* g = pgrad(n, 1))
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d; ++j) g[j] += n.grad[i * d + j];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  return b.defined() ? add_row_bias(y, b) : y;
}

// ---- feature maps ------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t groups) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d weight");
  const std::size_t cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (groups == 0 || cin % groups != 0 || cout % groups != 0)
    throw DimensionError("conv2d: channels " + std::to_string(cin) + "->" + std::to_string(cout) +
                         " not divisible by groups " + std::to_string(groups));
  if (w.dim(1) != cin / groups)
    throw DimensionError("conv2d: weight expects " + std::to_string(w.dim(1) * groups) +
                         " input channels, got " + std::to_string(cin));
  if (kh % 2 == 0 || kw % 2 == 0) throw DimensionError("conv2d: kernel extents must be odd");
  if (bias.defined() && bias.numel() != cout) throw DimensionError("conv2d: bias length mismatch");
  const kernels::ConvGeometry geo{cin, cout, H, W, kh, kw, groups};
  std::vector<double> out(cout * H * W);
  kernels::conv2d_forward(x.data(), w.data(),
                          bias.defined() ? bias.data() : std::span<const double>{}, out, geo);
  return make_result({cout, H, W}, std::move(out), {&x, &w, &bias}, "conv2d", [geo](TensorImpl& n) {
    const auto& xv = n.parents[0]->data;
    const auto& wv = n.parents[1]->data;
    if (double* g = pgrad(n, 0))
      kernels::conv2d_backward_input(n.grad, wv, {g, xv.size()}, geo);
    if (double* g = pgrad(n, 1))
      kernels::conv2d_backward_weight(n.grad, xv, {g, wv.size()}, geo);
    if (n.parents[2])
      if (double* g = pgrad(n, 2)) {
        const std::size_t hw = geo.height * geo.width;
        for (std::size_t oc = 0; oc < geo.out_channels; ++oc) {
          double s = 0.0;
          for (std::size_t i = 0; i < hw; ++i) s += n.grad[oc * hw + i];
          g[oc] += s;
        }
      }
  });
}

Tensor avg_pool2(const Tensor& x) {
  require_rank(x, 3, "avg_pool2");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % 2 || W % 2) throw DimensionError("avg_pool2: odd spatial dims " + shape_str(x.shape()));
  const std::size_t h = H / 2, w = W / 2;
  std::vector<double> out(C * h * w);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t b = (c * H + 2 * i) * W + 2 * j;
        out[(c * h + i) * w + j] = 0.25 * (x.at(b) + x.at(b + 1) + x.at(b + W) + x.at(b + W + 1));
      }
  return make_result({C, h, w}, std::move(out), {&x}, "avg_pool2", [C, H, W, h, w](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            const double v = 0.25 * n.grad[(c * h + i) * w + j];
            const std::size_t b = (c * H + 2 * i) * W + 2 * j;
            g[b] += v;
            g[b + 1] += v;
            g[b + W] += v;
            g[b + W + 1] += v;
          }
  });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  require_rank(x, 3, "upsample_nearest");
  if (factor == 0) throw DimensionError("upsample factor must be positive");
  if (factor == 1) return x;
  const std::size_t C = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t H = h * factor, W = w * factor;
  std::vector<double> out(C * H * W);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) out[(c * H + i) * W + j] = x.at((c * h + i / factor) * w + j / factor);
  return make_result({C, H, W}, std::move(out), {&x}, "upsample_nearest",
                     [C, H, W, h, w, factor](TensorImpl& n) {
                       if (double* g = pgrad(n, 0))
                         for (std::size_t c = 0; c < C; ++c)
                           for (std::size_t i = 0; i < H; ++i)
                             for (std::size_t j = 0; j < W; ++j)
                               g[(c * h + i / factor) * w + j / factor] += n.grad[(c * H + i) * W + j];
                     });
}

Tensor tokens_from_map(const Tensor& x) {
  require_rank(x, 3, "tokens_from_map");
  const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
  std::vector<double> out(C * HW);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < HW; ++p) out[p * C + c] = x.at(c * HW + p);
  return make_result({HW, C}, std::move(out), {&x}, "tokens_from_map", [C, HW](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < HW; ++p) g[c * HW + p] += n.grad[p * C + c];
  });
}

Tensor map_from_tokens(const Tensor& t, std::size_t h, std::size_t w) {
  require_rank(t, 2, "map_from_tokens");
  const std::size_t HW = t.dim(0), C = t.dim(1);
  if (HW != h * w) throw DimensionError("map_from_tokens: token count does not match grid");
  std::vector<double> out(C * HW);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < HW; ++p) out[c * HW + p] = t.at(p * C + c);
  return make_result({C, h, w}, std::move(out), {&t}, "map_from_tokens", [C, HW](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < HW; ++p) g[p * C + c] += n.grad[c * HW + p];
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
  std::vector<double> out(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t p = 0; p < HW; ++p) s += x.at(c * HW + p);
    out[c] = s / static_cast<double>(HW);
  }
  return make_result({1, C}, std::move(out), {&x}, "global_avg_pool", [C, HW](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t c = 0; c < C; ++c) {
        const double v = n.grad[c] / static_cast<double>(HW);
        for (std::size_t p = 0; p < HW; ++p) g[c * HW + p] += v;
      }
  });
}

// ---- normalisation / probabilities ----------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
  const auto [rows, d] = rows_cols(x);
  if (gamma.numel() != d || beta.numel() != d) throw DimensionError("layer_norm: affine length mismatch");
  std::vector<double> xhat(x.numel()), inv_std(rows), out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * inv_std[r];
      out[r * d + j] = gamma.at(j) * xhat[r * d + j] + beta.at(j);
    }
  }
  return make_result(x.shape(), std::move(out), {&x, &gamma, &beta}, "layer_norm",
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](TensorImpl& n) {
                       const auto& gv = n.parents[1]->data;
                       double* gx = pgrad(n, 0);
                       double* gg = pgrad(n, 1);
                       double* gb = pgrad(n, 2);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* go = n.grad.data() + r * d;
                         const double* xh = xhat.data() + r * d;
                         if (gg)
                           for (std::size_t j = 0; j < d; ++j) gg[j] += go[j] * xh[j];
                         if (gb)
                           for (std::size_t j = 0; j < d; ++j) gb[j] += go[j];
                         if (gx) {
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double gxh = go[j] * gv[j];
                             s1 += gxh;
                             s2 += gxh * xh[j];
                           }
                           const double dd = static_cast<double>(d);
                           for (std::size_t j = 0; j < d; ++j) {
                             const double gxh = go[j] * gv[j];
                             gx[r * d + j] += inv_std[r] * (gxh - s1 / dd - xh[j] * s2 / dd);
                           }
                         }
                       }
                     });
}

Tensor softmax(const Tensor& x) {
  const auto [rows, d] = rows_cols(x);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (out[r * d + j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= z;
  }
  return make_result(x.shape(), std::move(out), {&x}, "softmax", [rows, d](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.data.data() + r * d;
        const double* go = n.grad.data() + r * d;
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += go[j] * y[j];
        for (std::size_t j = 0; j < d; ++j) g[r * d + j] += y[j] * (go[j] - dot);
      }
  });
}

Tensor log_softmax(const Tensor& x) {
  const auto [rows, d] = rows_cols(x);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = xr[j] - lse;
  }
  return make_result(x.shape(), std::move(out), {&x}, "log_softmax", [rows, d](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t r = 0; r < rows; ++r) {
        const double* ly = n.data.data() + r * d;
        const double* go = n.grad.data() + r * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += go[j];
        for (std::size_t j = 0; j < d; ++j) g[r * d + j] += go[j] - std::exp(ly[j]) * s;
      }
  });
}

Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout rate must be in [0,1)");
  if (!train || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * mask[i];
  return make_result(x.shape(), std::move(out), {&x}, "dropout", [mask = std::move(mask)](TensorImpl& n) {
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * mask[i];
  });
}

// ---- losses ----------------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) throw DimensionError("cross_entropy: label count differs from batch");
  std::vector<double> probs(B * K);
  std::vector<int> lab(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    if (lab[r] < 0 || static_cast<std::size_t>(lab[r]) >= K)
      throw DimensionError("cross_entropy: label out of range");
    const double* xr = logits.data().data() + r * K;
    const double mx = *std::max_element(xr, xr + K);
    double z = 0.0;
    for (std::size_t j = 0; j < K; ++j) z += (probs[r * K + j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < K; ++j) probs[r * K + j] /= z;
    loss += -(xr[lab[r]] - mx - std::log(z));
  }
  loss /= static_cast<double>(B);
  return make_result({1}, {loss}, {&logits}, "cross_entropy",
                     [probs = std::move(probs), lab = std::move(lab), B, K](TensorImpl& n) {
                       if (double* g = pgrad(n, 0)) {
                         const double s = n.grad[0] / static_cast<double>(B);
                         for (std::size_t r = 0; r < B; ++r)
                           for (std::size_t j = 0; j < K; ++j)
                             g[r * K + j] += s * (probs[r * K + j] - (static_cast<int>(j) == lab[r] ? 1.0 : 0.0));
                       }
                     });
}

KlValue kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("kl_divergence: length mismatch");
  KlValue out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      out.infinite = true;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    out.value += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative residue for p ≈ q.
  if (out.value < 0.0) out.value = 0.0;
  return out;
}

Tensor kl_divergence(const Tensor& p, const Tensor& q) {
  require_same_shape(p, q, "kl_divergence");
  const auto [rows, k] = rows_cols(p);
  double total = 0.0;
  bool infinite = false;
  for (std::size_t r = 0; r < rows; ++r) {
    const KlValue v = kl_divergence(p.data().subspan(r * k, k), q.data().subspan(r * k, k));
    if (v.infinite) infinite = true;
    else total += v.value;
  }
  const double value = infinite ? std::numeric_limits<double>::infinity() : total / static_cast<double>(rows);
  return make_result({1}, {value}, {&p, &q}, "kl_divergence", [rows, k](TensorImpl& n) {
    const auto& pv = n.parents[0]->data;
    const auto& qv = n.parents[1]->data;
    const double s = n.grad[0] / static_cast<double>(rows);
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < rows * k; ++i)
        if (pv[i] > 0.0) g[i] += s * (std::log(pv[i] / qv[i]) + 1.0);
    if (double* g = pgrad(n, 1))
      for (std::size_t i = 0; i < rows * k; ++i)
        if (pv[i] > 0.0) g[i] -= s * pv[i] / qv[i];
  });
}

Tensor mse(const Tensor& a, const Tensor& b, double normalizer) {
  require_same_shape(a, b, "mse");
  if (!(normalizer > 0.0)) throw ParameterError("mse: normalizer must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double diff = a.at(i) - b.at(i);
    s += diff * diff;
  }
  return make_result({1}, {s / normalizer}, {&a, &b}, "mse", [normalizer](TensorImpl& n) {
    const auto& av = n.parents[0]->data;
    const auto& bv = n.parents[1]->data;
    const double s = 2.0 * n.grad[0] / normalizer;
    if (double* g = pgrad(n, 0))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += s * (av[i] - bv[i]);
    if (double* g = pgrad(n, 1))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] -= s * (av[i] - bv[i]);
  });
}

// ---- scans -----------------------------------------------------------------------

namespace {

void check_scan_params(std::size_t channels, const Tensor& a, const Tensor& b, const Tensor& c,
                       const Tensor& d, const char* op) {
  for (const Tensor* t : {&a, &b, &c, &d})
    if (t->numel() != channels)
      throw DimensionError(std::string(op) + ": parameter length " + std::to_string(t->numel()) +
                           " != channels " + std::to_string(channels));
  for (double v : a.data())
    if (!(v >= 0.0 && v < 1.0))
      throw ParameterError(std::string(op) + ": decay " + std::to_string(v) + " outside [0,1)");
}

BackwardFn scan_backward(std::function<void(TensorImpl&, std::span<double>, const kernels::ScanGrads&)> body) {
  return [body = std::move(body)](TensorImpl& n) {
    std::span<double> gx;
    if (double* g = pgrad(n, 0)) gx = {g, n.parents[0]->data.size()};
    kernels::ScanGrads gp;
    std::span<double>* slots[4] = {&gp.a, &gp.b, &gp.c, &gp.d};
    for (std::size_t k = 0; k < 4; ++k)
      if (double* g = pgrad(n, k + 1)) *slots[k] = {g, n.parents[k + 1]->data.size()};
    body(n, gx, gp);
  };
}

}  // namespace

Tensor ssm_scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d) {
  require_rank(x, 2, "ssm_scan");
  const std::size_t T = x.dim(0), C = x.dim(1);
  check_scan_params(C, a, b, c, d, "ssm_scan");
  std::vector<double> out(T * C);
  kernels::ssm_scan_forward(x.data(), {a.data(), b.data(), c.data(), d.data()}, out, T, C);
  return make_result({T, C}, std::move(out), {&x, &a, &b, &c, &d}, "ssm_scan",
                     scan_backward([T, C](TensorImpl& n, std::span<double> gx, const kernels::ScanGrads& gp) {
                       const kernels::ScanParams p{n.parents[1]->data, n.parents[2]->data,
                                                   n.parents[3]->data, n.parents[4]->data};
                       kernels::ssm_scan_backward(n.parents[0]->data, p, n.grad, gx, gp, T, C);
                     }));
}

Tensor es2d(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d) {
  require_rank(x, 3, "es2d");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % 2 || W % 2) throw DimensionError("es2d: spatial dims must be even, got " + shape_str(x.shape()));
  check_scan_params(C, a, b, c, d, "es2d");
  std::vector<double> out(C * H * W);
  kernels::es2d_forward(x.data(), {a.data(), b.data(), c.data(), d.data()}, out, C, H, W);
  return make_result({C, H, W}, std::move(out), {&x, &a, &b, &c, &d}, "es2d",
                     scan_backward([C, H, W](TensorImpl& n, std::span<double> gx, const kernels::ScanGrads& gp) {
                       const kernels::ScanParams p{n.parents[1]->data, n.parents[2]->data,
                                                   n.parents[3]->data, n.parents[4]->data};
                       kernels::es2d_backward(n.parents[0]->data, p, n.grad, gx, gp, C, H, W);
                     }));
}

}  // namespace ibiumad
