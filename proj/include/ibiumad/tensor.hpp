#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ibiumad/errors.hpp"
#include "ibiumad/rng.hpp"

namespace ibiumad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// Backward closure: reads node.grad and accumulates into node.parents[i]->grad.
using BackwardFn = std::function<void(TensorImpl& node)>;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Dense row-major float64 tensor with reverse-mode autodiff.
///
/// Tensors are cheap handles; copies share storage. Every op that sees an
/// input with requires_grad records itself on the output node, and
/// backward() replays the recorded nodes in reverse topological order,
/// visiting each exactly once.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double at(std::size_t flat) const { return data()[flat]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  /// Populates grads of every requires_grad tensor reachable from this scalar.
  void backward() const;

  Tensor detach() const;   // shares nothing; no history
  Tensor clone() const;    // copy of data, same requires_grad, no history
  std::uint64_t id() const;
  const char* op() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Disables graph recording on this thread while alive.
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

/// Finite-difference aid. While alive, the first pass through stop_gradient
/// on this thread records every value; after rewind() each call returns the
/// recorded constant instead, so a perturbed forward sees the stopped
/// branches exactly as the analytic pass did.
class FrozenStopGradients {
 public:
  FrozenStopGradients();
  ~FrozenStopGradients();
  FrozenStopGradients(const FrozenStopGradients&) = delete;
  FrozenStopGradients& operator=(const FrozenStopGradients&) = delete;

  void rewind() { cursor_ = 0; }
  Tensor next(const Tensor& x);

 private:
  std::vector<Tensor> values_;
  std::size_t cursor_ = 0;
  FrozenStopGradients* previous_;
};

// ---- elementwise / shape ops -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor square(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor stop_gradient(const Tensor& x);

/// Concatenate along `axis`; all other extents must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// ---- linear algebra -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);  // 2-D only
/// x[N×D] + bias[D] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// x[N×Din] · w[Din×Dout] + b[Dout]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- feature maps (C×H×W) ---------------------------------------------------------

/// Cross-correlation with "same" zero padding; w is [Cout × Cin/groups × kh × kw], kh/kw odd.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t groups = 1);
Tensor avg_pool2(const Tensor& x);                      // 2× down
Tensor upsample_nearest(const Tensor& x, std::size_t factor);
Tensor tokens_from_map(const Tensor& x);                // C×H×W -> (H·W)×C
Tensor map_from_tokens(const Tensor& t, std::size_t h, std::size_t w);  // (H·W)×C -> C×H×W
Tensor global_avg_pool(const Tensor& x);                // C×H×W -> 1×C

// ---- normalisation / probabilities -------------------------------------------------

/// Normalises each row over the last dimension, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax(const Tensor& x);      // over last dim
Tensor log_softmax(const Tensor& x);  // over last dim
Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);

// ---- losses --------------------------------------------------------------------

/// Mean over the batch of -log softmax(logits)[label]. logits is B×K.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

struct KlValue {
  double value = 0.0;
  bool infinite = false;  // p > 0 where q == 0
};
/// KL(p || q) = sum p log(p/q) with 0·log(0/q) = 0.
KlValue kl_divergence(std::span<const double> p, std::span<const double> q);
/// Batch-mean KL between row distributions p[B×K] and q[B×K]. Returns +inf when
/// any row violates the support condition.
Tensor kl_divergence(const Tensor& p, const Tensor& q);

/// sum (a - b)^2 / normalizer
Tensor mse(const Tensor& a, const Tensor& b, double normalizer);

// ---- state-space scans ---------------------------------------------------------------

/// Per-channel diagonal linear recurrence over a T×C sequence:
///   h_t = a·h_{t-1} + b·x_t,  y_t = c·h_t + d·x_t,  h_0 = 0.
/// a must lie in [0, 1).
Tensor ssm_scan(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d);

/// Four-direction scan over the four stride-2 sub-grids of a C×H×W map,
/// direction outputs averaged and re-interleaved. H and W must be even.
Tensor es2d(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c, const Tensor& d);

}  // namespace ibiumad
