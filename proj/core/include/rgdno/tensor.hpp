#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace rgdno {

// Dense tensor of 64-bit floats with reverse-mode autodiff.
//
// The graph is define-by-run: every primitive executed while grad tracking
// is enabled records a node linking the result to its inputs. backward()
// walks that graph once in reverse topological order. Graphs are rebuilt on
// every forward pass; backward() may be called repeatedly on a live graph
// and recomputes all gradients from scratch each time.
//
// Forward evaluation with grad tracking off is pure and may run on many
// threads concurrently. A graph (and backward over it) is confined to the
// thread that built it.

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> values;
  const char* op = "leaf";
  bool requires_grad = false;
  std::vector<double> grad;
  bool grad_valid = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Accumulates d(loss)/d(parent) += f(d(loss)/d(self)) into parent grads.
  std::function<void(TensorImpl&)> backprop;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const;
  int dim(int i) const;
  std::int64_t numel() const;

  double* data();
  const double* data() const;
  const std::vector<double>& values() const&;
  const std::vector<double>& values() const&& = delete;  // would dangle
  double item() const;          // scalar tensors only
  double at(int i) const;
  double at(int i, int j) const;

  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const;
  // Gradient from the most recent backward(); zeros if this leaf was not on
  // any path to the loss.
  Tensor grad() const;
  void zero_grad();

  Tensor detach() const;  // same values, cut from the graph
  Tensor clone() const;   // deep value copy, fresh leaf

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local grad tracking switch.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Elementwise with right-aligned broadcasting (rank <= 2).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);
Tensor operator/(double a, const Tensor& b);

// {m,k}x{k,n}, {k}x{k,n} and {m,k}x{k}; BLAS-backed.
Tensor matmul(const Tensor& a, const Tensor& b);

// Fused y = act(x*W + b) for x {in} or {B,in}, W {in,out}, b {out}.
// One graph node per layer; skips weight-gradient work entirely when W and b
// are frozen, which is the hot path when optimizing noise through the
// sampler.
enum class Activation { kIdentity, kTanh };
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b,
              Activation act = Activation::kIdentity);

// Scalar reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Subgradient of max flows to the first maximal element (row-major order).
Tensor max(const Tensor& a);

Tensor slice(const Tensor& a, int dim, int start, int len);
Tensor concat(const std::vector<Tensor>& parts, int dim);
Tensor reshape(const Tensor& a, std::vector<int> shape);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
// Smooth max(a, lo): lo + softplus(sharpness*(a-lo))/sharpness.
Tensor clamp_min_soft(const Tensor& a, double lo, double sharpness);

// Reverse pass from a scalar loss. Throws ValidationError for a non-scalar
// loss and RuntimeFailure on the first non-finite gradient, naming the node.
void backward(const Tensor& loss);

// Throws RuntimeFailure naming `what` if any element is NaN or infinite.
void assert_all_finite(const Tensor& t, const char* what);

}  // namespace rgdno
