#include "rgdno/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include "rgdno/errors.hpp"

// Threaded BLAS reorders reductions; everything here must be bit-stable, so
// OpenBLAS is pinned to one thread and parallelism stays at the caller level.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace rgdno {

namespace {

thread_local bool t_grad_enabled = true;

void pin_blas_threads() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (openblas_set_num_threads) openblas_set_num_threads(1);
  });
}

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const std::vector<int>& a,
                              const std::vector<int>& b) {
  throw ValidationError(std::string(op) + ": incompatible shapes " +
                        shape_str(a) + " and " + shape_str(b));
}

std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values.resize(static_cast<std::size_t>(shape_numel(impl->shape)));
  return impl;
}

bool track(std::initializer_list<const Tensor*> inputs) {
  if (!t_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->impl()->requires_grad) return true;
  }
  return false;
}

// Broadcast geometry for rank <= 2 elementwise ops. Shapes are right
// aligned; a missing or size-1 dim repeats.
struct Broadcast {
  int rows = 1, cols = 1;          // output
  std::int64_t ar0 = 0, ac0 = 0;   // strides into a
  std::int64_t br0 = 0, bc0 = 0;   // strides into b
};

Broadcast broadcast_geometry(const char* op, const std::vector<int>& a,
                             const std::vector<int>& b) {
  if (a.size() > 2 || b.size() > 2) shape_error(op, a, b);
  const int ar = a.size() == 2 ? a[0] : 1;
  const int ac = a.empty() ? 1 : a.back();
  const int br = b.size() == 2 ? b[0] : 1;
  const int bc = b.empty() ? 1 : b.back();
  auto merge = [&](int x, int y) -> int {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    shape_error(op, a, b);
  };
  Broadcast g;
  g.rows = merge(ar, br);
  g.cols = merge(ac, bc);
  g.ar0 = (ar == 1) ? 0 : ac;
  g.ac0 = (ac == 1) ? 0 : 1;
  g.br0 = (br == 1) ? 0 : bc;
  g.bc0 = (bc == 1) ? 0 : 1;
  return g;
}

std::vector<int> broadcast_shape(const std::vector<int>& a,
                                 const std::vector<int>& b,
                                 const Broadcast& g) {
  if (a.size() == 2 || b.size() == 2) return {g.rows, g.cols};
  return {g.cols};
}

enum class BinOp { Add, Sub, Mul, Div };

const char* bin_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::Div: return "div";
  }
  return "?";
}

Tensor binary(BinOp op, const Tensor& a, const Tensor& b) {
  const char* name = bin_name(op);
  const auto g = broadcast_geometry(name, a.shape(), b.shape());
  auto out = make_impl(broadcast_shape(a.shape(), b.shape(), g));
  out->op = name;

  const double* av = a.data();
  const double* bv = b.data();
  double* ov = out->values.data();
  if (a.shape() == b.shape()) {  // tight loop for the common case
    const std::int64_t n = a.numel();
    switch (op) {
      case BinOp::Add: for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i]; break;
      case BinOp::Sub: for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i]; break;
      case BinOp::Mul: for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i]; break;
      case BinOp::Div: for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] / bv[i]; break;
    }
  } else {
    std::int64_t k = 0;
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c, ++k) {
        const double x = av[r * g.ar0 + c * g.ac0];
        const double y = bv[r * g.br0 + c * g.bc0];
        switch (op) {
          case BinOp::Add: ov[k] = x + y; break;
          case BinOp::Sub: ov[k] = x - y; break;
          case BinOp::Mul: ov[k] = x * y; break;
          case BinOp::Div: ov[k] = x / y; break;
        }
      }
    }
  }

  if (track({&a, &b})) {
    out->requires_grad = true;
    out->parents = {a.impl(), b.impl()};
    const Broadcast geo = g;
    out->backprop = [op, geo](TensorImpl& self) {
      TensorImpl& pa = *self.parents[0];
      TensorImpl& pb = *self.parents[1];
      const double* gv = self.grad.data();
      const double* av2 = pa.values.data();
      const double* bv2 = pb.values.data();
      std::int64_t k = 0;
      for (int r = 0; r < geo.rows; ++r) {
        for (int c = 0; c < geo.cols; ++c, ++k) {
          const std::int64_t ia = r * geo.ar0 + c * geo.ac0;
          const std::int64_t ib = r * geo.br0 + c * geo.bc0;
          const double gk = gv[k];
          switch (op) {
            case BinOp::Add:
              if (pa.requires_grad) pa.grad[ia] += gk;
              if (pb.requires_grad) pb.grad[ib] += gk;
              break;
            case BinOp::Sub:
              if (pa.requires_grad) pa.grad[ia] += gk;
              if (pb.requires_grad) pb.grad[ib] -= gk;
              break;
            case BinOp::Mul:
              if (pa.requires_grad) pa.grad[ia] += gk * bv2[ib];
              if (pb.requires_grad) pb.grad[ib] += gk * av2[ia];
              break;
            case BinOp::Div: {
              const double inv = 1.0 / bv2[ib];
              if (pa.requires_grad) pa.grad[ia] += gk * inv;
              if (pb.requires_grad) pb.grad[ib] -= gk * av2[ia] * inv * inv;
              break;
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor unary(const char* name, const Tensor& a, double (*f)(double),
             double (*df)(double x, double y)) {
  auto out = make_impl(a.shape());
  out->op = name;
  const double* av = a.data();
  double* ov = out->values.data();
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = f(av[i]);
  if (track({&a})) {
    out->requires_grad = true;
    out->parents = {a.impl()};
    out->backprop = [df](TensorImpl& self) {
      TensorImpl& p = *self.parents[0];
      if (!p.requires_grad) return;
      const std::int64_t m = static_cast<std::int64_t>(self.values.size());
      for (std::int64_t i = 0; i < m; ++i) {
        p.grad[i] += self.grad[i] * df(p.values[i], self.values[i]);
      }
    };
  }
  return Tensor(out);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  return Tensor(make_impl(std::move(shape)));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  auto impl = make_impl(std::move(shape));
  std::fill(impl->values.begin(), impl->values.end(), value);
  return Tensor(impl);
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  if (shape_numel(impl->shape) != static_cast<std::int64_t>(values.size())) {
    throw ValidationError("tensor: data length " +
                          std::to_string(values.size()) +
                          " does not match shape " + shape_str(impl->shape));
  }
  impl->values = std::move(values);
  return Tensor(impl);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(impl_->values.size());
}

double* Tensor::data() { return impl_->values.data(); }
const double* Tensor::data() const { return impl_->values.data(); }
const std::vector<double>& Tensor::values() const& { return impl_->values; }

double Tensor::item() const {
  if (!defined() || numel() != 1) {
    throw ValidationError("item: tensor is not a scalar");
  }
  return impl_->values[0];
}

double Tensor::at(int i) const { return impl_->values.at(static_cast<std::size_t>(i)); }
double Tensor::at(int i, int j) const {
  return impl_->values.at(static_cast<std::size_t>(i) * impl_->shape.at(1) + j);
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}
bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

Tensor Tensor::grad() const {
  auto g = make_impl(impl_->shape);
  if (impl_->grad_valid) g->values = impl_->grad;
  return Tensor(g);
}

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->values.size(), 0.0);
  impl_->grad_valid = true;
}

Tensor Tensor::detach() const {
  auto impl = make_impl(impl_->shape);
  impl->values = impl_->values;
  return Tensor(impl);
}

Tensor Tensor::clone() const { return detach(); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinOp::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(BinOp::Div, a, b); }

Tensor neg(const Tensor& a) {
  return unary("neg", a, [](double x) { return -x; },
               [](double, double) { return -1.0; });
}

Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  pin_blas_threads();
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  int m, k, n;
  bool a_vec = false, b_vec = false;
  if (sa.size() == 2 && sb.size() == 2) {
    m = sa[0]; k = sa[1]; n = sb[1];
    if (sb[0] != k) shape_error("matmul", sa, sb);
  } else if (sa.size() == 1 && sb.size() == 2) {
    a_vec = true;
    m = 1; k = sa[0]; n = sb[1];
    if (sb[0] != k) shape_error("matmul", sa, sb);
  } else if (sa.size() == 2 && sb.size() == 1) {
    b_vec = true;
    m = sa[0]; k = sa[1]; n = 1;
    if (sb[0] != k) shape_error("matmul", sa, sb);
  } else {
    shape_error("matmul", sa, sb);
  }

  std::vector<int> out_shape;
  if (a_vec) out_shape = {n};
  else if (b_vec) out_shape = {m};
  else out_shape = {m, n};
  auto out = make_impl(std::move(out_shape));
  out->op = "matmul";

  if (m == 1) {
    cblas_dgemv(CblasRowMajor, CblasTrans, k, n, 1.0, b.data(), n, a.data(),
                1, 0.0, out->values.data(), 1);
  } else if (n == 1) {
    cblas_dgemv(CblasRowMajor, CblasNoTrans, m, k, 1.0, a.data(), k, b.data(),
                1, 0.0, out->values.data(), 1);
  } else {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0,
                a.data(), k, b.data(), n, 0.0, out->values.data(), n);
  }

  if (track({&a, &b})) {
    out->requires_grad = true;
    out->parents = {a.impl(), b.impl()};
    out->backprop = [m, k, n](TensorImpl& self) {
      TensorImpl& pa = *self.parents[0];
      TensorImpl& pb = *self.parents[1];
      const double* g = self.grad.data();
      // dA += G * B^T, dB += A^T * G (beta=1 accumulates).
      if (pa.requires_grad) {
        if (m == 1) {
          cblas_dgemv(CblasRowMajor, CblasNoTrans, k, n, 1.0,
                      pb.values.data(), n, g, 1, 1.0, pa.grad.data(), 1);
        } else if (n == 1) {
          cblas_dger(CblasRowMajor, m, k, 1.0, g, 1, pb.values.data(), 1,
                     pa.grad.data(), k);
        } else {
          cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, n, 1.0,
                      g, n, pb.values.data(), n, 1.0, pa.grad.data(), k);
        }
      }
      if (pb.requires_grad) {
        if (m == 1) {
          cblas_dger(CblasRowMajor, k, n, 1.0, pa.values.data(), 1, g, 1,
                     pb.grad.data(), n);
        } else if (n == 1) {
          cblas_dgemv(CblasRowMajor, CblasTrans, m, k, 1.0, pa.values.data(),
                      k, g, 1, 1.0, pb.grad.data(), 1);
        } else {
          cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, m, 1.0,
                      pa.values.data(), k, g, n, 1.0, pb.grad.data(), n);
        }
      }
    };
  }
  return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b,
              Activation act) {
  pin_blas_threads();
  const auto& sx = x.shape();
  const auto& sw = w.shape();
  const auto& sb = b.shape();
  if (sw.size() != 2 || sb.size() != 1 || sb[0] != sw[1]) {
    shape_error("linear", sw, sb);
  }
  const int in = sw[0];
  const int out = sw[1];
  const bool batched = sx.size() == 2;
  const int batch = batched ? sx[0] : 1;
  if ((batched ? sx[1] : (sx.size() == 1 ? sx[0] : -1)) != in) {
    shape_error("linear", sx, sw);
  }

  auto o = make_impl(batched ? std::vector<int>{batch, out}
                             : std::vector<int>{out});
  o->op = act == Activation::kTanh ? "linear_tanh" : "linear";
  double* ov = o->values.data();
  for (int r = 0; r < batch; ++r) {
    std::memcpy(ov + static_cast<std::int64_t>(r) * out, b.data(),
                sizeof(double) * static_cast<std::size_t>(out));
  }
  if (batch == 1) {  // dgemv kernel is much faster than M=1 dgemm
    cblas_dgemv(CblasRowMajor, CblasTrans, in, out, 1.0, w.data(), out,
                x.data(), 1, 1.0, ov, 1);
  } else {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, batch, out, in, 1.0,
                x.data(), in, w.data(), out, 1.0, ov, out);
  }
  if (act == Activation::kTanh) {
    const std::int64_t n = o->values.size();
    for (std::int64_t i = 0; i < n; ++i) ov[i] = std::tanh(ov[i]);
  }

  if (track({&x, &w, &b})) {
    o->requires_grad = true;
    o->parents = {x.impl(), w.impl(), b.impl()};
    o->backprop = [in, out, batch, act](TensorImpl& self) {
      TensorImpl& px = *self.parents[0];
      TensorImpl& pw = *self.parents[1];
      TensorImpl& pb = *self.parents[2];
      const std::int64_t n = static_cast<std::int64_t>(self.values.size());
      // d(pre-activation); for identity this is just the incoming grad.
      const double* dpre = self.grad.data();
      std::vector<double> buf;
      if (act == Activation::kTanh) {
        buf.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
          const double y = self.values[i];
          buf[static_cast<std::size_t>(i)] = self.grad[i] * (1.0 - y * y);
        }
        dpre = buf.data();
      }
      if (px.requires_grad) {
        if (batch == 1) {
          cblas_dgemv(CblasRowMajor, CblasNoTrans, in, out, 1.0,
                      pw.values.data(), out, dpre, 1, 1.0, px.grad.data(), 1);
        } else {
          cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, batch, in, out,
                      1.0, dpre, out, pw.values.data(), out, 1.0,
                      px.grad.data(), in);
        }
      }
      if (pw.requires_grad) {
        if (batch == 1) {
          cblas_dger(CblasRowMajor, in, out, 1.0, px.values.data(), 1, dpre,
                     1, pw.grad.data(), out);
        } else {
          cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, in, out, batch,
                      1.0, px.values.data(), in, dpre, out, 1.0,
                      pw.grad.data(), out);
        }
      }
      if (pb.requires_grad) {
        for (int r = 0; r < batch; ++r) {
          const double* row = dpre + static_cast<std::int64_t>(r) * out;
          for (int c = 0; c < out; ++c) pb.grad[static_cast<std::size_t>(c)] += row[c];
        }
      }
    };
  }
  return Tensor(o);
}

Tensor sum(const Tensor& a) {
  auto out = make_impl({1});
  out->op = "sum";
  double s = 0.0;
  for (double v : a.values()) s += v;
  out->values[0] = s;
  if (track({&a})) {
    out->requires_grad = true;
    out->parents = {a.impl()};
    out->backprop = [](TensorImpl& self) {
      TensorImpl& p = *self.parents[0];
      if (!p.requires_grad) return;
      const double g = self.grad[0];
      for (double& pg : p.grad) pg += g;
    };
  }
  return Tensor(out);
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ValidationError("mean: empty tensor");
  return sum(a) / static_cast<double>(a.numel());
}

Tensor max(const Tensor& a) {
  if (a.numel() == 0) throw ValidationError("max: empty tensor");
  auto out = make_impl({1});
  out->op = "max";
  const auto& v = a.values();
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[arg]) arg = i;
  }
  out->values[0] = v[arg];
  if (track({&a})) {
    out->requires_grad = true;
    out->parents = {a.impl()};
    out->backprop = [arg](TensorImpl& self) {
      TensorImpl& p = *self.parents[0];
      if (p.requires_grad) p.grad[arg] += self.grad[0];
    };
  }
  return Tensor(out);
}

Tensor slice(const Tensor& a, int dim, int start, int len) {
  const auto& s = a.shape();
  if (dim < 0 || dim >= static_cast<int>(s.size()) || start < 0 || len <= 0 ||
      start + len > s[static_cast<std::size_t>(dim)]) {
    throw ValidationError("slice: range [" + std::to_string(start) + "," +
                          std::to_string(start + len) + ") of dim " +
                          std::to_string(dim) + " out of bounds for " +
                          shape_str(s));
  }
  std::vector<int> out_shape = s;
  out_shape[static_cast<std::size_t>(dim)] = len;
  auto out = make_impl(out_shape);
  out->op = "slice";

  const int rows = s.size() == 2 ? s[0] : 1;
  const int cols = s.back();
  const double* av = a.data();
  double* ov = out->values.data();
  int r0 = 0, r1 = rows, c0 = 0, c1 = cols;
  if (s.size() == 2 && dim == 0) { r0 = start; r1 = start + len; }
  else { c0 = start; c1 = start + len; }
  std::int64_t k = 0;
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c, ++k) ov[k] = av[static_cast<std::int64_t>(r) * cols + c];

  if (track({&a})) {
    out->requires_grad = true;
    out->parents = {a.impl()};
    out->backprop = [r0, r1, c0, c1, cols](TensorImpl& self) {
      TensorImpl& p = *self.parents[0];
      if (!p.requires_grad) return;
      std::int64_t k2 = 0;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c, ++k2)
          p.grad[static_cast<std::size_t>(r) * cols + c] += self.grad[k2];
    };
  }
  return Tensor(out);
}

Tensor concat(const std::vector<Tensor>& parts, int dim) {
  if (parts.empty()) throw ValidationError("concat: no inputs");
  const auto& s0 = parts[0].shape();
  const int rank = static_cast<int>(s0.size());
  if (dim < 0 || dim >= rank) throw ValidationError("concat: bad dim");
  std::vector<int> out_shape = s0;
  int total = 0;
  for (const auto& p : parts) {
    const auto& sp = p.shape();
    if (static_cast<int>(sp.size()) != rank) shape_error("concat", s0, sp);
    for (int d = 0; d < rank; ++d) {
      if (d != dim && sp[static_cast<std::size_t>(d)] != s0[static_cast<std::size_t>(d)])
        shape_error("concat", s0, sp);
    }
    total += sp[static_cast<std::size_t>(dim)];
  }
  out_shape[static_cast<std::size_t>(dim)] = total;
  auto out = make_impl(out_shape);
  out->op = "concat";

  const int out_cols = out_shape.back();
  const int out_rows = rank == 2 ? out_shape[0] : 1;
  double* ov = out->values.data();
  std::vector<std::pair<int, int>> spans;  // (row offset, col offset) per part
  {
    int off = 0;
    for (const auto& p : parts) {
      const auto& sp = p.shape();
      const int prows = rank == 2 ? sp[0] : 1;
      const int pcols = sp.back();
      const int ro = (rank == 2 && dim == 0) ? off : 0;
      const int co = (dim == rank - 1) ? ((rank == 2 && dim == 0) ? 0 : off) : 0;
      spans.emplace_back(ro, co);
      const double* pv = p.data();
      for (int r = 0; r < prows; ++r)
        for (int c = 0; c < pcols; ++c)
          ov[static_cast<std::int64_t>(r + ro) * out_cols + (c + co)] =
              pv[static_cast<std::int64_t>(r) * pcols + c];
      off += sp[static_cast<std::size_t>(dim)];
    }
  }
  (void)out_rows;

  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (t_grad_enabled && any) {
    out->requires_grad = true;
    for (const auto& p : parts) out->parents.push_back(p.impl());
    out->backprop = [spans, out_cols](TensorImpl& self) {
      for (std::size_t i = 0; i < self.parents.size(); ++i) {
        TensorImpl& p = *self.parents[i];
        if (!p.requires_grad) continue;
        const int prows = p.shape.size() == 2 ? p.shape[0] : 1;
        const int pcols = p.shape.back();
        const auto [ro, co] = spans[i];
        for (int r = 0; r < prows; ++r)
          for (int c = 0; c < pcols; ++c)
            p.grad[static_cast<std::size_t>(r) * pcols + c] +=
                self.grad[static_cast<std::size_t>(r + ro) * out_cols + (c + co)];
      }
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.numel()) {
    shape_error("reshape", a.shape(), shape);
  }
  auto out = std::make_shared<TensorImpl>();
  out->shape = std::move(shape);
  out->values = a.values();
  out->op = "reshape";
  if (track({&a})) {
    out->requires_grad = true;
    out->parents = {a.impl()};
    out->backprop = [](TensorImpl& self) {
      TensorImpl& p = *self.parents[0];
      if (!p.requires_grad) return;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, &stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sin(const Tensor& a) {
  return unary("sin", a, [](double x) { return std::sin(x); },
               [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary("cos", a, [](double x) { return std::cos(x); },
               [](double x, double) { return -std::sin(x); });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary("softplus", a, &stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor clamp_min_soft(const Tensor& a, double lo, double sharpness) {
  return softplus((a - lo) * sharpness) / sharpness + lo;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ValidationError("backward: undefined loss");
  if (loss.numel() != 1) {
    throw ValidationError("backward: loss must be scalar, got shape " +
                          shape_str(loss.shape()));
  }
  if (!loss.impl()->requires_grad) return;  // constant loss: nothing to do

  // Reverse topological order via iterative DFS.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.impl().get(), 0});
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorImpl* n : order) {
    n->grad.assign(n->values.size(), 0.0);
    n->grad_valid = true;
  }
  loss.impl()->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    for (double g : n->grad) {
      if (!std::isfinite(g)) {
        throw RuntimeFailure(std::string("backward: non-finite gradient at node '") +
                             n->op + "'");
      }
    }
    if (n->backprop) n->backprop(*n);
  }
}

void assert_all_finite(const Tensor& t, const char* what) {
  const auto& v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw RuntimeFailure(std::string(what) + ": non-finite value at index " +
                           std::to_string(i));
    }
  }
}

}  // namespace rgdno
