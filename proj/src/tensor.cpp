#include "scagiqa/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "scagiqa/errors.hpp"

namespace scagiqa {

namespace detail {

struct Node {
  Shape dims;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

NodePtr new_node(Shape dims, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->dims = std::move(dims);
  n->value = std::move(value);
  n->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

std::size_t normalize_axis(int axis, std::size_t ndim) {
  const int n = static_cast<int>(ndim);
  if (axis < -n || axis >= n) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + std::to_string(ndim) +
                     "-d tensor");
  }
  return static_cast<std::size_t>(axis < 0 ? axis + n : axis);
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-d tensor, got " + shape_str(t.dims()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims()) + " vs " +
                     shape_str(b.dims()));
  }
}

}  // namespace

struct TensorAccess {
  static const NodePtr& node(const Tensor& t) {
    if (!t.node_) throw ShapeError("use of undefined tensor");
    return t.node_;
  }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }

  /// Builds an op result. Graph edges are kept only when some input is tracked.
  static Tensor make(Shape dims, std::vector<double> value, std::vector<NodePtr> parents,
                     std::function<void(Node&)> bw) {
    auto n = new_node(std::move(dims), std::move(value));
    if (t_grad_enabled) {
      const bool tracked = std::any_of(parents.begin(), parents.end(),
                                       [](const NodePtr& p) { return p->requires_grad; });
      if (tracked) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward = std::move(bw);
      }
    }
    return Tensor(std::move(n));
  }
};

namespace {

const NodePtr& N(const Tensor& t) { return TensorAccess::node(t); }

// Gradient sink for parent i, or nullptr when that parent is untracked.
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

}  // namespace

std::size_t shape_size(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

// ---- Tensor ------------------------------------------------------------------

Tensor Tensor::from(Shape dims, std::vector<double> values, bool requires_grad) {
  if (dims.empty()) throw ShapeError("tensor needs at least one dimension");
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(dims));
  }
  if (shape_size(dims) != values.size()) {
    throw ShapeError("shape " + shape_str(dims) + " needs " + std::to_string(shape_size(dims)) +
                     " values, got " + std::to_string(values.size()));
  }
  auto n = new_node(std::move(dims), std::move(values));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape dims, bool requires_grad) { return full(std::move(dims), 0.0, requires_grad); }

Tensor Tensor::full(Shape dims, double value, bool requires_grad) {
  const auto n = shape_size(dims);
  return from(std::move(dims), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::dims() const { return N(*this)->dims; }
std::size_t Tensor::size() const { return N(*this)->value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& d = dims();
  if (axis >= d.size()) throw ShapeError("dim index out of range");
  return d[axis];
}

std::span<const double> Tensor::data() const { return N(*this)->value; }
std::span<double> Tensor::mutable_data() { return N(*this)->value; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(dims()));
  return data()[0];
}

double Tensor::at(std::size_t i) const { return data()[i]; }
double Tensor::at(std::size_t i, std::size_t j) const { return data()[i * dims()[1] + j]; }
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  const auto& d = dims();
  return data()[(i * d[1] + j) * d[2] + k];
}

bool Tensor::requires_grad() const { return N(*this)->requires_grad; }
void Tensor::set_requires_grad(bool on) { N(*this)->requires_grad = on; }

bool Tensor::has_grad() const { return !N(*this)->grad.empty(); }
std::span<const double> Tensor::grad() const { return N(*this)->grad; }
std::span<double> Tensor::mutable_grad() {
  N(*this)->ensure_grad();
  return N(*this)->grad;
}

void Tensor::zero_grad() {
  auto& n = *N(*this);
  n.grad.assign(n.value.size(), 0.0);
}

Tensor Tensor::detach() const { return from(dims(), N(*this)->value, false); }

// ---- grad mode -----------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() noexcept { return t_grad_enabled; }

void backward(const Tensor& loss) {
  const NodePtr& root = N(loss);
  if (root->value.size() != 1) {
    throw ShapeError("backward() needs a one-element loss, got " + shape_str(root->dims));
  }
  if (!root->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  // Reverse creation order is a valid topological order of a define-by-run graph.
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---- linear algebra ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), r = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dims disagree " + shape_str(a.dims()) + " x " + shape_str(b.dims()));
  }
  std::vector<double> out(m * r);
  MapMat(out.data(), m, r).noalias() = CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, r);
  return TensorAccess::make({m, r}, std::move(out), {N(a), N(b)}, [m, k, r](Node& self) {
    CMapMat g(self.grad.data(), m, r);
    const Node& pa = *self.parents[0];
    const Node& pb = *self.parents[1];
    if (double* ga = grad_of(self, 0)) {
      MapMat(ga, m, k).noalias() += g * CMapMat(pb.value.data(), k, r).transpose();
    }
    if (double* gb = grad_of(self, 1)) {
      MapMat(gb, k, r).noalias() += CMapMat(pa.value.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  MapMat(out.data(), n, m) = CMapMat(a.data().data(), m, n).transpose();
  return TensorAccess::make({n, m}, std::move(out), {N(a)}, [m, n](Node& self) {
    if (double* ga = grad_of(self, 0)) {
      MapMat(ga, m, n) += CMapMat(self.grad.data(), n, m).transpose();
    }
  });
}

Tensor reshape(const Tensor& a, Shape dims) {
  if (shape_size(dims) != a.size() || dims.empty()) {
    throw ShapeError("reshape " + shape_str(a.dims()) + " -> " + shape_str(dims));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return TensorAccess::make(std::move(dims), std::move(out), {N(a)}, [](Node& self) {
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
  });
}

// ---- elementwise ---------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return TensorAccess::make(a.dims(), std::move(out), {N(a), N(b)}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return TensorAccess::make(a.dims(), std::move(out), {N(a), N(b)}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return TensorAccess::make(a.dims(), std::move(out), {N(a), N(b)}, [](Node& self) {
    const auto& va = self.parents[0]->value;
    const auto& vb = self.parents[1]->value;
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * vb[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * va[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return TensorAccess::make(a.dims(), std::move(out), {N(a)}, [factor](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + offset;
  return TensorAccess::make(a.dims(), std::move(out), {N(a)}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_2d(a, "add_row");
  const auto m = a.dim(0), n = a.dim(1);
  if (row.size() != n) throw ShapeError("add_row: row length " + std::to_string(row.size()) + " != " + std::to_string(n));
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] + row.data()[j];
  return TensorAccess::make({m, n}, std::move(out), {N(a), N(row)}, [m, n](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  require_2d(a, "mul_row");
  const auto m = a.dim(0), n = a.dim(1);
  if (row.size() != n) throw ShapeError("mul_row: row length " + std::to_string(row.size()) + " != " + std::to_string(n));
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] * row.data()[j];
  return TensorAccess::make({m, n}, std::move(out), {N(a), N(row)}, [m, n](Node& self) {
    const auto& va = self.parents[0]->value;
    const auto& vr = self.parents[1]->value;
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * vr[j];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * va[i * n + j];
    }
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  require_2d(a, "mul_col");
  const auto m = a.dim(0), n = a.dim(1);
  if (col.size() != m) throw ShapeError("mul_col: column length " + std::to_string(col.size()) + " != " + std::to_string(m));
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] * col.data()[i];
  return TensorAccess::make({m, n}, std::move(out), {N(a), N(col)}, [m, n](Node& self) {
    const auto& va = self.parents[0]->value;
    const auto& vc = self.parents[1]->value;
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * vc[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad[i * n + j] * va[i * n + j];
    }
  });
}

// ---- nonlinearities --------------------------------------------------------------------

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    if (v >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return TensorAccess::make(x.dims(), std::move(out), {N(x)}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double s = self.value[i];
        g[i] += self.grad[i] * s * (1.0 - s);
      }
    }
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  }
  return TensorAccess::make(x.dims(), std::move(out), {N(x)}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      const auto& vx = self.parents[0]->value;
      const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double v = vx[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        g[i] += self.grad[i] * (cdf + v * pdf);
      }
    }
  });
}

namespace {

struct AxisLayout {
  std::size_t outer, n, inner;
};

AxisLayout layout_for(const Shape& dims, std::size_t axis) {
  AxisLayout l{1, dims[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) l.inner *= dims[i];
  return l;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const auto ax = normalize_axis(axis, x.ndim());
  const auto l = layout_for(x.dims(), ax);
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      auto idx = [&](std::size_t k) { return (o * l.n + k) * l.inner + in; };
      double mx = v[idx(0)];
      for (std::size_t k = 1; k < l.n; ++k) mx = std::max(mx, v[idx(k)]);
      double total = 0.0;
      for (std::size_t k = 0; k < l.n; ++k) {
        out[idx(k)] = std::exp(v[idx(k)] - mx);
        total += out[idx(k)];
      }
      for (std::size_t k = 0; k < l.n; ++k) out[idx(k)] /= total;
    }
  }
  return TensorAccess::make(x.dims(), std::move(out), {N(x)}, [l](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        auto idx = [&](std::size_t k) { return (o * l.n + k) * l.inner + in; };
        double dot = 0.0;
        for (std::size_t k = 0; k < l.n; ++k) dot += self.grad[idx(k)] * self.value[idx(k)];
        for (std::size_t k = 0; k < l.n; ++k) {
          g[idx(k)] += self.value[idx(k)] * (self.grad[idx(k)] - dot);
        }
      }
    }
  });
}

Tensor mean_pool(const Tensor& x, int axis) {
  const auto ax = normalize_axis(axis, x.ndim());
  const auto l = layout_for(x.dims(), ax);
  Shape out_dims;
  for (std::size_t i = 0; i < x.ndim(); ++i) {
    if (i != ax) out_dims.push_back(x.dims()[i]);
  }
  if (out_dims.empty()) out_dims.push_back(1);
  std::vector<double> out(l.outer * l.inner, 0.0);
  const auto& v = x.data();
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t k = 0; k < l.n; ++k)
      for (std::size_t in = 0; in < l.inner; ++in) out[o * l.inner + in] += v[(o * l.n + k) * l.inner + in];
  const double inv = 1.0 / static_cast<double>(l.n);
  for (auto& e : out) e *= inv;
  return TensorAccess::make(std::move(out_dims), std::move(out), {N(x)}, [l, inv](Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t k = 0; k < l.n; ++k)
        for (std::size_t in = 0; in < l.inner; ++in)
          g[(o * l.n + k) * l.inner + in] += self.grad[o * l.inner + in] * inv;
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return TensorAccess::make({1}, {total}, {N(x)}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      const auto n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_2d(x, "layer_norm");
  const auto m = x.dim(0), n = x.dim(1);
  if (gamma.size() != n || beta.size() != n) throw ShapeError("layer_norm: affine length mismatch");
  std::vector<double> out(m * n), xhat(m * n), rstd(m);
  const auto& v = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += v[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = v[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (v[i * n + j] - mean) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gamma.data()[j] + beta.data()[j];
    }
  }
  return TensorAccess::make(
      {m, n}, std::move(out), {N(x), N(gamma), N(beta)},
      [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const auto& gam = self.parents[1]->value;
        if (double* gg = grad_of(self, 1)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += self.grad[i * n + j] * xhat[i * n + j];
        }
        if (double* gb = grad_of(self, 2)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad[i * n + j];
        }
        if (double* gx = grad_of(self, 0)) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = self.grad[i * n + j] * gam[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = self.grad[i * n + j] * gam[j];
              gx[i * n + j] += rstd[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      });
}

// ---- structural ----------------------------------------------------------------------

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].dims();
  const std::size_t nd = first.size();
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < nd; ++i) rows *= first[i];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& d = p.dims();
    if (d.size() != nd || !std::equal(d.begin(), d.end() - 1, first.begin())) {
      throw ShapeError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(d));
    }
    widths.push_back(d.back());
    total += d.back();
  }
  std::vector<double> out(rows * total);
  std::vector<NodePtr> parents;
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.begin() + r * widths[p], widths[p], out.begin() + r * total + off);
    off += widths[p];
    parents.push_back(N(parts[p]));
  }
  Shape out_dims = first;
  out_dims.back() = total;
  return TensorAccess::make(std::move(out_dims), std::move(out), std::move(parents),
                            [rows, total, widths](Node& self) {
                              std::size_t off = 0;
                              for (std::size_t p = 0; p < widths.size(); ++p) {
                                if (double* g = grad_of(self, p)) {
                                  for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t c = 0; c < widths[p]; ++c)
                                      g[r * widths[p] + c] += self.grad[r * total + off + c];
                                }
                                off += widths[p];
                              }
                            });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_2d(a, "slice_cols");
  const auto m = a.dim(0), n = a.dim(1);
  if (count == 0 || start + count > n) throw ShapeError("slice_cols: range out of bounds");
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.data().begin() + i * n + start, count, out.begin() + i * count);
  return TensorAccess::make({m, count}, std::move(out), {N(a)}, [m, n, start, count](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < count; ++c) g[i * n + start + c] += self.grad[i * count + c];
    }
  });
}

Tensor gather(const Tensor& a, std::span<const std::size_t> indices) {
  if (a.ndim() != 1) throw ShapeError("gather: expected 1-d tensor");
  if (indices.empty()) throw ShapeError("gather: empty index list");
  std::vector<double> out;
  for (auto i : indices) {
    if (i >= a.size()) throw ShapeError("gather: index out of range");
    out.push_back(a.data()[i]);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return TensorAccess::make({idx.size()}, std::move(out), {N(a)}, [idx](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] += self.grad[k];
    }
  });
}

Tensor div_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("div_scalar: divisor must have one element");
  const double d = s.data()[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / d;
  return TensorAccess::make(a.dims(), std::move(out), {N(a), N(s)}, [](Node& self) {
    const double d = self.parents[1]->value[0];
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / d;
    }
    if (double* g = grad_of(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * self.value[i];
      g[0] -= acc / d;
    }
  });
}

Tensor smooth_l1_loss(const Tensor& pred, std::span<const double> target, double beta) {
  if (pred.size() != target.size()) throw ShapeError("smooth_l1_loss: length mismatch");
  if (pred.size() == 0) throw ShapeError("smooth_l1_loss: empty input");
  if (!(beta > 0)) throw ShapeError("smooth_l1_loss: beta must be positive");
  const auto n = pred.size();
  double total = 0.0;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = pred.data()[i] - target[i];
    const double ad = std::abs(diff[i]);
    total += ad < beta ? 0.5 * diff[i] * diff[i] : ad - 0.5 * beta;
  }
  total /= static_cast<double>(n);
  return TensorAccess::make({1}, {total}, {N(pred)}, [diff = std::move(diff), beta](Node& self) {
    if (double* g = grad_of(self, 0)) {
      const double inv_n = 1.0 / static_cast<double>(diff.size());
      for (std::size_t i = 0; i < diff.size(); ++i) {
        const double d = diff[i];
        const double dl = std::abs(d) < beta ? d : (d > 0 ? 1.0 : -1.0);
        g[i] += self.grad[0] * dl * inv_n;
      }
    }
  });
}

}  // namespace scagiqa
