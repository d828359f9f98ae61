#pragma once

// Dense 64-bit tensors with define-by-run reverse-mode differentiation.
//
// Every op records its inputs and a backward closure on the result node. The
// graph lives as long as the result handle; backward() walks the reachable
// nodes in reverse creation order, so gradient accumulation order is fixed
// and repeated runs are bitwise identical.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scagiqa {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);
std::string shape_str(const Shape& dims);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  /// Row-major tensor from explicit values. Throws ShapeError on length mismatch.
  static Tensor from(Shape dims, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape dims, bool requires_grad = false);
  static Tensor full(Shape dims, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& dims() const;
  std::size_t ndim() const { return dims().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const;
  /// Mutable view of the values. Only meant for leaves (parameters, optimizer).
  std::span<double> mutable_data();

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient buffer; empty span when no gradient has been allocated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Allocates (if needed) and zeroes the gradient buffer.
  void zero_grad();

  /// Copy of the values as an untracked leaf.
  Tensor detach() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend struct TensorAccess;

  std::shared_ptr<detail::Node> node_;
};

/// While alive, new ops on this thread do not record graph edges.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Populates gradients of every tracked tensor reachable from a one-element loss.
/// Gradients accumulate into existing buffers.
void backward(const Tensor& loss);

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape dims);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

/// a[M×N] + row[N], broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a[M×N] ⊙ row[N], broadcast over rows.
Tensor mul_row(const Tensor& a, const Tensor& row);
/// a[M×N] ⊙ col[M] (or [M×1]), broadcast over columns.
Tensor mul_col(const Tensor& a, const Tensor& col);

Tensor sigmoid(const Tensor& x);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
/// Mean along an axis; the axis is removed from the shape (a 1-D input yields shape [1]).
Tensor mean_pool(const Tensor& x, int axis);
/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);

/// Row-wise layer normalization of x[M×N] with affine gamma[N], beta[N].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Concatenation along the last axis. All parts share leading dims.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Columns [start, start+count) of a 2-D tensor.
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
/// Elements of a 1-D tensor at the given indices.
Tensor gather(const Tensor& a, std::span<const std::size_t> indices);
/// a / s for a one-element s.
Tensor div_scalar(const Tensor& a, const Tensor& s);

/// Mean Smooth-L1 between pred and a constant target of the same length.
Tensor smooth_l1_loss(const Tensor& pred, std::span<const double> target, double beta = 1.0);

}  // namespace scagiqa
