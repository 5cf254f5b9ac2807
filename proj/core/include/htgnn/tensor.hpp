#pragma once

// Dense double-precision tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle to a shared node. Operations on tensors that
// require gradients record their inputs and a backward closure; backward()
// walks the recorded graph once in reverse topological order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace htgnn {

using Shape = std::vector<std::size_t>;
using Index = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // lazily sized, empty means "all zero"
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Only leaves may be written; a derived tensor's value belongs to its op.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Zero-filled span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  // Leaf copy sharing no graph with this tensor.
  Tensor detach() const;
  Tensor clone_leaf(bool requires_grad) const;

  const char* op_name() const;
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of the operations reachable from one root, in execution
/// (topological) order. Replaying it backwards visits every node once.
class GradTape {
 public:
  static GradTape record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& nodes() const { return order_; }

  // Seeds d(root)/d(root) = 1 and propagates to every input.
  void replay_backward(detail::Node& root) const;

 private:
  std::vector<detail::Node*> order_;
};

/// Populates grad on every requires_grad leaf reachable from `loss`.
/// Leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& loss);

/// While alive, operations on the current thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// x[m×k] · w[n×k]ᵀ → [m×n]; weights are stored output-major.
Tensor linear(const Tensor& x, const Tensor& w);
Tensor transpose(const Tensor& x);

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

enum class Binary { kAdd, kSub, kMul };
Tensor elementwise(const Tensor& a, const Tensor& b, Binary kind);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
// x * s where s holds a single element.
Tensor mul_scalar(const Tensor& x, const Tensor& s);
// x[m×n] + b[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& b);
Tensor abs(const Tensor& x);

enum class Activation { kLeakyRelu, kRelu, kTanh, kSigmoid };
Tensor activate(const Tensor& x, Activation kind, double leaky_slope = 0.2);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

enum class Reduce { kSum, kMean };
// Removes `axis`; a rank-1 input reduces to shape {1}.
Tensor reduce(const Tensor& x, std::size_t axis, Reduce kind);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_squares(const Tensor& x);
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

// ---------------------------------------------------------------------------
// Index-driven ops for message passing. Row indices are into dimension 0.
// ---------------------------------------------------------------------------

Tensor gather_rows(const Tensor& x, Index rows);
// out[s] = Σ_{i: segment[i]=s} x[i]; segments without members are zero.
Tensor segment_sum(const Tensor& x, Index segment, std::size_t num_segments);
// Softmax of a vector within each segment.
Tensor segment_softmax(const Tensor& logits, Index segment,
                       std::size_t num_segments);
// x[m×n] with row i multiplied by w[i].
Tensor scale_rows(const Tensor& x, const Tensor& w);
// out[i] = ⟨a[i], b[i]⟩ for same-shape matrices, shape {m}.
Tensor row_dot(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// Losses and regularization
// ---------------------------------------------------------------------------

// Mean binary cross-entropy of probabilities against {0,1} targets.
// Probabilities are clamped to [1e-12, 1 - 1e-12].
Tensor binary_cross_entropy(const Tensor& probs, std::span<const double> targets);
Tensor mean_absolute_error(const Tensor& pred, std::span<const double> targets);

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

// Uniform double in [0,1) from the top 53 bits; stable across standard
// library implementations, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng);

Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng);

}  // namespace htgnn
