#include "htgnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>
#include <utility>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "htgnn/errors.hpp"

namespace htgnn {

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

using BackwardFn = std::function<void(Node&)>;

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  node->op = op;
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor* t : inputs) needs_grad = needs_grad || t->requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->inputs.push_back(t->node_ptr());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   const std::vector<Tensor>& inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  node->op = op;
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->inputs.push_back(t.node_ptr());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of input `i`, or nullptr when that input needs none.
std::vector<double>* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw DomainError(fmt::format("{}: undefined tensor", op));
}

void require_rank2(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.rank() != 2) {
    throw ShapeError(fmt::format("{}: expected a matrix, got {}", op,
                                 shape_string(t.shape())));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: {} vs {}", op, shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Row count and row width for ops that treat dimension 0 as the item axis.
std::pair<std::size_t, std::size_t> row_layout(const Tensor& t) {
  const std::size_t n = t.dim(0);
  return {n, n == 0 ? 0 : t.numel() / n};
}

Shape with_rows(const Shape& shape, std::size_t rows) {
  Shape out = shape;
  out[0] = rows;
  return out;
}

Tensor unary(const Tensor& x, const char* op, double (*f)(double, double),
             double (*df)(double, double, double), double param) {
  require_defined(x, op);
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i], param);
  return make_result(x.shape(), std::move(out), op, {&x},
                     [df, param](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       const auto& xin = self.inputs[0]->value;
                       for (std::size_t i = 0; i < xin.size(); ++i) {
                         (*gx)[i] += self.grad[i] * df(xin[i], self.value[i], param);
                       }
                     });
}

}  // namespace

std::string shape_string(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, "x"));
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) shape = {1};
  if (shape_numel(shape) != values.size()) {
    throw ShapeError(fmt::format("tensor: shape {} holds {} values, got {}",
                                 shape_string(shape), shape_numel(shape),
                                 values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from_data({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError(fmt::format("axis {} out of range for {}", axis,
                                 shape_string(shape())));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const {
  require_rank2(*this, "rows");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_rank2(*this, "cols");
  return node_->shape[1];
}

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  if (!node_->is_leaf) throw DomainError("mutable_data: tensor is not a leaf");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DomainError(fmt::format("item: tensor {} is not a scalar",
                                  shape_string(shape())));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return clone_leaf(false); }

Tensor Tensor::clone_leaf(bool requires_grad) const {
  require_defined(*this, "clone");
  return from_data(node_->shape, node_->value, requires_grad);
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

// ---------------------------------------------------------------------------
// Tape and backward
// ---------------------------------------------------------------------------

GradTape GradTape::record(const Tensor& root) {
  GradTape tape;
  if (!root.requires_grad()) return tape;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS: inputs precede their consumers.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void GradTape::replay_backward(Node& root) const {
  for (Node* n : order_) {
    if (!n->is_leaf) n->grad.clear();
  }
  root.grad_buffer()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw DomainError(fmt::format("backward: loss must be a scalar, got {}",
                                  shape_string(loss.shape())));
  }
  if (!loss.requires_grad()) {
    throw DomainError("backward: loss was not produced by recorded operations");
  }
  GradTape::record(loss).replay_backward(*loss.node());
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError(fmt::format("matmul: inner dimensions differ, {} vs {}",
                                 shape_string(a.shape()), shape_string(b.shape())));
  }
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return make_result({m, n}, std::move(out), "matmul", {&a, &b},
                     [m, k, n](Node& self) {
                       const auto& g = self.grad;
                       const auto& av = self.inputs[0]->value;
                       const auto& bv = self.inputs[1]->value;
                       if (auto* ga = input_grad(self, 0)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j)
                               acc += g[i * n + j] * bv[p * n + j];
                             (*ga)[i * k + p] += acc;
                           }
                       }
                       if (auto* gb = input_grad(self, 1)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = av[i * k + p];
                             for (std::size_t j = 0; j < n; ++j)
                               (*gb)[p * n + j] += aip * g[i * n + j];
                           }
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  const std::size_t m = x.rows(), k = x.cols(), n = w.rows();
  if (w.cols() != k) {
    throw ShapeError(fmt::format("linear: input {} vs weight {}",
                                 shape_string(x.shape()), shape_string(w.shape())));
  }
  const auto xv = x.data();
  const auto wv = w.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = xv.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* wj = wv.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += xi[p] * wj[p];
      out[i * n + j] = acc;
    }
  }
  return make_result({m, n}, std::move(out), "linear", {&x, &w},
                     [m, k, n](Node& self) {
                       const auto& g = self.grad;
                       const auto& xv = self.inputs[0]->value;
                       const auto& wv = self.inputs[1]->value;
                       if (auto* gx = input_grad(self, 0)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                             const double gij = g[i * n + j];
                             if (gij == 0.0) continue;
                             for (std::size_t p = 0; p < k; ++p)
                               (*gx)[i * k + p] += gij * wv[j * k + p];
                           }
                       }
                       if (auto* gw = input_grad(self, 1)) {
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                             const double gij = g[i * n + j];
                             if (gij == 0.0) continue;
                             for (std::size_t p = 0; p < k; ++p)
                               (*gw)[j * k + p] += gij * xv[i * k + p];
                           }
                       }
                     });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  const auto xv = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return make_result({n, m}, std::move(out), "transpose", {&x},
                     [m, n](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           (*gx)[i * n + j] += self.grad[j * m + i];
                     });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor elementwise(const Tensor& a, const Tensor& b, Binary kind) {
  static constexpr const char* kNames[] = {"add", "sub", "mul"};
  const char* op = kNames[static_cast<int>(kind)];
  require_same_shape(a, b, op);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: out[i] = av[i] + bv[i]; break;
      case Binary::kSub: out[i] = av[i] - bv[i]; break;
      case Binary::kMul: out[i] = av[i] * bv[i]; break;
    }
  }
  return make_result(a.shape(), std::move(out), op, {&a, &b}, [kind](Node& self) {
    const auto& g = self.grad;
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    auto* ga = input_grad(self, 0);
    auto* gb = input_grad(self, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (kind) {
        case Binary::kAdd:
          if (ga) (*ga)[i] += g[i];
          if (gb) (*gb)[i] += g[i];
          break;
        case Binary::kSub:
          if (ga) (*ga)[i] += g[i];
          if (gb) (*gb)[i] -= g[i];
          break;
        case Binary::kMul:
          if (ga) (*ga)[i] += g[i] * bv[i];
          if (gb) (*gb)[i] += g[i] * av[i];
          break;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, Binary::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, Binary::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, Binary::kMul); }

Tensor scale(const Tensor& x, double s) {
  require_defined(x, "scale");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * s;
  return make_result(x.shape(), std::move(out), "scale", {&x}, [s](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i] * s;
  });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  require_defined(x, "mul_scalar");
  require_defined(s, "mul_scalar");
  if (s.numel() != 1) {
    throw ShapeError(fmt::format("mul_scalar: factor must hold one value, got {}",
                                 shape_string(s.shape())));
  }
  const double sv = s.item();
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * sv;
  return make_result(x.shape(), std::move(out), "mul_scalar", {&x, &s}, [](Node& self) {
    const auto& g = self.grad;
    const auto& xv = self.inputs[0]->value;
    const double sv = self.inputs[1]->value[0];
    if (auto* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * sv;
    }
    if (auto* gs = input_grad(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      (*gs)[0] += acc;
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_rank2(x, "add_bias");
  require_defined(b, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (b.numel() != n) {
    throw ShapeError(fmt::format("add_bias: {} vs bias {}", shape_string(x.shape()),
                                 shape_string(b.shape())));
  }
  const auto xv = x.data();
  const auto bv = b.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return make_result({m, n}, std::move(out), "add_bias", {&x, &b}, [m, n](Node& self) {
    const auto& g = self.grad;
    if (auto* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
    if (auto* gb = input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
    }
  });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v, double) { return std::abs(v); },
      [](double v, double, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); },
      0.0);
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, "leaky_relu", [](double v, double s) { return v > 0.0 ? v : s * v; },
      [](double v, double, double s) { return v > 0.0 ? 1.0 : s; }, slope);
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v, double) { return v > 0.0 ? v : 0.0; },
      [](double v, double, double) { return v > 0.0 ? 1.0 : 0.0; }, 0.0);
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v, double) { return std::tanh(v); },
      [](double, double y, double) { return 1.0 - y * y; }, 0.0);
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y, double) { return y * (1.0 - y); }, 0.0);
}

Tensor activate(const Tensor& x, Activation kind, double leaky_slope) {
  switch (kind) {
    case Activation::kLeakyRelu: return leaky_relu(x, leaky_slope);
    case Activation::kRelu: return relu(x);
    case Activation::kTanh: return tanh(x);
    case Activation::kSigmoid: return sigmoid(x);
  }
  throw DomainError("activate: unknown activation");
}

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

Tensor reduce(const Tensor& x, std::size_t axis, Reduce kind) {
  require_defined(x, "reduce");
  if (axis >= x.rank()) {
    throw ShapeError(fmt::format("reduce: axis {} out of range for {}", axis,
                                 shape_string(x.shape())));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  if (kind == Reduce::kMean && s.extent == 0) {
    throw DomainError("reduce: mean over an empty axis");
  }
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  const double factor = kind == Reduce::kMean ? 1.0 / static_cast<double>(s.extent) : 1.0;
  const auto xv = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += xv[(o * s.extent + e) * s.inner + i];
  if (factor != 1.0) {
    for (double& v : out) v *= factor;
  }
  return make_result(std::move(out_shape), std::move(out),
                     kind == Reduce::kMean ? "mean" : "sum", {&x},
                     [s, factor](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t e = 0; e < s.extent; ++e)
                           for (std::size_t i = 0; i < s.inner; ++i)
                             (*gx)[(o * s.extent + e) * s.inner + i] +=
                                 self.grad[o * s.inner + i] * factor;
                     });
}

Tensor sum(const Tensor& x) { return reduce(reshape(x, {x.numel()}), 0, Reduce::kSum); }

Tensor mean(const Tensor& x) { return reduce(reshape(x, {x.numel()}), 0, Reduce::kMean); }

Tensor sum_squares(const Tensor& x) {
  require_defined(x, "sum_squares");
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  return make_result({1}, {acc}, "sum_squares", {&x}, [](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xv = self.inputs[0]->value;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += 2.0 * xv[i] * g;
  });
}

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  for (const auto& t : xs) require_defined(t, "concat");
  const Shape& ref = xs.front().shape();
  if (axis >= ref.size()) {
    throw ShapeError(fmt::format("concat: axis {} out of range for {}", axis,
                                 shape_string(ref)));
  }
  std::size_t total = 0;
  for (const auto& t : xs) {
    const Shape& sh = t.shape();
    bool compatible = sh.size() == ref.size();
    for (std::size_t d = 0; compatible && d < sh.size(); ++d) {
      if (d != axis && sh[d] != ref[d]) compatible = false;
    }
    if (!compatible) {
      throw ShapeError(fmt::format("concat: {} vs {} along axis {}", shape_string(ref),
                                   shape_string(sh), axis));
    }
    total += sh[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  const AxisSplit s = split_at(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> extents;
  extents.reserve(xs.size());
  for (const auto& t : xs) extents.push_back(t.shape()[axis]);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const auto xv = xs[k].data();
      const std::size_t chunk = extents[k] * s.inner;
      std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>((o * s.extent) * s.inner + offset));
      offset += chunk;
    }
  }
  return make_result(std::move(out_shape), std::move(out), "concat", xs,
                     [s, extents](Node& self) {
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         std::size_t offset = 0;
                         for (std::size_t k = 0; k < extents.size(); ++k) {
                           const std::size_t chunk = extents[k] * s.inner;
                           if (auto* gk = input_grad(self, k)) {
                             const std::size_t base = (o * s.extent) * s.inner + offset;
                             for (std::size_t i = 0; i < chunk; ++i)
                               (*gk)[o * chunk + i] += self.grad[base + i];
                           }
                           offset += chunk;
                         }
                       }
                     });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  if (axis >= x.rank()) {
    throw ShapeError(fmt::format("softmax: axis {} out of range for {}", axis,
                                 shape_string(x.shape())));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  if (s.extent == 0) throw DomainError("softmax: empty axis");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t e) { return (o * s.extent + e) * s.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, xv[at(e)]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        out[at(e)] = std::exp(xv[at(e)] - mx);
        total += out[at(e)];
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[at(e)] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), "softmax", {&x}, [s](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t e) { return (o * s.extent + e) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) dot += g[at(e)] * y[at(e)];
        for (std::size_t e = 0; e < s.extent; ++e)
          (*gx)[at(e)] += y[at(e)] * (g[at(e)] - dot);
      }
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_defined(x, "slice_rows");
  const auto [n, width] = row_layout(x);
  if (begin > end || end > n) {
    throw ShapeError(fmt::format("slice_rows: [{}, {}) out of range for {}", begin, end,
                                 shape_string(x.shape())));
  }
  const auto xv = x.data();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * width),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * width));
  return make_result(with_rows(x.shape(), end - begin), std::move(out), "slice_rows",
                     {&x}, [begin, w = width](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         (*gx)[begin * w + i] += self.grad[i];
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin > end || end > n) {
    throw ShapeError(fmt::format("slice_cols: [{}, {}) out of range for {}", begin, end,
                                 shape_string(x.shape())));
  }
  if (begin == 0 && end == n) return x;
  const std::size_t w = end - begin;
  const auto xv = x.data();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * n + begin + j];
  return make_result({m, w}, std::move(out), "slice_cols", {&x},
                     [m, n, w, begin](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           (*gx)[i * n + begin + j] += self.grad[i * w + j];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError(fmt::format("reshape: {} to {}", shape_string(x.shape()),
                                 shape_string(shape)));
  }
  if (shape == x.shape()) return x;
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {&x}, [](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Index-driven ops
// ---------------------------------------------------------------------------

Tensor gather_rows(const Tensor& x, Index rows) {
  require_defined(x, "gather_rows");
  const auto [n, width] = row_layout(x);
  for (std::size_t r : rows) {
    if (r >= n) {
      throw ShapeError(fmt::format("gather_rows: row {} out of range for {}", r,
                                   shape_string(x.shape())));
    }
  }
  const auto xv = x.data();
  std::vector<double> out(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  Shape out_shape = with_rows(x.shape(), rows.size());
  return make_result(std::move(out_shape), std::move(out), "gather_rows", {&x},
                     [rows = std::move(rows), w = width](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < rows.size(); ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           (*gx)[rows[i] * w + j] += self.grad[i * w + j];
                     });
}

Tensor segment_sum(const Tensor& x, Index segment, std::size_t num_segments) {
  require_defined(x, "segment_sum");
  const auto [n, width] = row_layout(x);
  if (segment.size() != n) {
    throw ShapeError(fmt::format("segment_sum: {} segment ids for {}", segment.size(),
                                 shape_string(x.shape())));
  }
  for (std::size_t s : segment) {
    if (s >= num_segments) {
      throw ShapeError(fmt::format("segment_sum: segment {} >= {}", s, num_segments));
    }
  }
  const auto xv = x.data();
  std::vector<double> out(num_segments * width, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) out[segment[i] * width + j] += xv[i * width + j];
  return make_result(with_rows(x.shape(), num_segments), std::move(out), "segment_sum",
                     {&x}, [segment = std::move(segment), w = width](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < segment.size(); ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           (*gx)[i * w + j] += self.grad[segment[i] * w + j];
                     });
}

Tensor segment_softmax(const Tensor& logits, Index segment, std::size_t num_segments) {
  require_defined(logits, "segment_softmax");
  const std::size_t m = logits.numel();
  if (segment.size() != m) {
    throw ShapeError(fmt::format("segment_softmax: {} segment ids for {}",
                                 segment.size(), shape_string(logits.shape())));
  }
  for (std::size_t s : segment) {
    if (s >= num_segments) {
      throw ShapeError(fmt::format("segment_softmax: segment {} >= {}", s, num_segments));
    }
  }
  const auto xv = logits.data();
  std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i) mx[segment[i]] = std::max(mx[segment[i]], xv[i]);
  std::vector<double> out(m);
  std::vector<double> total(num_segments, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = std::exp(xv[i] - mx[segment[i]]);
    total[segment[i]] += out[i];
  }
  for (std::size_t i = 0; i < m; ++i) out[i] /= total[segment[i]];
  return make_result(logits.shape(), std::move(out), "segment_softmax", {&logits},
                     [segment = std::move(segment), num_segments](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       const auto& y = self.value;
                       const auto& g = self.grad;
                       std::vector<double> dot(num_segments, 0.0);
                       for (std::size_t i = 0; i < y.size(); ++i) dot[segment[i]] += g[i] * y[i];
                       for (std::size_t i = 0; i < y.size(); ++i)
                         (*gx)[i] += y[i] * (g[i] - dot[segment[i]]);
                     });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  require_defined(x, "scale_rows");
  require_defined(w, "scale_rows");
  const auto [n, width] = row_layout(x);
  if (w.numel() != n) {
    throw ShapeError(fmt::format("scale_rows: {} vs weights {}", shape_string(x.shape()),
                                 shape_string(w.shape())));
  }
  const auto xv = x.data();
  const auto wv = w.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) out[i * width + j] = xv[i * width + j] * wv[i];
  return make_result(x.shape(), std::move(out), "scale_rows", {&x, &w},
                     [n = n, width = width](Node& self) {
                       const auto& g = self.grad;
                       const auto& xv = self.inputs[0]->value;
                       const auto& wv = self.inputs[1]->value;
                       auto* gx = input_grad(self, 0);
                       auto* gw = input_grad(self, 1);
                       for (std::size_t i = 0; i < n; ++i) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < width; ++j) {
                           const double gij = g[i * width + j];
                           if (gx) (*gx)[i * width + j] += gij * wv[i];
                           acc += gij * xv[i * width + j];
                         }
                         if (gw) (*gw)[i] += acc;
                       }
                     });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  const auto [n, width] = row_layout(a);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) out[i] += av[i * width + j] * bv[i * width + j];
  return make_result({n}, std::move(out), "row_dot", {&a, &b},
                     [n = n, width = width](Node& self) {
                       const auto& g = self.grad;
                       const auto& av = self.inputs[0]->value;
                       const auto& bv = self.inputs[1]->value;
                       auto* ga = input_grad(self, 0);
                       auto* gb = input_grad(self, 1);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < width; ++j) {
                           if (ga) (*ga)[i * width + j] += g[i] * bv[i * width + j];
                           if (gb) (*gb)[i * width + j] += g[i] * av[i * width + j];
                         }
                     });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor binary_cross_entropy(const Tensor& probs, std::span<const double> targets) {
  require_defined(probs, "binary_cross_entropy");
  const std::size_t m = probs.numel();
  if (targets.size() != m) {
    throw ShapeError(fmt::format("binary_cross_entropy: {} predictions vs {} targets", m,
                                 targets.size()));
  }
  if (m == 0) throw DomainError("binary_cross_entropy: no samples");
  static constexpr double kEps = 1e-12;
  const auto pv = probs.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double p = std::clamp(pv[i], kEps, 1.0 - kEps);
    acc -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  std::vector<double> y(targets.begin(), targets.end());
  return make_result({1}, {acc / static_cast<double>(m)}, "binary_cross_entropy",
                     {&probs}, [y = std::move(y)](Node& self) {
                       auto* gp = input_grad(self, 0);
                       if (!gp) return;
                       const auto& pv = self.inputs[0]->value;
                       const double scale = self.grad[0] / static_cast<double>(y.size());
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         const double p = std::clamp(pv[i], kEps, 1.0 - kEps);
                         (*gp)[i] += scale * (p - y[i]) / (p * (1.0 - p));
                       }
                     });
}

Tensor mean_absolute_error(const Tensor& pred, std::span<const double> targets) {
  require_defined(pred, "mean_absolute_error");
  const std::size_t m = pred.numel();
  if (targets.size() != m) {
    throw ShapeError(fmt::format("mean_absolute_error: {} predictions vs {} targets", m,
                                 targets.size()));
  }
  if (m == 0) throw DomainError("mean_absolute_error: no samples");
  const auto pv = pred.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) acc += std::abs(pv[i] - targets[i]);
  std::vector<double> y(targets.begin(), targets.end());
  return make_result({1}, {acc / static_cast<double>(m)}, "mean_absolute_error",
                     {&pred}, [y = std::move(y)](Node& self) {
                       auto* gp = input_grad(self, 0);
                       if (!gp) return;
                       const auto& pv = self.inputs[0]->value;
                       const double scale = self.grad[0] / static_cast<double>(y.size());
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         const double e = pv[i] - y[i];
                         (*gp)[i] += scale * (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0));
                       }
                     });
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError(fmt::format("dropout: rate {} outside [0, 1)", rate));
  }
  require_defined(x, "dropout");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  const auto xv = x.data();
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return make_result(x.shape(), std::move(out), "dropout", {&x},
                     [mask = std::move(mask)](Node& self) {
                       auto* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < mask.size(); ++i)
                         (*gx)[i] += self.grad[i] * mask[i];
                     });
}

}  // namespace htgnn
