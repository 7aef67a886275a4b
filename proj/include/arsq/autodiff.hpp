#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every operation in creation order, so the node list is
// already topologically sorted and backward() is a single reverse sweep.
// Parameters live outside the graph; leaves created with Graph::parameter()
// accumulate into Parameter::grad() when backward() runs.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace arsq::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Tensor {
  Matrix data;
  Matrix grad;  // empty until something flows into it

  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(data.rows()), static_cast<std::size_t>(data.cols())};
  }
  bool has_grad() const { return grad.size() != 0; }
};

class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  Matrix& value() { return tensor_.data; }
  const Matrix& value() const { return tensor_.data; }
  Matrix& grad() { return tensor_.grad; }
  const Matrix& grad() const { return tensor_.grad; }
  void zero_grad() { tensor_.grad.setZero(tensor_.data.rows(), tensor_.data.cols()); }
  std::vector<std::size_t> shape() const { return tensor_.shape(); }

 private:
  std::string name_;
  Tensor tensor_;
};

class Graph;

class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Var constant(Matrix value);
  Var constant(double value);
  Var parameter(Parameter& p);

  // Low-level node creation used by the operation library.
  Var record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].tensor.data; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].tensor.grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.tensor.has_grad()) n.tensor.grad = g;
    else n.tensor.grad += g;
  }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node and
  // parameter leaf. The loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor tensor;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(Var a, Var row);
// a (n x m) - col (n x 1) broadcast over columns.
Var sub_col(Var a, Var col);
Var tanh(Var a);
Var silu(Var a);
Var exp(Var a);
Var square(Var a);
// Row-wise normalization to zero mean / unit variance, then gain * x + shift.
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);
Var concat_cols(std::span<const Var> parts);
// alpha * log sum_j exp(x_ij / alpha) per row -> n x 1, max-shifted.
Var logsumexp_rows(Var x, double alpha = 1.0);
// Same, skipping column exclude[i] in row i.
Var logsumexp_rows_excluding(Var x, std::span<const int> exclude, double alpha = 1.0);
// out_i = x(i, index[i]) -> n x 1.
Var gather_cols(Var x, std::span<const int> index);
// Elementwise max(x, c); gradient flows where x > c.
Var clamp_min(Var x, double c);
// Elementwise min(a, b); gradient goes to the smaller side (a on ties).
Var minimum(Var a, Var b);
Var sum(Var a);       // -> 1 x 1
Var mean(Var a);      // -> 1 x 1
Var row_sum(Var a);   // -> n x 1
Var neg(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator-(Var a, double c) { return add_scalar(a, -c); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace arsq::ad
