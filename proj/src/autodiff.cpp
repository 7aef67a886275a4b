#include "arsq/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace arsq::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Graph& graph_of(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument("operands belong to different graphs");
  return a.graph();
}

}  // namespace

Parameter::Parameter(std::string name, Matrix value) : name_(std::move(name)) {
  tensor_.data = std::move(value);
  zero_grad();
}

const Matrix& Var::value() const { return graph_->value(id_); }
const Matrix& Var::grad() const { return graph_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::invalid_argument("scalar(): tensor is " + shape_str(v));
  return v(0, 0);
}

Var Graph::constant(Matrix value) {
  Node n;
  n.tensor.data = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::parameter(Parameter& p) {
  Node n;
  n.tensor.data = p.value();
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward) {
  Node n;
  n.tensor.data = std::move(value);
  for (std::size_t p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Graph::accumulate(std::size_t id, const Matrix& g) { accumulate_expr(id, g); }

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw std::invalid_argument("backward: loss belongs to another graph");
  const std::size_t root = loss.id();
  if (nodes_[root].tensor.data.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(nodes_[root].tensor.data));
  if (!nodes_[root].requires_grad) return;
  for (std::size_t i = 0; i <= root; ++i) nodes_[i].tensor.grad.resize(0, 0);
  nodes_[root].tensor.grad = Matrix::Ones(1, 1);
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.tensor.has_grad()) continue;
    if (n.param != nullptr) {
      Matrix& pg = n.param->grad();
      if (pg.rows() != n.tensor.grad.rows() || pg.cols() != n.tensor.grad.cols()) n.param->zero_grad();
      pg += n.tensor.grad;
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: " + shape_str(a.value()) + " x " + shape_str(b.value()));
  Matrix out = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Matrix& go = gr.grad(self);
    if (gr.requires_grad(ia)) gr.accumulate_expr(ia, go * gr.value(ib).transpose());
    if (gr.requires_grad(ib)) gr.accumulate_expr(ib, gr.value(ia).transpose() * go);
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("add", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(a.value() + b.value(), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.grad(self));
    gr.accumulate(ib, gr.grad(self));
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(a.value() - b.value(), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.grad(self));
    gr.accumulate_expr(ib, -gr.grad(self));
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Matrix& go = gr.grad(self);
    if (gr.requires_grad(ia)) gr.accumulate_expr(ia, go.cwiseProduct(gr.value(ib)));
    if (gr.requires_grad(ib)) gr.accumulate_expr(ib, go.cwiseProduct(gr.value(ia)));
  });
}

Var scale(Var a, double c) {
  const std::size_t ia = a.id();
  return a.graph().record(a.value() * c, {ia}, [ia, c](Graph& gr, std::size_t self) {
    gr.accumulate_expr(ia, gr.grad(self) * c);
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var add_scalar(Var a, double c) {
  const std::size_t ia = a.id();
  Matrix out = a.value().array() + c;
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.grad(self));
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_row: " + shape_str(a.value()) + " + " + shape_str(row.value()));
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return g.record(std::move(out), {ia, ir}, [ia, ir](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.grad(self));
    if (gr.requires_grad(ir)) gr.accumulate_expr(ir, gr.grad(self).colwise().sum());
  });
}

Var sub_col(Var a, Var col) {
  Graph& g = graph_of(a, col);
  if (col.cols() != 1 || col.rows() != a.rows())
    throw std::invalid_argument("sub_col: " + shape_str(a.value()) + " - " + shape_str(col.value()));
  Matrix out = a.value();
  out.colwise() -= col.value().col(0);
  const std::size_t ia = a.id(), ic = col.id();
  return g.record(std::move(out), {ia, ic}, [ia, ic](Graph& gr, std::size_t self) {
    gr.accumulate(ia, gr.grad(self));
    if (gr.requires_grad(ic)) gr.accumulate_expr(ic, -gr.grad(self).rowwise().sum());
  });
}

Var tanh(Var a) {
  const std::size_t ia = a.id();
  Matrix out = a.value().array().tanh();
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& y = gr.value(self);
    gr.accumulate_expr(ia, (gr.grad(self).array() * (1.0 - y.array().square())).matrix());
  });
}

Var silu(Var a) {
  const std::size_t ia = a.id();
  const Matrix& x = a.value();
  Matrix out = x.array() / (1.0 + (-x.array()).exp());
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& xv = gr.value(ia);
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-xv.array()).exp());
    const Eigen::ArrayXXd d = s * (1.0 + xv.array() * (1.0 - s));
    gr.accumulate_expr(ia, (gr.grad(self).array() * d).matrix());
  });
}

Var exp(Var a) {
  const std::size_t ia = a.id();
  Matrix out = a.value().array().exp();
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    gr.accumulate_expr(ia, gr.grad(self).cwiseProduct(gr.value(self)));
  });
}

Var square(Var a) {
  const std::size_t ia = a.id();
  Matrix out = a.value().array().square();
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    gr.accumulate_expr(ia, 2.0 * gr.grad(self).cwiseProduct(gr.value(ia)));
  });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  Graph& g = graph_of(x, gain);
  graph_of(x, shift);
  const Eigen::Index n = x.rows(), m = x.cols();
  if (gain.rows() != 1 || gain.cols() != m || shift.rows() != 1 || shift.cols() != m)
    throw std::invalid_argument("layer_norm: gain/shift must be 1x" + std::to_string(m));
  Matrix xhat(n, m);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = xhat;
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = xhat.row(i).cwiseProduct(gain.value().row(0)) + shift.value().row(0);
  const std::size_t ix = x.id(), ig = gain.id(), is = shift.id();
  return g.record(std::move(out), {ix, ig, is},
                  [ix, ig, is, xhat = std::move(xhat), inv_std](Graph& gr, std::size_t self) {
                    const Matrix& go = gr.grad(self);
                    if (gr.requires_grad(ig)) gr.accumulate_expr(ig, go.cwiseProduct(xhat).colwise().sum());
                    if (gr.requires_grad(is)) gr.accumulate_expr(is, go.colwise().sum());
                    if (!gr.requires_grad(ix)) return;
                    const Matrix& gamma = gr.value(ig);
                    const double m_d = static_cast<double>(xhat.cols());
                    Matrix dx(xhat.rows(), xhat.cols());
                    for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
                      const Eigen::RowVectorXd dxhat = go.row(i).cwiseProduct(gamma.row(0));
                      const double s1 = dxhat.sum();
                      const double s2 = dxhat.cwiseProduct(xhat.row(i)).sum();
                      dx.row(i) = (inv_std(i) / m_d) *
                                  (m_d * dxhat.array() - s1 - xhat.row(i).array() * s2).matrix();
                    }
                    gr.accumulate(ix, dx);
                  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Graph& g = parts.front().graph();
  const Eigen::Index n = parts.front().rows();
  Eigen::Index total = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    graph_of(parts.front(), p);
    if (p.rows() != n) throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(n, total);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return g.record(std::move(out), ids, [ids, widths](Graph& gr, std::size_t self) {
    Eigen::Index o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (gr.requires_grad(ids[k])) gr.accumulate_expr(ids[k], gr.grad(self).middleCols(o, widths[k]));
      o += widths[k];
    }
  });
}

namespace {

// Softmax weights of x / alpha per row, optionally with one masked column.
Matrix row_softmax(const Matrix& x, double alpha, std::span<const int> exclude) {
  Matrix w(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (exclude.empty() || j != exclude[static_cast<std::size_t>(i)]) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const bool skip = !exclude.empty() && j == exclude[static_cast<std::size_t>(i)];
      w(i, j) = skip ? 0.0 : std::exp((x(i, j) - mx) / alpha);
      z += w(i, j);
    }
    w.row(i) /= z;
  }
  return w;
}

Var logsumexp_impl(Var x, double alpha, std::vector<int> exclude) {
  if (!(alpha > 0.0)) throw std::invalid_argument("logsumexp: alpha must be positive");
  const Matrix& v = x.value();
  if (!exclude.empty()) {
    if (exclude.size() != static_cast<std::size_t>(v.rows()))
      throw std::invalid_argument("logsumexp_rows_excluding: one excluded column per row required");
    if (v.cols() < 2) throw std::invalid_argument("logsumexp_rows_excluding: need at least two columns");
    for (int e : exclude)
      if (e < 0 || e >= v.cols()) throw std::out_of_range("logsumexp_rows_excluding: column out of range");
  }
  Matrix out(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      if (exclude.empty() || j != exclude[static_cast<std::size_t>(i)]) mx = std::max(mx, v(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      if (exclude.empty() || j != exclude[static_cast<std::size_t>(i)]) z += std::exp((v(i, j) - mx) / alpha);
    out(i, 0) = mx + alpha * std::log(z);
  }
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {ix}, [ix, alpha, exclude = std::move(exclude)](Graph& gr, std::size_t self) {
    Matrix w = row_softmax(gr.value(ix), alpha, exclude);
    for (Eigen::Index i = 0; i < w.rows(); ++i) w.row(i) *= gr.grad(self)(i, 0);
    gr.accumulate(ix, w);
  });
}

}  // namespace

Var logsumexp_rows(Var x, double alpha) { return logsumexp_impl(x, alpha, {}); }

Var logsumexp_rows_excluding(Var x, std::span<const int> exclude, double alpha) {
  return logsumexp_impl(x, alpha, std::vector<int>(exclude.begin(), exclude.end()));
}

Var gather_cols(Var x, std::span<const int> index) {
  const Matrix& v = x.value();
  if (index.size() != static_cast<std::size_t>(v.rows()))
    throw std::invalid_argument("gather_cols: one index per row required");
  Matrix out(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const int c = index[static_cast<std::size_t>(i)];
    if (c < 0 || c >= v.cols()) throw std::out_of_range("gather_cols: column " + std::to_string(c));
    out(i, 0) = v(i, c);
  }
  const std::size_t ix = x.id();
  std::vector<int> idx(index.begin(), index.end());
  return x.graph().record(std::move(out), {ix}, [ix, idx = std::move(idx)](Graph& gr, std::size_t self) {
    Matrix g = Matrix::Zero(gr.value(ix).rows(), gr.value(ix).cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, idx[static_cast<std::size_t>(i)]) = gr.grad(self)(i, 0);
    gr.accumulate(ix, g);
  });
}

Var clamp_min(Var x, double c) {
  const std::size_t ix = x.id();
  Matrix out = x.value().cwiseMax(c);
  return x.graph().record(std::move(out), {ix}, [ix, c](Graph& gr, std::size_t self) {
    const Matrix mask = (gr.value(ix).array() > c).cast<double>().matrix();
    gr.accumulate_expr(ix, gr.grad(self).cwiseProduct(mask));
  });
}

Var minimum(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("minimum", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(a.value().cwiseMin(b.value()), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Matrix take_a = (gr.value(ia).array() <= gr.value(ib).array()).cast<double>().matrix();
    const Matrix& go = gr.grad(self);
    if (gr.requires_grad(ia)) gr.accumulate_expr(ia, go.cwiseProduct(take_a));
    if (gr.requires_grad(ib)) gr.accumulate_expr(ib, go - go.cwiseProduct(take_a));
  });
}

Var sum(Var a) {
  const std::size_t ia = a.id();
  return a.graph().record(Matrix::Constant(1, 1, a.value().sum()), {ia}, [ia](Graph& gr, std::size_t self) {
    const Matrix& v = gr.value(ia);
    gr.accumulate_expr(ia, Matrix::Constant(v.rows(), v.cols(), gr.grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(Var a) {
  const std::size_t ia = a.id();
  Matrix out = a.value().rowwise().sum();
  return a.graph().record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const Eigen::Index cols = gr.value(ia).cols();
    gr.accumulate_expr(ia, gr.grad(self).replicate(1, cols));
  });
}

}  // namespace arsq::ad
