#include "arsq/autodiff.hpp"

#include "doctest.h"
#include "fd_check.hpp"

#include <random>

using namespace arsq::ad;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  Graph g;
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Matrix b(2, 2);
  b << 0.5, -1, 2, 0;
  const Var va = g.constant(a), vb = g.constant(b);
  CHECK(matmul(va, vb).value()(0, 0) == doctest::Approx(4.5));
  CHECK(add(va, vb).value()(1, 0) == doctest::Approx(5.0));
  CHECK(mul(va, vb).value()(0, 1) == doctest::Approx(-2.0));
  CHECK(sum(va).scalar() == doctest::Approx(10.0));
  CHECK(mean(va).scalar() == doctest::Approx(2.5));
  CHECK(row_sum(va).value()(1, 0) == doctest::Approx(7.0));
  CHECK(clamp_min(vb, 0.0).value()(0, 1) == doctest::Approx(0.0));
  CHECK(minimum(va, vb).value()(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("logsumexp is max-shifted and temperature scaled") {
  Graph g;
  Matrix x(1, 2);
  x << 1000.0, 1000.0;
  CHECK(logsumexp_rows(g.constant(x)).value()(0, 0) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(logsumexp_rows(g.constant(x), 0.01).value()(0, 0) == doctest::Approx(1000.0 + 0.01 * std::log(2.0)));
  Matrix y(1, 3);
  y << 0.0, 1.0, 2.0;
  const int skip[] = {2};
  CHECK(logsumexp_rows_excluding(g.constant(y), skip).value()(0, 0) ==
        doctest::Approx(std::log(std::exp(0.0) + std::exp(1.0))));
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  const Var v = g.constant(Matrix::Ones(2, 2));
  CHECK_THROWS(g.backward(v));
}

TEST_CASE("gradients accumulate across repeated parameter use") {
  Parameter p("p", Matrix::Constant(1, 1, 3.0));
  p.zero_grad();
  Graph g;
  const Var x = g.parameter(p);
  g.backward(mul(x, x) + x);  // d/dx (x^2 + x) = 2x + 1
  CHECK(p.grad()(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("constants receive no parameter gradient") {
  Parameter p("p", Matrix::Constant(1, 1, 2.0));
  p.zero_grad();
  Graph g;
  const Var c = g.constant(p.value());
  g.backward(square(c));
  CHECK(p.grad()(0, 0) == 0.0);
}

TEST_CASE("finite differences agree for every op") {
  std::mt19937_64 rng(3);
  Parameter a("a", random_matrix(3, 4, rng));
  Parameter b("b", random_matrix(3, 4, rng));
  Parameter w("w", random_matrix(4, 2, rng));
  Parameter row("row", random_matrix(1, 4, rng));
  Parameter col("col", random_matrix(3, 1, rng));
  std::vector<Parameter*> params{&a, &b, &w, &row, &col};
  const int idx[] = {0, 3, 1};

  const std::vector<std::pair<const char*, fdcheck::LossFn>> cases = {
      {"matmul", [&](Graph& g) { return sum(matmul(g.parameter(a), g.parameter(w))); }},
      {"mul", [&](Graph& g) { return sum(mul(g.parameter(a), g.parameter(b))); }},
      {"sub/scale", [&](Graph& g) { return sum(scale(sub(g.parameter(a), g.parameter(b)), 1.7)); }},
      {"add_row", [&](Graph& g) { return sum(square(add_row(g.parameter(a), g.parameter(row)))); }},
      {"sub_col", [&](Graph& g) { return sum(square(sub_col(g.parameter(a), g.parameter(col)))); }},
      {"tanh", [&](Graph& g) { return sum(tanh(g.parameter(a))); }},
      {"silu", [&](Graph& g) { return sum(silu(g.parameter(a))); }},
      {"exp", [&](Graph& g) { return mean(exp(g.parameter(a))); }},
      {"layer_norm",
       [&](Graph& g) {
         return sum(mul(layer_norm(g.parameter(a), g.parameter(row), g.parameter(row)), g.parameter(b)));
       }},
      {"concat",
       [&](Graph& g) {
         const Var parts[] = {g.parameter(a), g.parameter(col)};
         return sum(square(concat_cols(parts)));
       }},
      {"logsumexp", [&](Graph& g) { return sum(logsumexp_rows(g.parameter(a), 0.3)); }},
      {"logsumexp_excluding", [&](Graph& g) { return sum(logsumexp_rows_excluding(g.parameter(a), idx, 0.7)); }},
      {"gather", [&](Graph& g) { return sum(square(gather_cols(g.parameter(a), idx))); }},
      {"clamp_min", [&](Graph& g) { return sum(square(clamp_min(g.parameter(a), 0.1))); }},
      {"minimum", [&](Graph& g) { return sum(square(minimum(g.parameter(a), g.parameter(b)))); }},
      {"row_sum/neg", [&](Graph& g) { return sum(square(neg(row_sum(g.parameter(a))))); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    CHECK(fdcheck::relative_error(f, params) < 1e-6);
  }
}
