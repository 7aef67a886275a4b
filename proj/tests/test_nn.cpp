#include "arsq/checkpoint.hpp"
#include "arsq/nn.hpp"

#include "doctest.h"
#include "fd_check.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace arsq;
using namespace arsq::nn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "arsq_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("linear init is fan-in uniform with zero bias") {
  Rng rng(1);
  Linear l("l", 16, 8, true, rng);
  CHECK(l.weight.value().rows() == 16);
  CHECK(l.weight.value().cols() == 8);
  CHECK(l.weight.value().cwiseAbs().maxCoeff() <= 0.25 + 1e-12);
  CHECK(l.bias.value().isZero());
  CHECK(l.weight.name() == "l/w");
}

TEST_CASE("dense network parameter names and shapes") {
  Rng rng(2);
  DenseNetworkConfig c;
  c.input_width = 3;
  c.hidden_widths = {5, 4};
  c.output_width = 2;
  c.activation = Activation::silu_layernorm;
  DenseNetwork net("net", c, rng);
  std::vector<std::string> names;
  for (const Parameter* p : std::as_const(net).parameters()) names.push_back(p->name());
  CHECK(names == std::vector<std::string>{"net/h0/w", "net/h0/b", "net/h0/ln_gain", "net/h0/ln_shift", "net/h1/w",
                                          "net/h1/b", "net/h1/ln_gain", "net/h1/ln_shift", "net/out/w", "net/out/b"});
  CHECK(net.predict(Matrix::Ones(7, 3)).rows() == 7);
  CHECK(net.predict(Matrix::Ones(7, 3)).cols() == 2);
  c.hidden_widths = {0};
  CHECK_THROWS(c.validate());
}

TEST_CASE("network gradients match finite differences") {
  for (Activation act : {Activation::tanh, Activation::silu_layernorm}) {
    Rng rng(5);
    DenseNetworkConfig c;
    c.input_width = 3;
    c.hidden_widths = {6, 5};
    c.output_width = 2;
    c.activation = act;
    DenseNetwork net("net", c, rng);
    Matrix x = Matrix::Random(4, 3);
    const auto params = net.parameters();
    const double err =
        fdcheck::relative_error([&](Graph& g) { return ad::sum(ad::square(net.forward(g, x))); }, params);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("adam first step moves each weight by lr against the gradient sign") {
  Parameter p("p", Matrix::Constant(1, 3, 1.0));
  p.grad() = Matrix(1, 3);
  p.grad() << 2.0, -0.5, 0.0;
  Adam opt({&p}, AdamOptions{0.1});
  opt.step();
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(p.value()(0, 0) == doctest::Approx(0.9));
  CHECK(p.value()(0, 1) == doctest::Approx(1.1));
  CHECK(p.value()(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("adamw decay is decoupled from the gradient") {
  Parameter p("p", Matrix::Constant(1, 1, 2.0));
  p.zero_grad();
  AdamOptions o{0.1};
  o.weight_decay = 0.5;
  Adam opt({&p}, o);
  opt.step();
  CHECK(p.value()(0, 0) == doctest::Approx(2.0 * (1.0 - 0.05)));
}

TEST_CASE("adam rejects non-finite gradients by parameter name") {
  Parameter p("bad/w", Matrix::Zero(1, 1));
  p.grad() = Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
  Adam opt({&p}, AdamOptions{});
  try {
    opt.step();
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("bad/w") != std::string::npos);
  }
}

TEST_CASE("ema limits and interpolation") {
  Parameter online("o", Matrix::Constant(2, 2, 4.0));
  Parameter target("t", Matrix::Constant(2, 2, 0.0));
  Parameter* tg[] = {&target};
  const Parameter* on[] = {&online};
  ema_update(tg, on, 1.0);
  CHECK(target.value().isZero());
  ema_update(tg, on, 0.75);
  CHECK(target.value()(0, 0) == doctest::Approx(1.0));
  ema_update(tg, on, 0.0);
  CHECK(target.value() == online.value());
  CHECK_THROWS(ema_update(tg, on, 1.5));
}

TEST_CASE("checkpoint round trip") {
  Rng rng(9);
  DenseNetworkConfig c;
  c.input_width = 2;
  c.hidden_widths = {3};
  c.output_width = 1;
  DenseNetwork a("net", c, rng), b("net", c, rng);
  const auto path = temp_file("roundtrip.bin");
  const auto ap = std::as_const(a).parameters();
  save_checkpoint(path, ap);
  const auto tensors = read_checkpoint(path);
  REQUIRE(tensors.size() == ap.size());
  CHECK(tensors[0].name == "net/h0/w");
  CHECK(tensors[0].shape == std::vector<std::uint64_t>{2, 3});
  const auto bp = b.parameters();
  load_checkpoint(path, bp);
  for (std::size_t i = 0; i < ap.size(); ++i) CHECK(ap[i]->value() == bp[i]->value());

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::string(magic, 8) == "ARSQCKPT");
}

TEST_CASE("checkpoint rejects shape mismatches and missing tensors") {
  Rng rng(9);
  DenseNetworkConfig c;
  c.input_width = 2;
  c.hidden_widths = {3};
  DenseNetwork a("net", c, rng);
  const auto path = temp_file("mismatch.bin");
  const auto ap = std::as_const(a).parameters();
  save_checkpoint(path, ap);
  c.hidden_widths = {4};
  DenseNetwork wider("net", c, rng);
  const auto wp = wider.parameters();
  CHECK_THROWS(load_checkpoint(path, wp));
  DenseNetwork renamed("other", c, rng);
  const auto rp = renamed.parameters();
  CHECK_THROWS(load_checkpoint(path, rp));
  CHECK_THROWS(read_checkpoint(temp_file("does_not_exist.bin")));
}
