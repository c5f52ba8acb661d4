#include <cmath>

#include "doctest.h"
#include "ncp/ndnet.hpp"

using namespace ncp;

namespace {

Mlpd random_net(const MlpSpec& spec, Stream& rng, double scale = 0.5) {
  Mlpd net(spec);
  for (Eigen::Index i = 0; i < net.params().size(); ++i) net.mutable_params()(i) = rng.normal(0.0, scale);
  return net;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Stream& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Straight loops over the documented parameter layout.
std::vector<double> scalar_forward(const Mlpd& net, const std::vector<double>& x) {
  const MlpSpec& spec = net.spec();
  const auto& p = net.params();
  std::vector<double> a = x;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_in(l), out = spec.layer_out(l);
    const std::size_t off = spec.layer_offset(l);
    std::vector<double> z(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = p(static_cast<Eigen::Index>(off + static_cast<std::size_t>(in * out + o)));
      for (int i = 0; i < in; ++i) s += p(static_cast<Eigen::Index>(off + static_cast<std::size_t>(i * out + o))) * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = s;
    }
    if (spec.has_activation(l)) {
      const double slope = p(static_cast<Eigen::Index>(off + static_cast<std::size_t>(in * out + out)));
      for (double& v : z) v = v < 0 ? slope * v : v;
    }
    a = std::move(z);
  }
  return a;
}

double weighted_output(const Mlpd& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& r) {
  return (net.forward(x).array() * r.array()).sum();
}

}  // namespace

TEST_CASE("spec layout and text form") {
  const MlpSpec spec{3, 2, {4, 5}};
  CHECK(spec.num_layers() == 3);
  CHECK(spec.param_count() == (3 * 4 + 4 + 1) + (4 * 5 + 5 + 1) + (5 * 2 + 2));
  CHECK(spec.layer_offset(1) == 17);
  CHECK(spec.to_string() == "3 4 5 2");
  CHECK(MlpSpec::parse("3 4 5 2") == spec);
  CHECK(MlpSpec::parse("7 1") == MlpSpec{7, 1, {}});
  CHECK_THROWS_AS(MlpSpec::parse("3"), ConfigError);
  CHECK_THROWS_AS(MlpSpec::parse("3 0 2"), ConfigError);
}

TEST_CASE("forward: degenerate and identity nets") {
  Mlpd zero(MlpSpec{3, 2, {4}});
  Stream rng(30);
  CHECK(zero.forward(random_matrix(5, 3, rng)).isZero(0.0));

  Mlpd id(MlpSpec{3, 3, {3}});
  auto& p = id.mutable_params();
  for (int l = 0; l < 2; ++l) {
    for (int i = 0; i < 3; ++i) p(static_cast<Eigen::Index>(id.spec().layer_offset(l)) + i * 3 + i) = 1.0;
  }
  p(id.slope_index(0)) = -7.0;
  const Eigen::MatrixXd x = random_matrix(4, 3, rng).cwiseAbs();
  CHECK(id.forward(x) == x);
  CHECK_THROWS_AS(id.forward(random_matrix(4, 2, rng)), ConfigError);
}

TEST_CASE("forward matches a scalar re-implementation") {
  Stream rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const MlpSpec spec{1 + rep % 3, 1 + rep % 4, {6, 5, 4}};
    const Mlpd net = random_net(spec, rng);
    const Eigen::MatrixXd x = random_matrix(7, spec.in_dim, rng);
    const Eigen::MatrixXd y = net.forward(x);
    MlpCache<double> cache;
    CHECK(net.forward(x, cache) == y);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      std::vector<double> xi;
      for (Eigen::Index j = 0; j < x.cols(); ++j) xi.push_back(x(i, j));
      const auto ref = scalar_forward(net, xi);
      for (Eigen::Index j = 0; j < y.cols(); ++j) CHECK(std::abs(y(i, j) - ref[static_cast<std::size_t>(j)]) < 1e-12);
    }
  }
}

TEST_CASE("permuting batch rows permutes outputs") {
  Stream rng(32);
  const Mlpd net = random_net(MlpSpec{3, 2, {8, 8}}, rng);
  const Eigen::MatrixXd x = random_matrix(9, 3, rng);
  const auto order = rng.permutation(9);
  Eigen::MatrixXd xp(9, 3);
  for (int i = 0; i < 9; ++i) xp.row(i) = x.row(order[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd y = net.forward(x), yp = net.forward(xp);
  for (int i = 0; i < 9; ++i) CHECK(yp.row(i) == y.row(order[static_cast<std::size_t>(i)]));
}

TEST_CASE("backward: closed forms") {
  Stream rng(33);
  const Mlpd lin = random_net(MlpSpec{3, 2, {}}, rng);
  const Eigen::MatrixXd x = random_matrix(4, 3, rng);
  const Eigen::MatrixXd up = random_matrix(4, 2, rng);
  MlpCache<double> cache;
  lin.forward(x, cache);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(lin.params().size());
  const Eigen::MatrixXd dx = lin.backward(cache, up, grad);
  const Eigen::MatrixXd dw = up.transpose() * x;
  CHECK((Eigen::Map<const Eigen::MatrixXd>(grad.data(), 2, 3) - dw).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((grad.tail(2) - up.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((dx - up * lin.weight(0)).cwiseAbs().maxCoeff() < 1e-14);

  const Mlpd deep = random_net(MlpSpec{3, 2, {5, 5}}, rng);
  deep.forward(x, cache);
  Eigen::VectorXd g2 = Eigen::VectorXd::Zero(deep.params().size());
  CHECK(deep.backward(cache, Eigen::MatrixXd::Zero(4, 2), g2).isZero(0.0));
  CHECK(g2.isZero(0.0));
}

TEST_CASE("backward rejects stale caches") {
  Stream rng(34);
  Mlpd net = random_net(MlpSpec{2, 1, {3}}, rng);
  const Eigen::MatrixXd x = random_matrix(2, 2, rng);
  MlpCache<double> cache;
  net.forward(x, cache);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.params().size());
  net.mutable_params()(0) += 1.0;
  CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Ones(2, 1), grad), std::logic_error);
  const Mlpd other = net;
  other.forward(x, cache);
  CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Ones(2, 1), grad), std::logic_error);
}

TEST_CASE("backward matches central finite differences") {
  Stream rng(35);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const MlpSpec spec{2 + rep % 2, 1 + rep % 3, {5, 4, 3}};
    Mlpd net = random_net(spec, rng);
    const Eigen::MatrixXd x = random_matrix(6, spec.in_dim, rng);
    const Eigen::MatrixXd r = random_matrix(6, spec.out_dim, rng);
    MlpCache<double> cache;
    net.forward(x, cache);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.params().size());
    const Eigen::MatrixXd dx = net.backward(cache, r, grad);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < grad.size(); ++j) {
      const double old = net.params()(j);
      net.mutable_params()(j) = old + h;
      const double up = weighted_output(net, x, r);
      net.mutable_params()(j) = old - h;
      const double down = weighted_output(net, x, r);
      net.mutable_params()(j) = old;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad(j)) / std::max({std::abs(fd), std::abs(grad(j)), 1e-6}));
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::MatrixXd xp = x, xm = x;
        xp(i, j) += h;
        xm(i, j) -= h;
        const double fd = (weighted_output(net, xp, r) - weighted_output(net, xm, r)) / (2 * h);
        worst = std::max(worst, std::abs(fd - dx(i, j)) / std::max({std::abs(fd), std::abs(dx(i, j)), 1e-6}));
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("init: reproducible He scaling") {
  const MlpSpec spec{256, 8, {256}};
  Mlpd a(spec), b(spec);
  Stream r1(36), r2(36);
  init_params(a, r1);
  init_params(b, r2);
  CHECK(a.params() == b.params());
  const auto w = a.weight(0);
  const double var = w.squaredNorm() / static_cast<double>(w.size()) - std::pow(w.mean(), 2);
  CHECK(std::abs(var - 2.0 / 256) < 0.1 * 2.0 / 256);
  CHECK(a.bias(0).isZero(0.0));
  CHECK(a.bias(1).isZero(0.0));
  CHECK(a.slope(0) == 0.25);
}

TEST_CASE("learning-rate schedule") {
  LrSchedule s;
  CHECK(s.at(1) == 1e-4);
  CHECK(s.at(1000) == 1e-4);
  CHECK(s.at(1001) == 1e-5);
  s.breakpoints = {10, 20};
  s.lrs = {3.0, 2.0, 1.0};
  CHECK(s.at(10) == 3.0);
  CHECK(s.at(11) == 2.0);
  CHECK(s.at(21) == 1.0);
  s.lrs = {1.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("adam: first steps") {
  AdamConfig cfg;
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
  const Eigen::VectorXd before = p;
  AdamState<double> st(4);
  adam_step<double>(p, Eigen::VectorXd::Zero(4), st, cfg);
  CHECK(p == before);
  CHECK(st.step == 1);

  AdamState<double> st2(4);
  Eigen::VectorXd g(4);
  g << 3.0, -0.01, 1e-3, -250.0;
  adam_step<double>(p, g, st2, cfg);
  for (int i = 0; i < 4; ++i) {
    // The first bias-corrected step is lr * g / (|g| + eps).
    const double expected = -1e-4 * g(i) / (std::abs(g(i)) + 1e-8);
    CHECK(std::abs((p(i) - before(i)) - expected) < 1e-15);
  }

  Eigen::VectorXd bad = g;
  bad(1) = std::nan("");
  const Eigen::VectorXd snapshot = p;
  CHECK_THROWS_AS(adam_step<double>(p, bad, st2, cfg), NumericError);
  CHECK(p == snapshot);
}

TEST_CASE("adam: quadratic objective decreases and runs are reproducible") {
  auto run = [](Eigen::VectorXd& x, std::vector<double>& trace) {
    AdamConfig cfg;
    cfg.schedule.lrs = {0.05, 0.05};
    AdamState<double> st(x.size());
    const Eigen::VectorXd target = Eigen::VectorXd::LinSpaced(x.size(), -2.0, 3.0);
    for (int t = 0; t < 200; ++t) {
      const Eigen::VectorXd diff = x - target;
      trace.push_back(diff.squaredNorm());
      adam_step<double>(x, 2.0 * diff, st, cfg);
    }
  };
  Eigen::VectorXd a = Eigen::VectorXd::Constant(5, 10.0), b = a;
  std::vector<double> ta, tb;
  run(a, ta);
  run(b, tb);
  CHECK(a == b);
  for (std::size_t t = 11; t < ta.size(); ++t) CHECK(ta[t] < ta[t - 1]);
}

TEST_CASE("single precision instantiation") {
  Mlp<float> net(MlpSpec{2, 1, {3}});
  Stream rng(37);
  init_params(net, rng);
  Eigen::MatrixXf x(2, 2);
  x << 1, 2, 3, 4;
  MlpCache<float> cache;
  const Eigen::MatrixXf y = net.forward(x, cache);
  Eigen::VectorXf grad = Eigen::VectorXf::Zero(net.params().size());
  net.backward(cache, Eigen::MatrixXf::Ones(2, 1), grad);
  CHECK(y.rows() == 2);
  CHECK(grad.allFinite());
  AdamState<float> st(net.params().size());
  adam_step<float>(net.mutable_params(), grad, st, AdamConfig{});
  CHECK(st.step == 1);
}
