#include <doctest.h>

#include <cmath>
#include <omp.h>

#include "vf/core/error.hpp"
#include "vf/core/rng.hpp"
#include "vf/tensor/grad_check.hpp"
#include "vf/tensor/kernels.hpp"
#include "vf/tensor/tape.hpp"

using namespace vf;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("tensor construction rejects non-positive dims") {
  CHECK_THROWS_AS(Tensor<float>({2, 0, 3}), Error);
  Tensor<float> t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.dim(-1) == 3);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  CHECK_THROWS_AS(t.reshaped({4, 2}), Error);
}

TEST_CASE("gemm kernels match the naive reference") {
  Rng rng(3);
  for (auto [m, n, k] : {std::tuple{1, 1, 1}, {5, 7, 3}, {33, 17, 65}, {130, 9, 40}}) {
    auto a = random_tensor<double>({m, k}, rng), b = random_tensor<double>({k, n}, rng);
    std::vector<double> c(m * n, 0.5), r(m * n, 0.5);
    kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), c.data());
    kernels::reference::gemm(m, n, k, a.data().data(), b.data().data(), r.data());
    CHECK(max_abs_diff(c, r) < 1e-12);

    // A^T B with A stored [k x m]
    std::vector<double> at(k * m);
    kernels::transpose(m, k, a.data().data(), at.data());
    std::vector<double> c2(m * n, 0.5);
    kernels::gemm_tn(m, n, k, at.data(), b.data().data(), c2.data());
    CHECK(max_abs_diff(c2, r) < 1e-12);
  }
}

TEST_CASE("conv2d forward/backward match the direct reference") {
  Rng rng(5);
  kernels::Conv2dGeometry g;
  g.batch = 3;
  g.in_h = 11;
  g.in_w = 13;
  g.in_c = 2;
  g.k_h = 3;
  g.k_w = 4;
  g.out_c = 5;
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      g.stride = stride;
      g.pad_h = g.pad_w = pad;
      auto x = random_tensor<double>({g.batch, g.in_h, g.in_w, g.in_c}, rng);
      auto k = random_tensor<double>({g.k_h, g.k_w, g.in_c, g.out_c}, rng);
      auto b = random_tensor<double>({g.out_c}, rng);
      const std::size_t out_n = static_cast<std::size_t>(g.batch) * g.out_h() * g.out_w() * g.out_c;
      std::vector<double> y(out_n), yr(out_n);
      kernels::conv2d_forward(g, x.data().data(), k.data().data(), b.data().data(), y.data());
      kernels::reference::conv2d_forward(g, x.data().data(), k.data().data(), b.data().data(), yr.data());
      CHECK(max_abs_diff(y, yr) < 1e-12);

      auto gy = random_tensor<double>({static_cast<int>(out_n)}, rng);
      std::vector<double> gx(x.size()), gk(k.size()), gb(b.size());
      std::vector<double> gxr(x.size()), gkr(k.size()), gbr(b.size());
      kernels::conv2d_backward(g, x.data().data(), k.data().data(), gy.data().data(), gx.data(), gk.data(), gb.data());
      kernels::reference::conv2d_backward(g, x.data().data(), k.data().data(), gy.data().data(), gxr.data(),
                                          gkr.data(), gbr.data());
      CHECK(max_abs_diff(gx, gxr) < 1e-12);
      CHECK(max_abs_diff(gk, gkr) < 1e-12);
      CHECK(max_abs_diff(gb, gbr) < 1e-12);
    }
  }
}

TEST_CASE("conv output is bitwise independent of thread count and batch size") {
  Rng rng(9);
  kernels::Conv2dGeometry g;
  g.batch = 4;
  g.in_h = 20;
  g.in_w = 24;
  g.in_c = 1;
  g.k_h = g.k_w = 8;
  g.out_c = 16;
  g.stride = 4;
  auto x = random_tensor<float>({4, 20, 24, 1}, rng);
  auto k = random_tensor<float>({8, 8, 1, 16}, rng);
  auto b = random_tensor<float>({16}, rng);
  const std::size_t per = static_cast<std::size_t>(g.out_h()) * g.out_w() * g.out_c;
  std::vector<float> one(4 * per), many(4 * per), single(per);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kernels::conv2d_forward(g, x.data().data(), k.data().data(), b.data().data(), one.data());
  omp_set_num_threads(4);
  kernels::conv2d_forward(g, x.data().data(), k.data().data(), b.data().data(), many.data());
  omp_set_num_threads(saved);
  CHECK(one == many);
  g.batch = 1;
  const std::size_t in_per = 20 * 24;
  kernels::conv2d_forward(g, x.data().data() + 2 * in_per, k.data().data(), b.data().data(), single.data());
  CHECK(std::equal(single.begin(), single.end(), one.begin() + 2 * per));
}

TEST_CASE("conv shape arithmetic") {
  GradTape<float> tape;
  Rng rng(1);
  Var x = tape.input(random_tensor<float>({2, 86, 155, 1}, rng));
  Var k = tape.input(random_tensor<float>({8, 8, 1, 16}, rng));
  Var b = tape.input(Tensor<float>({16}));
  Var y = tape.conv2d(x, k, b, 4, 0, 0);
  CHECK(tape.value(y).shape() == Shape{2, 20, 37, 16});
  Var k2 = tape.input(random_tensor<float>({4, 4, 16, 32}, rng));
  Var b2 = tape.input(Tensor<float>({32}));
  Var y2 = tape.conv2d(y, k2, b2, 2, 0, 0);
  CHECK(tape.value(y2).shape() == Shape{2, 9, 17, 32});
  Var bad = tape.input(random_tensor<float>({4, 4, 3, 32}, rng));
  CHECK_THROWS_AS(tape.conv2d(y, bad, b2, 2, 0, 0), Error);
}

TEST_CASE("forward ops reject non-finite results") {
  GradTape<float> tape;
  Tensor<float> t({1, 2});
  t[0] = 1.0f;
  t[1] = std::nanf("");
  Var x = tape.input(t);
  CHECK_THROWS_AS(tape.scale(x, 2.0f), Error);
}

// Central-difference checks, one per op, in double precision.
TEST_CASE("gradient check per op") {
  Rng rng(11);
  auto check = [&](const char* name, const std::function<Var(GradTape<double>&, std::vector<Var>&)>& build,
                   std::vector<Shape> shapes, double lo = -1.0, double hi = 1.0) {
    std::vector<Tensor<double>> values, grads(shapes.size());
    for (auto& s : shapes) values.push_back(random_tensor<double>(s, rng, lo, hi));
    std::vector<CheckedTensor> checked;
    for (std::size_t i = 0; i < values.size(); ++i) checked.push_back({name + std::to_string(i), &values[i], &grads[i]});
    auto fwd = [&](GradTape<double>& tape) {
      std::vector<Var> vars;
      for (std::size_t i = 0; i < values.size(); ++i) vars.push_back(tape.parameter(values[i], &grads[i]));
      return build(tape, vars);
    };
    auto report = grad_check(fwd, checked, 1e-6, rng, 10);
    INFO(name, " worst ", report.worst, " err ", report.max_rel_error, " ", report.failure);
    CHECK(report.passed(1e-4));
  };
  check("conv", [](auto& t, auto& v) { return t.conv2d(v[0], v[1], v[2], 2, 1, 1); },
        {{2, 7, 9, 3}, {3, 3, 3, 4}, {4}});
  check("linear", [](auto& t, auto& v) { return t.linear(v[0], v[1], v[2]); }, {{3, 5}, {5, 4}, {4}});
  check("leaky", [](auto& t, auto& v) { return t.leaky_relu(v[0], 0.2); }, {{4, 6}});
  check("swish", [](auto& t, auto& v) { return t.swish(v[0]); }, {{4, 6}}, -3, 3);
  check("sigmoid", [](auto& t, auto& v) { return t.sigmoid(v[0]); }, {{4, 6}}, -3, 3);
  check("softmax", [](auto& t, auto& v) { return t.softmax(v[0]); }, {{3, 7}}, -3, 3);
  check("mul", [](auto& t, auto& v) { return t.mul(v[0], v[1]); }, {{3, 4}, {3, 4}});
  check("add", [](auto& t, auto& v) { return t.add(v[0], v[1]); }, {{3, 4}, {3, 4}});
  check("scale", [](auto& t, auto& v) { return t.scale(v[0], 256.0); }, {{3, 4}});
  check("flatten", [](auto& t, auto& v) { return t.scale(t.flatten(v[0]), 2.0); }, {{2, 3, 4, 2}});
  check("normalize",
        [](auto& t, auto& v) {
          const double mean[] = {0.3, -0.2}, sd[] = {0.5, 2.0};
          return t.normalize(v[0], mean, sd, 1e-8);
        },
        {{2, 3, 2}});
}

TEST_CASE("multi-seed backward equals the sum of single-seed backwards") {
  Rng rng(21);
  auto w = random_tensor<double>({4, 3}, rng), b = random_tensor<double>({3}, rng);
  auto x = random_tensor<double>({2, 4}, rng);
  Tensor<double> s1({2, 3}, 1.0), s2({2, 3}, -0.5);
  Tensor<double> g_two({4, 3}), g_single({4, 3});
  {
    Tensor<double> gb({3});
    GradTape<double> tape;
    Var y = tape.linear(tape.input(x), tape.parameter(w, &g_two), tape.parameter(b, &gb));
    Var h1 = tape.sigmoid(y), h2 = tape.swish(y);
    std::vector<GradTape<double>::Seed> seeds = {{h1, &s1}, {h2, &s2}};
    tape.backward(std::span<const GradTape<double>::Seed>(seeds));
  }
  for (int which = 0; which < 2; ++which) {
    Tensor<double> gb({3});
    GradTape<double> tape;
    Var y = tape.linear(tape.input(x), tape.parameter(w, &g_single), tape.parameter(b, &gb));
    Var h = which == 0 ? tape.sigmoid(y) : tape.swish(y);
    tape.backward(h, which == 0 ? s1 : s2);
  }
  for (std::size_t i = 0; i < g_two.size(); ++i) CHECK(g_two[i] == doctest::Approx(g_single[i]).epsilon(1e-12));
}
