#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "aasist3/kan.hpp"

using namespace aasist3;

namespace {

std::shared_ptr<const BsplineBasis> default_basis() {
  return std::make_shared<const BsplineBasis>(build_grid(-1.0, 1.0, 16, 4));
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// grid construction
// ---------------------------------------------------------------------------

TEST_CASE("default grid dimensions") {
  const SplineGrid g = build_grid(-1.0, 1.0, 16, 4);
  CHECK(g.n_knots() == 25);
  CHECK(g.h == doctest::Approx(0.125));
  CHECK(g.knots.front() == doctest::Approx(-1.5));
  CHECK(g.knots.back() == doctest::Approx(1.5));
  CHECK(g.n_basis() == 20);
  for (std::size_t i = 1; i < g.knots.size(); ++i) {
    CHECK(g.knots[i] - g.knots[i - 1] == doctest::Approx(0.125).epsilon(1e-12));
  }
  CHECK_THROWS_AS(build_grid(1.0, 1.0, 16, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(-1.0, 1.0, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(-1.0, 1.0, 16, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// basis evaluation
// ---------------------------------------------------------------------------

TEST_CASE("partition of unity inside the grid range") {
  const SplineGrid g = build_grid(-1.0, 1.0, 16, 4);
  for (int i = 0; i < 100; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / 99.0;
    const std::vector<double> basis = bspline_basis(x, g);
    double sum = 0.0;
    int nonzero = 0;
    for (double v : basis) {
      CHECK(v >= 0.0);
      sum += v;
      if (v != 0.0) ++nonzero;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
    CHECK(nonzero <= g.order + 1);
  }
}

TEST_CASE("compact support outside the extended knot span") {
  const SplineGrid g = build_grid(-1.0, 1.0, 16, 4);
  for (double x : {-1.5000001, -2.0, 1.5, 1.75, 100.0, -100.0}) {
    for (double v : bspline_basis(x, g)) CHECK(v == 0.0);
  }
}

TEST_CASE("degree-one basis reduces to hat functions") {
  // order=1 bases are piecewise-linear hats: exactly two nonzero entries
  // mixing linearly, the discrete remnant of the interval-indicator base
  // case of the recursion.
  const SplineGrid g = build_grid(-1.0, 1.0, 4, 1);
  const double x = -0.3;
  const std::vector<double> basis = bspline_basis(x, g);
  int nonzero = 0;
  double sum = 0.0;
  for (double v : basis) {
    if (v != 0.0) ++nonzero;
    sum += v;
  }
  CHECK(nonzero == 2);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("basis derivatives match finite differences") {
  const BsplineBasis basis(build_grid(-1.0, 1.0, 16, 4));
  const int nb = basis.size();
  std::vector<double> v(nb), d(nb), vp(nb), vm(nb);
  const double eps = 1e-6;
  for (double x : {-1.49, -1.0, -0.73, -0.125, 0.0, 0.2511, 0.99, 1.3}) {
    basis.eval(x, v.data(), d.data());
    basis.eval(x + eps, vp.data(), nullptr);
    basis.eval(x - eps, vm.data(), nullptr);
    for (int i = 0; i < nb; ++i) {
      const double fd = (vp[static_cast<std::size_t>(i)] - vm[static_cast<std::size_t>(i)]) /
                        (2.0 * eps);
      CHECK(std::fabs(d[static_cast<std::size_t>(i)] - fd) < 1e-5);
    }
  }
}

// ---------------------------------------------------------------------------
// phi_edge
// ---------------------------------------------------------------------------

TEST_CASE("phi_edge closed-form cases") {
  Rng rng(3);
  KanLayer layer(1, 1, default_basis(), rng);
  layer.coeffs().fill(0.0);
  layer.base_weight().fill(1.0);
  layer.spline_weight().fill(0.0);
  layer.slopes().fill(0.25);
  CHECK(phi_edge(layer, 0, 0, -2.0) == doctest::Approx(-0.5));

  layer.base_weight().fill(0.0);
  CHECK(phi_edge(layer, 0, 0, -2.0) == doctest::Approx(0.0));
  CHECK(phi_edge(layer, 0, 0, 0.6) == doctest::Approx(0.0));

  layer.spline_weight().fill(1.0);
  layer.coeffs().fill(1.0);
  for (int i = 0; i < 20; ++i) {
    const double x = -1.0 + 2.0 * i / 19.0;
    CHECK(std::fabs(phi_edge(layer, 0, 0, x) - 1.0) < 1e-9);
  }
}

TEST_CASE("out-of-grid inputs degrade to the base path") {
  Rng rng(5);
  KanLayer layer(1, 1, default_basis(), rng);
  layer.slopes().fill(0.25);
  const double x = -3.0;  // beyond the extended knot span
  const double expected = layer.base_weight().at(0) * 0.25 * x;
  CHECK(phi_edge(layer, 0, 0, x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("local support: a coefficient only acts inside its basis support") {
  Rng rng(7);
  KanLayer layer(1, 1, default_basis(), rng);
  const SplineGrid g = build_grid(-1.0, 1.0, 16, 4);
  const int i = 9;  // support [knots[9], knots[9 + order + 1])
  const double lo = g.knots[static_cast<std::size_t>(i)];
  const double hi = g.knots[static_cast<std::size_t>(i + g.order + 1)];
  const double inside = 0.5 * (lo + hi);
  const double outside = hi + 0.2;
  const double before_inside = phi_edge(layer, 0, 0, inside);
  const double before_outside = phi_edge(layer, 0, 0, outside);
  layer.coeffs().data()[i] += 2.0;
  CHECK(phi_edge(layer, 0, 0, inside) != doctest::Approx(before_inside));
  CHECK(phi_edge(layer, 0, 0, outside) == doctest::Approx(before_outside).epsilon(1e-15));
}

// ---------------------------------------------------------------------------
// kan_forward
// ---------------------------------------------------------------------------

TEST_CASE("single-edge layer reduces to phi_edge") {
  Rng rng(11);
  KanLayer layer(1, 1, default_basis(), rng);
  for (double x : {-1.2, -0.4, 0.0, 0.3, 0.99}) {
    Tensor in = Tensor::from_data({1, 1}, {x});
    CHECK(layer.forward(in).at(0) == doctest::Approx(phi_edge(layer, 0, 0, x)).epsilon(1e-12));
  }
}

TEST_CASE("outputs are sums of per-edge contributions") {
  Rng rng(13);
  KanLayer layer(2, 3, default_basis(), rng);
  const double x0 = 0.37, x1 = -0.61;
  Tensor in = Tensor::from_data({1, 2}, {x0, x1});
  Tensor out = layer.forward(in);
  for (int q = 0; q < 3; ++q) {
    const double expected = phi_edge(layer, q, 0, x0) + phi_edge(layer, q, 1, x1);
    CHECK(out.at(static_cast<std::size_t>(q)) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("forward is linear in the spline coefficients and mix weights") {
  Rng rng(17);
  KanLayer layer(3, 2, default_basis(), rng);
  Tensor in = random_tensor({4, 3}, rng);

  const std::vector<double> base_out = layer.forward(in).to_vector();

  // Scaling both mix weight families scales the output exactly.
  for (std::size_t i = 0; i < layer.base_weight().numel(); ++i) {
    layer.base_weight().data()[i] *= 2.0;
    layer.spline_weight().data()[i] *= 2.0;
  }
  const std::vector<double> doubled = layer.forward(in).to_vector();
  for (std::size_t i = 0; i < doubled.size(); ++i) {
    CHECK(doubled[i] == doctest::Approx(2.0 * base_out[i]).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < layer.base_weight().numel(); ++i) {
    layer.base_weight().data()[i] /= 2.0;
    layer.spline_weight().data()[i] /= 2.0;
  }

  // Additivity in the coefficients for a fixed base path.
  KanLayer probe(3, 2, default_basis(), rng);
  probe.base_weight().fill(0.0);
  probe.spline_weight().fill(1.0);
  std::vector<double> c1(probe.coeffs().numel()), c2(probe.coeffs().numel());
  for (std::size_t i = 0; i < c1.size(); ++i) {
    c1[i] = rng.uniform(-1.0, 1.0);
    c2[i] = rng.uniform(-1.0, 1.0);
  }
  auto run_with = [&](const std::vector<double>& c) {
    std::copy(c.begin(), c.end(), probe.coeffs().data());
    return probe.forward(in).to_vector();
  };
  const std::vector<double> y1 = run_with(c1);
  const std::vector<double> y2 = run_with(c2);
  std::vector<double> csum(c1.size());
  for (std::size_t i = 0; i < c1.size(); ++i) csum[i] = c1[i] + c2[i];
  const std::vector<double> ysum = run_with(csum);
  for (std::size_t i = 0; i < ysum.size(); ++i) {
    CHECK(ysum[i] == doctest::Approx(y1[i] + y2[i]).epsilon(1e-10));
  }
}

TEST_CASE("full layer gradients pass the finite-difference check") {
  Rng rng(19);
  KanLayer layer(4, 3, default_basis(), rng);
  Tensor in = random_tensor({5, 4}, rng, -1.2, 1.2);
  in.set_requires_grad(true);
  Tensor w = random_tensor({5, 3}, rng);
  auto f = [&]() { return sum_all(mul(layer.forward(in), w)); };
  const std::vector<Tensor> params = {in, layer.coeffs(), layer.base_weight(),
                                      layer.spline_weight(), layer.slopes()};
  CHECK(grad_check(f, params) < 1e-4);
}

TEST_CASE("dimension mismatch is rejected") {
  Rng rng(23);
  KanLayer layer(4, 3, default_basis(), rng);
  Tensor bad = Tensor::zeros({5, 3});
  CHECK_THROWS_AS(layer.forward(bad), std::invalid_argument);
}
