#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "aasist3/kernels.hpp"
#include "aasist3/rng.hpp"

using namespace aasist3;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Sizes straddling the vector widths so remainder tails are exercised.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 1000, 4097};

}  // namespace

TEST_CASE("active kernel table is selectable") {
  const auto& table = kernels::active();
  CHECK(table.name != nullptr);
  CHECK(kernels::force("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK(kernels::force("auto"));
}

TEST_CASE("simd kernels match the scalar reference") {
  const auto& ref = kernels::scalar_table();
  REQUIRE(kernels::force("auto"));
  const auto& fast = kernels::active();
  INFO("active table: ", fast.name);

  Rng rng(1234);
  for (std::size_t n : kSizes) {
    const std::vector<double> a = random_vec(n, rng);
    const std::vector<double> b = random_vec(n, rng);
    const double tol = 1e-12 * static_cast<double>(n + 1);

    CHECK(std::fabs(fast.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol);
    CHECK(std::fabs(fast.sum(a.data(), n) - ref.sum(a.data(), n)) <= tol);

    std::vector<double> y1 = b, y2 = b;
    fast.axpy(0.37, a.data(), y1.data(), n);
    ref.axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

    std::vector<double> o1(n), o2(n);
    fast.add(a.data(), b.data(), o1.data(), n);
    ref.add(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);

    fast.mul(a.data(), b.data(), o1.data(), n);
    ref.mul(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);

    fast.scale(a.data(), -2.5, o1.data(), n);
    ref.scale(a.data(), -2.5, o2.data(), n);
    CHECK(o1 == o2);
  }
}

TEST_CASE("dot handles aliased and empty input") {
  const auto& fast = kernels::active();
  CHECK(fast.dot(nullptr, nullptr, 0) == 0.0);
  const std::vector<double> a = {1.0, 2.0, 3.0};
  CHECK(fast.dot(a.data(), a.data(), 3) == doctest::Approx(14.0));
}
