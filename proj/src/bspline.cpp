#include "aasist3/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aasist3 {

SplineGrid build_grid(double alpha1, double alpha2, int grid_size, int order) {
  if (!(alpha2 > alpha1)) throw std::invalid_argument("build_grid: degenerate range");
  if (grid_size < 1) throw std::invalid_argument("build_grid: grid_size must be >= 1");
  if (order < 1) throw std::invalid_argument("build_grid: order must be >= 1");
  SplineGrid g;
  g.alpha1 = alpha1;
  g.alpha2 = alpha2;
  g.grid_size = grid_size;
  g.order = order;
  g.h = (alpha2 - alpha1) / static_cast<double>(grid_size);
  const int n = 2 * order + grid_size + 1;
  g.knots.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    g.knots[static_cast<std::size_t>(i)] = alpha1 + (i - order) * g.h;
  }
  return g;
}

// Triangular Cox-de Boor recursion around the knot span containing x. The
// uniform knot vector is virtually extended with the same spacing so spans
// next to the edges stay well defined; computed entries whose function
// index falls outside [0, n_basis) belong to those phantom extensions and
// are discarded.
void BsplineBasis::eval(double x, double* values, double* derivs) const {
  const int nb = grid_.n_basis();
  std::fill(values, values + nb, 0.0);
  if (derivs != nullptr) std::fill(derivs, derivs + nb, 0.0);

  const double t0 = grid_.knots.front();
  const double tlast = grid_.knots.back();
  if (!(x >= t0) || !(x < tlast)) return;  // compact support

  const int deg = grid_.order;
  const double h = grid_.h;
  auto knot = [&](int i) { return t0 + i * h; };
  int span = static_cast<int>(std::floor((x - t0) / h));
  span = std::clamp(span, 0, grid_.n_knots() - 2);
  if (x < knot(span)) --span;
  if (x >= knot(span + 1)) ++span;

  // After iteration j: tri[r] = B_{span-j+r, j}(x) for r in [0, j].
  std::vector<double> tri(static_cast<std::size_t>(deg) + 1, 0.0);
  std::vector<double> left(static_cast<std::size_t>(deg) + 1, 0.0);
  std::vector<double> right(static_cast<std::size_t>(deg) + 1, 0.0);
  std::vector<double> lower(static_cast<std::size_t>(deg), 0.0);
  tri[0] = 1.0;
  for (int j = 1; j <= deg; ++j) {
    if (j == deg) std::copy(tri.begin(), tri.begin() + deg, lower.begin());
    left[static_cast<std::size_t>(j)] = x - knot(span + 1 - j);
    right[static_cast<std::size_t>(j)] = knot(span + j) - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = tri[static_cast<std::size_t>(r)] /
                          (right[static_cast<std::size_t>(r + 1)] +
                           left[static_cast<std::size_t>(j - r)]);
      tri[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    tri[static_cast<std::size_t>(j)] = saved;
  }

  for (int r = 0; r <= deg; ++r) {
    const int i = span - deg + r;
    if (i < 0 || i >= nb) continue;
    values[i] = tri[static_cast<std::size_t>(r)];
    if (derivs != nullptr) {
      // B'_{i,deg} = (B_{i,deg-1} - B_{i+1,deg-1}) / h on a uniform grid.
      const double bl = r >= 1 ? lower[static_cast<std::size_t>(r - 1)] : 0.0;
      const double br = r < deg ? lower[static_cast<std::size_t>(r)] : 0.0;
      derivs[i] = (bl - br) / h;
    }
  }
}

std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  BsplineBasis basis(grid);
  std::vector<double> out(static_cast<std::size_t>(grid.n_basis()));
  basis.eval(x, out.data(), nullptr);
  return out;
}

}  // namespace aasist3
