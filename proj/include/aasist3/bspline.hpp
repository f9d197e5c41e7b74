#pragma once

// Uniform B-spline grids and Cox-de Boor basis evaluation. The grid covers
// [alpha1, alpha2] with grid_size steps and is extended by `order` extra
// knots on each side, giving 2*order + grid_size + 1 knots and
// grid_size + order basis functions of degree `order`.

#include <memory>
#include <vector>

namespace aasist3 {

struct SplineGrid {
  double alpha1 = -1.0;
  double alpha2 = 1.0;
  int grid_size = 16;  // interior step count
  int order = 4;       // spline degree
  double h = 0.125;    // knot spacing
  std::vector<double> knots;

  int n_knots() const { return static_cast<int>(knots.size()); }
  int n_basis() const { return grid_size + order; }
};

SplineGrid build_grid(double alpha1, double alpha2, int grid_size, int order);

// A univariate function basis: evaluates all member functions (and
// optionally their derivatives) at one point.
class UnivariateBasis {
 public:
  virtual ~UnivariateBasis() = default;
  virtual int size() const = 0;
  // Writes size() entries into values (and derivs unless null).
  virtual void eval(double x, double* values, double* derivs) const = 0;
};

class BsplineBasis final : public UnivariateBasis {
 public:
  explicit BsplineBasis(SplineGrid grid) : grid_(std::move(grid)) {}

  int size() const override { return grid_.n_basis(); }
  void eval(double x, double* values, double* derivs) const override;

  const SplineGrid& grid() const { return grid_; }

 private:
  SplineGrid grid_;
};

// Convenience for tests and single-point probes.
std::vector<double> bspline_basis(double x, const SplineGrid& grid);

}  // namespace aasist3
