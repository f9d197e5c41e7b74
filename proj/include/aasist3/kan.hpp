#pragma once

// Kolmogorov-Arnold layer: every input->output edge carries its own
// univariate function phi(x) = w_b * PReLU(x) + w_s * sum_i c_i B_i(x),
// and each output sums its incoming edges. All parameters (spline
// coefficients, base/spline mix weights, PReLU slopes) are trainable.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "aasist3/bspline.hpp"
#include "aasist3/ops.hpp"
#include "aasist3/tensor.hpp"

namespace aasist3 {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

class KanLayer {
 public:
  // Parameters are drawn from rng: w_b and w_s Kaiming with fan_in = n_in,
  // coefficients from N(0, 0.1^2), PReLU slopes at 0.25.
  KanLayer(int n_in, int n_out, std::shared_ptr<const UnivariateBasis> basis, Rng& rng);
  KanLayer() = default;

  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }
  int n_basis() const { return basis_->size(); }
  const UnivariateBasis& basis() const { return *basis_; }

  // x: [rows, n_in] -> [rows, n_out]; differentiable in x and parameters.
  Tensor forward(const Tensor& x) const;

  void collect_params(const std::string& prefix, NamedParams& out);

  Tensor& coeffs() { return coeffs_; }
  Tensor& base_weight() { return base_weight_; }
  Tensor& spline_weight() { return spline_weight_; }
  Tensor& slopes() { return slopes_; }
  const Tensor& coeffs() const { return coeffs_; }
  const Tensor& base_weight() const { return base_weight_; }
  const Tensor& spline_weight() const { return spline_weight_; }
  const Tensor& slopes() const { return slopes_; }

 private:
  int n_in_ = 0;
  int n_out_ = 0;
  std::shared_ptr<const UnivariateBasis> basis_;
  Tensor coeffs_;         // [n_out, n_in, n_basis]
  Tensor base_weight_;    // [n_out, n_in]
  Tensor spline_weight_;  // [n_out, n_in]
  Tensor slopes_;         // [n_in]
};

// Single-edge probe phi_{q,p}(x); used by tests and diagnostics.
double phi_edge(const KanLayer& layer, int q, int p, double x);

}  // namespace aasist3
