#include "aasist3/kan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aasist3/kernels.hpp"

namespace aasist3 {

KanLayer::KanLayer(int n_in, int n_out, std::shared_ptr<const UnivariateBasis> basis, Rng& rng)
    : n_in_(n_in), n_out_(n_out), basis_(std::move(basis)) {
  if (n_in < 1 || n_out < 1) throw std::invalid_argument("KanLayer: dimensions must be >= 1");
  const int nb = basis_->size();
  coeffs_ = normal_init({n_out, n_in, nb}, 0.1, rng);
  base_weight_ = kaiming_init({n_out, n_in}, n_in, rng);
  spline_weight_ = kaiming_init({n_out, n_in}, n_in, rng);
  slopes_ = Tensor::full({n_in}, 0.25);
  coeffs_.set_requires_grad(true);
  base_weight_.set_requires_grad(true);
  spline_weight_.set_requires_grad(true);
  slopes_.set_requires_grad(true);
}

Tensor KanLayer::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != n_in_) {
    throw std::invalid_argument("KanLayer: expected [rows, " + std::to_string(n_in_) +
                                "], got " + shape_str(x.shape()));
  }
  const int rows = x.dim(0);
  const int nb = basis_->size();
  const bool track = wants_grad(x) || wants_grad(coeffs_) || wants_grad(base_weight_) ||
                     wants_grad(spline_weight_) || wants_grad(slopes_);
  Tensor out = Tensor::zeros({rows, n_out_});
  if (track) out.set_requires_grad(true);

  const auto& kt = kernels::active();
  const double* xd = x.data();
  const double* cd = coeffs_.data();
  const double* wb = base_weight_.data();
  const double* ws = spline_weight_.data();
  const double* ad = slopes_.data();
  double* od = out.data();

  std::vector<double> bvals(static_cast<std::size_t>(n_in_) * nb);
  std::vector<double> base(static_cast<std::size_t>(n_in_));
  for (int r = 0; r < rows; ++r) {
    const double* xrow = xd + static_cast<std::size_t>(r) * n_in_;
    for (int p = 0; p < n_in_; ++p) {
      basis_->eval(xrow[p], bvals.data() + static_cast<std::size_t>(p) * nb, nullptr);
      base[static_cast<std::size_t>(p)] =
          xrow[p] > 0.0 ? xrow[p] : ad[p] * xrow[p];
    }
    double* orow = od + static_cast<std::size_t>(r) * n_out_;
    for (int q = 0; q < n_out_; ++q) {
      double acc = 0.0;
      const std::size_t edge0 = static_cast<std::size_t>(q) * n_in_;
      for (int p = 0; p < n_in_; ++p) {
        const double spline = kt.dot(cd + (edge0 + p) * nb,
                                     bvals.data() + static_cast<std::size_t>(p) * nb,
                                     static_cast<std::size_t>(nb));
        acc += wb[edge0 + p] * base[static_cast<std::size_t>(p)] + ws[edge0 + p] * spline;
      }
      orow[q] = acc;
    }
  }

  if (track) {
    // Basis values are cheap; the backward pass recomputes them instead of
    // keeping rows x n_in x n_basis alive on the tape.
    Tensor xc = x, oc = out;
    Tensor cc = coeffs_, wbc = base_weight_, wsc = spline_weight_, sc = slopes_;
    auto basis_ptr = basis_;
    const int ni = n_in_, no = n_out_;
    Tape::current()->record([xc, oc, cc, wbc, wsc, sc, basis_ptr, rows, ni, no, nb]() mutable {
      const auto& kt2 = kernels::active();
      const double* g = oc.grad();
      const double* xd2 = xc.data();
      const double* cd2 = cc.data();
      const double* wb2 = wbc.data();
      const double* ws2 = wsc.data();
      const double* ad2 = sc.data();
      double* xg = xc.requires_grad() ? xc.grad() : nullptr;
      double* cg = cc.requires_grad() ? cc.grad() : nullptr;
      double* wbg = wbc.requires_grad() ? wbc.grad() : nullptr;
      double* wsg = wsc.requires_grad() ? wsc.grad() : nullptr;
      double* ag = sc.requires_grad() ? sc.grad() : nullptr;

      std::vector<double> bvals(static_cast<std::size_t>(ni) * nb);
      std::vector<double> bder(static_cast<std::size_t>(ni) * nb);
      for (int r = 0; r < rows; ++r) {
        const double* xrow = xd2 + static_cast<std::size_t>(r) * ni;
        const double* grow = g + static_cast<std::size_t>(r) * no;
        for (int p = 0; p < ni; ++p) {
          basis_ptr->eval(xrow[p], bvals.data() + static_cast<std::size_t>(p) * nb,
                          bder.data() + static_cast<std::size_t>(p) * nb);
        }
        for (int q = 0; q < no; ++q) {
          const double gq = grow[q];
          if (gq == 0.0) continue;
          const std::size_t edge0 = static_cast<std::size_t>(q) * ni;
          for (int p = 0; p < ni; ++p) {
            const double xv = xrow[p];
            const double* bp = bvals.data() + static_cast<std::size_t>(p) * nb;
            const double* dp = bder.data() + static_cast<std::size_t>(p) * nb;
            const double* cp = cd2 + (edge0 + p) * nb;
            if (wbg != nullptr) {
              wbg[edge0 + p] += gq * (xv > 0.0 ? xv : ad2[p] * xv);
            }
            if (wsg != nullptr) {
              wsg[edge0 + p] += gq * kt2.dot(cp, bp, static_cast<std::size_t>(nb));
            }
            if (cg != nullptr) {
              kt2.axpy(gq * ws2[edge0 + p], bp, cg + (edge0 + p) * nb,
                       static_cast<std::size_t>(nb));
            }
            if (ag != nullptr && xv < 0.0) {
              ag[p] += gq * wb2[edge0 + p] * xv;
            }
            if (xg != nullptr) {
              const double dbase = xv > 0.0 ? 1.0 : ad2[p];
              const double dspline = kt2.dot(cp, dp, static_cast<std::size_t>(nb));
              xg[static_cast<std::size_t>(r) * ni + p] +=
                  gq * (wb2[edge0 + p] * dbase + ws2[edge0 + p] * dspline);
            }
          }
        }
      }
    });
  }
  return out;
}

void KanLayer::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".coeffs", coeffs_);
  out.emplace_back(prefix + ".base_weight", base_weight_);
  out.emplace_back(prefix + ".spline_weight", spline_weight_);
  out.emplace_back(prefix + ".slopes", slopes_);
}

double phi_edge(const KanLayer& layer, int q, int p, double x) {
  if (q < 0 || q >= layer.n_out() || p < 0 || p >= layer.n_in()) {
    throw std::invalid_argument("phi_edge: edge index out of range");
  }
  const int nb = layer.n_basis();
  std::vector<double> bvals(static_cast<std::size_t>(nb));
  layer.basis().eval(x, bvals.data(), nullptr);
  const std::size_t edge = static_cast<std::size_t>(q) * layer.n_in() + p;
  const double* c = layer.coeffs().data() + edge * nb;
  double spline = 0.0;
  for (int i = 0; i < nb; ++i) spline += c[i] * bvals[static_cast<std::size_t>(i)];
  const double a = layer.slopes().data()[p];
  const double base = x > 0.0 ? x : a * x;
  return layer.base_weight().data()[edge] * base + layer.spline_weight().data()[edge] * spline;
}

}  // namespace aasist3
