#include "aasist3/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "aasist3/kernels.hpp"

namespace aasist3 {

namespace {

const double kSeluAlpha = 1.6732632423;
const double kSeluLambda = 1.0507009873;

void ensure_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

// Decomposes a shape around `axis` into outer x len x inner strides.
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " invalid for " +
                                shape_str(shape));
  }
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= static_cast<std::size_t>(shape[i]);
  v.len = static_cast<std::size_t>(shape[axis]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i) {
    v.inner *= static_cast<std::size_t>(shape[i]);
  }
  return v;
}

Tensor make_output(const Shape& shape, bool track) {
  Tensor out = Tensor::zeros(shape);
  if (track) out.set_requires_grad(true);
  return out;
}

// Unary elementwise op with derivative computed from (x, y).
template <typename Fwd, typename Dfn>
Tensor unary_elementwise(const Tensor& x, Fwd fwd, Dfn dfn) {
  const bool track = wants_grad(x);
  Tensor out = make_output(x.shape(), track);
  const std::size_t n = x.numel();
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i) od[i] = fwd(xd[i]);
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, dfn, n]() mutable {
      const double* g = oc.grad();
      const double* xd2 = xc.data();
      const double* od2 = oc.data();
      double* xg = xc.grad();
      for (std::size_t i = 0; i < n; ++i) xg[i] += g[i] * dfn(xd2[i], od2[i]);
    });
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  ensure_same_shape(a, b, "add");
  const bool track = wants_grad(a) || wants_grad(b);
  Tensor out = make_output(a.shape(), track);
  kernels::active().add(a.data(), b.data(), out.data(), a.numel());
  if (track) {
    Tensor ac = a, bc = b, oc = out;
    Tape::current()->record([ac, bc, oc]() mutable {
      const std::size_t n = oc.numel();
      if (ac.requires_grad()) ac.add_grad(oc.grad(), n);
      if (bc.requires_grad()) bc.add_grad(oc.grad(), n);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  ensure_same_shape(a, b, "sub");
  const bool track = wants_grad(a) || wants_grad(b);
  Tensor out = make_output(a.shape(), track);
  const std::size_t n = a.numel();
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] - bd[i];
  if (track) {
    Tensor ac = a, bc = b, oc = out;
    Tape::current()->record([ac, bc, oc]() mutable {
      const std::size_t n2 = oc.numel();
      const double* g = oc.grad();
      if (ac.requires_grad()) ac.add_grad(g, n2);
      if (bc.requires_grad()) {
        double* bg = bc.grad();
        for (std::size_t i = 0; i < n2; ++i) bg[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  ensure_same_shape(a, b, "mul");
  const bool track = wants_grad(a) || wants_grad(b);
  Tensor out = make_output(a.shape(), track);
  kernels::active().mul(a.data(), b.data(), out.data(), a.numel());
  if (track) {
    Tensor ac = a, bc = b, oc = out;
    Tape::current()->record([ac, bc, oc]() mutable {
      const std::size_t n = oc.numel();
      const double* g = oc.grad();
      if (ac.requires_grad()) {
        double* ag = ac.grad();
        const double* bd = bc.data();
        for (std::size_t i = 0; i < n; ++i) ag[i] += g[i] * bd[i];
      }
      if (bc.requires_grad()) {
        double* bg = bc.grad();
        const double* ad = ac.data();
        for (std::size_t i = 0; i < n; ++i) bg[i] += g[i] * ad[i];
      }
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  const bool track = wants_grad(a);
  Tensor out = make_output(a.shape(), track);
  const std::size_t n = a.numel();
  const double* ad = a.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] + s;
  if (track) {
    Tensor ac = a, oc = out;
    Tape::current()->record([ac, oc]() mutable { ac.add_grad(oc.grad(), oc.numel()); });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  const bool track = wants_grad(a);
  Tensor out = make_output(a.shape(), track);
  kernels::active().scale(a.data(), s, out.data(), a.numel());
  if (track) {
    Tensor ac = a, oc = out;
    Tape::current()->record([ac, oc, s]() mutable {
      kernels::active().axpy(s, oc.grad(), ac.grad(), oc.numel());
    });
  }
  return out;
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  ensure_same_shape(a, b, "maximum");
  const bool track = wants_grad(a) || wants_grad(b);
  Tensor out = make_output(a.shape(), track);
  const std::size_t n = a.numel();
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] >= bd[i] ? ad[i] : bd[i];
  if (track) {
    Tensor ac = a, bc = b, oc = out;
    Tape::current()->record([ac, bc, oc]() mutable {
      const std::size_t n2 = oc.numel();
      const double* g = oc.grad();
      const double* ad2 = ac.data();
      const double* bd2 = bc.data();
      double* ag = ac.requires_grad() ? ac.grad() : nullptr;
      double* bg = bc.requires_grad() ? bc.grad() : nullptr;
      for (std::size_t i = 0; i < n2; ++i) {
        if (ad2[i] >= bd2[i]) {
          if (ag) ag[i] += g[i];
        } else if (bg) {
          bg[i] += g[i];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise functions
// ---------------------------------------------------------------------------

Tensor tanh_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor abs_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sin_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor selu(const Tensor& x) {
  return unary_elementwise(
      x,
      [](double v) {
        return v > 0.0 ? kSeluLambda * v : kSeluLambda * kSeluAlpha * (std::exp(v) - 1.0);
      },
      [](double v, double) {
        return v > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(v);
      });
}

Tensor prelu(const Tensor& x, const Tensor& slopes) {
  if (x.ndim() < 1 || slopes.ndim() != 1 || slopes.dim(0) != x.shape().back()) {
    throw std::invalid_argument("prelu: slope extent must match the feature axis");
  }
  const bool track = wants_grad(x) || wants_grad(slopes);
  Tensor out = make_output(x.shape(), track);
  const std::size_t n = x.numel();
  const std::size_t d = static_cast<std::size_t>(slopes.dim(0));
  const double* xd = x.data();
  const double* sd = slopes.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    od[i] = xd[i] > 0.0 ? xd[i] : sd[i % d] * xd[i];
  }
  if (track) {
    Tensor xc = x, sc = slopes, oc = out;
    Tape::current()->record([xc, sc, oc, n, d]() mutable {
      const double* g = oc.grad();
      const double* xd2 = xc.data();
      const double* sd2 = sc.data();
      double* xg = xc.requires_grad() ? xc.grad() : nullptr;
      double* sg = sc.requires_grad() ? sc.grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        if (xg) xg[i] += g[i] * (xd2[i] > 0.0 ? 1.0 : sd2[i % d]);
        if (sg && xd2[i] < 0.0) sg[i % d] += g[i] * xd2[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, const Shape& new_shape) {
  if (numel_of(new_shape) != x.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " -> " +
                                shape_str(new_shape) + " changes element count");
  }
  const bool track = wants_grad(x);
  Tensor out = Tensor::from_data(new_shape, x.to_vector());
  if (track) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc]() mutable { xc.add_grad(oc.grad(), oc.numel()); });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape out_shape = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(out_shape.size())) {
    throw std::invalid_argument("concat: axis invalid");
  }
  int total = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != out_shape[i]) {
        throw std::invalid_argument("concat: extent mismatch off the concat axis");
      }
    }
    total += s[static_cast<std::size_t>(axis)];
    track = track || wants_grad(p);
  }
  out_shape[static_cast<std::size_t>(axis)] = total;
  Tensor out = make_output(out_shape, track);
  const AxisView ov = axis_view(out_shape, axis);
  double* od = out.data();
  std::size_t written = 0;
  for (const Tensor& p : parts) {
    const AxisView pv = axis_view(p.shape(), axis);
    const double* pd = p.data();
    for (std::size_t o = 0; o < pv.outer; ++o) {
      std::copy(pd + o * pv.len * pv.inner, pd + (o + 1) * pv.len * pv.inner,
                od + (o * ov.len + written) * ov.inner);
    }
    written += pv.len;
  }
  if (track) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    Tape::current()->record([pc, oc, ov, axis]() mutable {
      const double* g = oc.grad();
      std::size_t offset = 0;
      for (Tensor& p : pc) {
        const AxisView pv = axis_view(p.shape(), axis);
        if (p.requires_grad()) {
          double* pg = p.grad();
          for (std::size_t o = 0; o < pv.outer; ++o) {
            const double* src = g + (o * ov.len + offset) * ov.inner;
            double* dst = pg + o * pv.len * pv.inner;
            for (std::size_t i = 0; i < pv.len * pv.inner; ++i) dst[i] += src[i];
          }
        }
        offset += pv.len;
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, int begin, int end) {
  const AxisView v = axis_view(x.shape(), axis);
  if (begin < 0 || end <= begin || end > static_cast<int>(v.len)) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for extent " +
                                std::to_string(v.len));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = end - begin;
  const bool track = wants_grad(x);
  Tensor out = make_output(out_shape, track);
  const std::size_t keep = static_cast<std::size_t>(end - begin);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy(xd + (o * v.len + begin) * v.inner, xd + (o * v.len + end) * v.inner,
              od + o * keep * v.inner);
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, v, begin, keep]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = g + o * keep * v.inner;
        double* dst = xg + (o * v.len + static_cast<std::size_t>(begin)) * v.inner;
        for (std::size_t i = 0; i < keep * v.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor gather_nodes(const Tensor& x, const std::vector<int>& indices, int batch, int keep) {
  if (x.ndim() != 3 || x.dim(0) != batch) {
    throw std::invalid_argument("gather_nodes: expected [B, N, D] input");
  }
  if (indices.size() != static_cast<std::size_t>(batch) * static_cast<std::size_t>(keep)) {
    throw std::invalid_argument("gather_nodes: index count mismatch");
  }
  const int n = x.dim(1);
  const int d = x.dim(2);
  for (int idx : indices) {
    if (idx < 0 || idx >= n) throw std::invalid_argument("gather_nodes: index out of range");
  }
  const bool track = wants_grad(x);
  Tensor out = make_output({batch, keep, d}, track);
  const double* xd = x.data();
  double* od = out.data();
  for (int b = 0; b < batch; ++b) {
    for (int k = 0; k < keep; ++k) {
      const int src = indices[static_cast<std::size_t>(b * keep + k)];
      std::copy(xd + (static_cast<std::size_t>(b) * n + src) * d,
                xd + (static_cast<std::size_t>(b) * n + src + 1) * d,
                od + (static_cast<std::size_t>(b) * keep + k) * d);
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    std::vector<int> idx = indices;
    Tape::current()->record([xc, oc, idx, batch, keep, n, d]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (int b = 0; b < batch; ++b) {
        for (int k = 0; k < keep; ++k) {
          const int src = idx[static_cast<std::size_t>(b * keep + k)];
          const double* gs = g + (static_cast<std::size_t>(b) * keep + k) * d;
          double* xs = xg + (static_cast<std::size_t>(b) * n + src) * d;
          for (int j = 0; j < d; ++j) xs[j] += gs[j];
        }
      }
    });
  }
  return out;
}

Tensor add_broadcast_nodes(const Tensor& x, const Tensor& pe) {
  if (x.ndim() != 3 || pe.ndim() != 2 || pe.dim(0) != x.dim(1) || pe.dim(1) != x.dim(2)) {
    throw std::invalid_argument("add_broadcast_nodes: expected [B,N,D] + [N,D], got " +
                                shape_str(x.shape()) + " + " + shape_str(pe.shape()));
  }
  const bool track = wants_grad(x) || wants_grad(pe);
  Tensor out = make_output(x.shape(), track);
  const std::size_t b = static_cast<std::size_t>(x.dim(0));
  const std::size_t nd = pe.numel();
  const double* xd = x.data();
  const double* pd = pe.data();
  double* od = out.data();
  for (std::size_t i = 0; i < b; ++i) {
    kernels::active().add(xd + i * nd, pd, od + i * nd, nd);
  }
  if (track) {
    Tensor xc = x, pc = pe, oc = out;
    Tape::current()->record([xc, pc, oc, b, nd]() mutable {
      const double* g = oc.grad();
      if (xc.requires_grad()) xc.add_grad(g, oc.numel());
      if (pc.requires_grad()) {
        double* pg = pc.grad();
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < nd; ++j) pg[j] += g[i * nd + j];
        }
      }
    });
  }
  return out;
}

Tensor mul_broadcast_stack(const Tensor& x, const Tensor& s) {
  if (x.ndim() != 3 || s.ndim() != 2 || s.dim(0) != x.dim(0) || s.dim(1) != x.dim(2)) {
    throw std::invalid_argument("mul_broadcast_stack: expected [B,N,D] * [B,D], got " +
                                shape_str(x.shape()) + " * " + shape_str(s.shape()));
  }
  const bool track = wants_grad(x) || wants_grad(s);
  Tensor out = make_output(x.shape(), track);
  const int b = x.dim(0), n = x.dim(1), d = x.dim(2);
  const double* xd = x.data();
  const double* sd = s.data();
  double* od = out.data();
  for (int bi = 0; bi < b; ++bi) {
    for (int ni = 0; ni < n; ++ni) {
      kernels::active().mul(xd + (static_cast<std::size_t>(bi) * n + ni) * d,
                            sd + static_cast<std::size_t>(bi) * d,
                            od + (static_cast<std::size_t>(bi) * n + ni) * d,
                            static_cast<std::size_t>(d));
    }
  }
  if (track) {
    Tensor xc = x, sc = s, oc = out;
    Tape::current()->record([xc, sc, oc, b, n, d]() mutable {
      const double* g = oc.grad();
      const double* xd2 = xc.data();
      const double* sd2 = sc.data();
      double* xg = xc.requires_grad() ? xc.grad() : nullptr;
      double* sg = sc.requires_grad() ? sc.grad() : nullptr;
      for (int bi = 0; bi < b; ++bi) {
        for (int ni = 0; ni < n; ++ni) {
          const std::size_t row = (static_cast<std::size_t>(bi) * n + ni) * d;
          for (int j = 0; j < d; ++j) {
            if (xg) xg[row + j] += g[row + j] * sd2[static_cast<std::size_t>(bi) * d + j];
            if (sg) sg[static_cast<std::size_t>(bi) * d + j] += g[row + j] * xd2[row + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor expand_batch(const Tensor& v, int batch) {
  if (v.ndim() != 1) throw std::invalid_argument("expand_batch: expected a vector");
  const bool track = wants_grad(v);
  const int d = v.dim(0);
  Tensor out = make_output({batch, d}, track);
  const double* vd = v.data();
  double* od = out.data();
  for (int b = 0; b < batch; ++b) {
    std::copy(vd, vd + d, od + static_cast<std::size_t>(b) * d);
  }
  if (track) {
    Tensor vc = v, oc = out;
    Tape::current()->record([vc, oc, batch, d]() mutable {
      const double* g = oc.grad();
      double* vg = vc.grad();
      for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < d; ++j) vg[j] += g[static_cast<std::size_t>(b) * d + j];
      }
    });
  }
  return out;
}

Tensor pairwise_mul(const Tensor& x) {
  if (x.ndim() != 3) throw std::invalid_argument("pairwise_mul: expected [B,N,D]");
  const int b = x.dim(0), n = x.dim(1), d = x.dim(2);
  const bool track = wants_grad(x);
  Tensor out = make_output({b * n * n, d}, track);
  const auto& kt = kernels::active();
  const double* xd = x.data();
  double* od = out.data();
  for (int bi = 0; bi < b; ++bi) {
    const double* nodes = xd + static_cast<std::size_t>(bi) * n * d;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        kt.mul(nodes + static_cast<std::size_t>(i) * d, nodes + static_cast<std::size_t>(j) * d,
               od + ((static_cast<std::size_t>(bi) * n + i) * n + j) * d,
               static_cast<std::size_t>(d));
      }
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, b, n, d]() mutable {
      const double* g = oc.grad();
      const double* xd2 = xc.data();
      double* xg = xc.grad();
      for (int bi = 0; bi < b; ++bi) {
        const double* nodes = xd2 + static_cast<std::size_t>(bi) * n * d;
        double* gnodes = xg + static_cast<std::size_t>(bi) * n * d;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const double* grow = g + ((static_cast<std::size_t>(bi) * n + i) * n + j) * d;
            // d out[i,j] / d x[i] = x[j] and vice versa.
            for (int k = 0; k < d; ++k) {
              gnodes[static_cast<std::size_t>(i) * d + k] +=
                  grow[k] * nodes[static_cast<std::size_t>(j) * d + k];
              gnodes[static_cast<std::size_t>(j) * d + k] +=
                  grow[k] * nodes[static_cast<std::size_t>(i) * d + k];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor mul_broadcast_gate(const Tensor& x, const Tensor& g) {
  if (x.ndim() != 3 || g.ndim() != 2 || g.dim(0) != x.dim(0) || g.dim(1) != x.dim(1)) {
    throw std::invalid_argument("mul_broadcast_gate: expected [B,N,D] * [B,N], got " +
                                shape_str(x.shape()) + " * " + shape_str(g.shape()));
  }
  const int b = x.dim(0), n = x.dim(1), d = x.dim(2);
  const bool track = wants_grad(x) || wants_grad(g);
  Tensor out = make_output(x.shape(), track);
  const auto& kt = kernels::active();
  const double* xd = x.data();
  const double* gd = g.data();
  double* od = out.data();
  for (int bi = 0; bi < b; ++bi) {
    for (int ni = 0; ni < n; ++ni) {
      const std::size_t row = (static_cast<std::size_t>(bi) * n + ni) * d;
      kt.scale(xd + row, gd[static_cast<std::size_t>(bi) * n + ni], od + row,
               static_cast<std::size_t>(d));
    }
  }
  if (track) {
    Tensor xc = x, gc = g, oc = out;
    Tape::current()->record([xc, gc, oc, b, n, d]() mutable {
      const auto& kt2 = kernels::active();
      const double* og = oc.grad();
      const double* xd2 = xc.data();
      const double* gd2 = gc.data();
      double* xg = xc.requires_grad() ? xc.grad() : nullptr;
      double* gg = gc.requires_grad() ? gc.grad() : nullptr;
      for (int bi = 0; bi < b; ++bi) {
        for (int ni = 0; ni < n; ++ni) {
          const std::size_t row = (static_cast<std::size_t>(bi) * n + ni) * d;
          const std::size_t gi = static_cast<std::size_t>(bi) * n + ni;
          if (xg) kt2.axpy(gd2[gi], og + row, xg + row, static_cast<std::size_t>(d));
          if (gg) gg[gi] += kt2.dot(og + row, xd2 + row, static_cast<std::size_t>(d));
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

namespace {

void matmul_fwd(const double* a, const double* b, double* c, int m, int k, int n) {
  const auto& kt = kernels::active();
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      kt.axpy(a[static_cast<std::size_t>(i) * k + kk], b + static_cast<std::size_t>(kk) * n,
              crow, static_cast<std::size_t>(n));
    }
  }
}

// dA = dC * B^T, dB = A^T * dC
void matmul_bwd(const double* a, const double* b, const double* gc, double* ga, double* gb,
                int m, int k, int n) {
  const auto& kt = kernels::active();
  if (ga != nullptr) {
    for (int i = 0; i < m; ++i) {
      const double* gr = gc + static_cast<std::size_t>(i) * n;
      for (int kk = 0; kk < k; ++kk) {
        ga[static_cast<std::size_t>(i) * k + kk] +=
            kt.dot(gr, b + static_cast<std::size_t>(kk) * n, static_cast<std::size_t>(n));
      }
    }
  }
  if (gb != nullptr) {
    for (int i = 0; i < m; ++i) {
      const double* gr = gc + static_cast<std::size_t>(i) * n;
      for (int kk = 0; kk < k; ++kk) {
        kt.axpy(a[static_cast<std::size_t>(i) * k + kk], gr,
                gb + static_cast<std::size_t>(kk) * n, static_cast<std::size_t>(n));
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const bool track = wants_grad(a) || wants_grad(b);
  Tensor out = make_output({m, n}, track);
  matmul_fwd(a.data(), b.data(), out.data(), m, k, n);
  if (track) {
    Tensor ac = a, bc = b, oc = out;
    Tape::current()->record([ac, bc, oc, m, k, n]() mutable {
      matmul_bwd(ac.data(), bc.data(), oc.grad(), ac.requires_grad() ? ac.grad() : nullptr,
                 bc.requires_grad() ? bc.grad() : nullptr, m, k, n);
    });
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const int bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  const bool track = wants_grad(a) || wants_grad(b);
  Tensor out = make_output({bs, m, n}, track);
  for (int i = 0; i < bs; ++i) {
    matmul_fwd(a.data() + static_cast<std::size_t>(i) * m * k,
               b.data() + static_cast<std::size_t>(i) * k * n,
               out.data() + static_cast<std::size_t>(i) * m * n, m, k, n);
  }
  if (track) {
    Tensor ac = a, bc = b, oc = out;
    Tape::current()->record([ac, bc, oc, bs, m, k, n]() mutable {
      for (int i = 0; i < bs; ++i) {
        matmul_bwd(ac.data() + static_cast<std::size_t>(i) * m * k,
                   bc.data() + static_cast<std::size_t>(i) * k * n,
                   oc.grad() + static_cast<std::size_t>(i) * m * n,
                   ac.requires_grad() ? ac.grad() + static_cast<std::size_t>(i) * m * k : nullptr,
                   bc.requires_grad() ? bc.grad() + static_cast<std::size_t>(i) * k * n : nullptr,
                   m, k, n);
      }
    });
  }
  return out;
}

Tensor transpose_last2(const Tensor& x) {
  if (x.ndim() < 2) throw std::invalid_argument("transpose_last2: rank must be >= 2");
  Shape out_shape = x.shape();
  const int m = out_shape[out_shape.size() - 2];
  const int n = out_shape[out_shape.size() - 1];
  std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
  const std::size_t outer = x.numel() / (static_cast<std::size_t>(m) * n);
  const bool track = wants_grad(x);
  Tensor out = make_output(out_shape, track);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* xm = xd + o * m * n;
    double* om = od + o * m * n;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        om[static_cast<std::size_t>(j) * m + i] = xm[static_cast<std::size_t>(i) * n + j];
      }
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, outer, m, n]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (std::size_t o = 0; o < outer; ++o) {
        const double* gm = g + o * m * n;
        double* xm = xg + o * m * n;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            xm[static_cast<std::size_t>(i) * n + j] += gm[static_cast<std::size_t>(j) * m + i];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  const bool track = wants_grad(x);
  Tensor out = make_output({1}, track);
  out.data()[0] = kernels::active().sum(x.data(), x.numel());
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc]() mutable {
      const double g = oc.grad()[0];
      double* xg = xc.grad();
      const std::size_t n = xc.numel();
      for (std::size_t i = 0; i < n; ++i) xg[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

namespace {

Shape drop_axis(const Shape& shape, int axis) {
  Shape out = shape;
  out.erase(out.begin() + axis);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Tensor reduce_max(const Tensor& x, int axis) {
  const AxisView v = axis_view(x.shape(), axis);
  const bool track = wants_grad(x);
  Tensor out = make_output(drop_axis(x.shape(), axis), track);
  std::vector<std::int64_t> arg(v.outer * v.inner);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      std::size_t best = (o * v.len) * v.inner + i;
      double best_v = xd[best];
      for (std::size_t l = 1; l < v.len; ++l) {
        const std::size_t idx = (o * v.len + l) * v.inner + i;
        if (xd[idx] > best_v) {
          best_v = xd[idx];
          best = idx;
        }
      }
      od[o * v.inner + i] = best_v;
      arg[o * v.inner + i] = static_cast<std::int64_t>(best);
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, arg]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (std::size_t i = 0; i < arg.size(); ++i) xg[arg[i]] += g[i];
    });
  }
  return out;
}

Tensor reduce_mean(const Tensor& x, int axis) {
  const AxisView v = axis_view(x.shape(), axis);
  const bool track = wants_grad(x);
  Tensor out = make_output(drop_axis(x.shape(), axis), track);
  const double inv = 1.0 / static_cast<double>(v.len);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t l = 0; l < v.len; ++l) {
      const double* row = xd + (o * v.len + l) * v.inner;
      double* orow = od + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) orow[i] += row[i] * inv;
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, v, inv]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t l = 0; l < v.len; ++l) {
          double* row = xg + (o * v.len + l) * v.inner;
          const double* grow = g + o * v.inner;
          for (std::size_t i = 0; i < v.inner; ++i) row[i] += grow[i] * inv;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

Tensor softmax_t(const Tensor& x, int axis, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax_t: temperature must be positive");
  }
  x.check_finite("softmax_t");
  const AxisView v = axis_view(x.shape(), axis);
  const bool track = wants_grad(x);
  Tensor out = make_output(x.shape(), track);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < v.len; ++l) {
        m = std::max(m, xd[(o * v.len + l) * v.inner + i] / temperature);
      }
      double s = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) {
        const std::size_t idx = (o * v.len + l) * v.inner + i;
        od[idx] = std::exp(xd[idx] / temperature - m);
        s += od[idx];
      }
      const double inv = 1.0 / s;
      for (std::size_t l = 0; l < v.len; ++l) od[(o * v.len + l) * v.inner + i] *= inv;
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, v, temperature]() mutable {
      const double* g = oc.grad();
      const double* y = oc.data();
      double* xg = xc.grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          double dot = 0.0;
          for (std::size_t l = 0; l < v.len; ++l) {
            const std::size_t idx = (o * v.len + l) * v.inner + i;
            dot += g[idx] * y[idx];
          }
          for (std::size_t l = 0; l < v.len; ++l) {
            const std::size_t idx = (o * v.len + l) * v.inner + i;
            xg[idx] += y[idx] * (g[idx] - dot) / temperature;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(int width) {
  gamma = Tensor::full({width}, 1.0, true);
  beta = Tensor::zeros({width}, true);
  running_mean = Tensor::zeros({width});
  running_var = Tensor::full({width}, 1.0);
}

namespace {

// Shared core over a logical [rows x width] view; `index` maps (row, feature)
// to the flat element position.
template <typename IndexFn>
Tensor batch_norm_core(const Tensor& x, BatchNorm& bn, bool training, std::size_t rows,
                       std::size_t width, IndexFn index) {
  if (rows == 0) throw std::invalid_argument("batch_norm: empty batch");
  if (bn.gamma.numel() != width) {
    throw std::invalid_argument("batch_norm: parameter width " +
                                std::to_string(bn.gamma.numel()) + " != feature width " +
                                std::to_string(width));
  }
  const bool track = wants_grad(x) || wants_grad(bn.gamma) || wants_grad(bn.beta);
  Tensor out = make_output(x.shape(), track);
  const double* xd = x.data();
  double* od = out.data();

  std::vector<double> mean(width), var(width);
  if (training) {
    for (std::size_t f = 0; f < width; ++f) {
      double m = 0.0;
      for (std::size_t r = 0; r < rows; ++r) m += xd[index(r, f)];
      m /= static_cast<double>(rows);
      double v = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = xd[index(r, f)] - m;
        v += d * d;
      }
      v /= static_cast<double>(rows);
      mean[f] = m;
      var[f] = v;
      // Running statistics use the unbiased variance when possible.
      const double vu = rows > 1 ? v * static_cast<double>(rows) / static_cast<double>(rows - 1)
                                 : v;
      bn.running_mean.data()[f] = (1.0 - bn.momentum) * bn.running_mean.data()[f] +
                                  bn.momentum * m;
      bn.running_var.data()[f] = (1.0 - bn.momentum) * bn.running_var.data()[f] +
                                 bn.momentum * vu;
    }
  } else {
    for (std::size_t f = 0; f < width; ++f) {
      mean[f] = bn.running_mean.data()[f];
      var[f] = bn.running_var.data()[f];
    }
  }

  std::vector<double> inv_std(width);
  for (std::size_t f = 0; f < width; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + bn.eps);
  const double* gm = bn.gamma.data();
  const double* bt = bn.beta.data();
  for (std::size_t f = 0; f < width; ++f) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t idx = index(r, f);
      od[idx] = gm[f] * (xd[idx] - mean[f]) * inv_std[f] + bt[f];
    }
  }

  if (track) {
    Tensor xc = x, oc = out, gc = bn.gamma, bc = bn.beta;
    Tape::current()->record(
        [xc, oc, gc, bc, mean, inv_std, rows, width, index, training]() mutable {
          const double* g = oc.grad();
          const double* xd2 = xc.data();
          const double* gm2 = gc.data();
          double* xg = xc.requires_grad() ? xc.grad() : nullptr;
          double* gg = gc.requires_grad() ? gc.grad() : nullptr;
          double* bg = bc.requires_grad() ? bc.grad() : nullptr;
          const double inv_rows = 1.0 / static_cast<double>(rows);
          for (std::size_t f = 0; f < width; ++f) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
              const std::size_t idx = index(r, f);
              const double xhat = (xd2[idx] - mean[f]) * inv_std[f];
              sum_g += g[idx];
              sum_gx += g[idx] * xhat;
            }
            if (gg) gg[f] += sum_gx;
            if (bg) bg[f] += sum_g;
            if (xg) {
              for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t idx = index(r, f);
                if (training) {
                  const double xhat = (xd2[idx] - mean[f]) * inv_std[f];
                  xg[idx] += gm2[f] * inv_std[f] *
                             (g[idx] - inv_rows * sum_g - xhat * inv_rows * sum_gx);
                } else {
                  xg[idx] += gm2[f] * inv_std[f] * g[idx];
                }
              }
            }
          }
        });
  }
  return out;
}

}  // namespace

Tensor batch_norm_lastdim(const Tensor& x, BatchNorm& bn, bool training) {
  if (x.ndim() < 2) throw std::invalid_argument("batch_norm_lastdim: rank must be >= 2");
  const std::size_t width = static_cast<std::size_t>(x.shape().back());
  const std::size_t rows = x.numel() / width;
  return batch_norm_core(x, bn, training, rows, width,
                         [width](std::size_t r, std::size_t f) { return r * width + f; });
}

Tensor batch_norm_channels(const Tensor& x, BatchNorm& bn, bool training) {
  if (x.ndim() != 4) throw std::invalid_argument("batch_norm_channels: expected [B,C,F,T]");
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  const std::size_t spatial = static_cast<std::size_t>(x.dim(2)) *
                              static_cast<std::size_t>(x.dim(3));
  const std::size_t rows = static_cast<std::size_t>(x.dim(0)) * spatial;
  // row r = (batch, spatial) pair; feature f = channel.
  return batch_norm_core(x, bn, training, rows, c,
                         [c, spatial](std::size_t r, std::size_t f) {
                           const std::size_t b = r / spatial;
                           const std::size_t s = r % spatial;
                           return (b * c + f) * spatial + s;
                         });
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: probability must lie in [0, 1)");
  }
  if (!training || p == 0.0) return x;
  const bool track = wants_grad(x);
  Tensor out = make_output(x.shape(), track);
  const std::size_t n = x.numel();
  const double keep = 1.0 - p;
  const double scale = 1.0 / keep;
  std::vector<double> mask(n);
  const double* xd = x.data();
  double* od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : scale;
    od[i] = xd[i] * mask[i];
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, mask]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (std::size_t i = 0; i < mask.size(); ++i) xg[i] += g[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution and pooling
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int pad_f, int pad_t) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw std::invalid_argument("conv2d: expected [B,Ci,F,T] and [Co,Ci,KF,KT]");
  }
  if (x.dim(1) != w.dim(1)) {
    throw std::invalid_argument("conv2d: channel mismatch, input " + std::to_string(x.dim(1)) +
                                " vs weight " + std::to_string(w.dim(1)));
  }
  const int B = x.dim(0), Ci = x.dim(1), F = x.dim(2), T = x.dim(3);
  const int Co = w.dim(0), KF = w.dim(2), KT = w.dim(3);
  if (bias.numel() != static_cast<std::size_t>(Co)) {
    throw std::invalid_argument("conv2d: bias extent mismatch");
  }
  const int Fo = F + 2 * pad_f - KF + 1;
  const int To = T + 2 * pad_t - KT + 1;
  if (Fo <= 0 || To <= 0) {
    throw std::invalid_argument("conv2d: input too small for kernel");
  }
  const bool track = wants_grad(x) || wants_grad(w) || wants_grad(bias);
  Tensor out = make_output({B, Co, Fo, To}, track);
  const auto& kt = kernels::active();

  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = bias.data();
  double* od = out.data();
  auto xoff = [&](int b, int c, int f) {
    return ((static_cast<std::size_t>(b) * Ci + c) * F + f) * T;
  };
  auto ooff = [&](int b, int c, int f) {
    return ((static_cast<std::size_t>(b) * Co + c) * Fo + f) * To;
  };

  for (int b = 0; b < B; ++b) {
    for (int co = 0; co < Co; ++co) {
      for (int fo = 0; fo < Fo; ++fo) {
        double* orow = od + ooff(b, co, fo);
        for (int t = 0; t < To; ++t) orow[t] = bd[co];
      }
      for (int ci = 0; ci < Ci; ++ci) {
        for (int kf = 0; kf < KF; ++kf) {
          for (int ktap = 0; ktap < KT; ++ktap) {
            const double wv =
                wd[((static_cast<std::size_t>(co) * Ci + ci) * KF + kf) * KT + ktap];
            const int dt = ktap - pad_t;
            const int t0 = std::max(0, -dt);
            const int t1 = std::min(To, T - dt);
            if (t1 <= t0) continue;
            for (int fo = 0; fo < Fo; ++fo) {
              const int fi = fo + kf - pad_f;
              if (fi < 0 || fi >= F) continue;
              kt.axpy(wv, xd + xoff(b, ci, fi) + t0 + dt, od + ooff(b, co, fo) + t0,
                      static_cast<std::size_t>(t1 - t0));
            }
          }
        }
      }
    }
  }

  if (track) {
    Tensor xc = x, wc = w, bc = bias, oc = out;
    Tape::current()->record([xc, wc, bc, oc, B, Ci, F, T, Co, KF, KT, Fo, To, pad_f,
                             pad_t]() mutable {
      const auto& kt2 = kernels::active();
      const double* g = oc.grad();
      const double* xd2 = xc.data();
      const double* wd2 = wc.data();
      double* xg = xc.requires_grad() ? xc.grad() : nullptr;
      double* wg = wc.requires_grad() ? wc.grad() : nullptr;
      double* bg = bc.requires_grad() ? bc.grad() : nullptr;
      auto xoff2 = [&](int b, int c, int f) {
        return ((static_cast<std::size_t>(b) * Ci + c) * F + f) * T;
      };
      auto ooff2 = [&](int b, int c, int f) {
        return ((static_cast<std::size_t>(b) * Co + c) * Fo + f) * To;
      };
      if (bg != nullptr) {
        for (int b = 0; b < B; ++b) {
          for (int co = 0; co < Co; ++co) {
            bg[co] += kt2.sum(g + ooff2(b, co, 0), static_cast<std::size_t>(Fo) * To);
          }
        }
      }
      for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Co; ++co) {
          for (int ci = 0; ci < Ci; ++ci) {
            for (int kf = 0; kf < KF; ++kf) {
              for (int ktap = 0; ktap < KT; ++ktap) {
                const std::size_t widx =
                    ((static_cast<std::size_t>(co) * Ci + ci) * KF + kf) * KT + ktap;
                const int dt = ktap - pad_t;
                const int t0 = std::max(0, -dt);
                const int t1 = std::min(To, T - dt);
                if (t1 <= t0) continue;
                for (int fo = 0; fo < Fo; ++fo) {
                  const int fi = fo + kf - pad_f;
                  if (fi < 0 || fi >= F) continue;
                  const double* grow = g + ooff2(b, co, fo) + t0;
                  const double* xrow = xd2 + xoff2(b, ci, fi) + t0 + dt;
                  if (wg != nullptr) {
                    wg[widx] += kt2.dot(grow, xrow, static_cast<std::size_t>(t1 - t0));
                  }
                  if (xg != nullptr) {
                    kt2.axpy(wd2[widx], grow, xg + xoff2(b, ci, fi) + t0 + dt,
                             static_cast<std::size_t>(t1 - t0));
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool2d(const Tensor& x, int win_f, int win_t) {
  if (x.ndim() != 4) throw std::invalid_argument("maxpool2d: expected [B,C,F,T]");
  if (win_f < 1 || win_t < 1) throw std::invalid_argument("maxpool2d: window must be >= 1");
  const int B = x.dim(0), C = x.dim(1), F = x.dim(2), T = x.dim(3);
  const int Fo = F / win_f;
  const int To = T / win_t;
  if (Fo == 0 || To == 0) {
    throw std::invalid_argument("maxpool2d: input " + shape_str(x.shape()) +
                                " smaller than window (" + std::to_string(win_f) + ", " +
                                std::to_string(win_t) + "); minimal extents are (" +
                                std::to_string(win_f) + ", " + std::to_string(win_t) + ")");
  }
  const bool track = wants_grad(x);
  Tensor out = make_output({B, C, Fo, To}, track);
  std::vector<std::int64_t> arg(out.numel());
  const double* xd = x.data();
  double* od = out.data();
  std::size_t oi = 0;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const std::size_t plane = (static_cast<std::size_t>(b) * C + c) * F * T;
      for (int fo = 0; fo < Fo; ++fo) {
        for (int to = 0; to < To; ++to, ++oi) {
          std::size_t best = plane + static_cast<std::size_t>(fo * win_f) * T + to * win_t;
          double best_v = xd[best];
          for (int df = 0; df < win_f; ++df) {
            for (int dt = 0; dt < win_t; ++dt) {
              const std::size_t idx =
                  plane + static_cast<std::size_t>(fo * win_f + df) * T + (to * win_t + dt);
              if (xd[idx] > best_v) {
                best_v = xd[idx];
                best = idx;
              }
            }
          }
          od[oi] = best_v;
          arg[oi] = static_cast<std::int64_t>(best);
        }
      }
    }
  }
  if (track) {
    Tensor xc = x, oc = out;
    Tape::current()->record([xc, oc, arg]() mutable {
      const double* g = oc.grad();
      double* xg = xc.grad();
      for (std::size_t i = 0; i < arg.size(); ++i) xg[arg[i]] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

Tensor kaiming_init(const Shape& shape, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw std::invalid_argument("kaiming_init: fan_in must be positive");
  Tensor t = Tensor::zeros(shape);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  double* d = t.data();
  const std::size_t n = t.numel();
  for (std::size_t i = 0; i < n; ++i) d[i] = stddev * rng.normal();
  return t;
}

Tensor xavier_init(const Shape& shape, int fan_in, int fan_out, Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw std::invalid_argument("xavier_init: fans must be positive");
  }
  Tensor t = Tensor::zeros(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  double* d = t.data();
  const std::size_t n = t.numel();
  for (std::size_t i = 0; i < n; ++i) d[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(const Shape& shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  double* d = t.data();
  const std::size_t n = t.numel();
  for (std::size_t i = 0; i < n; ++i) d[i] = stddev * rng.normal();
  return t;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                  double eps, int max_coords_per_tensor) {
  std::vector<Tensor> ps = params;
  for (Tensor& p : ps) {
    if (!p.requires_grad()) {
      throw std::invalid_argument("grad_check: parameter does not require grad");
    }
    p.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    TapeScope scope;
    Tensor loss = f();
    loss.check_finite("grad_check loss");
    scope.tape.backward(loss);
  }
  for (Tensor& p : ps) {
    analytic.emplace_back(p.grad(), p.grad() + p.numel());
  }

  double worst = 0.0;
  NoGradScope no_grad;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    Tensor& p = ps[pi];
    double* d = p.data();
    const std::size_t n = p.numel();
    std::size_t stride = 1;
    if (max_coords_per_tensor > 0 &&
        n > static_cast<std::size_t>(max_coords_per_tensor)) {
      stride = n / static_cast<std::size_t>(max_coords_per_tensor);
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = d[i];
      d[i] = orig + eps;
      const double fp = f().value();
      d[i] = orig - eps;
      const double fm = f().value();
      d[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("grad_check: non-finite value during finite differences");
      }
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel =
          std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace aasist3
