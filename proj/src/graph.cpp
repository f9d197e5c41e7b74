#include "aasist3/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aasist3/kernels.hpp"

namespace aasist3 {

void GalParams::collect_params(const std::string& prefix, NamedParams& out) {
  kan_att.collect_params(prefix + ".kan_att", out);
  kan_agg.collect_params(prefix + ".kan_agg", out);
  kan_skip.collect_params(prefix + ".kan_skip", out);
  out.emplace_back(prefix + ".w_att", w_att);
  out.emplace_back(prefix + ".bn.gamma", bn.gamma);
  out.emplace_back(prefix + ".bn.beta", bn.beta);
}

void GalParams::collect_buffers(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".bn.running_mean", bn.running_mean);
  out.emplace_back(prefix + ".bn.running_var", bn.running_var);
}

void PoolParams::collect_params(const std::string& prefix, NamedParams& out) {
  kan_score.collect_params(prefix + ".kan_score", out);
}

void HsGalParams::collect_params(const std::string& prefix, NamedParams& out) {
  proj_t.collect_params(prefix + ".proj_t", out);
  proj_s.collect_params(prefix + ".proj_s", out);
  kan_att.collect_params(prefix + ".kan_att", out);
  kan_stack_att.collect_params(prefix + ".kan_stack_att", out);
  kan_stack_agg.collect_params(prefix + ".kan_stack_agg", out);
  kan_stack_skip.collect_params(prefix + ".kan_stack_skip", out);
  kan_agg.collect_params(prefix + ".kan_agg", out);
  kan_skip.collect_params(prefix + ".kan_skip", out);
  out.emplace_back(prefix + ".w11", w11);
  out.emplace_back(prefix + ".w12", w12);
  out.emplace_back(prefix + ".w22", w22);
  out.emplace_back(prefix + ".w_m", w_m);
  out.emplace_back(prefix + ".bn.gamma", bn.gamma);
  out.emplace_back(prefix + ".bn.beta", bn.beta);
}

void HsGalParams::collect_buffers(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".bn.running_mean", bn.running_mean);
  out.emplace_back(prefix + ".bn.running_var", bn.running_var);
}

GalParams make_gal_params(int d_in, int d_out, double temperature,
                          const std::shared_ptr<const UnivariateBasis>& basis, Rng& rng) {
  GalParams p;
  p.kan_att = KanLayer(d_in, d_in, basis, rng);
  p.kan_agg = KanLayer(d_in, d_out, basis, rng);
  p.kan_skip = KanLayer(d_in, d_out, basis, rng);
  p.w_att = xavier_init({d_in, 1}, d_in, 1, rng);
  p.w_att.set_requires_grad(true);
  p.bn = BatchNorm(d_out);
  p.temperature = temperature;
  return p;
}

PoolParams make_pool_params(int d, const std::shared_ptr<const UnivariateBasis>& basis,
                            Rng& rng) {
  PoolParams p;
  p.kan_score = KanLayer(d, 1, basis, rng);
  return p;
}

HsGalParams make_hs_gal_params(int d_t, int d_s, int d, double temperature,
                               const std::shared_ptr<const UnivariateBasis>& basis, Rng& rng) {
  HsGalParams p;
  p.proj_t = KanLayer(d_t, d, basis, rng);
  p.proj_s = KanLayer(d_s, d, basis, rng);
  p.kan_att = KanLayer(d, d, basis, rng);
  p.kan_stack_att = KanLayer(d, d, basis, rng);
  p.kan_stack_agg = KanLayer(d, d, basis, rng);
  p.kan_stack_skip = KanLayer(d, d, basis, rng);
  p.kan_agg = KanLayer(d, d, basis, rng);
  p.kan_skip = KanLayer(d, d, basis, rng);
  p.w11 = xavier_init({d}, d, 1, rng);
  p.w12 = xavier_init({d}, d, 1, rng);
  p.w22 = xavier_init({d}, d, 1, rng);
  p.w_m = xavier_init({d, 1}, d, 1, rng);
  p.w11.set_requires_grad(true);
  p.w12.set_requires_grad(true);
  p.w22.set_requires_grad(true);
  p.w_m.set_requires_grad(true);
  p.bn = BatchNorm(d);
  p.temperature = temperature;
  return p;
}

Graph kan_gal(const Graph& h, GalParams& p, bool training, Rng& rng, GalTrace* trace) {
  const int b = h.batch(), n = h.n_nodes(), d = h.dim();
  if (d != p.kan_att.n_in()) {
    throw std::invalid_argument("kan_gal: node dim " + std::to_string(d) +
                                " != layer dim " + std::to_string(p.kan_att.n_in()));
  }
  Tensor hd = dropout(h.nodes, p.dropout_p, training, rng);

  Tensor pairs = pairwise_mul(hd);                       // [B*N*N, D]
  Tensor att = tanh_op(p.kan_att.forward(pairs));        // [B*N*N, D]
  Tensor logits = reshape(matmul(att, p.w_att), {b, n, n});
  Tensor a = softmax_t(logits, 2, p.temperature);        // rows sum to 1 over sources
  if (trace != nullptr) trace->attention = a;

  Tensor mixed = bmm(a, hd);                             // [B, N, D]
  Tensor agg = p.kan_agg.forward(reshape(mixed, {b * n, d}));
  Tensor skip = p.kan_skip.forward(reshape(hd, {b * n, d}));
  Tensor y = reshape(add(agg, skip), {b, n, p.kan_agg.n_out()});
  return Graph{batch_norm_lastdim(y, p.bn, training)};
}

int pooled_node_count(int n_nodes, double ratio) {
  if (!(ratio > 0.0) || ratio > 1.0) {
    throw std::invalid_argument("kan_graph_pool: ratio must lie in (0, 1]");
  }
  return static_cast<int>(std::ceil(ratio * n_nodes));
}

Graph kan_graph_pool(const Graph& h, PoolParams& p, double ratio, bool training, Rng& rng) {
  const int b = h.batch(), n = h.n_nodes(), d = h.dim();
  const int keep = pooled_node_count(n, ratio);
  Tensor hd = dropout(h.nodes, p.dropout_p, training, rng);
  Tensor scores = sigmoid(p.kan_score.forward(reshape(hd, {b * n, d})));  // [B*N, 1]
  Tensor gates = reshape(scores, {b, n});
  // The gate is computed from the dropped-out nodes but scales the
  // original graph.
  Tensor gated = mul_broadcast_gate(h.nodes, gates);

  std::vector<int> indices(static_cast<std::size_t>(b) * keep);
  const double* sd = gates.data();
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int bi = 0; bi < b; ++bi) {
    const double* row = sd + static_cast<std::size_t>(bi) * n;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [row](int x, int y) { return row[x] > row[y]; });
    std::vector<int> chosen(order.begin(), order.begin() + keep);
    std::sort(chosen.begin(), chosen.end());
    std::copy(chosen.begin(), chosen.end(),
              indices.begin() + static_cast<std::size_t>(bi) * keep);
  }
  return Graph{gather_nodes(gated, indices, b, keep)};
}

int hs_gal_block_case(int i, int j, int n_t) {
  // Membership partitions cleanly by node set so the layer stays
  // permutation-equivariant: rows [0, n_t) are temporal, the rest spatial.
  const bool ti = i < n_t;
  const bool tj = j < n_t;
  if (ti && tj) return 0;
  if (!ti && !tj) return 1;
  return 2;
}

Tensor block_contract(const Tensor& pair_features, int batch, int n, int n_t,
                      const Tensor& w11, const Tensor& w12, const Tensor& w22) {
  const int d = pair_features.dim(1);
  if (pair_features.ndim() != 2 ||
      pair_features.dim(0) != batch * n * n) {
    throw std::invalid_argument("block_contract: expected [B*N*N, D] pair features");
  }
  if (w11.numel() != static_cast<std::size_t>(d) || w12.numel() != static_cast<std::size_t>(d) ||
      w22.numel() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("block_contract: weight width mismatch");
  }
  const bool track = wants_grad(pair_features) || wants_grad(w11) || wants_grad(w12) ||
                     wants_grad(w22);
  Tensor out = Tensor::zeros({batch, n, n});
  if (track) out.set_requires_grad(true);
  const auto& kt = kernels::active();
  const double* ad = pair_features.data();
  const Tensor* ws[3] = {&w11, &w22, &w12};
  double* od = out.data();
  for (int bi = 0; bi < batch; ++bi) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::size_t row = (static_cast<std::size_t>(bi) * n + i) * n + j;
        od[row] = kt.dot(ad + row * d, ws[hs_gal_block_case(i, j, n_t)]->data(),
                         static_cast<std::size_t>(d));
      }
    }
  }
  if (track) {
    Tensor ac = pair_features, oc = out;
    Tensor w11c = w11, w12c = w12, w22c = w22;
    Tape::current()->record([ac, oc, w11c, w12c, w22c, batch, n, n_t, d]() mutable {
      const auto& kt2 = kernels::active();
      const double* g = oc.grad();
      const double* ad2 = ac.data();
      double* ag = ac.requires_grad() ? ac.grad() : nullptr;
      Tensor* ws2[3] = {&w11c, &w22c, &w12c};
      for (int bi = 0; bi < batch; ++bi) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            const std::size_t row = (static_cast<std::size_t>(bi) * n + i) * n + j;
            Tensor* w = ws2[hs_gal_block_case(i, j, n_t)];
            if (ag != nullptr) {
              kt2.axpy(g[row], w->data(), ag + row * d, static_cast<std::size_t>(d));
            }
            if (w->requires_grad()) {
              kt2.axpy(g[row], ad2 + row * d, w->grad(), static_cast<std::size_t>(d));
            }
          }
        }
      }
    });
  }
  return out;
}

HeteroState kan_hs_gal(const HeteroState& state, HsGalParams& p, bool training, Rng& rng,
                       HsGalTrace* trace) {
  const int b = state.temporal.batch();
  if (state.spatial.batch() != b || state.stack.dim(0) != b) {
    throw std::invalid_argument("kan_hs_gal: batch mismatch across inputs");
  }
  const int n_t = state.temporal.n_nodes();
  const int n_s = state.spatial.n_nodes();
  const int d = p.proj_t.n_out();
  if (p.proj_s.n_out() != d || state.stack.dim(1) != d) {
    throw std::invalid_argument("kan_hs_gal: projected node dims must match the stack dim");
  }

  Tensor t_proj = reshape(p.proj_t.forward(reshape(state.temporal.nodes,
                                                   {b * n_t, state.temporal.dim()})),
                          {b, n_t, d});
  Tensor s_proj = reshape(p.proj_s.forward(reshape(state.spatial.nodes,
                                                   {b * n_s, state.spatial.dim()})),
                          {b, n_s, d});
  const int n = n_t + n_s;
  Tensor h_st = dropout(concat({t_proj, s_proj}, 1), p.dropout_p, training, rng);

  // Primary pairwise map, contracted blockwise into the secondary map.
  Tensor pair_att = tanh_op(p.kan_att.forward(pairwise_mul(h_st)));
  Tensor bmap = block_contract(pair_att, b, n, n_t, p.w11, p.w12, p.w22);
  Tensor bhat = softmax_t(bmap, 2, p.temperature);
  if (trace != nullptr) {
    trace->h_st = h_st;
    trace->secondary = bhat;
  }

  // Stack attention over nodes.
  Tensor hs = mul_broadcast_stack(h_st, state.stack);
  Tensor sa = tanh_op(p.kan_stack_att.forward(reshape(hs, {b * n, d})));
  Tensor am = softmax_t(reshape(matmul(sa, p.w_m), {b, n}), 1, p.temperature);
  if (trace != nullptr) trace->stack_attention = am;
  Tensor pooled = reshape(bmm(reshape(am, {b, 1, n}), h_st), {b, d});
  Tensor stack_out = add(p.kan_stack_agg.forward(pooled),
                         p.kan_stack_skip.forward(state.stack));

  // Node update through the secondary map plus skip, then normalization.
  Tensor mixed = bmm(bhat, h_st);
  Tensor y = add(p.kan_agg.forward(reshape(mixed, {b * n, d})),
                 p.kan_skip.forward(reshape(h_st, {b * n, d})));
  Tensor nodes = batch_norm_lastdim(reshape(y, {b, n, d}), p.bn, training);

  auto [t_out, s_out] = split_heterogeneous(nodes, n_t, n_s);
  return HeteroState{t_out, s_out, stack_out};
}

std::pair<Graph, Graph> split_heterogeneous(const Tensor& h_st, int n_t, int n_s) {
  if (h_st.ndim() != 3 || h_st.dim(1) != n_t + n_s) {
    throw std::invalid_argument("split_heterogeneous: node count " +
                                std::to_string(h_st.ndim() == 3 ? h_st.dim(1) : -1) +
                                " != " + std::to_string(n_t) + " + " + std::to_string(n_s));
  }
  Graph t{slice(h_st, 1, 0, n_t)};
  Graph s{slice(h_st, 1, n_t, n_t + n_s)};
  return {t, s};
}

}  // namespace aasist3
