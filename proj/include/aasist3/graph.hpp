#pragma once

// Graph attention over fully connected node sets: the single-graph
// attention layer, score-gated top-k pooling, and the heterogeneous
// layer that couples the temporal graph, the spatial graph and a stack
// node through a blockwise attention map.

#include <memory>
#include <utility>

#include "aasist3/kan.hpp"
#include "aasist3/ops.hpp"

namespace aasist3 {

// Node sets travel as [batch, nodes, dim] tensors.
struct Graph {
  Tensor nodes;

  int batch() const { return nodes.dim(0); }
  int n_nodes() const { return nodes.dim(1); }
  int dim() const { return nodes.dim(2); }
};

struct HeteroState {
  Graph temporal;
  Graph spatial;
  Tensor stack;  // [batch, dim]
};

struct GalParams {
  KanLayer kan_att;   // attention path, D -> D
  KanLayer kan_agg;   // attended projection, D -> D_out
  KanLayer kan_skip;  // skip projection, D -> D_out
  Tensor w_att;       // [D, 1]
  BatchNorm bn;       // width D_out
  double temperature = 100.0;
  double dropout_p = 0.2;

  void collect_params(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedParams& out);
};

struct PoolParams {
  KanLayer kan_score;  // D -> 1
  double dropout_p = 0.2;

  void collect_params(const std::string& prefix, NamedParams& out);
};

struct HsGalParams {
  KanLayer proj_t;          // temporal projection into the shared width
  KanLayer proj_s;          // spatial projection into the shared width
  KanLayer kan_att;         // primary pairwise map
  KanLayer kan_stack_att;   // stack attention path
  KanLayer kan_stack_agg;   // attended stack projection
  KanLayer kan_stack_skip;  // stack skip projection
  KanLayer kan_agg;         // attended node projection
  KanLayer kan_skip;        // node skip projection
  Tensor w11, w12, w22;     // [D] block contraction weights
  Tensor w_m;               // [D, 1] stack attention weights
  BatchNorm bn;             // width D
  double temperature = 100.0;
  double dropout_p = 0.2;

  void collect_params(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedParams& out);
};

GalParams make_gal_params(int d_in, int d_out, double temperature,
                          const std::shared_ptr<const UnivariateBasis>& basis, Rng& rng);
PoolParams make_pool_params(int d, const std::shared_ptr<const UnivariateBasis>& basis,
                            Rng& rng);
HsGalParams make_hs_gal_params(int d_t, int d_s, int d, double temperature,
                               const std::shared_ptr<const UnivariateBasis>& basis, Rng& rng);

// Intermediate attention maps, exposed for verification.
struct GalTrace {
  Tensor attention;  // [B, N, N], rows sum to 1
};
struct HsGalTrace {
  Tensor h_st;             // [B, N_t + N_s, D] concatenated projection
  Tensor secondary;        // [B, N, N] blockwise map after softmax
  Tensor stack_attention;  // [B, N]
};

// Attention over source nodes; output node count is preserved, node width
// becomes the aggregation layers' output width.
Graph kan_gal(const Graph& h, GalParams& p, bool training, Rng& rng,
              GalTrace* trace = nullptr);

// Keeps the ceil(ratio * N) highest sigmoid-gated nodes, original order
// preserved; ties go to the lower node index.
Graph kan_graph_pool(const Graph& h, PoolParams& p, double ratio, bool training, Rng& rng);

// Number of kept nodes for a given input size.
int pooled_node_count(int n_nodes, double ratio);

HeteroState kan_hs_gal(const HeteroState& state, HsGalParams& p, bool training, Rng& rng,
                       HsGalTrace* trace = nullptr);

// Which contraction weight the pair (i, j) of the concatenated graph uses:
// 0 -> W11 (both temporal), 1 -> W22 (both spatial), 2 -> W12 (mixed).
// Indices are 0-based against the temporal node count.
int hs_gal_block_case(int i, int j, int n_t);

// out[b,i,j] = sum_m A[(b*N+i)*N+j, m] * w_case(i,j)[m].
Tensor block_contract(const Tensor& pair_features, int batch, int n, int n_t,
                      const Tensor& w11, const Tensor& w12, const Tensor& w22);

// First n_t rows -> temporal graph, last n_s rows -> spatial graph.
std::pair<Graph, Graph> split_heterogeneous(const Tensor& h_st, int n_t, int n_s);

}  // namespace aasist3
