#pragma once

// Full anti-spoofing model: sinc filterbank front end, convolutional
// encoder, temporal/spatial graph formation with positional embeddings,
// parallel heterogeneous attention branches, and a KAN readout to two
// logits. Also owns utterance scoring (chunked inference, score fusion)
// and the checkpoint container.

#include <string>
#include <utility>
#include <vector>

#include "aasist3/audio.hpp"
#include "aasist3/config.hpp"
#include "aasist3/encoder.hpp"
#include "aasist3/graph.hpp"
#include "aasist3/sinc.hpp"

namespace aasist3 {

// Logit/score convention: class 0 = bona fide, class 1 = spoof.
inline constexpr int kBonafideClass = 0;
inline constexpr int kSpoofClass = 1;

class Aasist3Model {
 public:
  Aasist3Model(const ModelConfig& cfg, Rng& rng);
  Aasist3Model(const Aasist3Model&) = delete;
  Aasist3Model& operator=(const Aasist3Model&) = delete;
  Aasist3Model(Aasist3Model&&) = default;
  Aasist3Model& operator=(Aasist3Model&&) = default;

  // Filterbank features [B, 1, F, T] -> logits [B, 2].
  Tensor forward_features(const Tensor& features, bool training, Rng& rng);

  // Encoder output [B, C, F', T'] for filterbank features.
  Tensor encode(const Tensor& features, bool training);

  // Node sets from the encoder output [B, C, F', T']: temporal nodes are
  // the max of |x| over the spectral axis ([B, T', C]), spatial nodes the
  // max over the temporal axis ([B, F', C]); no embeddings added yet.
  static std::pair<Tensor, Tensor> reduce_to_node_sets(const Tensor& encoded);

  // Embedded, attended and pooled graphs entering the branches.
  std::pair<Graph, Graph> graphs_from_features(const Tensor& encoded, bool training, Rng& rng);

  struct BranchOutput {
    HeteroState stage2;
    HeteroState stage3;
  };
  BranchOutput branch_forward(int branch, const HeteroState& state, bool training, Rng& rng);

  struct Aggregate {
    Tensor h_t;  // [B, N1+N2+N3, D]
    Tensor h_s;
    Tensor s_f;  // [B, D]
  };
  // Element-wise max across branches per stage, stages concatenated along
  // the node axis; stack nodes combined per config (max or sum).
  Aggregate aggregate_branches(const HeteroState& pre,
                               const std::vector<BranchOutput>& branches) const;

  Tensor readout(const Aggregate& agg, bool training, Rng& rng);

  // One chunk of pre-emphasized audio -> [1, 1, F, frames].
  Tensor features_from_chunk(const AudioSignal& chunk) const;

  // Mean bona fide probability over 4 s / 2 s overlapped chunks.
  double score_utterance(const AudioSignal& audio);
  std::vector<double> chunk_probabilities(const AudioSignal& audio);

  const ModelConfig& config() const { return cfg_; }
  const SincFilterbank& filterbank() const { return bank_; }
  Shape encoded_shape() const { return encoded_shape_; }  // {C, F', T'} per chunk

  NamedParams& params() { return params_; }
  NamedParams& buffers() { return buffers_; }
  void zero_grad();

 private:
  struct Branch {
    HsGalParams hs1;
    PoolParams pool_t;
    PoolParams pool_s;
    HsGalParams hs2;
  };

  ModelConfig cfg_;
  SincFilterbank bank_;
  Encoder encoder_;
  Shape encoded_shape_;
  Tensor pe_t_;  // [T', C]
  Tensor pe_s_;  // [F', C]
  GalParams gal_t_, gal_s_;
  PoolParams pool_t_, pool_s_;
  Tensor stack_init_;  // [D]
  std::vector<Branch> branches_;
  KanLayer readout_kan_;  // 5*D -> 2
  NamedParams params_;
  NamedParams buffers_;
};

// Arithmetic mean of per-model scores.
double fuse_scores(const std::vector<double>& scores);

// ----- checkpoint container ----------------------------------------------

enum class CheckpointError {
  kFormat,   // bad magic, truncation, malformed entries
  kVersion,  // unsupported container version
  kConfig,   // embedded or expected configuration mismatch
  kShape,    // tensor shape/name disagreement
};

class CheckpointException : public std::runtime_error {
 public:
  CheckpointException(CheckpointError code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  CheckpointError code() const { return code_; }

 private:
  CheckpointError code_;
};

struct LoadedModel {
  ConfigDocument doc;
  Aasist3Model model;
};

void save_checkpoint(Aasist3Model& model, const ConfigDocument& doc, const std::string& path);
LoadedModel load_checkpoint(const std::string& path);
// Rejects checkpoints whose embedded model section differs from `expected`.
LoadedModel load_checkpoint_compatible(const std::string& path, const ConfigDocument& expected);

}  // namespace aasist3
