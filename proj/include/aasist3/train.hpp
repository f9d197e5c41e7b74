#pragma once

// Training: weighted cross-entropy over the two logits, Adam, and a loop
// over random fixed-length crops with per-epoch dev scoring and
// best-checkpoint retention.

#include <functional>
#include <string>
#include <vector>

#include "aasist3/model.hpp"

namespace aasist3 {

// Mean over the batch of w[y] * (-log softmax(logits)[y]).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     double weight_bonafide = 1.0, double weight_spoof = 1.0);

class Adam {
 public:
  Adam(NamedParams& params, const TrainConfig& cfg);

  // Applies one update from the accumulated gradients; throws on
  // non-finite gradients so broken training aborts loudly.
  void step();
  int steps_taken() const { return t_; }

 private:
  NamedParams* params_;
  TrainConfig cfg_;
  int t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct LabeledUtterance {
  std::string id;
  AudioSignal audio;
  int label = 0;  // 0 = bona fide, 1 = spoof
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_eer = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_dev_eer = 1.0;
};

// Trains in place; when checkpoint_path is non-empty the best-dev model is
// (re)written there every time the dev EER improves.
TrainResult train_loop(Aasist3Model& model, const ConfigDocument& doc,
                       const std::vector<LabeledUtterance>& train_set,
                       const std::vector<LabeledUtterance>& dev_set,
                       const std::string& checkpoint_path,
                       const std::function<void(const EpochStats&)>& on_epoch = {});

// Synthetic desk-scale corpus: bona fide utterances are harmonic mixtures
// with soft noise and slow amplitude modulation; spoof utterances are the
// same construction degraded by coarse amplitude quantization and a comb
// filter echo. Balanced classes, deterministic per seed.
std::vector<LabeledUtterance> make_toy_dataset(int n_per_class, std::uint64_t seed);

}  // namespace aasist3
