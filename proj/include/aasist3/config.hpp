#pragma once

// Human-editable configuration document covering the model, training and
// metric parameters. Parsing is strict: unknown keys are rejected with
// their full path; omitted keys keep their defaults.

#include <cstdint>
#include <string>

#include "aasist3/encoder.hpp"

namespace aasist3 {

struct SincConfig {
  int n_filters = 70;
  int kernel_len = 129;
  int stride = 1;
  double f_min = 200.0;
  double f_max = 8000.0;
};

struct KanConfig {
  double grid_min = -1.0;
  double grid_max = 1.0;
  int grid_size = 16;
  int order = 4;
};

struct GraphConfig {
  int dim = 64;
  double first_pool_ratio = 0.5;
  double branch_pool_ratio = 0.5;
  double temperature = 100.0;
  int branches = 4;
  double dropout = 0.2;
  double readout_dropout = 0.5;
  std::string stack_combine = "max";  // "max" or "sum"
};

struct ModelConfig {
  int sample_rate = 16000;
  double pre_emphasis = 0.97;
  double chunk_seconds = 4.0;
  double hop_seconds = 2.0;
  SincConfig sinc;
  EncoderConfig encoder;
  KanConfig kan;
  GraphConfig graph;

  int chunk_samples() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 8;
  int epochs = 15;
  double class_weight_bonafide = 1.0;
  double class_weight_spoof = 1.0;
  std::uint64_t seed = 42;
  int checkpoint_every = 0;  // epochs between periodic snapshots; 0 = off
};

struct MetricConfig {
  double p_target = 0.05;
  double c_miss = 1.0;
  double c_fa = 10.0;
};

struct ConfigDocument {
  ModelConfig model;
  TrainConfig train;
  MetricConfig metrics;
};

// Throws std::invalid_argument naming the offending key path.
ConfigDocument parse_config(const std::string& text);
std::string serialize_config(const ConfigDocument& doc);

ConfigDocument load_config_file(const std::string& path);
void save_config_file(const std::string& path, const ConfigDocument& doc);

// Range validation shared by the CLI and the model constructor.
void validate_config(const ConfigDocument& doc);

// A deliberately tiny configuration for gradient checks and toy training.
ConfigDocument pocket_config();

}  // namespace aasist3
