#include "aasist3/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace aasist3 {

using nlohmann::json;

int ModelConfig::chunk_samples() const {
  return static_cast<int>(std::llround(chunk_seconds * sample_rate));
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw std::invalid_argument("config: " + path + ": " + message);
}

void expect_keys(const json& obj, const std::string& path,
                 const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& item : obj.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      fail(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
    }
  }
}

template <typename T>
void read_num(const json& obj, const std::string& path, const char* key, T& target) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  target = v.get<T>();
}

void read_str(const json& obj, const std::string& path, const char* key, std::string& target) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  target = v.get<std::string>();
}

void read_int_list(const json& obj, const std::string& path, const char* key,
                   std::vector<int>& target) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array()) fail(path + "." + key, "expected an array of integers");
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) fail(path + "." + key, "expected an array of integers");
    out.push_back(e.get<int>());
  }
  target = out;
}

SincConfig parse_sinc(const json& obj) {
  SincConfig c;
  expect_keys(obj, "model.sinc", {"n_filters", "kernel_len", "stride", "f_min", "f_max"});
  read_num(obj, "model.sinc", "n_filters", c.n_filters);
  read_num(obj, "model.sinc", "kernel_len", c.kernel_len);
  read_num(obj, "model.sinc", "stride", c.stride);
  read_num(obj, "model.sinc", "f_min", c.f_min);
  read_num(obj, "model.sinc", "f_max", c.f_max);
  return c;
}

EncoderConfig parse_encoder(const json& obj) {
  EncoderConfig c;
  expect_keys(obj, "model.encoder",
              {"channels", "kernel_f", "kernel_t", "pool_f", "pool_t", "first_pool_f",
               "first_pool_t"});
  read_int_list(obj, "model.encoder", "channels", c.channels);
  read_num(obj, "model.encoder", "kernel_f", c.kernel_f);
  read_num(obj, "model.encoder", "kernel_t", c.kernel_t);
  read_num(obj, "model.encoder", "pool_f", c.pool_f);
  read_num(obj, "model.encoder", "pool_t", c.pool_t);
  read_num(obj, "model.encoder", "first_pool_f", c.first_pool_f);
  read_num(obj, "model.encoder", "first_pool_t", c.first_pool_t);
  return c;
}

KanConfig parse_kan(const json& obj) {
  KanConfig c;
  expect_keys(obj, "model.kan", {"grid_min", "grid_max", "grid_size", "order"});
  read_num(obj, "model.kan", "grid_min", c.grid_min);
  read_num(obj, "model.kan", "grid_max", c.grid_max);
  read_num(obj, "model.kan", "grid_size", c.grid_size);
  read_num(obj, "model.kan", "order", c.order);
  return c;
}

GraphConfig parse_graph(const json& obj) {
  GraphConfig c;
  expect_keys(obj, "model.graph",
              {"dim", "first_pool_ratio", "branch_pool_ratio", "temperature", "branches",
               "dropout", "readout_dropout", "stack_combine"});
  read_num(obj, "model.graph", "dim", c.dim);
  read_num(obj, "model.graph", "first_pool_ratio", c.first_pool_ratio);
  read_num(obj, "model.graph", "branch_pool_ratio", c.branch_pool_ratio);
  read_num(obj, "model.graph", "temperature", c.temperature);
  read_num(obj, "model.graph", "branches", c.branches);
  read_num(obj, "model.graph", "dropout", c.dropout);
  read_num(obj, "model.graph", "readout_dropout", c.readout_dropout);
  read_str(obj, "model.graph", "stack_combine", c.stack_combine);
  return c;
}

ModelConfig parse_model(const json& obj) {
  ModelConfig c;
  expect_keys(obj, "model",
              {"sample_rate", "pre_emphasis", "chunk_seconds", "hop_seconds", "sinc",
               "encoder", "kan", "graph"});
  read_num(obj, "model", "sample_rate", c.sample_rate);
  read_num(obj, "model", "pre_emphasis", c.pre_emphasis);
  read_num(obj, "model", "chunk_seconds", c.chunk_seconds);
  read_num(obj, "model", "hop_seconds", c.hop_seconds);
  if (obj.contains("sinc")) c.sinc = parse_sinc(obj.at("sinc"));
  if (obj.contains("encoder")) c.encoder = parse_encoder(obj.at("encoder"));
  if (obj.contains("kan")) c.kan = parse_kan(obj.at("kan"));
  if (obj.contains("graph")) c.graph = parse_graph(obj.at("graph"));
  return c;
}

TrainConfig parse_train(const json& obj) {
  TrainConfig c;
  expect_keys(obj, "train",
              {"lr", "beta1", "beta2", "epsilon", "batch_size", "epochs",
               "class_weight_bonafide", "class_weight_spoof", "seed", "checkpoint_every"});
  read_num(obj, "train", "lr", c.lr);
  read_num(obj, "train", "beta1", c.beta1);
  read_num(obj, "train", "beta2", c.beta2);
  read_num(obj, "train", "epsilon", c.epsilon);
  read_num(obj, "train", "batch_size", c.batch_size);
  read_num(obj, "train", "epochs", c.epochs);
  read_num(obj, "train", "class_weight_bonafide", c.class_weight_bonafide);
  read_num(obj, "train", "class_weight_spoof", c.class_weight_spoof);
  read_num(obj, "train", "seed", c.seed);
  read_num(obj, "train", "checkpoint_every", c.checkpoint_every);
  return c;
}

MetricConfig parse_metrics(const json& obj) {
  MetricConfig c;
  expect_keys(obj, "metrics", {"p_target", "c_miss", "c_fa"});
  read_num(obj, "metrics", "p_target", c.p_target);
  read_num(obj, "metrics", "c_miss", c.c_miss);
  read_num(obj, "metrics", "c_fa", c.c_fa);
  return c;
}

json sinc_to_json(const SincConfig& c) {
  return json{{"n_filters", c.n_filters},
              {"kernel_len", c.kernel_len},
              {"stride", c.stride},
              {"f_min", c.f_min},
              {"f_max", c.f_max}};
}

json encoder_to_json(const EncoderConfig& c) {
  return json{{"channels", c.channels},   {"kernel_f", c.kernel_f},
              {"kernel_t", c.kernel_t},   {"pool_f", c.pool_f},
              {"pool_t", c.pool_t},       {"first_pool_f", c.first_pool_f},
              {"first_pool_t", c.first_pool_t}};
}

json kan_to_json(const KanConfig& c) {
  return json{{"grid_min", c.grid_min},
              {"grid_max", c.grid_max},
              {"grid_size", c.grid_size},
              {"order", c.order}};
}

json graph_to_json(const GraphConfig& c) {
  return json{{"dim", c.dim},
              {"first_pool_ratio", c.first_pool_ratio},
              {"branch_pool_ratio", c.branch_pool_ratio},
              {"temperature", c.temperature},
              {"branches", c.branches},
              {"dropout", c.dropout},
              {"readout_dropout", c.readout_dropout},
              {"stack_combine", c.stack_combine}};
}

}  // namespace

ConfigDocument parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  expect_keys(root, "", {"model", "train", "metrics"});
  ConfigDocument doc;
  if (root.contains("model")) doc.model = parse_model(root.at("model"));
  if (root.contains("train")) doc.train = parse_train(root.at("train"));
  if (root.contains("metrics")) doc.metrics = parse_metrics(root.at("metrics"));
  validate_config(doc);
  return doc;
}

std::string serialize_config(const ConfigDocument& doc) {
  json root;
  root["model"] = json{{"sample_rate", doc.model.sample_rate},
                       {"pre_emphasis", doc.model.pre_emphasis},
                       {"chunk_seconds", doc.model.chunk_seconds},
                       {"hop_seconds", doc.model.hop_seconds},
                       {"sinc", sinc_to_json(doc.model.sinc)},
                       {"encoder", encoder_to_json(doc.model.encoder)},
                       {"kan", kan_to_json(doc.model.kan)},
                       {"graph", graph_to_json(doc.model.graph)}};
  root["train"] = json{{"lr", doc.train.lr},
                       {"beta1", doc.train.beta1},
                       {"beta2", doc.train.beta2},
                       {"epsilon", doc.train.epsilon},
                       {"batch_size", doc.train.batch_size},
                       {"epochs", doc.train.epochs},
                       {"class_weight_bonafide", doc.train.class_weight_bonafide},
                       {"class_weight_spoof", doc.train.class_weight_spoof},
                       {"seed", doc.train.seed},
                       {"checkpoint_every", doc.train.checkpoint_every}};
  root["metrics"] = json{{"p_target", doc.metrics.p_target},
                         {"c_miss", doc.metrics.c_miss},
                         {"c_fa", doc.metrics.c_fa}};
  return root.dump(2) + "\n";
}

ConfigDocument load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config_file(const std::string& path, const ConfigDocument& doc) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("config: cannot write " + path);
  out << serialize_config(doc);
}

void validate_config(const ConfigDocument& doc) {
  const ModelConfig& m = doc.model;
  if (m.sample_rate != 16000) fail("model.sample_rate", "must be 16000");
  if (m.pre_emphasis < 0.0 || m.pre_emphasis >= 1.0) {
    fail("model.pre_emphasis", "must lie in [0, 1)");
  }
  if (!(m.chunk_seconds > m.hop_seconds) || !(m.hop_seconds > 0.0)) {
    fail("model.chunk_seconds", "need chunk_seconds > hop_seconds > 0");
  }
  if (m.sinc.n_filters < 1) fail("model.sinc.n_filters", "must be >= 1");
  if (m.sinc.kernel_len < 1 || m.sinc.kernel_len % 2 == 0) {
    fail("model.sinc.kernel_len", "must be odd and positive");
  }
  if (m.sinc.stride < 1) fail("model.sinc.stride", "must be >= 1");
  if (!(m.sinc.f_min > 0.0) || !(m.sinc.f_max > m.sinc.f_min)) {
    fail("model.sinc.f_min", "need 0 < f_min < f_max");
  }
  if (m.sinc.f_max > m.sample_rate / 2.0) fail("model.sinc.f_max", "above Nyquist");
  if (m.encoder.channels.empty()) fail("model.encoder.channels", "must not be empty");
  for (int c : m.encoder.channels) {
    if (c < 1) fail("model.encoder.channels", "entries must be >= 1");
  }
  if (m.kan.order < 1) fail("model.kan.order", "must be >= 1");
  if (m.kan.grid_size < 1) fail("model.kan.grid_size", "must be >= 1");
  if (!(m.kan.grid_max > m.kan.grid_min)) fail("model.kan.grid_max", "degenerate grid range");
  if (m.graph.dim < 1) fail("model.graph.dim", "must be >= 1");
  if (m.graph.branches < 1) fail("model.graph.branches", "must be >= 1");
  if (!(m.graph.temperature > 0.0)) fail("model.graph.temperature", "must be positive");
  if (!(m.graph.first_pool_ratio > 0.0) || m.graph.first_pool_ratio > 1.0) {
    fail("model.graph.first_pool_ratio", "must lie in (0, 1]");
  }
  if (!(m.graph.branch_pool_ratio > 0.0) || m.graph.branch_pool_ratio > 1.0) {
    fail("model.graph.branch_pool_ratio", "must lie in (0, 1]");
  }
  if (m.graph.dropout < 0.0 || m.graph.dropout >= 1.0) {
    fail("model.graph.dropout", "must lie in [0, 1)");
  }
  if (m.graph.readout_dropout < 0.0 || m.graph.readout_dropout >= 1.0) {
    fail("model.graph.readout_dropout", "must lie in [0, 1)");
  }
  if (m.graph.stack_combine != "max" && m.graph.stack_combine != "sum") {
    fail("model.graph.stack_combine", "must be \"max\" or \"sum\"");
  }
  const TrainConfig& t = doc.train;
  if (!(t.lr > 0.0)) fail("train.lr", "must be positive");
  if (t.beta1 <= 0.0 || t.beta1 >= 1.0 || t.beta2 <= 0.0 || t.beta2 >= 1.0) {
    fail("train.beta1", "betas must lie in (0, 1)");
  }
  if (!(t.epsilon > 0.0)) fail("train.epsilon", "must be positive");
  if (t.batch_size < 1) fail("train.batch_size", "must be >= 1");
  if (t.epochs < 1) fail("train.epochs", "must be >= 1");
  if (!(t.class_weight_bonafide > 0.0) || !(t.class_weight_spoof > 0.0)) {
    fail("train.class_weight_bonafide", "class weights must be positive");
  }
  if (t.checkpoint_every < 0) fail("train.checkpoint_every", "must be >= 0");
  const MetricConfig& mc = doc.metrics;
  if (!(mc.p_target > 0.0) || mc.p_target >= 1.0) fail("metrics.p_target", "must lie in (0, 1)");
  if (!(mc.c_miss > 0.0) || !(mc.c_fa > 0.0)) fail("metrics.c_miss", "costs must be positive");
}

ConfigDocument pocket_config() {
  ConfigDocument doc;
  doc.model.sinc.n_filters = 8;
  doc.model.sinc.kernel_len = 17;
  doc.model.sinc.stride = 10;
  doc.model.encoder.channels = {8, 8};
  doc.model.encoder.pool_f = 1;
  doc.model.encoder.pool_t = 8;
  doc.model.graph.dim = 8;
  doc.model.graph.branches = 2;
  // Desk-scale training schedule: the regularization that matters at
  // corpus scale only starves a 60k-parameter model fed 120 utterances.
  doc.model.graph.temperature = 10.0;
  doc.model.graph.dropout = 0.0;
  doc.model.graph.readout_dropout = 0.0;
  doc.train.batch_size = 8;
  doc.train.epochs = 15;
  doc.train.lr = 1e-2;
  return doc;
}

}  // namespace aasist3
