// Command line front end: toy-data generation, training, scoring,
// metric evaluation and gradient self-checks.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "aasist3/gradsuite.hpp"
#include "aasist3/metrics.hpp"
#include "aasist3/model.hpp"
#include "aasist3/train.hpp"
#include "aasist3/wav.hpp"

namespace fs = std::filesystem;
using namespace aasist3;

namespace {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(threads, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// make-toy-data
// ---------------------------------------------------------------------------

void cmd_make_toy_data(const std::string& out_dir, int n_per_class, std::uint64_t seed,
                       bool force) {
  const fs::path root(out_dir);
  if (fs::exists(root) && !fs::is_empty(root) && !force) {
    throw std::runtime_error(out_dir + " exists and is not empty; pass --force to overwrite");
  }
  fs::create_directories(root / "wav");

  const std::vector<LabeledUtterance> utterances = make_toy_dataset(n_per_class, seed);
  std::vector<TrialRecord> all, train, dev, eval_split;
  int per_class_index[2] = {0, 0};
  for (const LabeledUtterance& utt : utterances) {
    TrialRecord t;
    t.utt_id = utt.id;
    t.wav_path = "wav/" + utt.id + ".wav";
    t.label = utt.label;
    write_wav((root / t.wav_path).string(), utt.audio);
    all.push_back(t);
    // Deterministic 60/20/20 split, stratified per class; dev and eval
    // fill early in the cycle so small corpora still get all three splits.
    const int k = per_class_index[utt.label]++ % 5;
    if (k == 1) {
      dev.push_back(t);
    } else if (k == 2) {
      eval_split.push_back(t);
    } else {
      train.push_back(t);
    }
  }
  write_protocol((root / "protocol.txt").string(), all);
  write_protocol((root / "protocol.train.txt").string(), train);
  write_protocol((root / "protocol.dev.txt").string(), dev);
  write_protocol((root / "protocol.eval.txt").string(), eval_split);
  std::cout << "wrote " << all.size() << " utterances to " << out_dir << " (train "
            << train.size() << ", dev " << dev.size() << ", eval " << eval_split.size()
            << ")\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::vector<LabeledUtterance> load_split(const fs::path& data_dir,
                                         const std::vector<TrialRecord>& trials) {
  std::vector<LabeledUtterance> set;
  set.reserve(trials.size());
  for (const TrialRecord& t : trials) {
    LabeledUtterance utt;
    utt.id = t.utt_id;
    utt.audio = read_wav((data_dir / t.wav_path).string());
    utt.label = t.label;
    set.push_back(std::move(utt));
  }
  return set;
}

void cmd_train(const std::string& config_path, const std::string& data_dir,
               const std::string& out_ckpt, const std::string& metrics_log) {
  const ConfigDocument doc =
      config_path.empty() ? pocket_config() : load_config_file(config_path);
  validate_config(doc);

  const fs::path data(data_dir);
  if (!fs::exists(data)) throw std::runtime_error("data directory not found: " + data_dir);
  std::vector<TrialRecord> train_trials, dev_trials;
  if (fs::exists(data / "protocol.train.txt") && fs::exists(data / "protocol.dev.txt")) {
    train_trials = parse_protocol((data / "protocol.train.txt").string());
    dev_trials = parse_protocol((data / "protocol.dev.txt").string());
  } else {
    // Fall back to a deterministic split of the flat protocol.
    const std::vector<TrialRecord> all = parse_protocol((data / "protocol.txt").string());
    for (std::size_t i = 0; i < all.size(); ++i) {
      (i % 5 == 4 ? dev_trials : train_trials).push_back(all[i]);
    }
  }
  if (train_trials.empty()) throw std::runtime_error("training split is empty");
  if (dev_trials.empty()) throw std::runtime_error("dev split is empty");

  const std::vector<LabeledUtterance> train_set = load_split(data, train_trials);
  const std::vector<LabeledUtterance> dev_set = load_split(data, dev_trials);

  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);

  const std::string log_path = metrics_log.empty() ? out_ckpt + ".metrics.jsonl" : metrics_log;
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write metrics log " + log_path);
  char line[160];
  auto on_epoch = [&](const EpochStats& s) {
    std::snprintf(line, sizeof(line), "{\"epoch\":%d,\"loss\":%.6f,\"dev_eer\":%.6f}",
                  s.epoch, s.train_loss, s.dev_eer);
    log << line << '\n';
    log.flush();
    std::cout << "epoch " << s.epoch << "  loss " << s.train_loss << "  dev_eer " << s.dev_eer
              << (s.improved ? "  *" : "") << '\n';
  };
  const TrainResult result = train_loop(model, doc, train_set, dev_set, out_ckpt, on_epoch);
  std::cout << "best epoch " << result.best_epoch << " (dev EER " << result.best_dev_eer
            << "), checkpoint " << out_ckpt << '\n';
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

void cmd_score(const std::vector<std::string>& checkpoints, const std::string& protocol_path,
               const std::string& out_path, int threads) {
  if (checkpoints.empty()) {
    throw std::runtime_error("score: provide --ckpt and/or --fuse checkpoints");
  }
  const std::vector<TrialRecord> trials = parse_protocol(protocol_path);
  const fs::path base = fs::path(protocol_path).parent_path();

  std::string missing;
  for (const TrialRecord& t : trials) {
    if (!fs::exists(base / t.wav_path)) missing += " " + t.utt_id;
  }
  if (!missing.empty()) throw std::runtime_error("missing WAVs for:" + missing);

  std::vector<LoadedModel> models;
  models.reserve(checkpoints.size());
  for (const std::string& path : checkpoints) models.push_back(load_checkpoint(path));

  std::vector<ScoreRecord> scores(trials.size());
  parallel_for(trials.size(), threads, [&](std::size_t i) {
    const AudioSignal audio = read_wav((base / trials[i].wav_path).string());
    std::vector<double> per_model;
    per_model.reserve(models.size());
    for (LoadedModel& m : models) per_model.push_back(m.model.score_utterance(audio));
    scores[i] = {trials[i].utt_id, fuse_scores(per_model)};
  });
  write_scores(out_path, scores);
  std::cerr << "wrote " << scores.size() << " scores to " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

void cmd_eval(const std::string& scores_path, const std::string& protocol_path, double p_target,
              double c_miss, double c_fa) {
  const std::vector<TrialRecord> trials = parse_protocol(protocol_path);
  const std::vector<ScoreRecord> scores = read_scores(scores_path);
  std::map<std::string, double> by_id;
  for (const ScoreRecord& s : scores) by_id[s.utt_id] = s.score;

  std::string missing;
  std::vector<double> bona, spoof;
  for (const TrialRecord& t : trials) {
    auto it = by_id.find(t.utt_id);
    if (it == by_id.end()) {
      missing += " " + t.utt_id;
      continue;
    }
    (t.label == kLabelBonafide ? bona : spoof).push_back(it->second);
    by_id.erase(it);
  }
  if (!missing.empty()) throw std::runtime_error("no scores for:" + missing);
  if (!by_id.empty()) {
    std::string extra;
    for (const auto& [id, score] : by_id) extra += " " + id;
    throw std::runtime_error("scores for unknown ids:" + extra);
  }

  const MetricResult eer = compute_eer(bona, spoof);
  const MetricResult dcf = compute_min_dcf(bona, spoof, p_target, c_miss, c_fa);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "EER %.4f%%", 100.0 * eer.value);
  std::cout << buf << '\n';
  std::snprintf(buf, sizeof(buf), "minDCF %.4f", dcf.value);
  std::cout << buf << '\n';
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(const std::string& config_path, const std::string& module) {
  if (!config_path.empty()) validate_config(load_config_file(config_path));
  const std::vector<GradCheckResult> results = run_grad_suite(module);
  char line[128];
  for (const GradCheckResult& r : results) {
    std::snprintf(line, sizeof(line), "%-16s %10.3e  tol %8.1e  %s", r.layer.c_str(),
                  r.max_rel_error, r.tolerance, r.passed ? "PASS" : "FAIL");
    std::cout << line << '\n';
  }
  return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AASIST3 audio anti-spoofing toolkit"};
  app.require_subcommand(1);

  // make-toy-data
  std::string td_out;
  int td_n = 0;
  std::uint64_t td_seed = 42;
  bool td_force = false;
  CLI::App* mk = app.add_subcommand("make-toy-data", "Generate a synthetic labeled corpus");
  mk->add_option("--out", td_out, "Output directory")->required();
  mk->add_option("--n", td_n, "Utterances per class")->required()->check(CLI::PositiveNumber);
  mk->add_option("--seed", td_seed, "Generator seed");
  mk->add_flag("--force", td_force, "Write into a non-empty directory");

  // train
  std::string tr_config, tr_data, tr_out, tr_log;
  CLI::App* tr = app.add_subcommand("train", "Train a model on a corpus directory");
  tr->add_option("--config", tr_config, "Config file (defaults to the pocket config)");
  tr->add_option("--data", tr_data, "Corpus directory (protocol.txt + wav/)")->required();
  tr->add_option("--out", tr_out, "Best-checkpoint output path")->required();
  tr->add_option("--metrics-log", tr_log, "Metrics log path (default <out>.metrics.jsonl)");

  // score
  std::string sc_ckpt, sc_protocol, sc_out;
  std::vector<std::string> sc_fuse;
  int sc_threads = static_cast<int>(std::thread::hardware_concurrency());
  CLI::App* sc = app.add_subcommand("score", "Score every trial of a protocol");
  sc->add_option("--ckpt", sc_ckpt, "Model checkpoint");
  sc->add_option("--fuse", sc_fuse, "Additional checkpoints; scores are averaged");
  sc->add_option("--protocol", sc_protocol, "Protocol file")->required();
  sc->add_option("--out", sc_out, "Score file output path")->required();
  sc->add_option("--threads", sc_threads, "Scoring threads");

  // eval
  std::string ev_scores, ev_protocol;
  double ev_p = 0.05, ev_cmiss = 1.0, ev_cfa = 10.0;
  CLI::App* ev = app.add_subcommand("eval", "Compute EER and minDCF for a score file");
  ev->add_option("--scores", ev_scores, "Score file")->required();
  ev->add_option("--protocol", ev_protocol, "Protocol file with labels")->required();
  ev->add_option("--p-target", ev_p, "Bona fide prior");
  ev->add_option("--c-miss", ev_cmiss, "Miss cost");
  ev->add_option("--c-fa", ev_cfa, "False acceptance cost");

  // gradcheck
  std::string gc_config, gc_module;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient self-check");
  gc->add_option("--config", gc_config, "Config file to validate");
  gc->add_option("--module", gc_module, "Restrict to kan|graph|encoder|model|train");

  try {
    app.parse(argc, argv);
    if (mk->parsed()) {
      cmd_make_toy_data(td_out, td_n, td_seed, td_force);
    } else if (tr->parsed()) {
      cmd_train(tr_config, tr_data, tr_out, tr_log);
    } else if (sc->parsed()) {
      std::vector<std::string> checkpoints;
      if (!sc_ckpt.empty()) checkpoints.push_back(sc_ckpt);
      checkpoints.insert(checkpoints.end(), sc_fuse.begin(), sc_fuse.end());
      cmd_score(checkpoints, sc_protocol, sc_out, sc_threads);
    } else if (ev->parsed()) {
      cmd_eval(ev_scores, ev_protocol, ev_p, ev_cmiss, ev_cfa);
    } else if (gc->parsed()) {
      return cmd_gradcheck(gc_config, gc_module);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
