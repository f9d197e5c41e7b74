#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aasist3/config.hpp"
#include "aasist3/metrics.hpp"
#include "aasist3/model.hpp"

using namespace aasist3;
namespace fs = std::filesystem;

namespace {

const char* kCli = AASIST3_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  fs::path operator/(const std::string& p) const { return path / p; }
};

// Small config so CLI round trips stay fast.
void write_tiny_config(const fs::path& path, int epochs) {
  ConfigDocument doc;
  doc.model.chunk_seconds = 0.5;
  doc.model.hop_seconds = 0.25;
  doc.model.sinc.n_filters = 6;
  doc.model.sinc.kernel_len = 17;
  doc.model.sinc.stride = 25;
  doc.model.encoder.channels = {4, 4};
  doc.model.encoder.first_pool_t = 2;
  doc.model.encoder.pool_t = 4;
  doc.model.graph.dim = 6;
  doc.model.graph.branches = 2;
  doc.model.graph.temperature = 2.0;
  doc.train.epochs = epochs;
  doc.train.batch_size = 4;
  doc.train.lr = 1e-3;
  save_config_file(path.string(), doc);
}

}  // namespace

TEST_CASE("help exits zero") {
  CHECK(run("--help > /dev/null") == 0);
  CHECK(run("train --help > /dev/null") == 0);
}

TEST_CASE("make-toy-data writes a reproducible corpus") {
  TempDir a("aasist3_cli_data_a");
  TempDir b("aasist3_cli_data_b");
  CHECK(run("make-toy-data --out " + a.str() + "/d --n 3 --seed 5 > /dev/null") == 0);
  CHECK(run("make-toy-data --out " + b.str() + "/d --n 3 --seed 5 > /dev/null") == 0);

  const auto trials = parse_protocol((a / "d/protocol.txt").string());
  CHECK(trials.size() == 6);
  int wavs = 0;
  for (const auto& entry : fs::directory_iterator(a / "d/wav")) {
    ++wavs;
    (void)entry;
  }
  CHECK(wavs == 6);

  // Byte-identical across runs with the same seed.
  for (const auto& t : trials) {
    CHECK(slurp(a / ("d/" + t.wav_path)) == slurp(b / ("d/" + t.wav_path)));
  }
  CHECK(slurp(a / "d/protocol.txt") == slurp(b / "d/protocol.txt"));
  CHECK(slurp(a / "d/protocol.train.txt") == slurp(b / "d/protocol.train.txt"));

  // Refuses to clobber without --force.
  CHECK(run("make-toy-data --out " + a.str() + "/d --n 3 --seed 5 2> /dev/null") != 0);
  CHECK(run("make-toy-data --out " + a.str() + "/d --n 3 --seed 5 --force > /dev/null") == 0);
}

TEST_CASE("make-toy-data rejects zero utterances") {
  TempDir dir("aasist3_cli_zero");
  CHECK(run("make-toy-data --out " + dir.str() + "/d --n 0 2> /dev/null") != 0);
}

TEST_CASE("train, score and eval round trip") {
  TempDir dir("aasist3_cli_pipeline");
  const std::string data = (dir / "data").string();
  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string config = (dir / "config.json").string();
  write_tiny_config(dir / "config.json", 1);

  REQUIRE(run("make-toy-data --out " + data + " --n 5 --seed 11 > /dev/null") == 0);
  REQUIRE(run("train --config " + config + " --data " + data + " --out " + ckpt +
              " > /dev/null") == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".metrics.jsonl"));

  // The checkpoint loads and carries the embedded config.
  LoadedModel loaded = load_checkpoint(ckpt);
  CHECK(loaded.doc.model.graph.dim == 6);

  // Metrics log is line-delimited with one record per epoch.
  {
    std::ifstream log(ckpt + ".metrics.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
      ++lines;
      CHECK(line.find("\"epoch\"") != std::string::npos);
      CHECK(line.find("\"dev_eer\"") != std::string::npos);
    }
    CHECK(lines == 1);
  }

  const std::string protocol = data + "/protocol.eval.txt";
  const std::string s1 = (dir / "s1.txt").string();
  const std::string s2 = (dir / "s2.txt").string();
  REQUIRE(run("score --ckpt " + ckpt + " --protocol " + protocol + " --out " + s1 +
              " 2> /dev/null") == 0);
  REQUIRE(run("score --ckpt " + ckpt + " --protocol " + protocol + " --out " + s2 +
              " 2> /dev/null") == 0);
  CHECK(slurp(s1) == slurp(s2));

  // Fusing a model with itself changes nothing; --fuse alone works too.
  const std::string s3 = (dir / "s3.txt").string();
  REQUIRE(run("score --ckpt " + ckpt + " --fuse " + ckpt + " --protocol " + protocol +
              " --out " + s3 + " 2> /dev/null") == 0);
  CHECK(slurp(s1) == slurp(s3));
  const std::string s4 = (dir / "s4.txt").string();
  REQUIRE(run("score --fuse " + ckpt + " --protocol " + protocol + " --out " + s4 +
              " 2> /dev/null") == 0);
  CHECK(slurp(s1) == slurp(s4));

  // eval prints both metrics; cost overrides change minDCF, never EER.
  const std::string out1 = (dir / "eval1.txt").string();
  const std::string out2 = (dir / "eval2.txt").string();
  REQUIRE(run("eval --scores " + s1 + " --protocol " + protocol + " > " + out1) == 0);
  REQUIRE(run("eval --scores " + s1 + " --protocol " + protocol +
              " --p-target 0.5 --c-fa 1 > " + out2) == 0);
  const std::string text1 = slurp(out1);
  const std::string text2 = slurp(out2);
  CHECK(text1.find("EER") != std::string::npos);
  CHECK(text1.find("minDCF") != std::string::npos);
  CHECK(text1.substr(0, text1.find('\n')) == text2.substr(0, text2.find('\n')));
}

TEST_CASE("eval prints zero EER for perfectly separated scores") {
  TempDir dir("aasist3_cli_eval");
  {
    std::ofstream protocol(dir / "protocol.txt");
    protocol << "b1 wav/b1.wav bonafide\nb2 wav/b2.wav bonafide\n";
    protocol << "s1 wav/s1.wav spoof\ns2 wav/s2.wav spoof\n";
    std::ofstream scores(dir / "scores.txt");
    scores << "b1 0.900000\nb2 0.800000\ns1 0.100000\ns2 0.200000\n";
  }
  const std::string out = (dir / "out.txt").string();
  REQUIRE(run("eval --scores " + (dir / "scores.txt").string() + " --protocol " +
              (dir / "protocol.txt").string() + " > " + out) == 0);
  CHECK(slurp(out).find("EER 0.0000%") != std::string::npos);
}

TEST_CASE("eval rejects score files with unknown or missing ids") {
  TempDir dir("aasist3_cli_evalbad");
  {
    std::ofstream protocol(dir / "protocol.txt");
    protocol << "b1 wav/b1.wav bonafide\ns1 wav/s1.wav spoof\n";
    std::ofstream scores(dir / "scores.txt");
    scores << "b1 0.9\ns1 0.1\nstranger 0.5\n";
  }
  CHECK(run("eval --scores " + (dir / "scores.txt").string() + " --protocol " +
            (dir / "protocol.txt").string() + " 2> /dev/null") != 0);
  {
    std::ofstream scores(dir / "scores.txt");
    scores << "b1 0.9\n";
  }
  CHECK(run("eval --scores " + (dir / "scores.txt").string() + " --protocol " +
            (dir / "protocol.txt").string() + " 2> /dev/null") != 0);
}

TEST_CASE("train rejects a missing data directory") {
  TempDir dir("aasist3_cli_nodata");
  CHECK(run("train --data " + (dir / "absent").string() + " --out " +
            (dir / "m.ckpt").string() + " 2> /dev/null") != 0);
}

TEST_CASE("score lists missing wavs by id") {
  TempDir dir("aasist3_cli_missingwav");
  const std::string data = (dir / "data").string();
  REQUIRE(run("make-toy-data --out " + data + " --n 3 --seed 3 > /dev/null") == 0);
  write_tiny_config(dir / "config.json", 1);
  const std::string ckpt = (dir / "m.ckpt").string();
  REQUIRE(run("train --config " + (dir / "config.json").string() + " --data " + data +
              " --out " + ckpt + " > /dev/null") == 0);
  const auto trials = parse_protocol(data + "/protocol.txt");
  fs::remove(fs::path(data) / trials[0].wav_path);
  const std::string err = (dir / "err.txt").string();
  CHECK(run("score --ckpt " + ckpt + " --protocol " + data + "/protocol.txt --out " +
            (dir / "s.txt").string() + " 2> " + err) != 0);
  CHECK(slurp(err).find(trials[0].utt_id) != std::string::npos);
}

TEST_CASE("gradcheck passes and prints one line per layer") {
  TempDir dir("aasist3_cli_gc");
  const std::string out = (dir / "gc.txt").string();
  CHECK(run("gradcheck > " + out) == 0);
  std::ifstream in(out);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(line.find("PASS") != std::string::npos);
  }
  CHECK(lines == 9);
}

TEST_CASE("gradcheck restricted to one module exits zero") {
  CHECK(run("gradcheck --module kan > /dev/null") == 0);
  CHECK(run("gradcheck --module nosuch 2> /dev/null") != 0);
}

TEST_CASE("gradcheck validates a config when given one") {
  TempDir dir("aasist3_cli_gcfg");
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{\"train\": {\"epochs\": 0}}";
  }
  CHECK(run("gradcheck --config " + (dir / "bad.json").string() + " --module kan 2> /dev/null") !=
        0);
  write_tiny_config(dir / "ok.json", 1);
  CHECK(run("gradcheck --config " + (dir / "ok.json").string() + " --module kan > /dev/null") ==
        0);
}
