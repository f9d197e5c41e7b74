#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "aasist3/metrics.hpp"

namespace aasist3 {

namespace {

[[noreturn]] void line_error(const std::string& path, int line, const std::string& message) {
  throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + message);
}

bool skippable(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;  // blank
}

}  // namespace

std::vector<TrialRecord> parse_protocol(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("parse_protocol: cannot open " + path);
  std::vector<TrialRecord> trials;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    std::istringstream fields(line);
    TrialRecord t;
    std::string label, extra;
    if (!(fields >> t.utt_id >> t.wav_path >> label)) {
      line_error(path, line_no, "expected `utt_id wav_path label`");
    }
    if (fields >> extra) line_error(path, line_no, "trailing field \"" + extra + "\"");
    if (label == "bonafide") {
      t.label = kLabelBonafide;
    } else if (label == "spoof") {
      t.label = kLabelSpoof;
    } else {
      line_error(path, line_no, "unknown label \"" + label + "\"");
    }
    if (!seen.insert(t.utt_id).second) {
      line_error(path, line_no, "duplicate utterance id \"" + t.utt_id + "\"");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void write_protocol(const std::string& path, const std::vector<TrialRecord>& trials) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("write_protocol: cannot write " + path);
  for (const TrialRecord& t : trials) {
    out << t.utt_id << ' ' << t.wav_path << ' '
        << (t.label == kLabelBonafide ? "bonafide" : "spoof") << '\n';
  }
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_scores: cannot open " + path);
  std::vector<ScoreRecord> scores;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    std::istringstream fields(line);
    ScoreRecord s;
    std::string extra;
    if (!(fields >> s.utt_id >> s.score)) {
      line_error(path, line_no, "expected `utt_id score`");
    }
    if (fields >> extra) line_error(path, line_no, "trailing field \"" + extra + "\"");
    if (!seen.insert(s.utt_id).second) {
      line_error(path, line_no, "duplicate utterance id \"" + s.utt_id + "\"");
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

void write_scores(const std::string& path, const std::vector<ScoreRecord>& scores) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("write_scores: cannot write " + path);
  char buf[64];
  for (const ScoreRecord& s : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.score);
    out << s.utt_id << ' ' << buf << '\n';
  }
}

}  // namespace aasist3
