#pragma once

// Countermeasure metrics and the protocol / score file formats.
//
// Scores are "higher = more bona fide". At a threshold t, a spoof trial
// scoring >= t is a false acceptance and a bona fide trial scoring < t is
// a false rejection. Both metrics sweep every achievable operating point
// (midpoints between adjacent distinct scores plus both extremes) and
// report the best one: EER as the minimal balanced error
// (FAR + FRR) / 2, minDCF as the minimal normalized detection cost.

#include <string>
#include <vector>

namespace aasist3 {

inline constexpr int kLabelBonafide = 0;
inline constexpr int kLabelSpoof = 1;

struct TrialRecord {
  std::string utt_id;
  std::string wav_path;
  int label = kLabelBonafide;
};

struct ScoreRecord {
  std::string utt_id;
  double score = 0.0;
};

struct MetricResult {
  double value = 0.0;
  double threshold = 0.0;
};

MetricResult compute_eer(const std::vector<double>& bonafide_scores,
                         const std::vector<double>& spoof_scores);

MetricResult compute_min_dcf(const std::vector<double>& bonafide_scores,
                             const std::vector<double>& spoof_scores, double p_target = 0.05,
                             double c_miss = 1.0, double c_fa = 10.0);

// Lines are `utt_id wav_path label`, whitespace separated; blank lines and
// lines starting with '#' are skipped; labels are bonafide|spoof; ids must
// be unique. Errors carry the line number.
std::vector<TrialRecord> parse_protocol(const std::string& path);
void write_protocol(const std::string& path, const std::vector<TrialRecord>& trials);

// Lines are `utt_id score` with scores printed at 6 decimal places.
std::vector<ScoreRecord> read_scores(const std::string& path);
void write_scores(const std::string& path, const std::vector<ScoreRecord>& scores);

}  // namespace aasist3
