#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "aasist3/metrics.hpp"
#include "aasist3/rng.hpp"

using namespace aasist3;
namespace fs = std::filesystem;

namespace {

// Brute-force oracle: evaluate at every distinct score (plus extremes) and
// keep the best operating point.
double brute_force_eer(const std::vector<double>& bona, const std::vector<double>& spoof) {
  std::vector<double> thresholds = bona;
  thresholds.insert(thresholds.end(), spoof.begin(), spoof.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);
  thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);
  double best = 2.0;
  for (double t : thresholds) {
    double fa = 0.0, fr = 0.0;
    for (double s : spoof) fa += s >= t ? 1.0 : 0.0;
    for (double s : bona) fr += s < t ? 1.0 : 0.0;
    best = std::min(best, 0.5 * (fa / spoof.size() + fr / bona.size()));
  }
  return best;
}

double brute_force_min_dcf(const std::vector<double>& bona, const std::vector<double>& spoof,
                           double p, double cm, double cf) {
  std::vector<double> thresholds = bona;
  thresholds.insert(thresholds.end(), spoof.begin(), spoof.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);
  thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);
  const double norm = std::min(p * cm, (1.0 - p) * cf);
  double best = 1e300;
  for (double t : thresholds) {
    double fa = 0.0, fr = 0.0;
    for (double s : spoof) fa += s >= t ? 1.0 : 0.0;
    for (double s : bona) fr += s < t ? 1.0 : 0.0;
    fa /= static_cast<double>(spoof.size());
    fr /= static_cast<double>(bona.size());
    best = std::min(best, (p * cm * fr + (1.0 - p) * cf * fa) / norm);
  }
  return best;
}

std::vector<double> random_scores(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(0.0, 1.0);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// EER
// ---------------------------------------------------------------------------

TEST_CASE("perfectly separated scores give zero EER") {
  const MetricResult r = compute_eer({0.9, 0.8}, {0.1, 0.2});
  CHECK(r.value == 0.0);
  CHECK(r.threshold > 0.2);
  CHECK(r.threshold <= 0.8);
}

TEST_CASE("hand-computable four-score case gives 0.25") {
  const MetricResult r = compute_eer({0.8, 0.4}, {0.6, 0.2});
  CHECK(r.value == doctest::Approx(0.25));
}

TEST_CASE("fully inverted scores give the worst balanced error") {
  // Labels swapped on perfectly separated clusters: no threshold can do
  // better than always-accept / always-reject, a balanced error of 0.5.
  const MetricResult r = compute_eer({0.1, 0.2}, {0.9, 0.8});
  CHECK(r.value == doctest::Approx(0.5));
}

TEST_CASE("EER equality with brute force on random instances") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n_bona = 1 + rng.below(500);
    const std::size_t n_spoof = 1 + rng.below(500);
    const std::vector<double> bona = random_scores(n_bona, rng);
    const std::vector<double> spoof = random_scores(n_spoof, rng);
    const MetricResult r = compute_eer(bona, spoof);
    CHECK(r.value == brute_force_eer(bona, spoof));
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
}

TEST_CASE("EER is invariant under strictly monotone score transforms") {
  Rng rng(3141);
  const std::vector<double> bona = random_scores(200, rng);
  const std::vector<double> spoof = random_scores(150, rng);
  auto transform = [](std::vector<double> v) {
    for (double& x : v) x = std::exp(3.0 * x) - 0.5;
    return v;
  };
  CHECK(compute_eer(bona, spoof).value ==
        compute_eer(transform(bona), transform(spoof)).value);
}

TEST_CASE("single-class input is rejected") {
  CHECK_THROWS_AS(compute_eer({}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(compute_eer({0.5}, {}), std::invalid_argument);
  CHECK_THROWS_AS(compute_min_dcf({}, {0.5}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// minDCF
// ---------------------------------------------------------------------------

TEST_CASE("perfect separation gives zero minDCF") {
  CHECK(compute_min_dcf({0.9, 0.8}, {0.1, 0.2}).value == 0.0);
}

TEST_CASE("identical scores give the do-nothing cost of one") {
  CHECK(compute_min_dcf({0.5, 0.5}, {0.5, 0.5}).value == doctest::Approx(1.0));
}

TEST_CASE("minDCF equality with brute force on random instances") {
  Rng rng(1618);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> bona = random_scores(1 + rng.below(120), rng);
    const std::vector<double> spoof = random_scores(1 + rng.below(120), rng);
    const MetricResult r = compute_min_dcf(bona, spoof, 0.05, 1.0, 10.0);
    CHECK(r.value == brute_force_min_dcf(bona, spoof, 0.05, 1.0, 10.0));
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
}

TEST_CASE("minDCF is invariant under strictly monotone transforms") {
  Rng rng(1414);
  const std::vector<double> bona = random_scores(80, rng);
  const std::vector<double> spoof = random_scores(90, rng);
  auto transform = [](std::vector<double> v) {
    for (double& x : v) x = std::atan(5.0 * x - 1.0);
    return v;
  };
  CHECK(compute_min_dcf(bona, spoof).value ==
        compute_min_dcf(transform(bona), transform(spoof)).value);
}

TEST_CASE("minDCF rejects invalid cost parameters") {
  CHECK_THROWS_AS(compute_min_dcf({0.9}, {0.1}, 0.0, 1.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_min_dcf({0.9}, {0.1}, 0.05, -1.0, 10.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// protocol and score files
// ---------------------------------------------------------------------------

TEST_CASE("protocol round trip with comments and blanks") {
  const fs::path path = fs::temp_directory_path() / "aasist3_protocol.txt";
  {
    std::ofstream out(path);
    out << "# header comment\n";
    out << "\n";
    out << "u1 wav/u1.wav bonafide\n";
    out << "  # indented comment\n";
    out << "u2 wav/u2.wav spoof\n";
  }
  const auto trials = parse_protocol(path.string());
  REQUIRE(trials.size() == 2);
  CHECK(trials[0].utt_id == "u1");
  CHECK(trials[0].label == kLabelBonafide);
  CHECK(trials[1].wav_path == "wav/u2.wav");
  CHECK(trials[1].label == kLabelSpoof);

  write_protocol(path.string(), trials);
  const auto again = parse_protocol(path.string());
  CHECK(again.size() == 2);
  CHECK(again[1].utt_id == "u2");
  fs::remove(path);
}

TEST_CASE("unknown labels and duplicates fail with line numbers") {
  const fs::path path = fs::temp_directory_path() / "aasist3_badprotocol.txt";
  {
    std::ofstream out(path);
    out << "u1 a.wav genuine\n";
  }
  CHECK_THROWS_WITH_AS(parse_protocol(path.string()), doctest::Contains(":1:"),
                       std::invalid_argument);
  {
    std::ofstream out(path);
    out << "u1 a.wav bonafide\nu1 b.wav spoof\n";
  }
  CHECK_THROWS_WITH_AS(parse_protocol(path.string()), doctest::Contains(":2:"),
                       std::invalid_argument);
  {
    std::ofstream out(path);
    out << "u1 a.wav\n";
  }
  CHECK_THROWS_AS(parse_protocol(path.string()), std::invalid_argument);
  fs::remove(path);
}

TEST_CASE("score files round trip at 6 decimal places") {
  const fs::path path = fs::temp_directory_path() / "aasist3_scores.txt";
  const std::vector<ScoreRecord> scores = {
      {"u1", 0.123456789}, {"u2", 0.5}, {"u3", 1.0 / 3.0}};
  write_scores(path.string(), scores);
  const auto back = read_scores(path.string());
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].utt_id == scores[i].utt_id);
    CHECK(std::fabs(back[i].score - scores[i].score) < 1e-6);
  }
  fs::remove(path);
}
