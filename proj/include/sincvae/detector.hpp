#pragma once

#include "sincvae/signal.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace sincvae {

enum class PercentileMethod { kLinear, kNearestRank };

// t1 is the validation maximum, t2 the 95th percentile.
struct ThresholdPolicy {
  enum class Kind { kMax, kPercentile };
  Kind kind = Kind::kPercentile;
  double percentile = 95.0;
  PercentileMethod method = PercentileMethod::kLinear;

  static ThresholdPolicy max() { return {Kind::kMax, 100.0, PercentileMethod::kLinear}; }
  static ThresholdPolicy at_percentile(double p, PercentileMethod m = PercentileMethod::kLinear) {
    return {Kind::kPercentile, p, m};
  }
  void validate() const;
  // "max", "percentile:95" or "percentile:95:nearest"
  std::string to_string() const;
};

ThresholdPolicy parse_threshold_policy(const std::string& text);

// Linear interpolation between closest ranks (h = (n-1) p / 100) or nearest rank.
double percentile(std::vector<double> values, double p, PercentileMethod method);
double resolve_threshold(const Eigen::VectorXd& scores, const ThresholdPolicy& policy);

// score > t is anomalous; score == t stays normal.
std::vector<WindowLabel> classify(const Eigen::VectorXd& scores, double threshold);

struct ConfusionCounts {
  Index tp = 0;
  Index fp = 0;
  Index tn = 0;
  Index fn = 0;
  Index total() const { return tp + fp + tn + fn; }
};

// Zero-denominator ratios are reported as 0 and flagged undefined.
struct DetectionMetrics {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double false_positive_rate = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool false_positive_rate_undefined = false;
};

// Seizure is the positive class.
DetectionMetrics compute_metrics(const std::vector<WindowLabel>& predictions,
                                 const std::vector<WindowLabel>& labels);

struct DetectionReport {
  std::string policy;
  double threshold = 0.0;
  Eigen::VectorXd scores;
  std::vector<WindowLabel> predictions;
  std::vector<WindowLabel> labels;
  DetectionMetrics metrics;
};

DetectionReport detect(const Eigen::VectorXd& scores, const std::vector<WindowLabel>& labels,
                       const Eigen::VectorXd& validation_scores, const ThresholdPolicy& policy);

struct SeizureInterval {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct PhaseHorizons {
  double preictal_s = 900.0;
  double postictal_s = 900.0;
};

// Second s covers [s, s+1). Ictal: start <= s < end. Preictal: within
// preictal_s before a start. Postictal: within postictal_s after an end.
// Precedence: ictal, then preictal, then postictal.
std::vector<Phase> tag_phases(Index seconds, const std::vector<SeizureInterval>& intervals,
                              const PhaseHorizons& horizons);

constexpr std::array<Phase, 4> kAllPhases = {Phase::kPreictal, Phase::kIctal, Phase::kPostictal,
                                             Phase::kInterictal};

struct PhaseCounts {
  std::array<Index, 4> seconds{};  // indexed by Phase value
  std::array<Index, 4> flagged{};
  Index total(Phase p) const { return seconds[static_cast<std::size_t>(p)]; }
  // Percentage in [0, 100]; 0 when the phase is absent.
  double rate(Phase p) const;
};

struct TrackPredictions {
  std::string track_id;
  std::string subject_id;
  std::vector<WindowLabel> per_second;
  std::vector<SeizureInterval> intervals;
};

struct TrackPhaseRates {
  std::string track_id;
  std::string subject_id;
  PhaseCounts counts;
};

// Mean and sample standard deviation over the subject's seizure tracks that
// contain the phase.
struct SubjectPhaseRates {
  std::string subject_id;
  Index seizure_tracks = 0;
  std::array<double, 4> mean{};
  std::array<double, 4> std{};
  std::array<Index, 4> tracks_with_phase{};
};

struct PhaseRateReport {
  PhaseHorizons horizons;
  std::vector<TrackPhaseRates> tracks;
  std::vector<SubjectPhaseRates> subjects;
};

PhaseCounts count_phases(const std::vector<WindowLabel>& per_second, const std::vector<Phase>& tags);
PhaseRateReport phase_rates(const std::vector<TrackPredictions>& tracks, const PhaseHorizons& horizons);

void to_json(nlohmann::json& j, const DetectionMetrics& m);
void to_json(nlohmann::json& j, const DetectionReport& r);
void to_json(nlohmann::json& j, const PhaseRateReport& r);

std::string confusion_table(const DetectionMetrics& m);
std::string phase_table(const PhaseRateReport& r);

// `second,mse,prediction,phase`; prediction is 1 for anomalous.
void write_score_trace_csv(std::ostream& out, const std::vector<double>& seconds,
                           const Eigen::VectorXd& scores, const std::vector<WindowLabel>& predictions,
                           const std::vector<Phase>& phases);

}  // namespace sincvae
