#include "sincvae/detector.hpp"

#include "sincvae/csv.hpp"
#include "sincvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace sincvae {

void ThresholdPolicy::validate() const {
  if (kind == Kind::kPercentile) {
    require(percentile > 0.0 && percentile <= 100.0, ErrorCode::kConfig,
            "percentile must lie in (0, 100], got " + format_double(percentile));
  }
}

std::string ThresholdPolicy::to_string() const {
  if (kind == Kind::kMax) return "max";
  std::string s = "percentile:" + format_double(percentile);
  if (method == PercentileMethod::kNearestRank) s += ":nearest";
  return s;
}

ThresholdPolicy parse_threshold_policy(const std::string& text) {
  if (text == "max") return ThresholdPolicy::max();
  const std::string prefix = "percentile:";
  require(text.rfind(prefix, 0) == 0, ErrorCode::kConfig,
          "unknown threshold policy '" + text + "' (expected max | percentile:<p>[:nearest|:linear])");
  std::string rest = text.substr(prefix.size());
  PercentileMethod method = PercentileMethod::kLinear;
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    const std::string m = rest.substr(colon + 1);
    rest = rest.substr(0, colon);
    if (m == "nearest") {
      method = PercentileMethod::kNearestRank;
    } else {
      require(m == "linear", ErrorCode::kConfig, "unknown percentile method '" + m + "'");
    }
  }
  double p = 0.0;
  require(parse_double(rest, p), ErrorCode::kConfig, "bad percentile '" + rest + "'");
  ThresholdPolicy policy = ThresholdPolicy::at_percentile(p, method);
  policy.validate();
  return policy;
}

double percentile(std::vector<double> values, double p, PercentileMethod method) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "percentile of an empty score set");
  require(p > 0.0 && p <= 100.0, ErrorCode::kInvalidArgument, "percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (method == PercentileMethod::kNearestRank) {
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    return values[std::clamp<std::size_t>(rank, 1, n) - 1];
  }
  const double h = static_cast<double>(n - 1) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return values[n - 1];
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double resolve_threshold(const Eigen::VectorXd& scores, const ThresholdPolicy& policy) {
  policy.validate();
  require(scores.size() > 0, ErrorCode::kInvalidArgument, "cannot resolve a threshold from no scores");
  require(scores.allFinite(), ErrorCode::kNonFinite, "validation scores contain non-finite values");
  if (policy.kind == ThresholdPolicy::Kind::kMax) return scores.maxCoeff();
  return percentile(std::vector<double>(scores.begin(), scores.end()), policy.percentile, policy.method);
}

std::vector<WindowLabel> classify(const Eigen::VectorXd& scores, double threshold) {
  std::vector<WindowLabel> out;
  out.reserve(static_cast<std::size_t>(scores.size()));
  for (double s : scores) out.push_back(s > threshold ? WindowLabel::kSeizure : WindowLabel::kNonSeizure);
  return out;
}

DetectionMetrics compute_metrics(const std::vector<WindowLabel>& predictions,
                                 const std::vector<WindowLabel>& labels) {
  require(predictions.size() == labels.size(), ErrorCode::kShapeMismatch,
          "compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
              std::to_string(labels.size()) + " labels");
  DetectionMetrics m;
  ConfusionCounts& c = m.counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == WindowLabel::kSeizure;
    const bool pos = labels[i] == WindowLabel::kSeizure;
    if (pred && pos) ++c.tp;
    if (pred && !pos) ++c.fp;
    if (!pred && !pos) ++c.tn;
    if (!pred && pos) ++c.fn;
  }
  const auto ratio = [](Index num, Index den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  m.false_positive_rate = ratio(c.fp, c.fp + c.tn, m.false_positive_rate_undefined);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, m.f1_undefined);
  return m;
}

DetectionReport detect(const Eigen::VectorXd& scores, const std::vector<WindowLabel>& labels,
                       const Eigen::VectorXd& validation_scores, const ThresholdPolicy& policy) {
  require(static_cast<std::size_t>(scores.size()) == labels.size(), ErrorCode::kShapeMismatch,
          "detect: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
  DetectionReport r;
  r.policy = policy.to_string();
  r.threshold = resolve_threshold(validation_scores, policy);
  r.scores = scores;
  r.labels = labels;
  r.predictions = classify(scores, r.threshold);
  r.metrics = compute_metrics(r.predictions, labels);
  return r;
}

namespace {

void require_intervals(const std::vector<SeizureInterval>& intervals) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    require(iv.start_s >= 0.0 && iv.end_s > iv.start_s, ErrorCode::kInvalidArgument,
            "seizure interval [" + format_double(iv.start_s) + ", " + format_double(iv.end_s) +
                ") must satisfy 0 <= start < end");
    if (i > 0) {
      require(iv.start_s >= intervals[i - 1].end_s, ErrorCode::kInvalidArgument,
              "seizure intervals overlap or are unsorted at [" + format_double(iv.start_s) + ", " +
                  format_double(iv.end_s) + ")");
    }
  }
}

std::size_t slot(Phase p) { return static_cast<std::size_t>(p); }

}  // namespace

std::vector<Phase> tag_phases(Index seconds, const std::vector<SeizureInterval>& intervals,
                              const PhaseHorizons& horizons) {
  require_intervals(intervals);
  require(horizons.preictal_s >= 0.0 && horizons.postictal_s >= 0.0, ErrorCode::kInvalidArgument,
          "phase horizons must be non-negative");
  std::vector<Phase> tags(static_cast<std::size_t>(seconds), Phase::kInterictal);
  for (Index s = 0; s < seconds; ++s) {
    const double t = static_cast<double>(s);
    bool ictal = false;
    bool pre = false;
    bool post = false;
    for (const auto& iv : intervals) {
      ictal = ictal || (t >= iv.start_s && t < iv.end_s);
      pre = pre || (t < iv.start_s && t >= iv.start_s - horizons.preictal_s);
      post = post || (t >= iv.end_s && t < iv.end_s + horizons.postictal_s);
    }
    auto& tag = tags[static_cast<std::size_t>(s)];
    if (ictal) {
      tag = Phase::kIctal;
    } else if (pre) {
      tag = Phase::kPreictal;
    } else if (post) {
      tag = Phase::kPostictal;
    }
  }
  return tags;
}

double PhaseCounts::rate(Phase p) const {
  const Index n = seconds[slot(p)];
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(flagged[slot(p)]) / static_cast<double>(n);
}

PhaseCounts count_phases(const std::vector<WindowLabel>& per_second, const std::vector<Phase>& tags) {
  require(per_second.size() == tags.size(), ErrorCode::kShapeMismatch,
          "count_phases: " + std::to_string(per_second.size()) + " predictions vs " +
              std::to_string(tags.size()) + " tags");
  PhaseCounts c;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    ++c.seconds[slot(tags[i])];
    if (per_second[i] == WindowLabel::kSeizure) ++c.flagged[slot(tags[i])];
  }
  return c;
}

PhaseRateReport phase_rates(const std::vector<TrackPredictions>& tracks, const PhaseHorizons& horizons) {
  PhaseRateReport report;
  report.horizons = horizons;
  std::map<std::string, std::vector<const TrackPhaseRates*>> by_subject;
  std::vector<std::string> order;
  for (const auto& t : tracks) {
    const auto tags = tag_phases(static_cast<Index>(t.per_second.size()), t.intervals, horizons);
    report.tracks.push_back({t.track_id, t.subject_id, count_phases(t.per_second, tags)});
  }
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].intervals.empty()) continue;
    const auto& subject = tracks[i].subject_id;
    if (!by_subject.count(subject)) order.push_back(subject);
    by_subject[subject].push_back(&report.tracks[i]);
  }
  for (const auto& subject : order) {
    SubjectPhaseRates s;
    s.subject_id = subject;
    const auto& members = by_subject[subject];
    s.seizure_tracks = static_cast<Index>(members.size());
    for (Phase p : kAllPhases) {
      std::vector<double> rates;
      for (const auto* t : members) {
        if (t->counts.total(p) > 0) rates.push_back(t->counts.rate(p));
      }
      const auto k = slot(p);
      s.tracks_with_phase[k] = static_cast<Index>(rates.size());
      if (rates.empty()) continue;
      double mean = 0.0;
      for (double r : rates) mean += r;
      mean /= static_cast<double>(rates.size());
      double ss = 0.0;
      for (double r : rates) ss += (r - mean) * (r - mean);
      s.mean[k] = mean;
      s.std[k] = rates.size() > 1 ? std::sqrt(ss / static_cast<double>(rates.size() - 1)) : 0.0;
    }
    report.subjects.push_back(s);
  }
  return report;
}

void to_json(nlohmann::json& j, const DetectionMetrics& m) {
  j = {
      {"tp", m.counts.tp},
      {"fp", m.counts.fp},
      {"tn", m.counts.tn},
      {"fn", m.counts.fn},
      {"precision", m.precision},
      {"recall", m.recall},
      {"f1", m.f1},
      {"false_positive_rate", m.false_positive_rate},
      {"undefined", {{"precision", m.precision_undefined},
                     {"recall", m.recall_undefined},
                     {"f1", m.f1_undefined},
                     {"false_positive_rate", m.false_positive_rate_undefined}}},
  };
}

void to_json(nlohmann::json& j, const DetectionReport& r) {
  j = {{"policy", r.policy},
       {"threshold", r.threshold},
       {"windows", r.scores.size()},
       {"metrics", r.metrics}};
}

void to_json(nlohmann::json& j, const PhaseRateReport& r) {
  const auto phase_object = [](const auto& value_of) {
    nlohmann::json o = nlohmann::json::object();
    for (Phase p : kAllPhases) o[to_string(p)] = value_of(p);
    return o;
  };
  j["horizons_s"] = {{"preictal", r.horizons.preictal_s}, {"postictal", r.horizons.postictal_s}};
  j["tracks"] = nlohmann::json::array();
  for (const auto& t : r.tracks) {
    j["tracks"].push_back({
        {"track", t.track_id},
        {"subject", t.subject_id},
        {"seconds", phase_object([&](Phase p) { return t.counts.total(p); })},
        {"flagged", phase_object([&](Phase p) { return t.counts.flagged[slot(p)]; })},
        {"rate_percent", phase_object([&](Phase p) { return t.counts.rate(p); })},
    });
  }
  j["subjects"] = nlohmann::json::array();
  for (const auto& s : r.subjects) {
    j["subjects"].push_back({
        {"subject", s.subject_id},
        {"seizure_tracks", s.seizure_tracks},
        {"mean_percent", phase_object([&](Phase p) { return s.mean[slot(p)]; })},
        {"std_percent", phase_object([&](Phase p) { return s.std[slot(p)]; })},
        {"tracks_with_phase", phase_object([&](Phase p) { return s.tracks_with_phase[slot(p)]; })},
    });
  }
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string confusion_table(const DetectionMetrics& m) {
  const auto& c = m.counts;
  std::ostringstream os;
  os << std::left << std::setw(18) << "" << std::right << std::setw(12) << "pred seizure"
     << std::setw(14) << "pred normal" << '\n';
  os << std::left << std::setw(18) << "label seizure" << std::right << std::setw(12) << c.tp
     << std::setw(14) << c.fn << '\n';
  os << std::left << std::setw(18) << "label non-seizure" << std::right << std::setw(12) << c.fp
     << std::setw(14) << c.tn << '\n';
  const auto line = [&](const char* name, double v, bool undefined) {
    os << std::left << std::setw(10) << name << std::right << std::setw(8) << fixed(v, 4)
       << (undefined ? "  (undefined)" : "") << '\n';
  };
  os << '\n';
  line("precision", m.precision, m.precision_undefined);
  line("recall", m.recall, m.recall_undefined);
  line("f1", m.f1, m.f1_undefined);
  line("fpr", m.false_positive_rate, m.false_positive_rate_undefined);
  return os.str();
}

std::string phase_table(const PhaseRateReport& r) {
  std::ostringstream os;
  os << "horizons: preictal " << format_double(r.horizons.preictal_s) << " s, postictal "
     << format_double(r.horizons.postictal_s) << " s\n";
  os << std::left << std::setw(16) << "subject" << std::right << std::setw(8) << "tracks";
  for (Phase p : kAllPhases) os << std::setw(20) << to_string(p);
  os << '\n';
  for (const auto& s : r.subjects) {
    os << std::left << std::setw(16) << s.subject_id << std::right << std::setw(8) << s.seizure_tracks;
    for (Phase p : kAllPhases) {
      const auto k = slot(p);
      const std::string cell = s.tracks_with_phase[k] == 0
                                   ? "-"
                                   : fixed(s.mean[k], 2) + " +- " + fixed(s.std[k], 2);
      os << std::setw(20) << cell;
    }
    os << '\n';
  }
  return os.str();
}

void write_score_trace_csv(std::ostream& out, const std::vector<double>& seconds,
                           const Eigen::VectorXd& scores, const std::vector<WindowLabel>& predictions,
                           const std::vector<Phase>& phases) {
  const auto n = seconds.size();
  require(static_cast<std::size_t>(scores.size()) == n && predictions.size() == n &&
              (phases.empty() || phases.size() == n),
          ErrorCode::kShapeMismatch, "score trace: column lengths differ");
  out << "second,mse,prediction,phase\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << format_double(seconds[i]) << ',' << format_double(scores[static_cast<Index>(i)]) << ','
        << (predictions[i] == WindowLabel::kSeizure ? 1 : 0) << ','
        << (phases.empty() ? "" : to_string(phases[i])) << '\n';
  }
}

}  // namespace sincvae
