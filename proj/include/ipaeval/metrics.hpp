#pragma once

// Classification metrics under the harness's class conventions, regression
// errors over PSDI, Cohen's kappa for annotator agreement, and multi-run
// aggregation. Pure functions over label sequences; label types only need
// ordering and a string rendering.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "ipaeval/errors.hpp"
#include "ipaeval/records.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

/// Detection label derived from an integer score: -1 is the negative class,
/// 0/1/2 are positive (a dimension was addressed).
enum class DetectionLabel { negative, positive };

inline const char* to_string(DetectionLabel l) {
  return l == DetectionLabel::negative ? "negative" : "positive";
}

inline DetectionLabel binarize_detection(int score) {
  if (score < -1 || score > 2)
    throw ValidationError("score outside {-1,0,1,2}: " + std::to_string(score));
  return score == -1 ? DetectionLabel::negative : DetectionLabel::positive;
}

namespace detail {

template <typename Label>
std::string label_key(const Label& label) {
  if constexpr (std::is_same_v<Label, std::string>) {
    return label;
  } else if constexpr (std::is_convertible_v<Label, std::string>) {
    return std::string(label);
  } else if constexpr (std::is_integral_v<Label>) {
    return std::to_string(label);
  } else {
    return std::string(to_string(label));  // enums provide to_string via ADL
  }
}

}  // namespace detail

struct MetricReport {
  double accuracy = 0.0;
  double precision = 0.0;   // of the positive class
  double recall = 0.0;      // of the positive class
  double f1_binary = 0.0;   // of the positive class
  double f1_macro = 0.0;    // unweighted mean of per-class F1
  double f1_weighted = 0.0; // reference-support weighted mean of per-class F1
  std::optional<double> mse;  // present for severity reports
  std::optional<double> mae;
  std::map<std::string, std::size_t> support;  // reference count per class

  /// Flat name -> value view used for aggregation and serialization.
  std::map<std::string, double> metric_map() const {
    std::map<std::string, double> m{{"accuracy", accuracy},   {"precision", precision},
                                    {"recall", recall},       {"f1_binary", f1_binary},
                                    {"f1_macro", f1_macro},   {"f1_weighted", f1_weighted}};
    if (mse) m["mse"] = *mse;
    if (mae) m["mae"] = *mae;
    return m;
  }
};

/// Accuracy, positive-class precision/recall/F1, macro F1, and weighted F1.
/// Zero-division convention: a class with zero predicted or actual support
/// contributes F1 = 0.
template <typename Label>
MetricReport classification_metrics(const std::vector<Label>& predictions,
                                    const std::vector<Label>& references,
                                    const Label& positive_class) {
  if (predictions.empty() || references.empty())
    throw ValidationError("classification_metrics needs non-empty inputs");
  if (predictions.size() != references.size())
    throw ValidationError("predictions and references have different lengths");

  const auto n = predictions.size();
  std::map<Label, std::size_t> tp, fp, fn, ref_count;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ++ref_count[references[i]];
    if (predictions[i] == references[i]) {
      ++correct;
      ++tp[predictions[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[references[i]];
    }
  }

  std::map<Label, std::size_t> label_set = ref_count;
  for (const auto& [label, _] : tp) label_set.emplace(label, 0);
  for (const auto& [label, _] : fp) label_set.emplace(label, 0);

  auto count = [](const std::map<Label, std::size_t>& m, const Label& l) -> double {
    auto it = m.find(l);
    return it == m.end() ? 0.0 : static_cast<double>(it->second);
  };
  auto f1_of = [&](const Label& l) {
    double p_den = count(tp, l) + count(fp, l);
    double r_den = count(tp, l) + count(fn, l);
    double p = p_den > 0 ? count(tp, l) / p_den : 0.0;
    double r = r_den > 0 ? count(tp, l) / r_den : 0.0;
    return (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
  };

  MetricReport report;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  {
    double p_den = count(tp, positive_class) + count(fp, positive_class);
    double r_den = count(tp, positive_class) + count(fn, positive_class);
    report.precision = p_den > 0 ? count(tp, positive_class) / p_den : 0.0;
    report.recall = r_den > 0 ? count(tp, positive_class) / r_den : 0.0;
    report.f1_binary = (report.precision + report.recall) > 0
                           ? 2.0 * report.precision * report.recall /
                                 (report.precision + report.recall)
                           : 0.0;
  }
  double macro_sum = 0.0;
  double weighted_sum = 0.0;
  for (const auto& [label, refs] : label_set) {
    double f1 = f1_of(label);
    macro_sum += f1;
    weighted_sum += f1 * static_cast<double>(refs);
    report.support[detail::label_key(label)] = refs;
  }
  report.f1_macro = macro_sum / static_cast<double>(label_set.size());
  report.f1_weighted = weighted_sum / static_cast<double>(n);
  return report;
}

struct SeverityErrors {
  double mse = 0.0;
  double mae = 0.0;
};

/// Mean squared and mean absolute error over paired severity values.
inline SeverityErrors severity_errors(const std::vector<double>& predicted,
                                      const std::vector<double>& reference) {
  if (predicted.empty() || reference.empty())
    throw ValidationError("severity_errors needs non-empty inputs");
  if (predicted.size() != reference.size())
    throw ValidationError("predicted and reference have different lengths");
  double se = 0.0;
  double ae = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    double d = predicted[i] - reference[i];
    se += d * d;
    ae += std::abs(d);
  }
  auto n = static_cast<double>(predicted.size());
  return {se / n, ae / n};
}

/// Cohen's kappa = (p_o - p_e) / (1 - p_e). When both raters are constant and
/// identical, p_e = 1 and agreement is perfect, so kappa is 1 by convention.
template <typename Label>
double cohen_kappa(const std::vector<Label>& annotator_a, const std::vector<Label>& annotator_b) {
  if (annotator_a.empty() || annotator_b.empty())
    throw ValidationError("cohen_kappa needs non-empty inputs");
  if (annotator_a.size() != annotator_b.size())
    throw ValidationError("annotator lists have different lengths");

  const auto n = static_cast<double>(annotator_a.size());
  std::map<Label, std::size_t> count_a, count_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < annotator_a.size(); ++i) {
    ++count_a[annotator_a[i]];
    ++count_b[annotator_b[i]];
    if (annotator_a[i] == annotator_b[i]) ++agree;
  }
  double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, ca] : count_a) {
    auto it = count_b.find(label);
    if (it == count_b.end()) continue;
    p_e += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
  }
  if (p_e >= 1.0 - 1e-15) return p_o >= 1.0 - 1e-15 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const MeanStd&) const = default;
};

/// Per-metric mean and standard deviation over runs.
struct RunAggregate {
  std::size_t runs = 0;
  std::map<std::string, MeanStd> metrics;
};

/// Aggregate per-run metric maps. All maps must share one key set. Population
/// standard deviation by default (the runs are the whole population of
/// interest); pass sample_std for the n-1 denominator.
inline RunAggregate aggregate_metric_maps(const std::vector<std::map<std::string, double>>& runs,
                                          bool sample_std = false) {
  if (runs.empty()) throw ValidationError("aggregate needs at least one run");
  const auto& keys = runs.front();
  for (const auto& run : runs) {
    if (run.size() != keys.size())
      throw ValidationError("runs have mismatched metric keys");
    for (const auto& [k, _] : keys) {
      if (!run.count(k)) throw ValidationError("runs have mismatched metric keys: " + k);
    }
  }

  RunAggregate out;
  out.runs = runs.size();
  auto n = static_cast<double>(runs.size());
  for (const auto& [key, _] : keys) {
    bool all_identical = true;
    for (const auto& run : runs) {
      if (run.at(key) != runs.front().at(key)) all_identical = false;
    }
    if (all_identical) {  // std must be exactly 0, free of accumulation noise
      out.metrics[key] = MeanStd{runs.front().at(key), 0.0};
      continue;
    }
    double sum = 0.0;
    for (const auto& run : runs) sum += run.at(key);
    double mean = sum / n;
    double var = 0.0;
    for (const auto& run : runs) {
      double d = run.at(key) - mean;
      var += d * d;
    }
    double den = sample_std ? (n > 1 ? n - 1 : 1.0) : n;
    out.metrics[key] = MeanStd{mean, std::sqrt(var / den)};
  }
  return out;
}

inline RunAggregate aggregate_runs(const std::vector<MetricReport>& reports,
                                   bool sample_std = false) {
  std::vector<std::map<std::string, double>> maps;
  maps.reserve(reports.size());
  for (const auto& r : reports) maps.push_back(r.metric_map());
  return aggregate_metric_maps(maps, sample_std);
}

// --- JSON conversions ---

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json::object();
  for (const auto& [k, v] : r.metric_map()) j[k] = v;
  j["support"] = r.support;
}

inline void to_json(nlohmann::json& j, const MeanStd& m) {
  j = nlohmann::json{{"mean", m.mean}, {"std", m.std}};
}

inline void to_json(nlohmann::json& j, const RunAggregate& a) {
  j = nlohmann::json{{"runs", a.runs}, {"metrics", a.metrics}};
}

}  // namespace ipaeval
