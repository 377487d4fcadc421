#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosscast/phase.hpp"

namespace crosscast {

/// Operationalizes "do the curves follow each other": error magnitude,
/// shape correlation, and day-over-day direction agreement.
struct CurveMetrics {
  double rmse = 0.0;
  std::optional<double> pearson_r;  ///< absent when either curve is constant
  double slope_agreement = 0.0;     ///< fraction of matching slope signs

  nlohmann::json to_json() const {
    return {{"rmse", rmse},
            {"pearson_r", pearson_r ? nlohmann::json(*pearson_r) : nlohmann::json(nullptr)},
            {"slope_agreement", slope_agreement}};
  }
};

/// Metrics over the indices where both curves are defined.
inline CurveMetrics curve_metrics(const IndicatorSeries& actual,
                                  const IndicatorSeries& predicted) {
  if (actual.size() != predicted.size())
    throw std::invalid_argument("curve_metrics: length mismatch");
  const std::size_t first = std::max(actual.first_defined, predicted.first_defined);
  if (first >= actual.size()) throw std::invalid_argument("curve_metrics: no shared points");
  const std::size_t count = actual.size() - first;
  if (count < 2) throw std::invalid_argument("curve_metrics: need >= 2 shared points");

  CurveMetrics m;
  double sq = 0.0, mean_a = 0.0, mean_p = 0.0;
  for (std::size_t i = first; i < actual.size(); ++i) {
    double d = actual.values[i] - predicted.values[i];
    sq += d * d;
    mean_a += actual.values[i];
    mean_p += predicted.values[i];
  }
  m.rmse = std::sqrt(sq / static_cast<double>(count));
  mean_a /= static_cast<double>(count);
  mean_p /= static_cast<double>(count);

  double cov = 0.0, var_a = 0.0, var_p = 0.0;
  for (std::size_t i = first; i < actual.size(); ++i) {
    double da = actual.values[i] - mean_a;
    double dp = predicted.values[i] - mean_p;
    cov += da * dp;
    var_a += da * da;
    var_p += dp * dp;
  }
  if (var_a > 0.0 && var_p > 0.0) m.pearson_r = cov / std::sqrt(var_a * var_p);

  std::size_t matches = 0;
  auto sign_of = [](double v) { return v > 0.0 ? 1 : v < 0.0 ? -1 : 0; };
  for (std::size_t i = first + 1; i < actual.size(); ++i) {
    int sa = sign_of(actual.values[i] - actual.values[i - 1]);
    int sp = sign_of(predicted.values[i] - predicted.values[i - 1]);
    if (sa == sp) ++matches;
  }
  m.slope_agreement = static_cast<double>(matches) / static_cast<double>(count - 1);
  return m;
}

/// Event-timing comparison between an actual and a predicted report.
struct CrossTiming {
  std::vector<double> errors;  ///< signed days, predicted minus actual, per matched pair
  std::size_t unmatched = 0;   ///< events on either side with no partner

  double mean_abs_error() const {
    if (errors.empty()) return 0.0;
    double s = 0.0;
    for (double e : errors) s += std::abs(e);
    return s / static_cast<double>(errors.size());
  }

  nlohmann::json to_json() const { return {{"errors", errors}, {"unmatched", unmatched}}; }
};

/// Greedy nearest-date matching of same-kind events within ±max_gap_days.
inline CrossTiming match_cross_timing(const std::vector<CrossEvent>& actual,
                                      const std::vector<CrossEvent>& predicted,
                                      int max_gap_days = 30) {
  struct Pair {
    int gap;
    std::size_t a, p;
  };
  std::vector<Pair> candidates;
  for (std::size_t a = 0; a < actual.size(); ++a)
    for (std::size_t p = 0; p < predicted.size(); ++p) {
      if (actual[a].kind != predicted[p].kind) continue;
      int gap = predicted[p].date - actual[a].date;
      if (std::abs(gap) <= max_gap_days) candidates.push_back({gap, a, p});
    }
  std::sort(candidates.begin(), candidates.end(), [](const Pair& x, const Pair& y) {
    if (std::abs(x.gap) != std::abs(y.gap)) return std::abs(x.gap) < std::abs(y.gap);
    return std::tie(x.a, x.p) < std::tie(y.a, y.p);
  });

  CrossTiming timing;
  std::vector<bool> a_used(actual.size(), false), p_used(predicted.size(), false);
  for (const Pair& c : candidates) {
    if (a_used[c.a] || p_used[c.p]) continue;
    a_used[c.a] = true;
    p_used[c.p] = true;
    timing.errors.push_back(static_cast<double>(c.gap));
  }
  timing.unmatched = (actual.size() - timing.errors.size()) +
                     (predicted.size() - timing.errors.size());
  return timing;
}

struct ModelEvaluation {
  CurveMetrics short_ma;
  CurveMetrics long_ma;
  CrossTiming cross_timing;
};

/// Side-by-side evaluation of both models against the actual curves.
/// `better` holds one verdict per metric ("mlr", "lstm" or "tie"); no
/// aggregate winner is derived.
struct ComparisonSummary {
  ModelEvaluation mlr;
  ModelEvaluation lstm;
  std::map<std::string, std::string> better;

  nlohmann::json to_json() const {
    auto model_json = [](const ModelEvaluation& m) {
      return nlohmann::json{{"short", m.short_ma.to_json()},
                            {"long", m.long_ma.to_json()},
                            {"cross_timing", m.cross_timing.to_json()}};
    };
    return {{"schema_version", 1},
            {"mlr", model_json(mlr)},
            {"lstm", model_json(lstm)},
            {"better", better}};
  }

  std::string to_table() const;
};

namespace detail {

inline std::string verdict_lower(double mlr_v, double lstm_v) {
  if (mlr_v < lstm_v) return "mlr";
  if (lstm_v < mlr_v) return "lstm";
  return "tie";
}

inline std::string verdict_higher(std::optional<double> mlr_v, std::optional<double> lstm_v) {
  if (!mlr_v && !lstm_v) return "tie";
  if (!mlr_v) return "lstm";
  if (!lstm_v) return "mlr";
  if (*mlr_v > *lstm_v) return "mlr";
  if (*lstm_v > *mlr_v) return "lstm";
  return "tie";
}

}  // namespace detail

/// All three reports must cover the same dates. Cross timing is judged by
/// fewer unmatched events first, then by mean absolute day error.
inline ComparisonSummary compare_models(const PhaseReport& mlr_report,
                                        const PhaseReport& lstm_report,
                                        const PhaseReport& actual) {
  if (mlr_report.series.dates != actual.series.dates ||
      lstm_report.series.dates != actual.series.dates)
    throw Error("date-range mismatch between reports");

  ComparisonSummary s;
  s.mlr.short_ma = curve_metrics(actual.sma_short, mlr_report.sma_short);
  s.mlr.long_ma = curve_metrics(actual.sma_long, mlr_report.sma_long);
  s.mlr.cross_timing = match_cross_timing(actual.events, mlr_report.events);
  s.lstm.short_ma = curve_metrics(actual.sma_short, lstm_report.sma_short);
  s.lstm.long_ma = curve_metrics(actual.sma_long, lstm_report.sma_long);
  s.lstm.cross_timing = match_cross_timing(actual.events, lstm_report.events);

  s.better["rmse_short"] = detail::verdict_lower(s.mlr.short_ma.rmse, s.lstm.short_ma.rmse);
  s.better["rmse_long"] = detail::verdict_lower(s.mlr.long_ma.rmse, s.lstm.long_ma.rmse);
  s.better["pearson_short"] =
      detail::verdict_higher(s.mlr.short_ma.pearson_r, s.lstm.short_ma.pearson_r);
  s.better["pearson_long"] =
      detail::verdict_higher(s.mlr.long_ma.pearson_r, s.lstm.long_ma.pearson_r);
  s.better["slope_short"] = detail::verdict_higher(s.mlr.short_ma.slope_agreement,
                                                   s.lstm.short_ma.slope_agreement);
  s.better["slope_long"] =
      detail::verdict_higher(s.mlr.long_ma.slope_agreement, s.lstm.long_ma.slope_agreement);
  if (s.mlr.cross_timing.unmatched != s.lstm.cross_timing.unmatched)
    s.better["cross_timing"] =
        s.mlr.cross_timing.unmatched < s.lstm.cross_timing.unmatched ? "mlr" : "lstm";
  else if (s.mlr.cross_timing.errors.empty() && s.lstm.cross_timing.errors.empty())
    s.better["cross_timing"] = "tie";
  else
    s.better["cross_timing"] = detail::verdict_lower(s.mlr.cross_timing.mean_abs_error(),
                                                     s.lstm.cross_timing.mean_abs_error());
  return s;
}

inline std::string ComparisonSummary::to_table() const {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  auto opt = [&](std::optional<double> v) { return v ? fmt(*v) : std::string("n/a"); };
  std::string out;
  auto row = [&](const std::string& name, const std::string& m, const std::string& l,
                 const std::string& b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %14s %14s %8s\n", name.c_str(), m.c_str(), l.c_str(),
                  b.c_str());
    out += buf;
  };
  row("metric", "mlr", "lstm", "better");
  row("rmse_short", fmt(mlr.short_ma.rmse), fmt(lstm.short_ma.rmse), better.at("rmse_short"));
  row("rmse_long", fmt(mlr.long_ma.rmse), fmt(lstm.long_ma.rmse), better.at("rmse_long"));
  row("pearson_short", opt(mlr.short_ma.pearson_r), opt(lstm.short_ma.pearson_r),
      better.at("pearson_short"));
  row("pearson_long", opt(mlr.long_ma.pearson_r), opt(lstm.long_ma.pearson_r),
      better.at("pearson_long"));
  row("slope_short", fmt(mlr.short_ma.slope_agreement), fmt(lstm.short_ma.slope_agreement),
      better.at("slope_short"));
  row("slope_long", fmt(mlr.long_ma.slope_agreement), fmt(lstm.long_ma.slope_agreement),
      better.at("slope_long"));
  row("cross_unmatched", std::to_string(mlr.cross_timing.unmatched),
      std::to_string(lstm.cross_timing.unmatched), better.at("cross_timing"));
  row("cross_abs_days", fmt(mlr.cross_timing.mean_abs_error()),
      fmt(lstm.cross_timing.mean_abs_error()), better.at("cross_timing"));
  return out;
}

}  // namespace crosscast
