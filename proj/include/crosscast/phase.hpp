#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosscast/candles.hpp"
#include "crosscast/indicators.hpp"

namespace crosscast {

/// Historical closes followed by forecast closes on consecutive dates.
struct SplicedSeries {
  std::vector<Date> dates;
  std::vector<double> closes;
  std::size_t actual_count = 0;  ///< prefix carrying real (non-forecast) closes

  std::size_t size() const { return closes.size(); }
  bool predicted(std::size_t i) const { return i >= actual_count; }
};

/// Appends the forecast for the last history day. Horizon 0 duplicates the
/// already-known close and is dropped; horizons 1..N land on consecutive
/// days after the history.
inline SplicedSeries splice(const CandleSeries& history, std::span<const double> forecast) {
  if (history.empty()) throw std::invalid_argument("splice: empty history");
  if (forecast.empty()) throw std::invalid_argument("splice: empty forecast");
  SplicedSeries s;
  s.actual_count = history.size();
  s.dates.reserve(history.size() + forecast.size() - 1);
  s.closes.reserve(history.size() + forecast.size() - 1);
  for (const auto& c : history.candles) {
    s.dates.push_back(c.date);
    s.closes.push_back(c.close);
  }
  Date last = history.candles.back().date;
  for (std::size_t h = 1; h < forecast.size(); ++h) {
    s.dates.push_back(last + static_cast<int>(h));
    s.closes.push_back(forecast[h]);
  }
  return s;
}

/// A series with zero predicted days; the degenerate splice.
inline SplicedSeries as_spliced(const CandleSeries& history) {
  if (history.empty()) throw std::invalid_argument("empty history");
  SplicedSeries s;
  s.actual_count = history.size();
  for (const auto& c : history.candles) {
    s.dates.push_back(c.date);
    s.closes.push_back(c.close);
  }
  return s;
}

struct MaPair {
  IndicatorSeries sma_short;
  IndicatorSeries sma_long;
};

/// Both moving averages over the full spliced closes; actual and predicted
/// days are treated uniformly.
inline MaPair project_mas(const SplicedSeries& s, std::size_t short_window = 50,
                          std::size_t long_window = 200) {
  if (short_window >= long_window)
    throw std::invalid_argument("project_mas: short window must be < long window");
  if (s.size() < long_window)
    throw Error("spliced series has " + std::to_string(s.size()) + " days, need at least " +
                std::to_string(long_window));
  return {sma(s.closes, short_window), sma(s.closes, long_window)};
}

enum class CrossKind { Golden, Death };

struct CrossEvent {
  std::size_t index = 0;  ///< position in the spliced series
  Date date{};            ///< filled in by build_report
  CrossKind kind = CrossKind::Golden;
  double short_ma = 0.0;
  double long_ma = 0.0;
  bool advance = false;  ///< event date lies in the predicted region
};

/// Sign-scan cross detection. A zero difference inherits the prior sign, so
/// touching without crossing is not an event; a leading run with no
/// established sign produces no event either.
inline std::vector<CrossEvent> detect_crosses(const IndicatorSeries& sma_short,
                                              const IndicatorSeries& sma_long) {
  if (sma_short.size() != sma_long.size())
    throw std::invalid_argument("detect_crosses: length mismatch");
  std::vector<CrossEvent> events;
  const std::size_t first = std::max(sma_short.first_defined, sma_long.first_defined);
  int sign = 0;
  for (std::size_t i = first; i < sma_short.size(); ++i) {
    double diff = sma_short.values[i] - sma_long.values[i];
    int cur = diff > 0.0 ? 1 : diff < 0.0 ? -1 : sign;
    if (cur != 0 && sign != 0 && cur != sign) {
      CrossEvent e;
      e.index = i;
      e.kind = cur > 0 ? CrossKind::Golden : CrossKind::Death;
      e.short_ma = sma_short.values[i];
      e.long_ma = sma_long.values[i];
      events.push_back(e);
    }
    sign = cur;
  }
  return events;
}

enum class PhaseLabel { Bull, Bear };

/// Bull where the short MA is strictly above the long MA, Bear where below;
/// tie days carry the neighbouring side (leading ties take the first side
/// that establishes, so label flips always line up with cross events).
inline std::vector<std::optional<PhaseLabel>> label_phases(const IndicatorSeries& sma_short,
                                                           const IndicatorSeries& sma_long) {
  if (sma_short.size() != sma_long.size())
    throw std::invalid_argument("label_phases: length mismatch");
  std::vector<std::optional<PhaseLabel>> labels(sma_short.size());
  const std::size_t first = std::max(sma_short.first_defined, sma_long.first_defined);
  std::optional<PhaseLabel> current;
  std::size_t pending_from = first;  // leading ties awaiting a side
  for (std::size_t i = first; i < sma_short.size(); ++i) {
    double diff = sma_short.values[i] - sma_long.values[i];
    if (diff > 0.0)
      current = PhaseLabel::Bull;
    else if (diff < 0.0)
      current = PhaseLabel::Bear;
    if (!current) continue;  // still in a leading tie run
    if (pending_from < i)
      for (std::size_t k = pending_from; k < i; ++k) labels[k] = current;
    pending_from = i + 1;
    labels[i] = current;
  }
  if (!current)  // the series never leaves the tie; pick the bearish default
    for (std::size_t k = first; k < sma_short.size(); ++k) labels[k] = PhaseLabel::Bear;
  return labels;
}

/// Spliced closes, both MA curves, cross events and per-day phase labels.
struct PhaseReport {
  SplicedSeries series;
  IndicatorSeries sma_short;
  IndicatorSeries sma_long;
  std::vector<CrossEvent> events;
  std::vector<std::optional<PhaseLabel>> labels;

  nlohmann::json to_json() const;
  static PhaseReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

inline PhaseReport build_report(const SplicedSeries& spliced, std::size_t short_window,
                                std::size_t long_window) {
  PhaseReport report;
  report.series = spliced;
  auto mas = project_mas(spliced, short_window, long_window);
  report.sma_short = std::move(mas.sma_short);
  report.sma_long = std::move(mas.sma_long);
  report.events = detect_crosses(report.sma_short, report.sma_long);
  for (auto& e : report.events) {
    e.date = spliced.dates[e.index];
    e.advance = spliced.predicted(e.index);
  }
  report.labels = label_phases(report.sma_short, report.sma_long);
  return report;
}

inline PhaseReport build_report(const CandleSeries& history, std::span<const double> forecast,
                                const IndicatorConfig& cfg) {
  return build_report(splice(history, forecast), cfg.sma_short, cfg.sma_long);
}

/// Report over plain history, no forecast region.
inline PhaseReport actual_report(const CandleSeries& history, const IndicatorConfig& cfg) {
  return build_report(as_spliced(history), cfg.sma_short, cfg.sma_long);
}

inline nlohmann::json PhaseReport::to_json() const {
  nlohmann::json dates = nlohmann::json::array();
  nlohmann::json closes = nlohmann::json::array();
  nlohmann::json provenance = nlohmann::json::array();
  nlohmann::json sma50 = nlohmann::json::array();
  nlohmann::json sma200 = nlohmann::json::array();
  nlohmann::json jlabels = nlohmann::json::array();
  for (std::size_t i = 0; i < series.size(); ++i) {
    dates.push_back(series.dates[i].to_string());
    closes.push_back(series.closes[i]);
    provenance.push_back(series.predicted(i) ? "predicted" : "actual");
    sma50.push_back(sma_short.defined(i) ? nlohmann::json(sma_short.values[i])
                                         : nlohmann::json(nullptr));
    sma200.push_back(sma_long.defined(i) ? nlohmann::json(sma_long.values[i])
                                         : nlohmann::json(nullptr));
    jlabels.push_back(labels[i] ? nlohmann::json(*labels[i] == PhaseLabel::Bull ? "bull" : "bear")
                                : nlohmann::json(nullptr));
  }
  nlohmann::json jevents = nlohmann::json::array();
  for (const auto& e : events)
    jevents.push_back({{"date", e.date.to_string()},
                       {"kind", e.kind == CrossKind::Golden ? "golden" : "death"},
                       {"short", e.short_ma},
                       {"long", e.long_ma},
                       {"advance", e.advance}});
  return {{"schema_version", 1}, {"dates", dates},     {"close", closes},
          {"provenance", provenance}, {"sma50", sma50}, {"sma200", sma200},
          {"labels", jlabels},        {"events", jevents}};
}

inline PhaseReport PhaseReport::from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != 1) throw Error("phase report: schema-version mismatch");
  PhaseReport r;
  const auto& dates = j.at("dates");
  const auto& closes = j.at("close");
  const auto& provenance = j.at("provenance");
  const auto& sma50 = j.at("sma50");
  const auto& sma200 = j.at("sma200");
  const auto& jlabels = j.at("labels");
  const std::size_t n = dates.size();
  if (closes.size() != n || provenance.size() != n || sma50.size() != n || sma200.size() != n ||
      jlabels.size() != n)
    throw Error("phase report: misaligned arrays");

  r.series.actual_count = n;
  r.sma_short = IndicatorSeries::undefined(n);
  r.sma_long = IndicatorSeries::undefined(n);
  r.labels.resize(n);
  bool short_started = false, long_started = false;
  for (std::size_t i = 0; i < n; ++i) {
    r.series.dates.push_back(Date::parse(dates[i].get<std::string>()));
    r.series.closes.push_back(closes[i].get<double>());
    if (provenance[i].get<std::string>() == "predicted")
      r.series.actual_count = std::min(r.series.actual_count, i);
    if (!sma50[i].is_null()) {
      if (!short_started) r.sma_short.first_defined = i;
      short_started = true;
      r.sma_short.values[i] = sma50[i].get<double>();
    }
    if (!sma200[i].is_null()) {
      if (!long_started) r.sma_long.first_defined = i;
      long_started = true;
      r.sma_long.values[i] = sma200[i].get<double>();
    }
    if (!jlabels[i].is_null())
      r.labels[i] = jlabels[i].get<std::string>() == "bull" ? PhaseLabel::Bull : PhaseLabel::Bear;
  }
  for (const auto& je : j.at("events")) {
    CrossEvent e;
    e.date = Date::parse(je.at("date").get<std::string>());
    e.kind = je.at("kind").get<std::string>() == "golden" ? CrossKind::Golden : CrossKind::Death;
    e.short_ma = je.at("short").get<double>();
    e.long_ma = je.at("long").get<double>();
    e.advance = je.at("advance").get<bool>();
    for (std::size_t i = 0; i < r.series.dates.size(); ++i)
      if (r.series.dates[i] == e.date) e.index = i;
    r.events.push_back(e);
  }
  return r;
}

/// Plot-ready CSV: one row per day, undefined cells empty.
inline std::string PhaseReport::to_csv() const {
  std::string out = "date,close,provenance,sma50,sma200,label\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += series.dates[i].to_string();
    out += ',';
    out += detail::format_double(series.closes[i]);
    out += series.predicted(i) ? ",predicted," : ",actual,";
    if (sma_short.defined(i)) out += detail::format_double(sma_short.values[i]);
    out += ',';
    if (sma_long.defined(i)) out += detail::format_double(sma_long.values[i]);
    out += ',';
    if (labels[i]) out += *labels[i] == PhaseLabel::Bull ? "bull" : "bear";
    out += '\n';
  }
  return out;
}

}  // namespace crosscast
