#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crosscast/candles.hpp"
#include "crosscast/indicators.hpp"
#include "crosscast/linalg.hpp"

namespace crosscast {

inline constexpr std::size_t kHorizon = 21;  ///< days ahead; targets cover h = 0..kHorizon

inline constexpr std::array<std::string_view, 12> kAvailableFeatures = {
    "open",     "high",        "low",      "close",    "volume",   "rsi",
    "macd_line", "macd_signal", "momentum", "bb_upper", "bb_lower", "roc"};

/// Per-day feature vectors with the warmup prefix removed. `closes` carries
/// the raw close per row regardless of which features were selected, so
/// targets can always be attached.
struct FeatureTable {
  std::vector<Date> dates;
  std::vector<std::string> feature_names;
  Matrix values;  ///< rows align with dates
  std::vector<double> closes;

  std::size_t rows() const { return dates.size(); }
};

/// Aligned feature matrix X and target matrix Y with Y[i][h] = close[i+h].
struct Dataset {
  std::vector<Date> dates;
  std::vector<std::string> feature_names;
  Matrix x;
  Matrix y;

  std::size_t rows() const { return dates.size(); }
  std::size_t horizons() const { return y.cols(); }
};

namespace detail {

struct ComputedColumns {
  std::vector<IndicatorSeries> series;  ///< aligned with kAvailableFeatures
};

inline ComputedColumns compute_columns(const CandleSeries& candles, const IndicatorConfig& cfg) {
  cfg.validate();
  const std::size_t n = candles.size();
  auto closes = candles.closes();

  auto raw = [&](auto getter) {
    IndicatorSeries s;
    s.values.resize(n);
    s.first_defined = 0;
    for (std::size_t i = 0; i < n; ++i) s.values[i] = getter(candles[i]);
    return s;
  };

  ComputedColumns out;
  out.series.resize(kAvailableFeatures.size());
  out.series[0] = raw([](const Candle& c) { return c.open; });
  out.series[1] = raw([](const Candle& c) { return c.high; });
  out.series[2] = raw([](const Candle& c) { return c.low; });
  out.series[3] = raw([](const Candle& c) { return c.close; });
  out.series[4] = raw([](const Candle& c) { return c.volume; });
  out.series[5] = rsi(closes, cfg.rsi_period);
  auto m = macd(closes, cfg.macd_fast, cfg.macd_slow, cfg.macd_signal);
  out.series[6] = std::move(m.macd_line);
  out.series[7] = std::move(m.signal_line);
  out.series[8] = momentum(closes, cfg.momentum_period);
  auto bb = bollinger(closes, cfg.bb_period, cfg.bb_k);
  out.series[9] = std::move(bb.upper);
  out.series[10] = std::move(bb.lower);
  out.series[11] = roc(closes, cfg.roc_period);
  return out;
}

inline std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kAvailableFeatures.size(); ++i)
    if (kAvailableFeatures[i] == name) return i;
  throw Error("unknown feature name '" + std::string(name) + "'");
}

}  // namespace detail

inline std::vector<std::string> all_feature_names() {
  return {kAvailableFeatures.begin(), kAvailableFeatures.end()};
}

/// Computes every indicator over the series and keeps the rows where all
/// selected columns are defined; the warmup prefix is dropped.
inline FeatureTable build_features(const CandleSeries& candles, const IndicatorConfig& cfg,
                                   std::span<const std::string> selected) {
  if (selected.empty()) throw std::invalid_argument("no features selected");
  auto columns = detail::compute_columns(candles, cfg);

  std::size_t first_row = 0;
  std::vector<std::size_t> picks;
  picks.reserve(selected.size());
  for (const auto& name : selected) {
    std::size_t idx = detail::feature_index(name);
    picks.push_back(idx);
    first_row = std::max(first_row, columns.series[idx].first_defined);
  }
  if (first_row >= candles.size())
    throw Error("series too short: no rows survive the indicator warmup");

  FeatureTable table;
  table.feature_names.assign(selected.begin(), selected.end());
  const std::size_t rows = candles.size() - first_row;
  table.dates.reserve(rows);
  table.closes.reserve(rows);
  table.values = Matrix(rows, picks.size());
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t src = first_row + r;
    table.dates.push_back(candles[src].date);
    table.closes.push_back(candles[src].close);
    for (std::size_t c = 0; c < picks.size(); ++c)
      table.values(r, c) = columns.series[picks[c]].values[src];
  }
  return table;
}

/// Full indicator table as CSV: date plus one column per available feature,
/// warmup cells left empty. This is the `features` artifact.
inline std::string indicator_csv(const CandleSeries& candles, const IndicatorConfig& cfg) {
  auto columns = detail::compute_columns(candles, cfg);
  std::string out = "date";
  for (auto name : kAvailableFeatures) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t r = 0; r < candles.size(); ++r) {
    out += candles[r].date.to_string();
    for (const auto& col : columns.series) {
      out += ',';
      if (col.defined(r)) out += detail::format_double(col.values[r]);
    }
    out += '\n';
  }
  return out;
}

/// Rebuilds a FeatureTable from the `features` CSV artifact.
inline FeatureTable feature_table_from_csv(std::string_view csv_text,
                                           std::span<const std::string> selected) {
  if (selected.empty()) throw std::invalid_argument("no features selected");
  std::vector<std::size_t> picks;
  for (const auto& name : selected) picks.push_back(detail::feature_index(name));

  std::string expected_header = "date";
  for (auto name : kAvailableFeatures) {
    expected_header += ',';
    expected_header += name;
  }

  FeatureTable table;
  table.feature_names.assign(selected.begin(), selected.end());
  std::vector<Date> dates;
  std::vector<double> closes;
  std::vector<std::vector<double>> rows;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  bool in_body = false;  // past the warmup for the selected columns
  while (pos <= csv_text.size()) {
    std::size_t eol = csv_text.find('\n', pos);
    std::string_view line = csv_text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? csv_text.size() + 1 : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != expected_header)
        throw Error("features csv: wrong header on line 1");
      saw_header = true;
      continue;
    }
    auto fields = detail::split_fields(line);
    if (fields.size() != 1 + kAvailableFeatures.size())
      throw Error("features csv line " + std::to_string(line_no) + ": wrong column count");
    bool complete = true;
    for (std::size_t p : picks)
      if (fields[1 + p].empty()) complete = false;
    if (!complete) {
      if (in_body)
        throw Error("features csv line " + std::to_string(line_no) +
                    ": undefined cell after the warmup prefix");
      continue;
    }
    in_body = true;
    dates.push_back(Date::parse(fields[0]));
    closes.push_back(detail::parse_double(fields[1 + 3], line_no));  // close column
    std::vector<double> row(picks.size());
    for (std::size_t c = 0; c < picks.size(); ++c)
      row[c] = detail::parse_double(fields[1 + picks[c]], line_no);
    rows.push_back(std::move(row));
  }
  if (!saw_header) throw Error("features csv: empty input");
  if (rows.empty()) throw Error("features csv: no usable rows for the selected features");

  table.dates = std::move(dates);
  table.closes = std::move(closes);
  table.values = Matrix(rows.size(), picks.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < picks.size(); ++c) table.values(r, c) = rows[r][c];
  return table;
}

/// Attaches horizon+1 target columns, Y[i][h] = close[i+h], and drops the
/// last `horizon` rows, which lack a full future window.
inline Dataset attach_targets(const FeatureTable& table, std::size_t horizon = kHorizon) {
  if (table.rows() <= horizon)
    throw Error("feature table has " + std::to_string(table.rows()) +
                " rows, need more than " + std::to_string(horizon));
  Dataset ds;
  ds.feature_names = table.feature_names;
  const std::size_t rows = table.rows() - horizon;
  ds.dates.assign(table.dates.begin(), table.dates.begin() + static_cast<std::ptrdiff_t>(rows));
  ds.x = Matrix(rows, table.values.cols());
  ds.y = Matrix(rows, horizon + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < table.values.cols(); ++c) ds.x(r, c) = table.values(r, c);
    for (std::size_t h = 0; h <= horizon; ++h) ds.y(r, h) = table.closes[r + h];
  }
  return ds;
}

/// First floor(train_fraction·rows) rows go to train, the rest to test.
/// No shuffling: the test block is the latest data.
inline std::pair<Dataset, Dataset> chrono_split(const Dataset& ds, double train_fraction = 0.75) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  if (ds.rows() == 0) throw std::invalid_argument("empty dataset");
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.rows())));
  if (n_train == 0 || n_train == ds.rows())
    throw Error("split produces an empty partition (" + std::to_string(ds.rows()) + " rows at " +
                std::to_string(train_fraction) + ")");

  auto take = [&](std::size_t from, std::size_t count) {
    Dataset part;
    part.feature_names = ds.feature_names;
    part.dates.assign(ds.dates.begin() + static_cast<std::ptrdiff_t>(from),
                      ds.dates.begin() + static_cast<std::ptrdiff_t>(from + count));
    part.x = Matrix(count, ds.x.cols());
    part.y = Matrix(count, ds.y.cols());
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t c = 0; c < ds.x.cols(); ++c) part.x(r, c) = ds.x(from + r, c);
      for (std::size_t c = 0; c < ds.y.cols(); ++c) part.y(r, c) = ds.y(from + r, c);
    }
    return part;
  };
  return {take(0, n_train), take(n_train, ds.rows() - n_train)};
}

/// Feature standardization (train mean/std) plus target scaling by the
/// largest close seen in the training targets.
struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;
  double target_scale = 1.0;

  Matrix transform(const Matrix& x) const {
    if (x.cols() != means.size()) throw std::invalid_argument("scaler/feature count mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - means[c]) / stds[c];
    return out;
  }

  Matrix inverse_transform(const Matrix& x) const {
    if (x.cols() != means.size()) throw std::invalid_argument("scaler/feature count mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) * stds[c] + means[c];
    return out;
  }

  Matrix scale_targets(const Matrix& y) const {
    Matrix out(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (std::size_t c = 0; c < y.cols(); ++c) out(r, c) = y(r, c) / target_scale;
    return out;
  }

  double unscale_target(double v) const { return v * target_scale; }

  nlohmann::json to_json() const {
    return {{"schema_version", 1}, {"means", means}, {"stds", stds}, {"target_scale", target_scale}};
  }

  static Scaler from_json(const nlohmann::json& j) {
    if (j.value("schema_version", 0) != 1) throw Error("scaler: schema-version mismatch");
    Scaler s;
    s.means = j.at("means").get<std::vector<double>>();
    s.stds = j.at("stds").get<std::vector<double>>();
    s.target_scale = j.at("target_scale").get<double>();
    return s;
  }
};

/// Statistics come from training rows only. A constant feature column is an
/// error: it cannot be standardized.
inline Scaler fit_scaler(const Dataset& train) {
  if (train.rows() == 0) throw std::invalid_argument("empty training set");
  Scaler s;
  const std::size_t n = train.rows();
  s.means.resize(train.x.cols());
  s.stds.resize(train.x.cols());
  for (std::size_t c = 0; c < train.x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += train.x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double d = train.x(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    if (var <= 0.0)
      throw Error("feature '" + train.feature_names[c] + "' is constant on the training rows");
    s.means[c] = mean;
    s.stds[c] = std::sqrt(var);
  }
  double max_close = 0.0;
  for (double v : train.y.data()) max_close = std::max(max_close, v);
  if (max_close <= 0.0) throw Error("non-positive training targets");
  s.target_scale = max_close;
  return s;
}

inline Dataset apply_scaler(const Dataset& ds, const Scaler& s) {
  Dataset out;
  out.dates = ds.dates;
  out.feature_names = ds.feature_names;
  out.x = s.transform(ds.x);
  out.y = s.scale_targets(ds.y);
  return out;
}

/// Inspection CSV: date, feature columns, target_h0..target_hN.
inline std::string to_csv(const Dataset& ds) {
  std::string out = "date";
  for (const auto& name : ds.feature_names) {
    out += ',';
    out += name;
  }
  for (std::size_t h = 0; h < ds.horizons(); ++h) out += ",target_h" + std::to_string(h);
  out += '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    out += ds.dates[r].to_string();
    for (std::size_t c = 0; c < ds.x.cols(); ++c) {
      out += ',';
      out += detail::format_double(ds.x(r, c));
    }
    for (std::size_t h = 0; h < ds.horizons(); ++h) {
      out += ',';
      out += detail::format_double(ds.y(r, h));
    }
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_csv(std::string_view csv_text) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  std::size_t n_features = 0, n_targets = 0;
  std::vector<std::vector<double>> xs, ys;
  while (pos <= csv_text.size()) {
    std::size_t eol = csv_text.find('\n', pos);
    std::string_view line = csv_text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? csv_text.size() + 1 : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_fields(line);
    if (!saw_header) {
      if (fields.empty() || fields[0] != "date") throw Error("dataset csv: wrong header");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i].starts_with("target_h"))
          ++n_targets;
        else if (n_targets == 0)
          ds.feature_names.emplace_back(fields[i]);
        else
          throw Error("dataset csv: feature column after targets");
      }
      n_features = ds.feature_names.size();
      if (n_targets == 0) throw Error("dataset csv: no target columns");
      saw_header = true;
      continue;
    }
    if (fields.size() != 1 + n_features + n_targets)
      throw Error("dataset csv line " + std::to_string(line_no) + ": wrong column count");
    ds.dates.push_back(Date::parse(fields[0]));
    std::vector<double> xrow(n_features), yrow(n_targets);
    for (std::size_t c = 0; c < n_features; ++c)
      xrow[c] = detail::parse_double(fields[1 + c], line_no);
    for (std::size_t h = 0; h < n_targets; ++h)
      yrow[h] = detail::parse_double(fields[1 + n_features + h], line_no);
    xs.push_back(std::move(xrow));
    ys.push_back(std::move(yrow));
  }
  if (!saw_header) throw Error("dataset csv: empty input");
  ds.x = Matrix(xs.size(), n_features);
  ds.y = Matrix(ys.size(), n_targets);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    for (std::size_t c = 0; c < n_features; ++c) ds.x(r, c) = xs[r][c];
    for (std::size_t h = 0; h < n_targets; ++h) ds.y(r, h) = ys[r][h];
  }
  return ds;
}

}  // namespace crosscast
