#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace crosscast {

/// Windows and multipliers for every indicator in the feature pipeline.
/// The 50/200-day pair also drives phase projection.
struct IndicatorConfig {
  std::size_t sma_short = 50;
  std::size_t sma_long = 200;
  std::size_t rsi_period = 14;
  std::size_t macd_fast = 12;
  std::size_t macd_slow = 26;
  std::size_t macd_signal = 9;
  std::size_t momentum_period = 10;
  std::size_t bb_period = 20;
  double bb_k = 2.0;
  std::size_t roc_period = 10;

  void validate() const {
    for (std::size_t p : {sma_short, sma_long, rsi_period, macd_fast, macd_slow, macd_signal,
                          momentum_period, bb_period, roc_period})
      if (p < 1) throw std::invalid_argument("indicator periods must be >= 1");
    if (macd_fast >= macd_slow) throw std::invalid_argument("macd_fast must be < macd_slow");
    if (bb_k <= 0.0) throw std::invalid_argument("bb_k must be > 0");
    if (sma_short >= sma_long) throw std::invalid_argument("sma_short must be < sma_long");
  }
};

/// Indicator values aligned 1:1 with the input series. Cells before
/// `first_defined` are the warmup prefix and hold NaN.
struct IndicatorSeries {
  std::vector<double> values;
  std::size_t first_defined = 0;  ///< == values.size() when nothing is defined

  std::size_t size() const { return values.size(); }
  bool defined(std::size_t i) const { return i >= first_defined && i < values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  static IndicatorSeries undefined(std::size_t n) {
    IndicatorSeries s;
    s.values.assign(n, std::numeric_limits<double>::quiet_NaN());
    s.first_defined = n;
    return s;
  }
};

namespace detail {

// Rolling sums accumulate drift; a full recompute every kResyncStride steps
// keeps the batch output within 1e-9 of the naive per-window value.
inline constexpr std::size_t kResyncStride = 4096;

}  // namespace detail

/// Simple moving average; defined from index n−1.
inline IndicatorSeries sma(std::span<const double> closes, std::size_t n) {
  if (n < 1) throw std::invalid_argument("sma: window must be >= 1");
  auto out = IndicatorSeries::undefined(closes.size());
  if (closes.size() < n) return out;
  out.first_defined = n - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += closes[i];
  out.values[n - 1] = sum / static_cast<double>(n);
  for (std::size_t i = n; i < closes.size(); ++i) {
    if ((i - n) % detail::kResyncStride == detail::kResyncStride - 1) {
      sum = 0.0;
      for (std::size_t j = i - n + 1; j <= i; ++j) sum += closes[j];
    } else {
      sum += closes[i] - closes[i - n];
    }
    out.values[i] = sum / static_cast<double>(n);
  }
  return out;
}

/// Exponential moving average, seeded with SMA(n) at index n−1, then
/// ema[i] = α·close[i] + (1−α)·ema[i−1] with α = 2/(n+1).
inline IndicatorSeries ema(std::span<const double> closes, std::size_t n) {
  if (n < 1) throw std::invalid_argument("ema: window must be >= 1");
  auto out = IndicatorSeries::undefined(closes.size());
  if (closes.size() < n) return out;
  out.first_defined = n - 1;
  double seed = 0.0;
  for (std::size_t i = 0; i < n; ++i) seed += closes[i];
  double value = seed / static_cast<double>(n);
  out.values[n - 1] = value;
  const double alpha = 2.0 / (static_cast<double>(n) + 1.0);
  for (std::size_t i = n; i < closes.size(); ++i) {
    value = alpha * closes[i] + (1.0 - alpha) * value;
    out.values[i] = value;
  }
  return out;
}

/// Wilder RSI in [0, 100]; defined from index `period` (period+1 warmup rows).
inline IndicatorSeries rsi(std::span<const double> closes, std::size_t period) {
  if (period < 1) throw std::invalid_argument("rsi: period must be >= 1");
  auto out = IndicatorSeries::undefined(closes.size());
  if (closes.size() < period + 1) return out;
  out.first_defined = period;

  auto score = [](double avg_gain, double avg_loss) {
    if (avg_loss == 0.0) return 100.0;
    if (avg_gain == 0.0) return 0.0;
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss);
  };

  double avg_gain = 0.0, avg_loss = 0.0;
  for (std::size_t i = 1; i <= period; ++i) {
    double delta = closes[i] - closes[i - 1];
    if (delta > 0.0) avg_gain += delta;
    else avg_loss -= delta;
  }
  avg_gain /= static_cast<double>(period);
  avg_loss /= static_cast<double>(period);
  out.values[period] = score(avg_gain, avg_loss);

  for (std::size_t i = period + 1; i < closes.size(); ++i) {
    double delta = closes[i] - closes[i - 1];
    double gain = delta > 0.0 ? delta : 0.0;
    double loss = delta < 0.0 ? -delta : 0.0;
    avg_gain = (avg_gain * static_cast<double>(period - 1) + gain) / static_cast<double>(period);
    avg_loss = (avg_loss * static_cast<double>(period - 1) + loss) / static_cast<double>(period);
    out.values[i] = score(avg_gain, avg_loss);
  }
  return out;
}

struct MacdResult {
  IndicatorSeries macd_line;
  IndicatorSeries signal_line;
  IndicatorSeries histogram;
};

/// MACD line = EMA(fast) − EMA(slow); signal = EMA(signal) of the macd line,
/// seeded on its first `signal` defined values; histogram = line − signal.
inline MacdResult macd(std::span<const double> closes, std::size_t fast, std::size_t slow,
                       std::size_t signal) {
  if (fast >= slow) throw std::invalid_argument("macd: fast must be < slow");
  MacdResult r;
  auto fast_ema = ema(closes, fast);
  auto slow_ema = ema(closes, slow);
  r.macd_line = IndicatorSeries::undefined(closes.size());
  r.macd_line.first_defined = slow_ema.first_defined;
  for (std::size_t i = r.macd_line.first_defined; i < closes.size(); ++i)
    r.macd_line.values[i] = fast_ema.values[i] - slow_ema.values[i];

  r.signal_line = IndicatorSeries::undefined(closes.size());
  r.histogram = IndicatorSeries::undefined(closes.size());
  if (r.macd_line.first_defined < closes.size()) {
    std::span<const double> defined{r.macd_line.values.data() + r.macd_line.first_defined,
                                    closes.size() - r.macd_line.first_defined};
    auto sig = ema(defined, signal);
    r.signal_line.first_defined = r.macd_line.first_defined + sig.first_defined;
    r.histogram.first_defined = r.signal_line.first_defined;
    for (std::size_t i = sig.first_defined; i < defined.size(); ++i) {
      std::size_t at = r.macd_line.first_defined + i;
      r.signal_line.values[at] = sig.values[i];
      r.histogram.values[at] = r.macd_line.values[at] - sig.values[i];
    }
  } else {
    r.signal_line.first_defined = closes.size();
    r.histogram.first_defined = closes.size();
  }
  return r;
}

/// momentum[i] = close[i] − close[i−n]; defined from index n.
inline IndicatorSeries momentum(std::span<const double> closes, std::size_t n) {
  if (n < 1) throw std::invalid_argument("momentum: window must be >= 1");
  auto out = IndicatorSeries::undefined(closes.size());
  if (closes.size() < n + 1) return out;
  out.first_defined = n;
  for (std::size_t i = n; i < closes.size(); ++i)
    out.values[i] = closes[i] - closes[i - n];
  return out;
}

struct BollingerBands {
  IndicatorSeries middle;
  IndicatorSeries upper;
  IndicatorSeries lower;
};

/// middle = SMA(n), upper/lower = middle ± k·σ with population σ over the
/// same window. σ uses a centered two-pass per window: a rolling sum of
/// squares cancels catastrophically at real price magnitudes.
inline BollingerBands bollinger(std::span<const double> closes, std::size_t n, double k) {
  if (n < 2) throw std::invalid_argument("bollinger: window must be >= 2");
  if (k <= 0.0) throw std::invalid_argument("bollinger: k must be > 0");
  BollingerBands bands;
  bands.middle = sma(closes, n);
  bands.upper = IndicatorSeries::undefined(closes.size());
  bands.lower = IndicatorSeries::undefined(closes.size());
  bands.upper.first_defined = bands.middle.first_defined;
  bands.lower.first_defined = bands.middle.first_defined;
  for (std::size_t i = bands.middle.first_defined; i < closes.size(); ++i) {
    double mean = bands.middle.values[i];
    double sq = 0.0;
    for (std::size_t j = i + 1 - n; j <= i; ++j) {
      double d = closes[j] - mean;
      sq += d * d;
    }
    double dev = k * std::sqrt(sq / static_cast<double>(n));
    bands.upper.values[i] = mean + dev;
    bands.lower.values[i] = mean - dev;
  }
  return bands;
}

/// roc[i] = 100·(close[i] − close[i−n]) / close[i−n]; defined from index n.
/// Positive-price inputs keep the divisor nonzero.
inline IndicatorSeries roc(std::span<const double> closes, std::size_t n) {
  if (n < 1) throw std::invalid_argument("roc: window must be >= 1");
  auto out = IndicatorSeries::undefined(closes.size());
  if (closes.size() < n + 1) return out;
  out.first_defined = n;
  for (std::size_t i = n; i < closes.size(); ++i)
    out.values[i] = 100.0 * (closes[i] - closes[i - n]) / closes[i - n];
  return out;
}

}  // namespace crosscast
