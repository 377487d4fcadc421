#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "crosscast/date.hpp"
#include "crosscast/error.hpp"

namespace crosscast {

/// One day of OHLCV market data.
struct Candle {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool ohlc_valid() const {
    return low <= open && open <= high && low <= close && close <= high && low <= high &&
           low > 0.0 && volume >= 0.0;
  }

  bool operator==(const Candle&) const = default;
};

/// Daily candles with strictly increasing dates.
struct CandleSeries {
  std::vector<Candle> candles;

  std::size_t size() const { return candles.size(); }
  bool empty() const { return candles.empty(); }
  const Candle& operator[](std::size_t i) const { return candles[i]; }

  std::vector<double> closes() const {
    std::vector<double> out;
    out.reserve(candles.size());
    for (const auto& c : candles) out.push_back(c.close);
    return out;
  }
};

enum class GapPolicy { Reject, ForwardFill };

namespace detail {

// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v))
    throw Error("line " + std::to_string(line_no) + ": unparseable number '" +
                std::string(field) + "'");
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

inline constexpr std::string_view kCandleCsvHeader = "date,open,high,low,close,volume";

/// Parses the canonical 6-column candle CSV. Rows may arrive in any order;
/// the result is sorted ascending by date. Duplicate dates are an error.
inline CandleSeries parse_candles(std::string_view csv_text) {
  CandleSeries series;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos <= csv_text.size()) {
    std::size_t eol = csv_text.find('\n', pos);
    std::string_view line = csv_text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? csv_text.size() + 1 : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kCandleCsvHeader)
        throw Error("line 1: missing or wrong header, expected '" +
                    std::string(kCandleCsvHeader) + "'");
      saw_header = true;
      continue;
    }
    auto fields = detail::split_fields(line);
    if (fields.size() != 6)
      throw Error("line " + std::to_string(line_no) + ": expected 6 columns, got " +
                  std::to_string(fields.size()));
    Candle c;
    try {
      c.date = Date::parse(fields[0]);
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
    c.open = detail::parse_double(fields[1], line_no);
    c.high = detail::parse_double(fields[2], line_no);
    c.low = detail::parse_double(fields[3], line_no);
    c.close = detail::parse_double(fields[4], line_no);
    c.volume = detail::parse_double(fields[5], line_no);
    series.candles.push_back(c);
  }
  if (!saw_header) throw Error("empty input: missing header");
  std::sort(series.candles.begin(), series.candles.end(),
            [](const Candle& a, const Candle& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < series.candles.size(); ++i)
    if (series.candles[i].date == series.candles[i - 1].date)
      throw Error("duplicate date " + series.candles[i].date.to_string());
  return series;
}

inline std::string to_csv(const CandleSeries& series) {
  std::string out{kCandleCsvHeader};
  out += '\n';
  for (const auto& c : series.candles) {
    out += c.date.to_string();
    for (double v : {c.open, c.high, c.low, c.close, c.volume}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

struct ValidatedSeries {
  CandleSeries series;
  std::size_t filled = 0;  ///< synthetic candles inserted under ForwardFill
};

/// Enforces OHLC invariants and one-day spacing. Under ForwardFill, calendar
/// gaps are patched with flat candles carrying the previous close and zero
/// volume; under Reject any gap is an error naming the first missing day.
inline ValidatedSeries validate_series(const CandleSeries& series, GapPolicy gap_policy) {
  ValidatedSeries out;
  out.series.candles.reserve(series.size());
  for (const auto& c : series.candles) {
    if (!c.ohlc_valid())
      throw Error("OHLC invariant violated on " + c.date.to_string());
    if (!out.series.empty()) {
      // Copy: the fill loop below appends to the same vector, which can
      // reallocate and would invalidate a reference.
      const Candle prev = out.series.candles.back();
      int gap = c.date - prev.date;
      if (gap <= 0) throw Error("dates not strictly increasing at " + c.date.to_string());
      if (gap > 1) {
        if (gap_policy == GapPolicy::Reject)
          throw Error("calendar gap: missing " + (prev.date + 1).to_string());
        for (int d = 1; d < gap; ++d) {
          Candle fill;
          fill.date = prev.date + d;
          fill.open = fill.high = fill.low = fill.close = prev.close;
          fill.volume = 0.0;
          out.series.candles.push_back(fill);
          ++out.filled;
        }
      }
    }
    out.series.candles.push_back(c);
  }
  return out;
}

}  // namespace crosscast
