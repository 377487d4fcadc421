#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "crosscast/error.hpp"

namespace crosscast {

/// Calendar day, ISO-8601 text form `YYYY-MM-DD`.
struct Date {
  std::chrono::sys_days day{};

  static Date parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
      throw Error("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    auto num = [&](int from, int len) {
      int v = 0;
      for (int k = from; k < from + len; ++k) {
        char c = text[static_cast<std::size_t>(k)];
        if (c < '0' || c > '9')
          throw Error("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
        v = v * 10 + (c - '0');
      }
      return v;
    };
    std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                    std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                    std::chrono::day{static_cast<unsigned>(num(8, 2))}};
    if (!ymd.ok()) throw Error("invalid calendar date '" + std::string(text) + "'");
    return Date{std::chrono::sys_days{ymd}};
  }

  std::string to_string() const {
    std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  Date operator+(int days) const { return Date{day + std::chrono::days{days}}; }
  Date operator-(int days) const { return Date{day - std::chrono::days{days}}; }
  /// Whole days from `other` to this.
  int operator-(Date other) const {
    return static_cast<int>((day - other.day).count());
  }

  auto operator<=>(const Date&) const = default;
};

}  // namespace crosscast
