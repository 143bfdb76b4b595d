#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace macrocast {

/// A calendar quarter, e.g. 1999Q3.
struct Period {
  int year = 0;
  int quarter = 1;  // 1..4

  /// Quarters since year 0 Q1; consecutive quarters differ by one.
  [[nodiscard]] constexpr std::int64_t ordinal() const noexcept {
    return static_cast<std::int64_t>(year) * 4 + (quarter - 1);
  }
  static constexpr Period from_ordinal(std::int64_t ord) noexcept {
    auto y = ord >= 0 ? ord / 4 : -((-ord + 3) / 4);
    return Period{static_cast<int>(y), static_cast<int>(ord - y * 4) + 1};
  }

  [[nodiscard]] constexpr Period successor() const noexcept { return from_ordinal(ordinal() + 1); }
  [[nodiscard]] constexpr Period predecessor() const noexcept { return from_ordinal(ordinal() - 1); }
  [[nodiscard]] constexpr Period shifted(std::int64_t quarters) const noexcept {
    return from_ordinal(ordinal() + quarters);
  }

  /// Parses `YYYYQn`. Throws DataError on anything else.
  static Period parse(std::string_view token);
  [[nodiscard]] std::string to_string() const;

  friend constexpr auto operator<=>(const Period& a, const Period& b) noexcept {
    return a.ordinal() <=> b.ordinal();
  }
  friend constexpr bool operator==(const Period& a, const Period& b) noexcept = default;
};

/// Signed number of quarters from `a` to `b`.
constexpr std::int64_t quarters_between(Period a, Period b) noexcept {
  return b.ordinal() - a.ordinal();
}

/// Inclusive range of quarters.
struct Window {
  Period start;
  Period end;

  Window() = default;
  Window(Period s, Period e);  // throws InvalidArgument if s > e

  [[nodiscard]] std::int64_t length() const noexcept { return quarters_between(start, end) + 1; }
  [[nodiscard]] bool contains(Period p) const noexcept { return start <= p && p <= end; }
  [[nodiscard]] std::string to_string() const;  // "2017Q1-2019Q4"

  /// Parses "YYYYQn-YYYYQn".
  static Window parse(std::string_view token);

  friend bool operator==(const Window&, const Window&) = default;
};

}  // namespace macrocast
