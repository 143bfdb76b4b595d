#include "macrocast/period.hpp"

#include <charconv>

#include "macrocast/errors.hpp"

namespace macrocast {

Period Period::parse(std::string_view token) {
  auto fail = [&] { return DataError("malformed period token '" + std::string(token) + "' (expected YYYYQn)"); };
  if (token.size() != 6 || token[4] != 'Q') throw fail();
  int year = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + 4, year);
  if (ec != std::errc() || ptr != token.data() + 4) throw fail();
  int q = token[5] - '0';
  if (q < 1 || q > 4) throw fail();
  return Period{year, q};
}

std::string Period::to_string() const {
  auto s = std::to_string(year);
  while (s.size() < 4) s.insert(s.begin(), '0');
  return s + "Q" + std::to_string(quarter);
}

Window::Window(Period s, Period e) : start(s), end(e) {
  if (s > e) throw InvalidArgument("window start " + s.to_string() + " is after end " + e.to_string());
}

std::string Window::to_string() const { return start.to_string() + "-" + end.to_string(); }

Window Window::parse(std::string_view token) {
  auto dash = token.find('-');
  if (dash == std::string_view::npos) throw DataError("malformed window '" + std::string(token) + "'");
  return Window(Period::parse(token.substr(0, dash)), Period::parse(token.substr(dash + 1)));
}

}  // namespace macrocast
