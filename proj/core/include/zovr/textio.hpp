#ifndef ZOVR_TEXTIO_HPP
#define ZOVR_TEXTIO_HPP

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "zovr/error.hpp"

namespace zovr {

// Shortest decimal form that round-trips to the same IEEE-754 double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{}) {
    throw ConfigError(context + ": cannot parse '" + std::string(s) +
                      "' as a number");
  }
  for (const char* p = res.ptr; p != last; ++p) {
    if (*p != ' ' && *p != '\t') {
      throw ConfigError(context + ": trailing characters in '" +
                        std::string(s) + "'");
    }
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace zovr

#endif  // ZOVR_TEXTIO_HPP
