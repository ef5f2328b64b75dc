#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "planprobe/error.hpp"

namespace planprobe {

struct ParsedStream {
  std::vector<std::int64_t> values;
  std::vector<std::string> warnings;
};

/// Whether the generator stopped on its token budget. Only then can the last
/// numeral be cut short; a tail with no separator after it is dropped.
enum class StreamEnd { complete, truncated };

namespace detail {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool is_separator(char c) { return c == ',' || c == '\n'; }

}  // namespace detail

/// Extracts comma-separated integers. Empty fields (trailing or doubled
/// commas) are ignored; any other non-integer field is skipped with a warning.
inline ParsedStream parse_numeric_stream(std::string_view text,
                                         StreamEnd end = StreamEnd::complete) {
  ParsedStream out;
  std::size_t pos = 0;
  bool last_field_was_tail_number = false;
  while (pos <= text.size()) {
    std::size_t next = pos;
    while (next < text.size() && !detail::is_separator(text[next])) ++next;
    const bool terminated = next < text.size();
    const auto field = detail::trim(text.substr(pos, next - pos));
    last_field_was_tail_number = false;
    if (!field.empty()) {
      std::int64_t value = 0;
      std::string_view digits = field;
      if (digits.front() == '+') digits.remove_prefix(1);
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      const bool whole = ec == std::errc{} && ptr == digits.data() + digits.size();
      if (whole) {
        out.values.push_back(value);
        last_field_was_tail_number = !terminated;
      } else if (ec == std::errc::result_out_of_range) {
        out.warnings.push_back(fmt::format("integer out of range skipped: '{}'", field));
      } else {
        out.warnings.push_back(fmt::format("non-numeric text skipped: '{}'", field));
      }
    }
    if (!terminated) break;
    pos = next + 1;
  }
  // "170, 18" cut by the budget: the 18 is probably a prefix of a longer value.
  if (end == StreamEnd::truncated && last_field_was_tail_number) {
    const char last = text.back();
    const bool ends_in_whitespace = last == ' ' || last == '\t' || last == '\r';
    if (!ends_in_whitespace) {
      out.values.pop_back();
      out.warnings.emplace_back("truncated tail dropped");
    }
  }
  if (out.values.empty()) throw ParseError("no integers found in completion");
  return out;
}

}  // namespace planprobe
