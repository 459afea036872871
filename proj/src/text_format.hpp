#pragma once

// Shortest round-trip number formatting and strict parsing shared by the
// text file formats.

#include "grotta/errors.hpp"

#include <charconv>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace grotta::text {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc())
    throw IoError("cannot format double");
  return std::string(buf, end);
}

inline bool try_parse_double(std::string_view tok, double &out) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t'))
    tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
    tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+')
    tok.remove_prefix(1);
  if (tok.empty())
    return false;
  auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && end == tok.data() + tok.size();
}

inline double parse_double(std::string_view tok, const std::string &context) {
  double v = 0.0;
  if (!try_parse_double(tok, v))
    throw ParseError(context + ": bad number '" + std::string(tok) + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view tok, const std::string &context) {
  while (!tok.empty() && (tok.back() == '\r' || tok.back() == ' '))
    tok.remove_suffix(1);
  while (!tok.empty() && tok.front() == ' ')
    tok.remove_prefix(1);
  Int v{};
  auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || end != tok.data() + tok.size() || tok.empty())
    throw ParseError(context + ": bad integer '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r')
      ++i;
    if (i > start)
      out.push_back(line.substr(start, i - start));
  }
  return out;
}

} // namespace grotta::text
