#pragma once

// Small token helpers shared by the spec-string parsers.

#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "hitlab/error.hpp"

namespace hitlab::text {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

inline double to_double(std::string_view tok, std::string_view what) {
  tok = trim(tok);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("cannot parse {} from '{}'", what, tok));
  }
  return v;
}

inline std::vector<double> to_doubles(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (auto tok : split(s, ',')) out.push_back(to_double(tok, what));
  return out;
}

/// 1-based coordinate list "1,2" -> {0, 1}.
inline std::vector<std::size_t> to_coords(std::string_view s, std::size_t dim) {
  std::vector<std::size_t> out;
  for (auto tok : split(s, ',')) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || v == 0 || v > dim) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("coordinate '{}' is not in 1..{}", tok, dim));
    }
    out.push_back(v - 1);
  }
  return out;
}

}  // namespace hitlab::text
