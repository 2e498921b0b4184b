#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace geoloc::utf8 {

inline bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Largest code-point boundary <= pos.
inline std::size_t floor_boundary(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return s.size();
  while (pos > 0 && is_continuation(static_cast<unsigned char>(s[pos]))) --pos;
  return pos;
}

inline bool is_boundary(std::string_view s, std::size_t pos) {
  return pos == 0 || pos >= s.size() || !is_continuation(static_cast<unsigned char>(s[pos]));
}

inline std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += !is_continuation(c);
  return n;
}

// prefix[b] = number of code points that start before byte b; size() + 1 entries.
inline std::vector<std::size_t> code_point_prefix(std::string_view s) {
  std::vector<std::size_t> prefix(s.size() + 1, 0);
  for (std::size_t i = 0; i < s.size(); ++i)
    prefix[i + 1] = prefix[i] + !is_continuation(static_cast<unsigned char>(s[i]));
  return prefix;
}

// Byte offset reached by advancing `chars` code points from `from`.
inline std::size_t advance(std::string_view s, std::size_t from, std::size_t chars) {
  std::size_t pos = from;
  while (pos < s.size() && chars > 0) {
    ++pos;
    while (pos < s.size() && is_continuation(static_cast<unsigned char>(s[pos]))) ++pos;
    --chars;
  }
  return pos;
}

// Byte offset reached by stepping back `chars` code points from `from`.
inline std::size_t retreat(std::string_view s, std::size_t from, std::size_t chars) {
  std::size_t pos = floor_boundary(s, from);
  while (pos > 0 && chars > 0) {
    --pos;
    while (pos > 0 && is_continuation(static_cast<unsigned char>(s[pos]))) --pos;
    --chars;
  }
  return pos;
}

}  // namespace geoloc::utf8
