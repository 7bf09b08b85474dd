#pragma once

// Locale-independent number formatting and token parsing for the text model files.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "drowsy/error.hpp"

namespace drowsy::textio {

/// 17 significant digits: doubles survive a write/read cycle bit-exactly.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && tok.front() == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw FormatError("not a number: '" + std::string(tok) + "'");
  return v;
}

inline long long parse_int(std::string_view tok) {
  long long v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && tok.front() == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw FormatError("not an integer: '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

/// Fields separated by `sep`, empty fields kept.
inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

/// Line-oriented reader that skips blank lines and reports line numbers on error.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Tokens of the next non-blank line; throws at end of input.
  std::vector<std::string> tokens() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      auto toks = split(line);
      if (!toks.empty()) return toks;
    }
    fail("unexpected end of file");
  }

  /// Tokens of a line that must start with `keyword` and hold exactly `n` tokens after it.
  std::vector<std::string> expect(std::string_view keyword, std::size_t n) {
    auto toks = tokens();
    if (toks.front() != keyword) fail("expected '" + std::string(keyword) + "', found '" + toks.front() + "'");
    if (toks.size() != n + 1) fail("'" + std::string(keyword) + "' line needs " + std::to_string(n) + " fields");
    return toks;
  }

  std::vector<double> reals(std::size_t n) {
    auto toks = tokens();
    if (toks.size() != n) fail("expected " + std::to_string(n) + " numbers, found " + std::to_string(toks.size()));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = num(toks[i]);
    return out;
  }

  /// `keyword` followed by exactly n numbers.
  std::vector<double> reals(std::string_view keyword, std::size_t n) {
    auto toks = expect(keyword, n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = num(toks[i + 1]);
    return out;
  }

  double num(std::string_view tok) {
    try {
      return parse_double(tok);
    } catch (const FormatError& e) {
      fail(e.what());
    }
  }

  long long integer(std::string_view tok) {
    try {
      return parse_int(tok);
    } catch (const FormatError& e) {
      fail(e.what());
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(source_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
};

inline void write_reals(std::ostream& out, const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << format_double(v[i]);
  }
  out << '\n';
}

}  // namespace drowsy::textio
