// Copyright 2026 The vbdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VBDIAR_TEXT_HPP_
#define VBDIAR_TEXT_HPP_

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"

namespace vbdiar::text {

inline std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(Trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> SplitWhitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::string Where(const std::string &path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

/// Parses one finite double; throws a parse error naming path:line.
inline double ParseDouble(std::string_view token, const std::string &path, std::size_t line_no) {
  token = Trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto *end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, value);
  if (token.empty() || res.ec != std::errc() || res.ptr != end) {
    Fail(ErrorKind::kParse, Where(path, line_no) + ": not a number: '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    Fail(ErrorKind::kParse, Where(path, line_no) + ": non-finite value '" + std::string(token) + "'");
  }
  return value;
}

inline long ParseInt(std::string_view token, const std::string &path, std::size_t line_no) {
  token = Trim(token);
  long value = 0;
  const auto *end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, value);
  if (token.empty() || res.ec != std::errc() || res.ptr != end) {
    Fail(ErrorKind::kParse, Where(path, line_no) + ": not an integer: '" + std::string(token) + "'");
  }
  return value;
}

/// Shortest-round-trip formatting (17 significant digits).
inline std::string FormatExact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string JoinRow(const double *data, Eigen::Index n, Eigen::Index stride = 1) {
  std::string out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) out += ',';
    out += FormatExact(data[i * stride]);
  }
  return out;
}

inline std::string JoinRow(const Vector &v) { return JoinRow(v.data(), v.size()); }

inline std::ifstream OpenIn(const std::string &path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream OpenOut(const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  return out;
}

/// Non-empty lines of a file, with their 1-based line numbers.
struct NumberedLine {
  std::size_t number;
  std::string text;
};

inline std::vector<NumberedLine> ReadLines(const std::string &path) {
  auto in = OpenIn(path);
  std::vector<NumberedLine> lines;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!Trim(line).empty()) lines.push_back({n, line});
  }
  return lines;
}

/// Cursor over the numeric CSV blocks used by the model file formats.
class CsvBlockReader {
 public:
  explicit CsvBlockReader(std::string path) : path_(std::move(path)), lines_(ReadLines(path_)) {}

  bool AtEnd() const { return pos_ >= lines_.size(); }

  std::vector<std::string_view> NextFields() {
    if (AtEnd()) Fail(ErrorKind::kFormat, path_ + ": unexpected end of file");
    current_ = &lines_[pos_++];
    return Split(current_->text, ',');
  }

  Vector NextRow(Eigen::Index expected) {
    const auto fields = NextFields();
    if (expected >= 0 && static_cast<Eigen::Index>(fields.size()) != expected) {
      Fail(ErrorKind::kFormat, Where(path_, current_->number) + ": expected " +
                                   std::to_string(expected) + " fields, got " +
                                   std::to_string(fields.size()));
    }
    Vector row(static_cast<Eigen::Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      row(static_cast<Eigen::Index>(i)) = ParseDouble(fields[i], path_, current_->number);
    }
    return row;
  }

  Matrix NextMatrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = NextRow(cols).transpose();
    return m;
  }

  std::size_t line_number() const { return current_ ? current_->number : 0; }
  const std::string &path() const { return path_; }

 private:
  std::string path_;
  std::vector<NumberedLine> lines_;
  std::size_t pos_ = 0;
  const NumberedLine *current_ = nullptr;
};

inline void WriteMatrixRows(std::ostream &out, const Matrix &m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Vector row = m.row(r).transpose();
    out << JoinRow(row) << '\n';
  }
}

}  // namespace vbdiar::text

#endif  // VBDIAR_TEXT_HPP_
