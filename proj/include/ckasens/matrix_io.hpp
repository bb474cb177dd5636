#pragma once

// Matrix and mask file formats.
//
//   CSV:    one example per line, comma separated, '.' decimal point, no header.
//   binary: "RSM1", u32 LE rows, u32 LE cols, rows*cols f64 LE, row-major.
//   mask:   a single CSV line of 0/1 flags.

#include "ckasens/core.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

namespace ckasens::io {

enum class MatrixFormat { Csv, Binary };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::Parse,
                "line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline constexpr std::string_view kBinaryMagic = "RSM1";

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Parse, "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Parse, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Matrix parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(detail::parse_double(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(rows.front().size()) + " columns, got " +
                                        std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::Parse, "empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

inline std::string format_csv(const Matrix& m) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  return out.str();
}

inline Matrix parse_binary(const std::string& bytes) {
  constexpr std::size_t header = 4 + 4 + 4;
  if (bytes.size() < header || std::string_view(bytes).substr(0, 4) != kBinaryMagic) {
    throw Error(ErrorCode::Parse, "missing RSM1 header");
  }
  const auto rows = detail::get_le<std::uint32_t>(bytes, 4);
  const auto cols = detail::get_le<std::uint32_t>(bytes, 8);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != header + count * 8) {
    throw Error(ErrorCode::Parse, "payload size does not match " + std::to_string(rows) + "x" +
                                      std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::size_t offset = header;
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j, offset += 8) m(i, j) = detail::get_le<double>(bytes, offset);
  }
  return m;
}

inline std::string format_binary(const Matrix& m) {
  std::string out(kBinaryMagic);
  out.reserve(12 + static_cast<std::size_t>(m.size()) * 8);
  detail::put_le(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_le(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_le(out, m(i, j));
  }
  return out;
}

/// Binary if the bytes start with the RSM1 magic, CSV otherwise.
inline Matrix parse_matrix(const std::string& bytes) {
  if (std::string_view(bytes).substr(0, 4) == kBinaryMagic) return parse_binary(bytes);
  return parse_csv(bytes);
}

inline RepresentationMatrix read_matrix(const std::string& path) {
  try {
    return RepresentationMatrix(parse_matrix(read_file_bytes(path)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidMatrix) throw Error(ErrorCode::Parse, path + ": " + e.what());
    throw;
  }
}

inline void write_matrix(const std::string& path, const Matrix& m, MatrixFormat format) {
  write_file_bytes(path, format == MatrixFormat::Csv ? format_csv(m) : format_binary(m));
}

inline SubsetMask parse_mask(const std::string& text) {
  std::vector<bool> bits;
  for (char ch : text) {
    if (ch == '0' || ch == '1') {
      bits.push_back(ch == '1');
    } else if (ch != ',' && ch != ' ' && ch != '\n' && ch != '\r' && ch != '\t') {
      throw Error(ErrorCode::Parse, std::string("bad mask character '") + ch + "'");
    }
  }
  return SubsetMask(std::move(bits));
}

inline std::string format_mask(const SubsetMask& mask) {
  std::string out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (i) out += ',';
    out += mask[i] ? '1' : '0';
  }
  out += '\n';
  return out;
}

}  // namespace ckasens::io
