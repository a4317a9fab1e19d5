#pragma once

// Row-major dense data matrix plus its two on-disk forms:
//
//   csv     one matrix row per line, comma-separated decimal floats, no header
//   binary  magic "SPKY" | u32 LE version=1 | u64 LE rows | u64 LE cols |
//           rows*cols little-endian IEEE-754 doubles, row-major
//
// Binary round-trips are bit-exact; CSV is written with shortest
// round-trippable decimal digits so csv -> load reproduces the same doubles.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "spectral_spike/errors.hpp"

namespace spectral_spike {

struct DataMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, rows*cols entries

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  const double* row(std::size_t i) const { return values.data() + i * cols; }
  double* row(std::size_t i) { return values.data() + i * cols; }
};

enum class DataFormat { csv, binary };

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(char((v >> (8 * k)) & 0xff));
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(char((v >> (8 * k)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

inline std::string format_double(double v) {
  std::array<char, 40> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace detail

inline DataMatrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  DataMatrix m;
  std::string line;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::size_t col_no = 0;
    while (true) {
      ++col_no;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) {
        throw format_error("'" + path + "': row " + std::to_string(row_no) +
                           ", column " + std::to_string(col_no) +
                           ": not a decimal float");
      }
      if (!std::isfinite(v)) {
        throw format_error("'" + path + "': row " + std::to_string(row_no) +
                           ", column " + std::to_string(col_no) +
                           ": non-finite value");
      }
      row.push_back(v);
      p = res.ptr;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') {
        throw format_error("'" + path + "': row " + std::to_string(row_no) +
                           ", column " + std::to_string(col_no) +
                           ": expected ',' separator");
      }
      ++p;
    }
    if (m.rows == 0) {
      m.cols = row.size();
    } else if (row.size() != m.cols) {
      throw format_error("'" + path + "': row " + std::to_string(row_no) +
                         " has " + std::to_string(row.size()) +
                         " columns, expected " + std::to_string(m.cols));
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.rows;
  }
  if (m.rows == 0 || m.cols == 0)
    throw format_error("'" + path + "': empty matrix");
  return m;
}

inline void save_csv(const std::string& path, const DataMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  std::string line;
  for (std::size_t i = 0; i < m.rows; ++i) {
    line.clear();
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) line.push_back(',');
      line += detail::format_double(m.at(i, j));
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw io_error("write to '" + path + "' failed");
}

inline constexpr char kBinaryMagic[4] = {'S', 'P', 'K', 'Y'};
inline constexpr std::uint32_t kBinaryVersion = 1;

inline DataMatrix load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::array<unsigned char, 24> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()))
    throw format_error("'" + path + "': truncated header");
  if (std::memcmp(header.data(), kBinaryMagic, 4) != 0)
    throw format_error("'" + path + "': bad magic, expected \"SPKY\"");
  const std::uint32_t version = detail::get_u32_le(header.data() + 4);
  if (version != kBinaryVersion)
    throw format_error("'" + path + "': unsupported version " +
                       std::to_string(version));
  const std::uint64_t rows = detail::get_u64_le(header.data() + 8);
  const std::uint64_t cols = detail::get_u64_le(header.data() + 16);
  if (rows == 0 || cols == 0)
    throw format_error("'" + path + "': nonpositive dimensions");
  if (cols > (std::uint64_t(1) << 48) / (rows ? rows : 1))
    throw format_error("'" + path + "': dimensions overflow");
  const std::size_t count = std::size_t(rows) * std::size_t(cols);
  DataMatrix m;
  m.rows = std::size_t(rows);
  m.cols = std::size_t(cols);
  m.values.resize(count);
  std::vector<unsigned char> payload(count * 8);
  in.read(reinterpret_cast<char*>(payload.data()), payload.size());
  if (in.gcount() != static_cast<std::streamsize>(payload.size()))
    throw format_error("'" + path + "': truncated payload, expected " +
                       std::to_string(count) + " doubles");
  in.peek();
  if (!in.eof())
    throw format_error("'" + path + "': trailing bytes after payload");
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = detail::get_u64_le(payload.data() + 8 * i);
    const double v = std::bit_cast<double>(bits);
    if (!std::isfinite(v))
      throw format_error("'" + path + "': non-finite value at entry " +
                         std::to_string(i + 1) + " (row " +
                         std::to_string(i / m.cols + 1) + ", column " +
                         std::to_string(i % m.cols + 1) + ")");
    m.values[i] = v;
  }
  return m;
}

inline void save_binary(const std::string& path, const DataMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  std::string header;
  header.append(kBinaryMagic, 4);
  detail::put_u32_le(header, kBinaryVersion);
  detail::put_u64_le(header, m.rows);
  detail::put_u64_le(header, m.cols);
  out.write(header.data(), std::streamsize(header.size()));
  std::string payload;
  payload.reserve(m.values.size() * 8);
  for (double v : m.values)
    detail::put_u64_le(payload, std::bit_cast<std::uint64_t>(v));
  out.write(payload.data(), std::streamsize(payload.size()));
  if (!out) throw io_error("write to '" + path + "' failed");
}

inline DataMatrix load_data(const std::string& path, DataFormat format) {
  return format == DataFormat::csv ? load_csv(path) : load_binary(path);
}

inline void save_data(const std::string& path, const DataMatrix& m,
                      DataFormat format) {
  if (format == DataFormat::csv)
    save_csv(path, m);
  else
    save_binary(path, m);
}

}  // namespace spectral_spike
