#pragma once

// Numeric file ingestion: delimited text and the "GLF1" raw float64 format.
//
// GLF1 layout (little-endian): "GLF1" | u64 rows | u64 cols | u8 has_labels |
// rows x (cols + has_labels) f64, row-major, label (if any) last in each row.

#include "glf/autodiff.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace glf {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericTable {
  Mat features;
  std::vector<int> labels;  // empty when the file carries no labels
};

namespace io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
inline T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
inline void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
inline T get(std::istream& in, const std::string& path) {
  T v;
  const auto offset = static_cast<long long>(in.tellg());
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(path + ": truncated at byte offset " + std::to_string(offset));
  return to_little(v);
}

inline void put_u32(std::ostream& o, std::uint32_t v) { put(o, v); }
inline void put_u64(std::ostream& o, std::uint64_t v) { put(o, v); }
inline void put_f64(std::ostream& o, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put(o, bits);
}
inline void put_string(std::ostream& o, const std::string& s) {
  put_u32(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& i, const std::string& p) { return get<std::uint32_t>(i, p); }
inline std::uint64_t get_u64(std::istream& i, const std::string& p) { return get<std::uint64_t>(i, p); }
inline double get_f64(std::istream& i, const std::string& p) {
  const auto bits = get<std::uint64_t>(i, p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
inline std::string get_string(std::istream& i, const std::string& p) {
  const auto n = get_u32(i, p);
  if (n > (1u << 26)) throw FormatError(p + ": implausible string length " + std::to_string(n));
  std::string s(n, '\0');
  i.read(s.data(), n);
  if (!i) throw FormatError(p + ": truncated string");
  return s;
}

}  // namespace io

inline void write_raw_f64(const std::string& path, const NumericTable& t) {
  const bool has_labels = !t.labels.empty();
  if (has_labels && t.labels.size() != static_cast<std::size_t>(t.features.rows()))
    throw FormatError("write_raw_f64: label count does not match rows");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.write("GLF1", 4);
  io::put_u64(out, static_cast<std::uint64_t>(t.features.rows()));
  io::put_u64(out, static_cast<std::uint64_t>(t.features.cols()));
  io::put<std::uint8_t>(out, has_labels ? 1 : 0);
  for (Eigen::Index r = 0; r < t.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.features.cols(); ++c) io::put_f64(out, t.features(r, c));
    if (has_labels) io::put_f64(out, static_cast<double>(t.labels[static_cast<std::size_t>(r)]));
  }
  if (!out) throw FormatError("failed writing " + path);
}

inline NumericTable read_raw_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "GLF1") throw FormatError(path + ": bad magic at byte offset 0 (expected GLF1)");
  const auto rows = io::get_u64(in, path);
  const auto cols = io::get_u64(in, path);
  const auto flag = io::get<std::uint8_t>(in, path);
  if (flag > 1) throw FormatError(path + ": has_labels flag at byte offset 20 must be 0 or 1");
  NumericTable t;
  t.features = Mat(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c)
      t.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = io::get_f64(in, path);
    if (flag == 1) {
      const double l = io::get_f64(in, path);
      if (l != std::floor(l)) throw FormatError(path + ": non-integer label in row " + std::to_string(r));
      t.labels.push_back(static_cast<int>(l));
    }
  }
  return t;
}

// Rows of comma- or whitespace-separated decimals; with has_labels the last
// column is an integer label.
inline NumericTable read_delimited_text(const std::string& path, bool has_labels) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0, width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& ch : line)
      if (ch == ',' || ch == '\t' || ch == ';' || ch == '\r') ch = ' ';
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": cannot parse '" + tok + "' as a number");
      }
    }
    if (vals.empty()) continue;
    if (width == 0) width = vals.size();
    if (vals.size() != width)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " values, got " +
                        std::to_string(vals.size()));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw FormatError(path + ": no data rows");
  const std::size_t n_feat = has_labels ? width - 1 : width;
  if (n_feat == 0) throw FormatError(path + ": no feature columns");
  NumericTable t;
  t.features = Mat(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_feat));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < n_feat; ++c) t.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (has_labels) {
      const double l = rows[r].back();
      if (l != std::floor(l)) throw FormatError(path + ": non-integer label on data row " + std::to_string(r + 1));
      t.labels.push_back(static_cast<int>(l));
    }
  }
  return t;
}

enum class NumericFormat { DelimitedText, RawF64 };

inline NumericTable load_numeric_file(const std::string& path, NumericFormat format, bool has_labels = false) {
  return format == NumericFormat::RawF64 ? read_raw_f64(path) : read_delimited_text(path, has_labels);
}

}  // namespace glf
