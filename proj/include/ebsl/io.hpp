#pragma once

// File formats.
//
// Matrix container (binary):
//   bytes 0..4   magic "MXIO1"
//   bytes 5..12  rows, uint64 little-endian
//   bytes 13..20 cols, uint64 little-endian
//   then rows*cols IEEE-754 doubles, little-endian, row-major.
// Readers also accept CSV (comma separated numbers, one row per line); the
// format is chosen by the magic bytes.
//
// Config files are "key = value" lines; '#' starts a comment.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ebsl/errors.hpp"
#include "ebsl/problem.hpp"

namespace ebsl::io {

inline constexpr char kMagic[5] = {'M', 'X', 'I', 'O', '1'};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::string& buf, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) buf.push_back(static_cast<char>((value >> (8 * b)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string encode_matrix(const Matrix& m) {
  std::string buf(kMagic, sizeof(kMagic));
  detail::put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  detail::put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(m.cols()));
  buf.reserve(buf.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(m(i, j)));
  return buf;
}

inline Matrix parse_csv_matrix(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      const std::string c = detail::trim(cell);
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw IoError(origin + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(origin + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(origin + ": empty matrix file");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Matrix decode_matrix(const std::string& buf, const std::string& origin = "<buffer>") {
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    return parse_csv_matrix(buf, origin);
  const std::size_t header = sizeof(kMagic) + 16;
  if (buf.size() < header) throw IoError(origin + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const auto rows = detail::get_le<std::uint64_t>(p + 5);
  const auto cols = detail::get_le<std::uint64_t>(p + 13);
  if (cols != 0 && rows > (buf.size() / 8) / cols) throw IoError(origin + ": payload shorter than header claims");
  if (buf.size() != header + rows * cols * 8) throw IoError(origin + ": payload length does not match header");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const unsigned char* q = p + header;
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j, q += 8)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::bit_cast<double>(detail::get_le<std::uint64_t>(q));
  return m;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) { write_file(path, encode_matrix(m)); }

inline Matrix read_matrix(const std::filesystem::path& path) { return decode_matrix(detail::read_all(path), path.string()); }

/// Plain CSV with full round-trip precision.
inline std::string matrix_to_csv(const Matrix& m) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << '\n';
  }
  return os.str();
}

/// Parsed "key = value" file; keeps the line of each key for error messages.
struct KeyValueConfig {
  std::map<std::string, std::string> values;
  std::map<std::string, long> lines;
  std::string origin;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string error_at(const std::string& key, const std::string& what) const {
    auto it = lines.find(key);
    std::ostringstream os;
    os << origin;
    if (it != lines.end()) os << ":" << it->second;
    os << ": " << key << ": " << what;
    return os.str();
  }
};

inline KeyValueConfig parse_key_values(const std::string& text, const std::string& origin = "<config>") {
  KeyValueConfig cfg;
  cfg.origin = origin;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + detail::trim(line) + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.values.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values[key] = value;
    cfg.lines[key] = lineno;
  }
  return cfg;
}

inline KeyValueConfig read_key_values(const std::filesystem::path& path) {
  std::ifstream probe(path);
  if (!probe) throw IoError("cannot open " + path.string());
  return parse_key_values(detail::read_all(path), path.string());
}

}  // namespace ebsl::io
