#include "sblem/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "sblem/error.hpp"

namespace sblem {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

double parse_double(const std::string& token, const std::filesystem::path& path) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError("malformed number '" + token + "' in " + path.string());
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf.data(), ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
  std::string text;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) text.push_back(',');
      text += format_double(M(i, j));
    }
    text.push_back('\n');
  }
  write_text_file(path, text);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& tok : split(line, ',')) row.push_back(parse_double(tok, path));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty matrix file " + path.string());
  Matrix M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

void write_indicator_csv(const std::filesystem::path& path, const Indicator& z) {
  std::string text;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (k > 0) text.push_back(',');
    text.push_back(z[k] ? '1' : '0');
  }
  text.push_back('\n');
  write_text_file(path, text);
}

Indicator read_indicator_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Indicator z;
  for (const auto& tok : split(line, ',')) {
    if (tok == "0") {
      z.push_back(0);
    } else if (tok == "1") {
      z.push_back(1);
    } else {
      throw IoError("indicator entries must be 0 or 1 in " + path.string());
    }
  }
  return z;
}

}  // namespace sblem
