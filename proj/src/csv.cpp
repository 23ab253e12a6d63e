#include "lyr/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lyr {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s, const std::string& path, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    while (used < s.size() && (s[used] == ' ' || s[used] == '\t')) ++used;
    if (used != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw Error(path + ":" + std::to_string(line_no) + ": non-numeric cell '" + s + "'");
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read CSV file '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

}  // namespace

DomainCsv load_domain_csv(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw Error(path + ": missing header row");
  auto header = split_line(lines[0]);
  bool labeled = !header.empty() && header[0] == "label";
  std::size_t first_feat = labeled ? 1 : 0;
  std::size_t width = header.size() - first_feat;
  for (std::size_t j = 0; j < width; ++j)
    if (header[first_feat + j] != "f" + std::to_string(j))
      throw Error(path + ": header column " + std::to_string(first_feat + j) + " must be 'f" +
                  std::to_string(j) + "', got '" + header[first_feat + j] + "'");

  DomainCsv out;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = split_line(lines[i]);
    if (cells.size() != header.size())
      throw Error(path + ":" + std::to_string(i + 1) + ": ragged row, expected " +
                  std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j)
      row[j] = parse_cell(cells[first_feat + j], path, i + 1);
    rows.push_back(std::move(row));
    if (labeled) out.labels.push_back(cells[0]);
  }
  out.data = rows.empty() ? Tensor({0, width}, {}) : Tensor::matrix(rows);
  return out;
}

Tensor load_matrix_csv(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw Error(path + ": missing header row");
  std::size_t width = split_line(lines[0]).size();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = split_line(lines[i]);
    if (cells.size() != width)
      throw Error(path + ":" + std::to_string(i + 1) + ": ragged row, expected " +
                  std::to_string(width) + " cells, got " + std::to_string(cells.size()));
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) row[j] = parse_cell(cells[j], path, i + 1);
    rows.push_back(std::move(row));
  }
  return rows.empty() ? Tensor({0, width}, {}) : Tensor::matrix(rows);
}

std::vector<std::pair<std::size_t, std::size_t>> load_pairs_csv(const std::string& path) {
  Tensor t = load_matrix_csv(path);
  if (t.shape[1] != 2) throw Error(path + ": expected exactly two columns");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(t.shape[0]);
  for (std::size_t i = 0; i < t.shape[0]; ++i)
    out.emplace_back(static_cast<std::size_t>(t.at(i, 0)), static_cast<std::size_t>(t.at(i, 1)));
  return out;
}

std::vector<std::size_t> load_index_csv(const std::string& path) {
  Tensor t = load_matrix_csv(path);
  if (t.shape[1] != 1) throw Error(path + ": expected exactly one column");
  std::vector<std::size_t> out;
  out.reserve(t.shape[0]);
  for (double v : t.data) out.push_back(static_cast<std::size_t>(v));
  return out;
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write CSV file '" + path + "'");
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_double(row[j]);
    os << "\n";
  }
  if (!os) throw Error("write failed for CSV file '" + path + "'");
}

std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

}  // namespace lyr
