#pragma once

#include <string>
#include <vector>

#include "lyr/tensor.hpp"

namespace lyr {

/// A domain data file: header `f0,..,f{r-1}` with an optional leading
/// `label` column naming individuals. Row order is preserved.
struct DomainCsv {
  Tensor data;                      // d x r
  std::vector<std::string> labels;  // empty when the file has no label column
};

DomainCsv load_domain_csv(const std::string& path);

/// Plain numeric CSV with a header row; returns an n x m tensor.
Tensor load_matrix_csv(const std::string& path);

/// Integer pair file (two columns with a header) used for 0/1 relations.
std::vector<std::pair<std::size_t, std::size_t>> load_pairs_csv(const std::string& path);

/// Integer index file (one column with a header).
std::vector<std::size_t> load_index_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

/// Shortest decimal form that round-trips a float64; used everywhere CSVs
/// are written so reruns are byte-identical.
std::string format_double(double v);

}  // namespace lyr
