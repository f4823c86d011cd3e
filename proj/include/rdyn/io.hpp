#pragma once

// JSON and CSV serialization. Complex numbers are [re, im] pairs, matrices are
// row-major nested arrays of pairs, tensors nest four levels deep.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdyn/density_matrix.hpp"
#include "rdyn/second_quant.hpp"

namespace rdyn::io {

using json = nlohmann::json;

json complex_to_json(cplx z);
cplx complex_from_json(const json& j);

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

json matrix_to_json(const Matrix& m);
// Throws ConfigError on ragged or malformed input.
Matrix matrix_from_json(const json& j);

json tensor_to_json(const Tensor4& t);
Tensor4 tensor_from_json(const json& j);

// {"modes": d, "particles": N, "states": [[n_0, ..., n_{d-1}], ...]}
json basis_to_json(const SectorBasis& b);

// {"basis": ..., "matrix": ...}
json density_to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const json& j);

// Throws ConfigError when the file is missing or not valid JSON.
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

// Fixed column order, one "%.15e" field per value.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  std::size_t columns() const { return columns_.size(); }

 private:
  std::FILE* file_ = nullptr;
  std::vector<std::string> columns_;
};

std::string format_double(double x);

// Rows (time, site, Re phi, Im phi, |phi|^2) for every snapshot.
void write_orbital_csv(const std::filesystem::path& path, const std::vector<double>& times,
                       const std::vector<Vector>& orbitals);

}  // namespace rdyn::io
