#include "rdyn/io.hpp"

#include <fstream>

namespace rdyn::io {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw ConfigError("malformed " + what); }

std::size_t array_size(const json& j, const std::string& what) {
  if (!j.is_array()) malformed(what + ": expected an array");
  return j.size();
}

}  // namespace

json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx complex_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    malformed("complex number: expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

Vector vector_from_json(const json& j) {
  const std::size_t n = array_size(j, "vector");
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
  return v;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from_json(const json& j) {
  const std::size_t rows = array_size(j, "matrix");
  if (rows == 0) return Matrix(0, 0);
  const std::size_t cols = array_size(j[0], "matrix row");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (array_size(j[r], "matrix row") != cols) malformed("matrix: ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complex_from_json(j[r][c]);
  }
  return m;
}

json tensor_to_json(const Tensor4& t) {
  const int d = t.modes();
  json out = json::array();
  for (int i = 0; i < d; ++i) {
    json a = json::array();
    for (int j = 0; j < d; ++j) {
      json b = json::array();
      for (int k = 0; k < d; ++k) {
        json c = json::array();
        for (int l = 0; l < d; ++l) c.push_back(complex_to_json(t(i, j, k, l)));
        b.push_back(std::move(c));
      }
      a.push_back(std::move(b));
    }
    out.push_back(std::move(a));
  }
  return out;
}

Tensor4 tensor_from_json(const json& j) {
  const std::size_t d = array_size(j, "tensor");
  Tensor4 t(static_cast<int>(d));
  for (std::size_t i = 0; i < d; ++i) {
    if (array_size(j[i], "tensor") != d) malformed("tensor: not d x d x d x d");
    for (std::size_t a = 0; a < d; ++a) {
      if (array_size(j[i][a], "tensor") != d) malformed("tensor: not d x d x d x d");
      for (std::size_t b = 0; b < d; ++b) {
        if (array_size(j[i][a][b], "tensor") != d) malformed("tensor: not d x d x d x d");
        for (std::size_t c = 0; c < d; ++c)
          t(static_cast<int>(i), static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)) =
              complex_from_json(j[i][a][b][c]);
      }
    }
  }
  return t;
}

json basis_to_json(const SectorBasis& b) {
  json states = json::array();
  for (const FockState& s : b.states()) states.push_back(s.occupations);
  return {{"modes", b.modes()}, {"particles", b.particles()}, {"states", std::move(states)}};
}

json density_to_json(const DensityMatrix& rho) {
  return {{"basis", basis_to_json(rho.sector())}, {"matrix", matrix_to_json(rho.matrix())}};
}

DensityMatrix density_from_json(const json& j) {
  if (!j.is_object() || !j.contains("basis") || !j.contains("matrix"))
    malformed("density matrix: expected {basis, matrix}");
  const json& b = j["basis"];
  const BasisPtr basis = enumerate_sector(b.at("modes").get<int>(), b.at("particles").get<int>());
  if (b.contains("states")) {
    const json& states = b["states"];
    if (array_size(states, "basis states") != basis->size())
      malformed("density matrix: basis size mismatch");
    for (std::size_t k = 0; k < basis->size(); ++k)
      if (states[k].get<std::vector<int>>() != basis->state(k).occupations)
        malformed("density matrix: basis states out of order");
  }
  const Matrix m = matrix_from_json(j["matrix"]);
  const auto dim = static_cast<Eigen::Index>(basis->size());
  if (m.rows() != dim || m.cols() != dim) malformed("density matrix: dimension mismatch");
  return DensityMatrix(basis, m);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15e", x);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : columns_(std::move(columns)) {
  file_ = std::fopen(path.c_str(), "w");
  if (file_ == nullptr) throw ConfigError("cannot write " + path.string());
  for (std::size_t i = 0; i < columns_.size(); ++i)
    std::fprintf(file_, "%s%s", i ? "," : "", columns_[i].c_str());
  std::fputc('\n', file_);
}

CsvWriter::~CsvWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_.size())
    throw std::invalid_argument("CSV row has " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(columns_.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    std::fprintf(file_, "%s%.15e", i ? "," : "", values[i]);
  std::fputc('\n', file_);
}

void write_orbital_csv(const std::filesystem::path& path, const std::vector<double>& times,
                       const std::vector<Vector>& orbitals) {
  CsvWriter csv(path, {"time", "site", "re_phi", "im_phi", "abs2_phi"});
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Vector& phi = orbitals[k];
    for (Eigen::Index x = 0; x < phi.size(); ++x)
      csv.row({times[k], static_cast<double>(x), phi(x).real(), phi(x).imag(), std::norm(phi(x))});
  }
}

}  // namespace rdyn::io
