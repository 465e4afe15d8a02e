#include "crel/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "crel/errors.hpp"

namespace crel {

void Dataset::validate() const {
  if (obs.rows() == 0) throw SchemaError("dataset: no observations");
  if (response.has_value() != design.has_value())
    throw SchemaError("dataset: response/design must be present together");
  if (!obs.allFinite()) throw SchemaError("dataset: non-finite observation");
  if (has_glm()) {
    if (response->size() != obs.rows() || design->rows() != obs.rows())
      throw SchemaError("dataset: response/design row count mismatch");
    if (!response->allFinite() || !design->allFinite())
      throw SchemaError("dataset: non-finite response/design entry");
    if (obs.rows() <= design->cols())
      throw SchemaError("dataset: need n > d observations");
  }
}

Dataset Dataset::from_vector(const std::vector<double>& x) {
  Dataset d;
  d.obs.resize(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) d.obs(static_cast<Eigen::Index>(i), 0) = x[i];
  d.validate();
  return d;
}

Dataset Dataset::from_matrix(Eigen::MatrixXd m) {
  Dataset d;
  d.obs = std::move(m);
  d.validate();
  return d;
}

Dataset Dataset::glm(Eigen::VectorXd y, Eigen::MatrixXd x) {
  Dataset d;
  d.obs.resize(y.size(), 1 + x.cols());
  d.obs.col(0) = y;
  d.obs.rightCols(x.cols()) = x;
  d.response = std::move(y);
  d.design = std::move(x);
  d.validate();
  return d;
}

double ecdf(const Dataset& data, double t) {
  if (data.p() != 1) throw SchemaError("ecdf: univariate data required");
  const Eigen::Index n = data.obs.rows();
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (data.obs(i, 0) <= t) ++count;
  return static_cast<double>(count) / static_cast<double>(n);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("csv: bad numeric field '" + s + "' at line " + std::to_string(line_no));
  }
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty file " + path);
  std::vector<std::string> header = split_line(line);
  if (header.empty()) throw ParseError("csv: empty header in " + path);

  bool glm = header[0] == "y" && header.size() >= 2;
  for (std::size_t j = 1; glm && j < header.size(); ++j)
    glm = header[j] == "x" + std::to_string(j);

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> f = split_line(line);
    if (f.size() != header.size())
      throw ParseError("csv: wrong field count at line " + std::to_string(line_no));
    std::vector<double> r;
    r.reserve(f.size());
    for (const std::string& s : f) r.push_back(parse_number(s, line_no));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError("csv: no data rows in " + path);

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

  if (glm) return Dataset::glm(m.col(0), m.rightCols(m.cols() - 1));
  return Dataset::from_matrix(std::move(m));
}

void save_csv(const std::string& path, const Dataset& data,
              const std::vector<std::string>& column_names) {
  std::ofstream out(path);
  if (!out) throw ParseError("csv: cannot write " + path);
  std::vector<std::string> names = column_names;
  if (names.empty()) {
    if (data.has_glm()) {
      names.push_back("y");
      for (Eigen::Index j = 0; j < data.design->cols(); ++j)
        names.push_back("x" + std::to_string(j + 1));
    } else {
      for (Eigen::Index j = 0; j < data.obs.cols(); ++j)
        names.push_back("v" + std::to_string(j + 1));
    }
  }
  for (std::size_t j = 0; j < names.size(); ++j)
    out << names[j] << (j + 1 == names.size() ? "\n" : ",");
  char buf[64];
  for (Eigen::Index i = 0; i < data.obs.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.obs.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", data.obs(i, j));
      out << buf << (j + 1 == data.obs.cols() ? "\n" : ",");
    }
  }
}

}  // namespace crel
