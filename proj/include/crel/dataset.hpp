#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace crel {

// Observation container.  Plain samples live in `obs` (n x p); regression
// data additionally carry the response and design matrix.
struct Dataset {
  Eigen::MatrixXd obs;
  std::optional<Eigen::VectorXd> response;
  std::optional<Eigen::MatrixXd> design;

  int n() const { return static_cast<int>(obs.rows()); }
  int p() const { return static_cast<int>(obs.cols()); }
  bool has_glm() const { return response.has_value() && design.has_value(); }

  // throws SchemaError on inconsistent shapes, non-finite entries or a
  // response/design pair that is only half present
  void validate() const;

  static Dataset from_vector(const std::vector<double>& x);
  static Dataset from_matrix(Eigen::MatrixXd m);
  static Dataset glm(Eigen::VectorXd y, Eigen::MatrixXd x);
};

// F_n(t) for univariate data: right-continuous fraction of points <= t.
double ecdf(const Dataset& data, double t);

// Delimited-text loader: header row, one observation per row.  A header of
// the form y,x1,...,xd is loaded as a GLM dataset; anything else as a plain
// observation matrix.
Dataset load_csv(const std::string& path);
void save_csv(const std::string& path, const Dataset& data,
              const std::vector<std::string>& column_names = {});

}  // namespace crel
