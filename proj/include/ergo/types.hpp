#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace ergo {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

using StateIndex = std::size_t;

/// Numerical policy shared by every module. One record so a caller can
/// tighten or loosen the whole library consistently.
struct Settings {
  double residual_tol = 1e-12;       // linear-algebra residuals
  double input_tol = 1e-9;           // row sums of user-supplied kernels
  double degenerate_variance = 1e-10;
  double eigen_residual_tol = 1e-10;  // accepted eigen-triples
  double eigen_change_tol = 1e-13;    // successive-lambda stopping rule
  double eigen_stop_residual = 1e-12;
  int max_iterations = 100000;
  double gap_tol = 1e-8;              // |lambda_2| / |lambda_1| > 1 - gap_tol is not isolated
  double lattice_tol = 1e-9;
  long lattice_max_denominator = 1000000;
  long lattice_clean_denominator = 1000;
  double lattice_margin = 1e-4;
  // Spans with a reconstruction denominator above lattice_clean_denominator
  // must hold to this tolerance (unit modulus, value residuals): an
  // irrational ratio can sit within lattice_tol of a fine rational grid.
  double ambiguous_tol = 1e-13;
  long long dp_cell_budget = 100000000;
};

const Settings& default_settings();

}  // namespace ergo
