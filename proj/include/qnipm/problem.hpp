#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace qnipm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleBounds : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Standard-form instance: min 1/2 x'Qx + c'x  s.t.  Ax = b, x >= 0.
// Rows of A are assumed linearly independent.
struct QuadraticProgram {
  int n = 0;  // variables
  int m = 0;  // equality rows
  SpMat Q;    // n x n, symmetric PSD, stored full
  SpMat A;    // m x n
  Vec b;
  Vec c;
  std::string name;

  bool is_lp() const { return Q.nonZeros() == 0; }
  double objective(const Vec& x) const;
  // Throws std::invalid_argument on dimension mismatch, asymmetric Q
  // (1e-12 relative), or an all-zero row of A.
  void validate() const;
};

enum class RowType { Eq, Le, Ge };

// Parsed MPS/QPS instance before standard-form conversion: general row
// types, ranges, and bounds l <= x <= u (defaults l = 0, u = +inf).
struct RawProblem {
  std::string name;
  int n = 0;  // structural columns
  int m = 0;  // constraint rows (objective row excluded)
  SpMat Q;
  SpMat A;
  Vec b;
  Vec c;
  Vec lower, upper;
  std::vector<RowType> row_types;
  Vec range;  // NaN where no RANGES entry
  double objective_constant = 0.0;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
};

// How each original variable maps into standard-form columns.
struct VariableMap {
  enum Kind { Shifted, Mirrored, Split } kind = Shifted;
  int col = -1;      // Shifted/Mirrored target, Split positive part
  int neg_col = -1;  // Split negative part
  double shift = 0.0;
  double mirror_offset = 0.0;  // Mirrored: x = mirror_offset - x_std
};

struct TransformRecord {
  int n_orig = 0;
  int m_orig = 0;
  std::vector<VariableMap> vars;  // one per original variable
  double objective_offset = 0.0;
  int n_std = 0;
  int m_std = 0;
};

struct RecoveredSolution {
  Vec x;       // original variables
  Vec lambda;  // multipliers of the original rows
  double objective = 0.0;
};

RawProblem parse_qps(std::istream& in, std::string stream_name = "<stream>");
RawProblem parse_qps_file(const std::string& path);

// Serializes raw back to MPS/QPS text; parse(write(parse(f))) == parse(f).
std::string write_qps(const RawProblem& raw);

// Conversion pipeline: inequality rows get slack columns (ranged rows a
// bounded slack), finite lower bounds are shifted out, columns with only a
// finite upper bound are mirrored, free columns split, and every remaining
// finite upper bound u becomes one extra row x_i + t_i = u.
std::pair<QuadraticProgram, TransformRecord> to_standard_form(const RawProblem& raw);

RecoveredSolution recover_solution(const TransformRecord& rec,
                                   const QuadraticProgram& std_qp,
                                   const Vec& x_std, const Vec& lambda_std);

}  // namespace qnipm
