#ifndef GRIDLIFE_SIMPLEX_H
#define GRIDLIFE_SIMPLEX_H

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace gridlife::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// minimize    cost' x
// subject to  row_lower <= A x <= row_upper
//             col_lower <=   x <= col_upper
//
// A is stored column-wise. Equality rows use row_lower == row_upper.
struct LinearProgram {
  struct Entry {
    std::size_t row;
    double value;
  };

  std::vector<double> cost;
  std::vector<double> col_lower;
  std::vector<double> col_upper;
  std::vector<std::vector<Entry>> columns;
  std::vector<std::string> col_names;

  std::vector<double> row_lower;
  std::vector<double> row_upper;
  std::vector<std::string> row_names;

  // Optional crash basis: for row i, the structural column to start basic
  // in place of the row's logical variable, or -1 to keep the logical.
  std::vector<long> basis_hint;
  // Optional: structural columns that start nonbasic at their upper bound.
  std::vector<bool> start_at_upper;

  std::size_t num_cols() const { return cost.size(); }
  std::size_t num_rows() const { return row_lower.size(); }

  std::size_t add_column(double c, double lower, double upper, std::string name = {});
  std::size_t add_row(double lower, double upper, const std::vector<std::pair<std::size_t, double>>& coeffs,
                      std::string name = {});

  /// Row activities A x.
  std::vector<double> activities(const std::vector<double>& x) const;
  double objective(const std::vector<double>& x) const;
  /// Largest bound or row violation of x.
  double max_violation(const std::vector<double>& x) const;
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string to_string(Status status);

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-10;
  std::size_t max_iterations = 100000;
  std::size_t refactor_interval = 100;
  // Consecutive degenerate pivots tolerated under largest-coefficient
  // pricing before switching to Bland's rule for the rest of the solve.
  std::size_t degenerate_limit = 50;
  bool bland_only = false;
};

struct Solution {
  Status status = Status::kIterationLimit;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t iterations = 0;
  bool used_bland = false;
};

/// Bounded-variable revised simplex with a composite phase 1. Every row gets
/// a logical variable r_i = a_i x bounded by the row limits.
Solution solve(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace gridlife::lp

#endif  // GRIDLIFE_SIMPLEX_H
