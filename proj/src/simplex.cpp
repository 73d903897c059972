#include "gridlife/simplex.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridlife::lp {

std::size_t LinearProgram::add_column(double c, double lower, double upper, std::string name) {
  cost.push_back(c);
  col_lower.push_back(lower);
  col_upper.push_back(upper);
  columns.emplace_back();
  col_names.push_back(std::move(name));
  return cost.size() - 1;
}

std::size_t LinearProgram::add_row(double lower, double upper,
                                   const std::vector<std::pair<std::size_t, double>>& coeffs, std::string name) {
  const std::size_t row = row_lower.size();
  row_lower.push_back(lower);
  row_upper.push_back(upper);
  row_names.push_back(std::move(name));
  for (const auto& [col, value] : coeffs) {
    if (col >= columns.size()) throw std::out_of_range("row references an unknown column");
    if (value != 0.0) columns[col].push_back({row, value});
  }
  return row;
}

std::vector<double> LinearProgram::activities(const std::vector<double>& x) const {
  std::vector<double> act(num_rows(), 0.0);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (const auto& e : columns[j]) act[e.row] += e.value * x[j];
  }
  return act;
}

double LinearProgram::objective(const std::vector<double>& x) const {
  double total = 0.0;
  for (std::size_t j = 0; j < cost.size(); ++j) total += cost[j] * x[j];
  return total;
}

double LinearProgram::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    worst = std::max({worst, col_lower[j] - x[j], x[j] - col_upper[j]});
  }
  const auto act = activities(x);
  for (std::size_t i = 0; i < act.size(); ++i) {
    worst = std::max({worst, row_lower[i] - act[i], act[i] - row_upper[i]});
  }
  return worst;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

enum class VarState : unsigned char { kBasic, kLower, kUpper, kFree };

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SimplexOptions& options)
      : lp_(lp), opt_(options), m_(lp.num_rows()), n_(lp.num_cols()), total_(n_ + m_) {
    lower_.resize(total_);
    upper_.resize(total_);
    for (std::size_t j = 0; j < n_; ++j) {
      lower_[j] = lp.col_lower[j];
      upper_[j] = lp.col_upper[j];
      if (lower_[j] > upper_[j]) throw std::invalid_argument("column with lower bound above upper bound");
    }
    for (std::size_t i = 0; i < m_; ++i) {
      lower_[n_ + i] = lp.row_lower[i];
      upper_[n_ + i] = lp.row_upper[i];
      if (lower_[n_ + i] > upper_[n_ + i]) throw std::invalid_argument("row with lower limit above upper limit");
    }
    state_.assign(total_, VarState::kLower);
    x_.assign(total_, 0.0);
    head_.resize(m_);
    binv_.assign(m_ * m_, 0.0);
    c_basic_.assign(m_, 0.0);
    y_.assign(m_, 0.0);
    alpha_.assign(m_, 0.0);
  }

  Solution run() {
    crash();
    Solution sol;
    bool bland = opt_.bland_only;
    std::size_t degenerate_run = 0;
    std::size_t since_refactor = 0;

    for (std::size_t iter = 0;; ++iter) {
      if (iter >= opt_.max_iterations) {
        sol.status = Status::kIterationLimit;
        break;
      }
      if (since_refactor >= opt_.refactor_interval) {
        refactor_or_throw();
        since_refactor = 0;
      }

      const bool phase_one = load_costs();
      compute_duals();
      const long entering = price(phase_one, bland);
      if (entering < 0) {
        if (since_refactor > 0) {
          // Confirm the verdict on freshly recomputed basic values.
          refactor_or_throw();
          since_refactor = 0;
          continue;
        }
        sol.status = phase_one ? Status::kInfeasible : Status::kOptimal;
        break;
      }

      const auto q = static_cast<std::size_t>(entering);
      const double sigma = reduced_cost(q, phase_one) < 0.0 ? 1.0 : -1.0;
      compute_alpha(q);

      const Ratio ratio = ratio_test(q, sigma, bland);
      if (!std::isfinite(ratio.step)) {
        sol.status = Status::kUnbounded;
        break;
      }

      ++sol.iterations;
      degenerate_run = ratio.step <= 1e-12 ? degenerate_run + 1 : 0;
      if (!bland && degenerate_run > opt_.degenerate_limit) bland = true;

      // Move along the edge.
      x_[q] += sigma * ratio.step;
      for (std::size_t i = 0; i < m_; ++i) {
        if (alpha_[i] != 0.0) x_[head_[i]] -= sigma * ratio.step * alpha_[i];
      }
      if (ratio.row < 0) {
        // Entering variable reaches its opposite bound.
        state_[q] = state_[q] == VarState::kLower ? VarState::kUpper : VarState::kLower;
        x_[q] = state_[q] == VarState::kLower ? lower_[q] : upper_[q];
        continue;
      }
      const auto r = static_cast<std::size_t>(ratio.row);
      const std::size_t leaving = head_[r];
      state_[leaving] = ratio.leave_at_upper ? VarState::kUpper : VarState::kLower;
      x_[leaving] = ratio.leave_at_upper ? upper_[leaving] : lower_[leaving];
      state_[q] = VarState::kBasic;
      head_[r] = q;
      update_inverse(r);
      ++since_refactor;
    }

    sol.used_bland = bland;
    sol.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    sol.objective = lp_.objective(sol.x);
    return sol;
  }

 private:
  struct Ratio {
    double step = std::numeric_limits<double>::infinity();
    long row = -1;
    bool leave_at_upper = false;
  };

  template <class F>
  void for_column(std::size_t j, F&& f) const {
    if (j < n_) {
      for (const auto& e : lp_.columns[j]) f(e.row, e.value);
    } else {
      f(j - n_, -1.0);
    }
  }

  double& inv(std::size_t row, std::size_t col) { return binv_[col * m_ + row]; }

  void place_nonbasic(std::size_t j, bool prefer_upper) {
    if (prefer_upper && std::isfinite(upper_[j])) {
      state_[j] = VarState::kUpper;
      x_[j] = upper_[j];
    } else if (std::isfinite(lower_[j])) {
      state_[j] = VarState::kLower;
      x_[j] = lower_[j];
    } else if (std::isfinite(upper_[j])) {
      state_[j] = VarState::kUpper;
      x_[j] = upper_[j];
    } else {
      state_[j] = VarState::kFree;
      x_[j] = 0.0;
    }
  }

  void crash() {
    for (std::size_t j = 0; j < n_; ++j) {
      place_nonbasic(j, j < lp_.start_at_upper.size() && lp_.start_at_upper[j]);
    }
    for (std::size_t i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      state_[n_ + i] = VarState::kBasic;
    }
    bool hinted = false;
    if (lp_.basis_hint.size() == m_) {
      for (std::size_t i = 0; i < m_; ++i) {
        const long hint = lp_.basis_hint[i];
        if (hint < 0) continue;
        const auto j = static_cast<std::size_t>(hint);
        if (j >= n_ || state_[j] == VarState::kBasic) continue;
        head_[i] = j;
        state_[j] = VarState::kBasic;
        place_nonbasic(n_ + i, false);
        hinted = true;
      }
    }
    if (!refactor()) {
      if (!hinted) throw std::logic_error("logical basis is singular");
      for (std::size_t j = 0; j < n_; ++j) {
        if (state_[j] == VarState::kBasic) place_nonbasic(j, j < lp_.start_at_upper.size() && lp_.start_at_upper[j]);
      }
      for (std::size_t i = 0; i < m_; ++i) {
        head_[i] = n_ + i;
        state_[n_ + i] = VarState::kBasic;
      }
      refactor();
    }
    compute_basic_values();
  }

  void refactor_or_throw() {
    if (!refactor()) throw std::runtime_error("basis became singular during simplex iterations");
    compute_basic_values();
  }

  // Gauss-Jordan inversion of the basis matrix with partial pivoting.
  bool refactor() {
    std::vector<double> work(m_ * m_, 0.0);  // row-major basis
    std::vector<double> inverse(m_ * m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) {
      for_column(head_[k], [&](std::size_t row, double v) { work[row * m_ + k] = v; });
      inverse[k * m_ + k] = 1.0;
    }
    for (std::size_t k = 0; k < m_; ++k) {
      std::size_t pivot = k;
      double best = std::abs(work[k * m_ + k]);
      for (std::size_t i = k + 1; i < m_; ++i) {
        const double v = std::abs(work[i * m_ + k]);
        if (v > best) {
          best = v;
          pivot = i;
        }
      }
      if (best < 1e-11) return false;
      if (pivot != k) {
        std::swap_ranges(work.begin() + static_cast<std::ptrdiff_t>(k * m_),
                         work.begin() + static_cast<std::ptrdiff_t>((k + 1) * m_),
                         work.begin() + static_cast<std::ptrdiff_t>(pivot * m_));
        std::swap_ranges(inverse.begin() + static_cast<std::ptrdiff_t>(k * m_),
                         inverse.begin() + static_cast<std::ptrdiff_t>((k + 1) * m_),
                         inverse.begin() + static_cast<std::ptrdiff_t>(pivot * m_));
      }
      const double scale = 1.0 / work[k * m_ + k];
      for (std::size_t c = 0; c < m_; ++c) {
        work[k * m_ + c] *= scale;
        inverse[k * m_ + c] *= scale;
      }
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == k) continue;
        const double factor = work[i * m_ + k];
        if (factor == 0.0) continue;
        for (std::size_t c = k; c < m_; ++c) work[i * m_ + c] -= factor * work[k * m_ + c];
        for (std::size_t c = 0; c < m_; ++c) {
          const double v = inverse[k * m_ + c];
          if (v != 0.0) inverse[i * m_ + c] -= factor * v;
        }
      }
    }
    // inverse is row-major; store column-major.
    for (std::size_t r = 0; r < m_; ++r) {
      for (std::size_t c = 0; c < m_; ++c) inv(r, c) = inverse[r * m_ + c];
    }
    return true;
  }

  // x_B = -B^{-1} N x_N (all rows are homogeneous: A x - r = 0).
  void compute_basic_values() {
    std::vector<double> rhs(m_, 0.0);
    for (std::size_t j = 0; j < total_; ++j) {
      if (state_[j] == VarState::kBasic || x_[j] == 0.0) continue;
      for_column(j, [&](std::size_t row, double v) { rhs[row] -= v * x_[j]; });
    }
    std::vector<double> xb(m_, 0.0);
    for (std::size_t c = 0; c < m_; ++c) {
      if (rhs[c] == 0.0) continue;
      const double* col = &binv_[c * m_];
      for (std::size_t r = 0; r < m_; ++r) xb[r] += col[r] * rhs[c];
    }
    for (std::size_t r = 0; r < m_; ++r) x_[head_[r]] = xb[r];
  }

  // Basic costs for this iteration. Returns true in phase 1, where the
  // costs are the gradient of the sum of bound violations.
  bool load_costs() {
    bool infeasible = false;
    const double tol = opt_.feasibility_tol;
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = head_[r];
      if (x_[j] < lower_[j] - tol) {
        c_basic_[r] = -1.0;
        infeasible = true;
      } else if (x_[j] > upper_[j] + tol) {
        c_basic_[r] = 1.0;
        infeasible = true;
      } else {
        c_basic_[r] = 0.0;
      }
    }
    if (!infeasible) {
      for (std::size_t r = 0; r < m_; ++r) c_basic_[r] = head_[r] < n_ ? lp_.cost[head_[r]] : 0.0;
    }
    return infeasible;
  }

  void compute_duals() {
    for (std::size_t c = 0; c < m_; ++c) {
      const double* col = &binv_[c * m_];
      double s = 0.0;
      for (std::size_t r = 0; r < m_; ++r) s += c_basic_[r] * col[r];
      y_[c] = s;
    }
  }

  double reduced_cost(std::size_t j, bool phase_one) const {
    double d = (!phase_one && j < n_) ? lp_.cost[j] : 0.0;
    for_column(j, [&](std::size_t row, double v) { d -= y_[row] * v; });
    return d;
  }

  long price(bool phase_one, bool bland) const {
    long chosen = -1;
    double best = 0.0;
    const double tol = opt_.optimality_tol;
    for (std::size_t j = 0; j < total_; ++j) {
      const VarState s = state_[j];
      if (s == VarState::kBasic || lower_[j] == upper_[j]) continue;
      const double d = reduced_cost(j, phase_one);
      const bool eligible = (s == VarState::kLower && d < -tol) || (s == VarState::kUpper && d > tol) ||
                            (s == VarState::kFree && std::abs(d) > tol);
      if (!eligible) continue;
      if (bland) return static_cast<long>(j);
      if (std::abs(d) > best) {
        best = std::abs(d);
        chosen = static_cast<long>(j);
      }
    }
    return chosen;
  }

  void compute_alpha(std::size_t q) {
    std::fill(alpha_.begin(), alpha_.end(), 0.0);
    for_column(q, [&](std::size_t row, double v) {
      const double* col = &binv_[row * m_];
      for (std::size_t r = 0; r < m_; ++r) alpha_[r] += v * col[r];
    });
    for (double& a : alpha_) {
      if (std::abs(a) <= opt_.pivot_tol) a = 0.0;
    }
  }

  Ratio ratio_test(std::size_t q, double sigma, bool bland) const {
    const double tol = opt_.feasibility_tol;
    struct Candidate {
      double step;
      std::size_t row;
      bool at_upper;
    };
    std::vector<Candidate> candidates;
    double min_step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m_; ++i) {
      if (alpha_[i] == 0.0) continue;
      const std::size_t j = head_[i];
      const double rate = -sigma * alpha_[i];  // d x_j / d step
      double step = std::numeric_limits<double>::infinity();
      bool at_upper = false;
      if (rate < 0.0) {
        if (x_[j] > upper_[j] + tol) {
          step = (x_[j] - upper_[j]) / -rate;
          at_upper = true;
        } else if (x_[j] >= lower_[j] - tol && std::isfinite(lower_[j])) {
          step = std::max(0.0, x_[j] - lower_[j]) / -rate;
        }
      } else {
        if (x_[j] < lower_[j] - tol) {
          step = (lower_[j] - x_[j]) / rate;
        } else if (x_[j] <= upper_[j] + tol && std::isfinite(upper_[j])) {
          step = std::max(0.0, upper_[j] - x_[j]) / rate;
          at_upper = true;
        }
      }
      if (!std::isfinite(step)) continue;
      candidates.push_back({step, i, at_upper});
      min_step = std::min(min_step, step);
    }

    Ratio out;
    const double flip = upper_[q] - lower_[q];
    if (std::isfinite(flip) && flip <= min_step) {
      out.step = flip;
      return out;
    }
    if (candidates.empty()) return out;

    const double slack = 1e-12 * std::max(1.0, min_step);
    const Candidate* pick = nullptr;
    for (const auto& c : candidates) {
      if (c.step > min_step + slack) continue;
      if (!pick) {
        pick = &c;
      } else if (bland ? head_[c.row] < head_[pick->row] : std::abs(alpha_[c.row]) > std::abs(alpha_[pick->row])) {
        pick = &c;
      }
    }
    out.step = pick->step;
    out.row = static_cast<long>(pick->row);
    out.leave_at_upper = pick->at_upper;
    return out;
  }

  void update_inverse(std::size_t r) {
    const double pivot = alpha_[r];
    for (std::size_t c = 0; c < m_; ++c) {
      double* col = &binv_[c * m_];
      if (col[r] == 0.0) continue;
      const double p = col[r] / pivot;
      for (std::size_t i = 0; i < m_; ++i) {
        if (alpha_[i] != 0.0) col[i] -= alpha_[i] * p;
      }
      col[r] = p;
    }
  }

  const LinearProgram& lp_;
  SimplexOptions opt_;
  std::size_t m_, n_, total_;
  std::vector<double> lower_, upper_;
  std::vector<VarState> state_;
  std::vector<double> x_;
  std::vector<std::size_t> head_;
  std::vector<double> binv_;  // column-major
  std::vector<double> c_basic_, y_, alpha_;
};

}  // namespace

Solution solve(const LinearProgram& lp, const SimplexOptions& options) {
  if (lp.col_lower.size() != lp.num_cols() || lp.col_upper.size() != lp.num_cols() ||
      lp.columns.size() != lp.num_cols() || lp.row_upper.size() != lp.num_rows()) {
    throw std::invalid_argument("linear program arrays have inconsistent sizes");
  }
  if (lp.num_rows() == 0) {
    // Pure bound problem: each variable sits at its cheaper bound.
    Solution sol;
    sol.status = Status::kOptimal;
    sol.x.resize(lp.num_cols());
    for (std::size_t j = 0; j < lp.num_cols(); ++j) {
      const double c = lp.cost[j];
      const double bound = c > 0.0 ? lp.col_lower[j] : (c < 0.0 ? lp.col_upper[j] : (std::isfinite(lp.col_lower[j]) ? lp.col_lower[j] : std::isfinite(lp.col_upper[j]) ? lp.col_upper[j] : 0.0));
      if (!std::isfinite(bound)) {
        sol.status = Status::kUnbounded;
        return sol;
      }
      sol.x[j] = bound;
    }
    sol.objective = lp.objective(sol.x);
    return sol;
  }
  return Simplex(lp, options).run();
}

}  // namespace gridlife::lp
