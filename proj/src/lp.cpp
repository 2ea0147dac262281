#include "carbonclear/lp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "carbonclear/errors.hpp"

namespace carbonclear::lp {

int LinearProgram::add_variable(double lo, double hi, double obj,
                                std::string name) {
  lower.push_back(lo);
  upper.push_back(hi);
  objective.push_back(obj);
  var_names.push_back(std::move(name));
  return static_cast<int>(lower.size()) - 1;
}

int LinearProgram::add_constraint(Constraint c) {
  constraints.push_back(std::move(c));
  return static_cast<int>(constraints.size()) - 1;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_structure(const LinearProgram& lp) {
  const std::size_t n = lp.num_vars();
  if (lp.upper.size() != n || lp.objective.size() != n) {
    throw InputError("lp: variable arrays have inconsistent lengths");
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    if (std::isnan(lo) || std::isnan(hi) || std::isnan(lp.objective[j])) {
      throw InputError("lp: NaN in variable " + std::to_string(j));
    }
    if (lo > hi) {
      throw InputError("lp: lower bound exceeds upper bound for variable " +
                       std::to_string(j));
    }
    if (lo == kInf || hi == -kInf) {
      throw InputError("lp: empty bound interval for variable " +
                       std::to_string(j));
    }
  }
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
    for (const auto& [idx, coeff] : lp.constraints[i].coeffs) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
        throw InputError("lp: constraint " + std::to_string(i) +
                         " references undeclared variable " +
                         std::to_string(idx));
      }
      if (!std::isfinite(coeff)) {
        throw InputError("lp: non-finite coefficient in constraint " +
                         std::to_string(i));
      }
    }
    if (!std::isfinite(lp.constraints[i].rhs)) {
      throw InputError("lp: non-finite rhs in constraint " +
                       std::to_string(i));
    }
  }
}

// Nearest power of two to |v|, as a scale factor. Powers of two keep
// scaling exact in floating point.
double pow2_scale(double v) {
  if (v <= 0.0 || !std::isfinite(v)) return 1.0;
  return std::exp2(-std::round(std::log2(v)));
}

enum VarStatus : std::int8_t { kBasic, kAtLower, kAtUpper, kFreeNonbasic };

struct Column {
  double cost = 0.0;  // phase-2 (real) cost, scaled
  double lo = 0.0;
  double hi = 0.0;
  bool artificial = false;
  std::vector<std::pair<int, double>> entries;  // (row, coeff)
};

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SolverOptions& opts)
      : lp_(lp), opts_(opts) {
    build();
  }

  Solution run() {
    Solution sol;
    phase_ = 1;
    if (total_infeasibility() > phase1_tol_) {
      const bool ok = iterate();
      if (!ok) {
        throw InternalError("lp: phase 1 reported an unbounded direction");
      }
    }
    if (total_infeasibility() > phase1_tol_) {
      sol.status = Status::Infeasible;
      for (int r = 0; r < m_; ++r) {
        const int j = basic_[r];
        if (cols_[j].artificial && xb_[r] > phase1_tol_) {
          sol.infeasible_rows.push_back(row_name(r));
        }
      }
      sol.iterations = iterations_;
      return sol;
    }

    // Freeze artificial columns for phase 2.
    for (auto& c : cols_) {
      if (c.artificial) c.lo = c.hi = 0.0;
    }
    phase_ = 2;
    stall_counter_ = 0;
    bland_ = false;
    best_objective_ = kInf;
    if (!iterate()) {
      sol.status = Status::Unbounded;
      sol.iterations = iterations_;
      return sol;
    }

    sol.status = Status::Optimal;
    sol.iterations = iterations_;
    extract(sol);
    return sol;
  }

 private:
  void build() {
    n_ = static_cast<int>(lp_.num_vars());
    m_ = static_cast<int>(lp_.constraints.size());
    const double sign = lp_.sense == Sense::Maximize ? -1.0 : 1.0;

    // Row/column equilibration with powers of two, two passes.
    row_scale_.assign(m_, 1.0);
    col_scale_.assign(n_, 1.0);
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<double> rmax(m_, 0.0);
      for (int i = 0; i < m_; ++i) {
        for (const auto& [j, v] : lp_.constraints[i].coeffs) {
          rmax[i] = std::max(rmax[i],
                             std::abs(v) * row_scale_[i] * col_scale_[j]);
        }
      }
      for (int i = 0; i < m_; ++i) row_scale_[i] *= pow2_scale(rmax[i]);
      std::vector<double> cmax(n_, 0.0);
      for (int i = 0; i < m_; ++i) {
        for (const auto& [j, v] : lp_.constraints[i].coeffs) {
          cmax[j] = std::max(cmax[j],
                             std::abs(v) * row_scale_[i] * col_scale_[j]);
        }
      }
      for (int j = 0; j < n_; ++j) col_scale_[j] *= pow2_scale(cmax[j]);
    }

    cols_.resize(n_ + m_);
    for (int j = 0; j < n_; ++j) {
      Column& c = cols_[j];
      c.cost = sign * lp_.objective[j] * col_scale_[j];
      c.lo = lp_.lower[j] / col_scale_[j];
      c.hi = lp_.upper[j] / col_scale_[j];
    }
    rhs_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const Constraint& row = lp_.constraints[i];
      rhs_[i] = row.rhs * row_scale_[i];
      for (const auto& [j, v] : row.coeffs) {
        cols_[j].entries.emplace_back(i, v * row_scale_[i] * col_scale_[j]);
      }
      Column& s = cols_[n_ + i];
      switch (row.relation) {
        case Relation::LessEqual:
          s.lo = 0.0;
          s.hi = kInf;
          break;
        case Relation::GreaterEqual:
          s.lo = -kInf;
          s.hi = 0.0;
          break;
        case Relation::Equal:
          s.lo = s.hi = 0.0;
          break;
      }
      s.entries.emplace_back(i, 1.0);
    }
    // Merge duplicate coefficients within a column row-wise.
    for (auto& c : cols_) {
      std::sort(c.entries.begin(), c.entries.end());
      std::size_t w = 0;
      for (std::size_t r = 0; r < c.entries.size(); ++r) {
        if (w > 0 && c.entries[w - 1].first == c.entries[r].first) {
          c.entries[w - 1].second += c.entries[r].second;
        } else {
          c.entries[w++] = c.entries[r];
        }
      }
      c.entries.resize(w);
    }

    status_.assign(cols_.size(), kAtLower);
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      status_[j] = initial_status(cols_[j]);
    }

    // Start from the slack basis where a slack can carry the row residual;
    // add an artificial column where it can not.
    basic_.assign(m_, -1);
    xb_.assign(m_, 0.0);
    double bnorm = 0.0;
    for (int i = 0; i < m_; ++i) bnorm = std::max(bnorm, std::abs(rhs_[i]));
    phase1_tol_ = 1e-7 * (1.0 + bnorm);

    std::vector<double> s_req(rhs_.begin(), rhs_.end());
    for (int j = 0; j < n_; ++j) {
      const double v = nonbasic_value(j);
      if (v == 0.0) continue;
      for (const auto& [r, a] : cols_[j].entries) s_req[r] -= a * v;
    }
    for (int i = 0; i < m_; ++i) {
      Column& s = cols_[n_ + i];
      if (s_req[i] >= s.lo - 1e-12 && s_req[i] <= s.hi + 1e-12) {
        basic_[i] = n_ + i;
        status_[n_ + i] = kBasic;
        xb_[i] = std::clamp(s_req[i], s.lo, s.hi);
        continue;
      }
      const double sb = std::clamp(s_req[i], s.lo, s.hi);
      status_[n_ + i] = sb == s.lo ? kAtLower : kAtUpper;
      const double res = s_req[i] - sb;
      Column art;
      art.lo = 0.0;
      art.hi = kInf;
      art.artificial = true;
      art.entries.emplace_back(i, res > 0 ? 1.0 : -1.0);
      cols_.push_back(std::move(art));
      status_.push_back(kBasic);
      basic_[i] = static_cast<int>(cols_.size()) - 1;
      xb_[i] = std::abs(res);
    }
    refactor();
  }

  VarStatus initial_status(const Column& c) const {
    if (c.lo == -kInf && c.hi == kInf) return kFreeNonbasic;
    if (c.lo == -kInf) return kAtUpper;
    if (c.hi == kInf) return kAtLower;
    return std::abs(c.lo) <= std::abs(c.hi) ? kAtLower : kAtUpper;
  }

  double nonbasic_value(int j) const {
    switch (status_[j]) {
      case kAtLower:
        return cols_[j].lo;
      case kAtUpper:
        return cols_[j].hi;
      default:
        return 0.0;  // free nonbasic rests at zero
    }
  }

  double cost_of(int j) const {
    if (phase_ == 1) return cols_[j].artificial ? 1.0 : 0.0;
    return cols_[j].artificial ? 0.0 : cols_[j].cost;
  }

  double total_infeasibility() const {
    double s = 0.0;
    for (int r = 0; r < m_; ++r) {
      if (cols_[basic_[r]].artificial) s += std::max(0.0, xb_[r]);
    }
    return s;
  }

  void refactor() {
    etas_.clear();
    if (m_ == 0) return;
    MatrixXd B = MatrixXd::Zero(m_, m_);
    for (int r = 0; r < m_; ++r) {
      for (const auto& [row, v] : cols_[basic_[r]].entries) B(row, r) = v;
    }
    lu_.compute(B);
    recompute_basic_values();
  }

  void recompute_basic_values() {
    VectorXd b = VectorXd::Zero(m_);
    for (int i = 0; i < m_; ++i) b[i] = rhs_[i];
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      if (status_[j] == kBasic) continue;
      const double v = nonbasic_value(j);
      if (v == 0.0) continue;
      for (const auto& [r, a] : cols_[j].entries) b[r] -= a * v;
    }
    VectorXd x = ftran(b);
    for (int r = 0; r < m_; ++r) xb_[r] = x[r];
  }

  VectorXd ftran(VectorXd v) const {
    if (m_ == 0) return v;
    v = lu_.solve(v);
    for (const auto& e : etas_) {
      const double t = v[e.r] / e.d[e.r];
      v -= t * e.d;
      v[e.r] = t;
    }
    return v;
  }

  VectorXd btran(VectorXd v) const {
    if (m_ == 0) return v;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const double dot = it->d.dot(v);
      v[it->r] += (v[it->r] - dot) / it->d[it->r];
    }
    return lu_.transpose().solve(v);
  }

  VectorXd dense_column(int j) const {
    VectorXd a = VectorXd::Zero(m_);
    for (const auto& [r, v] : cols_[j].entries) a[r] = v;
    return a;
  }

  // Returns false when an unbounded direction is found (phase 2 only).
  bool iterate() {
    while (true) {
      if (iterations_ >= opts_.max_iterations) {
        throw IterationLimitError(
            "lp: iteration limit of " + std::to_string(opts_.max_iterations) +
            " pivots exceeded");
      }
      VectorXd cb(m_);
      for (int r = 0; r < m_; ++r) cb[r] = cost_of(basic_[r]);
      const VectorXd y = btran(cb);

      int q = -1;
      int dir = 0;
      double best = opts_.opt_tol;
      for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (status_[j] == kBasic) continue;
        const Column& c = cols_[j];
        if (c.lo == c.hi) continue;  // fixed, including frozen artificials
        if (phase_ == 2 && c.artificial) continue;
        double d = cost_of(j);
        for (const auto& [r, v] : c.entries) d -= y[r] * v;
        double viol = 0.0;
        int candidate_dir = 0;
        if (status_[j] == kAtLower || status_[j] == kFreeNonbasic) {
          if (d < -opts_.opt_tol) {
            viol = -d;
            candidate_dir = +1;
          }
        }
        if (viol == 0.0 &&
            (status_[j] == kAtUpper || status_[j] == kFreeNonbasic)) {
          if (d > opts_.opt_tol) {
            viol = d;
            candidate_dir = -1;
          }
        }
        if (candidate_dir == 0) continue;
        if (bland_) {
          q = static_cast<int>(j);
          dir = candidate_dir;
          reduced_cost_ = d;
          break;
        }
        if (viol > best) {
          best = viol;
          q = static_cast<int>(j);
          dir = candidate_dir;
          reduced_cost_ = d;
        }
      }
      if (q < 0) return true;  // optimal for the current phase

      const VectorXd w = ftran(dense_column(q));
      // Ratio test: basic i moves at rate -dir*w[i].
      double t_max = kInf;
      int leave = -1;
      bool leave_at_upper = false;
      for (int r = 0; r < m_; ++r) {
        const double rate = -dir * w[r];
        const Column& bc = cols_[basic_[r]];
        double t = kInf;
        bool at_upper = false;
        if (rate > 1e-9) {
          if (bc.hi == kInf) continue;
          t = (bc.hi - xb_[r]) / rate;
          at_upper = true;
        } else if (rate < -1e-9) {
          if (bc.lo == -kInf) continue;
          t = (xb_[r] - bc.lo) / (-rate);
        } else {
          continue;
        }
        bool better = t < t_max - 1e-12;
        // Bland's rule needs ties broken on the leaving variable index.
        if (!better && bland_ && leave >= 0 && t <= t_max + 1e-12 &&
            basic_[r] < basic_[leave]) {
          better = true;
        }
        if (better) {
          t_max = std::min(t, t_max);
          leave = r;
          leave_at_upper = at_upper;
        }
      }
      const double span = cols_[q].hi - cols_[q].lo;  // inf for free vars
      bool flip = false;
      if (span <= t_max) {
        t_max = span;
        flip = true;
      }
      if (!std::isfinite(t_max)) {
        if (phase_ == 1) {
          throw InternalError("lp: unbounded direction during phase 1");
        }
        return false;
      }
      t_max = std::max(t_max, 0.0);

      for (int r = 0; r < m_; ++r) xb_[r] -= dir * t_max * w[r];
      objective_shift_ += dir * t_max * reduced_cost_;
      track_progress();

      if (flip) {
        status_[q] = status_[q] == kAtLower ? kAtUpper : kAtLower;
      } else {
        const double entering_value = nonbasic_value(q) + dir * t_max;
        const int leaving = basic_[leave];
        if (cols_[leaving].artificial) {
          cols_[leaving].lo = cols_[leaving].hi = 0.0;
          status_[leaving] = kAtLower;
        } else {
          status_[leaving] = leave_at_upper ? kAtUpper : kAtLower;
        }
        basic_[leave] = q;
        status_[q] = kBasic;
        xb_[leave] = entering_value;
        etas_.push_back({leave, w});
        if (static_cast<int>(etas_.size()) >= opts_.refactor_interval) {
          refactor();
        }
      }
      ++iterations_;
    }
  }

  void track_progress() {
    const double obj =
        phase_ == 1 ? total_infeasibility() : objective_shift_;
    if (obj < best_objective_ - 1e-10) {
      best_objective_ = obj;
      stall_counter_ = 0;
      bland_ = false;
    } else if (++stall_counter_ > opts_.stall_pivots) {
      bland_ = true;
    }
  }

  void extract(Solution& sol) const {
    sol.values.assign(n_, 0.0);
    std::vector<double> scaled(cols_.size(), 0.0);
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      scaled[j] = status_[j] == kBasic ? 0.0 : nonbasic_value(j);
    }
    for (int r = 0; r < m_; ++r) scaled[basic_[r]] = xb_[r];
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) {
      sol.values[j] = scaled[j] * col_scale_[j];
      obj += lp_.objective[j] * sol.values[j];
    }
    sol.objective = obj;

    VectorXd cb(m_);
    for (int r = 0; r < m_; ++r) cb[r] = cost_of(basic_[r]);
    const VectorXd y = btran(cb);
    const double sign = lp_.sense == Sense::Maximize ? -1.0 : 1.0;
    sol.duals.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      sol.duals[i] = sign * y[i] * row_scale_[i];
    }
  }

  std::string row_name(int r) const {
    const std::string& n = lp_.constraints[r].name;
    return n.empty() ? "row" + std::to_string(r) : n;
  }

  struct Eta {
    int r;
    VectorXd d;
  };

  const LinearProgram& lp_;
  const SolverOptions& opts_;
  int n_ = 0;
  int m_ = 0;
  std::vector<Column> cols_;
  std::vector<double> rhs_;
  std::vector<double> row_scale_, col_scale_;
  std::vector<VarStatus> status_;
  std::vector<int> basic_;
  std::vector<double> xb_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  std::vector<Eta> etas_;
  int phase_ = 1;
  int iterations_ = 0;
  int stall_counter_ = 0;
  bool bland_ = false;
  double best_objective_ = kInf;
  double objective_shift_ = 0.0;
  double reduced_cost_ = 0.0;
  double phase1_tol_ = 1e-7;
};

}  // namespace

Solution solve_lp(const LinearProgram& lp, const SolverOptions& opts) {
  check_structure(lp);
  Simplex simplex(lp, opts);
  return simplex.run();
}

void write_lp_file(const LinearProgram& lp, std::ostream& os) {
  auto vname = [&](int j) {
    return lp.var_names[j].empty() ? "x" + std::to_string(j)
                                   : lp.var_names[j];
  };
  os << "\\ carbonclear lp dump v1\n";
  os << (lp.sense == Sense::Maximize ? "Maximize\n" : "Minimize\n");
  os << " obj:";
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    if (lp.objective[j] == 0.0) continue;
    os << (lp.objective[j] >= 0 ? " + " : " - ") << std::abs(lp.objective[j])
       << " " << vname(static_cast<int>(j));
  }
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
    const Constraint& c = lp.constraints[i];
    os << " " << (c.name.empty() ? "c" + std::to_string(i) : c.name) << ":";
    for (const auto& [j, v] : c.coeffs) {
      os << (v >= 0 ? " + " : " - ") << std::abs(v) << " " << vname(j);
    }
    switch (c.relation) {
      case Relation::LessEqual:
        os << " <= ";
        break;
      case Relation::Equal:
        os << " = ";
        break;
      case Relation::GreaterEqual:
        os << " >= ";
        break;
    }
    os << c.rhs << "\n";
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    if (lo == -kInf && hi == kInf) {
      os << " " << vname(static_cast<int>(j)) << " free\n";
    } else if (lo == -kInf) {
      os << " " << vname(static_cast<int>(j)) << " <= " << hi << "\n";
    } else if (hi == kInf) {
      os << " " << vname(static_cast<int>(j)) << " >= " << lo << "\n";
    } else {
      os << " " << lo << " <= " << vname(static_cast<int>(j)) << " <= " << hi
         << "\n";
    }
  }
  os << "End\n";
}

}  // namespace carbonclear::lp
