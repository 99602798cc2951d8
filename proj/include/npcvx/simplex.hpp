#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "npcvx/errors.hpp"
#include "npcvx/numeric.hpp"

namespace npcvx {

enum class LpRel { le, ge, eq };
enum class LpStatus { optimal, infeasible, unbounded };

struct LpRow {
  std::vector<double> a;
  LpRel rel = LpRel::le;
  double b = 0.0;
};

/// min c'x  subject to  rows (a'x <= / >= / == b),  x >= 0.
struct LpProblem {
  std::vector<double> c;
  std::vector<LpRow> rows;
};

/// `dual[i]` is the multiplier of row i in its original orientation, signed so
/// that value == sum_i dual[i]*b[i] at optimality (hence dual >= 0 on >= rows
/// and dual <= 0 on <= rows for a minimization).
struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  std::vector<double> x;
  std::vector<double> dual;
  int iterations = 0;
};

namespace detail {

constexpr std::size_t kNoCol = static_cast<std::size_t>(-1);

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. Problems in
/// this library are tiny (tens of rows and columns), so the full tableau is
/// kept and updated in place.
class SimplexTableau {
 public:
  explicit SimplexTableau(const LpProblem& p, double eps) : eps_(eps) {
    m_ = p.rows.size();
    n_ = p.c.size();
    flip_.assign(m_, 1.0);

    // Normalize to b >= 0, tracking sign flips for dual recovery.
    std::vector<LpRow> rows = p.rows;
    for (std::size_t i = 0; i < m_; ++i) {
      if (rows[i].a.size() != n_) throw Error(errc::dimension_mismatch, "LP row width");
      if (rows[i].b < 0.0) {
        flip_[i] = -1.0;
        rows[i].b = -rows[i].b;
        for (double& v : rows[i].a) v = -v;
        rows[i].rel =
            rows[i].rel == LpRel::le ? LpRel::ge : (rows[i].rel == LpRel::ge ? LpRel::le : LpRel::eq);
      }
    }

    // Column layout: structural | slack/surplus | artificial.
    slack_col_.assign(m_, kNoCol);
    slack_sign_.assign(m_, 1.0);
    art_col_.assign(m_, kNoCol);
    std::size_t ncols = n_;
    for (std::size_t i = 0; i < m_; ++i) {
      if (rows[i].rel != LpRel::eq) {
        slack_col_[i] = ncols++;
        slack_sign_[i] = rows[i].rel == LpRel::le ? 1.0 : -1.0;
      }
    }
    first_art_ = ncols;
    for (std::size_t i = 0; i < m_; ++i)
      if (rows[i].rel != LpRel::le) art_col_[i] = ncols++;
    ncols_ = ncols;

    tab_.assign(m_, std::vector<double>(ncols_ + 1, 0.0));
    basis_.assign(m_, kNoCol);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) tab_[i][j] = rows[i].a[j];
      tab_[i][ncols_] = rows[i].b;
      if (slack_col_[i] != kNoCol) tab_[i][slack_col_[i]] = slack_sign_[i];
      if (art_col_[i] != kNoCol) {
        tab_[i][art_col_[i]] = 1.0;
        basis_[i] = art_col_[i];
      } else {
        basis_[i] = slack_col_[i];
      }
    }
    cost_ = p.c;
    cost_.resize(ncols_, 0.0);
  }

  LpResult solve() {
    LpResult res;

    if (first_art_ < ncols_) {
      std::vector<double> phase1(ncols_, 0.0);
      for (std::size_t j = first_art_; j < ncols_; ++j) phase1[j] = 1.0;
      build_reduced(phase1);
      if (!iterate(/*entering_limit=*/ncols_, res.iterations)) {
        res.status = LpStatus::unbounded;  // phase 1 is bounded; defensive only
        return res;
      }
      double art_sum = 0.0;
      for (std::size_t i = 0; i < m_; ++i)
        if (basis_[i] >= first_art_) art_sum += tab_[i][ncols_];
      if (art_sum > 1e-8) {
        res.status = LpStatus::infeasible;
        res.value = art_sum;
        return res;
      }
      // Pivot degenerate artificials out of the basis where a substitute
      // exists; rows without one are redundant and stay inert.
      for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] < first_art_) continue;
        for (std::size_t j = 0; j < first_art_; ++j) {
          if (std::fabs(tab_[i][j]) > eps_) {
            pivot(i, j);
            break;
          }
        }
      }
    }

    build_reduced(cost_);
    if (!iterate(/*entering_limit=*/first_art_, res.iterations)) {
      res.status = LpStatus::unbounded;
      return res;
    }

    res.status = LpStatus::optimal;
    res.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) res.x[basis_[i]] = tab_[i][ncols_];
    res.value = 0.0;
    for (std::size_t j = 0; j < n_; ++j) res.value += cost_[j] * res.x[j];

    // Row duals from reduced costs of the slot columns: with r_j = c_j - y'A_j
    // and zero slot cost, a +1 slack gives y_i = -r, a -1 surplus y_i = +r, and
    // an eq-row artificial (A_j = e_i) y_i = -r.
    res.dual.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double y;
      if (slack_col_[i] != kNoCol)
        y = slack_sign_[i] > 0 ? -reduced_[slack_col_[i]] : reduced_[slack_col_[i]];
      else
        y = -reduced_[art_col_[i]];
      res.dual[i] = flip_[i] * y;
    }
    return res;
  }

 private:
  void build_reduced(const std::vector<double>& cost) {
    reduced_ = cost;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] -= cb * tab_[i][j];
    }
  }

  bool iterate(std::size_t entering_limit, int& iters) {
    const int max_iters = 20000;
    for (int it = 0; it < max_iters; ++it) {
      // Bland: entering = smallest index with negative reduced cost.
      std::size_t enter = kNoCol;
      for (std::size_t j = 0; j < entering_limit; ++j) {
        if (reduced_[j] < -eps_) {
          enter = j;
          break;
        }
      }
      if (enter == kNoCol) return true;

      // Ratio test; Bland tie-break on smallest basis variable index.
      std::size_t leave = kNoCol;
      double best = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        const double aij = tab_[i][enter];
        if (aij <= eps_) continue;
        const double ratio = tab_[i][ncols_] / aij;
        if (ratio < best - 1e-12 ||
            (ratio < best + 1e-12 && (leave == kNoCol || basis_[i] < basis_[leave]))) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == kNoCol) return false;  // unbounded direction
      pivot(leave, enter);
      ++iters;
    }
    throw Error(errc::no_convergence, "simplex iteration cap reached");
  }

  void pivot(std::size_t row, std::size_t col) {
    const double piv = tab_[row][col];
    for (double& v : tab_[row]) v /= piv;
    tab_[row][col] = 1.0;  // squash rounding
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = tab_[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= ncols_; ++j) tab_[i][j] -= f * tab_[row][j];
      tab_[i][col] = 0.0;
    }
    const double rf = reduced_[col];
    if (rf != 0.0)
      for (std::size_t j = 0; j < ncols_; ++j) reduced_[j] -= rf * tab_[row][j];
    reduced_[col] = 0.0;
    basis_[row] = col;
  }

  double eps_;
  std::size_t m_ = 0, n_ = 0, ncols_ = 0, first_art_ = 0;
  std::vector<std::vector<double>> tab_;
  std::vector<double> cost_, reduced_, flip_, slack_sign_;
  std::vector<std::size_t> basis_, slack_col_, art_col_;
};

}  // namespace detail

inline LpResult solve_lp(const LpProblem& p, double eps = 1e-11) {
  detail::SimplexTableau t(p, eps);
  return t.solve();
}

}  // namespace npcvx
