#pragma once

// Run records, residual metrics and invariant checkers.

#include "gne/model.hpp"
#include "gne/operators.hpp"
#include "gne/stepsizes.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace gne {

inline constexpr double absent = std::numeric_limits<double>::quiet_NaN();

/// Reference solution: fixed point, primal part and consensus multiplier.
struct Reference {
  PrimalDualState U;
  Vec x;
  Vec u_g;
  double u_spread = 0.0;  // max_i ||u_i - u_g||
};

struct RunRow {
  long k = 0;
  double primal = absent;
  double dual = absent;
  double fp_res_sq = absent;
  double dist_sq = absent;
  double phi = absent;
  int activation = -1;
  int max_delay = -1;
};

struct RunRecord {
  std::string mode;
  bool converged = false;
  bool validated = true;
  long iterations = 0;
  bool primal_absolute = false;  // some reference block had zero norm
  bool dual_absolute = false;
  double final_primal = absent;
  double final_dual = absent;
  std::vector<RunRow> rows;
};

struct Residuals {
  double primal;
  double dual;
  bool primal_absolute;
  bool dual_absolute;
};

/// Reference norms at or below this count as zero (an inactive coupling
/// constraint leaves a multiplier at round-off level, not exactly 0).
inline constexpr double reference_zero_norm = 1e-9;

/// Per-player primal term ||x_i - x_i*|| / ||x_i*|| (absolute when ||x_i*|| = 0).
inline double primal_term(Eigen::Ref<const Vec> xi, Eigen::Ref<const Vec> xi_ref, bool* absolute = nullptr) {
  const double nr = xi_ref.norm();
  const double d = (xi - xi_ref).norm();
  if (nr <= reference_zero_norm) {
    if (absolute) *absolute = true;
    return d;
  }
  return d / nr;
}

/// Per-player dual term ||u_i - u_g|| / (m ||u_g||) (absolute when u_g = 0).
inline double dual_term(Eigen::Ref<const Vec> ui, Eigen::Ref<const Vec> ug, int m, bool* absolute = nullptr) {
  const double nr = ug.norm();
  const double d = (ui - ug).norm();
  if (nr <= reference_zero_norm) {
    if (absolute) *absolute = true;
    return d / m;
  }
  return d / (m * nr);
}

inline Residuals residuals(const PrimalDualState& s, const GameSpec& game, const Reference& ref) {
  Residuals r{0.0, 0.0, false, false};
  const int m = game.players(), q = game.coupling_rows();
  for (int i = 0; i < m; ++i) {
    const auto off = game.offset(i), ni = game.dim(i);
    r.primal += primal_term(s.x.segment(off, ni), ref.x.segment(off, ni), &r.primal_absolute);
    r.dual += dual_term(s.u.segment(i * q, q), ref.u_g, m, &r.dual_absolute);
  }
  return r;
}

/// Mean of the local multipliers and their spread.
inline std::pair<Vec, double> consensus_multiplier(const Vec& u, int m, int q) {
  Vec ug = Vec::Zero(q);
  for (int i = 0; i < m; ++i) ug += u.segment(i * q, q);
  ug /= m;
  double spread = 0.0;
  for (int i = 0; i < m; ++i) spread = std::max(spread, (u.segment(i * q, q) - ug).norm());
  return {ug, spread};
}

inline Reference make_reference(const PrimalDualState& U, const GameSpec& game) {
  auto [ug, spread] = consensus_multiplier(U.u, game.players(), game.coupling_rows());
  return {U, U.x, ug, spread};
}

// ---------------------------------------------------------------------------

struct Verdict {
  bool ok = true;
  long failing_k = -1;
  double worst = 0.0;  // most negative slack seen
  std::string detail;
};

inline constexpr double fejer_slack = 1e-10;

/// dist(k+1) <= dist(k) - ((1-gamma)/gamma) fp(k) + 1e-10 for all recorded k.
inline Verdict check_fejer(const RunRecord& rec, double gamma) {
  Verdict v;
  const double c = (1.0 - gamma) / gamma;
  for (std::size_t r = 0; r + 1 < rec.rows.size(); ++r) {
    const auto& a = rec.rows[r];
    const auto& b = rec.rows[r + 1];
    if (b.k != a.k + 1 || std::isnan(a.dist_sq) || std::isnan(b.dist_sq) || std::isnan(a.fp_res_sq))
      continue;
    const double slack = a.dist_sq - c * a.fp_res_sq - b.dist_sq;
    v.worst = std::min(v.worst, slack);
    if (slack < -fejer_slack && v.ok) {
      v.ok = false;
      v.failing_k = a.k;
      v.detail = "quasi-Fejer inequality violated at k=" + std::to_string(a.k) +
                 " (slack " + std::to_string(slack) + ")";
    }
  }
  return v;
}

struct RateVerdict {
  bool ok = true;
  bool monotone = true;
  bool bound = true;
  long failing_k = -1;
  double slope = absent;  // log-log slope over the final decade
  bool vacuous = false;
  std::string detail;
};

/// Relative and absolute floating-point allowance for the monotonicity test.
inline constexpr double monotone_rel_slack = 1e-9;
inline constexpr double monotone_abs_slack = 1e-24;

inline RateVerdict check_rate(const RunRecord& rec, double gamma) {
  RateVerdict v;
  std::vector<const RunRow*> rows;
  for (const auto& r : rec.rows)
    if (!std::isnan(r.fp_res_sq)) rows.push_back(&r);
  if (rows.size() < 2) {
    v.vacuous = true;
    return v;
  }
  const double d0 = rows.front()->dist_sq;
  const double c = gamma / (1.0 - gamma);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = *rows[r];
    if (r > 0) {
      const double prev = rows[r - 1]->fp_res_sq;
      if (row.fp_res_sq > prev * (1.0 + monotone_rel_slack) + monotone_abs_slack && v.monotone) {
        v.monotone = false;
        v.failing_k = row.k;
        v.detail = "fixed-point residual increased at k=" + std::to_string(row.k);
      }
    }
    if (!std::isnan(d0) && row.fp_res_sq > c * d0 / static_cast<double>(row.k + 1) + monotone_abs_slack &&
        v.bound) {
      v.bound = false;
      if (v.failing_k < 0) v.failing_k = row.k;
      v.detail += " rate bound violated at k=" + std::to_string(row.k);
    }
  }
  v.ok = v.monotone && v.bound;

  const long K = rows.back()->k;
  if (K >= 1000) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto* r : rows) {
      if (r->k < K / 10 || r->k < 1 || !(r->fp_res_sq > 0.0)) continue;
      const double lx = std::log(static_cast<double>(r->k + 1)), ly = std::log(r->fp_res_sq);
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
      ++cnt;
    }
    if (cnt >= 2) v.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  } else {
    v.vacuous = true;
  }
  return v;
}

// ---------------------------------------------------------------------------

struct KktReport {
  double stationarity = 0.0;   // max_i ||x_i - P(x_i - grad_i - A_i^T u_i)||
  double local_dual = 0.0;     // max_i ||u_i - P_+(u_i + A_i x_i - b_i - sum E_ij w_ij,i)||
  double min_multiplier = 0.0;  // must be >= -tol
  double infeasibility = 0.0;  // max(0, max(sum A x - sum b))
  double complementarity = 0.0;
  double complementarity_scale = 1.0;
  double u_consensus = 0.0;    // max over edges ||u_i - u_j||
  double w_consensus = 0.0;    // max over edges ||w_ij,i - w_ij,j||
  bool stationarity_ok = false, local_dual_ok = false, nonneg_ok = false, feasible_ok = false,
       complementarity_ok = false, consensus_ok = false;
  bool ok = false;

  [[nodiscard]] std::string summary() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "stationarity=%.3e local_dual=%.3e min_u=%.3e infeas=%.3e compl=%.3e "
                  "u_cons=%.3e w_cons=%.3e -> %s",
                  stationarity, local_dual, min_multiplier, infeasibility, complementarity,
                  u_consensus, w_consensus, ok ? "pass" : "fail");
    return buf;
  }
};

inline KktReport check_kkt(const PrimalDualState& s, const GameSpec& game, const CommGraph& graph,
                           double tol) {
  s.check(game, graph);
  KktReport r;
  const int m = game.players(), q = game.coupling_rows();
  for (int i = 0; i < m; ++i) {
    const auto off = game.offset(i), ni = game.dim(i);
    const Vec xi = s.x.segment(off, ni);
    const Vec ui = s.u.segment(i * q, q);
    const Vec g = game.gradient(s.x, i) + game.coupling(i).transpose() * ui;
    const auto& box = game.local_set(i);
    r.stationarity = std::max(r.stationarity, (xi - project_box(xi - g, box.lo, box.hi)).norm());

    Vec v = game.coupling(i) * xi - game.rhs(i);
    for (const auto& inc : graph.incident(i))
      v -= inc.sign * s.w.segment(PrimalDualState::w_offset(graph, i, inc.edge, q), q);
    r.local_dual = std::max(r.local_dual, (ui - project_nonneg(ui + v)).norm());
  }
  r.min_multiplier = q > 0 && m > 0 ? s.u.minCoeff() : 0.0;

  const Vec slack = game.total_rhs() - game.coupling_load(s.x);
  r.infeasibility = q > 0 ? std::max(0.0, -slack.minCoeff()) : 0.0;
  const auto [ug, spread] = consensus_multiplier(s.u, m, q);
  r.complementarity = std::abs(ug.dot(slack));
  r.complementarity_scale = (1.0 + ug.norm()) * (1.0 + slack.norm());

  for (int e = 0; e < graph.edge_count(); ++e) {
    const auto& ed = graph.edge(e);
    r.u_consensus = std::max(r.u_consensus, (s.u.segment(ed.i * q, q) - s.u.segment(ed.j * q, q)).norm());
    r.w_consensus =
        std::max(r.w_consensus, (s.w.segment(2 * e * q, q) - s.w.segment(2 * e * q + q, q)).norm());
  }

  r.stationarity_ok = r.stationarity <= tol;
  r.local_dual_ok = r.local_dual <= tol;
  r.nonneg_ok = r.min_multiplier >= -tol;
  r.feasible_ok = r.infeasibility <= tol;
  r.complementarity_ok = r.complementarity <= tol * r.complementarity_scale;
  r.consensus_ok = r.u_consensus <= 10.0 * tol && r.w_consensus <= 10.0 * tol;
  r.ok = r.stationarity_ok && r.local_dual_ok && r.nonneg_ok && r.feasible_ok &&
         r.complementarity_ok && r.consensus_ok;
  return r;
}

}  // namespace gne
