#pragma once

// Synchronous distributed iteration and its forward-backward variant.

#include "gne/diagnostics.hpp"
#include "gne/model.hpp"
#include "gne/operators.hpp"
#include "gne/stepsizes.hpp"

#include <cmath>
#include <optional>

namespace gne {

enum class Variant { standard, forward_backward };

/// Player i's share of the prediction triple.
struct PlayerPrediction {
  Vec xbar;
  Vec ubar;
  std::vector<Vec> wbar;  // one per incidence, in incident(i) order
};

/// Evaluates player i's block of the fixed-point map on the read state `V` and
/// writes it into `out` (x_i, u_i and the w-halves owned by i). Only data of
/// player i and its neighbors, plus the profile x for the gradient, is read.
inline void player_map(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                       const PrimalDualState& V, int i, Variant variant, PrimalDualState& out,
                       PlayerPrediction* pred = nullptr) {
  const int q = game.coupling_rows();
  const auto off = game.offset(i), ni = game.dim(i);
  const auto& inc = graph.incident(i);
  const bool fb = variant == Variant::forward_backward;
  const auto deg = static_cast<Eigen::Index>(inc.size());

  // Reused across calls; the async loop calls this once per activation.
  thread_local Vec acc, wbar, ubar, g, xbar;
  acc.resize(q);
  wbar.resize(deg * q);
  g.resize(ni);

  const auto ui = V.u.segment(i * q, q);
  acc.noalias() = game.coupling(i) * V.x.segment(off, ni);
  acc -= game.rhs(i);
  for (Eigen::Index t = 0; t < deg; ++t) {
    const auto& c = inc[static_cast<std::size_t>(t)];
    const double k = s.kappa[c.edge];
    const auto own = V.w.segment(PrimalDualState::w_offset(graph, i, c.edge, q), q);
    const auto other = V.w.segment(PrimalDualState::w_offset(graph, c.neighbor, c.edge, q), q);
    const auto uj = V.u.segment(c.neighbor * q, q);
    auto wb = wbar.segment(t * q, q);
    wb = 0.5 * (own + other) + (0.5 * k * c.sign) * (ui - uj);
    if (fb)
      acc -= c.sign * (2.0 * wb - own);
    else
      acc -= c.sign * wb;
  }
  ubar = (ui + s.sigma[i] * acc).cwiseMax(0.0);

  game.gradient(V.x, i, g);
  const auto& Ai = game.coupling(i);
  if (fb)
    g.noalias() += Ai.transpose() * (2.0 * ubar - ui);
  else
    g.noalias() += Ai.transpose() * ubar;
  const auto& box = game.local_set(i);
  xbar = (V.x.segment(off, ni) - s.tau[i] * g).cwiseMax(box.lo).cwiseMin(box.hi);

  out.x.segment(off, ni) = xbar;
  if (fb) {
    out.u.segment(i * q, q) = ubar;
    for (Eigen::Index t = 0; t < deg; ++t)
      out.w.segment(PrimalDualState::w_offset(graph, i, inc[t].edge, q), q) = wbar.segment(t * q, q);
  } else {
    auto uo = out.u.segment(i * q, q);
    uo = ubar;
    uo.noalias() += s.sigma[i] * (Ai * (xbar - V.x.segment(off, ni)));
    for (Eigen::Index t = 0; t < deg; ++t)
      out.w.segment(PrimalDualState::w_offset(graph, i, inc[t].edge, q), q) =
          wbar.segment(t * q, q) + (s.kappa[inc[t].edge] * inc[t].sign) * (ubar - ui);
  }
  if (pred) {
    pred->xbar = xbar;
    pred->ubar = ubar;
    pred->wbar.clear();
    for (Eigen::Index t = 0; t < deg; ++t) pred->wbar.emplace_back(wbar.segment(t * q, q));
  }
}

struct SyncStepResult {
  PrimalDualState next;
  std::vector<PlayerPrediction> pred;
};

/// One synchronous iteration: every player predicts from iteration-k data,
/// then corrects.
inline SyncStepResult sync_step(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                                const PrimalDualState& U) {
  U.check(game, graph);
  SyncStepResult r{U, std::vector<PlayerPrediction>(game.players())};
  for (int i = 0; i < game.players(); ++i)
    player_map(game, graph, s, U, i, Variant::standard, r.next, &r.pred[i]);
  return r;
}

inline PrimalDualState sync_fb_step(const GameSpec& game, const CommGraph& graph,
                                    const StepSizes& s, const PrimalDualState& U) {
  U.check(game, graph);
  PrimalDualState next = U;
  for (int i = 0; i < game.players(); ++i)
    player_map(game, graph, s, U, i, Variant::forward_backward, next);
  return next;
}

/// Sweep of the chosen map without allocating a fresh state.
inline void sync_map_into(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                          const PrimalDualState& U, Variant v, PrimalDualState& out) {
  for (int i = 0; i < game.players(); ++i) player_map(game, graph, s, U, i, v, out);
}

enum class StopOn { fixed_point, primal };

struct StopRule {
  double tol = 1e-8;
  /// Synchronous runs only; async runs always stop on the primal residual.
  /// Stopping on the primal residual needs a reference.
  StopOn on = StopOn::fixed_point;
  long max_iter = 1000000;
  long record_stride = 1;  // keep every stride-th row (the final row is always kept)
};

struct SyncResult {
  PrimalDualState state;
  RunRecord record;
};

/// Iterates until ||U_k - U_{k+1}||_{T_S} <= tol (or the primal residual of
/// U_{k+1} drops below tol). When a reference is given, rows carry the
/// distance and residuals relative to it.
inline SyncResult sync_run(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                           std::optional<PrimalDualState> init, const StopRule& stop,
                           const Reference* ref = nullptr, Variant variant = Variant::standard) {
  if (stop.on == StopOn::primal && !ref)
    throw std::invalid_argument("stopping on the primal residual needs a reference");
  PrimalDualState U = init ? std::move(*init) : PrimalDualState::initial(game, graph);
  U.check(game, graph);
  const Vec wts = metric_weights(game, graph, s);
  const Vec Ustar = ref ? ref->U.stacked() : Vec();

  SyncResult res{U, {}};
  res.record.mode = variant == Variant::standard ? "sync" : "sync-fb";
  PrimalDualState next = U;
  const long stride = std::max<long>(1, stop.record_stride);

  auto row_for = [&](long k, const PrimalDualState& S, double fp) {
    RunRow row;
    row.k = k;
    row.fp_res_sq = fp;
    if (ref) {
      row.dist_sq = norm_sq_w(S.stacked() - Ustar, wts);
      const auto r = residuals(S, game, *ref);
      row.primal = r.primal;
      row.dual = r.dual;
      res.record.primal_absolute |= r.primal_absolute;
      res.record.dual_absolute |= r.dual_absolute;
    }
    return row;
  };

  long k = 0;
  for (; k < stop.max_iter; ++k) {
    sync_map_into(game, graph, s, U, variant, next);
    const double fp = norm_sq_w(U.stacked() - next.stacked(), wts);
    if (!std::isfinite(fp)) break;
    if (k % stride == 0) res.record.rows.push_back(row_for(k, U, fp));
    std::swap(U, next);
    const bool hit = stop.on == StopOn::primal ? residuals(U, game, *ref).primal <= stop.tol
                                               : std::sqrt(fp) <= stop.tol;
    if (hit) {
      res.record.converged = true;
      ++k;
      break;
    }
  }
  res.record.iterations = k;
  res.record.rows.push_back(row_for(k, U, absent));
  if (ref) {
    res.record.final_primal = res.record.rows.back().primal;
    res.record.final_dual = res.record.rows.back().dual;
  }
  res.state = std::move(U);
  return res;
}

}  // namespace gne
