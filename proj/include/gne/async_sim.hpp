#pragma once

// Randomized single-player activations with bounded-delay reads.

#include "gne/diagnostics.hpp"
#include "gne/model.hpp"
#include "gne/stepsizes.hpp"
#include "gne/sync_solver.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace gne {

/// Index bookkeeping for the variables owned by each player: x_i, u_i and the
/// w-halves of its incident edges. Blocks are laid out in that order.
class OwnedBlocks {
 public:
  OwnedBlocks() = default;
  OwnedBlocks(const GameSpec& game, const CommGraph& graph) : q_(game.coupling_rows()) {
    const int n = game.total_dim(), m = game.players();
    for (int i = 0; i < m; ++i) {
      Layout l;
      l.x_off = game.offset(i);
      l.x_len = game.dim(i);
      l.u_off = i * q_;
      for (const auto& c : graph.incident(i))
        l.w_offs.push_back(PrimalDualState::w_offset(graph, i, c.edge, q_));
      l.size = l.x_len + q_ + static_cast<int>(l.w_offs.size()) * q_;
      std::vector<int> ix;
      for (int t = 0; t < l.x_len; ++t) ix.push_back(l.x_off + t);
      for (int t = 0; t < q_; ++t) ix.push_back(n + l.u_off + t);
      for (int w : l.w_offs)
        for (int t = 0; t < q_; ++t) ix.push_back(n + m * q_ + w + t);
      layout_.push_back(std::move(l));
      idx_.push_back(std::move(ix));
    }
  }

  [[nodiscard]] int players() const { return static_cast<int>(layout_.size()); }
  /// Positions of player i's variables in the stacked vector.
  [[nodiscard]] const std::vector<int>& indices(int i) const { return idx_[i]; }

  [[nodiscard]] Vec gather(const PrimalDualState& U, int i) const {
    const auto& l = layout_[i];
    Vec b(l.size);
    b.head(l.x_len) = U.x.segment(l.x_off, l.x_len);
    b.segment(l.x_len, q_) = U.u.segment(l.u_off, q_);
    int p = l.x_len + q_;
    for (int w : l.w_offs) {
      b.segment(p, q_) = U.w.segment(w, q_);
      p += q_;
    }
    return b;
  }
  void scatter(PrimalDualState& U, int i, const Vec& b) const {
    const auto& l = layout_[i];
    U.x.segment(l.x_off, l.x_len) = b.head(l.x_len);
    U.u.segment(l.u_off, q_) = b.segment(l.x_len, q_);
    int p = l.x_len + q_;
    for (int w : l.w_offs) {
      U.w.segment(w, q_) = b.segment(p, q_);
      p += q_;
    }
  }
  /// Fills `out` (resized to player i's block) piecewise: `f(dst, get)` is
  /// called per segment with `get(S)` returning the matching segment of S.
  template <class F>
  void combine(Vec& out, int i, F&& f) const {
    const auto& l = layout_[i];
    out.resize(l.size);
    f(out.head(l.x_len), [&](const PrimalDualState& S) { return S.x.segment(l.x_off, l.x_len); });
    f(out.segment(l.x_len, q_), [&](const PrimalDualState& S) { return S.u.segment(l.u_off, q_); });
    int p = l.x_len + q_;
    for (int w : l.w_offs) {
      f(out.segment(p, q_), [&](const PrimalDualState& S) { return S.w.segment(w, q_); });
      p += q_;
    }
  }
  void copy(PrimalDualState& dst, const PrimalDualState& src, int i) const {
    const auto& l = layout_[i];
    dst.x.segment(l.x_off, l.x_len) = src.x.segment(l.x_off, l.x_len);
    dst.u.segment(l.u_off, q_) = src.u.segment(l.u_off, q_);
    for (int w : l.w_offs) dst.w.segment(w, q_) = src.w.segment(w, q_);
  }

  [[nodiscard]] Vec gather(const Vec& U, int i) const {
    Vec b(static_cast<Eigen::Index>(idx_[i].size()));
    for (std::size_t t = 0; t < idx_[i].size(); ++t) b[t] = U[idx_[i][t]];
    return b;
  }
  void scatter(Vec& U, int i, const Vec& b) const {
    for (std::size_t t = 0; t < idx_[i].size(); ++t) U[idx_[i][t]] = b[t];
  }
  void copy(Vec& dst, const Vec& src, int i) const {
    for (int t : idx_[i]) dst[t] = src[t];
  }

 private:
  struct Layout {
    int x_off = 0, x_len = 0, u_off = 0, size = 0;
    std::vector<int> w_offs;
  };
  int q_ = 0;
  std::vector<Layout> layout_;
  std::vector<std::vector<int>> idx_;
};

/// Per-player ring of the last eps+1 committed versions. A version is valid
/// from the iteration at which it was committed until the next commit.
class HistoryWindow {
 public:
  HistoryWindow() = default;
  HistoryWindow(const OwnedBlocks& blocks, const PrimalDualState& U0, int eps)
      : depth_(eps + 1), rings_(blocks.players()) {
    for (int i = 0; i < blocks.players(); ++i) rings_[i].push_back({0, blocks.gather(U0, i)});
  }

  [[nodiscard]] int depth() const { return depth_; }

  void commit(int i, long valid_from, const Vec& block) {
    auto& r = rings_[i];
    if (static_cast<int>(r.size()) == depth_) {
      // Reuse the oldest slot.
      auto slot = std::move(r.front());
      r.pop_front();
      slot.first = valid_from;
      slot.second = block;
      r.push_back(std::move(slot));
    } else {
      r.push_back({valid_from, block});
    }
  }

  /// Value of player i's variables at iteration t; t must lie within the
  /// window (at most eps iterations back).
  [[nodiscard]] const Vec& read(int i, long t) const { return entry(i, t).second; }

  /// Commit time and value of the version of player i visible at iteration t.
  [[nodiscard]] const std::pair<long, Vec>& entry(int i, long t) const {
    const auto& r = rings_[i];
    for (auto it = r.rbegin(); it != r.rend(); ++it)
      if (it->first <= t) return *it;
    throw std::out_of_range("history read older than the delay window");
  }

 private:
  int depth_ = 1;
  std::vector<std::deque<std::pair<long, Vec>>> rings_;
};

enum class DelayPolicy { uniform, fixed, geometric };

struct SchedulerConfig {
  std::vector<double> probs;
  std::uint64_t seed = 1;
  DelayPolicy policy = DelayPolicy::uniform;
  int fixed_delay = 0;
  double geometric_p = 0.5;
};

/// Draws the active player and one delay per source player for each activation.
class Scheduler {
 public:
  Scheduler(SchedulerConfig cfg, int eps)
      : cfg_(std::move(cfg)), eps_(eps), rng_(cfg_.seed),
        pick_(cfg_.probs.begin(), cfg_.probs.end()), geo_(cfg_.geometric_p) {
    check_probs(cfg_.probs, static_cast<int>(cfg_.probs.size()));
    if (eps < 0) throw instance_error("delay bound must be non-negative");
    if (cfg_.policy == DelayPolicy::geometric && !(cfg_.geometric_p > 0.0 && cfg_.geometric_p <= 1.0))
      throw instance_error("geometric delay parameter must lie in (0,1]");
    if (cfg_.policy == DelayPolicy::fixed && cfg_.fixed_delay < 0)
      throw instance_error("fixed delay must be non-negative");
  }

  int activation() { return pick_(rng_); }

  /// Delay in [0, min(k, eps)].
  int delay(long k) {
    const int cap = static_cast<int>(std::min<long>(k, eps_));
    switch (cfg_.policy) {
      case DelayPolicy::fixed:
        return std::min(cap, cfg_.fixed_delay);
      case DelayPolicy::geometric:
        return std::min(cap, geo_(rng_));
      case DelayPolicy::uniform:
      default:
        return std::uniform_int_distribution<int>(0, cap)(rng_);
    }
  }

  [[nodiscard]] const SchedulerConfig& config() const { return cfg_; }

 private:
  SchedulerConfig cfg_;
  int eps_;
  std::mt19937_64 rng_;
  std::discrete_distribution<int> pick_;
  std::geometric_distribution<int> geo_;
};

/// Delayed read into V: player j's variables as of iteration k - delays[j].
inline void delayed_state(const OwnedBlocks& blocks, const HistoryWindow& h,
                          const PrimalDualState& Uk, long k, const std::vector<int>& delays,
                          PrimalDualState& V) {
  for (int j = 0; j < blocks.players(); ++j) {
    if (delays[j] > 0)
      blocks.scatter(V, j, h.read(j, k - delays[j]));
    else
      blocks.copy(V, Uk, j);
  }
}

/// Incremental form of delayed_state: `held[j]` is the commit time of the
/// version of player j currently in V, and only changed blocks are rewritten.
inline void refresh_delayed_state(const OwnedBlocks& blocks, const HistoryWindow& h, long k,
                                  const std::vector<int>& delays, std::vector<long>& held,
                                  PrimalDualState& V) {
  for (int j = 0; j < blocks.players(); ++j) {
    const auto& e = h.entry(j, k - delays[j]);
    if (e.first != held[j]) {
      blocks.scatter(V, j, e.second);
      held[j] = e.first;
    }
  }
}

/// New value of player i's variables: U_k,i + eta_i (T(V)_i - V_i), written
/// into `out`. `scratch` must have the state dimensions; its block i is
/// overwritten.
inline void relaxed_block_into(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                               const OwnedBlocks& blocks, const PrimalDualState& Uk,
                               const PrimalDualState& V, int i, Variant variant,
                               PrimalDualState& scratch, Vec& out) {
  player_map(game, graph, s, V, i, variant, scratch);
  const double eta = s.eta_i(i);
  blocks.combine(out, i, [&](auto dst, auto get) {
    dst = get(Uk) + eta * (get(scratch) - get(V));
  });
}

inline Vec relaxed_block(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                         const OwnedBlocks& blocks, const PrimalDualState& Uk,
                         const PrimalDualState& V, int i, Variant variant,
                         PrimalDualState& scratch) {
  Vec out;
  relaxed_block_into(game, graph, s, blocks, Uk, V, i, variant, scratch, out);
  return out;
}

struct AsyncStepInfo {
  int active = -1;
  std::vector<int> delays;
  PrimalDualState read;  // delayed vector the active player used
};

/// One activation: draws i_k and delays, reads from history, commits.
inline AsyncStepInfo async_step(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                                const OwnedBlocks& blocks, HistoryWindow& history,
                                Scheduler& sched, long k, PrimalDualState& U,
                                Variant variant = Variant::standard) {
  AsyncStepInfo info;
  info.active = sched.activation();
  info.delays.resize(game.players());
  for (int j = 0; j < game.players(); ++j) info.delays[j] = sched.delay(k);
  info.read = U;
  delayed_state(blocks, history, U, k, info.delays, info.read);
  PrimalDualState scratch = U;
  Vec next = relaxed_block(game, graph, s, blocks, U, info.read, info.active, variant, scratch);
  blocks.scatter(U, info.active, next);
  history.commit(info.active, k + 1, std::move(next));
  return info;
}

inline AsyncStepInfo async_fb_step(const GameSpec& game, const CommGraph& graph,
                                   const StepSizes& s, const OwnedBlocks& blocks,
                                   HistoryWindow& history, Scheduler& sched, long k,
                                   PrimalDualState& U) {
  return async_step(game, graph, s, blocks, history, sched, k, U, Variant::forward_backward);
}

// ---------------------------------------------------------------------------

/// ||U_k - U*||^2 + sqrt(p_min / kappa) sum_{t=0}^{eps-1} (t+1) ||tail[t] - tail[t+1]||^2,
/// all in the T_S metric; tail[eps] is U_k.
inline double phi_metric(const std::vector<Vec>& tail, const Vec& Ustar, const Vec& weights,
                         double p_min, double kappa_ts) {
  if (tail.empty()) throw std::invalid_argument("phi metric needs a non-empty tail");
  const double c = std::sqrt(p_min / kappa_ts);
  double v = norm_sq_w(tail.back() - Ustar, weights);
  for (std::size_t t = 0; t + 1 < tail.size(); ++t)
    v += c * static_cast<double>(t + 1) * norm_sq_w(tail[t] - tail[t + 1], weights);
  return v;
}

/// Indices d in [k - delays[j], k-1] at which player j was active, over all j.
/// `acts[t]` is the activation at iteration k - eps + t.
inline std::vector<long> missing_updates(long k, int eps, const std::vector<int>& acts,
                                         const std::vector<int>& delays) {
  std::vector<long> J;
  for (long d = k - eps; d < k; ++d) {
    if (d < 0) continue;
    const int who = acts[static_cast<std::size_t>(d - (k - eps))];
    if (who >= 0 && d >= k - delays[who]) J.push_back(d);
  }
  return J;
}

struct AsyncOptions {
  Variant variant = Variant::standard;
  /// Check that the delayed read equals U_k + sum_{d in J(k)} (U_d - U_{d+1})
  /// at every iteration (keeps eps+1 full iterates).
  bool check_delay_identity = false;
  std::ostream* debug_log = nullptr;  // line-delimited (k, i_k, delays, J(k)) records
};

struct AsyncResult {
  PrimalDualState state;
  RunRecord record;
  long identity_checks = 0;
  long identity_failures = 0;
  double identity_max_error = 0.0;
};

/// Floating-point allowance for the delay identity (the telescoping sum is
/// not bit-exact).
inline constexpr double delay_identity_tol = 1e-12;

/// Runs until the primal residual against `ref` drops below stop.tol, or for
/// stop.max_iter activations.
inline AsyncResult async_run(const GameSpec& game, const CommGraph& graph, const StepSizes& s,
                             std::optional<PrimalDualState> init, SchedulerConfig sched_cfg,
                             const StopRule& stop, const Reference* ref = nullptr,
                             const AsyncOptions& opt = {}) {
  check_shapes(s, game, graph);
  const int m = game.players(), q = game.coupling_rows(), eps = s.eps;
  PrimalDualState U = init ? std::move(*init) : PrimalDualState::initial(game, graph);
  U.check(game, graph);

  AsyncResult res;
  res.record.mode = opt.variant == Variant::standard ? "async" : "async-fb";
  const OwnedBlocks blocks(game, graph);
  HistoryWindow history(blocks, U, eps);
  Scheduler sched(std::move(sched_cfg), eps);
  const Vec wts = metric_weights(game, graph, s);
  const double kts = metric_condition(wts);
  const double phi_c = std::sqrt(s.p_min() / kts);

  std::vector<Vec> wblock(m), star(m);
  for (int i = 0; i < m; ++i) wblock[i] = blocks.gather(wts, i);
  std::vector<double> primal(m, 0.0), dual(m, 0.0), dist(m, 0.0);
  auto refresh = [&](int i, const Vec& blk) {
    if (!ref) return;
    const auto off = game.offset(i), ni = game.dim(i);
    primal[i] = primal_term(blk.head(ni), ref->x.segment(off, ni), &res.record.primal_absolute);
    dual[i] = dual_term(blk.segment(ni, q), ref->u_g, m, &res.record.dual_absolute);
    dist[i] = (blk - star[i]).cwiseAbs2().dot(wblock[i]);
  };
  if (ref) {
    for (int i = 0; i < m; ++i) star[i] = blocks.gather(ref->U, i);
    for (int i = 0; i < m; ++i) refresh(i, blocks.gather(U, i));
  }
  auto total = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t;
  };

  std::deque<double> steps;  // ||U_d - U_{d+1}||^2 for the last eps iterations
  auto phi_now = [&] {
    double v = total(dist);
    const auto L = static_cast<long>(steps.size());
    for (long t = 0; t < L; ++t) v += phi_c * static_cast<double>(eps - L + t + 1) * steps[t];
    return v;
  };

  std::deque<Vec> past;  // U_{k-eps..k}, only for the identity check
  std::deque<int> acts;  // i_{k-eps..k-1}
  if (opt.check_delay_identity) past.push_back(U.stacked());

  const long stride = std::max<long>(1, stop.record_stride);
  PrimalDualState V = U, scratch = U;
  Vec next, cur;
  std::vector<long> held(static_cast<std::size_t>(m), 0);
  std::vector<int> delays(m);
  long k = 0;
  bool done = ref && total(primal) <= stop.tol;
  for (; k < stop.max_iter && !done; ++k) {
    RunRow row;
    const bool keep = k % stride == 0;
    if (keep && ref) {
      row.primal = total(primal);
      row.dual = total(dual);
      row.dist_sq = total(dist);
      row.phi = phi_now();
    }

    const int i = sched.activation();
    int maxd = 0;
    for (int j = 0; j < m; ++j) maxd = std::max(maxd, delays[j] = sched.delay(k));
    refresh_delayed_state(blocks, history, k, delays, held, V);

    if (opt.check_delay_identity || opt.debug_log) {
      std::vector<int> a(static_cast<std::size_t>(eps), -1);
      for (std::size_t t = 0; t < acts.size(); ++t) a[eps - acts.size() + t] = acts[t];
      const auto J = missing_updates(k, eps, a, delays);
      if (opt.check_delay_identity) {
        const Vec Uk = U.stacked();
        Vec recon = Uk;
        const long first = k - static_cast<long>(past.size()) + 1;
        for (long d : J) {
          const auto pd = static_cast<std::size_t>(d - first);
          recon += past[pd] - past[pd + 1];
        }
        const double err = (recon - V.stacked()).lpNorm<Eigen::Infinity>();
        const double scale = 1.0 + Uk.lpNorm<Eigen::Infinity>();
        res.identity_checks++;
        res.identity_max_error = std::max(res.identity_max_error, err / scale);
        if (err > delay_identity_tol * scale) res.identity_failures++;
      }
      if (opt.debug_log) {
        auto& os = *opt.debug_log;
        os << "{\"k\":" << k << ",\"i\":" << i << ",\"delays\":[";
        for (int j = 0; j < m; ++j) os << (j ? "," : "") << delays[j];
        os << "],\"J\":[";
        for (std::size_t t = 0; t < J.size(); ++t) os << (t ? "," : "") << J[t];
        os << "]}\n";
      }
    }

    relaxed_block_into(game, graph, s, blocks, U, V, i, opt.variant, scratch, next);
    blocks.combine(cur, i, [&](auto dst, auto get) { dst = get(U); });
    const double step_sq = (next - cur).cwiseAbs2().dot(wblock[i]);
    blocks.scatter(U, i, next);
    refresh(i, next);
    history.commit(i, k + 1, next);

    if (keep) {
      row.k = k;
      row.fp_res_sq = step_sq;
      row.activation = i;
      row.max_delay = maxd;
      res.record.rows.push_back(row);
    }
    if (!std::isfinite(step_sq)) {
      ++k;
      break;
    }
    if (eps > 0) {
      steps.push_back(step_sq);
      if (static_cast<int>(steps.size()) > eps) steps.pop_front();
    }
    if (opt.check_delay_identity) {
      past.push_back(U.stacked());
      acts.push_back(i);
      if (static_cast<int>(past.size()) > eps + 1) past.pop_front();
      if (static_cast<int>(acts.size()) > eps) acts.pop_front();
    }
    if (ref && total(primal) <= stop.tol) done = true;
  }
  res.record.converged = done;
  res.record.iterations = k;
  RunRow last;
  last.k = k;
  if (ref) {
    last.primal = res.record.final_primal = total(primal);
    last.dual = res.record.final_dual = total(dual);
    last.dist_sq = total(dist);
    last.phi = phi_now();
  }
  res.record.rows.push_back(last);
  res.state = std::move(U);
  return res;
}

// ---------------------------------------------------------------------------

/// A window of committed iterates with the activations that produced them and
/// the delays the next activation will use.
struct HistoryState {
  long k = 0;               // index of the newest iterate
  std::vector<Vec> tail;    // stacked U_{k-eps..k} (eps+1 entries)
  std::vector<int> acts;    // i_{k-eps..k-1} (eps entries, -1 before time 0)
  std::vector<int> delays;  // per source player, each in [0, min(k, eps)]
};

/// Runs `k` activations from U0 and captures the final window together with
/// a fresh delay draw. Iterates before time 0 repeat U0.
inline HistoryState capture_history(const GameSpec& game, const CommGraph& graph,
                                    const StepSizes& s, const PrimalDualState& U0,
                                    SchedulerConfig cfg, long k,
                                    Variant variant = Variant::standard) {
  const int eps = s.eps;
  const OwnedBlocks blocks(game, graph);
  HistoryWindow hist(blocks, U0, eps);
  Scheduler sched(std::move(cfg), eps);
  PrimalDualState U = U0;
  std::deque<Vec> tail(static_cast<std::size_t>(eps + 1), U0.stacked());
  std::deque<int> acts(static_cast<std::size_t>(eps), -1);
  for (long t = 0; t < k; ++t) {
    const auto info = async_step(game, graph, s, blocks, hist, sched, t, U, variant);
    tail.push_back(U.stacked());
    tail.pop_front();
    if (eps > 0) {
      acts.push_back(info.active);
      acts.pop_front();
    }
  }
  HistoryState h;
  h.k = k;
  h.tail.assign(tail.begin(), tail.end());
  h.acts.assign(acts.begin(), acts.end());
  for (int j = 0; j < game.players(); ++j) h.delays.push_back(sched.delay(k));
  return h;
}

struct ExpectationReport {
  double lhs23 = 0, rhs23 = 0, slack23 = 0;  // distance bound
  double lhs25 = 0, rhs25 = 0, slack25 = 0;  // Phi-metric decrease
  std::vector<long> J;
  double c = 0, beta = 0, kappa_ts = 0;
};

/// Exact conditional expectations over the next activation for a fixed window
/// and delay draw, compared with the distance bound (constant c) and the
/// Phi-metric decrease (constant beta).
inline ExpectationReport expected_step_check(const GameSpec& game, const CommGraph& graph,
                                             const StepSizes& s, const HistoryState& h,
                                             const Vec& Ustar, Variant variant = Variant::standard) {
  const int m = game.players(), eps = s.eps;
  if (static_cast<int>(h.tail.size()) != eps + 1)
    throw std::invalid_argument("tail must hold eps+1 iterates");
  const OwnedBlocks blocks(game, graph);
  const Vec wts = metric_weights(game, graph, s);
  ExpectationReport r;
  r.kappa_ts = metric_condition(wts);
  const double pm = s.p_min();
  r.c = m * std::sqrt(pm / r.kappa_ts);
  r.beta = beta_constant(s, r.kappa_ts);

  const Vec& Uk = h.tail.back();
  Vec Vv = Uk;
  for (int j = 0; j < m; ++j) blocks.copy(Vv, h.tail[static_cast<std::size_t>(eps - h.delays[j])], j);
  r.J = missing_updates(h.k, eps, h.acts, h.delays);

  const auto Ukp = PrimalDualState::unstack(Uk, game, graph);
  const auto V = PrimalDualState::unstack(Vv, game, graph);
  PrimalDualState TVp = V;
  sync_map_into(game, graph, s, V, variant, TVp);
  const Vec Utilde = Uk - s.eta * (Vv - TVp.stacked());
  const double surrogate = norm_sq_w(Utilde - Uk, wts);

  double lhs23 = 0.0, lhs25 = 0.0;
  std::vector<Vec> shifted(h.tail.begin() + 1, h.tail.end());
  shifted.push_back(Uk);
  PrimalDualState scratch = V;
  for (int i = 0; i < m; ++i) {
    Vec next = Uk;
    blocks.scatter(next, i, relaxed_block(game, graph, s, blocks, Ukp, V, i, variant, scratch));
    lhs23 += s.probs[i] * norm_sq_w(next - Ustar, wts);
    shifted.back() = next;
    lhs25 += s.probs[i] * phi_metric(shifted, Ustar, wts, pm, r.kappa_ts);
  }

  double jsum = 0.0;
  for (long d : r.J) {
    const auto t = static_cast<std::size_t>(d - (h.k - eps));
    jsum += norm_sq_w(h.tail[t] - h.tail[t + 1], wts);
  }
  const double jn = static_cast<double>(r.J.size());
  r.lhs23 = lhs23;
  r.rhs23 = norm_sq_w(Uk - Ustar, wts) + r.c / m * jsum -
            (1.0 / m) * (1.0 / s.eta - r.kappa_ts / (m * pm) - jn / r.c) * surrogate;
  r.slack23 = r.rhs23 - r.lhs23;
  r.lhs25 = lhs25;
  r.rhs25 = phi_metric(h.tail, Ustar, wts, pm, r.kappa_ts) - r.beta / m * surrogate;
  r.slack25 = r.rhs25 - r.lhs25;
  return r;
}

}  // namespace gne
