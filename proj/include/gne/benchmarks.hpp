#pragma once

// Seeded instance generators and the centralized reference solver.

#include "gne/diagnostics.hpp"
#include "gne/model.hpp"
#include "gne/operators.hpp"
#include "gne/stepsizes.hpp"
#include "gne/sync_solver.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace gne {

/// Ring plus `chords` distinct random extra edges.
inline std::vector<std::pair<int, int>> ring_with_chords(int m, int chords, std::mt19937_64& rng) {
  auto edges = ring_edges(m);
  std::set<std::pair<int, int>> have;
  for (auto [a, b] : edges) have.insert(std::minmax(a, b));
  const long possible = static_cast<long>(m) * (m - 1) / 2;
  std::uniform_int_distribution<int> node(0, std::max(0, m - 1));
  for (int c = 0; c < chords && static_cast<long>(have.size()) < possible;) {
    const int a = node(rng), b = node(rng);
    if (a == b) continue;
    const auto key = std::minmax(a, b);
    if (!have.insert(key).second) continue;
    edges.emplace_back(key.first, key.second);
    ++c;
  }
  return edges;
}

// ---------------------------------------------------------------------------

struct CournotConfig {
  int factories = 10;
  int purchasers = 4;
  std::pair<double, double> g_range{20.0, 50.0};
  std::pair<double, double> rho_range{2.0, 3.0};
  std::pair<double, double> a_range{0.1, 1.0};
  std::pair<double, double> c_range{1.0, 10.0};
  double q_max = 50.0;
  std::vector<double> capacity{30.0, 50.0, 40.0, 20.0};
  int max_links = 2;  // purchasers drawn per factory before the coverage fix-up
  int chords = 2;     // random extra communication edges on top of the ring
  std::uint64_t seed = 1;
  /// Optional fixed procurement structure: links[i] lists the purchasers of factory i.
  std::optional<std::vector<std::vector<int>>> links;
  std::optional<std::vector<std::pair<int, int>>> graph_edges;
};

struct CournotInstance {
  GameSpec game;
  CommGraph graph;
  std::vector<std::vector<int>> links;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> g, rho;        // per purchaser
  std::vector<std::vector<double>> a, c;  // per factory, per link
  std::uint64_t seed_used;

  /// f_i(x) = sum_s a q^2 + c q - (g_s - rho_s Y_s) q over factory i's links.
  [[nodiscard]] double cost(int i, const Vec& x) const {
    Vec load = Vec::Zero(static_cast<Eigen::Index>(g.size()));
    for (int v = 0; v < game.players(); ++v)
      for (std::size_t t = 0; t < links[v].size(); ++t) load[links[v][t]] += x[game.offset(v) + t];
    double f = 0.0;
    for (std::size_t t = 0; t < links[i].size(); ++t) {
      const int s = links[i][t];
      const double qv = x[game.offset(i) + t];
      f += a[i][t] * qv * qv + c[i][t] * qv - (g[s] - rho[s] * load[s]) * qv;
    }
    return f;
  }
};

inline std::vector<std::vector<int>> draw_procurement(int m, int r, int max_links,
                                                      std::mt19937_64& rng) {
  if (r < 1 || m < 2) throw instance_error("procurement needs at least 2 factories and 1 purchaser");
  std::vector<std::vector<int>> links(m);
  std::vector<int> served(r, 0);
  std::uniform_int_distribution<int> deg(1, std::max(1, std::min(max_links, r)));
  for (int i = 0; i < m; ++i) {
    std::vector<int> all(r);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    const int d = deg(rng);
    links[i].assign(all.begin(), all.begin() + d);
  }
  for (const auto& l : links)
    for (int s : l) ++served[s];
  for (int s = 0; s < r; ++s) {
    while (served[s] < 2) {
      // Least-connected factory not yet serving s.
      int best = -1;
      for (int i = 0; i < m; ++i) {
        if (std::find(links[i].begin(), links[i].end(), s) != links[i].end()) continue;
        if (best < 0 || links[i].size() < links[best].size()) best = i;
      }
      links[best].push_back(s);
      ++served[s];
    }
  }
  for (auto& l : links) std::sort(l.begin(), l.end());
  return links;
}

inline CournotInstance gen_cournot(const CournotConfig& cfg) {
  const int m = cfg.factories, r = cfg.purchasers;
  if (static_cast<int>(cfg.capacity.size()) != r)
    throw instance_error("capacity vector must have one entry per purchaser");
  if (!(cfg.q_max > 0.0)) throw instance_error("production cap must be positive");

  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::uint64_t seed = cfg.seed + 7919ULL * attempt;
    std::mt19937_64 rng(seed);
    auto uni = [&](std::pair<double, double> iv) {
      return std::uniform_real_distribution<double>(iv.first, iv.second)(rng);
    };

    CournotInstance inst{};
    inst.seed_used = seed;
    inst.links = cfg.links ? *cfg.links : draw_procurement(m, r, cfg.max_links, rng);
    if (static_cast<int>(inst.links.size()) != m) throw instance_error("links must list every factory");
    for (int s = 0; s < r; ++s) inst.g.push_back(uni(cfg.g_range));
    for (int s = 0; s < r; ++s) inst.rho.push_back(uni(cfg.rho_range));
    inst.a.resize(m);
    inst.c.resize(m);
    for (int i = 0; i < m; ++i)
      for (std::size_t t = 0; t < inst.links[i].size(); ++t) {
        inst.a[i].push_back(uni(cfg.a_range));
        inst.c[i].push_back(uni(cfg.c_range));
      }

    GameDescription d;
    d.coupling_rows = r;
    std::vector<int> offs;
    int n = 0;
    for (int i = 0; i < m; ++i) {
      const auto ni = static_cast<Eigen::Index>(inst.links[i].size());
      if (ni == 0) throw instance_error("every factory must serve at least one purchaser");
      PlayerData p;
      p.box = {Vec::Zero(ni), Vec::Constant(ni, cfg.q_max)};
      p.A = Mat::Zero(r, ni);
      for (Eigen::Index t = 0; t < ni; ++t) {
        const int s = inst.links[i][t];
        if (s < 0 || s >= r) throw instance_error("purchaser index out of range");
        p.A(s, t) = 1.0;
      }
      p.b = Vec(r);
      for (int s = 0; s < r; ++s) p.b[s] = cfg.capacity[s] / m;
      d.players.push_back(std::move(p));
      offs.push_back(n);
      n += static_cast<int>(ni);
    }

    AffineMap F{Mat::Zero(n, n), Vec::Zero(n)};
    for (int i = 0; i < m; ++i)
      for (std::size_t t = 0; t < inst.links[i].size(); ++t) {
        const int row = offs[i] + static_cast<int>(t);
        const int s = inst.links[i][t];
        F.c0[row] = inst.c[i][t] - inst.g[s];
        for (int v = 0; v < m; ++v)
          for (std::size_t tv = 0; tv < inst.links[v].size(); ++tv)
            if (inst.links[v][tv] == s) F.M(row, offs[v] + static_cast<int>(tv)) = inst.rho[s];
        F.M(row, row) = 2.0 * inst.a[i][t] + 2.0 * inst.rho[s];
      }
    d.affine = std::move(F);

    inst.edges = cfg.graph_edges ? *cfg.graph_edges : ring_with_chords(m, cfg.chords, rng);
    inst.game = build_game(std::move(d));
    inst.graph = build_graph(m, inst.edges);
    try {
      estimate_constants(inst.game);
    } catch (const instance_error&) {
      continue;
    }
    return inst;
  }
  throw instance_error("Cournot generator failed to produce a strongly monotone instance in 100 attempts");
}

// ---------------------------------------------------------------------------

struct DemandResponseConfig {
  int users = 6;
  std::pair<double, double> pmin_range{0.0, 1.0};
  std::pair<double, double> pmax_range{3.0, 5.0};
  std::pair<double, double> demand_range{1.0, 3.0};
  std::pair<double, double> curtail_range{0.5, 1.5};  // c_i in c_i (p_i - d_i)^2
  double price_base = 1.0;                            // pi_0
  double price_slope = 0.5;                           // pi_1
  int chords = 1;
  std::uint64_t seed = 1;
  /// Explicit data; any left empty is drawn from the ranges.
  std::vector<double> p_min, p_max, demand, curtail;
  std::optional<std::vector<std::pair<int, int>>> graph_edges;
};

struct DemandResponseInstance {
  GameSpec game;
  CommGraph graph;
  std::vector<double> p_min, p_max, demand, curtail;
  std::vector<std::pair<int, int>> edges;
};

inline DemandResponseInstance gen_demand_response(const DemandResponseConfig& cfg) {
  const int m = cfg.users;
  if (m < 1) throw instance_error("demand response needs at least one user");
  std::mt19937_64 rng(cfg.seed);
  auto fill = [&](const std::vector<double>& given, std::pair<double, double> iv) {
    if (!given.empty()) {
      if (static_cast<int>(given.size()) != m) throw instance_error("per-user data must have length m");
      return given;
    }
    std::vector<double> v;
    std::uniform_real_distribution<double> dist(iv.first, iv.second);
    for (int i = 0; i < m; ++i) v.push_back(dist(rng));
    return v;
  };
  DemandResponseInstance inst{};
  inst.p_min = fill(cfg.p_min, cfg.pmin_range);
  inst.p_max = fill(cfg.p_max, cfg.pmax_range);
  inst.demand = fill(cfg.demand, cfg.demand_range);
  inst.curtail = fill(cfg.curtail, cfg.curtail_range);

  double lo = 0, hi = 0, dem = 0;
  for (int i = 0; i < m; ++i) {
    if (inst.p_min[i] > inst.p_max[i]) throw instance_error("user bounds have p_min > p_max");
    if (!(inst.curtail[i] > 0.0)) throw instance_error("curtailment coefficients must be positive");
    lo += inst.p_min[i], hi += inst.p_max[i], dem += inst.demand[i];
  }
  if (dem < lo || dem > hi)
    throw instance_error("infeasible bounds: total demand outside [sum p_min, sum p_max]");
  if (!(cfg.price_slope >= 0.0)) throw instance_error("price slope must be non-negative");

  GameDescription d;
  d.coupling_rows = 2;
  AffineMap F{Mat::Constant(m, m, cfg.price_slope), Vec(m)};
  Vec hint(m);
  const double t = hi > lo ? (dem - lo) / (hi - lo) : 0.0;
  for (int i = 0; i < m; ++i) {
    PlayerData p;
    p.box = {Vec::Constant(1, inst.p_min[i]), Vec::Constant(1, inst.p_max[i])};
    p.A = Mat(2, 1);
    p.A << 1.0, -1.0;
    p.b = Vec(2);
    p.b << inst.demand[i], -inst.demand[i];
    d.players.push_back(std::move(p));
    F.M(i, i) += 2.0 * inst.curtail[i] + cfg.price_slope;
    F.c0[i] = -2.0 * inst.curtail[i] * inst.demand[i] + cfg.price_base;
    hint[i] = inst.p_min[i] + t * (inst.p_max[i] - inst.p_min[i]);
  }
  d.affine = std::move(F);
  d.feasible_hint = hint;
  inst.edges = cfg.graph_edges ? *cfg.graph_edges : ring_with_chords(m, cfg.chords, rng);
  inst.game = build_game(std::move(d));
  inst.graph = build_graph(m, inst.edges);
  return inst;
}

// ---------------------------------------------------------------------------

class oracle_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExtragradientResult {
  Vec x;
  Vec u;
  long iterations;
  double residual;
};

/// Projected extragradient on the aggregate Lagrangian operator
/// G(x, u) = (F(x) + A^T u, b - A x) over Omega x R^q_+.
inline ExtragradientResult extragradient(const GameSpec& game, double tol = 1e-13,
                                         long max_iter = 5000000) {
  if (!game.affine()) throw std::logic_error("extragradient cross-check needs an affine game");
  const int n = game.total_dim(), q = game.coupling_rows();
  const Mat A = game.aggregate_coupling();
  const Vec bt = game.total_rhs();
  Mat K = Mat::Zero(n + q, n + q);
  K.topLeftCorner(n, n) = game.affine()->M;
  K.topRightCorner(n, q) = A.transpose();
  K.bottomLeftCorner(q, n) = -A;
  Eigen::JacobiSVD<Mat> svd(K);
  const double h = 0.9 / svd.singularValues()(0);
  const Vec lo = game.lower(), hi = game.upper();

  auto G = [&](const Vec& z) {
    Vec g(n + q);
    g.head(n) = game.pseudogradient(z.head(n)) + A.transpose() * z.tail(q);
    g.tail(q) = bt - A * z.head(n);
    return g;
  };
  auto P = [&](Vec z) {
    z.head(n) = project_box(z.head(n), lo, hi);
    z.tail(q) = project_nonneg(z.tail(q));
    return z;
  };

  Vec z = Vec::Zero(n + q);
  z.head(n) = 0.5 * (lo + hi);
  double res = INFINITY;
  long k = 0;
  for (; k < max_iter; ++k) {
    const Vec y = P(z - h * G(z));
    res = (z - y).lpNorm<Eigen::Infinity>() / h;
    if (res <= tol * (1.0 + z.lpNorm<Eigen::Infinity>())) break;
    z = P(z - h * G(y));
  }
  return {z.head(n), z.tail(q), k, res};
}

struct OracleResult {
  Reference ref;
  long sync_iterations = 0;
  bool cross_checked = false;
  double agreement = absent;  // relative gap between the two solvers' x*
  double multiplier_gap = absent;
};

inline constexpr double oracle_tol = 1e-11;
inline constexpr long oracle_max_iter = 10000000;
inline constexpr double oracle_agreement = 1e-6;
inline constexpr double oracle_failure = 1e-5;

inline OracleResult solve_oracle(const GameSpec& game, const CommGraph& graph, const StepSizes& s) {
  StopRule stop;
  stop.tol = oracle_tol;
  stop.max_iter = oracle_max_iter;
  stop.record_stride = oracle_max_iter;
  auto run = sync_run(game, graph, s, std::nullopt, stop);
  if (!run.record.converged)
    throw oracle_error("reference solver did not reach tolerance within the iteration budget");

  OracleResult out;
  out.ref = make_reference(run.state, game);
  out.sync_iterations = run.record.iterations;
  if (game.affine()) {
    const auto eg = extragradient(game);
    const double scale = std::max(out.ref.x.norm(), 1e-300);
    out.agreement = (eg.x - out.ref.x).norm() / (out.ref.x.norm() > 0 ? scale : 1.0);
    out.multiplier_gap = (eg.u - out.ref.u_g).norm() / std::max(1.0, out.ref.u_g.norm());
    out.cross_checked = true;
    if (out.agreement > oracle_failure)
      throw oracle_error("reference solvers disagree: relative gap " + std::to_string(out.agreement));
  }
  return out;
}

}  // namespace gne
