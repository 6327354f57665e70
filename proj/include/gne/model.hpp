#pragma once

// Game instances, communication graphs and primal-dual iterates.

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gne {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when an instance, graph or parameter set breaks a standing assumption.
class instance_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box [lo, hi] used as a player's local feasible set.
struct Box {
  Vec lo;
  Vec hi;

  [[nodiscard]] Eigen::Index size() const { return lo.size(); }
  [[nodiscard]] Vec center() const { return 0.5 * (lo + hi); }
  [[nodiscard]] bool contains(const Vec& z, double tol = 0.0) const {
    return ((z.array() >= lo.array() - tol) && (z.array() <= hi.array() + tol)).all();
  }
};

/// Writes grad_{x_i} f_i(x) into `out` (length n_i).
using GradientOracle =
    std::function<void(const Vec& x, int player, Eigen::Ref<Vec> out)>;

/// Stacked pseudogradient F(x) = M x + c0.
struct AffineMap {
  Mat M;
  Vec c0;
};

struct PlayerData {
  Box box;
  Mat A;  // q x n_i
  Vec b;  // q
};

/// Everything needed to build a GameSpec. `grad` may be left empty when
/// `affine` is given; the oracle is then derived from the affine map.
struct GameDescription {
  int coupling_rows = 0;
  std::vector<PlayerData> players;
  GradientOracle grad;
  std::optional<AffineMap> affine;
  /// Extra candidate for the feasibility probe (e.g. supplied by a generator
  /// for equality-type couplings where corners and centers never fit).
  std::optional<Vec> feasible_hint;
};

class GameSpec;
GameSpec build_game(GameDescription desc);

/// Validated m-player game with box local sets and coupling sum_i A_i x_i <= sum_i b_i.
class GameSpec {
 public:
  GameSpec() = default;

  [[nodiscard]] int players() const { return static_cast<int>(players_.size()); }
  [[nodiscard]] int coupling_rows() const { return q_; }
  [[nodiscard]] int dim(int i) const { return static_cast<int>(players_[i].box.size()); }
  [[nodiscard]] int offset(int i) const { return offsets_[i]; }
  [[nodiscard]] int total_dim() const { return n_; }

  [[nodiscard]] const Box& local_set(int i) const { return players_[i].box; }
  [[nodiscard]] const Mat& coupling(int i) const { return players_[i].A; }
  [[nodiscard]] const Vec& rhs(int i) const { return players_[i].b; }
  [[nodiscard]] const std::vector<PlayerData>& player_data() const { return players_; }
  [[nodiscard]] const std::optional<AffineMap>& affine() const { return affine_; }

  void gradient(const Vec& x, int i, Eigen::Ref<Vec> out) const { grad_(x, i, out); }

  [[nodiscard]] Vec gradient(const Vec& x, int i) const {
    Vec g(dim(i));
    grad_(x, i, g);
    return g;
  }

  [[nodiscard]] Vec pseudogradient(const Vec& x) const {
    Vec F(n_);
    for (int i = 0; i < players(); ++i) grad_(x, i, F.segment(offsets_[i], dim(i)));
    return F;
  }

  /// sum_i b_i
  [[nodiscard]] Vec total_rhs() const {
    Vec s = Vec::Zero(q_);
    for (const auto& p : players_) s += p.b;
    return s;
  }

  /// sum_i A_i x_i
  [[nodiscard]] Vec coupling_load(const Vec& x) const {
    Vec s = Vec::Zero(q_);
    for (int i = 0; i < players(); ++i) s += players_[i].A * x.segment(offsets_[i], dim(i));
    return s;
  }

  /// Stacked box bounds.
  [[nodiscard]] Vec lower() const { return stack([](const Box& b) { return b.lo; }); }
  [[nodiscard]] Vec upper() const { return stack([](const Box& b) { return b.hi; }); }

  /// Dense [A_1 ... A_m] (q x n).
  [[nodiscard]] Mat aggregate_coupling() const {
    Mat A(q_, n_);
    for (int i = 0; i < players(); ++i) A.middleCols(offsets_[i], dim(i)) = players_[i].A;
    return A;
  }

  [[nodiscard]] bool feasible(const Vec& x, double tol = 1e-9) const {
    for (int i = 0; i < players(); ++i)
      if (!players_[i].box.contains(x.segment(offsets_[i], dim(i)), tol)) return false;
    return ((coupling_load(x) - total_rhs()).array() <= tol).all();
  }

 private:
  friend GameSpec build_game(GameDescription desc);

  template <class F>
  Vec stack(F&& get) const {
    Vec v(n_);
    for (int i = 0; i < players(); ++i) v.segment(offsets_[i], dim(i)) = get(players_[i].box);
    return v;
  }

  int q_ = 0;
  int n_ = 0;
  std::vector<int> offsets_;
  std::vector<PlayerData> players_;
  GradientOracle grad_;
  std::optional<AffineMap> affine_;
};

inline GradientOracle affine_oracle(std::shared_ptr<const AffineMap> map,
                                    std::vector<int> offsets) {
  return [map = std::move(map), offsets = std::move(offsets)](const Vec& x, int i,
                                                               Eigen::Ref<Vec> out) {
    const auto rows = out.size();
    out.noalias() = map->M.middleRows(offsets[i], rows) * x;
    out += map->c0.segment(offsets[i], rows);
  };
}

inline GameSpec build_game(GameDescription desc) {
  if (desc.players.empty()) throw instance_error("game needs at least one player");
  if (desc.coupling_rows < 0) throw instance_error("coupling row count must be non-negative");
  const int q = desc.coupling_rows;

  GameSpec g;
  g.q_ = q;
  int off = 0;
  for (std::size_t i = 0; i < desc.players.size(); ++i) {
    const auto& p = desc.players[i];
    const auto ni = p.box.lo.size();
    const auto who = "player " + std::to_string(i);
    if (ni <= 0) throw instance_error(who + ": decision dimension must be positive");
    if (p.box.hi.size() != ni) throw instance_error(who + ": box bounds differ in length");
    if (!p.box.lo.allFinite() || !p.box.hi.allFinite())
      throw instance_error(who + ": local set must be compact (finite bounds)");
    if ((p.box.lo.array() > p.box.hi.array()).any())
      throw instance_error(who + ": box has lo > hi");
    if (p.A.rows() != q || p.A.cols() != ni)
      throw instance_error(who + ": coupling matrix must be q x n_i");
    if (p.b.size() != q) throw instance_error(who + ": coupling offset must have length q");
    g.offsets_.push_back(off);
    off += static_cast<int>(ni);
  }
  g.n_ = off;
  g.players_ = std::move(desc.players);

  if (desc.affine) {
    const auto& a = *desc.affine;
    if (a.M.rows() != g.n_ || a.M.cols() != g.n_ || a.c0.size() != g.n_)
      throw instance_error("affine pseudogradient must be n x n with offset of length n");
    g.affine_ = a;
  }
  const bool custom_oracle = static_cast<bool>(desc.grad);
  if (custom_oracle) {
    g.grad_ = std::move(desc.grad);
  } else if (g.affine_) {
    g.grad_ = affine_oracle(std::make_shared<const AffineMap>(*g.affine_), g.offsets_);
  } else {
    throw instance_error("game needs a gradient oracle or an affine pseudogradient");
  }

  if (g.affine_ && custom_oracle) {
    // The supplied oracle must agree with the affine formula.
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Vec lo = g.lower(), hi = g.upper();
    for (int probe = 0; probe < 3; ++probe) {
      Vec x(g.n_);
      for (int k = 0; k < g.n_; ++k) x[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
      const Vec F = g.pseudogradient(x);
      const Vec ref = g.affine_->M * x + g.affine_->c0;
      if ((F - ref).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + ref.lpNorm<Eigen::Infinity>()))
        throw instance_error("gradient oracle disagrees with the affine pseudogradient");
    }
  }

  // Coupled-constraint feasibility: lower corners, then centers, then the hint.
  std::vector<Vec> probes{g.lower(), 0.5 * (g.lower() + g.upper())};
  if (desc.feasible_hint) {
    if (desc.feasible_hint->size() != g.n_) throw instance_error("feasible hint has wrong length");
    probes.push_back(*desc.feasible_hint);
  }
  const bool ok = std::any_of(probes.begin(), probes.end(),
                              [&](const Vec& x) { return q == 0 || g.feasible(x); });
  if (!ok)
    throw instance_error(
        "no feasible point found for the coupled constraint sum A_i x_i <= sum b_i "
        "(Slater-type existence of a feasible profile is required)");
  return g;
}

// ---------------------------------------------------------------------------

struct Edge {
  int i;  // i < j
  int j;
};

/// One endpoint's view of an incident edge.
struct Incidence {
  int neighbor;
  int edge;
  int sign;  // +1 when this node is the lower endpoint, -1 otherwise
};

/// Undirected connected graph with canonical edge orientation (i < j).
class CommGraph {
 public:
  [[nodiscard]] int nodes() const { return m_; }
  [[nodiscard]] int edge_count() const { return static_cast<int>(edges_.size()); }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const Edge& edge(int e) const { return edges_[e]; }
  [[nodiscard]] const std::vector<Incidence>& incident(int i) const { return adj_[i]; }
  [[nodiscard]] int degree(int i) const { return static_cast<int>(adj_[i].size()); }

  /// Sign s with E_ij = s I_q for `node` on edge `e`.
  [[nodiscard]] int orientation(int node, int e) const {
    const auto& ed = edges_[e];
    if (node == ed.i) return +1;
    if (node == ed.j) return -1;
    throw std::out_of_range("node is not an endpoint of the edge");
  }

  friend CommGraph build_graph(int m, const std::vector<std::pair<int, int>>& edges);

 private:
  int m_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Incidence>> adj_;
};

inline CommGraph build_graph(int m, const std::vector<std::pair<int, int>>& edges) {
  if (m <= 0) throw instance_error("graph needs at least one node");
  CommGraph g;
  g.m_ = m;
  g.adj_.resize(m);
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= m || b >= m)
      throw instance_error("edge endpoint out of range");
    if (a == b) throw instance_error("self-loop on node " + std::to_string(a));
    const auto key = std::minmax(a, b);
    if (!seen.insert({key.first, key.second}).second)
      throw instance_error("duplicate edge (" + std::to_string(key.first) + "," +
                           std::to_string(key.second) + ")");
    const int e = static_cast<int>(g.edges_.size());
    g.edges_.push_back({key.first, key.second});
    g.adj_[key.first].push_back({key.second, e, +1});
    g.adj_[key.second].push_back({key.first, e, -1});
  }

  std::vector<char> reached(m, 0);
  std::queue<int> frontier;
  frontier.push(0);
  reached[0] = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (const auto& inc : g.adj_[v])
      if (!reached[inc.neighbor]) {
        reached[inc.neighbor] = 1;
        frontier.push(inc.neighbor);
      }
  }
  for (int v = 0; v < m; ++v)
    if (!reached[v])
      throw instance_error("communication graph must be undirected and connected: node " +
                           std::to_string(v) + " unreachable");
  return g;
}

/// Ring 0-1-...-(m-1)-0 (a path for m = 2, a single node for m = 1).
inline std::vector<std::pair<int, int>> ring_edges(int m) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < m; ++i) e.emplace_back(i, i + 1);
  if (m > 2) e.emplace_back(m - 1, 0);
  return e;
}

// ---------------------------------------------------------------------------

/// Iterate U = (x, u, w). Edge e stores (w_(i,j),i, w_(i,j),j) contiguously at
/// offset 2 e q; the first half belongs to the lower endpoint.
struct PrimalDualState {
  Vec x;
  Vec u;
  Vec w;

  static PrimalDualState zeros(const GameSpec& game, const CommGraph& graph) {
    const int q = game.coupling_rows();
    return {Vec::Zero(game.total_dim()), Vec::Zero(game.players() * q),
            Vec::Zero(2 * graph.edge_count() * q)};
  }

  /// Box centers, zero multipliers, zero edge variables.
  static PrimalDualState initial(const GameSpec& game, const CommGraph& graph) {
    auto s = zeros(game, graph);
    s.x = 0.5 * (game.lower() + game.upper());
    return s;
  }

  [[nodiscard]] Eigen::Index size() const { return x.size() + u.size() + w.size(); }

  [[nodiscard]] Vec stacked() const {
    Vec U(size());
    U << x, u, w;
    return U;
  }

  static PrimalDualState unstack(const Vec& U, const GameSpec& game, const CommGraph& graph) {
    auto s = zeros(game, graph);
    if (U.size() != s.size()) throw std::invalid_argument("stacked state has wrong length");
    s.x = U.head(s.x.size());
    s.u = U.segment(s.x.size(), s.u.size());
    s.w = U.tail(s.w.size());
    return s;
  }

  void check(const GameSpec& game, const CommGraph& graph) const {
    const int q = game.coupling_rows();
    if (x.size() != game.total_dim() || u.size() != game.players() * q ||
        w.size() != 2 * graph.edge_count() * q || graph.nodes() != game.players())
      throw std::invalid_argument("state dimensions do not match game and graph");
  }

  /// Offset of `node`'s half of edge `e` inside w.
  static int w_offset(const CommGraph& graph, int node, int e, int q) {
    return 2 * e * q + (graph.orientation(node, e) > 0 ? 0 : q);
  }
};

/// E_ij u_i + E_ji u_j = u_i - u_j for each canonical edge (i < j).
inline std::vector<Vec> edge_consensus_residual(const CommGraph& graph, const Vec& u, int q) {
  if (u.size() != static_cast<Eigen::Index>(graph.nodes()) * q)
    throw std::invalid_argument("multiplier vector must hold m blocks of length q");
  std::vector<Vec> out;
  out.reserve(graph.edge_count());
  for (const auto& e : graph.edges()) out.push_back(u.segment(e.i * q, q) - u.segment(e.j * q, q));
  return out;
}

// ---------------------------------------------------------------------------

/// Strong monotonicity modulus and Lipschitz constant of the pseudogradient.
struct MonotonicityConstants {
  double mu;
  double l_f;
};

inline MonotonicityConstants make_constants(double mu, double l_f) {
  if (!(mu > 0.0) || !(l_f > 0.0))
    throw instance_error("pseudogradient must be strongly monotone and Lipschitz (mu, L_F > 0)");
  if (mu > l_f * (1.0 + 1e-12)) throw instance_error("mu cannot exceed L_F");
  return {mu, std::max(mu, l_f)};
}

/// mu = lambda_min((M + M^T)/2), L_F = sigma_max(M). Only for affine games.
inline MonotonicityConstants estimate_constants(const GameSpec& game) {
  if (!game.affine())
    throw std::logic_error(
        "estimate_constants needs an affine pseudogradient; supply mu and L_F explicitly");
  const Mat& M = game.affine()->M;
  const Mat sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
  const double mu = eig.eigenvalues().minCoeff();
  Eigen::JacobiSVD<Mat> svd(M);
  const double lf = svd.singularValues()(0);
  if (!(mu > 0.0))
    throw instance_error("pseudogradient is not strongly monotone (lambda_min = " +
                         std::to_string(mu) + ")");
  return {mu, std::max(mu, lf)};
}

}  // namespace gne
