#pragma once

// Algorithm parameters: construction from the standard recipe and validation.

#include "gne/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace gne {

struct StepSizes {
  std::vector<double> alpha;  // per player, in (0,1)
  std::vector<double> kappa;  // per canonical edge
  std::vector<double> sigma;  // per player
  std::vector<double> tau;    // per player
  double eta = 1.0;
  std::vector<double> probs;  // activation probabilities, sum 1
  int eps = 0;                // delay bound

  [[nodiscard]] double p_min() const { return *std::min_element(probs.begin(), probs.end()); }
  [[nodiscard]] double alpha_min() const { return *std::min_element(alpha.begin(), alpha.end()); }
  /// Relaxation used when player i is the active one.
  [[nodiscard]] double eta_i(int i) const {
    return eta / (static_cast<double>(probs.size()) * probs[i]);
  }
  /// Averagedness constant gamma = 1/(1 + alpha_min).
  [[nodiscard]] double gamma() const { return 1.0 / (1.0 + alpha_min()); }
};

inline std::vector<double> uniform_probs(int m) { return std::vector<double>(m, 1.0 / m); }

/// p_i = zeta_i / sum(zeta) from per-player activation rates.
inline std::vector<double> probs_from_rates(const std::vector<double>& zeta) {
  const double s = std::accumulate(zeta.begin(), zeta.end(), 0.0);
  if (zeta.empty() || !(s > 0.0)) throw instance_error("activation rates must be positive");
  std::vector<double> p;
  for (double z : zeta) {
    if (!(z > 0.0)) throw instance_error("activation rates must be positive");
    p.push_back(z / s);
  }
  return p;
}

/// One player gets p_min, the rest share the remainder equally.
inline std::vector<double> probs_with_min(int m, double p_min, int slow_player) {
  if (m == 1) return {1.0};
  if (!(p_min > 0.0) || p_min * m > 1.0 + 1e-12)
    throw instance_error("p_min must lie in (0, 1/m]");
  std::vector<double> p(m, (1.0 - p_min) / (m - 1));
  p[slow_player % m] = p_min;
  return p;
}

inline void check_probs(const std::vector<double>& p, int m) {
  if (static_cast<int>(p.size()) != m) throw instance_error("need one probability per player");
  double s = 0.0;
  for (double v : p) {
    if (!(v > 0.0)) throw instance_error("activation probabilities must be positive");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw instance_error("activation probabilities must sum to 1");
}

inline double sum_incident_kappa(const CommGraph& graph, const StepSizes& s, int i) {
  double t = 0.0;
  for (const auto& inc : graph.incident(i)) t += s.kappa[inc.edge];
  return t;
}

/// lambda_max(A_i^T A_i).
inline double coupling_gain(const GameSpec& game, int i) {
  const Mat& A = game.coupling(i);
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(A.transpose() * A, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().maxCoeff());
}

/// Diagonal of T_S = blkdiag(Gamma^-1, Sigma^-1, W^-1) in state layout.
inline Vec metric_weights(const GameSpec& game, const CommGraph& graph, const StepSizes& s) {
  const int q = game.coupling_rows();
  const int n = game.total_dim(), m = game.players(), ne = graph.edge_count();
  Vec d(n + m * q + 2 * ne * q);
  for (int i = 0; i < m; ++i) d.segment(game.offset(i), game.dim(i)).setConstant(1.0 / s.tau[i]);
  for (int i = 0; i < m; ++i) d.segment(n + i * q, q).setConstant(1.0 / s.sigma[i]);
  for (int e = 0; e < ne; ++e) d.segment(n + m * q + 2 * e * q, 2 * q).setConstant(1.0 / s.kappa[e]);
  return d;
}

/// kappa(T_S) = max diagonal / min diagonal.
inline double metric_condition(const Vec& weights) {
  return weights.maxCoeff() / weights.minCoeff();
}

inline double metric_condition(const GameSpec& game, const CommGraph& graph, const StepSizes& s) {
  return metric_condition(metric_weights(game, graph, s));
}

inline double beta_constant(const StepSizes& s, double kts) {
  const double m = static_cast<double>(s.probs.size());
  const double pm = s.p_min();
  return 1.0 / s.eta - 2.0 * s.eps * std::sqrt(kts / pm) / m - kts / (m * pm);
}

inline double sigma_bound(double alpha, double sum_kappa) {
  return 9.0 * (1.0 - alpha) * (1.0 - alpha) / (16.0 * sum_kappa);
}

inline double tau_bound(double alpha, double sigma, double sum_kappa, double gain,
                        const MonotonicityConstants& c) {
  const double a = 1.0 - alpha;
  return 2.0 * c.mu * a * a /
         (a * c.l_f * c.l_f + 8.0 * c.mu * sigma * (1.0 + sigma * sum_kappa) * gain);
}

/// Literal tau from the experimental recipe (constant 15 in place of the
/// modulus ratio, unit coupling gain).
inline double tau_literal(double alpha, double sigma, double sum_kappa) {
  const double a = 1.0 - alpha;
  return a * a / (15.0 * a + 16.0 * sigma * (1.0 + sigma * sum_kappa));
}

inline void check_shapes(const StepSizes& s, const GameSpec& game, const CommGraph& graph) {
  const auto m = static_cast<std::size_t>(game.players());
  if (graph.nodes() != game.players()) throw instance_error("graph and game disagree on m");
  if (s.alpha.size() != m || s.sigma.size() != m || s.tau.size() != m || s.probs.size() != m)
    throw instance_error("per-player step vectors must have length m");
  if (s.kappa.size() != static_cast<std::size_t>(graph.edge_count()))
    throw instance_error("kappa must have one entry per edge");
  if (s.eps < 0) throw instance_error("delay bound must be non-negative");
}

/// Recipe: alpha = 0.25, kappa_e = max degree of endpoints,
/// sigma_i = 0.5 (1-alpha)^2 / sum kappa, tau_i from the recipe formula with the
/// constant 15 raised to L_F^2/(2 mu) and the coupling gain included when
/// either exceeds the literal values, eta from the delay/probability formula.
inline StepSizes recipe_section5(const GameSpec& game, const CommGraph& graph,
                                 const MonotonicityConstants& c, std::vector<double> probs,
                                 int eps) {
  const int m = game.players();
  check_probs(probs, m);
  if (eps < 0) throw instance_error("delay bound must be non-negative");
  StepSizes s;
  s.alpha.assign(m, 0.25);
  s.probs = std::move(probs);
  s.eps = eps;
  for (const auto& e : graph.edges())
    s.kappa.push_back(static_cast<double>(std::max(graph.degree(e.i), graph.degree(e.j))));

  const double ratio = std::max(15.0, c.l_f * c.l_f / (2.0 * c.mu));
  for (int i = 0; i < m; ++i) {
    const double a = 1.0 - s.alpha[i];
    const double sk = sum_incident_kappa(graph, s, i);
    const double sig = sk > 0.0 ? 0.5 * a * a / sk : 0.5 * a * a;
    const double gain = std::max(1.0, coupling_gain(game, i));
    s.sigma.push_back(sig);
    s.tau.push_back(a * a / (ratio * a + 16.0 * sig * (1.0 + sig * sk) * gain));
  }

  const double kts = metric_condition(game, graph, s);
  const double pm = s.p_min();
  const double lead = m > 1 ? static_cast<double>(m - 1) : 0.5;
  s.eta = lead * pm / (std::sqrt(kts) * (2.0 * eps * std::sqrt(pm) + std::sqrt(kts)));
  return s;
}

struct PlayerCheck {
  int player;
  double sigma_bound;
  double sigma_margin;  // (bound - value) / bound, must exceed the safety margin
  bool sigma_ok;
  double tau_bound;
  double tau_margin;
  bool tau_ok;
  double tau_literal;
};

struct StepReport {
  std::vector<PlayerCheck> players;
  bool edges_ok = true;
  bool probs_ok = true;
  bool alpha_ok = true;
  double kappa_ts = 1.0;
  double beta = 0.0;
  bool beta_ok = false;
  double gamma = 0.0;
  bool ok = false;
  std::vector<std::string> problems;

  [[nodiscard]] std::string summary() const {
    std::ostringstream os;
    os << "kappa(T_S)=" << kappa_ts << " beta=" << beta << " gamma=" << gamma
       << " verdict=" << (ok ? "pass" : "fail");
    for (const auto& p : problems) os << "\n  " << p;
    return os.str();
  }
};

/// Strict inequalities are enforced with this relative margin.
inline constexpr double step_margin = 1e-9;

inline StepReport validate(const StepSizes& s, const GameSpec& game, const CommGraph& graph,
                           const MonotonicityConstants& c) {
  check_shapes(s, game, graph);
  StepReport r;
  const int m = game.players();

  for (int i = 0; i < m; ++i)
    if (!(s.alpha[i] > 0.0 && s.alpha[i] < 1.0)) {
      r.alpha_ok = false;
      r.problems.push_back("player " + std::to_string(i) + ": alpha must lie in (0,1)");
    }
  for (int e = 0; e < graph.edge_count(); ++e)
    if (!(s.kappa[e] > 0.0)) {
      r.edges_ok = false;
      r.problems.push_back("edge (" + std::to_string(graph.edge(e).i) + "," +
                           std::to_string(graph.edge(e).j) + "): kappa must be positive");
    }
  try {
    check_probs(s.probs, m);
  } catch (const instance_error& ex) {
    r.probs_ok = false;
    r.problems.emplace_back(ex.what());
  }

  for (int i = 0; i < m; ++i) {
    PlayerCheck pc{};
    pc.player = i;
    const double sk = sum_incident_kappa(graph, s, i);
    pc.sigma_bound = sk > 0.0 ? sigma_bound(s.alpha[i], sk) : INFINITY;
    pc.sigma_margin = std::isfinite(pc.sigma_bound) ? (pc.sigma_bound - s.sigma[i]) / pc.sigma_bound
                                                     : INFINITY;
    pc.sigma_ok = s.sigma[i] > 0.0 && pc.sigma_margin > step_margin;
    pc.tau_bound = tau_bound(s.alpha[i], s.sigma[i], sk, coupling_gain(game, i), c);
    pc.tau_margin = (pc.tau_bound - s.tau[i]) / pc.tau_bound;
    pc.tau_ok = s.tau[i] > 0.0 && pc.tau_margin > step_margin;
    pc.tau_literal = tau_literal(s.alpha[i], s.sigma[i], sk);
    if (!pc.sigma_ok)
      r.problems.push_back("player " + std::to_string(i) + ": sigma=" + std::to_string(s.sigma[i]) +
                           " violates bound " + std::to_string(pc.sigma_bound));
    if (!pc.tau_ok)
      r.problems.push_back("player " + std::to_string(i) + ": tau=" + std::to_string(s.tau[i]) +
                           " violates bound " + std::to_string(pc.tau_bound));
    r.players.push_back(pc);
  }

  bool all_pos = r.probs_ok && r.edges_ok && s.eta > 0.0;
  for (int i = 0; i < m; ++i) all_pos = all_pos && s.sigma[i] > 0.0 && s.tau[i] > 0.0;
  if (all_pos) {
    r.kappa_ts = metric_condition(game, graph, s);
    r.beta = beta_constant(s, r.kappa_ts);
  } else {
    r.beta = -INFINITY;
  }
  r.beta_ok = r.beta > 0.0;
  if (!r.beta_ok) r.problems.push_back("beta=" + std::to_string(r.beta) + " is not positive");
  r.gamma = r.alpha_ok ? s.gamma() : 0.0;

  r.ok = r.alpha_ok && r.edges_ok && r.probs_ok && r.beta_ok;
  for (const auto& p : r.players) r.ok = r.ok && p.sigma_ok && p.tau_ok;
  return r;
}

}  // namespace gne
