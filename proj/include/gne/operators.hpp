#pragma once

// Projections, the edge proximal map, and dense splitting matrices used to
// cross-check the per-player solvers on small instances.

#include "gne/model.hpp"
#include "gne/stepsizes.hpp"

#include <utility>

namespace gne {

inline Vec project_box(const Vec& z, const Vec& lo, const Vec& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

inline Vec project_nonneg(const Vec& z) { return z.cwiseMax(0.0); }

/// Projection onto {(a, b) : a + b = 0}.
inline std::pair<Vec, Vec> project_pair_consensus(const Vec& z1, const Vec& z2) {
  if (z1.size() != z2.size()) throw std::invalid_argument("pair halves differ in length");
  const Vec d = 0.5 * (z1 - z2);
  return {d, -d};
}

/// Proximal map of the conjugate indicator of the consensus pair set, via
/// the Moreau decomposition.
inline std::pair<Vec, Vec> prox_conjugate_edge(const std::pair<Vec, Vec>& w, double kappa,
                                               const std::pair<Vec, Vec>& pi_u) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  const auto [c1, c2] =
      project_pair_consensus(w.first / kappa + pi_u.first, w.second / kappa + pi_u.second);
  return {w.first + kappa * pi_u.first - kappa * c1, w.second + kappa * pi_u.second - kappa * c2};
}

/// Same map in closed form: both halves equal the edge average plus the scaled
/// multiplier disagreement.
inline std::pair<Vec, Vec> prox_edge_closed_form(const std::pair<Vec, Vec>& w, double kappa,
                                                 const std::pair<Vec, Vec>& pi_u) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  const Vec v = 0.5 * (w.first + w.second) + 0.5 * kappa * (pi_u.first + pi_u.second);
  return {v, v};
}

// ---------------------------------------------------------------------------

struct SplittingMatrices {
  int n = 0, mq = 0, wq = 0, q = 0, edges = 0;
  Mat gamma, sigma, wmat;
  Mat pi;     // 2|E|q x mq
  Mat a_big;  // mq x n
  Vec b;      // mq
  Mat t_s, t_p, t_k, t_h, t_m, t_ptilde, theta;
  double lf2_over_2mu = 0.0;

  [[nodiscard]] int size() const { return n + mq + wq; }
};

inline constexpr int dense_size_limit = 500;

inline SplittingMatrices assemble_matrices(const GameSpec& game, const CommGraph& graph,
                                           const StepSizes& s, const MonotonicityConstants& c) {
  check_shapes(s, game, graph);
  const int m = game.players(), q = game.coupling_rows(), ne = graph.edge_count();
  SplittingMatrices M;
  M.n = game.total_dim();
  M.mq = m * q;
  M.wq = 2 * ne * q;
  M.q = q;
  M.edges = ne;
  const int N = M.size();
  if (N > dense_size_limit)
    throw std::length_error("dense splitting matrices are limited to " +
                            std::to_string(dense_size_limit) + " rows");
  for (int i = 0; i < m; ++i)
    if (!(s.tau[i] > 0.0) || !(s.sigma[i] > 0.0)) throw instance_error("step sizes must be positive");
  for (double k : s.kappa)
    if (!(k > 0.0)) throw instance_error("step sizes must be positive");

  Vec g(M.n), sg(M.mq), wk(M.wq), th(N);
  for (int i = 0; i < m; ++i) {
    g.segment(game.offset(i), game.dim(i)).setConstant(s.tau[i]);
    th.segment(game.offset(i), game.dim(i)).setConstant(s.alpha[i]);
    sg.segment(i * q, q).setConstant(s.sigma[i]);
    th.segment(M.n + i * q, q).setConstant(s.alpha[i]);
  }
  M.pi = Mat::Zero(M.wq, M.mq);
  for (int e = 0; e < ne; ++e) {
    const auto& ed = graph.edge(e);
    wk.segment(2 * e * q, 2 * q).setConstant(s.kappa[e]);
    th.segment(M.n + M.mq + 2 * e * q, q).setConstant(s.alpha[ed.i]);
    th.segment(M.n + M.mq + 2 * e * q + q, q).setConstant(s.alpha[ed.j]);
    M.pi.block(2 * e * q, ed.i * q, q, q) = Mat::Identity(q, q);
    M.pi.block(2 * e * q + q, ed.j * q, q, q) = -Mat::Identity(q, q);
  }
  M.gamma = g.asDiagonal();
  M.sigma = sg.asDiagonal();
  M.wmat = wk.asDiagonal();
  M.theta = th.asDiagonal();

  M.a_big = Mat::Zero(M.mq, M.n);
  M.b = Vec(M.mq);
  for (int i = 0; i < m; ++i) {
    M.a_big.block(i * q, game.offset(i), q, game.dim(i)) = game.coupling(i);
    M.b.segment(i * q, q) = game.rhs(i);
  }

  const int x0 = 0, u0 = M.n, w0 = M.n + M.mq;
  Vec ts(N);
  ts << g.cwiseInverse(), sg.cwiseInverse(), wk.cwiseInverse();
  M.t_s = ts.asDiagonal();

  M.t_p = M.t_s;
  M.t_p.block(x0, u0, M.n, M.mq) = 0.5 * M.a_big.transpose();
  M.t_p.block(u0, x0, M.mq, M.n) = 0.5 * M.a_big;
  M.t_p.block(u0, w0, M.mq, M.wq) = 0.5 * M.pi.transpose();
  M.t_p.block(w0, u0, M.wq, M.mq) = 0.5 * M.pi;

  M.t_k = Mat::Zero(N, N);
  M.t_k.block(x0, u0, M.n, M.mq) = 0.5 * M.a_big.transpose();
  M.t_k.block(u0, x0, M.mq, M.n) = -0.5 * M.a_big;
  M.t_k.block(u0, w0, M.mq, M.wq) = 0.5 * M.pi.transpose();
  M.t_k.block(w0, u0, M.wq, M.mq) = -0.5 * M.pi;

  M.t_h = M.t_p + M.t_k;

  M.t_m = Mat::Zero(N, N);
  M.t_m.block(x0, u0, M.n, M.mq) = M.a_big.transpose();
  M.t_m.block(u0, x0, M.mq, M.n) = -M.a_big;
  M.t_m.block(u0, w0, M.mq, M.wq) = M.pi.transpose();
  M.t_m.block(w0, u0, M.wq, M.mq) = -M.pi;

  M.lf2_over_2mu = c.l_f * c.l_f / (2.0 * c.mu);
  M.t_ptilde = Mat::Zero(N, N);
  M.t_ptilde.diagonal() = 2.0 * ts;
  M.t_ptilde.block(x0, x0, M.n, M.n).diagonal().array() -= M.lf2_over_2mu;
  M.t_ptilde.block(x0, u0, M.n, M.mq) = -M.a_big.transpose();
  M.t_ptilde.block(u0, x0, M.mq, M.n) = -M.a_big;
  M.t_ptilde.block(x0, w0, M.n, M.wq) = M.a_big.transpose() * M.sigma * M.pi.transpose();
  M.t_ptilde.block(w0, x0, M.wq, M.n) = M.pi * M.sigma * M.a_big;
  M.t_ptilde.block(u0, w0, M.mq, M.wq) = -M.pi.transpose();
  M.t_ptilde.block(w0, u0, M.wq, M.mq) = -M.pi;
  return M;
}

/// Dense fixed-point map. The resolvent is evaluated by the w, u, x sweep.
inline Vec apply_T(const SplittingMatrices& M, const GameSpec& game, const Vec& U) {
  if (U.size() != M.size()) throw std::invalid_argument("state length does not match matrices");
  const Vec x = U.head(M.n), u = U.segment(M.n, M.mq), w = U.tail(M.wq);
  const Vec wk = M.wmat.diagonal();

  // w-bar: Moreau route on the stacked edge variables with metric W.
  const Vec z = wk.cwiseInverse().cwiseProduct(w) + M.pi * u;
  Vec pc(M.wq);
  const int q = M.q;
  for (int e = 0; e < M.edges; ++e) {
    const auto [c1, c2] = project_pair_consensus(z.segment(2 * e * q, q), z.segment(2 * e * q + q, q));
    pc.segment(2 * e * q, q) = c1;
    pc.segment(2 * e * q + q, q) = c2;
  }
  const Vec wbar = w + wk.cwiseProduct(M.pi * u) - wk.cwiseProduct(pc);
  const Vec ubar =
      project_nonneg(u + M.sigma * (M.a_big * x - M.b - M.pi.transpose() * wbar));
  const Vec xbar = project_box(x - M.gamma * (game.pseudogradient(x) + M.a_big.transpose() * ubar),
                               game.lower(), game.upper());

  Vec Ubar(M.size());
  Ubar << xbar, ubar, wbar;
  const Vec step = (M.t_h - M.t_m) * (Ubar - U);
  return U + step.cwiseQuotient(M.t_s.diagonal());
}

/// lambda_min of the symmetrized T_Ptilde - (Theta + I) T_S.
inline double check_pd_certificate(const SplittingMatrices& M) {
  const Mat I = Mat::Identity(M.size(), M.size());
  const Mat B = M.t_ptilde - (M.theta + I) * M.t_s;
  const Mat sym = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

inline double norm_sq_w(const Vec& v, const Vec& weights) {
  return v.cwiseAbs2().dot(weights);
}

/// ||U - Z||^2 - ((1-gamma)/gamma) ||(U - TU) - (Z - TZ)||^2 - ||TU - TZ||^2
/// in the T_S metric; nonnegative for an averaged T.
inline double averagedness_slack(const SplittingMatrices& M, const GameSpec& game, const Vec& U,
                                 const Vec& Z, double gamma) {
  const Vec& d = M.t_s.diagonal();
  const Vec TU = apply_T(M, game, U), TZ = apply_T(M, game, Z);
  return norm_sq_w(U - Z, d) - (1.0 - gamma) / gamma * norm_sq_w((U - TU) - (Z - TZ), d) -
         norm_sq_w(TU - TZ, d);
}

}  // namespace gne
