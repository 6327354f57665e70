#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace gne;
using namespace gne::testing;

namespace {

GameDescription one_player(double lo, double hi, double a, double b) {
  GameDescription d;
  d.coupling_rows = 1;
  d.players.push_back({{Vec::Constant(1, lo), Vec::Constant(1, hi)}, Mat::Constant(1, 1, a), Vec::Constant(1, b)});
  d.affine = AffineMap{Mat::Identity(1, 1), Vec::Zero(1)};
  return d;
}

}  // namespace

TEST(BuildGame, SinglePlayerWithSlackCouplingIsValid) {
  const auto g = build_game(one_player(0.0, 1.0, 1.0, 2.0));
  EXPECT_EQ(g.players(), 1);
  EXPECT_EQ(g.total_dim(), 1);
  EXPECT_TRUE(g.feasible(Vec::Zero(1)));
}

TEST(BuildGame, RejectsInfeasibleCoupling) {
  try {
    build_game(one_player(1.0, 2.0, 1.0, 0.0));
    FAIL() << "expected an infeasibility error";
  } catch (const instance_error& ex) {
    EXPECT_NE(std::string(ex.what()).find("feasible"), std::string::npos) << ex.what();
  }
}

TEST(BuildGame, RejectsMalformedInput) {
  auto d = one_player(2.0, 1.0, 1.0, 5.0);
  EXPECT_THROW(build_game(d), instance_error);  // lo > hi

  d = one_player(0.0, 1.0, 1.0, 5.0);
  d.players[0].A = Mat::Constant(2, 1, 1.0);
  EXPECT_THROW(build_game(d), instance_error);  // A has the wrong row count

  d = one_player(0.0, std::numeric_limits<double>::infinity(), 1.0, 5.0);
  EXPECT_THROW(build_game(d), instance_error);  // unbounded box
}

TEST(BuildGame, RejectsOracleThatDisagreesWithAffineMap) {
  auto d = one_player(0.0, 1.0, 1.0, 5.0);
  d.grad = [](const Vec& x, int, Eigen::Ref<Vec> out) { out[0] = 2.0 * x[0] + 1.0; };
  EXPECT_THROW(build_game(d), instance_error);
}

TEST(BuildGame, CournotDefaultHasFourCouplingRows) {
  const auto inst = gen_cournot({});
  EXPECT_EQ(inst.game.players(), 10);
  EXPECT_EQ(inst.game.coupling_rows(), 4);
}

TEST(BuildGraph, PathOrientation) {
  const auto g = build_graph(2, {{0, 1}});
  ASSERT_EQ(g.edge_count(), 1);
  EXPECT_EQ(g.orientation(0, 0), +1);
  EXPECT_EQ(g.orientation(1, 0), -1);
  EXPECT_THROW((void)g.orientation(2, 0), std::out_of_range);
}

TEST(BuildGraph, CanonicalizesReversedPairs) {
  const auto g = build_graph(2, {{1, 0}});
  EXPECT_EQ(g.edge(0).i, 0);
  EXPECT_EQ(g.edge(0).j, 1);
}

TEST(BuildGraph, RejectsDisconnected) {
  try {
    build_graph(3, {{0, 1}});
    FAIL();
  } catch (const instance_error& ex) {
    EXPECT_NE(std::string(ex.what()).find("connected"), std::string::npos) << ex.what();
  }
}

TEST(BuildGraph, TriangleHasThreeEdges) {
  const auto g = build_graph(3, triangle_edges());
  EXPECT_EQ(g.edge_count(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(g.degree(i), 2);
}

TEST(BuildGraph, RejectsDuplicatesSelfLoopsAndRange) {
  EXPECT_THROW(build_graph(2, {{0, 1}, {1, 0}}), instance_error);
  EXPECT_THROW(build_graph(2, {{0, 0}, {0, 1}}), instance_error);
  EXPECT_THROW(build_graph(2, {{0, 2}}), instance_error);
  EXPECT_THROW(build_graph(0, {}), instance_error);
}

TEST(BuildGraph, SignsCancelOnEveryEdge) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 9);
    const auto g = build_graph(m, ring_with_chords(m, static_cast<int>(rng() % 4), rng));
    for (int e = 0; e < g.edge_count(); ++e) {
      const int si = g.orientation(g.edge(e).i, e), sj = g.orientation(g.edge(e).j, e);
      EXPECT_EQ(si + sj, 0);
      EXPECT_EQ(si * si, 1);
    }
    int incidences = 0;
    for (int i = 0; i < m; ++i) incidences += g.degree(i);
    EXPECT_EQ(incidences, 2 * g.edge_count());
  }
}

TEST(EdgeConsensus, AgreeingMultipliersGiveZero) {
  const auto g = build_graph(2, {{0, 1}});
  Vec u(4);
  u << 3, 3, 3, 3;
  const auto r = edge_consensus_residual(g, u, 2);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], Vec::Zero(2));
}

TEST(EdgeConsensus, DirectSubtraction) {
  const auto g = build_graph(2, {{0, 1}});
  Vec u(4);
  u << 1, 0, 0, 1;
  const auto r = edge_consensus_residual(g, u, 2);
  EXPECT_EQ(r[0], (Vec(2) << 1, -1).finished());
}

TEST(EdgeConsensus, RejectsWrongLength) {
  const auto g = build_graph(2, {{0, 1}});
  EXPECT_THROW(edge_consensus_residual(g, Vec::Zero(3), 2), std::invalid_argument);
}

TEST(EdgeConsensus, AntisymmetricUnderSwap) {
  Rng rng(5);
  const auto g = build_graph(2, {{0, 1}});
  for (int t = 0; t < 200; ++t) {
    const Vec a = random_vec(rng, 3, -5, 5), b = random_vec(rng, 3, -5, 5);
    Vec u(6), v(6);
    u << a, b;
    v << b, a;
    EXPECT_EQ(edge_consensus_residual(g, u, 3)[0], -edge_consensus_residual(g, v, 3)[0]);
  }
}

TEST(EdgeConsensus, ConvergedRunReachesConsensus) {
  for (std::uint64_t seed : {1u, 2u}) {
    CournotConfig cfg;
    cfg.seed = seed;
    const auto inst = gen_cournot(cfg);
    const auto orc = oracle_for(inst);
    for (const auto& r : edge_consensus_residual(inst.graph, orc.ref.U.u, 4)) EXPECT_LT(r.norm(), 1e-6);
  }
}

TEST(EstimateConstants, ScaledIdentity) {
  GameDescription d;
  d.coupling_rows = 1;
  d.players.push_back({{Vec::Zero(3), Vec::Ones(3)}, Mat::Ones(1, 3), Vec::Constant(1, 5.0)});
  d.affine = AffineMap{2.0 * Mat::Identity(3, 3), Vec::Zero(3)};
  const auto c = estimate_constants(build_game(d));
  EXPECT_NEAR(c.mu, 2.0, 1e-12);
  EXPECT_NEAR(c.l_f, 2.0, 1e-12);
}

TEST(EstimateConstants, NonsymmetricTwoByTwo) {
  Mat M(2, 2);
  M << 2, 1, 0, 2;
  GameDescription d;
  d.coupling_rows = 1;
  d.players.push_back({{Vec::Zero(2), Vec::Ones(2)}, Mat::Ones(1, 2), Vec::Constant(1, 5.0)});
  d.affine = AffineMap{M, Vec::Zero(2)};
  const auto c = estimate_constants(build_game(d));
  EXPECT_NEAR(c.mu, sym2_min_eig(2, 0.5, 2), 1e-12);
  EXPECT_NEAR(c.mu, 1.5, 1e-12);
  EXPECT_NEAR(c.l_f, sigma_max_2x2(M), 1e-12);
}

TEST(EstimateConstants, RejectsNonMonotoneAndNonAffine) {
  GameDescription d;
  d.coupling_rows = 1;
  d.players.push_back({{Vec::Zero(2), Vec::Ones(2)}, Mat::Ones(1, 2), Vec::Constant(1, 5.0)});
  Mat M(2, 2);
  M << 1, 0, 0, -1;
  d.affine = AffineMap{M, Vec::Zero(2)};
  EXPECT_THROW(estimate_constants(build_game(d)), instance_error);

  d.affine.reset();
  d.grad = [](const Vec& x, int, Eigen::Ref<Vec> out) { out = x.array().cube().matrix(); };
  EXPECT_THROW(estimate_constants(build_game(d)), std::logic_error);
}

TEST(EstimateConstants, CournotSeedsAreStronglyMonotone) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CournotConfig cfg;
    cfg.seed = seed;
    const auto c = estimate_constants(gen_cournot(cfg).game);
    EXPECT_GT(c.mu, 0.0);
    EXPECT_TRUE(std::isfinite(c.l_f));
    EXPECT_LE(c.mu, c.l_f);
  }
}

TEST(EstimateConstants, SymmetricEqualConstantsOnlyForScaledIdentity) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const bool identity = t % 2 == 0;
    Mat M;
    if (identity) {
      M = uniform(rng, 0.5, 5.0) * Mat::Identity(n, n);
    } else {
      const Mat B = Mat::NullaryExpr(n, n, [&] { return uniform(rng, -1, 1); });
      M = B * B.transpose() + uniform(rng, 0.5, 2.0) * Mat::Identity(n, n);
    }
    GameDescription d;
    d.coupling_rows = 1;
    d.players.push_back({{Vec::Zero(n), Vec::Ones(n)}, Mat::Ones(1, n), Vec::Constant(1, 100.0)});
    d.affine = AffineMap{M, Vec::Zero(n)};
    const auto c = estimate_constants(build_game(d));
    EXPECT_EQ(std::abs(c.mu - c.l_f) <= 1e-9 * c.l_f, identity) << M;
  }
}

TEST(MakeConstants, ValidatesOrdering) {
  EXPECT_THROW(make_constants(0.0, 1.0), instance_error);
  EXPECT_THROW(make_constants(2.0, 1.0), instance_error);
  const auto c = make_constants(1.0, 3.0);
  EXPECT_EQ(c.mu, 1.0);
  EXPECT_EQ(c.l_f, 3.0);
}

TEST(PrimalDualState, LayoutAndRoundTrip) {
  Rng rng(2);
  auto sc = triangle_case(rng, 2);
  const auto s0 = PrimalDualState::initial(sc.game, sc.graph);
  EXPECT_EQ(s0.w.size(), 2 * 3 * 2);
  EXPECT_EQ(s0.u, Vec::Zero(6));
  EXPECT_EQ(s0.x, 0.5 * (sc.game.lower() + sc.game.upper()));
  const Vec U = random_state(rng, sc.game, sc.graph);
  EXPECT_EQ(PrimalDualState::unstack(U, sc.game, sc.graph).stacked(), U);
  EXPECT_THROW(PrimalDualState::unstack(Vec::Zero(3), sc.game, sc.graph), std::invalid_argument);
  // The lower endpoint owns the first half of each edge record.
  EXPECT_EQ(PrimalDualState::w_offset(sc.graph, 0, 0, 2), 0);
  EXPECT_EQ(PrimalDualState::w_offset(sc.graph, 1, 0, 2), 2);
}
