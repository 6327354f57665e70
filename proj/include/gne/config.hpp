#pragma once

// Experiment configuration documents (JSON) and their materialization into
// a game, graph and step sizes.

#include "gne/async_sim.hpp"
#include "gne/benchmarks.hpp"
#include "gne/model.hpp"
#include "gne/stepsizes.hpp"
#include "gne/sync_solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gne {

using json = nlohmann::json;

/// Malformed or inconsistent configuration; what() starts with the JSON
/// location of the offending field.
class config_error : public std::runtime_error {
 public:
  config_error(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  [[nodiscard]] const std::string& where() const { return where_; }

 private:
  std::string where_;
};

struct BenchmarkSection {
  std::string generator = "cournot";  // cournot | demand_response
  std::uint64_t seed = 1;
  std::optional<int> players;
  std::optional<int> purchasers;
  std::optional<int> chords;
  std::optional<double> q_max;
  std::optional<std::vector<double>> capacity;
  bool operator==(const BenchmarkSection&) const = default;
};

struct PlayerSection {
  std::vector<double> lo, hi;
  std::vector<std::vector<double>> A;  // q rows
  std::vector<double> b;
  bool operator==(const PlayerSection&) const = default;
};

/// Explicit game with affine pseudogradient F(x) = M x + c0.
struct GameSection {
  int coupling_rows = 0;
  std::vector<PlayerSection> players;
  std::vector<std::vector<double>> M;
  std::vector<double> c0;
  bool operator==(const GameSection&) const = default;
};

struct GraphSection {
  std::string kind = "edges";  // edges | ring
  std::vector<std::pair<int, int>> edges;
  int chords = 0;
  std::uint64_t seed = 1;
  bool operator==(const GraphSection&) const = default;
};

struct StepsSection {
  std::vector<double> alpha, kappa, sigma, tau;
  double eta = 0.0;
  std::vector<double> probs;
  int eps = 0;
  bool operator==(const StepsSection&) const = default;
};

struct RecipeSection {
  int eps = 5;
  std::optional<double> p_min;      // one slow player at p_min, the rest equal
  std::optional<int> slow_player;   // defaults to seed mod m
  std::optional<std::vector<double>> probs;
  std::optional<double> mu, l_f;    // override the estimated constants
  bool operator==(const RecipeSection&) const = default;
};

struct SchedulerSection {
  std::uint64_t seed = 1;
  std::string delay = "uniform";  // uniform | fixed | geometric
  int fixed_delay = 0;
  double geometric_p = 0.5;
  bool operator==(const SchedulerSection&) const = default;
};

struct StopSection {
  double tol = 1e-3;
  long max_iter = 1000000;
  long record_stride = 1;
  std::string on = "primal";  // primal | fixed_point (synchronous modes only)
  bool operator==(const StopSection&) const = default;
};

struct Config {
  std::optional<BenchmarkSection> benchmark;
  std::optional<GameSection> game;
  std::optional<GraphSection> graph;
  std::optional<StepsSection> steps;
  std::optional<RecipeSection> recipe;
  SchedulerSection scheduler;
  StopSection stop;
  bool operator==(const Config&) const = default;
};

namespace detail {

inline std::string join(const std::string& at, const std::string& key) { return at + "/" + key; }

class Reader {
 public:
  Reader(const json& j, std::string at) : j_(j), at_(std::move(at)) {
    if (!j_.is_object()) throw config_error(at_, "expected an object");
  }

  /// Rejects keys outside `known`.
  void only(std::initializer_list<const char*> known) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw config_error(join(at_, it.key()), "unknown field");
    }
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
  [[nodiscard]] const json& raw(const char* key) const { return j_.at(key); }
  [[nodiscard]] std::string path(const char* key) const { return join(at_, key); }

  template <class T>
  T get(const char* key) const {
    if (!has(key)) throw config_error(path(key), "missing field");
    return convert<T>(j_.at(key), path(key));
  }
  template <class T>
  void get_to(const char* key, T& out) const {
    if (has(key)) out = convert<T>(j_.at(key), path(key));
  }
  template <class T>
  void get_to(const char* key, std::optional<T>& out) const {
    if (has(key)) out = convert<T>(j_.at(key), path(key));
  }

 private:
  template <class T>
  static T convert(const json& v, const std::string& at) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw config_error(at, "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw config_error(at, "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
            throw config_error(at, "expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw config_error(at, "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& ex) {
      throw config_error(at, ex.what());
    }
  }

  const json& j_;
  std::string at_;
};

inline BenchmarkSection parse_benchmark(const json& j, const std::string& at) {
  Reader r(j, at);
  r.only({"generator", "seed", "players", "purchasers", "chords", "q_max", "capacity"});
  BenchmarkSection b;
  b.generator = r.get<std::string>("generator");
  if (b.generator != "cournot" && b.generator != "demand_response")
    throw config_error(r.path("generator"), "unknown generator '" + b.generator + "'");
  r.get_to("seed", b.seed);
  r.get_to("players", b.players);
  r.get_to("purchasers", b.purchasers);
  r.get_to("chords", b.chords);
  r.get_to("q_max", b.q_max);
  r.get_to("capacity", b.capacity);
  return b;
}

inline GameSection parse_game(const json& j, const std::string& at) {
  Reader r(j, at);
  r.only({"coupling_rows", "players", "M", "c0"});
  GameSection g;
  g.coupling_rows = r.get<int>("coupling_rows");
  const json& ps = r.raw("players");
  if (!ps.is_array() || ps.empty()) throw config_error(r.path("players"), "expected a non-empty array");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Reader p(ps[i], r.path("players") + "/" + std::to_string(i));
    p.only({"lo", "hi", "A", "b"});
    PlayerSection s;
    s.lo = p.get<std::vector<double>>("lo");
    s.hi = p.get<std::vector<double>>("hi");
    s.A = p.get<std::vector<std::vector<double>>>("A");
    s.b = p.get<std::vector<double>>("b");
    g.players.push_back(std::move(s));
  }
  g.M = r.get<std::vector<std::vector<double>>>("M");
  g.c0 = r.get<std::vector<double>>("c0");
  return g;
}

inline GraphSection parse_graph(const json& j, const std::string& at) {
  Reader r(j, at);
  r.only({"kind", "edges", "chords", "seed"});
  GraphSection g;
  r.get_to("kind", g.kind);
  if (g.kind == "edges") {
    for (const auto& e : r.get<std::vector<std::vector<int>>>("edges")) {
      if (e.size() != 2) throw config_error(r.path("edges"), "each edge needs two endpoints");
      g.edges.emplace_back(e[0], e[1]);
    }
  } else if (g.kind == "ring") {
    r.get_to("chords", g.chords);
    r.get_to("seed", g.seed);
  } else {
    throw config_error(r.path("kind"), "unknown graph kind '" + g.kind + "'");
  }
  return g;
}

inline StepsSection parse_steps(const json& j, const std::string& at) {
  Reader r(j, at);
  r.only({"alpha", "kappa", "sigma", "tau", "eta", "probs", "eps"});
  StepsSection s;
  s.alpha = r.get<std::vector<double>>("alpha");
  s.kappa = r.get<std::vector<double>>("kappa");
  s.sigma = r.get<std::vector<double>>("sigma");
  s.tau = r.get<std::vector<double>>("tau");
  s.eta = r.get<double>("eta");
  s.probs = r.get<std::vector<double>>("probs");
  s.eps = r.get<int>("eps");
  return s;
}

inline RecipeSection parse_recipe(const json& j, const std::string& at) {
  Reader r(j, at);
  r.only({"eps", "p_min", "slow_player", "probs", "mu", "l_f"});
  RecipeSection s;
  r.get_to("eps", s.eps);
  r.get_to("p_min", s.p_min);
  r.get_to("slow_player", s.slow_player);
  r.get_to("probs", s.probs);
  r.get_to("mu", s.mu);
  r.get_to("l_f", s.l_f);
  if (s.p_min && s.probs) throw config_error(at, "give either p_min or probs, not both");
  if (s.mu.has_value() != s.l_f.has_value()) throw config_error(at, "mu and l_f go together");
  return s;
}

}  // namespace detail

inline Config parse_config(const json& doc) {
  detail::Reader r(doc, "");
  r.only({"benchmark", "game", "graph", "steps", "recipe", "scheduler", "stop"});
  Config c;
  if (r.has("benchmark")) c.benchmark = detail::parse_benchmark(r.raw("benchmark"), "/benchmark");
  if (r.has("game")) c.game = detail::parse_game(r.raw("game"), "/game");
  if (c.benchmark.has_value() == c.game.has_value())
    throw config_error("/", "exactly one of 'benchmark' and 'game' is required");
  if (r.has("graph")) c.graph = detail::parse_graph(r.raw("graph"), "/graph");
  if (c.game && !c.graph) throw config_error("/graph", "missing field (required with 'game')");
  if (r.has("steps")) c.steps = detail::parse_steps(r.raw("steps"), "/steps");
  if (r.has("recipe")) c.recipe = detail::parse_recipe(r.raw("recipe"), "/recipe");
  if (c.steps.has_value() == c.recipe.has_value())
    throw config_error("/", "exactly one of 'steps' and 'recipe' is required");

  if (r.has("scheduler")) {
    detail::Reader s(r.raw("scheduler"), "/scheduler");
    s.only({"seed", "delay", "fixed_delay", "geometric_p"});
    s.get_to("seed", c.scheduler.seed);
    s.get_to("delay", c.scheduler.delay);
    s.get_to("fixed_delay", c.scheduler.fixed_delay);
    s.get_to("geometric_p", c.scheduler.geometric_p);
    const auto& d = c.scheduler.delay;
    if (d != "uniform" && d != "fixed" && d != "geometric")
      throw config_error("/scheduler/delay", "unknown delay policy '" + d + "'");
  }
  if (r.has("stop")) {
    detail::Reader s(r.raw("stop"), "/stop");
    s.only({"tol", "max_iter", "record_stride", "on"});
    s.get_to("tol", c.stop.tol);
    s.get_to("max_iter", c.stop.max_iter);
    s.get_to("record_stride", c.stop.record_stride);
    s.get_to("on", c.stop.on);
    if (c.stop.on != "primal" && c.stop.on != "fixed_point")
      throw config_error("/stop/on", "expected 'primal' or 'fixed_point'");
    if (!(c.stop.tol > 0.0)) throw config_error("/stop/tol", "must be positive");
    if (c.stop.max_iter < 1) throw config_error("/stop/max_iter", "must be at least 1");
    if (c.stop.record_stride < 1) throw config_error("/stop/record_stride", "must be at least 1");
  }
  return c;
}

inline Config parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw config_error("byte " + std::to_string(ex.byte), ex.what());
  }
  return parse_config(doc);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline json to_json(const Config& c) {
  json j;
  if (c.benchmark) {
    const auto& b = *c.benchmark;
    json s{{"generator", b.generator}, {"seed", b.seed}};
    if (b.players) s["players"] = *b.players;
    if (b.purchasers) s["purchasers"] = *b.purchasers;
    if (b.chords) s["chords"] = *b.chords;
    if (b.q_max) s["q_max"] = *b.q_max;
    if (b.capacity) s["capacity"] = *b.capacity;
    j["benchmark"] = s;
  }
  if (c.game) {
    json ps = json::array();
    for (const auto& p : c.game->players) ps.push_back({{"lo", p.lo}, {"hi", p.hi}, {"A", p.A}, {"b", p.b}});
    j["game"] = {{"coupling_rows", c.game->coupling_rows}, {"players", ps}, {"M", c.game->M}, {"c0", c.game->c0}};
  }
  if (c.graph) {
    const auto& g = *c.graph;
    if (g.kind == "edges") {
      json es = json::array();
      for (const auto& [a, b] : g.edges) es.push_back({a, b});
      j["graph"] = {{"kind", "edges"}, {"edges", es}};
    } else {
      j["graph"] = {{"kind", g.kind}, {"chords", g.chords}, {"seed", g.seed}};
    }
  }
  if (c.steps) {
    const auto& s = *c.steps;
    j["steps"] = {{"alpha", s.alpha}, {"kappa", s.kappa}, {"sigma", s.sigma}, {"tau", s.tau},
                  {"eta", s.eta},     {"probs", s.probs}, {"eps", s.eps}};
  }
  if (c.recipe) {
    const auto& r = *c.recipe;
    json s{{"eps", r.eps}};
    if (r.p_min) s["p_min"] = *r.p_min;
    if (r.slow_player) s["slow_player"] = *r.slow_player;
    if (r.probs) s["probs"] = *r.probs;
    if (r.mu) s["mu"] = *r.mu;
    if (r.l_f) s["l_f"] = *r.l_f;
    j["recipe"] = s;
  }
  j["scheduler"] = {{"seed", c.scheduler.seed},
                    {"delay", c.scheduler.delay},
                    {"fixed_delay", c.scheduler.fixed_delay},
                    {"geometric_p", c.scheduler.geometric_p}};
  j["stop"] = {{"tol", c.stop.tol},
               {"max_iter", c.stop.max_iter},
               {"record_stride", c.stop.record_stride},
               {"on", c.stop.on}};
  return j;
}

// ---------------------------------------------------------------------------

/// A configuration turned into solver inputs.
struct Problem {
  GameSpec game;
  CommGraph graph;
  std::vector<std::pair<int, int>> edges;
  StepSizes steps;
  MonotonicityConstants constants;
};

namespace detail {

inline Mat to_mat(const std::vector<std::vector<double>>& rows, Eigen::Index cols, const std::string& at) {
  Mat M(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != cols)
      throw config_error(at + "/" + std::to_string(r), "expected " + std::to_string(cols) + " columns");
    for (Eigen::Index c = 0; c < cols; ++c) M(static_cast<Eigen::Index>(r), c) = rows[r][c];
  }
  return M;
}

inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<std::vector<double>> from_mat(const Mat& M) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index r = 0; r < M.rows(); ++r) rows[r] = from_vec(M.row(r).transpose());
  return rows;
}

inline GameSpec build_explicit(const GameSection& g) {
  GameDescription d;
  d.coupling_rows = g.coupling_rows;
  int n = 0;
  for (std::size_t i = 0; i < g.players.size(); ++i) {
    const auto& p = g.players[i];
    const std::string at = "/game/players/" + std::to_string(i);
    if (p.lo.size() != p.hi.size()) throw config_error(at, "lo and hi differ in length");
    const auto ni = static_cast<Eigen::Index>(p.lo.size());
    if (static_cast<int>(p.A.size()) != g.coupling_rows)
      throw config_error(at + "/A", "expected " + std::to_string(g.coupling_rows) + " rows");
    PlayerData pd{{to_vec(p.lo), to_vec(p.hi)}, to_mat(p.A, ni, at + "/A"), to_vec(p.b)};
    d.players.push_back(std::move(pd));
    n += static_cast<int>(ni);
  }
  if (static_cast<int>(g.M.size()) != n) throw config_error("/game/M", "expected " + std::to_string(n) + " rows");
  if (static_cast<int>(g.c0.size()) != n) throw config_error("/game/c0", "expected length " + std::to_string(n));
  AffineMap map{to_mat(g.M, n, "/game/M"), to_vec(g.c0)};
  d.affine = map;
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : d.players) {
    offsets.push_back(off);
    off += static_cast<int>(p.box.size());
  }
  d.grad = affine_oracle(std::make_shared<const AffineMap>(map), offsets);
  try {
    return build_game(std::move(d));
  } catch (const instance_error& ex) {
    throw config_error("/game", ex.what());
  }
}

inline std::vector<std::pair<int, int>> graph_edges(const GraphSection& g, int m) {
  if (g.kind == "edges") return g.edges;
  std::mt19937_64 rng(g.seed);
  return ring_with_chords(m, g.chords, rng);
}

}  // namespace detail

inline Problem materialize(const Config& c) {
  Problem p;
  if (c.benchmark) {
    const auto& b = *c.benchmark;
    std::optional<std::vector<std::pair<int, int>>> edges;
    const int m_hint = b.players.value_or(b.generator == "cournot" ? 10 : 6);
    if (c.graph) edges = detail::graph_edges(*c.graph, m_hint);
    try {
      if (b.generator == "cournot") {
        CournotConfig cc;
        cc.seed = b.seed;
        if (b.players) cc.factories = *b.players;
        if (b.purchasers) cc.purchasers = *b.purchasers;
        if (b.chords) cc.chords = *b.chords;
        if (b.q_max) cc.q_max = *b.q_max;
        if (b.capacity) cc.capacity = *b.capacity;
        cc.graph_edges = edges;
        auto inst = gen_cournot(cc);
        p.game = std::move(inst.game);
        p.graph = std::move(inst.graph);
        p.edges = std::move(inst.edges);
      } else {
        DemandResponseConfig dc;
        dc.seed = b.seed;
        if (b.players) dc.users = *b.players;
        if (b.chords) dc.chords = *b.chords;
        dc.graph_edges = edges;
        auto inst = gen_demand_response(dc);
        p.game = std::move(inst.game);
        p.graph = std::move(inst.graph);
        p.edges = std::move(inst.edges);
      }
    } catch (const instance_error& ex) {
      throw config_error("/benchmark", ex.what());
    }
  } else {
    p.game = detail::build_explicit(*c.game);
    p.edges = detail::graph_edges(*c.graph, p.game.players());
    try {
      p.graph = build_graph(p.game.players(), p.edges);
    } catch (const instance_error& ex) {
      throw config_error("/graph", ex.what());
    }
  }

  const int m = p.game.players();
  try {
    if (c.recipe && c.recipe->mu)
      p.constants = make_constants(*c.recipe->mu, *c.recipe->l_f);
    else
      p.constants = estimate_constants(p.game);
  } catch (const instance_error& ex) {
    throw config_error(c.recipe && c.recipe->mu ? "/recipe/mu" : (c.game ? "/game/M" : "/benchmark"), ex.what());
  }

  try {
    if (c.recipe) {
      const auto& r = *c.recipe;
      std::vector<double> probs = uniform_probs(m);
      if (r.probs) probs = *r.probs;
      if (r.p_min) {
        const auto seed = c.benchmark ? c.benchmark->seed : c.scheduler.seed;
        probs = probs_with_min(m, *r.p_min, r.slow_player.value_or(static_cast<int>(seed % m)));
      }
      p.steps = recipe_section5(p.game, p.graph, p.constants, std::move(probs), r.eps);
    } else {
      const auto& s = *c.steps;
      p.steps.alpha = s.alpha;
      p.steps.kappa = s.kappa;
      p.steps.sigma = s.sigma;
      p.steps.tau = s.tau;
      p.steps.eta = s.eta;
      p.steps.probs = s.probs;
      p.steps.eps = s.eps;
      check_shapes(p.steps, p.game, p.graph);
    }
  } catch (const instance_error& ex) {
    throw config_error(c.recipe ? "/recipe" : "/steps", ex.what());
  } catch (const std::invalid_argument& ex) {
    throw config_error(c.recipe ? "/recipe" : "/steps", ex.what());
  }
  return p;
}

/// Self-contained replay document: explicit game, edge list and step sizes.
inline Config export_config(const Problem& p, const Config& base) {
  if (!p.game.affine()) throw std::invalid_argument("only affine games can be exported");
  Config c;
  GameSection g;
  g.coupling_rows = p.game.coupling_rows();
  for (const auto& pd : p.game.player_data())
    g.players.push_back({detail::from_vec(pd.box.lo), detail::from_vec(pd.box.hi), detail::from_mat(pd.A),
                         detail::from_vec(pd.b)});
  g.M = detail::from_mat(p.game.affine()->M);
  g.c0 = detail::from_vec(p.game.affine()->c0);
  c.game = std::move(g);
  c.graph = GraphSection{"edges", p.edges, 0, 1};
  c.steps = StepsSection{p.steps.alpha, p.steps.kappa, p.steps.sigma, p.steps.tau,
                         p.steps.eta,   p.steps.probs, p.steps.eps};
  c.scheduler = base.scheduler;
  c.stop = base.stop;
  return c;
}

inline SchedulerConfig scheduler_config(const Config& c, const StepSizes& s) {
  SchedulerConfig sc;
  sc.probs = s.probs;
  sc.seed = c.scheduler.seed;
  sc.policy = c.scheduler.delay == "fixed"       ? DelayPolicy::fixed
              : c.scheduler.delay == "geometric" ? DelayPolicy::geometric
                                                 : DelayPolicy::uniform;
  sc.fixed_delay = c.scheduler.fixed_delay;
  sc.geometric_p = c.scheduler.geometric_p;
  return sc;
}

inline StopRule stop_rule(const Config& c) {
  StopRule r;
  r.tol = c.stop.tol;
  r.max_iter = c.stop.max_iter;
  r.record_stride = c.stop.record_stride;
  r.on = c.stop.on == "primal" ? StopOn::primal : StopOn::fixed_point;
  return r;
}

}  // namespace gne
