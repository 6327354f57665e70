#include "test_support.hpp"

#include "gne/cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gne;
using namespace gne::testing;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("gne_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" + std::to_string(::getpid()) +
             "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

const char* cournot_doc = R"({
  "benchmark": {"generator": "cournot", "seed": 1},
  "recipe": {"eps": 5},
  "scheduler": {"seed": 1},
  "stop": {"tol": 1e-2, "max_iter": 2000000, "record_stride": 100}
})";

const char* sync_doc = R"({
  "benchmark": {"generator": "cournot", "seed": 2},
  "recipe": {"eps": 5},
  "stop": {"tol": 1e-6, "max_iter": 1000000}
})";

// ---------------------------------------------------------------------------
// Hand-rolled generator of random configuration documents.

std::vector<double> rand_list(Rng& rng, int n, double lo, double hi) {
  std::vector<double> v;
  for (int t = 0; t < n; ++t) v.push_back(uniform(rng, lo, hi));
  return v;
}

Config random_config(Rng& rng) {
  Config c;
  const auto coin = [&] { return rng() % 2 == 0; };
  const int m = 2 + static_cast<int>(rng() % 4);
  if (coin()) {
    BenchmarkSection b;
    b.generator = coin() ? "cournot" : "demand_response";
    b.seed = rng() % 1000;
    if (coin()) b.players = m;
    if (coin()) b.chords = static_cast<int>(rng() % 3);
    if (coin()) b.q_max = uniform(rng, 1, 100);
    if (coin()) b.purchasers = 1 + static_cast<int>(rng() % 4);
    if (coin()) b.capacity = rand_list(rng, 3, 1, 50);
    c.benchmark = b;
    if (coin()) c.graph = GraphSection{"ring", {}, static_cast<int>(rng() % 3), rng() % 50};
  } else {
    GameSection g;
    g.coupling_rows = 1 + static_cast<int>(rng() % 2);
    int n = 0;
    for (int i = 0; i < m; ++i) {
      const int ni = 1 + static_cast<int>(rng() % 2);
      PlayerSection p;
      p.lo = rand_list(rng, ni, -5, 0);
      p.hi = rand_list(rng, ni, 1, 5);
      for (int r = 0; r < g.coupling_rows; ++r) p.A.push_back(rand_list(rng, ni, -1, 1));
      p.b = rand_list(rng, g.coupling_rows, 0, 3);
      g.players.push_back(p);
      n += ni;
    }
    for (int r = 0; r < n; ++r) g.M.push_back(rand_list(rng, n, -2, 2));
    g.c0 = rand_list(rng, n, -3, 3);
    c.game = g;
    GraphSection gr;
    for (int i = 0; i + 1 < m; ++i) gr.edges.emplace_back(i, i + 1);
    c.graph = gr;
  }
  if (coin()) {
    RecipeSection r;
    r.eps = static_cast<int>(rng() % 20);
    if (coin()) r.p_min = uniform(rng, 0.01, 0.2);
    if (coin()) r.slow_player = static_cast<int>(rng() % m);
    if (!r.p_min && coin()) r.probs = rand_list(rng, m, 0.1, 1);
    if (coin()) {
      r.mu = uniform(rng, 0.1, 1);
      r.l_f = uniform(rng, 1, 10);
    }
    c.recipe = r;
  } else {
    StepsSection s;
    s.alpha = rand_list(rng, m, 0.1, 0.9);
    s.kappa = rand_list(rng, m - 1, 0.5, 3);
    s.sigma = rand_list(rng, m, 0.01, 0.5);
    s.tau = rand_list(rng, m, 0.001, 0.1);
    s.eta = uniform(rng, 0.01, 1);
    s.probs = rand_list(rng, m, 0.1, 1);
    s.eps = static_cast<int>(rng() % 10);
    c.steps = s;
  }
  c.scheduler.seed = rng() % 100000;
  c.scheduler.delay = std::vector<std::string>{"uniform", "fixed", "geometric"}[rng() % 3];
  c.scheduler.fixed_delay = static_cast<int>(rng() % 6);
  c.scheduler.geometric_p = uniform(rng, 0.05, 1);
  c.stop.tol = std::pow(10.0, -static_cast<double>(rng() % 12));
  c.stop.max_iter = 1 + static_cast<long>(rng() % 10000000);
  c.stop.record_stride = 1 + static_cast<long>(rng() % 100);
  c.stop.on = coin() ? "primal" : "fixed_point";
  return c;
}

int run_tool(const std::string& args) {
  const int status = std::system((std::string(GNE_SIM_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, RoundTripProperty) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const Config c = random_config(rng);
    const std::string text = to_json(c).dump();
    const Config back = parse_config_text(text);
    ASSERT_TRUE(back == c) << text;
    EXPECT_EQ(to_json(back).dump(), text);
  }
}

TEST(Config, ErrorsCarryLocation) {
  auto where = [](const std::string& text) {
    try {
      parse_config_text(text);
    } catch (const config_error& ex) {
      return ex.where();
    }
    return std::string("no error");
  };
  EXPECT_EQ(where(R"({"benchmark": {"generator": "cournot"}, "recipe": {}, "stop": {"tol": -1}})"), "/stop/tol");
  EXPECT_EQ(where(R"({"benchmark": {"generator": "cournot", "colour": 1}, "recipe": {}})"), "/benchmark/colour");
  EXPECT_EQ(where(R"({"recipe": {}})"), "/");
  EXPECT_EQ(where(R"({"benchmark": {"generator": "nope"}, "recipe": {}})"), "/benchmark/generator");
  EXPECT_EQ(where(R"({"benchmark": {"generator": "cournot"}, "recipe": {"eps": "five"}})"), "/recipe/eps");
  EXPECT_EQ(where(R"({"benchmark": {"generator": "cournot"}, "recipe": {}, "scheduler": {"delay": "poisson"}})"),
            "/scheduler/delay");
  EXPECT_EQ(where(R"({"game": {"coupling_rows": 1, "players": [], "M": [], "c0": []}, "recipe": {}})"),
            "/game/players");
  EXPECT_EQ(where(R"({"game": {"coupling_rows": 0, "players": [{"lo": [0], "hi": [1], "A": [], "b": []}],
                     "M": [[1]], "c0": [0]}, "recipe": {}})"),
            "/graph");
  EXPECT_EQ(where(R"({"benchmark": {"generator": "cournot"}, "recipe": {"p_min": 0.1, "probs": [1]}})"), "/recipe");
  EXPECT_EQ(where("{\"benchmark\": ").rfind("byte ", 0), 0u);
}

TEST(Config, ExportIsAffineReplay) {
  const Config c = parse_config_text(sync_doc);
  const Problem p = materialize(c);
  const Config e = export_config(p, c);
  const Problem q = materialize(parse_config_text(to_json(e).dump()));
  EXPECT_EQ(q.game.affine()->M, p.game.affine()->M);
  EXPECT_EQ(q.game.affine()->c0, p.game.affine()->c0);
  EXPECT_EQ(q.edges, p.edges);
  EXPECT_EQ(q.steps.tau, p.steps.tau);
  EXPECT_EQ(q.steps.eta, p.steps.eta);
}

TEST(CsvSchema, HeadersAndEmptyFields) {
  EXPECT_EQ(csv_columns("sync"), (std::vector<std::string>{"k", "primal_res", "dual_res", "fp_res_sq", "dist_sq"}));
  EXPECT_EQ(csv_columns("sync-fb"), csv_columns("sync"));
  EXPECT_EQ(csv_columns("async"), (std::vector<std::string>{"k", "primal_res", "dual_res", "fp_res_sq", "dist_sq",
                                                            "phi", "activation", "max_delay_seen"}));
  RunRecord rec;
  rec.mode = "async";
  RunRow r;
  r.k = 4;
  r.primal = 0.5;
  rec.rows.push_back(r);
  std::ostringstream os;
  write_csv(os, rec);
  EXPECT_EQ(os.str(), "k,primal_res,dual_res,fp_res_sq,dist_sq,phi,activation,max_delay_seen\n4,0.5,,,,,,\n");
}

TEST(Validate, ExitCodes) {
  TempDir tmp;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(write_file(tmp / "ok.json", cournot_doc).string(), out, err), exit_ok) << err.str();
  EXPECT_NE(out.str().find("valid"), std::string::npos);

  // Explicit steps with sigma of player 3 raised to its bound.
  Config c = parse_config_text(cournot_doc);
  const Problem p = materialize(c);
  Config e = export_config(p, c);
  e.steps->sigma[3] = validate_problem(p).steps.players[3].sigma_bound;
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_validate(write_file(tmp / "bound.json", to_json(e).dump()).string(), out2, err2), exit_validation);
  EXPECT_NE(out2.str().find("player 3"), std::string::npos) << out2.str();

  std::ostringstream out3, err3;
  EXPECT_EQ(cmd_validate(write_file(tmp / "missing.json", R"({"recipe": {"eps": 5}})").string(), out3, err3),
            exit_config);
  EXPECT_NE(err3.str().find("config error at /"), std::string::npos);
  EXPECT_EQ(cmd_validate((tmp / "absent.json").string(), out3, err3), exit_config);
}

TEST(Run, SyncWritesMonotoneResidualColumn) {
  TempDir tmp;
  RunOptions o;
  o.mode = "sync";
  o.out = (tmp / "sync.csv").string();
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(write_file(tmp / "c.json", sync_doc).string(), o, out, err), exit_ok) << err.str();
  std::ifstream in(*o.out);
  const auto rec = read_csv(in, "sync");
  ASSERT_GT(rec.rows.size(), 10u);
  for (std::size_t t = 1; t + 1 < rec.rows.size(); ++t)
    EXPECT_LE(rec.rows[t].fp_res_sq, rec.rows[t - 1].fp_res_sq * (1 + 1e-9) + 1e-24) << "k=" << rec.rows[t].k;
  const auto side = nlohmann::json::parse(slurp(*o.out + ".json"));
  EXPECT_TRUE(side.at("fejer").at("ok").get<bool>());
  EXPECT_TRUE(side.at("rate").at("ok").get<bool>());
  EXPECT_TRUE(side.at("validated").get<bool>());
  EXPECT_TRUE(side.at("steps").at("ok").get<bool>());
  EXPECT_NE(out.str().find("converged"), std::string::npos);
}

TEST(Run, AsyncIsByteIdenticalAcrossRuns) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", cournot_doc).string();
  RunOptions o;
  o.mode = "async";
  o.seed = 1;
  std::ostringstream out, err;
  o.out = (tmp / "a.csv").string();
  ASSERT_EQ(cmd_run(cfg, o, out, err), exit_ok) << err.str();
  o.out = (tmp / "b.csv").string();
  ASSERT_EQ(cmd_run(cfg, o, out, err), exit_ok);
  EXPECT_EQ(slurp(tmp / "a.csv"), slurp(tmp / "b.csv"));
  EXPECT_EQ(slurp(tmp / "a.csv.json"), slurp(tmp / "b.csv.json"));
  o.seed = 2;
  o.out = (tmp / "c.csv").string();
  ASSERT_EQ(cmd_run(cfg, o, out, err), exit_ok);
  EXPECT_NE(slurp(tmp / "a.csv"), slurp(tmp / "c.csv"));
}

TEST(Run, InvalidBetaNeedsForce) {
  TempDir tmp;
  Config c = parse_config_text(cournot_doc);
  Config e = export_config(materialize(c), c);
  e.steps->eta *= 100.0;
  const auto cfg = write_file(tmp / "beta.json", to_json(e).dump()).string();
  RunOptions o;
  o.mode = "async";
  o.out = (tmp / "forced.csv").string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(cfg, o, out, err), exit_validation);
  EXPECT_NE(err.str().find("--force"), std::string::npos);
  EXPECT_FALSE(fs::exists(*o.out));

  // Synchronous modes do not use beta.
  RunOptions s;
  s.mode = "sync";
  s.out = (tmp / "sync.csv").string();
  EXPECT_EQ(cmd_run(cfg, s, out, err), exit_ok) << err.str();

  o.force = true;
  const int code = cmd_run(cfg, o, out, err);
  EXPECT_TRUE(code == exit_ok || code == exit_diverged);
  ASSERT_TRUE(fs::exists(*o.out));
  const auto side = nlohmann::json::parse(slurp(*o.out + ".json"));
  EXPECT_FALSE(side.at("validated").get<bool>());
  EXPECT_LE(side.at("steps").at("beta").get<double>(), 0.0);
}

TEST(Run, NonConvergenceStillWritesRecord) {
  TempDir tmp;
  Config c = parse_config_text(sync_doc);
  c.stop.max_iter = 20;
  RunOptions o;
  o.out = (tmp / "short.csv").string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(write_file(tmp / "c.json", to_json(c).dump()).string(), o, out, err), exit_diverged);
  std::ifstream in(*o.out);
  EXPECT_EQ(read_csv(in, "sync").rows.size(), 21u);
}

TEST(Run, ConfigErrorsExitTwo) {
  TempDir tmp;
  RunOptions o;
  o.mode = "warp";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(write_file(tmp / "c.json", sync_doc).string(), o, out, err), exit_config);
  o.mode = "sync";
  EXPECT_EQ(cmd_run(write_file(tmp / "bad.json", "{not json").string(), o, out, err), exit_config);
  Config c = parse_config_text(sync_doc);
  c.stop.on = "fixed_point";
  o.mode = "async";
  EXPECT_EQ(cmd_run(write_file(tmp / "fp.json", to_json(c).dump()).string(), o, out, err), exit_config);
}

TEST(Run, DefaultOutputDirectoryFromEnvironment) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", sync_doc).string();
  fs::create_directories(tmp / "out");
  ::setenv("GNE_OUT_DIR", (tmp / "out").c_str(), 1);
  RunOptions o;
  o.seed = 4;
  std::ostringstream out, err;
  const int code = cmd_run(cfg, o, out, err);
  ::unsetenv("GNE_OUT_DIR");
  EXPECT_EQ(code, exit_ok) << err.str();
  EXPECT_TRUE(fs::exists(tmp / "out" / "run_sync_seed4.csv"));
}

TEST(Run, ExportedConfigReplaysIdentically) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", cournot_doc).string();
  Config c = parse_config_text(cournot_doc);
  const auto replay = write_file(tmp / "replay.json", to_json(export_config(materialize(c), c)).dump()).string();
  for (const std::string mode : {"sync", "async"}) {
    RunOptions o;
    o.mode = mode;
    std::ostringstream out, err;
    o.out = (tmp / ("orig_" + mode + ".csv")).string();
    ASSERT_EQ(cmd_run(cfg, o, out, err), exit_ok) << err.str();
    o.out = (tmp / ("replay_" + mode + ".csv")).string();
    ASSERT_EQ(cmd_run(replay, o, out, err), exit_ok) << err.str();
    EXPECT_EQ(slurp(tmp / ("orig_" + mode + ".csv")), slurp(tmp / ("replay_" + mode + ".csv"))) << mode;
  }
}

TEST(Sweep, SinglePointDegeneratesToRun) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", cournot_doc).string();
  SweepOptions s;
  s.vary = "eps";
  s.values = {5};
  s.seeds = 1;
  s.out_dir = (tmp / "sweep").string();
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(cfg, s, out, err), exit_ok) << err.str();
  RunOptions o;
  o.mode = "async";
  o.seed = 1;
  o.out = (tmp / "run.csv").string();
  ASSERT_EQ(cmd_run(cfg, o, out, err), exit_ok);
  EXPECT_EQ(slurp(tmp / "sweep" / "eps_5_seed1.csv"), slurp(tmp / "run.csv"));
  const std::string summary = slurp(tmp / "sweep" / "summary.csv");
  EXPECT_EQ(summary.rfind("vary,value,runs,converged,median_iterations\neps,5,1,1,", 0), 0u) << summary;
}

TEST(Sweep, ParallelWorkersMatchSerial) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", cournot_doc).string();
  SweepOptions s;
  s.vary = "pmin";
  s.values = {0.06, 0.1};
  s.seeds = 2;
  std::ostringstream out, err;
  s.out_dir = (tmp / "serial").string();
  ASSERT_EQ(cmd_sweep(cfg, s, out, err), exit_ok) << err.str();
  s.jobs = 3;
  s.out_dir = (tmp / "parallel").string();
  ASSERT_EQ(cmd_sweep(cfg, s, out, err), exit_ok) << err.str();
  for (const auto& entry : fs::directory_iterator(tmp / "serial"))
    EXPECT_EQ(slurp(entry.path()), slurp(tmp / "parallel" / entry.path().filename())) << entry.path();
  EXPECT_TRUE(fs::exists(tmp / "serial" / "pmin_0.06_seed2.csv"));
}

TEST(Sweep, RejectsBadArguments) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", cournot_doc).string();
  std::ostringstream out, err;
  SweepOptions s;
  s.vary = "alpha";
  s.values = {1};
  EXPECT_EQ(cmd_sweep(cfg, s, out, err), exit_config);
  s.vary = "eps";
  s.values = {};
  EXPECT_EQ(cmd_sweep(cfg, s, out, err), exit_config);
  Config c = parse_config_text(cournot_doc);
  const auto exported = write_file(tmp / "e.json", to_json(export_config(materialize(c), c)).dump()).string();
  s.values = {5};
  EXPECT_EQ(cmd_sweep(exported, s, out, err), exit_config);
}

TEST(Tool, ExitCodesFromBinary) {
  TempDir tmp;
  const auto cfg = write_file(tmp / "c.json", cournot_doc).string();
  EXPECT_EQ(run_tool("validate " + cfg), 0);
  EXPECT_EQ(run_tool("validate " + write_file(tmp / "bad.json", "{}").string()), 2);
  EXPECT_EQ(run_tool("frobnicate"), 2);
  EXPECT_EQ(run_tool("run " + write_file(tmp / "s.json", sync_doc).string() + " --mode sync --out " +
                     (tmp / "t.csv").string()),
            0);
  EXPECT_TRUE(fs::exists(tmp / "t.csv"));
  EXPECT_EQ(run_tool("export " + cfg), 0);
}
