#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rlgps/config.hpp"
#include "rlgps/experiment.hpp"
#include "rlgps/report.hpp"

namespace fs = std::filesystem;
using namespace rlgps;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rlgps_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config() {
  std::istringstream in(
      "[experiment]\nname = tiny\n[env]\ntype = navigation\nbins = 4\n"
      "[kernel]\nfamily = matern15\n[run]\nepisodes = 6\nhorizon = 3\ntrials = 2\nseed = 5\n");
  return load_experiment(IniFile::parse(in, "tiny.ini"));
}

int run_cli(const std::string& args) {
  const char* exe = std::getenv("RLGPS_CLI");
  REQUIRE(exe != nullptr);
  const int status = std::system((std::string(exe) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("ini parsing") {
  std::istringstream in("# comment\n[run]\nepisodes = 12\n; other\n\n[kernel]\nfamily=rbf\n");
  const IniFile ini = IniFile::parse(in, "x.ini");
  CHECK(ini.get("run.episodes") == "12");
  CHECK(ini.get("kernel.family") == "rbf");
  CHECK(ini.line_of("kernel.family") == 7);
  CHECK_FALSE(ini.get("run.seed").has_value());

  std::istringstream dup("[run]\nseed = 1\nseed = 2\n");
  try {
    (void)IniFile::parse(dup, "d.ini");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("d.ini:3") != std::string::npos);
  }
  std::istringstream no_eq("[run]\nseed 1\n");
  CHECK_THROWS_AS(IniFile::parse(no_eq), ConfigError);
}

TEST_CASE("config values are validated with line numbers") {
  std::istringstream bad("[run]\nepisodes = 10\nnoise = abc\n");
  try {
    (void)load_experiment(IniFile::parse(bad, "bad.ini"));
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.ini:3") != std::string::npos);
  }
  std::istringstream negative("[run]\nnoise = -1\n");
  CHECK_THROWS_AS(load_experiment(IniFile::parse(negative)), ConfigError);
  std::istringstream unknown("[run]\nepisodez = 10\n");
  CHECK_THROWS_AS(load_experiment(IniFile::parse(unknown)), ConfigError);
  std::istringstream family("[kernel]\nfamily = cosine\n");
  CHECK_THROWS_AS(load_experiment(IniFile::parse(family)), ConfigError);
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"gp_sampled", "navigation", "maze", "bandit", "verify"}) {
    const std::string path = std::string(RLGPS_SOURCE_DIR) + "/configs/" + name + ".ini";
    CAPTURE(path);
    const ExperimentConfig cfg = load_experiment(path);
    CHECK_NOTHROW(cfg.validate());
    CHECK_NOTHROW((void)cfg.make_env(cfg.seed));
  }
}

TEST_CASE("config hash tracks settings but not worker count") {
  ExperimentConfig a = tiny_config();
  ExperimentConfig b = a;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.workers = 4;
  CHECK(a.hash() == b.hash());
  b.base.lengthscale = 0.25;
  CHECK(a.hash() != b.hash());
  for (const auto& key : config_keys()) CHECK(a.canonical().count(key) == 1);
}

TEST_CASE("seeds are paired across sweep cells") {
  const ExperimentConfig base = tiny_config();
  const auto cells = expand_sweep(base, {parse_sweep_axis("kernel.family=rbf,matern15"),
                                         parse_sweep_axis("kernel.lengthscale=0.1,0.2,0.3")});
  REQUIRE(cells.size() == 6);
  CHECK(cells.front().first == "family-rbf_lengthscale-0.1");
  for (const auto& [name, cfg] : cells) {
    CHECK(env_seed(cfg, 1) == env_seed(base, 1));
    CHECK(agent_seed(cfg, 1) == agent_seed(base, 1));
  }
  CHECK(env_seed(base, 0) != env_seed(base, 1));
  const SweepAxis semi = parse_sweep_axis("env.goal=0.9,0.9;0.5,0.5");
  CHECK(semi.values.size() == 2);
  CHECK_THROWS_AS(parse_sweep_axis("nope=1,2"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_axis("kernel.family"), ConfigError);
}

TEST_CASE("trace CSV round trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  RegretTrace t;
  for (Index k = 1; k <= 20; ++k) {
    EpisodeRecord e;
    e.episode = k;
    e.start_cell = k * 3;
    e.v_star = u(rng);
    e.achieved = u(rng);
    e.inst_regret = u(rng);
    e.cum_regret = u(rng) * 1e-300;
    e.info_gain = u(rng) * 1e10;
    e.xi_sum = 1.0 / 3.0;
    e.wall_ms = 0.0;
    t.episodes.push_back(e);
  }
  std::stringstream buf;
  write_trace_csv(buf, 7, t);
  const TraceFile back = read_trace_csv(buf);
  CHECK(back.trial == 7);
  REQUIRE(back.trace.episodes.size() == t.episodes.size());
  for (std::size_t i = 0; i < t.episodes.size(); ++i) {
    const EpisodeRecord &a = t.episodes[i], &b = back.trace.episodes[i];
    CHECK(a.episode == b.episode);
    CHECK(a.start_cell == b.start_cell);
    CHECK(a.v_star == b.v_star);
    CHECK(a.achieved == b.achieved);
    CHECK(a.inst_regret == b.inst_regret);
    CHECK(a.cum_regret == b.cum_regret);
    CHECK(a.info_gain == b.info_gain);
    CHECK(a.xi_sum == b.xi_sum);
  }

  std::istringstream bad(std::string(kTraceHeader) + "\n0,1,0,1,1,0,0,0,0,0\n0,2,0,1,x,0,0,0,0,0\n");
  try {
    (void)read_trace_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream header("a,b\n");
  CHECK_THROWS_AS(read_trace_csv(header), ParseError);
}

TEST_CASE("aggregation matches an independent two-pass computation") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<RegretTrace> traces(5);
  for (auto& t : traces) {
    double cum = 0.0;
    for (Index k = 1; k <= 30; ++k) {
      cum += u(rng);
      EpisodeRecord e;
      e.episode = k;
      e.cum_regret = cum;
      t.episodes.push_back(e);
    }
  }
  const AggregateResult agg = aggregate("g", traces);
  REQUIRE(agg.mean.size() == 30);
  for (std::size_t k = 0; k < 30; ++k) {
    std::vector<double> xs;
    for (const auto& t : traces) xs.push_back(t.episodes[k].cum_regret);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sem = std::sqrt(ss / double(xs.size() - 1)) / std::sqrt(double(xs.size()));
    std::sort(xs.begin(), xs.end());
    CHECK(std::abs(agg.mean[k] - mean) <= 1e-12 * std::max(1.0, mean));
    CHECK(std::abs(agg.sem[k] - sem) <= 1e-12 * std::max(1.0, sem));
    CHECK(agg.median[k] == xs[2]);
  }
  CHECK(mean_at(agg, 30) == agg.mean.back());
  CHECK_THROWS_AS(mean_at(agg, 31), InputError);
}

TEST_CASE("log-log slope recovers power laws") {
  for (double p : {0.5, 1.0, 1.5}) {
    AggregateResult agg;
    for (Index k = 1; k <= 200; ++k) {
      agg.episode.push_back(k);
      agg.mean.push_back(3.0 * std::pow(double(k), p));
    }
    CHECK(loglog_slope(agg, 100, 200) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("experiments write reproducible traces and a manifest") {
  const ExperimentConfig cfg = tiny_config();
  const fs::path d1 = scratch("run1"), d2 = scratch("run2");
  const GroupOutcome g1 = run_experiment(cfg, d1);
  ExperimentConfig parallel = cfg;
  parallel.workers = 2;
  const GroupOutcome g2 = run_experiment(parallel, d2);
  REQUIRE(g1.trials.size() == 2);
  for (const char* f : {"trial_000.csv", "trial_001.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
  CHECK(slurp(d1 / "trial_000.csv") != slurp(d1 / "trial_001.csv"));
  const std::string manifest = slurp(d1 / "manifest.json");
  CHECK(manifest.find(cfg.hash()) != std::string::npos);
  CHECK(manifest.find("\"trials\"") != std::string::npos);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("svg output") {
  AggregateResult a;
  a.group = "rbf";
  a.trials = 2;
  for (Index k = 1; k <= 10; ++k) {
    a.episode.push_back(k);
    a.mean.push_back(double(k));
    a.sem.push_back(0.1);
    a.median.push_back(double(k));
  }
  std::stringstream svg;
  write_regret_svg(svg, {a}, "title");
  const std::string s = svg.str();
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find(group_color("rbf")) != std::string::npos);
  CHECK(group_color("rbf") == group_color("rbf"));
}

TEST_CASE("check line format") {
  const std::string s = format_check({"variance_sum", true, 1.5, 2.0, 0.5});
  CHECK(s.rfind("CHECK variance_sum PASS lhs=1.5 rhs=2 margin=0.5", 0) == 0);
}

TEST_CASE("command line front end") {
  const fs::path dir = scratch("cli");
  const std::string cfg = std::string(RLGPS_SOURCE_DIR) + "/configs/navigation.ini";
  const std::string common = " --set run.episodes=3 --set run.horizon=2 --set env.bins=4 --set output.dir=" + dir.string();
  CHECK(run_cli("run " + cfg + " --set run.trials=1" + common) == 0);
  CHECK(fs::exists(dir / "navigation" / "trial_000.csv"));
  CHECK(run_cli("sweep " + cfg + " --axis kernel.family=rbf,matern15 --set run.trials=1" + common) == 0);
  CHECK(fs::exists(dir / "navigation" / "family-rbf" / "trial_000.csv"));
  CHECK(run_cli("plot " + (dir / "navigation").string() + " -o " + (dir / "p.svg").string()) == 0);
  CHECK(fs::exists(dir / "p.svg"));
  CHECK(run_cli("run " + cfg + " --set kernel.family=laplace") != 0);
  CHECK(run_cli("run /nonexistent.ini") != 0);
  CHECK(run_cli("bogus") != 0);
  fs::remove_all(dir);
}
