#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "thermocc/config_io.hpp"

using namespace thermocc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + THERMOCC_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const fs::path kReference = testing::data_dir() / "reference.cfg";

}  // namespace

TEST_CASE("simulate") {
  const auto dir = testing::scratch_dir("cli_simulate");
  const auto r = cli("simulate --config " + q(kReference) + " --seed 1 --out " + q(dir / "run"), dir);
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "run" / "sensors.csv") == 601);
  CHECK(line_count(dir / "run" / "truth.csv") == 601);
  CHECK(r.out.find("k=16") != std::string::npos);
  CHECK(r.out.find("z=600") != std::string::npos);
  CHECK(r.out.find("N=45") != std::string::npos);

  // Same seed, same bytes.
  REQUIRE(cli("simulate --config " + q(kReference) + " --seed 1 --out " + q(dir / "again"), dir).code == 0);
  CHECK(slurp(dir / "run" / "sensors.csv") == slurp(dir / "again" / "sensors.csv"));

  SUBCASE("two-step horizon") {
    auto cfg = testing::small_scenario(2, 2, 4, 2, 1);
    save_scenario(cfg, dir / "short.cfg");
    REQUIRE(cli("simulate --config " + q(dir / "short.cfg") + " --out " + q(dir / "short"), dir).code == 0);
    CHECK(line_count(dir / "short" / "sensors.csv") == 3);
    CHECK(line_count(dir / "short" / "truth.csv") == 3);
  }
  SUBCASE("nested output directory is created") {
    REQUIRE(cli("simulate --config " + q(kReference) + " --out " + q(dir / "a" / "b" / "c"), dir).code == 0);
    CHECK(fs::exists(dir / "a" / "b" / "c" / "sensors.csv"));
  }
  SUBCASE("unwritable output") {
    std::ofstream(dir / "blocker") << "file, not a directory\n";
    const auto bad = cli("simulate --config " + q(kReference) + " --out " + q(dir / "blocker" / "sub"), dir);
    CHECK(bad.code == 3);
    CHECK_FALSE(bad.err.empty());
  }
  SUBCASE("bad input") {
    CHECK(cli("simulate --config " + q(dir / "nope.cfg") + " --out " + q(dir / "x"), dir).code == 3);
    std::ofstream(dir / "broken.cfg") << "[thermal]\nalpha = fast\n";
    CHECK(cli("simulate --config " + q(dir / "broken.cfg") + " --out " + q(dir / "x"), dir).code == 1);
    CHECK(cli("simulate --config " + q(kReference) + " --noise-std=-1 --out " + q(dir / "x"), dir).code == 1);
    CHECK(cli("simulate", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(cli("--help", dir).code == 0);
  }
}

TEST_CASE("reconstruct and score") {
  const auto dir = testing::scratch_dir("cli_reconstruct");
  REQUIRE(cli("simulate --config " + q(kReference) + " --seed 2 --noise-std 0.01 --out " + q(dir / "sim"), dir).code == 0);

  const auto r = cli("reconstruct --sensors " + q(dir / "sim" / "sensors.csv") + " --config " + q(kReference) +
                         " --out " + q(dir / "rec"),
                     dir);
  REQUIRE(r.code == 0);
  for (const char* f : {"estimate.csv", "mobility_map.csv", "solver_stats.json", "score.json"})
    CHECK(fs::exists(dir / "rec" / f));
  const auto score = nlohmann::json::parse(slurp(dir / "rec" / "score.json"));
  CHECK(score["tre"].get<double>() < 0.1);
  CHECK(score["nmae"].size() == 16);
  const auto stats = nlohmann::json::parse(slurp(dir / "rec" / "solver_stats.json"));
  CHECK(stats["converged"].get<bool>());
  CHECK(stats["kkt_residual"].get<double>() <= 1e-6);
  CHECK(stats["max_constraint_violation"].get<double>() <= 1e-8);
  CHECK(line_count(dir / "rec" / "estimate.csv") == 601);
  CHECK(line_count(dir / "rec" / "mobility_map.csv") == 1 + 16 * 10);

  // The score command reproduces score.json from the written map.
  const auto s = cli("score --map " + q(dir / "rec" / "mobility_map.csv") + " --truth " + q(dir / "sim" / "truth.csv") +
                         " --out " + q(dir / "scored"),
                     dir);
  REQUIRE(s.code == 0);
  const auto rescored = nlohmann::json::parse(slurp(dir / "scored" / "score.json"));
  CHECK(rescored["tre"].get<double>() == doctest::Approx(score["tre"].get<double>()));

  SUBCASE("no truth next to the sensors") {
    fs::create_directories(dir / "bare");
    fs::copy_file(dir / "sim" / "sensors.csv", dir / "bare" / "sensors.csv");
    const auto b = cli("reconstruct --sensors " + q(dir / "bare" / "sensors.csv") + " --config " + q(kReference) +
                           " --out " + q(dir / "bare_rec"),
                       dir);
    CHECK(b.code == 0);
    CHECK(fs::exists(dir / "bare_rec" / "mobility_map.csv"));
    CHECK_FALSE(fs::exists(dir / "bare_rec" / "score.json"));
  }
  SUBCASE("infeasible band") {
    const auto b = cli("reconstruct --sensors " + q(dir / "sim" / "sensors.csv") + " --config " + q(kReference) +
                           " --eps1=-0.5 --eps2=-0.5 --out " + q(dir / "infeasible"),
                       dir);
    CHECK(b.code == 2);
    CHECK(b.err.find("lower bound") != std::string::npos);
    const auto st = nlohmann::json::parse(slurp(dir / "infeasible" / "solver_stats.json"));
    CHECK(st["status"] == "failed");
  }
  SUBCASE("conflicting options") {
    CHECK(cli("reconstruct --sensors " + q(dir / "sim" / "sensors.csv") + " --config " + q(kReference) +
                  " --eps 0.2 --eps1 0.1 --out " + q(dir / "x"),
              dir)
              .code == 1);
  }
}

TEST_CASE("ingest") {
  const auto dir = testing::scratch_dir("cli_ingest");
  const auto fx = testing::fixtures_dir();
  auto args = [&](const std::string& csv, int d, const fs::path& out) {
    return "ingest --csv " + q(fx / csv) + " --columns " + q(fx / ("dataset" + std::to_string(d) + ".columns")) +
           " --policy " + q(fx / ("dataset" + std::to_string(d) + ".policy")) + " --config " +
           q(fx / ("dataset" + std::to_string(d) + ".cfg")) + " --out " + q(out);
  };
  const auto r = cli(args("dataset1_schema.csv", 1, dir / "d1"), dir);
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "d1" / "sensors.csv") == 201);
  CHECK(slurp(dir / "d1" / "sensors.csv").rfind("step,t_hours,T_ext_meas_K,u_1,Thvac_meas_1_K,T_meas_1_K\n", 0) == 0);
  REQUIRE(cli(args("dataset1_schema.csv", 1, dir / "d1b"), dir).code == 0);
  CHECK(slurp(dir / "d1" / "sensors.csv") == slurp(dir / "d1b" / "sensors.csv"));

  // The written scenario drives a reconstruction of the ingested trace.
  REQUIRE(cli(args("dataset2_schema.csv", 2, dir / "d2"), dir).code == 0);
  const auto rec = cli("reconstruct --sensors " + q(dir / "d2" / "sensors.csv") + " --config " +
                           q(dir / "d2" / "scenario.cfg") + " --out " + q(dir / "d2rec"),
                       dir);
  CHECK(rec.code == 0);
  CHECK(fs::exists(dir / "d2rec" / "mobility_map.csv"));

  const auto gap = cli(args("dataset2_gap.csv", 2, dir / "gap"), dir);
  CHECK(gap.code == 1);
  CHECK(gap.err.find("steps 29..38") != std::string::npos);
}

TEST_CASE("sweep") {
  const auto dir = testing::scratch_dir("cli_sweep");
  save_scenario(testing::small_scenario(2, 2, 10, 60, 20), dir / "small.cfg");
  std::ofstream(dir / "tiny.sweep") << "[sweep]\nconfig = small.cfg\nparameter = lambda\nvalues = 0.1, 1\n"
                                       "seeds = 1, 2\neps = 0.2\nnoise_std = 0.05\n";
  const auto r = cli("sweep " + q(dir / "tiny.sweep") + " --jobs 2 --out " + q(dir / "out"), dir);
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "out" / "sweep.csv") == 5);
  CHECK(line_count(dir / "out" / "sweep_summary.csv") == 3);
  CHECK(r.out.find("lambda") != std::string::npos);
  CHECK(cli("sweep " + q(dir / "missing.sweep"), dir).code == 3);
}
