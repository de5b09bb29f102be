#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sys/wait.h>

#include "roadwork/eval.hpp"
#include "support.hpp"

using namespace roadwork::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr, interleaved
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(ROADWORK_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string net_args() {
  return "--net " + data_path("SiouxFalls_net.tntp") + " --trips " + data_path("SiouxFalls_trips.tntp");
}

double ttt_of(const std::string& out) {
  std::smatch m;
  REQUIRE(std::regex_search(out, m, std::regex(R"(ttt\s+([0-9.eE+-]+))")));
  return std::stod(m[1]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("solve: baseline, closures and exit codes") {
  const Run base = run_cli("solve " + net_args());
  CHECK(base.code == 0);
  CHECK(base.out.find("converged   yes") != std::string::npos);

  const Run closed = run_cli("solve " + net_args() + " --close 0,5");
  CHECK(closed.code == 0);
  CHECK(ttt_of(closed.out) >= ttt_of(base.out) * (1 - 2e-4));

  const Run capped = run_cli("solve " + net_args() + " --gap 1e-12 --max-iter 3");
  CHECK(capped.code == 2);

  // Node 1 loses both of its outgoing links.
  const Run cut = run_cli("solve " + net_args() + " --close 0,1");
  CHECK(cut.code == 3);
  CHECK(cut.out.find("1 -> 2") != std::string::npos);

  CHECK(run_cli("solve " + net_args() + " --close 76").code == 1);
  CHECK(run_cli("solve --net /nonexistent --trips /nonexistent").code == 1);
  CHECK(run_cli("solve").code == 1);
  CHECK(run_cli("bogus-command").code == 1);
}

TEST_CASE("solve writes JSON flows") {
  const auto dir = scratch_dir("cli_solve");
  const Run r = run_cli("solve " + net_args() + " --close 3 --json " + (dir / "eq.json").string());
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "eq.json"));
  CHECK(j.at("closed") == nlohmann::json::array({3}));
  CHECK(j.at("flows").size() == 75);
  CHECK(j.at("ttt").get<double>() == doctest::Approx(ttt_of(r.out)).epsilon(1e-6));
}

TEST_CASE("generate is reproducible for a fixed seed") {
  const auto dir = scratch_dir("cli_generate");
  const std::string common = "generate " + net_args() + " -n 10 --seed 7 -o ";
  REQUIRE(run_cli(common + (dir / "a.jsonl").string()).code == 0);
  REQUIRE(run_cli(common + (dir / "b.jsonl").string() + " --workers 3").code == 0);
  const std::string a = slurp(dir / "a.jsonl");
  CHECK(a == slurp(dir / "b.jsonl"));
  CHECK(std::count(a.begin(), a.end(), '\n') == 11);
  CHECK(run_cli("generate " + net_args() + " -n 0 -o " + (dir / "c.jsonl").string()).code == 1);
}

TEST_CASE("evaluate, features and report") {
  const auto dir = scratch_dir("cli_evaluate");
  const std::string ds = (dir / "ds.jsonl").string();
  REQUIRE(run_cli("generate " + net_args() + " -n 40 --seed 3 -o " + ds).code == 0);

  // Unknown models are rejected before any work is done.
  const Run bad = run_cli("evaluate " + net_args() + " --dataset " + ds + " --models csh,svm -o " +
                          (dir / "bad").string());
  CHECK(bad.code == 1);
  CHECK(bad.out.find("svm") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "bad" / "report.json"));

  const fs::path out = dir / "report";
  const Run ev = run_cli("evaluate " + net_args() + " --dataset " + ds +
                         " --models csh,cash,csuph,log_ols --batch-size 10 --iterations 4 -o " + out.string() +
                         " --save-models " + (dir / "models").string());
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("CostliestSubset") != std::string::npos);
  for (const char* f : {"iterations.csv", "averages.csv", "pinball.svg", "report.json"}) CHECK(fs::exists(out / f));
  CHECK(fs::exists(dir / "models"));

  const auto report = roadwork::load_report(out / "report.json");
  CHECK(report.records.size() == 16);
  CHECK(report.config.at("eval").at("batch_size") == 10);

  const fs::path again = dir / "rerender";
  REQUIRE(run_cli("report " + (out / "report.json").string() + " -o " + again.string()).code == 0);
  for (const char* f : {"iterations.csv", "averages.csv", "pinball.svg", "report.json"})
    CHECK(slurp(again / f) == slurp(out / f));

  const Run feats =
      run_cli("features " + net_args() + " --dataset " + ds + " -k 3 -o " + (dir / "features").string());
  CHECK(feats.code == 0);
  CHECK(fs::exists(dir / "features" / "features.csv"));
  const auto fr = nlohmann::json::parse(slurp(dir / "features" / "features_report.json"));
  CHECK(fr.dump().find("naive_impact_sum") != std::string::npos);
}

TEST_CASE("help lists every config key and the model defaults") {
  const Run help = run_cli("--help");
  CHECK(help.code == 0);
  for (const char* key :
       {"solve", "generate", "features", "evaluate", "report", "sampler.n", "eval.batch_size", "record_timing",
        "gbt", "trees=300"})
    CHECK(help.out.find(key) != std::string::npos);
}
