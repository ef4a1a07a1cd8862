#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

// Runs the installed binary and returns the shell exit status.
int run_cli(const std::string& args) {
  std::string cmd = std::string(FLOWCORR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("simulate is reproducible for a fixed seed") {
  testutil::TempDir tmp;
  fs::path a = tmp.path() / "a";
  fs::path b = tmp.path() / "b";
  REQUIRE(run_cli("simulate --preset tiny --seed 7 --out " + a.string()) == 0);
  REQUIRE(run_cli("simulate --preset tiny --seed 7 --out " + b.string()) == 0);
  for (const char* name : {"client.csv", "server.csv", "ground_truth.csv"})
    CHECK(testutil::read_file(a / name) == testutil::read_file(b / name));
  CHECK(run_cli("simulate --preset tiny --seed 8 --out " + b.string()) == 0);
  CHECK(testutil::read_file(a / "client.csv") != testutil::read_file(b / "client.csv"));
}

TEST_CASE("simulate rejects an unknown preset") {
  testutil::TempDir tmp;
  CHECK(run_cli("simulate --preset nope --out " + tmp.path().string()) != 0);
}

TEST_CASE("detect fails cleanly on a missing trace file") {
  CHECK(run_cli("detect --server-trace /nonexistent/s.csv --client-trace /nonexistent/c.csv") != 0);
}

TEST_CASE("detect rejects an unknown tolerance preset") {
  testutil::TempDir tmp;
  fs::path dir = tmp.path() / "sim";
  REQUIRE(run_cli("simulate --preset tiny --seed 3 --out " + dir.string()) == 0);
  CHECK(run_cli("detect --server-trace " + (dir / "server.csv").string() +
                " --client-trace " + (dir / "client.csv").string() + " --preset Z") != 0);
}

TEST_CASE("inject writes the tagged file and reports the match") {
  testutil::TempDir tmp;
  fs::path in = tmp.path() / "page.html";
  fs::path out = tmp.path() / "out.html";
  testutil::write_file(in, "<html><body>hi</body></html>");
  REQUIRE(run_cli("inject --in " + in.string() + " --out " + out.string() +
                  " --asset-url http://x/big.jpeg") == 0);
  CHECK(testutil::read_file(out) ==
        "<html><body>hi<img src=\"http://x/big.jpeg\" width=\"1px\" /></body></html>");

  testutil::write_file(in, "<p>no closing tag</p>");
  REQUIRE(run_cli("inject --in " + in.string() + " --out " + out.string() +
                  " --asset-url http://x/big.jpeg") == 0);
  CHECK(testutil::read_file(out) == "<p>no closing tag</p>");
}

TEST_CASE("simulate, detect, and evaluate compose into a working pipeline") {
  testutil::TempDir tmp;
  fs::path dir = tmp.path() / "run";
  REQUIRE(run_cli("simulate --preset tiny --seed 42 --out " + dir.string()) == 0);
  REQUIRE(fs::exists(dir / "manifest.json"));

  fs::path candidates = dir / "candidates.csv";
  REQUIRE(run_cli("detect --server-trace " + (dir / "server.csv").string() +
                  " --client-trace " + (dir / "client.csv").string() +
                  " --candidates " + candidates.string() +
                  " --tol-max-tp 100 --tol-max-at 100 --tol-max-td 100 --tol-max-tt 100") == 0);
  std::string cand_text = testutil::read_file(candidates);
  CHECK(cand_text.rfind("server_conn_id,candidate_client_conn_id\n", 0) == 0);
  CHECK(cand_text.size() > 41);  // at least one detection row

  fs::path csv = dir / "kpis.csv";
  REQUIRE(run_cli("evaluate --candidates " + candidates.string() +
                  " --ground-truth " + (dir / "ground_truth.csv").string() +
                  " --n-clients 5 --csv " + csv.string()) == 0);
  std::string kpi_text = testutil::read_file(csv);
  CHECK(kpi_text.rfind("kpi,result_mean,result_std,result_excluded\nse,", 0) == 0);
}

TEST_CASE("sweep produces the raw detections and both summaries") {
  testutil::TempDir tmp;
  fs::path dir = tmp.path() / "run";
  REQUIRE(run_cli("simulate --preset tiny --seed 11 --out " + dir.string()) == 0);
  fs::path sweep = tmp.path() / "sweep";
  REQUIRE(run_cli("sweep --server-trace " + (dir / "server.csv").string() +
                  " --client-trace " + (dir / "client.csv").string() +
                  " --ground-truth " + (dir / "ground_truth.csv").string() +
                  " --presets B,C --out " + sweep.string()) == 0);
  CHECK(fs::exists(sweep / "detections_raw.csv"));
  CHECK(testutil::read_file(sweep / "summary.txt").find("Test B") != std::string::npos);
  CHECK(testutil::read_file(sweep / "summary.csv").find("Test C") != std::string::npos);

  CHECK(run_cli("sweep --server-trace " + (dir / "server.csv").string() +
                " --client-trace " + (dir / "client.csv").string() +
                " --ground-truth " + (dir / "ground_truth.csv").string() +
                " --presets Q --out " + sweep.string()) != 0);
}
