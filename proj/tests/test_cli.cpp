#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrpd/dataset_io.hpp"

using namespace mrpd;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mrpd_test_cli";

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args, const std::string& env = {}) {
  const auto log = kWork / "last_output.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" MRPD_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path(const std::string& name) { return "\"" + (kWork / name).string() + "\""; }

/// A small dataset shared by the pipeline cases, generated once.
const fs::path& small_dataset() {
  static const fs::path dir = [] {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const auto r = run("gen --out " + path("data") + " --per-region 2 --seed 5");
    REQUIRE_MESSAGE(r.code == 0, r.out);
    return kWork / "data";
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  small_dataset();
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("stats --data " + path("data") + " --bogus").code == 2);
  CHECK(run("stats --data " + path("no_such_dir")).code == 2);
  CHECK(run("train --data " + path("data")).code == 2);  // --out missing
  CHECK(run("train --data " + path("data") + " --out " + path("r") + " --modality smell").code == 2);
  CHECK(run("sad --data " + path("data") + " --rec 999 --out " + path("x.pgm")).code == 2);
  CHECK(run("gen --out " + path("g") + " --per-region 1", "MRPD_SEED=abc").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("gen then stats reports every motion and region") {
  small_dataset();
  const auto r = run("stats --data " + path("data") + " --out " + path("stats"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("18 motions") != std::string::npos);
  CHECK(r.out.find("ANOVA F(8, 9)") != std::string::npos);
  std::istringstream table(slurp(kWork / "stats" / "durations.csv"));
  int rows = -1;
  for (std::string line; std::getline(table, line);) ++rows;
  CHECK(rows == 9);
  CHECK(fs::exists(kWork / "stats" / "tukey.csv"));
  CHECK(fs::exists(kWork / "stats" / "run.json"));
}

TEST_CASE("generation follows the seed and MRPD_SEED") {
  small_dataset();
  REQUIRE(run("gen --out " + path("g1") + " --per-region 1", "MRPD_SEED=77").code == 0);
  REQUIRE(run("gen --out " + path("g2") + " --per-region 1 --seed 77").code == 0);
  REQUIRE(run("gen --out " + path("g3") + " --per-region 1", "MRPD_SEED=78").code == 0);
  CHECK(read_manifest(kWork / "g1") == read_manifest(kWork / "g2"));
  CHECK(slurp(kWork / "g1" / "manifest.json") == slurp(kWork / "g2" / "manifest.json"));
  CHECK_FALSE(read_dataset(kWork / "g1") == read_dataset(kWork / "g3"));
}

TEST_CASE("train, eval, replay and sad run on a small dataset") {
  small_dataset();
  const auto t = run("train --data " + path("data") + " --out " + path("run") + " --epochs 2");
  REQUIRE_MESSAGE(t.code == 0, t.out);
  for (const char* f : {"model.ckpt", "model.json", "loss_curve.csv", "metrics.csv", "confusion.pgm", "run.json"})
    CHECK_MESSAGE(fs::exists(kWork / "run" / f), f);

  const auto e = run("eval --model " + path("run/model.ckpt") + " --data " + path("data") + " --out " + path("eval"));
  REQUIRE_MESSAGE(e.code == 0, e.out);
  CHECK(fs::exists(kWork / "eval" / "metrics.csv"));
  CHECK(slurp(kWork / "eval" / "confusion.pgm").rfind("P5", 0) == 0);
  // Evaluation of the saved model reproduces the held-out metrics written at the end of training.
  CHECK(slurp(kWork / "eval" / "metrics.csv") == slurp(kWork / "run" / "metrics.csv"));

  const auto r = run("replay --model " + path("run") + " --data " + path("data") + " --n 5 --virtual-clock --out " +
                     path("latency"));
  REQUIRE_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("grace time") != std::string::npos);
  CHECK(slurp(kWork / "latency" / "latency.csv").find("mean,") != std::string::npos);
  // No grace time is left when the motion is shorter than the window.
  CHECK(run("replay --model " + path("run") + " --data " + path("data") + " --n 1 --virtual-clock --mean-motion 0.3")
            .code == 1);

  const auto s = run("sad --data " + path("data") + " --rec 0 --span 10 --out " + path("sad.pgm"));
  REQUIRE_MESSAGE(s.code == 0, s.out);
  CHECK(slurp(kWork / "sad.pgm").rfind("P5\n47 64\n255\n", 0) == 0);
}

TEST_CASE("training with a config that does not fit the data is a usage error") {
  small_dataset();
  {
    std::ofstream cfg(kWork / "paper.json");
    cfg << R"({"preset": "paper"})";
  }
  const auto r = run("train --data " + path("data") + " --config " + path("paper.json") + " --out " + path("bad"));
  CHECK(r.code == 2);
  CHECK(r.out.find("64x47") != std::string::npos);
}

TEST_CASE("xval and compare produce their reports") {
  small_dataset();
  const auto x = run("xval --data " + path("data") + " --k 2 --epochs 1 --jobs 2 --out " + path("cv"));
  REQUIRE_MESSAGE(x.code == 0, x.out);
  CHECK(slurp(kWork / "cv" / "cv.csv").find("\nmean,") != std::string::npos);

  const auto c = run("compare --data " + path("data") + " --epochs 1 --out " + path("cmp"));
  REQUIRE_MESSAGE(c.code == 0, c.out);
  const auto table = slurp(kWork / "cmp" / "comparison.csv");
  for (const char* m : {"\nface,", "\nimu,", "\ndepth,", "\nfusion,"}) CHECK(table.find(m) != std::string::npos);
}

TEST_CASE("params reports the fused width of the full-size model") {
  const auto r = run("params");
  REQUIRE_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("fused_dim 4097") != std::string::npos);
  CHECK(r.out.find("total,") != std::string::npos);
}

TEST_CASE("gradcheck passes on a small configuration") {
  small_dataset();
  {
    std::ofstream cfg(kWork / "small.json");
    cfg << R"({"preset": "desk", "scale_divisor": 32})";
  }
  const auto r = run("gradcheck --config " + path("small.json") + " --samples 60");
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("max rel err") != std::string::npos);
}
