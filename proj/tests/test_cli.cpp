#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BOTDA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command-line exit codes") {
  const fs::path out = fs::temp_directory_path() / "botda_tests" / "cli";
  fs::remove_all(out);
  const std::string dir = "--out-dir " + out.string();
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run(dir + " reproduce fig9") == 2);
  CHECK(run(dir + " reproduce fig1") == 0);
  CHECK(run(dir + " simulate configs/fig3c.cfg") == 0);
  CHECK(fs::exists(out / "fig3c.bgs"));
  CHECK(run(dir + " analyze " + (out / "fig3c.bgs").string() + " --truth configs/fig3c.cfg") == 0);
  CHECK(fs::exists(out / "fig3c_metrics.json"));
  // A 3-iteration cap cannot converge.
  CHECK(run(dir + " deconvolve " + (out / "fig3c.bgs").string() + " --mu 1e-4 --max-iters 3") == 3);
  CHECK(run(dir + " deconvolve " + (out / "fig3c.bgs").string() + " --config configs/fig2a.cfg") == 2);
  CHECK(run(dir + " deconvolve " + (out / "fig3c.bgs").string() + " --config configs/fig3c.cfg") == 0);
  CHECK(fs::exists(out / "fig3c_recovered.bgs"));
  CHECK(run(dir + " ingest " + (out / "fig3c.bgs").string() + " --name copy") == 0);
  CHECK(run(dir + " ingest configs/fig3c.cfg") == 2);
}
