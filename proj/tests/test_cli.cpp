#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "bnnmc/archive.hpp"

using namespace bnnmc;

namespace {

std::string fresh_dir(const std::string& name) {
  const std::string dir = (std::filesystem::temp_directory_path() / name).string();
  std::filesystem::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BNNMC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("train writes an archive sized by samples and dimension") {
  const std::string dir = fresh_dir("bnnmc_cli_train");
  const int rc = run_cli(
      "train --data blobs --model '{\"arch\":\"mlp\",\"widths\":[2,4,2]}' "
      "--prior gaussian --inference ggmc --steps 60 --burn-in 10 --lr 1e-3 "
      "--n-samples 2 --seed 3 --outdir " + dir);
  CHECK(rc == 0);
  // D = 22 for the [2,4,2] MLP: 2 samples are exactly 352 bytes.
  CHECK(std::filesystem::file_size(dir + "/samples.bin") == 352);
  CHECK(std::filesystem::exists(dir + "/diagnostics.csv"));
  CHECK(std::filesystem::exists(dir + "/train_curve.csv"));
}

TEST_CASE("unknown priors and flags exit with code 2") {
  const std::string dir = fresh_dir("bnnmc_cli_bad");
  CHECK(run_cli("train --prior nosuch --outdir " + dir) == 2);
  CHECK(run_cli("train --no-such-flag 1 --outdir " + dir) == 2);
  CHECK(run_cli("nosuchcommand") == 2);
}

TEST_CASE("identical invocations produce identical archives") {
  const std::string a = fresh_dir("bnnmc_cli_det_a");
  const std::string b = fresh_dir("bnnmc_cli_det_b");
  const std::string args =
      "train --data blobs --model mlp --prior student-t --inference sgld "
      "--steps 50 --burn-in 5 --lr 1e-4 --n-samples 4 --seed 11 --outdir ";
  CHECK(run_cli(args + a) == 0);
  CHECK(run_cli(args + b) == 0);
  CHECK(slurp(a + "/samples.bin") == slurp(b + "/samples.bin"));
  CHECK(slurp(a + "/meta.json") == slurp(b + "/meta.json"));
}

TEST_CASE("test scores an archive and rejects an empty one") {
  const std::string dir = fresh_dir("bnnmc_cli_test");
  CHECK(run_cli("train --data blobs --model mlp --prior gaussian --steps 60 "
                "--burn-in 10 --lr 1e-3 --n-samples 3 --seed 7 --outdir " + dir) == 0);
  CHECK(run_cli("test --archive " + dir) == 0);
  CHECK(std::filesystem::exists(dir + "/metrics.csv"));

  const std::string empty = fresh_dir("bnnmc_cli_empty");
  CHECK(run_cli("train --data blobs --model linear --prior gaussian --steps 20 "
                "--lr 1e-3 --n-samples 0 --outdir " + empty) == 0);
  CHECK(run_cli("test --archive " + empty) == 2);
  CHECK(run_cli("test --archive /nonexistent/archive") == 1);
}

TEST_CASE("divergence exits with code 3") {
  const std::string dir = fresh_dir("bnnmc_cli_div");
  CHECK(run_cli("train --data blobs --model mlp --prior gaussian --inference sgld "
                "--steps 50 --lr 1e12 --n-samples 2 --outdir " + dir) == 3);
}

TEST_CASE("sweep rejects duplicate temperatures and writes the table") {
  const std::string dup = fresh_dir("bnnmc_cli_dup");
  CHECK(run_cli("sweep --temperatures 0.1,0.1 --steps 30 --lr 1e-3 "
                "--outdir " + dup) == 2);

  const std::string dir = fresh_dir("bnnmc_cli_sweep");
  CHECK(run_cli("sweep --temperatures 1.0 --data blobs --model linear "
                "--prior gaussian --steps 40 --burn-in 5 --lr 1e-3 --n-samples 3 "
                "--seed 5 --outdir " + dir) == 0);
  CHECK(std::filesystem::exists(dir + "/tempering.csv"));
  CHECK(std::filesystem::exists(dir + "/T_1/metrics.csv"));

  // A single-temperature sweep matches the metrics of its own train+test.
  const std::string t1 = slurp(dir + "/T_1/metrics.csv");
  const std::string table = slurp(dir + "/tempering.csv");
  CHECK(table == t1);
}

TEST_CASE("regression on the sine dataset trains and tests end to end") {
  const std::string dir = fresh_dir("bnnmc_cli_sine");
  CHECK(run_cli("train --data sine --model mlp --prior gaussian --inference sgld "
                "--steps 80 --burn-in 10 --lr 1e-4 --n-samples 4 --seed 2 "
                "--outdir " + dir) == 0);
  CHECK(run_cli("test --archive " + dir) == 0);
  const std::string metrics = slurp(dir + "/metrics.csv");
  // Regression reports the log likelihood; classification-only columns stay
  // empty.
  CHECK(metrics.rfind("temperature,accuracy,log_lik,ece,auroc\n", 0) == 0);
  CHECK(metrics.find("1,,") != std::string::npos);
}

TEST_CASE("csv datasets flow through the target-column flag") {
  const std::string csv =
      (std::filesystem::temp_directory_path() / "bnnmc_cli_data.csv").string();
  {
    std::ofstream out(csv);
    out << "x0,x1,label\n";
    for (int i = 0; i < 40; ++i) {
      const double x = i * 0.1 - 2.0;
      out << x << "," << -x << "," << (i % 2) << "\n";
    }
  }
  const std::string dir = fresh_dir("bnnmc_cli_csv");
  CHECK(run_cli("train --data csv:" + csv +
                " --target-col label --model linear --prior gaussian "
                "--steps 40 --lr 1e-3 --n-samples 2 --outdir " + dir) == 0);
  const Archive a = read_archive(dir);
  CHECK(a.meta.at("data").at("kind") == "csv");
  CHECK(a.meta.at("data").at("target_column") == "label");
}
