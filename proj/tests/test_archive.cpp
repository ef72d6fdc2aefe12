#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "bnnmc/archive.hpp"
#include "bnnmc/pipeline.hpp"

using namespace bnnmc;

namespace {

std::string fresh_dir(const std::string& name) {
  const std::string dir =
      (std::filesystem::temp_directory_path() / name).string();
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

Archive tiny_archive(const std::string& dir, std::size_t samples, std::size_t dim) {
  json meta;
  meta["format_version"] = kArchiveFormatVersion;
  meta["creator"] = kArchiveCreator;
  meta["dim"] = dim;
  meta["n_samples"] = samples;
  std::vector<GroupIndexEntry> index;
  index.push_back({"w", {dim}, 0, dim, false, "identity"});
  Matrix data(samples, dim);
  for (std::size_t i = 0; i < data.data.size(); ++i) {
    data.data[i] = 0.5 * static_cast<double>(i) - 3.0;
  }
  write_archive(dir, meta, index, data);
  return read_archive(dir);
}

}  // namespace

TEST_CASE("archive write-read-write round-trips byte for byte") {
  const std::string dir = fresh_dir("bnnmc_arch_a");
  const Archive a = tiny_archive(dir, 3, 4);
  CHECK(a.samples.rows == 3);
  CHECK(a.samples.cols == 4);

  const std::string again = fresh_dir("bnnmc_arch_b");
  write_archive(again, a.meta, a.index, a.samples);
  CHECK(slurp(dir + "/meta.json") == slurp(again + "/meta.json"));
  CHECK(slurp(dir + "/index.json") == slurp(again + "/index.json"));
  CHECK(slurp(dir + "/samples.bin") == slurp(again + "/samples.bin"));
}

TEST_CASE("sample file size is exactly S x D x 8 bytes") {
  const std::string dir = fresh_dir("bnnmc_arch_size");
  tiny_archive(dir, 2, 22);
  CHECK(std::filesystem::file_size(dir + "/samples.bin") == 2 * 22 * 8);
}

TEST_CASE("format version mismatches are named errors") {
  const std::string dir = fresh_dir("bnnmc_arch_ver");
  tiny_archive(dir, 1, 2);
  {
    std::ifstream in(dir + "/meta.json");
    json meta = json::parse(in);
    in.close();
    meta["format_version"] = 999;
    std::ofstream out(dir + "/meta.json");
    out << meta.dump(2) << "\n";
  }
  try {
    read_archive(dir);
    FAIL("expected FormatMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatMismatch);
  }
}

TEST_CASE("index offsets must partition the flat vector") {
  const std::string dir = fresh_dir("bnnmc_arch_idx");
  tiny_archive(dir, 1, 4);
  {
    std::ifstream in(dir + "/index.json");
    json idx = json::parse(in);
    in.close();
    idx[0]["length"] = 3;  // no longer covers [0, 4)
    std::ofstream out(dir + "/index.json");
    out << idx.dump(2) << "\n";
  }
  try {
    read_archive(dir);
    FAIL("expected FormatMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatMismatch);
  }
}

TEST_CASE("truncated sample files are rejected") {
  const std::string dir = fresh_dir("bnnmc_arch_trunc");
  tiny_archive(dir, 2, 4);
  std::filesystem::resize_file(dir + "/samples.bin", 2 * 4 * 8 - 8);
  try {
    read_archive(dir);
    FAIL("expected FormatMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatMismatch);
  }
}

TEST_CASE("group index mirrors the parameter store layout") {
  ModelSpec spec;
  spec.arch = Architecture::Mlp;
  spec.widths = {2, 4, 2};
  Rng rng(1);
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  const std::vector<GroupIndexEntry> index = group_index(store);
  REQUIRE(index.size() == 4);
  CHECK(index[0].name == "layer0.weight");
  CHECK(index[0].offset == 0);
  CHECK(index[0].length == 8);
  CHECK(index[3].offset == 20);
  CHECK(index[3].length == 2);
}

TEST_CASE("train pipeline writes a loadable archive with consistent sizes") {
  const std::string dir = fresh_dir("bnnmc_train_out");
  ExperimentConfig cfg;
  cfg.model.arch = Architecture::Mlp;
  cfg.model.widths = {2, 4, 2};
  cfg.prior = PriorSpec::gaussian(0.0, 1.0);
  cfg.data.kind = DataConfig::Kind::Blobs;
  cfg.data.per_class = 16;
  cfg.data.seed = 3;
  cfg.sampler.kind = SamplerKind::Ggmc;
  cfg.sampler.steps = 60;
  cfg.sampler.burn_in = 20;
  cfg.sampler.step_size = 1e-3;
  cfg.sampler.seed = 5;
  cfg.n_samples = 2;
  cfg.outdir = dir;

  const TrainSummary summary = run_train(cfg);
  CHECK(summary.n_samples == 2);
  // D = 22 for the [2,4,2] MLP: samples.bin is exactly 2*22*8 = 352 bytes.
  CHECK(std::filesystem::file_size(dir + "/samples.bin") == 352);
  CHECK(std::filesystem::exists(dir + "/meta.json"));
  CHECK(std::filesystem::exists(dir + "/index.json"));
  CHECK(std::filesystem::exists(dir + "/diagnostics.csv"));
  CHECK(std::filesystem::exists(dir + "/train_curve.csv"));

  const Archive a = read_archive(dir);
  CHECK(a.samples.rows == 2);
  CHECK(a.samples.cols == 22);

  // test scores the archive and writes metrics.
  const MetricReport report = run_test(dir);
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  CHECK(report.ece >= 0.0);
  CHECK(report.ece <= 1.0);
  CHECK(report.auroc >= 0.0);
  CHECK(report.auroc <= 1.0);
  CHECK(std::filesystem::exists(dir + "/metrics.csv"));
}

TEST_CASE("empty archives are rejected by the test pipeline") {
  const std::string dir = fresh_dir("bnnmc_empty_out");
  ExperimentConfig cfg;
  cfg.model.arch = Architecture::Linear;
  cfg.model.widths = {2, 2};
  cfg.prior = PriorSpec::gaussian(0.0, 1.0);
  cfg.data.kind = DataConfig::Kind::Blobs;
  cfg.data.per_class = 8;
  cfg.sampler.steps = 10;
  cfg.sampler.step_size = 1e-3;
  cfg.n_samples = 0;
  cfg.outdir = dir;
  run_train(cfg);
  try {
    run_test(dir);
    FAIL("expected EmptyArchive");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyArchive);
  }
}

TEST_CASE("identical seeds give byte-identical archives") {
  ExperimentConfig cfg;
  cfg.model.arch = Architecture::Mlp;
  cfg.model.widths = {2, 4, 2};
  cfg.prior = PriorSpec::gaussian(0.0, 1.0);
  cfg.data.kind = DataConfig::Kind::Blobs;
  cfg.data.per_class = 12;
  cfg.data.seed = 9;
  cfg.sampler.steps = 80;
  cfg.sampler.step_size = 1e-3;
  cfg.sampler.seed = 42;
  cfg.n_samples = 5;

  const std::string a = fresh_dir("bnnmc_det_a");
  const std::string b = fresh_dir("bnnmc_det_b");
  cfg.outdir = a;
  run_train(cfg);
  cfg.outdir = b;
  run_train(cfg);
  CHECK(slurp(a + "/samples.bin") == slurp(b + "/samples.bin"));
  CHECK(slurp(a + "/meta.json") == slurp(b + "/meta.json"));
  CHECK(slurp(a + "/index.json") == slurp(b + "/index.json"));
  CHECK(slurp(a + "/diagnostics.csv") == slurp(b + "/diagnostics.csv"));

  // Repeated test runs are deterministic too.
  run_test(a);
  const std::string first = slurp(a + "/metrics.csv");
  run_test(a);
  CHECK(slurp(a + "/metrics.csv") == first);
}

TEST_CASE("sweep produces a sorted tempering table and per-T archives") {
  ExperimentConfig cfg;
  cfg.model.arch = Architecture::Mlp;
  cfg.model.widths = {2, 4, 2};
  cfg.prior = PriorSpec::gaussian(0.0, 1.0);
  cfg.data.kind = DataConfig::Kind::Blobs;
  cfg.data.per_class = 12;
  cfg.data.seed = 4;
  cfg.sampler.steps = 60;
  cfg.sampler.burn_in = 10;
  cfg.sampler.step_size = 1e-3;
  cfg.n_samples = 3;
  cfg.outdir = fresh_dir("bnnmc_sweep_out");

  const std::vector<double> temps = {1.0, 0.1};
  const std::vector<MetricReport> table = run_sweep(cfg, temps);
  REQUIRE(table.size() == 2);
  CHECK(table[0].temperature == 0.1);
  CHECK(table[1].temperature == 1.0);
  CHECK(std::filesystem::exists(cfg.outdir + "/tempering.csv"));
  CHECK(std::filesystem::exists(cfg.outdir + "/T_0.1/samples.bin"));
  CHECK(std::filesystem::exists(cfg.outdir + "/T_1/samples.bin"));

  const std::vector<double> dup = {0.5, 0.5};
  CHECK_THROWS_AS(run_sweep(cfg, dup), Error);
}
