#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "ddq/io.hpp"
#include "ddq/metrics.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ddq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(DDQ_CLI_PATH) + " " + args + " >" + path("stdout") + " 2>" + path("stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  fs::path dir_;
};

ddq::json without_timings(ddq::json j) {
  if (j.is_object()) {
    j.erase("wall_ms");
    for (auto& [k, v] : j.items()) v = without_timings(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_timings(v);
  }
  return j;
}

}  // namespace

TEST_F(Cli, GenerateThenDecompose) {
  ASSERT_EQ(run("generate --gen low_rank:n=30,k=3,seed=4 --out " + path("a.mtx")), 0) << slurp("stderr");
  ASSERT_EQ(run("decompose --input " + path("a.mtx") + " --rank 3 --lambda 0 --out " + path("f")), 0)
      << slurp("stderr");
  const ddq::DenseMatrix a = ddq::read_matrix(path("a.mtx"));
  const ddq::FactorTriple t = ddq::read_factors(path("f"));
  EXPECT_LE(ddq::relative_frobenius_error(a, t.product()), 1e-8);
  const auto trace = ddq::read_report(path("f.trace.json"));
  EXPECT_EQ(trace.kind, "decompose");
  EXPECT_TRUE(trace.aggregates["trace"].is_array());
  EXPECT_TRUE(fs::exists(path("f.manifest.json")));
}

TEST_F(Cli, DecomposeFromGeneratorWithFlags) {
  EXPECT_EQ(run("decompose --gen worked_example:ex34 --rank 3 --lambda 1 --alpha1 0.1 --alpha2 0.2 --alpha3 0.3 "
                "--beta 0.01 --kappa-cap 10 --tol 1e-10 --max-iters 50 --d-update closed --init svd --normalize "
                "--out " + path("g")),
            0)
      << slurp("stderr");
  const auto trace = ddq::read_report(path("g.trace.json"));
  EXPECT_EQ(trace.config["regularizer"]["alpha2"], 0.2);
  EXPECT_EQ(trace.config["solver"]["d_update"], "closed");
  EXPECT_LE(*trace.runs[0].kappa_d, 10.0 * (1.0 + 1e-6));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("decompose --gen worked_example:ex34 --out " + path("x")), 2);  // no rank
  EXPECT_EQ(run("decompose --gen worked_example:ex34 --rank 2 --init random --out " + path("x")), 2);  // no seed
  EXPECT_EQ(run("decompose --input a --gen b --rank 1 --out " + path("x")), 2);
  EXPECT_EQ(run("decompose --gen worked_example:ex34 --rank 2 --d-update weird --out " + path("x")), 2);
  EXPECT_EQ(run("stability --gen low_rank:n=20,k=2,seed=1 --rank 2 --out " + path("x")), 2);  // no seed
  EXPECT_EQ(run("generate --gen low_rank:n=20,k=2 --out " + path("x.mtx")), 2);  // spec without seed
  EXPECT_EQ(run("decompose --gen worked_example:ex34 --rank 2 --lambda -1 --out " + path("x")), 2);
}

TEST_F(Cli, DataErrors) {
  write("nan.csv", "1,2\nnan,4\n");
  EXPECT_EQ(run("decompose --input " + path("nan.csv") + " --rank 1 --out " + path("x")), 3);
  write("ragged.csv", "1,2\n3\n");
  EXPECT_EQ(run("decompose --input " + path("ragged.csv") + " --rank 1 --out " + path("x")), 3);
  EXPECT_EQ(run("decompose --gen worked_example:ex34 --rank 4 --out " + path("x")), 3);
  EXPECT_EQ(run("decompose --gen worked_example:ex99 --rank 1 --out " + path("x")), 3);
}

TEST_F(Cli, NumericalError) {
  write("zero.csv", "0,0\n0,0\n");
  EXPECT_EQ(run("decompose --input " + path("zero.csv") + " --rank 1 --lambda 0 --init random --seed 1 --out " +
                path("x")),
            4)
      << slurp("stderr");
}

TEST_F(Cli, IoErrors) {
  EXPECT_EQ(run("decompose --input " + path("missing.mtx") + " --rank 1 --out " + path("x")), 5);
  EXPECT_EQ(run("generate --gen worked_example:ex34 --out " + path("no/dir/a.mtx")), 5);
  EXPECT_EQ(run("benchmark --config " + path("absent.ini") + " --out " + path("b.json")), 5);
}

TEST_F(Cli, ConfigFileDrivesSweep) {
  write("sweep.ini",
        "[matrix]\ngen = noisy_sparse:n=30,k=3,density=0.3,seed=2\n[solver]\nrank = 3\nmax_iters = 10\n"
        "[sweep]\nlambdas = 1e-4, 1e-3\nalphas = 1e-3, 1e-2, 1e-1\n[output]\npath = " +
            path("sweep.json") + "\n");
  ASSERT_EQ(run("sweep --config " + path("sweep.ini")), 0) << slurp("stderr");
  const auto rep = ddq::read_report(path("sweep.json"));
  EXPECT_EQ(rep.kind, "sweep");
  EXPECT_EQ(rep.runs.size(), 6u);
  // a flag overrides the file
  ASSERT_EQ(run("sweep --config " + path("sweep.ini") + " --lambdas 1e-3 --out " + path("one.json")), 0);
  EXPECT_EQ(ddq::read_report(path("one.json")).runs.size(), 3u);
}

TEST_F(Cli, BadConfigIsUsageError) {
  write("bad.ini", "[solver]\nrank = many\n");
  EXPECT_EQ(run("sweep --gen low_rank:n=20,k=2,seed=1 --config " + path("bad.ini") + " --out " + path("s.json")), 2);
  write("bad2.ini", "no equals sign\n");
  EXPECT_EQ(run("sweep --gen low_rank:n=20,k=2,seed=1 --config " + path("bad2.ini") + " --out " + path("s.json")), 2);
}

TEST_F(Cli, RepeatedRunsGiveIdenticalReports) {
  const std::string args = "benchmark --classes low_rank,noisy_sparse --n 30 --rank 3 --seed 1 --n-seeds 2 --out ";
  ASSERT_EQ(run(args + path("r1.json")), 0) << slurp("stderr");
  ASSERT_EQ(run(args + path("r2.json")), 0);
  const auto j1 = without_timings(ddq::json::parse(slurp("r1.json")));
  const auto j2 = without_timings(ddq::json::parse(slurp("r2.json")));
  EXPECT_EQ(j1, j2);
  EXPECT_EQ(j1["runs"].size(), 16u);  // 2 classes x 2 seeds x 4 methods
}

TEST_F(Cli, EveryExperimentCommandRuns) {
  EXPECT_EQ(run("perturb --n 30 --rank 3 --eps 1e-4,1e-3 --seed 1 --out " + path("p.json")), 0) << slurp("stderr");
  EXPECT_EQ(run("ablate --gen ill_conditioned:n=30,k=4,seed=1 --rank 4 --betas 0,1e-2 --kappa-cap 100 --out " +
                path("a.json")),
            0)
      << slurp("stderr");
  EXPECT_EQ(run("stability --gen low_rank:n=30,k=3,seed=1 --rank 3 --seed 5 --n-seeds 3 --max-iters 10 --out " +
                path("s.json")),
            0)
      << slurp("stderr");
  EXPECT_EQ(run("scaling --sizes 20,40 --rank 3 --seed 1 --max-iters 3 --baselines --out " + path("c.json")), 0)
      << slurp("stderr");
  EXPECT_EQ(ddq::read_report(path("s.json")).runs.size(), 3u);
  EXPECT_EQ(ddq::read_report(path("c.json")).runs.size(), 4u);
}

TEST_F(Cli, ThreadsVariableIsValidated) {
  EXPECT_EQ(run("perturb --n 20 --rank 2 --seed 1 --out " + path("p.json")), 0);
  const std::string cmd = "DDQ_THREADS=abc " + std::string(DDQ_CLI_PATH) + " perturb --n 20 --rank 2 --seed 1 --out " +
                          path("q.json") + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
