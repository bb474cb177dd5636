#include "ckasens/matrix_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CKASENS_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const char* name) { return testsupport::data_path(name); }

std::string tmp(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Cli, CkaFixtureValues) {
  const auto r = run("cka " + data("fixture_x.csv") + " " + data("fixture_y.csv") +
                     " --kernel linear --kernel rbf:0.8");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "linear\t0.386319006977\nrbf_f0.8\t0.585176124223\n");
}

TEST(Cli, CkaRotatedFixtureIsOne) {
  const auto r = run("cka " + data("fixture_x.csv") + " " + data("fixture_x_rotated.csv"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1.000000000000\n");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("nosuchcommand").code, 2);
  EXPECT_EQ(run("cka " + data("fixture_x.csv")).code, 2);
  EXPECT_EQ(run("cka /nonexistent.csv " + data("fixture_x.csv")).code, 2);
  EXPECT_EQ(run("cka " + data("fixture_x.csv") + " " + data("fixture_y.csv") + " --kernel cubic").code, 2);
  EXPECT_EQ(run("sweep --format xml").code, 2);

  const std::string short_x = tmp("ckasens_cli_short.csv");
  ckasens::io::write_file_bytes(short_x, "1,2\n3,4\n5,7\n");
  EXPECT_EQ(run("cka " + short_x + " " + data("fixture_x.csv")).code, 3);
}

TEST(Cli, GenIsByteIdenticalForSeed) {
  const std::string a = tmp("ckasens_gen_a.bin");
  const std::string b = tmp("ckasens_gen_b.bin");
  const std::string common = " --points-per-cube 30 --dims 4 --seed 5 --format binary";
  ASSERT_EQ(run("gen --out " + a + common).code, 0);
  ASSERT_EQ(run("gen --out " + b + common).code, 0);
  EXPECT_EQ(ckasens::io::read_file_bytes(a), ckasens::io::read_file_bytes(b));
  EXPECT_EQ(ckasens::io::read_file_bytes(a + ".mask.csv"), ckasens::io::read_file_bytes(b + ".mask.csv"));
  const auto x = ckasens::io::read_matrix(a);
  EXPECT_EQ(x.rows(), 60);
  EXPECT_EQ(x.cols(), 4);
  const auto manifest = nlohmann::json::parse(ckasens::io::read_file_bytes(a + ".manifest.json"));
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["dataset"]["generated"], "two-cubes");
  EXPECT_EQ(manifest["hyperplane"]["normal"].size(), 4u);
}

TEST(Cli, SweepOutputIsByteIdenticalForSeed) {
  const std::string args =
      "sweep --points-per-cube 40 --dims 5 --seed 3 --distances 0,1,100 --kernel rbf:0.5 "
      "--direction margin-preserving";
  const auto first = run(args);
  const auto second = run(args);
  ASSERT_EQ(first.code, 0);
  EXPECT_EQ(first.out, second.out);
  EXPECT_EQ(first.out.substr(0, first.out.find('\n')),
            "distance,cka_linear,cka_rbf_f0.5,predicted_limit,margin_ok");
  EXPECT_EQ(first.out.find("false"), std::string::npos);
}

TEST(Cli, SweepFromFilesWritesSidecars) {
  const std::string gen = tmp("ckasens_sweep_in.csv");
  ASSERT_EQ(run("gen --out " + gen + " --points-per-cube 20 --dims 3 --seed 1 --format csv").code, 0);
  const std::string out = tmp("ckasens_sweep_out.csv");
  const auto r = run("sweep --input " + gen + " --mask " + gen + ".mask.csv --distances 1,10 --out " + out);
  ASSERT_EQ(r.code, 0);
  const auto limit = ckasens::io::read_file_bytes(out + ".limit.csv");
  EXPECT_EQ(limit.substr(0, limit.find('\n')), "rho,gamma,mean_s_sq_norm,mean_sq_norm,pr,predicted_limit");
  const auto manifest = nlohmann::json::parse(ckasens::io::read_file_bytes(out + ".manifest.json"));
  EXPECT_EQ(manifest["dataset"]["fnv1a64"].get<std::string>().size(), 16u);
  EXPECT_EQ(manifest["distance_unit"], "rms_row_norm");
  EXPECT_EQ(run("sweep --input " + gen + " --distances 1").code, 2);  // no mask
}

TEST(Cli, OutlierAndInvmap) {
  const auto o = run("outlier --rows 50 --cols 4 --index 2 --distances 1,1000");
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(std::count(o.out.begin(), o.out.end(), '\n'), 3);
  const auto m = run("invmap --rows 40 --cols 4 --mu 0,1 --sigma 1 --repeats 2");
  EXPECT_EQ(m.code, 0);
  EXPECT_EQ(m.out.substr(0, m.out.find('\n')), "mu,sigma,mean_cka,std_cka");
  EXPECT_EQ(std::count(m.out.begin(), m.out.end(), '\n'), 3);
}

TEST(Cli, ManipulateStatusCodes) {
  const auto ok = run("manipulate --points-per-cube 40 --dims 5 --target 0.5 --constraint orthogonal "
                      "--moved-fraction 0.1 --tolerance 0.005");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(ok.out.substr(0, ok.out.find('\n')), "iter,cka,translation_norm,loss");
  const auto capped = run("manipulate --points-per-cube 40 --dims 5 --target 0.5 --max-iters 1");
  EXPECT_EQ(capped.code, 1);
}
