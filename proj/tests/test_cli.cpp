#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

const char* cli_path() { return CREL_CLI_PATH; }

int run(const std::string& args, const std::string& workdir) {
  std::string cmd = "cd " + workdir + " && " + std::string(cli_path()) + " " + args +
                    " > cli_stdout.txt 2> cli_stderr.txt";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fresh_dir(const std::string& name) {
  std::string dir = "/tmp/crel_cli_" + name;
  std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());
  return dir;
}

void write_three_point(const std::string& dir) {
  std::ofstream out(dir + "/three.csv");
  out << "v1\n-1\n0\n2\n";
}

std::vector<std::vector<double>> parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string line;
  bool header = true;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) row.push_back(std::atof(field.c_str()));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("weights command reproduces the closed-form fixtures") {
  std::string dir = fresh_dir("weights");
  write_three_point(dir);

  REQUIRE(run("weights three.csv --psi mean --gamma 0 --theta 0 --out el", dir) == 0);
  auto el = parse_csv(slurp(dir + "/el/weights.csv"));
  REQUIRE(el.size() == 3);
  // columns: i, x1, psi1, weight
  CHECK(el[0][3] == doctest::Approx(0.4444).epsilon(1e-3));
  CHECK(el[1][3] == doctest::Approx(0.3333).epsilon(1e-3));
  CHECK(el[2][3] == doctest::Approx(0.2222).epsilon(1e-3));

  REQUIRE(run("weights three.csv --psi mean --gamma -1 --theta 0 --out et", dir) == 0);
  auto et = parse_csv(slurp(dir + "/et/weights.csv"));
  CHECK(et[0][3] == doctest::Approx(0.4360).epsilon(1e-3));
  CHECK(et[1][3] == doctest::Approx(0.3461).epsilon(1e-3));
  CHECK(et[2][3] == doctest::Approx(0.2180).epsilon(1e-3));

  // at the sample mean every weight is 1/n
  REQUIRE(run("weights three.csv --psi mean --gamma 0.4 --theta 0.333333333333333 --out un",
              dir) == 0);
  auto un = parse_csv(slurp(dir + "/un/weights.csv"));
  for (const auto& row : un) CHECK(row[3] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  CHECK(slurp(dir + "/el/manifest.txt").find("command = weights") != std::string::npos);
}

TEST_CASE("exit codes: hull failure 2, usage 64") {
  std::string dir = fresh_dir("codes");
  write_three_point(dir);
  CHECK(run("weights three.csv --psi mean --gamma 0 --theta 99", dir) == 2);
  CHECK(run("weights three.csv --bogus-flag 1", dir) == 64);
  CHECK(run("", dir) == 64);

  std::ofstream bad(dir + "/bad.csv");
  bad << "v1\nxyz\n";
  bad.close();
  CHECK(run("weights bad.csv --psi mean --theta 0", dir) == 64);
}

TEST_CASE("profile command emits the curve with the parametric overlay") {
  std::string dir = fresh_dir("profile");
  write_three_point(dir);
  REQUIRE(run("profile three.csv --psi mean --gamma 0 --grid 0.3333333333:0.3333333333:1 "
              "--parametric laplace --out p",
              dir) == 0);
  auto rows = parse_csv(slurp(dir + "/p/profile.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  REQUIRE(rows[0].size() == 3);  // theta, gelr, parametric
}

TEST_CASE("posterior runs are reproducible byte for byte") {
  std::string dir = fresh_dir("posterior");
  write_three_point(dir);
  std::ofstream data(dir + "/sample.csv");
  data << "v1\n";
  for (int i = 0; i < 40; ++i) data << 0.3 + 0.8 * std::sin(i * 1.7) << "\n";
  data.close();

  std::string flags =
      "posterior sample.csv --psi mean --gamma 0 --prior normal:0,1 "
      "--alpha 0.25,0.5,0.75 --chain-length 4000 --burn-in 800 --seed 42";
  REQUIRE(run(flags + " --out a --chain-out chain.csv", dir) == 0);
  REQUIRE(run(flags + " --out b --chain-out chain.csv", dir) == 0);
  CHECK(slurp(dir + "/a/quantiles.csv") == slurp(dir + "/b/quantiles.csv"));
  CHECK(slurp(dir + "/a/chain.csv") == slurp(dir + "/b/chain.csv"));
  CHECK(!slurp(dir + "/a/chain.csv").empty());

  // quantiles come back sorted in alpha
  auto rows = parse_csv(slurp(dir + "/a/quantiles.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][2] <= rows[1][2]);
  CHECK(rows[1][2] <= rows[2][2]);
}

TEST_CASE("seed falls back to the environment variable") {
  std::string dir = fresh_dir("envseed");
  write_three_point(dir);
  std::ofstream data(dir + "/sample.csv");
  data << "v1\n";
  for (int i = 0; i < 30; ++i) data << std::cos(i * 0.9) << "\n";
  data.close();

  std::string base =
      "posterior sample.csv --psi mean --gamma 0 --prior flat --alpha 0.5 "
      "--chain-length 2000 --burn-in 400";
  std::string with_env = "CREL_SEED=777 " + std::string(cli_path()) + " " + base + " --out env";
  REQUIRE(std::system(("cd " + dir + " && " + with_env + " > /dev/null 2>&1").c_str()) == 0);
  REQUIRE(run(base + " --seed 777 --out flag", dir) == 0);
  CHECK(slurp(dir + "/env/quantiles.csv") == slurp(dir + "/flag/quantiles.csv"));
}

TEST_CASE("reproduce table 2 emits the analytic values") {
  std::string dir = fresh_dir("table2");
  REQUIRE(run("reproduce --table 2 --out t2", dir) == 0);
  auto rows = parse_csv(slurp(dir + "/t2/table2.csv"));
  REQUIRE(rows.size() == 5);
  // columns: alpha, mean, huber, biweight (powers of 1e-2)
  CHECK(rows[0][1] == doctest::Approx(-8.878).epsilon(1e-3));
  CHECK(rows[1][1] == doctest::Approx(0.0).scale(1.0));
  CHECK(rows[2][1] == doctest::Approx(8.878).epsilon(1e-3));
  CHECK(rows[3][1] == doctest::Approx(7.027).epsilon(1e-3));
  CHECK(rows[4][1] == doctest::Approx(2.568).epsilon(1e-3));
}

TEST_CASE("config file sets options and rejects unknown keys") {
  std::string dir = fresh_dir("config");
  write_three_point(dir);
  std::ofstream cfg(dir + "/run.cfg");
  cfg << "gamma=-1\ntheta=0\npsi=mean\n";
  cfg.close();
  REQUIRE(run("weights three.csv --config run.cfg --out c", dir) == 0);
  auto rows = parse_csv(slurp(dir + "/c/weights.csv"));
  CHECK(rows[0][3] == doctest::Approx(0.4360).epsilon(1e-3));

  std::ofstream bad(dir + "/bad.cfg");
  bad << "not_a_key=1\n";
  bad.close();
  CHECK(run("weights three.csv --config bad.cfg --out d", dir) == 64);
}
