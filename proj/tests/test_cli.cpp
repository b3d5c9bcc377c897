// End-to-end checks of the command-line tool: spawns the built binary.

#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "schema_check.hpp"

namespace {

const std::string kCli = MDPDE_CLI_PATH;
const std::string kSource = MDPDE_SOURCE_DIR;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string out_path = "cli_out.tmp";
  const std::string cmd = kCli + " " + args + " > " + out_path + " 2> cli_err.tmp";
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  res.out = ss.str();
  return res;
}

nlohmann::json load_schema(const std::string& name) {
  std::ifstream in(kSource + "/schemas/" + name);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("cli: simulate then estimate on the reflecting walk is alpha-invariant") {
  auto sim = run("simulate --family reflecting-walk --K 6 --theta 0.3 --steps 500 --seed 42 "
                 "--output rwseq.tmp");
  REQUIRE(sim.exit_code == 0);
  auto est = run("estimate --family reflecting-walk --input rwseq.tmp --alpha 0,0.5,1");
  REQUIRE(est.exit_code == 0);
  const auto j = nlohmann::json::parse(est.out);
  schema_check::validate_against(j, load_schema("estimate.json"));
  REQUIRE(j["fits"].size() == 3);
  const double t0 = j["fits"][0]["estimate"]["theta_hat"][0].get<double>();
  const double t1 = j["fits"][1]["estimate"]["theta_hat"][0].get<double>();
  const double t2 = j["fits"][2]["estimate"]["theta_hat"][0].get<double>();
  CHECK(std::abs(t0 - t1) < 1e-8);
  CHECK(std::abs(t1 - t2) < 1e-8);
  CHECK(std::abs(t0 - j["closed_form_mle"][0].get<double>()) < 1e-8);
  std::remove("rwseq.tmp");
}

TEST_CASE("cli: estimate at alpha 0 equals the closed-form MLE") {
  auto sim = run("simulate --family binomial-walk --K 10 --theta 0.25 --steps 4000 --seed 77 "
                 "--output bwseq.tmp");
  REQUIRE(sim.exit_code == 0);
  auto est = run("estimate --family binomial-walk --input bwseq.tmp --alpha 0");
  REQUIRE(est.exit_code == 0);
  const auto j = nlohmann::json::parse(est.out);
  CHECK(std::abs(j["fits"][0]["estimate"]["theta_hat"][0].get<double>() -
                 j["closed_form_mle"][0].get<double>()) < 1e-8);
  std::remove("bwseq.tmp");
}

TEST_CASE("cli: two-sample of a file against itself is exactly null") {
  auto sim = run("simulate --family binomial-walk --K 8 --theta 0.3 --steps 1500 --seed 5 "
                 "--output ts.tmp");
  REQUIRE(sim.exit_code == 0);
  auto ts = run("two-sample --family binomial-walk --input ts.tmp --input2 ts.tmp --alpha 0.5");
  REQUIRE(ts.exit_code == 0);
  const auto j = nlohmann::json::parse(ts.out);
  schema_check::validate_against(j, load_schema("two_sample.json"));
  CHECK(j["test"]["statistic"].get<double>() == 0.0);
  CHECK(j["test"]["p_value"].get<double>() == 1.0);
  std::remove("ts.tmp");
}

TEST_CASE("cli: wald against the generating parameter accepts") {
  auto sim = run("simulate --family binomial-walk --K 8 --theta 0.3 --steps 3000 --seed 15 "
                 "--output wd.tmp");
  REQUIRE(sim.exit_code == 0);
  auto res = run("wald --family binomial-walk --input wd.tmp --alpha 0.5 --theta0 0.3");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  schema_check::validate_against(j, load_schema("wald.json"));
  CHECK(j["test"]["df"].get<int>() == 1);
  CHECK(j["test"]["p_value"].get<double>() > 0.001);
  std::remove("wd.tmp");
}

TEST_CASE("cli: bernoulli-laplace wald test runs on the multi walk") {
  auto sim = run("simulate --family multi-binomial-walk --K 5 --theta 0.75,0.5,0.25 "
                 "--steps 4000 --seed 25 --x0 3 --output bl.tmp");
  REQUIRE(sim.exit_code == 0);
  auto res = run("wald --family multi-binomial-walk --K 5 --input bl.tmp --alpha 0.5 "
                 "--bernoulli-laplace");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  CHECK(j["test"]["df"].get<int>() == 3);
  std::remove("bl.tmp");
}

TEST_CASE("cli: influence reports sensitivity") {
  auto res = run("influence --family binomial-walk --K 5 --theta 0.25 --alpha 0,1");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  schema_check::validate_against(j, load_schema("influence.json"));
  REQUIRE(j["alphas"].size() == 2);
  const double g0 = j["alphas"][0]["report"]["sensitivity"].get<double>();
  const double g1 = j["alphas"][1]["report"]["sensitivity"].get<double>();
  CHECK(g1 < g0);
  CHECK(j["alphas"][0]["report"]["sensitivity_method"] == "exhaustive");
}

TEST_CASE("cli: are-table matches the checked-in golden copy byte for byte") {
  auto res = run("are-table");
  REQUIRE(res.exit_code == 0);
  std::ifstream golden(kSource + "/data/are_table1_golden.csv", std::ios::binary);
  REQUIRE(golden.good());
  std::stringstream ss;
  ss << golden.rdbuf();
  CHECK(res.out == ss.str());
}

TEST_CASE("cli: identical seeds give byte-identical outputs") {
  auto a = run("simulate --family greenwood --K 9 --theta 0.25 --steps 200 --seed 99 --x0 10 "
               "--epsilon 0.1 --scheme absorb --target 1");
  auto b = run("simulate --family greenwood --K 9 --theta 0.25 --steps 200 --seed 99 --x0 10 "
               "--epsilon 0.1 --scheme absorb --target 1");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  auto c = run("simulate --family greenwood --K 9 --theta 0.25 --steps 200 --seed 100 --x0 10 "
               "--epsilon 0.1 --scheme absorb --target 1");
  CHECK(a.out != c.out);
}

TEST_CASE("cli: credit command reproduces the reference CCC/C default rates") {
  auto res = run("credit --packaged-credit --alpha 0.5");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  schema_check::validate_against(j, load_schema("credit.json"));
  bool saw_usa = false;
  for (const auto& row : j["rows"]) {
    if (row["market"] == "USA" && row["state"] == "CCC/C") {
      saw_usa = true;
      CHECK(std::abs(row["mle"].get<double>() - 0.6803) < 5e-4);
      CHECK(std::abs(row["fits"][0]["theta"].get<double>() - 0.7054) < 2e-3);
      CHECK(std::abs(row["fits"][0]["downgrade_pct"].get<double>() - 41.57) < 0.1);
    }
    if (row["state"] == "AAA") CHECK_FALSE(row["fitted"].get<bool>());
  }
  CHECK(saw_usa);
}

TEST_CASE("cli: credit accepts the shipped CSV file") {
  auto res = run("credit --input " + kSource + "/data/credit_transition_rates_2018.csv "
                 "--alpha 0.5 --format csv");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("market,state,alpha,theta,upgrade_pct,downgrade_pct") == 0);
  // locate the USA CCC/C MLE row and compare numerically
  std::istringstream is(res.out);
  bool found = false;
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("USA,CCC/C,mle,", 0) == 0) {
      found = true;
      const double theta = std::stod(line.substr(std::string("USA,CCC/C,mle,").size()));
      CHECK(std::abs(theta - 0.6803) < 5e-4);
    }
  }
  CHECK(found);
}

TEST_CASE("cli: bundle estimation pools sequences") {
  {
    std::ofstream out("bundle.tmp");
    out << "K=6\n";
    // two short walks over the reflecting support
    out << "1 2 3 2 1 2 3 4 3 2\n";
    out << "2 3 4 5 4 3 2 1 2 3\n";
  }
  auto res = run("estimate --family reflecting-walk --input bundle.tmp --bundle --alpha 0.5");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  CHECK(j["sequences"].get<int>() == 2);
  std::remove("bundle.tmp");
}

TEST_CASE("cli: malformed input exits with the input-error code") {
  {
    std::ofstream out("bad.tmp");
    out << "1 2 zebra 1\n";
  }
  auto res = run("estimate --family binomial-walk --K 5 --input bad.tmp --alpha 0.5");
  CHECK(res.exit_code == 1);
  std::remove("bad.tmp");

  auto missing = run("estimate --family binomial-walk --K 5 --input does_not_exist.tmp");
  CHECK(missing.exit_code == 1);
}

TEST_CASE("cli: mse experiment emits the plot-ready grid") {
  auto res = run("mse-experiment --family binomial-walk --K 10 --theta 0.25 --replicates 100 "
                 "--seed 3 --alphas 0,1 --epsilons 0,0.2 --lengths 50");
  REQUIRE(res.exit_code == 0);
  std::istringstream is(res.out);
  std::string header;
  std::getline(is, header);
  CHECK(header == "family,alpha,epsilon,T,mse");
  int lines = 0;
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) ++lines;
  CHECK(lines == 4);  // 2 alphas x 2 epsilons x 1 length
}

TEST_CASE("cli: estimate with --order 2 fits through the augmented space") {
  auto sim = run("simulate --family binomial-walk --K 6 --theta 0.3 --steps 2500 --seed 33 "
                 "--output ord.tmp");
  REQUIRE(sim.exit_code == 0);
  auto res = run("estimate --family binomial-walk --input ord.tmp --alpha 0.5 --order 2");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  CHECK(j["order"].get<int>() == 2);
  auto base = run("estimate --family binomial-walk --input ord.tmp --alpha 0.5");
  const auto jb = nlohmann::json::parse(base.out);
  CHECK(std::abs(j["fits"][0]["estimate"]["theta_hat"][0].get<double>() -
                 jb["fits"][0]["estimate"]["theta_hat"][0].get<double>()) < 0.01);
  std::remove("ord.tmp");
}

TEST_CASE("cli: estimate csv format") {
  auto sim = run("simulate --family reflecting-walk --K 5 --theta 0.4 --steps 800 --seed 8 "
                 "--output fmt.tmp");
  REQUIRE(sim.exit_code == 0);
  auto res = run("estimate --family reflecting-walk --input fmt.tmp --alpha 0,0.5 --format csv");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("alpha,coordinate,theta,se,ci_lower,ci_upper") == 0);
  int lines = 0;
  std::istringstream is(res.out);
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == 3);  // header + one row per alpha
}

TEST_CASE("cli: greenwood estimation falls back to the model-robust variance") {
  auto sim = run("simulate --family greenwood --K 9 --theta 0.25 --steps 60 --x0 10 --seed 4 "
                 "--output gw.tmp");
  REQUIRE(sim.exit_code == 0);
  auto res = run("estimate --family greenwood --K 9 --input gw.tmp --alpha 0,0.5");
  REQUIRE(res.exit_code == 0);
  const auto j = nlohmann::json::parse(res.out);
  CHECK(j["fits"][0]["asymptotics"]["mode"] == "model-robust");
  CHECK(std::abs(j["fits"][0]["estimate"]["theta_hat"][0].get<double>() -
                 j["closed_form_mle"][0].get<double>()) < 1e-8);
  std::remove("gw.tmp");
}
