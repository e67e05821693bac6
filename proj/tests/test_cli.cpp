#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "eoc/cli.hpp"

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "eoc_lowrank");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = eoc::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Csv {
  std::string manifest;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string at(std::size_t row, const std::string& col) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == col) return rows.at(row).at(i);
    }
    throw std::out_of_range(col);
  }
  double num(std::size_t row, const std::string& col) const { return std::strtod(at(row, col).c_str(), nullptr); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv parse(const std::string& text) {
  Csv csv;
  std::stringstream ss(text);
  std::string line;
  std::getline(ss, csv.manifest);
  std::getline(ss, line);
  csv.header = split(line);
  while (std::getline(ss, line)) csv.rows.push_back(split(line));
  return csv;
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    ::setenv("SOURCE_DATE_EPOCH", "0", 1);
    ::setenv("EOC_LOWRANK_THREADS", "2", 1);
  }
  void TearDown() override {
    ::unsetenv("SOURCE_DATE_EPOCH");
    ::unsetenv("EOC_LOWRANK_THREADS");
  }
};

}  // namespace

TEST_F(Cli, FixedPointIdentity) {
  const auto r = run({"fixed-point", "--activation", "identity", "--gamma", "0.5", "--sigma-alpha2", "1.0", "--sigma-b2", "0.6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 1u);
  EXPECT_NEAR(csv.num(0, "q_star"), 0.6, 1e-9);
  EXPECT_DOUBLE_EQ(csv.num(0, "chi"), 0.5);
  EXPECT_EQ(csv.at(0, "phase"), "ordered");
  EXPECT_EQ(csv.at(0, "c_star"), "1");
}

TEST_F(Cli, FixedPointEdgeOfChaosEndpoint) {
  const auto r = run({"fixed-point", "--activation", "tanh", "--gamma", "1", "--sigma-alpha2", "1", "--sigma-b2", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  EXPECT_EQ(csv.num(0, "q_star"), 0.0);
  EXPECT_EQ(csv.num(0, "chi"), 1.0);
  EXPECT_EQ(csv.at(0, "phase"), "critical");
  EXPECT_EQ(csv.at(0, "xi_grad"), "inf");
}

TEST_F(Cli, IdentityEocCurveIsOnePoint) {
  const auto r = run({"eoc-curve", "--activation", "identity", "--gamma", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 1u);
  EXPECT_EQ(csv.header, (std::vector<std::string>{"q_star", "gamma_sigma_alpha2", "gamma_sigma_b2"}));
  EXPECT_DOUBLE_EQ(csv.num(0, "gamma_sigma_alpha2"), 1.0);
  EXPECT_EQ(csv.num(0, "gamma_sigma_b2"), 0.0);
}

TEST_F(Cli, AnalyticJacobianVariance) {
  const auto r = run({"jacobian-variance", "--activation", "identity", "--ensemble", "gaussian", "--gamma", "1",
                      "--depth", "10", "--analytic"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 10u);
  EXPECT_NEAR(csv.num(9, "analytic_variance"), 10.0, 1e-12);
  EXPECT_EQ(csv.at(9, "L"), "10");
  EXPECT_EQ(csv.at(9, "empirical_mean"), "nan");
  EXPECT_EQ(csv.at(9, "trials"), "0");
}

TEST_F(Cli, EmpiricalJacobianVarianceSmall) {
  const auto r = run({"jacobian-variance", "--activation", "identity", "--ensemble", "orthogonal", "--gamma", "1",
                      "--depth", "3", "--width", "40", "--trials", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(csv.num(i, "analytic_variance"), 0.0);
    EXPECT_LT(csv.num(i, "empirical_mean"), 1e-12);
  }
}

TEST_F(Cli, IdenticalInputsGiveUnitCorrelation) {
  const auto r = run({"correlation-dynamics", "--c0", "1.0", "--width", "120", "--depth", "6", "--trials", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 7u);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    EXPECT_EQ(csv.at(i, "empirical_mean"), "1");
    EXPECT_EQ(csv.at(i, "theory_c"), "1");
  }
}

TEST_F(Cli, GradientPropagationTheoryColumn) {
  const auto r = run({"gradient-propagation", "--chi", "0.8", "--width", "60", "--depth", "4", "--trials", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(csv.num(i, "theory_ratio"), std::pow(0.8, 3 - static_cast<int>(i)), 1e-9);
  EXPECT_EQ(csv.at(3, "empirical_norm"), "1");
  const auto man = nlohmann::json::parse(csv.manifest.substr(2));
  EXPECT_EQ(man["resolved"].size(), 1u);
}

TEST_F(Cli, SpectrumDumpRows) {
  const auto r = run({"spectrum-dump", "--activation", "identity", "--ensemble", "orthogonal", "--gamma", "0.5",
                      "--width", "20", "--depth", "3", "--depths", "3,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 40u);
  EXPECT_EQ(csv.at(0, "depth"), "1");
  EXPECT_EQ(csv.at(39, "depth"), "3");
  // Critical identity at gamma = 1/2 has sigma_alpha2 = 2.
  EXPECT_NEAR(csv.num(0, "value"), std::sqrt(2.0), 1e-12);
}

TEST_F(Cli, DepthScalesSerialiseInfinity) {
  const auto r = run({"depth-scales", "--activation", "identity", "--gsa2-min", "1", "--gsa2-max", "1", "--gsa2-steps",
                      "1", "--sigma-b2", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.rows.size(), 1u);
  EXPECT_EQ(csv.at(0, "xi_q"), "inf");
  EXPECT_EQ(csv.at(0, "xi_c"), "inf");
}

TEST_F(Cli, ManifestLine) {
  const auto r = run({"fixed-point", "--gamma", "0.25", "--sigma-alpha2", "4", "--sigma-b2", "0.4", "--seed", "17"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = parse(r.out);
  ASSERT_EQ(csv.manifest.rfind("# ", 0), 0u);
  const auto man = nlohmann::json::parse(csv.manifest.substr(2));
  EXPECT_EQ(man["subcommand"], "fixed-point");
  EXPECT_EQ(man["seed"], 17);
  EXPECT_EQ(man["config"]["gamma"], 0.25);
  EXPECT_EQ(man["config"]["width"], 1000);
  EXPECT_EQ(man["quad_order"], 61);
  EXPECT_EQ(man["started"], "1970-01-01T00:00:00Z");
  EXPECT_TRUE(man.contains("version"));
}

TEST_F(Cli, Deterministic) {
  const std::vector<std::string> args{"correlation-dynamics", "--width", "100", "--depth", "4", "--trials", "3", "--seed", "9"};
  EXPECT_EQ(run(args).out, run(args).out);
}

TEST_F(Cli, JsonAndCsvCarryTheSameNumbers) {
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{"fixed-point", "--activation", "tanh", "--gamma", "1", "--sigma-alpha2", "1", "--sigma-b2", "0"},
        std::vector<std::string>{"correlation-dynamics", "--width", "80", "--depth", "3", "--trials", "2"},
        std::vector<std::string>{"jacobian-variance", "--activation", "identity", "--depth", "2", "--analytic"}}) {
    auto csv_args = args;
    auto json_args = args;
    json_args.insert(json_args.end(), {"--format", "json"});
    const auto csv = parse(run(csv_args).out);
    const auto js = nlohmann::json::parse(run(json_args).out);
    ASSERT_EQ(js["columns"].get<std::vector<std::string>>(), csv.header);
    ASSERT_EQ(js["rows"].size(), csv.rows.size());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      for (std::size_t j = 0; j < csv.header.size(); ++j) {
        const auto& cell = js["rows"][i][j];
        const auto& text = csv.rows[i][j];
        if (cell.is_string()) {
          EXPECT_EQ(cell.get<std::string>(), text);
        } else {
          EXPECT_EQ(cell.get<double>(), std::strtod(text.c_str(), nullptr)) << args[0] << " " << i << "," << j;
        }
      }
    }
  }
}

TEST_F(Cli, WritesOutputFile) {
  const auto path = std::filesystem::temp_directory_path() / "eoc_cli_test_out.csv";
  std::filesystem::remove(path);
  const auto r = run({"fixed-point", "--activation", "identity", "--sigma-b2", "0.3", "--sigma-alpha2", "0.5", "--out",
                      path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_NEAR(parse(ss.str()).num(0, "q_star"), 0.6, 1e-9);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove(path);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({"fixed-point", "--help"}).code, eoc::kExitOk);
  EXPECT_EQ(run({}).code, eoc::kExitUsage);
  EXPECT_EQ(run({"fixed-point", "--no-such-flag"}).code, eoc::kExitUsage);
  EXPECT_EQ(run({"fixed-point", "--gamma", "abc"}).code, eoc::kExitUsage);
  EXPECT_EQ(run({"fixed-point", "--gamma", "1.5"}).code, eoc::kExitUsage);
  EXPECT_EQ(run({"fixed-point", "--activation", "sigmoid"}).code, eoc::kExitUsage);
  EXPECT_EQ(run({"fixed-point", "--format", "xml"}).code, eoc::kExitUsage);
  EXPECT_EQ(run({"correlation-dynamics", "--c0", "1.5", "--width", "20"}).code, eoc::kExitUsage);
  // Supercritical linear network: the length map diverges.
  const auto r = run({"fixed-point", "--activation", "identity", "--sigma-alpha2", "2", "--sigma-b2", "0.1"});
  EXPECT_EQ(r.code, eoc::kExitNumerical);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}
