#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <nlohmann/json.hpp>
#include <sstream>

#include "commands.hpp"
#include "gradspec/trace.hpp"
#include "oracles.hpp"

namespace gradspec::cli {
namespace {

using nlohmann::json;

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::set<std::string> keys(const json& j) {
  std::set<std::string> k;
  for (auto it = j.begin(); it != j.end(); ++it) k.insert(it.key());
  return k;
}

class Cli : public ::testing::Test {
 protected:
  testing::TempDir dir;
  std::string trace(const std::string& name, const std::string& n = "60", const std::string& T = "80",
                    std::vector<std::string> extra = {}) {
    const auto path = (dir / name).string();
    std::vector<std::string> args{"--seed", "7", "generate", "--n", n, "--T", T, "-o", path};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = invoke(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return path;
  }
};

TEST_F(Cli, GenerateWritesHeaderAndSummary) {
  const auto path = (dir / "a.ghm").string();
  const auto r = invoke({"generate", "--source", "gaussian-zipf", "--n", "30", "--T", "50", "--s", "1.3",
                         "--seed", "7", "-o", path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "n=30 T=50 B=0 seed=7\n");
  const auto g = load_trace(path);
  EXPECT_EQ(g.n(), 30u);
  EXPECT_EQ(g.T(), 50u);
  const auto again = (dir / "b.ghm").string();
  invoke({"generate", "--source", "gaussian-zipf", "--n", "30", "--T", "50", "--s", "1.3", "--seed", "7", "-o", again});
  EXPECT_EQ(slurp(path), slurp(again));
}

TEST_F(Cli, GenerateValidation) {
  const auto r = invoke({"generate", "--alpha-stable", "2.5", "-o", (dir / "x").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpha out of range"), std::string::npos);
  EXPECT_EQ(invoke({"generate", "--source", "nope", "-o", (dir / "x").string()}).code, 2);
  EXPECT_EQ(invoke({"generate"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(Cli, GenerateOtherSources) {
  for (const std::vector<std::string>& extra :
       {std::vector<std::string>{"--source", "alpha-stable", "--alpha-stable", "1.5"},
        std::vector<std::string>{"--source", "quadratic", "--batch", "4"},
        std::vector<std::string>{"--source", "toy-mlp", "--batch", "4", "--classes", "3", "--dim", "2",
                                 "--samples", "30", "--hidden", "3", "--transform", "momentum:0.9"}}) {
    const auto path = (dir / "src.ghm").string();
    std::vector<std::string> args{"--seed", "1", "generate", "--n", "10", "--T", "20", "-o", path};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = invoke(args);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_trace(path).T(), 20u);
  }
}

TEST_F(Cli, AnalyzeCsvGolden) {
  const auto path = trace("t.ghm");
  const auto r = invoke({"--k-powerlaw", "40", "--k-gauss", "30", "analyze", path});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header, dim, it, extra;
  std::getline(lines, header);
  std::getline(lines, dim);
  std::getline(lines, it);
  EXPECT_EQ(header, "axis,tested,untestable,mean_dks,d_c,powerlaw_rate,mean_p,gaussian_rate");
  EXPECT_EQ(dim.rfind("dimension,80,0,", 0), 0u) << dim;
  EXPECT_EQ(it.rfind("iteration,60,0,", 0), 0u) << it;
  EXPECT_FALSE(std::getline(lines, extra));
}

TEST_F(Cli, AnalyzeJsonKeys) {
  const auto path = trace("t.ghm");
  const auto r = invoke({"--format", "json", "--k-powerlaw", "40", "--k-gauss", "30", "analyze", path,
                         "--axis", "iteration"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(keys(j), (std::set<std::string>{"version", "settings", "trace", "rows"}));
  ASSERT_EQ(j["rows"].size(), 1u);
  EXPECT_EQ(keys(j["rows"][0]),
            (std::set<std::string>{"axis", "tested", "untestable", "mean_dks", "d_c", "powerlaw_rate", "mean_p",
                                   "gaussian_rate", "slices_total", "slices_selected", "powerlaw_untestable",
                                   "gauss_untestable"}));
  EXPECT_EQ(j["rows"][0]["axis"], "iteration");
}

TEST_F(Cli, AnalyzeErrors) {
  EXPECT_EQ(invoke({"analyze", (dir / "missing.ghm").string()}).code, 2);
  const auto path = trace("t.ghm");
  EXPECT_EQ(invoke({"--k-gauss", "10", "analyze", path}).code, 2);
  EXPECT_EQ(invoke({"analyze", path, "--axis", "diagonal"}).code, 2);
  EXPECT_EQ(invoke({"--format", "xml", "analyze", path}).code, 2);
}

TEST_F(Cli, SpectrumExports) {
  const auto path = trace("t.ghm");
  const auto prefix = (dir / "spec").string();
  const auto r = invoke({"--k-powerlaw", "40", "-o", prefix, "spectrum", path});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(slurp(prefix + ".json"));
  EXPECT_EQ(keys(j), (std::set<std::string>{"version", "centered", "n", "T", "route", "trace", "rank",
                                            "eigenvalues", "powerlaw", "eigengap_powerlaw", "loglog"}));
  EXPECT_EQ(j["route"], "dense");
  const auto count_rows = [](const std::string& text) {
    std::size_t rows = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) rows += line.rfind("#", 0) == 0 ? 0 : 1;
    return rows;
  };
  const auto eig = slurp(prefix + ".eig.tsv");
  const auto gaps = slurp(prefix + ".gaps.tsv");
  EXPECT_EQ(count_rows(eig), 60u);
  EXPECT_EQ(count_rows(gaps), 59u);
  EXPECT_EQ(eig.rfind("# {", 0), 0u);
}

TEST_F(Cli, CenteredAndUncenteredAgreeOnZeroMeanSource) {
  const auto path = trace("wide.ghm", "20", "2000");
  const auto c = json::parse(invoke({"spectrum", path, "--centered"}).out);
  const auto u = json::parse(invoke({"spectrum", path, "--uncentered"}).out);
  EXPECT_TRUE(c["centered"].get<bool>());
  EXPECT_FALSE(u["centered"].get<bool>());
  EXPECT_NEAR(c["trace"].get<double>(), u["trace"].get<double>(), 0.05 * u["trace"].get<double>());
}

TEST_F(Cli, CompareHessianQuadratic) {
  const auto r = invoke({"--seed", "3", "compare-hessian", "--quadratic", "--n", "40", "--batch", "2",
                         "--T", "500", "--top", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j.contains("hessian_powerlaw"));
  EXPECT_TRUE(j.contains("covariance_powerlaw"));
  ASSERT_EQ(j["rows"].size(), 10u);
  for (const auto& row : j["rows"]) {
    EXPECT_NEAR(row["hessian"].get<double>(), row["injected"].get<double>(), 1e-6);
    EXPECT_TRUE(row.contains("ratio"));
  }
}

TEST_F(Cli, CompareHessianModelAndLimits) {
  const std::vector<std::string> model{"--classes", "3", "--dim", "4", "--samples", "60", "--hidden", "5"};
  std::vector<std::string> args{"compare-hessian", "--T", "100", "--batch", "4", "--pretrain-epochs", "5"};
  args.insert(args.end(), model.begin(), model.end());
  const auto r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_FALSE(j["rows"].empty());
  EXPECT_TRUE(j["rows"][0].contains("ratio"));

  auto bn = args;
  bn.push_back("--batch-norm");
  EXPECT_EQ(invoke(bn).code, 2);
  bn.push_back("--freeze-batchnorm");
  EXPECT_EQ(invoke(bn).code, 0);

  EXPECT_EQ(invoke({"compare-hessian", "--quadratic", "--n", "2001"}).code, 2);
}

TEST_F(Cli, CompareHessianRandomModelReportsBothVerdicts) {
  const auto r = invoke({"compare-hessian", "--T", "200", "--batch", "1", "--pretrain-epochs", "0", "--classes", "3",
                         "--dim", "4", "--samples", "60", "--hidden", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j["hessian_powerlaw"].is_object());
  EXPECT_TRUE(j["covariance_powerlaw"].is_object());
  EXPECT_TRUE(j.contains("hessian_min_eigenvalue"));
  EXPECT_GE(j["hessian_negative_count"].get<int>(), 0);
}

TEST_F(Cli, RobustnessReport) {
  const auto path = trace("t.ghm");
  const auto zero = json::parse(invoke({"robustness", path, "--k", "2", "--eps", "0", "--trials", "5"}).out);
  EXPECT_EQ(zero["max_sin"].get<double>(), 0.0);
  EXPECT_EQ(zero["violations"].get<int>(), 0);
  const auto r = invoke({"robustness", path, "--k", "1", "--eps", "1e-4", "--trials", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(keys(j), (std::set<std::string>{"version", "k", "eps", "trials", "centered", "gap_min", "op_norm_mean",
                                            "max_sin", "min_bound", "max_bound", "violations", "s_hat",
                                            "zipf_bound"}));
  EXPECT_EQ(j["violations"].get<int>(), 0);
  EXPECT_EQ(invoke({"robustness", path, "--k", "500"}).code, 2);
}

TEST_F(Cli, RobustnessZipfColumnIsConditional) {
  const auto s1 = trace("s1.ghm", "40", "4000", {"--s", "1.0"});
  const auto s2 = trace("s2.ghm", "40", "4000", {"--s", "2.0"});
  const auto a = json::parse(invoke({"--k-powerlaw", "20", "robustness", s1, "--k", "2", "--trials", "3"}).out);
  const auto b = json::parse(invoke({"--k-powerlaw", "20", "robustness", s2, "--k", "2", "--trials", "3"}).out);
  ASSERT_FALSE(a["s_hat"].is_null());
  EXPECT_EQ(a["zipf_bound"].is_null(), !(a["s_hat"] >= 0.8 && a["s_hat"] <= 1.2));
  EXPECT_EQ(b["zipf_bound"].is_null(), !(b["s_hat"] >= 0.8 && b["s_hat"] <= 1.2));
}

TEST_F(Cli, DeterministicAcrossWorkerCounts) {
  const auto path = trace("t.ghm");
  const std::vector<std::vector<std::string>> commands = {
      {"--k-powerlaw", "40", "--k-gauss", "30", "analyze", path},
      {"--k-powerlaw", "40", "--format", "json", "analyze", path},
      {"--k-powerlaw", "40", "spectrum", path},
      {"robustness", path, "--k", "3", "--trials", "12"},
  };
  for (const auto& base : commands) {
    std::string first;
    for (const char* workers : {"1", "3", "8"}) {
      auto args = base;
      args.insert(args.begin(), {"--workers", workers});
      const auto r = invoke(args);
      ASSERT_EQ(r.code, 0) << r.err;
      if (first.empty()) first = r.out;
      EXPECT_EQ(r.out, first) << base.back() << " workers=" << workers;
    }
  }
}

TEST(RatesCsv, NanFormatting) {
  RateSummary r;
  r.axis = Axis::IterationWise;
  r.untestable = 4;
  r.mean_dks = r.d_c = r.mean_p = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(rates_csv({r}),
            "axis,tested,untestable,mean_dks,d_c,powerlaw_rate,mean_p,gaussian_rate\n"
            "iteration,0,4,nan,nan,0.000000,nan,0.000000\n");
}

}  // namespace
}  // namespace gradspec::cli
