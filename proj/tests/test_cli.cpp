#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hlab/cli/experiments.hpp"

using namespace hlab;
using namespace hlab::cli;

namespace {

RunConfig config_for(const std::string& name, json params = json::object(), json tols = json::object()) {
  RunConfig rc;
  rc.experiment = name;
  rc.parameters = std::move(params);
  rc.tolerances = std::move(tols);
  return rc;
}

const Experiment& exp(const std::string& name) {
  const Experiment* e = find_experiment(name);
  if (!e) throw std::runtime_error("missing experiment " + name);
  return *e;
}

int tool(const std::string& args, const std::string& out_dir = "") {
  std::string cmd;
  if (!out_dir.empty()) cmd += "HLAB_OUT_DIR=" + out_dir + " ";
  cmd += std::string(HLAB_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hlab_cli_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, StrictTopLevelKeys) {
  EXPECT_NO_THROW(parse_config(json::parse(R"({"experiment":"bm-ratio","seed":3,"threads":2})"), 1));
  EXPECT_THROW(parse_config(json::parse(R"({"experimnet":"bm-ratio"})"), 1), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"seed":-1})"), 1), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"threads":0})"), 1), ConfigError);
  EXPECT_THROW(parse_config(json::parse("[1, 2]"), 1), ConfigError);
  try {
    parse_config(json::parse(R"({"sede": 4})"), 1);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("did you mean 'seed'"), std::string::npos);
  }
}

TEST(Config, ParameterTables) {
  const auto& e = exp("bm-ratio");
  const auto t = cli::detail::resolve_table(e.params, json{{"n-max", 10}}, "parameter");
  EXPECT_EQ(t["n-min"], 3);
  EXPECT_EQ(t["n-max"], 10);
  EXPECT_THROW(cli::detail::resolve_table(e.params, json{{"n-maxx", 10}}, "parameter"), ConfigError);
  EXPECT_THROW(cli::detail::resolve_table(e.params, json{{"n-max", "ten"}}, "parameter"), ConfigError);
  EXPECT_THROW(cli::detail::resolve_table(e.params, json{{"n-max", 2.5}}, "parameter"), ConfigError);
  EXPECT_EQ(cli::detail::resolve_table(e.params, json{{"n-max", 12.0}}, "parameter")["n-max"], 12);
  EXPECT_EQ(parse_cli_value("64"), json(64));
  EXPECT_EQ(parse_cli_value("[0.5, 0.1]"), json::parse("[0.5, 0.1]"));
  EXPECT_EQ(parse_cli_value("2+sin(x1)"), json("2+sin(x1)"));
}

TEST(Config, EveryExperimentIsListed) {
  const std::vector<std::string> want{"bm-ratio", "ou-green-ratio", "coupling", "exit-bounds",
                                      "gamma-verify", "li-yau", "harnack", "distance"};
  EXPECT_EQ(experiment_names(), want);
  for (const auto& e : experiments()) {
    EXPECT_FALSE(e.params.empty()) << e.name;
    EXPECT_FALSE(e.tolerances.empty()) << e.name;
  }
}

TEST(Hash, GitBlobIds) {
  // values from git hash-object
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Suggest, NearestName) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(nearest("bm-ration", experiment_names()), "bm-ratio");
  EXPECT_EQ(nearest("harnak", experiment_names()), "harnack");
  EXPECT_EQ(nearest("gama-verify", experiment_names()), "gamma-verify");
}

TEST(Run, ArtifactsAndStatuses) {
  const auto ok = execute(exp("bm-ratio"), config_for("bm-ratio", {{"n-max", 20}}));
  EXPECT_EQ(ok.status, kExitOk);
  ASSERT_TRUE(ok.artifacts);
  const auto doc = json::parse(ok.artifacts->json_text);
  EXPECT_EQ(doc["schema"], "hlab.bm-ratio/1");
  EXPECT_EQ(doc["input_sha1"], git_blob_sha1(doc["config"].dump()));
  EXPECT_TRUE(doc["passed"].get<bool>());
  EXPECT_EQ(doc["checks"].size(), 2u);
  EXPECT_EQ(ok.artifacts->csv_text.rfind("# schema: hlab.bm-ratio.csv/1\n", 0), 0u);
  // 3 header lines, column line, 18 rows
  EXPECT_EQ(std::count(ok.artifacts->csv_text.begin(), ok.artifacts->csv_text.end(), '\n'), 22);

  const auto failed = execute(exp("bm-ratio"), config_for("bm-ratio", {}, {{"step", 0.0}}));
  EXPECT_EQ(failed.status, kExitCheckFailed);
  ASSERT_TRUE(failed.artifacts);
  EXPECT_FALSE(json::parse(failed.artifacts->json_text)["passed"].get<bool>());

  EXPECT_EQ(execute(exp("bm-ratio"), config_for("bm-ratio", {{"n-min", 2}})).status, kExitConfig);
  EXPECT_EQ(execute(exp("bm-ratio"), config_for("bm-ratio", {{"bogus", 2}})).status, kExitConfig);
  EXPECT_FALSE(execute(exp("bm-ratio"), config_for("bm-ratio", {{"bogus", 2}})).artifacts);
  EXPECT_EQ(execute(exp("distance"), config_for("distance", {{"straight-field", json::array({"1+"})}})).status,
            kExitConfig);

  // more witness targets than flow steps: numerical failure with the checks done so far
  const auto partial = execute(exp("distance"), config_for("distance", {{"witness-targets", 1000000}}));
  EXPECT_EQ(partial.status, kExitNumerical);
  ASSERT_TRUE(partial.artifacts);
  const auto pdoc = json::parse(partial.artifacts->json_text);
  EXPECT_EQ(pdoc["status"], "numerical-failure");
  EXPECT_FALSE(pdoc["passed"].get<bool>());
  EXPECT_GE(pdoc["checks"].size(), 3u);
}

TEST(Run, Deterministic) {
  for (const char* name : {"bm-ratio", "gamma-verify", "distance"}) {
    auto rc = config_for(name);
    rc.seed = 9;
    const auto a = execute(exp(name), rc);
    rc.threads = 3;
    const auto b = execute(exp(name), rc);
    ASSERT_TRUE(a.artifacts && b.artifacts) << name;
    EXPECT_EQ(a.artifacts->json_text, b.artifacts->json_text) << name;
    EXPECT_EQ(a.artifacts->csv_text, b.artifacts->csv_text) << name;
  }
  auto rc = config_for("coupling", {{"trials", 400}, {"dt", 1e-3}, {"dt-halving", false}, {"marginal-trials", 0}});
  rc.threads = 1;
  const auto a = execute(exp("coupling"), rc);
  rc.threads = 4;
  const auto b = execute(exp("coupling"), rc);
  ASSERT_TRUE(a.artifacts && b.artifacts);
  EXPECT_EQ(a.artifacts->json_text, b.artifacts->json_text);
  rc.seed = 2;
  const auto c = execute(exp("coupling"), rc);
  EXPECT_NE(a.artifacts->json_text, c.artifacts->json_text);
}

TEST(Tool, ExitCodesAndOutput) {
  const auto dir = scratch("tool");
  EXPECT_EQ(tool(""), 0);
  EXPECT_EQ(tool("list"), 0);
  EXPECT_EQ(tool("bm-ratoi"), 2);
  for (const auto& e : experiment_names()) EXPECT_EQ(tool(e + " --help"), 0) << e;
  EXPECT_EQ(tool("bm-ratio --n-max 64", dir.string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "bm-ratio.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "bm-ratio.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "bm-ratio.timing.json"));
  EXPECT_EQ(tool("bm-ratio --tol-step 0", dir.string()), 1);
  EXPECT_EQ(tool("bm-ratio --n-min 1", dir.string()), 2);
  EXPECT_EQ(tool("bm-ratio --no-such-flag 1", dir.string()), 2);
  EXPECT_EQ(tool("distance --witness-targets 1000000", dir.string()), 3);
  std::filesystem::remove_all(dir);
}

TEST(Tool, ConfigFilesAndRepeatRuns) {
  const auto dir = scratch("cfg");
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "good.json") << R"({"experiment": "gamma-verify", "seed": 5,
      "parameters": {"draws": 50, "m": 2, "d": 2}, "output_dir": ")" << (dir / "a").string() << "\"}";
    std::ofstream(dir / "bad.json") << R"({"experiment": "gamma-verify", "parameters": {"drawz": 50}})";
    std::ofstream(dir / "typo.json") << R"({"experiment": "gamma-verfy"})";
  }
  EXPECT_EQ(tool("run " + (dir / "good.json").string()), 0);
  const std::string first = slurp(dir / "a" / "gamma-verify.json");
  EXPECT_EQ(tool("run " + (dir / "good.json").string() + " --out " + (dir / "b").string()), 0);
  EXPECT_EQ(first, slurp(dir / "b" / "gamma-verify.json"));
  EXPECT_EQ(slurp(dir / "a" / "gamma-verify.csv"), slurp(dir / "b" / "gamma-verify.csv"));
  EXPECT_EQ(tool("gamma-verify --config " + (dir / "good.json").string() + " --draws 60 --out " + (dir / "c").string()), 0);
  EXPECT_EQ(json::parse(slurp(dir / "c" / "gamma-verify.json"))["config"]["parameters"]["draws"], 60);
  EXPECT_EQ(tool("run " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(tool("run " + (dir / "typo.json").string()), 2);
  EXPECT_EQ(tool("run " + (dir / "missing.json").string()), 2);
  std::filesystem::remove_all(dir);
}
