#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crimeflow/util/csv.hpp"
#include "crimeflow/util/io.hpp"
#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    auto dir = fs::temp_directory_path() / "crimeflow_cli_capture";
    fs::create_directories(dir);
    auto out = dir / ("out" + std::to_string(counter) + ".txt");
    auto err = dir / ("err" + std::to_string(counter++) + ".txt");
    std::string cmd = "env -u CRIMEFLOW_SEED -u CRIMEFLOW_THREADS -u CRIMEFLOW_TZ -u CRIMEFLOW_OUT_DIR -u CRIMEFLOW_CONFIG " +
                      env_prefix + " " + CRIMEFLOW_CLI + " " + args + " >" + out.string() + " 2>" + err.string();
    int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = crimeflow::csv::read_file(out.string());
    r.err = crimeflow::csv::read_file(err.string());
    return r;
}

std::string small_config(const fs::path& dir) {
    json c{{"synth", {{"width", 5}, {"height", 4}, {"transitions", 20000}, {"users", 200}}},
           {"forecast",
            {{"folds", 3},
             {"en", {{"lambdas", {0.01, 1.0}}, {"alphas", {0.5, 1.0}}}},
             {"rf", {{"n_trees", {20}}, {"max_depth", {4, nullptr}}, {"max_features", {"third"}}}}}}};
    return testsupport::write(dir / "config.json", c.dump(2));
}

json manifest(const fs::path& out) { return json::parse(crimeflow::csv::read_file((out / "manifest.json").string())); }

std::map<std::string, std::string> tree_digests(const fs::path& root) {
    std::map<std::string, std::string> d;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            d[fs::relative(e.path(), root).generic_string()] = crimeflow::io::sha256_file(e.path());
    return d;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(cli("--help").code, 0);
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("network").code, 1);
}

TEST(Cli, MissingUpstreamNamesCommand) {
    auto dir = testsupport::scratch("cli_upstream");
    auto r = cli("explain --out-dir " + (dir / "out").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("panel not found; run `features build`"), std::string::npos) << r.err;
    r = cli("network build --out-dir " + (dir / "out").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("run `ingest`"), std::string::npos) << r.err;
    r = cli("report --out-dir " + (dir / "out").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("run `explain`"), std::string::npos) << r.err;
}

TEST(Cli, IngestRejectsMissingInputs) {
    auto dir = testsupport::scratch("cli_inputs");
    auto r = cli("ingest --out-dir " + (dir / "out").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--tracts"), std::string::npos);
    r = cli("ingest --out-dir " + (dir / "out").string() + " --tracts " + (dir / "nope.geojson").string() +
            " --venues x --transitions y --crimes z");
    EXPECT_EQ(r.code, 1);
}

TEST(Cli, BadConfigIsValidationError) {
    auto dir = testsupport::scratch("cli_badcfg");
    auto cfg = testsupport::write(dir / "c.json", R"({"synth": {"widht": 4}})");
    EXPECT_EQ(cli("synth generate --config " + cfg + " --out-dir " + (dir / "out").string()).code, 1);
    auto broken = testsupport::write(dir / "b.json", "{not json");
    EXPECT_EQ(cli("synth generate --config " + broken + " --out-dir " + (dir / "out").string()).code, 1);
}

TEST(Cli, FullPipelineManifestAndDeterminism) {
    auto dir = testsupport::scratch("cli_full");
    auto cfg = small_config(dir);
    auto out = dir / "out";
    auto r = cli("synth generate --seed 7 --config " + cfg + " --out-dir " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    r = cli("run --seed 7 --threads 1 --config " + cfg + " --out-dir " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;

    auto m = manifest(out);
    for (const char* stage :
         {"synth generate", "ingest", "network build", "features build", "explain", "forecast", "report"}) {
        ASSERT_TRUE(m["stages"].contains(stage)) << stage;
        const auto& st = m["stages"][stage];
        EXPECT_EQ(st["seed"], 7);
        EXPECT_FALSE(st["outputs"].empty()) << stage;
        for (const auto& f : st["outputs"]) EXPECT_EQ(crimeflow::io::sha256_file(f["path"].get<std::string>()), f["sha256"]);
        EXPECT_TRUE(st["seconds"].is_number());
    }
    // every file the pipeline wrote is listed in some stage
    std::set<std::string> listed;
    for (const auto& [name, st] : m["stages"].items())
        for (const auto& f : st["outputs"]) listed.insert(fs::path(f["path"].get<std::string>()).lexically_normal().generic_string());
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") {
            EXPECT_TRUE(listed.count(e.path().lexically_normal().generic_string())) << e.path();
        }
    }

    auto first = tree_digests(out);
    EXPECT_GT(first.size(), 20u);
    r = cli("forecast --seed 7 --threads 3 --config " + cfg + " --out-dir " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    r = cli("explain --seed 7 --threads 2 --config " + cfg + " --out-dir " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(tree_digests(out), first);

    auto report = crimeflow::csv::read_file((out / "report/table1.txt").string());
    EXPECT_NE(report.find("passthrough_flow"), std::string::npos);
    EXPECT_NE(report.find("LR test p"), std::string::npos);
    auto t2 = crimeflow::csv::read_file((out / "report/table2.txt").string());
    EXPECT_NE(t2.find("Historical"), std::string::npos);
    EXPECT_NE(t2.find("Wilcoxon p"), std::string::npos);
}

TEST(Cli, FlagsBeatEnvBeatConfig) {
    auto dir = testsupport::scratch("cli_precedence");
    auto out = dir / "out";
    auto cfg = testsupport::write(dir / "c.json",
                                  json{{"seed", 3}, {"synth", {{"width", 2}, {"height", 2}, {"transitions", 100}}}}.dump());
    auto seed_used = [&] { return manifest(out)["stages"]["synth generate"]["seed"].get<int>(); };
    ASSERT_EQ(cli("synth generate --config " + cfg + " --out-dir " + out.string()).code, 0);
    EXPECT_EQ(seed_used(), 3);
    ASSERT_EQ(cli("synth generate --config " + cfg + " --out-dir " + out.string(), "CRIMEFLOW_SEED=5").code, 0);
    EXPECT_EQ(seed_used(), 5);
    ASSERT_EQ(cli("synth generate --seed 7 --config " + cfg + " --out-dir " + out.string(), "CRIMEFLOW_SEED=5").code, 0);
    EXPECT_EQ(seed_used(), 7);
    // out dir and config from the environment
    auto env_out = dir / "env_out";
    ASSERT_EQ(cli("synth generate", "CRIMEFLOW_OUT_DIR=" + env_out.string() + " CRIMEFLOW_CONFIG=" + cfg).code, 0);
    EXPECT_TRUE(fs::exists(env_out / "data/tracts.geojson"));
    EXPECT_EQ(cli("synth generate --out-dir " + out.string(), "CRIMEFLOW_SEED=abc").code, 1);
}

TEST(Cli, ForecastNeedsTwoYears) {
    auto dir = testsupport::scratch("cli_years");
    auto out = dir / "out";
    auto cfg = testsupport::write(
        dir / "c.json",
        json{{"synth", {{"width", 3}, {"height", 2}, {"transitions", 4000}, {"study_years", 1}}}}.dump());
    ASSERT_EQ(cli("synth generate --config " + cfg + " --out-dir " + out.string()).code, 0);
    for (const char* stage : {"ingest", "network build", "features build"})
        ASSERT_EQ(cli(std::string(stage) + " --config " + cfg + " --out-dir " + out.string()).code, 0) << stage;
    auto r = cli("forecast --config " + cfg + " --out-dir " + out.string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("evaluation year"), std::string::npos) << r.err;
}

TEST(Cli, NonConvergenceIsRuntimeFailure) {
    auto dir = testsupport::scratch("cli_converge");
    auto out = dir / "out";
    auto cfg = testsupport::write(
        dir / "c.json", json{{"synth", {{"width", 5}, {"height", 4}, {"transitions", 20000}}},
                             {"explain", {{"max_iter", 1}}}}.dump());
    ASSERT_EQ(cli("synth generate --config " + cfg + " --out-dir " + out.string()).code, 0);
    for (const char* stage : {"ingest", "network build", "features build"})
        ASSERT_EQ(cli(std::string(stage) + " --config " + cfg + " --out-dir " + out.string()).code, 0) << stage;
    auto r = cli("explain --config " + cfg + " --out-dir " + out.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("did not converge"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(out / "explain/pglm.json"));
}
