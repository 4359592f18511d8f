#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
    int code = -1;
    std::string out;
};

std::string scenario(const std::string& name) {
    return std::string(SATQKD_SOURCE_DIR) + "/scenarios/" + name + ".json";
}

CliRun run(const std::string& args) {
    const std::string cmd = std::string(SATQKD_CLI_PATH) + " " + args + " 2>/dev/null";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("satqkd_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

TEST(Cli, PassCsvHasOneRowPerSecond) {
    CliRun r = run("pass --scenario " + scenario("snspd_id281_pol2"));
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t_s,elevation_deg,slant_range_km");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 331u);
}

TEST(Cli, PassJsonCarriesEnvelope) {
    CliRun r = run("pass --format json --seed 5 --scenario " + scenario("snspd_id281_pol2"));
    ASSERT_EQ(r.code, 0);
    json j = json::parse(r.out);
    EXPECT_EQ(j["command"], "pass");
    EXPECT_EQ(j["seed"], 5);
    EXPECT_EQ(j["scenario_digest"].get<std::string>().size(), 64u);
}

TEST(Cli, OutWritesSameBytesAsStdout) {
    fs::path dir = scratch("budget");
    CliRun r = run("budget --scenario " + scenario("idqube_nir_pol1") + " --out " + dir.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(slurp(dir / "budget.csv"), r.out);
    fs::remove_all(dir);
}

TEST(Cli, SklSucceedsAtScenarioParameters) {
    CliRun r = run("skl --scenario " + scenario("snspd_id281_pol2"));
    ASSERT_EQ(r.code, 0);
    json j = json::parse(r.out);
    EXPECT_FALSE(j["result"]["skl"]["aborted"].get<bool>());
    EXPECT_GT(j["result"]["skl"]["skl_bits"].get<double>(), 0.0);
}

TEST(Cli, AbortedKeyExitsThree) {
    CliRun r = run("skl --scenario " + scenario("idqube_nir_pol1"));
    EXPECT_EQ(r.code, 3);
    json j = json::parse(r.out);
    EXPECT_TRUE(j["result"]["skl"]["aborted"].get<bool>());
}

TEST(Cli, ValidationFailuresExitTwo) {
    EXPECT_EQ(run("pass --scenario /nonexistent.json").code, 2);
    EXPECT_EQ(run("pass").code, 2);
    EXPECT_EQ(run("skl --format csv --scenario " + scenario("snspd_id281_pol2")).code, 2);
    EXPECT_EQ(run("skl --mu 1.5 --scenario " + scenario("snspd_id281_pol2")).code, 2);
    EXPECT_EQ(run("pass --format xml --scenario " + scenario("snspd_id281_pol2")).code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("relay-demo --lengths 0").code, 2);

    fs::path dir = scratch("bad");
    fs::create_directories(dir);
    json doc = json::parse(slurp(scenario("snspd_id281_pol2")));
    doc["detector"]["efficiency"] = 2.0;
    std::ofstream(dir / "bad.json") << doc.dump();
    EXPECT_EQ(run("pass --scenario " + (dir / "bad.json").string()).code, 2);
    fs::remove_all(dir);
}

TEST(Cli, SweepReportsEveryElevation) {
    CliRun r = run("sweep-elevation --max-elevations 15,40 --scenario " +
                scenario("spcm_850_14_pol1"));
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line.rfind("15,0,0,", 0), 0u) << line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("40,", 0), 0u) << line;
}

TEST(Cli, McValidateWithinThreeSigma) {
    CliRun r = run("mc-validate --seeds 3 --seed 11 --scenario " + scenario("snspd_id281_pol2"));
    EXPECT_EQ(r.code, 0);
    json j = json::parse(r.out);
    EXPECT_EQ(j["result"]["runs"].size(), 3u);
    EXPECT_EQ(j["result"]["runs"][0]["seed"], 11);
    EXPECT_TRUE(j["result"]["pass"].get<bool>());
}

TEST(Cli, OptimizeWritesTrace) {
    fs::path dir = scratch("optimize");
    CliRun r = run("optimize --scenario " + scenario("spcm_850_14_pol1") + " --out " +
                dir.string());
    ASSERT_EQ(r.code, 0);
    json j = json::parse(r.out);
    EXPECT_EQ(j["result"]["trace_path"], "optimize_trace.csv");
    std::istringstream trace(slurp(dir / "optimize_trace.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(trace, line);
    while (std::getline(trace, line)) ++rows;
    EXPECT_EQ(rows, j["result"]["evaluations"].get<std::size_t>());
    fs::remove_all(dir);
}

TEST(Cli, RelayDemoRecoversKey) {
    fs::path dir = scratch("relay");
    CliRun r = run("relay-demo --seed 4 --lengths 64,1000 --out " + dir.string());
    ASSERT_EQ(r.code, 0);
    json j = json::parse(r.out);
    EXPECT_TRUE(j["scenario_digest"].is_null());
    ASSERT_EQ(j["result"]["rounds"].size(), 2u);
    for (const auto& round : j["result"]["rounds"]) {
        EXPECT_TRUE(round["recovered_equals_k_a"].get<bool>());
        EXPECT_TRUE(round["inputs_erased"].get<bool>());
        EXPECT_EQ(round["bits_consumed"], 2 * round["n_bits"].get<int>());
    }
    EXPECT_EQ(j["result"]["rounds"][1]["payload_hex"].get<std::string>().size(), 250u);
    EXPECT_EQ(slurp(dir / "relay_snapshot.bin").substr(0, 4), "SQKD");
    fs::remove_all(dir);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const std::string sc = scenario("snspd_id281_tb2");
    for (const std::string args :
         {"pass --scenario " + sc, "budget --format json --scenario " + sc,
          "skl --seed 3 --scenario " + sc, "mc-validate --seeds 2 --seed 3 --scenario " + sc,
          std::string("relay-demo --seed 3")}) {
        CliRun a = run(args);
        CliRun b = run(args);
        EXPECT_EQ(a.code, b.code) << args;
        EXPECT_EQ(a.out, b.out) << args;
        EXPECT_FALSE(a.out.empty()) << args;
    }
}

}  // namespace
