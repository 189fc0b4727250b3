#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spatlog/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = SPATLOG_CLI;
const fs::path kConfigs = SPATLOG_CONFIGS;

// one fresh directory per test, so ctest may run them in parallel
fs::path workdir() {
    static std::string current;
    const std::string name = ::testing::UnitTest::GetInstance()->current_test_info()->name();
    const auto d = fs::temp_directory_path() / "spatlog_cli_tests" / name;
    if (current != name) {
        current = name;
        fs::remove_all(d);
        fs::create_directories(d);
    }
    return d;
}

int cli(const std::string& args) {
    const std::string cmd = kCli.string() + " " + args + " > /dev/null 2> " + (workdir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read(p)); }

std::string out(const std::string& name) { return "--out " + (workdir() / name).string(); }

}  // namespace

TEST(Cli, VerifyOnDefaultFixtureExitsZero) {
    ASSERT_EQ(cli("verify --config " + (kConfigs / "verify.json").string() + " " + out("v")), 0) << read(workdir() / "stderr.txt");
    const auto dir = workdir() / "v" / "verify" / "fixture";
    const auto rep = read_json(dir / "report.json");
    EXPECT_TRUE(rep["all_pass"].get<bool>());
    const auto man = read_json(dir / "manifest.json");
    EXPECT_EQ(man["inputs_sha256"].get<std::string>().size(), 64u);
    EXPECT_EQ(man["exit_code"], 0);
    EXPECT_TRUE(man.contains("wall_time_s"));
    EXPECT_TRUE(man["versions"].contains("eigen"));
    EXPECT_TRUE(fs::exists(dir / "resolved_config.json"));
}

TEST(Cli, VerificationFailureExitsTwo) {
    EXPECT_EQ(cli("verify --config " + (kConfigs / "verify.json").string() + " " + out("vf") +
                  " --override model.a_plus.height=0.6 --override verify.alpha_high=1"),
              2);
}

TEST(Cli, SimulateIsByteIdenticalUnderTheSameSeed) {
    const auto cfg = (kConfigs / "simulate.json").string();
    ASSERT_EQ(cli("simulate --config " + cfg + " " + out("s1") + " --seed 99 --replicas 4"), 0);
    ASSERT_EQ(cli("simulate --config " + cfg + " " + out("s2") + " --seed 99 --replicas 4"), 0);
    ASSERT_EQ(cli("simulate --config " + cfg + " " + out("s3") + " --seed 100 --replicas 4"), 0);
    const auto a = workdir() / "s1/simulate/competition/snapshots";
    const auto b = workdir() / "s2/simulate/competition/snapshots";
    const auto c = workdir() / "s3/simulate/competition/snapshots";
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        EXPECT_EQ(read(e.path()), read(b / e.path().filename()));
    }
    EXPECT_EQ(files, 4);
    EXPECT_NE(read(a / "replica_00000.csv"), read(c / "replica_00000.csv"));
    EXPECT_EQ(read_json(workdir() / "s1/simulate/competition/manifest.json")["seed"], 99);
}

TEST(Cli, RunIsReproducibleFromResolvedConfig) {
    ASSERT_EQ(cli("simulate --config " + (kConfigs / "simulate.json").string() + " " + out("r1") + " --replicas 2"), 0);
    const auto resolved = workdir() / "r1/simulate/competition/resolved_config.json";
    ASSERT_EQ(cli("simulate --config " + resolved.string() + " " + out("r2")), 0);
    EXPECT_EQ(read(workdir() / "r1/simulate/competition/snapshots/replica_00001.csv"),
              read(workdir() / "r2/simulate/competition/snapshots/replica_00001.csv"));
}

TEST(Cli, KineticLogisticFixtureMeetsTolerance) {
    ASSERT_EQ(cli("kinetic --config " + (kConfigs / "kinetic_logistic.json").string() + " " + out("k") + " --plots"), 0);
    const auto dir = workdir() / "k/kinetic/logistic";
    const auto s = read_json(dir / "summary.json");
    EXPECT_LE(s["max_abs_error"].get<double>(), 1e-6);
    EXPECT_NEAR(s["final_mean_density"].get<double>(), 0.211637, 1e-6);
    EXPECT_TRUE(fs::exists(dir / "density.svg"));
    EXPECT_EQ(read(dir / "rho.csv").rfind("t,x,rho\n", 0), 0u);
}

TEST(Cli, ValidationErrorsExitOneWithFieldNames) {
    EXPECT_EQ(cli("simulate --config " + (kConfigs / "simulate.json").string() + " " + out("bad") +
                  " --override model.m=-1 --override model.a_minus.radius=60"),
              1);
    const auto err = read(workdir() / "stderr.txt");
    EXPECT_NE(err.find("model.m"), std::string::npos) << err;
    EXPECT_NE(err.find("minimum-image"), std::string::npos) << err;
    EXPECT_FALSE(fs::exists(workdir() / "bad"));  // nothing computed or written

    EXPECT_EQ(cli("hierarchy --config " + (kConfigs / "simulate.json").string() + " " + out("bad")), 1);
    EXPECT_EQ(cli("simulate --config /nonexistent.json"), 1);
    EXPECT_EQ(cli("frobnicate"), 1);
}

TEST(Cli, DivergenceExitsThree) {
    EXPECT_EQ(cli("kinetic --config " + (kConfigs / "kinetic_logistic.json").string() + " " + out("div") +
                  " --override 'model.a_minus={\"shape\":\"zero\"}' --override model.a_plus.height=20"
                  " --override kin.t_max=5"),
              3);
    const auto dir = workdir() / "div/kinetic/logistic";
    EXPECT_EQ(read_json(dir / "manifest.json")["exit_code"], 3);
    EXPECT_GT(read_json(dir / "error.json")["time"].get<double>(), 0.0);
}

TEST(Cli, EstimateFromSnapshotCsvMatchesInMemoryEstimate) {
    const auto cfg = (kConfigs / "estimate.json").string();
    ASSERT_EQ(cli("estimate --config " + cfg + " " + out("e1") + " --replicas 8"), 0);
    ASSERT_EQ(cli("simulate --config " + cfg + " " + out("e2") + " --replicas 8"), 0);
    std::string inputs = "[";
    for (int r = 0; r < 8; ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "replica_%05d.csv", r);
        inputs += std::string(r ? "," : "") + "\"" + (workdir() / "e2/simulate/contact/snapshots" / name).string() + "\"";
    }
    inputs += "]";
    ASSERT_EQ(cli("estimate --config " + cfg + " " + out("e3") + " --override 'est.input=" + inputs + "'"), 0)
        << read(workdir() / "stderr.txt");
    const auto a = read_json(workdir() / "e1/estimate/contact/summary.json")["estimates"];
    const auto b = read_json(workdir() / "e3/estimate/contact/summary.json")["estimates"];
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i]["k1"], b[i]["k1"]);
        EXPECT_EQ(a[i]["cluster_index"], b[i]["cluster_index"]);
    }
    EXPECT_EQ(read(workdir() / "e1/estimate/contact/k2_t10.csv"), read(workdir() / "e3/estimate/contact/k2_t10.csv"));
    EXPECT_EQ(read(workdir() / "e1/estimate/contact/k2_t10.csv").rfind("r_lo,r_hi,k2,stderr\n", 0), 0u);
}

TEST(Cli, HierarchyWritesSeries) {
    ASSERT_EQ(cli("hierarchy --config " + (kConfigs / "hierarchy.json").string() + " " + out("h")), 0);
    const auto dir = workdir() / "h/hierarchy/weak_long_range";
    EXPECT_EQ(read(dir / "u.csv").rfind("t,u\n", 0), 0u);
    EXPECT_EQ(read(dir / "w.csv").rfind("t,r,w\n", 0), 0u);
    const auto m = read_json(dir / "metadata.json");
    EXPECT_EQ(m["closure"], "kirkwood");
    EXPECT_GT(m["final"]["u"].get<double>(), 0.0);
}

TEST(Cli, LabelledRerunReplacesOnlyItsOwnDirectory) {
    const auto cfg = (kConfigs / "kinetic_logistic.json").string();
    ASSERT_EQ(cli("kinetic --config " + cfg + " " + out("lab")), 0);
    const auto dir = workdir() / "lab/kinetic/logistic";
    std::ofstream(dir / "stale.txt") << "x";
    ASSERT_EQ(cli("kinetic --config " + cfg + " " + out("lab")), 0);
    EXPECT_FALSE(fs::exists(dir / "stale.txt"));

    fs::create_directories(workdir() / "lab2/kinetic/logistic");
    std::ofstream(workdir() / "lab2/kinetic/logistic/precious.txt") << "x";
    EXPECT_EQ(cli("kinetic --config " + cfg + " " + out("lab2")), 1);
    EXPECT_TRUE(fs::exists(workdir() / "lab2/kinetic/logistic/precious.txt"));
}
