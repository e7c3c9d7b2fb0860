#include "mscr/cli.hpp"
#include "mscr/config.hpp"
#include "mscr/manifest.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace mscr;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mscr");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("mscr_cli_" + name);
    fs::remove_all(d);
    return d;
}

const std::string kData = MSCR_DATA_DIR;

}  // namespace

TEST(Config, RejectsUnknownKey) {
    config::Json doc = {{"robot", {{"preset", "mscr1"}, {"lenght", 0.02}}}};
    try {
        config::validate(doc);
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("robot.lenght"), std::string::npos);
    }
    EXPECT_THROW(config::validate({{"sim", {{"dt", "fast"}}}}), ConfigError);
}

TEST(Config, Overrides) {
    config::Json doc = {{"magnet", {{"height", 0.18}}}};
    config::apply_override(doc, "magnet.height=0.2");
    config::apply_override(doc, "controller.variant=pd");
    EXPECT_EQ(doc["magnet"]["height"], 0.2);
    EXPECT_EQ(doc["controller"]["variant"], "pd");
    EXPECT_NO_THROW(config::validate(doc));
    EXPECT_THROW(config::apply_override(doc, "novalue"), ConfigError);
}

TEST(Config, EffectiveHashTracksOverrides) {
    auto a = config::load(fs::path(kData) / "scenarios/feasibility.json");
    auto b = config::load(fs::path(kData) / "scenarios/feasibility.json", {"magnet.height=0.2"});
    EXPECT_EQ(a.input_sha256, b.input_sha256);
    EXPECT_NE(a.effective_sha256(), b.effective_sha256());
}

TEST(Manifest, Sha256KnownVector) {
    EXPECT_EQ(manifest::sha256_hex("abc"),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, FeasibilityReportsThreshold) {
    auto out = scratch("feas");
    testing::internal::CaptureStdout();
    int rc = run_cli({"feasibility", "--config", kData + "/scenarios/feasibility.json", "--out", out.string()});
    std::string text = testing::internal::GetCapturedStdout();
    EXPECT_EQ(rc, 0);
    EXPECT_NE(text.find("distance threshold: 0.1424"), std::string::npos) << text;
    EXPECT_TRUE(fs::exists(out / "feasibility.csv"));

    auto m = manifest::read_manifest(out / "manifest.json");
    EXPECT_EQ(m.command, "feasibility");
    EXPECT_EQ(m.config_sha256, manifest::sha256_file(kData + "/scenarios/feasibility.json"));
    fs::remove_all(out);
}

TEST(Cli, EmptySweepGridIsConfigError) {
    auto out = scratch("sweep");
    testing::internal::CaptureStderr();
    int rc = run_cli({"sweep", "--config", kData + "/scenarios/sweep.json", "--set", "sweep.psi=[]",
                      "--out", out.string()});
    testing::internal::GetCapturedStderr();
    EXPECT_EQ(rc, 2);
    EXPECT_FALSE(fs::exists(out / "manifest.json"));
    fs::remove_all(out);
}

TEST(Cli, UnknownKeyAndSubcommandExitTwo) {
    testing::internal::CaptureStderr();
    EXPECT_EQ(run_cli({"feasibility", "--set", "magnet.hieght=0.2", "--out", scratch("bad").string()}), 2);
    EXPECT_EQ(run_cli({"no-such-command"}), 2);
    testing::internal::GetCapturedStderr();
}

TEST(Cli, RuntimeErrorExitOne) {
    // Magnet inside the distance bound: the closed loop refuses to start.
    auto out = scratch("close");
    testing::internal::CaptureStderr();
    int rc = run_cli({"simulate", "--config", kData + "/scenarios/reachable_step_qsc.json", "--set",
                      "magnet.height=0.05", "--out", out.string()});
    testing::internal::GetCapturedStderr();
    EXPECT_EQ(rc, 1);
    EXPECT_FALSE(fs::exists(out / "manifest.json"));
    fs::remove_all(out);
}

TEST(Cli, SimulateIsDeterministic) {
    auto a = scratch("sim_a"), b = scratch("sim_b");
    std::vector<std::string> common{"simulate", "--config",
                                    kData + "/scenarios/cosine_disturbed_qsc.json", "--set",
                                    "sim.duration=3", "--seed", "5"};
    testing::internal::CaptureStdout();
    auto args_a = common, args_b = common;
    args_a.insert(args_a.end(), {"--out", a.string()});
    args_b.insert(args_b.end(), {"--out", b.string()});
    EXPECT_EQ(run_cli(args_a), 0);
    EXPECT_EQ(run_cli(args_b), 0);
    testing::internal::GetCapturedStdout();
    std::string ta = slurp(a / "trace.csv");
    EXPECT_FALSE(ta.empty());
    EXPECT_EQ(ta, slurp(b / "trace.csv"));
    EXPECT_EQ(ta.substr(0, ta.find('\n')), "t,y_r,y_r_tracked,theta_L,x1_hat,x2_hat,u,psi");
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, SweepWritesTables) {
    auto out = scratch("sweep_ok");
    testing::internal::CaptureStdout();
    int rc = run_cli({"sweep", "--set", "sweep.psi_points=24", "--set", "sweep.heights=[0.2]",
                      "--out", out.string()});
    testing::internal::GetCapturedStdout();
    ASSERT_EQ(rc, 0);
    std::string t = slurp(out / "sweep_H0.2000.csv");
    EXPECT_EQ(t.substr(0, t.find('\n')), "psi_rad,theta_L_rad,iterations");
    fs::remove_all(out);
}
