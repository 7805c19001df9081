#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(SCS_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string scenario(const std::string& name) { return std::string(SCS_SCENARIO_DIR) + "/" + name + ".json"; }

}  // namespace

TEST_CASE("pssa prints the decision table") {
    const auto r = run("pssa --weights 10,15 --gamma 5 --attacks 1,0");
    CHECK(r.code == 0);
    CHECK(r.out.find("objective 16") != std::string::npos);
    CHECK(run("pssa --weights 10,15 --gamma 5 --attacks 01").out.find("objective 21") != std::string::npos);
    CHECK(run("pssa --weights 10,15 --gamma 5 --attacks 00").out.find("objective 0") != std::string::npos);
    // A PIED that must stay up is not disabled, so only gamma and the redirect count.
    CHECK(run("pssa --weights 10,15 --gamma 5 --attacks 10 --fixed 10").out.find("objective 6") != std::string::npos);
}

TEST_CASE("bad input exits with code 2") {
    CHECK(run("pssa --weights 10,x --gamma 5 --attacks 1,0").code == 2);
    CHECK(run("pssa --weights 10,15 --gamma 5 --attacks 1").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("run --scenario /nonexistent.json --out /tmp/x").code == 2);

    const auto bad = fs::temp_directory_path() / "scs_cli_bad.json";
    std::ifstream in(scenario("no_attack"));
    auto j = nlohmann::json::parse(in);
    j["duration_s"] = -1;
    std::ofstream(bad) << j.dump();
    const auto r = run("validate " + bad.string());
    CHECK(r.code == 2);
    CHECK(r.out.find("duration_s must be positive") != std::string::npos);
    fs::remove(bad);
}

TEST_CASE("validate accepts every bundled scenario") {
    for (const char* name : {"no_attack", "sv_attack", "sv_attack_fault", "goose_attack", "replay", "malformed"}) {
        CAPTURE(name);
        const auto r = run("validate " + scenario(name));
        CHECK(r.code == 0);
        CHECK(r.out.find(": ok") != std::string::npos);
    }
}

TEST_CASE("run prints the banner, writes outputs and reports assertions") {
    const auto dir = fs::temp_directory_path() / "scs_cli_run";
    fs::remove_all(dir);
    const auto r = run("run --scenario " + scenario("sv_attack") + " --out " + dir.string() + " --duration 4");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("****** HIGH ALERT: SV Cyber-Attack Detected! Switching to CIED *****\n", 0) == 0);
    CHECK(r.out.find("assertion objective: PASS") != std::string::npos);
    for (const char* f : {"events.jsonl", "process_bus.pcap", "station_bus.pcap", "merged.pcap", "summary.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / f));
    }
    std::ifstream summary(dir / "summary.json");
    const auto j = nlohmann::json::parse(summary);
    CHECK(j["objective"] == 16.0);

    // Without the IDS the forged samples trip the breaker and the assertions fail.
    const auto off = run("run --scenario " + scenario("sv_attack") + " --out " + dir.string() + " --duration 4 --no-ids");
    CHECK(off.code == 1);
    CHECK(off.out.rfind("******", 0) == std::string::npos);
    CHECK(off.out.find("assertion banners: FAIL") != std::string::npos);
    fs::remove_all(dir);
}
