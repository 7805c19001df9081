// scs: run substation scenarios, evaluate PSSA instances, validate scenario files.
//
// Exit codes: 0 success, 1 scenario assertion failed, 2 invalid input.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scs/event_log.hpp"
#include "scs/pssa.hpp"
#include "scs/scenario.hpp"
#include "scs/simulation.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kAssertionFailed = 1;
constexpr int kInvalid = 2;

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep)) out.push_back(item);
    return out;
}

std::vector<double> parse_weights(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad weight '" + item + "'");
        out.push_back(v);
    }
    return out;
}

// "1,0,1" or "101".
std::vector<bool> parse_bits(const std::string& text) {
    std::vector<bool> out;
    for (char c : text) {
        if (c == ',' || c == ' ') continue;
        if (c != '0' && c != '1') throw std::invalid_argument("bad bit string '" + text + "'");
        out.push_back(c == '1');
    }
    return out;
}

scs::LogLevel env_log_level() {
    const char* text = std::getenv("SCS_LOG_LEVEL");
    if (!text || !*text) return scs::LogLevel::info;
    if (auto level = scs::parse_log_level(text)) return *level;
    throw std::invalid_argument(std::string("SCS_LOG_LEVEL must be error, warn, info or debug, got '") + text + "'");
}

int run_pssa(const std::string& weights, double gamma, const std::string& attacks, const std::string& fixed) {
    scs::pssa::Instance inst;
    inst.weights = parse_weights(weights);
    inst.gamma = gamma;
    inst.attacks = parse_bits(attacks);
    if (fixed.empty()) {
        inst.disableable.assign(inst.weights.size(), true);
    } else {
        for (bool f : parse_bits(fixed)) inst.disableable.push_back(!f);
    }
    const auto solution = scs::pssa::solve(inst);
    std::cout << scs::pssa::format_table(inst, solution);
    return kOk;
}

int run_validate(const std::string& path) {
    const auto s = scs::scenario::load_file(path);
    scs::scenario::validate(s);
    std::cout << path << ": ok (" << s.devices.size() << " devices, " << s.attacks.size() << " attacks)\n";
    return kOk;
}

struct RunArgs {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool no_ids = false;
    std::optional<double> duration_s;
    std::vector<std::string> failbacks;
};

int run_scenario(const RunArgs& args) {
    auto scenario = scs::scenario::load_file(args.scenario);
    scs::sim::RunOptions options;
    options.seed = args.seed;
    if (args.no_ids) options.ids_enabled = false;
    if (args.duration_s) options.duration = scs::seconds_to_time(*args.duration_s);
    for (const auto& fb : args.failbacks) {
        const auto colon = fb.rfind(':');
        if (colon == std::string::npos) throw scs::scenario::ValidationError({"--failback expects PIED:seconds, got " + fb});
        options.failbacks.emplace_back(fb.substr(0, colon), scs::seconds_to_time(std::stod(fb.substr(colon + 1))));
    }
    options.log_level = env_log_level();
    options.console = [](const std::string& banner) { std::cout << banner << '\n' << std::flush; };

    for (const auto& [pied, at] : options.failbacks) {
        const auto* d = scenario.device(pied);
        if (!d || !scs::scenario::is_pied(d->role)) {
            throw scs::scenario::ValidationError({"--failback names unknown PIED '" + pied + "'"});
        }
        (void)at;
    }

    scs::sim::Simulation sim(std::move(scenario), options);
    sim.run();
    sim.write_outputs(args.out);

    const auto summary = sim.summary();
    std::cout << "scenario " << summary["scenario"].get<std::string>() << ": objective "
              << summary["objective"].dump() << ", alerts " << summary["alerts"].size() << ", plans "
              << summary["plans"].size() << '\n';
    for (const auto& [cb, state] : summary["breakers"].items()) {
        std::cout << "  " << cb << " " << state["position"].get<std::string>() << '\n';
    }
    bool pass = true;
    for (const auto& r : sim.check_assertions()) {
        pass = pass && r.pass;
        std::cout << "  assertion " << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (expected " << r.expected
                  << ", got " << r.actual << ")\n";
    }
    std::cout << "outputs written to " << args.out << '\n';
    return pass ? kOk : kAssertionFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smart cyber switching substation simulator"};
    app.require_subcommand(1);

    RunArgs run_args;
    std::uint64_t seed = 0;
    double duration = 0;
    auto* run = app.add_subcommand("run", "Run a scenario and write logs, captures and a summary");
    run->add_option("--scenario", run_args.scenario, "Scenario JSON file")->required();
    run->add_option("--out", run_args.out, "Output directory")->required();
    auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
    run->add_flag("--no-ids", run_args.no_ids, "Run with the IDS disabled");
    auto* duration_opt = run->add_option("--duration", duration, "Override the duration (virtual seconds)");
    run->add_option("--failback", run_args.failbacks, "Return a PIED to service at a time, PIED:seconds (repeatable)");

    std::string weights, attacks, fixed;
    double gamma = 0;
    auto* pssa = app.add_subcommand("pssa", "Solve one PSSA instance and print the decision table");
    pssa->add_option("--weights", weights, "PIED weights, comma separated")->required();
    pssa->add_option("--gamma", gamma, "Weight of enabling the CIED")->required();
    pssa->add_option("--attacks", attacks, "Attack bits per PIED, e.g. 1,0")->required();
    pssa->add_option("--fixed", fixed, "Bits marking PIEDs that must stay enabled");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    validate->add_option("file", validate_path, "Scenario JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*run) {
            if (*seed_opt) run_args.seed = seed;
            if (*duration_opt) run_args.duration_s = duration;
            return run_scenario(run_args);
        }
        if (*pssa) return run_pssa(weights, gamma, attacks, fixed);
        if (*validate) return run_validate(validate_path);
    } catch (const scs::scenario::ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
    return kInvalid;
}
