#pragma once

// Builds a complete substation from a scenario and runs it: fabric, devices, IDS,
// APC and attackers, plus the measurements the summary and assertions are made of.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scs/apc.hpp"
#include "scs/attacks.hpp"
#include "scs/event_log.hpp"
#include "scs/fabric.hpp"
#include "scs/hosts.hpp"
#include "scs/ids.hpp"
#include "scs/scenario.hpp"

namespace scs::sim {

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<bool> ids_enabled;  // overrides the scenario's ids.enabled
    std::optional<SimTime> duration;
    std::vector<std::pair<std::string, SimTime>> failbacks;  // PIED, absolute time
    bool capture = true;
    LogLevel log_level = LogLevel::info;
    bool record_ids_observations = false;
    std::function<void(const std::string&)> console;  // receives banners as they are applied
};

struct AssertionResult {
    std::string name;
    bool pass = false;
    std::string expected;
    std::string actual;
};

class Simulation {
public:
    // Validates the scenario (throws scenario::ValidationError) and wires everything up.
    explicit Simulation(scenario::Scenario scenario, RunOptions options = {});
    ~Simulation();
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    void run();
    bool finished() const { return finished_; }

    const scenario::Scenario& scenario() const { return scenario_; }
    SimTime duration() const { return duration_; }
    const EventLog& log() const { return log_; }
    const fabric::Fabric& fabric() const { return fabric_; }
    const fabric::Scheduler& scheduler() const { return scheduler_; }
    const apc::Controller& apc() const { return *apc_; }
    const ids::IdsHost* ids() const { return ids_.get(); }
    const hosts::ProtectionHost& protection(const std::string& id) const;
    const hosts::BreakerHost& breaker(const std::string& id) const;
    const attacks::AttackerHost* attacker(const std::string& id) const;

    fabric::PortId port(const std::string& device, const std::string& port_name) const;
    bool port_enabled(const std::string& device, const std::string& port_name) const;

    // Time the first failover plan took effect.
    std::optional<SimTime> failover_time() const { return failover_time_; }
    // Time the first plan carrying an attacker drop rule took effect.
    std::optional<SimTime> mitigation_time() const;
    // Attacker-originated frames delivered to a PIED, CIED or CB port after entering
    // the fabric once mitigation was in place.
    std::uint64_t attacker_frames_after_mitigation() const;
    bool attacker_drop_rule_installed() const;
    // Frames in the merged capture that carry a CIED goID from a CIED port.
    std::uint64_t cied_goose_frames_captured() const;
    // Ids of frames sent by attacker hosts, in send order.
    std::vector<std::uint64_t> attacker_frames() const;

    std::vector<AssertionResult> check_assertions() const;
    nlohmann::json summary() const;

    // events.jsonl, <switch>.pcap per switch, merged.pcap, summary.json.
    void write_outputs(const std::string& dir) const;

private:
    void build_topology();
    void build_devices();
    void build_ids();
    void build_apc();
    void build_attacks();
    void schedule_actions();
    void note_plan(const apc::MitigationPlan& plan);
    void on_failover(SimTime at);

    scenario::Scenario scenario_;
    RunOptions options_;
    SimTime duration_;
    EventLog log_;
    fabric::Scheduler scheduler_;
    fabric::Fabric fabric_;
    devices::WaveformSource waveform_;

    std::unique_ptr<hosts::MergingUnitHost> mu_;
    std::map<std::string, std::unique_ptr<hosts::ProtectionHost>> protection_;
    std::map<std::string, std::unique_ptr<hosts::BreakerHost>> breakers_;
    std::map<std::string, std::unique_ptr<attacks::AttackerHost>> attackers_;
    std::unique_ptr<ids::IdsHost> ids_;
    std::unique_ptr<apc::Controller> apc_;
    std::map<std::string, fabric::HostPortHandle> handles_;  // "device/port" -> handle
    std::map<fabric::HostId, scenario::Role> roles_;

    std::optional<SimTime> failover_time_;
    bool finished_ = false;
};

}  // namespace scs::sim
