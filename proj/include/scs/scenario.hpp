#pragma once

// Scenario files: topology, device roster, waveform, PSSA and IDS settings,
// attacks, operator actions and expected outcomes. JSON on disk, times in seconds
// (latencies in microseconds); schema in docs/scenario_format.md.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scs/attacks.hpp"
#include "scs/codec.hpp"
#include "scs/devices.hpp"
#include "scs/ids.hpp"

namespace scs::scenario {

enum class Role { MU, PIED_OC, PIED_DIFF, CIED, CB, IDS, ATTACKER };
std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);
inline bool is_pied(Role r) { return r == Role::PIED_OC || r == Role::PIED_DIFF; }

struct PortSpec {
    std::string name;
    std::string sw;
    std::uint16_t port = 0;
    codec::MacAddress mac;
    bool monitor = false;
    bool operator==(const PortSpec&) const = default;
};

struct GooseSpec {
    std::string port;
    devices::GooseConfig config;
    bool operator==(const GooseSpec&) const = default;
};

// One protection function the CIED takes over; settings and subscriptions come from the PIED.
struct ReplicaSpec {
    std::string pied;
    std::string port;  // CIED port used when this function is active
    devices::GooseConfig goose;
    bool operator==(const ReplicaSpec&) const = default;
};

struct DeviceSpec {
    std::string id;
    Role role = Role::MU;
    std::vector<PortSpec> ports;
    std::vector<devices::SvStreamConfig> sv_streams;  // MU
    std::vector<std::string> subscriptions;           // svIDs (PIED) or goIDs (CB)
    std::optional<GooseSpec> goose;                   // PIED
    devices::ProtectionSettings settings;             // PIED
    double weight = 1.0;                              // PIED
    bool disableable = true;                          // PIED
    std::vector<ReplicaSpec> replicates;              // CIED

    const PortSpec* port(const std::string& name) const;
    bool operator==(const DeviceSpec&) const = default;
};

struct TrunkSpec {
    std::string a_switch;
    std::uint16_t a_port = 0;
    std::string b_switch;
    std::uint16_t b_port = 0;
    bool operator==(const TrunkSpec&) const = default;
};

// `failover` times are offsets from the first applied failover plan.
enum class Anchor { absolute, failover };

struct FaultSpec {
    devices::FaultSegment segment;
    Anchor anchor = Anchor::absolute;
    bool operator==(const FaultSpec&) const = default;
};

struct OperatorAction {
    enum class Kind { cb_close, failback };
    Kind kind = Kind::cb_close;
    std::string device;  // CB for cb_close, PIED for failback
    SimTime at = 0;
    Anchor anchor = Anchor::absolute;
    bool operator==(const OperatorAction&) const = default;
};

// A PIED self-reporting a fault (not an attack).
struct DeviceFailure {
    std::string pied;
    SimTime at = 0;
    std::string diagnostic;
    bool operator==(const DeviceFailure&) const = default;
};

struct Assertions {
    std::optional<double> objective;
    std::optional<std::uint64_t> alerts_min;
    std::optional<std::uint64_t> alerts_max;
    std::optional<std::vector<std::string>> banners;  // protocols, in order ("SV", "GOOSE")
    std::map<std::string, std::string> cb_position;   // CB -> "open" / "closed"
    std::map<std::string, std::string> cb_tripped_by; // CB -> goID
    std::vector<std::string> isolated;                // PIEDs with every port disabled
    std::vector<std::string> cied_active;             // PIEDs whose function the CIED has taken over
    std::optional<bool> attacker_drop_rule;
    std::optional<bool> attacker_isolated;  // no attacker frame reaches a protection device after mitigation
    std::optional<bool> cied_goose_in_capture;

    bool operator==(const Assertions&) const = default;
};

struct IdsSpec {
    bool enabled = true;
    ids::RuleConfig rules;
    bool operator==(const IdsSpec&) const = default;
};

struct Scenario {
    std::string name;
    std::string description;
    SimTime duration = 10 * kSecond;
    std::uint64_t seed = 1;
    std::uint32_t sample_rate = devices::kDefaultSampleRate;
    double frequency_hz = devices::kDefaultFrequency;
    SimTime latency_min = 20 * kMicrosecond;
    SimTime latency_max = 80 * kMicrosecond;
    SimTime control_latency = 200 * kMicrosecond;
    std::vector<std::string> switches;
    std::vector<TrunkSpec> trunks;
    std::vector<DeviceSpec> devices;
    double voltage_rms_v = 38'105.0;
    std::vector<devices::MagnitudeStep> schedule{{0, 1000.0}};
    std::vector<FaultSpec> faults;
    double gamma = 5.0;
    IdsSpec ids;
    std::vector<attacks::AttackSpec> attacks;
    std::vector<OperatorAction> operator_actions;
    std::vector<DeviceFailure> device_failures;
    Assertions assertions;

    const DeviceSpec* device(const std::string& id) const;
    std::vector<const DeviceSpec*> with_role(Role r) const;
    // PIEDs in declaration order; this is the PSSA index order.
    std::vector<const DeviceSpec*> pieds() const;
    // Waveform with the absolute-anchored faults only.
    devices::WaveformSource waveform() const;

    bool operator==(const Scenario&) const = default;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

// Parse errors and semantic problems both surface as ValidationError.
Scenario from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
Scenario load_file(const std::string& path);
Scenario parse(std::string_view text);

// Referential integrity and value ranges; throws ValidationError listing every problem.
void validate(const Scenario& s);

}  // namespace scs::scenario
