#pragma once

// Attack injector hosts: forged SV, spoofed GOOSE, verbatim replay and malformed
// frames. Attackers sniff the flooded traffic on their port to stay in step with
// the victim stream (smpCnt for SV, stNum for GOOSE).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scs/codec.hpp"
#include "scs/devices.hpp"
#include "scs/event_log.hpp"
#include "scs/fabric.hpp"

namespace scs::attacks {

enum class AttackKind { sv_inject, goose_spoof, replay, malformed };
enum class StStrategy { increment, rollback, jump };

std::string_view to_string(AttackKind k);
std::optional<AttackKind> parse_attack_kind(std::string_view s);
std::string_view to_string(StStrategy s);
std::optional<StStrategy> parse_st_strategy(std::string_view s);

struct AttackSpec {
    AttackKind kind = AttackKind::sv_inject;
    std::string attacker;  // device id of the attacker host
    std::string port;      // attacker port name
    SimTime start = 0;
    std::optional<SimTime> end;
    std::string target;       // victim svID / goID (unused for malformed)
    double magnitude = 10.0;  // forged current as a multiple of nominal (sv_inject)
    StStrategy st_strategy = StStrategy::increment;
    std::uint32_t st_jump = 100;
    SimTime interval = 250 * kMillisecond;  // repetition for goose_spoof / replay / malformed
    bool stealth = false;                   // forge the victim's source MAC
    SimTime reaction = 10 * kMicrosecond;   // sv_inject delay after sniffing a victim sample

    bool operator==(const AttackSpec&) const = default;
};

struct AttackTarget {
    std::optional<devices::GooseConfig> goose;
    std::optional<devices::SvStreamConfig> sv;
    codec::MacAddress victim_mac;
};

class AttackerHost : public fabric::Endpoint {
public:
    AttackerHost(std::string id, fabric::Scheduler& scheduler, fabric::Fabric& fabric, EventLog& log,
                 std::uint32_t sample_rate, double frequency_hz, double nominal_a);

    void add_attack(AttackSpec spec, fabric::HostPortHandle port, AttackTarget target);
    void start();
    void on_frame(const fabric::Delivery& delivery) override;

    // Frame ids this host put on the wire, in order.
    const std::vector<std::uint64_t>& sent() const { return sent_; }
    const std::string& id() const { return id_; }

private:
    struct Active {
        AttackSpec spec;
        fabric::HostPortHandle port;
        AttackTarget target;
        std::optional<std::uint32_t> victim_st;
        fabric::FramePtr captured;
        std::uint32_t sq = 0;
        std::uint32_t st = 0;
        bool announced = false;
    };

    bool live(const Active& a) const;
    void announce(Active& a);
    void repeat(std::size_t index);
    void emit_spoof(Active& a, bool first);
    void emit_malformed(Active& a);
    codec::MacAddress source_mac(const Active& a) const;
    void send(const Active& a, fabric::FramePtr frame);

    std::string id_;
    fabric::Scheduler& scheduler_;
    fabric::Fabric& fabric_;
    EventLog& log_;
    std::uint32_t rate_;
    double frequency_hz_;
    double nominal_a_;
    std::vector<Active> attacks_;
    std::vector<std::uint64_t> sent_;
};

}  // namespace scs::attacks
