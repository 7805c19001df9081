#pragma once

// Virtual substation LAN: a deterministic discrete-event scheduler, SDN-style
// switches with priority-ordered flow tables, host attachments and trunks.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scs/codec.hpp"
#include "scs/event_log.hpp"
#include "scs/pcap.hpp"

namespace scs::fabric {

using FramePtr = std::shared_ptr<const codec::Bytes>;

class Scheduler {
public:
    using Action = std::function<void()>;

    SimTime now() const { return now_; }
    void at(SimTime time, Action action);
    void after(SimTime delay, Action action) { at(now_ + delay, std::move(action)); }

    // Runs every event with time <= end in strict (time, seq) order.
    void run_until(SimTime end);
    std::uint64_t processed() const { return processed_; }
    bool empty() const { return heap_.empty(); }

private:
    struct Entry {
        SimTime time;
        std::uint64_t seq;
        Action action;
    };
    static bool later(const Entry& a, const Entry& b) {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }

    std::vector<Entry> heap_;
    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t processed_ = 0;
};

struct PortId {
    std::uint16_t sw = 0;
    std::uint16_t index = 0;

    auto operator<=>(const PortId&) const = default;
};

enum class AdminState { enabled, disabled };

struct FlowMatch {
    std::optional<std::uint16_t> ingress_port;
    std::optional<codec::MacAddress> src_mac;
    std::optional<codec::MacAddress> dst_mac;
    std::optional<std::uint16_t> ethertype;
    std::optional<std::uint16_t> appid;

    bool matches(std::uint16_t ingress, const codec::HeaderView& header) const;
    bool operator==(const FlowMatch&) const = default;
};

enum class PrimaryAction { forward, flood, drop };

// `mirror`, when set, sends a byte-identical copy to that port in addition to the primary action.
struct FlowAction {
    PrimaryAction primary = PrimaryAction::flood;
    std::vector<std::uint16_t> out_ports;
    std::optional<std::uint16_t> mirror;

    bool operator==(const FlowAction&) const = default;
};

struct FlowRule {
    std::uint16_t priority = 0;
    FlowMatch match;
    FlowAction action;
    std::uint64_t cookie = 0;

    bool operator==(const FlowRule&) const = default;
};

// Rules kept sorted by (priority desc, cookie asc); the first match is the unique winner.
class FlowTable {
public:
    bool insert(FlowRule rule);
    bool remove(std::uint64_t cookie);
    bool contains(std::uint64_t cookie) const;
    const FlowRule* match(std::uint16_t ingress, const codec::HeaderView& header) const;
    const std::vector<FlowRule>& rules() const { return rules_; }

    bool operator==(const FlowTable&) const = default;

private:
    std::vector<FlowRule> rules_;
};

// nullptr means no rule matched and the default flood-except-ingress applies.
const FlowRule* match_frame(const FlowTable& table, PortId ingress, codec::ByteView frame);

nlohmann::json to_json(const FlowRule& rule);

struct LatencyConfig {
    SimTime min = 20 * kMicrosecond;
    SimTime max = 80 * kMicrosecond;
};

using HostId = std::size_t;
using HostPortHandle = std::size_t;

struct Delivery {
    SimTime time = 0;
    FramePtr frame;
    std::uint64_t frame_id = 0;
    HostPortHandle port = 0;
    bool mirrored = false;
    PortId switch_ingress;  // where the frame entered the delivering switch
};

class Endpoint {
public:
    virtual ~Endpoint() = default;
    virtual void on_frame(const Delivery& delivery) = 0;
};

struct TraceEntry {
    SimTime time = 0;
    SimTime entered = 0;  // when the frame first reached a switch
    std::uint64_t frame_id = 0;
    HostId origin = 0;
    HostId receiver = 0;
    HostPortHandle receiver_port = 0;
    bool mirrored = false;
};

class Fabric {
public:
    Fabric(Scheduler& scheduler, EventLog& log, LatencyConfig latency, std::uint64_t seed);

    std::uint16_t add_switch(const std::string& name);
    void add_port(PortId port, bool monitor = false);
    void add_trunk(PortId a, PortId b);
    HostId add_host(const std::string& name, Endpoint* endpoint);
    HostPortHandle attach(HostId host, const std::string& port_name, PortId port, codec::MacAddress mac);

    // Host transmit: the frame reaches its switch port after one link latency.
    std::uint64_t transmit(HostPortHandle from, FramePtr frame);
    void submit_frame(PortId ingress, FramePtr frame, SimTime at);

    bool install_rule(std::uint16_t sw, FlowRule rule);
    void remove_rule(std::uint16_t sw, std::uint64_t cookie);
    void set_port_state(PortId port, AdminState state);

    AdminState port_state(PortId port) const;
    bool has_port(PortId port) const;
    bool is_monitor(PortId port) const;
    const FlowTable& table(std::uint16_t sw) const;
    std::uint16_t switch_count() const { return static_cast<std::uint16_t>(switches_.size()); }
    std::optional<std::uint16_t> find_switch(const std::string& name) const;
    const std::string& switch_name(std::uint16_t sw) const;
    std::vector<std::uint16_t> port_indices(std::uint16_t sw) const;
    std::optional<PortId> trunk_peer(PortId port) const;

    const std::string& host_name(HostId host) const { return hosts_.at(host).name; }
    std::optional<HostId> find_host(const std::string& name) const;
    HostId owner(HostPortHandle handle) const { return host_ports_.at(handle).host; }
    const std::string& port_name(HostPortHandle handle) const { return host_ports_.at(handle).name; }
    PortId port_of(HostPortHandle handle) const { return host_ports_.at(handle).port; }
    codec::MacAddress mac_of(HostPortHandle handle) const { return host_ports_.at(handle).mac; }
    std::optional<HostPortHandle> find_host_port(HostId host, const std::string& port_name) const;
    std::optional<HostPortHandle> host_port_at(PortId port) const;

    nlohmann::json port_json(PortId port) const;

    void set_capture(bool enabled) { capture_enabled_ = enabled; }
    const std::vector<pcap::CaptureRecord>& capture(std::uint16_t sw) const { return switches_.at(sw).capture; }
    std::vector<pcap::CaptureRecord> merged_capture() const;

    void trace_origin(HostId host) { traced_.insert(host); }
    const std::vector<TraceEntry>& trace() const { return trace_; }

    std::uint64_t frames_transmitted() const { return next_frame_id_; }

private:
    struct Port {
        PortId id;
        AdminState state = AdminState::enabled;
        bool monitor = false;
        std::optional<HostPortHandle> host_port;
        std::optional<PortId> trunk_peer;
    };
    struct Switch {
        std::string name;
        std::vector<Port> ports;  // sorted by index
        FlowTable table;
        std::vector<pcap::CaptureRecord> capture;
        std::vector<std::uint64_t> capture_seq;
    };
    struct Host {
        std::string name;
        Endpoint* endpoint = nullptr;
    };
    struct HostPort {
        HostId host = 0;
        std::string name;
        PortId port;
        codec::MacAddress mac;
    };
    struct InFlight {
        FramePtr frame;
        std::uint64_t frame_id = 0;
        HostId origin = 0;
        SimTime entered = 0;
    };

    Port& port_ref(PortId id);
    const Port& port_ref(PortId id) const;
    SimTime draw_latency();
    void ingress(PortId port, const InFlight& frame);
    void emit(const Switch& sw, const Port& out, const InFlight& frame, PortId ingress_port, bool mirrored, SimTime now);
    void deliver(HostPortHandle to, const InFlight& frame, PortId ingress_port, bool mirrored);
    bool is_sv(const codec::Bytes& frame) const;

    Scheduler& scheduler_;
    EventLog& log_;
    LatencyConfig latency_;
    std::mt19937_64 rng_;
    std::vector<Switch> switches_;
    std::vector<Host> hosts_;
    std::vector<HostPort> host_ports_;
    std::uint64_t next_frame_id_ = 0;
    std::uint64_t next_capture_seq_ = 0;
    bool capture_enabled_ = true;
    std::set<HostId> traced_;
    std::vector<TraceEntry> trace_;
};

}  // namespace scs::fabric
