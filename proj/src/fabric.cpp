#include "scs/fabric.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace scs::fabric {

namespace {

constexpr HostId kExternalOrigin = std::numeric_limits<HostId>::max();

std::string_view action_name(PrimaryAction a) {
    switch (a) {
        case PrimaryAction::forward: return "forward";
        case PrimaryAction::flood: return "flood";
        case PrimaryAction::drop: return "drop";
    }
    return "unknown";
}

bool rule_before(const FlowRule& a, const FlowRule& b) {
    return a.priority != b.priority ? a.priority > b.priority : a.cookie < b.cookie;
}

}  // namespace

// ---------------------------------------------------------------------------

void Scheduler::at(SimTime time, Action action) {
    if (time < now_) {
        time = now_;
    }
    heap_.push_back(Entry{time, next_seq_++, std::move(action)});
    std::push_heap(heap_.begin(), heap_.end(), later);
}

void Scheduler::run_until(SimTime end) {
    while (!heap_.empty() && heap_.front().time <= end) {
        std::pop_heap(heap_.begin(), heap_.end(), later);
        Entry entry = std::move(heap_.back());
        heap_.pop_back();
        now_ = entry.time;
        ++processed_;
        entry.action();
    }
    if (now_ < end) {
        now_ = end;
    }
}

// ---------------------------------------------------------------------------

bool FlowMatch::matches(std::uint16_t ingress, const codec::HeaderView& header) const {
    if (ingress_port && *ingress_port != ingress) return false;
    if (src_mac && *src_mac != header.src) return false;
    if (dst_mac && *dst_mac != header.dst) return false;
    if (ethertype && *ethertype != header.ethertype) return false;
    if (appid && (!header.has_appid || *appid != header.appid)) return false;
    return true;
}

bool FlowTable::insert(FlowRule rule) {
    if (contains(rule.cookie)) {
        return false;
    }
    auto pos = std::upper_bound(rules_.begin(), rules_.end(), rule, rule_before);
    rules_.insert(pos, std::move(rule));
    return true;
}

bool FlowTable::remove(std::uint64_t cookie) {
    auto it = std::find_if(rules_.begin(), rules_.end(), [&](const FlowRule& r) { return r.cookie == cookie; });
    if (it == rules_.end()) {
        return false;
    }
    rules_.erase(it);
    return true;
}

bool FlowTable::contains(std::uint64_t cookie) const {
    return std::any_of(rules_.begin(), rules_.end(), [&](const FlowRule& r) { return r.cookie == cookie; });
}

const FlowRule* FlowTable::match(std::uint16_t ingress, const codec::HeaderView& header) const {
    for (const auto& rule : rules_) {
        if (rule.match.matches(ingress, header)) {
            return &rule;
        }
    }
    return nullptr;
}

const FlowRule* match_frame(const FlowTable& table, PortId ingress, codec::ByteView frame) {
    codec::HeaderView header;
    if (!codec::peek_header(frame, header)) {
        return nullptr;
    }
    return table.match(ingress.index, header);
}

nlohmann::json to_json(const FlowRule& rule) {
    nlohmann::json match = nlohmann::json::object();
    if (rule.match.ingress_port) match["ingress_port"] = *rule.match.ingress_port;
    if (rule.match.src_mac) match["src_mac"] = rule.match.src_mac->to_string();
    if (rule.match.dst_mac) match["dst_mac"] = rule.match.dst_mac->to_string();
    if (rule.match.ethertype) match["ethertype"] = *rule.match.ethertype;
    if (rule.match.appid) match["appid"] = *rule.match.appid;
    nlohmann::json action{{"primary", action_name(rule.action.primary)}};
    if (!rule.action.out_ports.empty()) action["out_ports"] = rule.action.out_ports;
    if (rule.action.mirror) action["mirror"] = *rule.action.mirror;
    return {{"cookie", rule.cookie}, {"priority", rule.priority}, {"match", match}, {"action", action}};
}

// ---------------------------------------------------------------------------

Fabric::Fabric(Scheduler& scheduler, EventLog& log, LatencyConfig latency, std::uint64_t seed)
    : scheduler_(scheduler), log_(log), latency_(latency), rng_(seed) {
    if (latency_.min < 0 || latency_.max < latency_.min) {
        throw std::invalid_argument("latency bounds must satisfy 0 <= min <= max");
    }
}

std::uint16_t Fabric::add_switch(const std::string& name) {
    if (find_switch(name)) {
        throw std::invalid_argument("duplicate switch " + name);
    }
    switches_.push_back(Switch{name, {}, {}, {}, {}});
    return static_cast<std::uint16_t>(switches_.size() - 1);
}

void Fabric::add_port(PortId id, bool monitor) {
    auto& sw = switches_.at(id.sw);
    auto pos = std::lower_bound(sw.ports.begin(), sw.ports.end(), id.index,
                                [](const Port& p, std::uint16_t idx) { return p.id.index < idx; });
    if (pos != sw.ports.end() && pos->id.index == id.index) {
        throw std::invalid_argument("duplicate port " + std::to_string(id.index) + " on " + sw.name);
    }
    Port port;
    port.id = id;
    port.monitor = monitor;
    sw.ports.insert(pos, port);
}

void Fabric::add_trunk(PortId a, PortId b) {
    auto& pa = port_ref(a);
    auto& pb = port_ref(b);
    if (pa.host_port || pa.trunk_peer || pb.host_port || pb.trunk_peer) {
        throw std::invalid_argument("trunk endpoint already attached");
    }
    pa.trunk_peer = b;
    pb.trunk_peer = a;
}

HostId Fabric::add_host(const std::string& name, Endpoint* endpoint) {
    if (find_host(name)) {
        throw std::invalid_argument("duplicate host " + name);
    }
    hosts_.push_back(Host{name, endpoint});
    return hosts_.size() - 1;
}

HostPortHandle Fabric::attach(HostId host, const std::string& port_name, PortId id, codec::MacAddress mac) {
    auto& port = port_ref(id);
    if (port.host_port || port.trunk_peer) {
        throw std::invalid_argument("switch port already attached: " + switch_name(id.sw) + "/" +
                                    std::to_string(id.index));
    }
    host_ports_.push_back(HostPort{host, port_name, id, mac});
    port.host_port = host_ports_.size() - 1;
    return host_ports_.size() - 1;
}

Fabric::Port& Fabric::port_ref(PortId id) {
    return const_cast<Port&>(static_cast<const Fabric&>(*this).port_ref(id));
}

const Fabric::Port& Fabric::port_ref(PortId id) const {
    const auto& sw = switches_.at(id.sw);
    auto pos = std::lower_bound(sw.ports.begin(), sw.ports.end(), id.index,
                                [](const Port& p, std::uint16_t idx) { return p.id.index < idx; });
    if (pos == sw.ports.end() || pos->id.index != id.index) {
        throw std::out_of_range("no port " + std::to_string(id.index) + " on " + sw.name);
    }
    return *pos;
}

bool Fabric::has_port(PortId id) const {
    if (id.sw >= switches_.size()) return false;
    const auto& ports = switches_[id.sw].ports;
    return std::any_of(ports.begin(), ports.end(), [&](const Port& p) { return p.id.index == id.index; });
}

bool Fabric::is_monitor(PortId id) const { return port_ref(id).monitor; }
AdminState Fabric::port_state(PortId id) const { return port_ref(id).state; }
const FlowTable& Fabric::table(std::uint16_t sw) const { return switches_.at(sw).table; }
const std::string& Fabric::switch_name(std::uint16_t sw) const { return switches_.at(sw).name; }
std::optional<PortId> Fabric::trunk_peer(PortId port) const { return port_ref(port).trunk_peer; }

std::optional<std::uint16_t> Fabric::find_switch(const std::string& name) const {
    for (std::size_t i = 0; i < switches_.size(); ++i) {
        if (switches_[i].name == name) return static_cast<std::uint16_t>(i);
    }
    return std::nullopt;
}

std::vector<std::uint16_t> Fabric::port_indices(std::uint16_t sw) const {
    std::vector<std::uint16_t> out;
    for (const auto& p : switches_.at(sw).ports) out.push_back(p.id.index);
    return out;
}

std::optional<HostId> Fabric::find_host(const std::string& name) const {
    for (std::size_t i = 0; i < hosts_.size(); ++i) {
        if (hosts_[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<HostPortHandle> Fabric::find_host_port(HostId host, const std::string& port_name) const {
    for (std::size_t i = 0; i < host_ports_.size(); ++i) {
        if (host_ports_[i].host == host && host_ports_[i].name == port_name) return i;
    }
    return std::nullopt;
}

std::optional<HostPortHandle> Fabric::host_port_at(PortId port) const { return port_ref(port).host_port; }

nlohmann::json Fabric::port_json(PortId port) const {
    return {{"switch", switch_name(port.sw)}, {"port", port.index}};
}

SimTime Fabric::draw_latency() {
    const auto span = static_cast<std::uint64_t>(latency_.max - latency_.min) + 1;
    return latency_.min + static_cast<SimTime>(rng_() % span);
}

bool Fabric::is_sv(const codec::Bytes& frame) const {
    return frame.size() >= 14 && frame[12] == 0x88 && frame[13] == 0xBA;
}

std::uint64_t Fabric::transmit(HostPortHandle from, FramePtr frame) {
    const auto& hp = host_ports_.at(from);
    const std::uint64_t id = next_frame_id_++;
    const LogLevel level = is_sv(*frame) ? LogLevel::debug : LogLevel::info;
    if (log_.wants(level)) {
        codec::HeaderView h;
        codec::peek_header(*frame, h);
        log_.record(scheduler_.now(), EventKind::frame_tx, level,
                    {{"frame_id", id},
                     {"host", hosts_[hp.host].name},
                     {"port", hp.name},
                     {"src_mac", h.src.to_string()},
                     {"dst_mac", h.dst.to_string()},
                     {"ethertype", h.ethertype},
                     {"bytes", frame->size()}});
    }
    const PortId ingress_port = hp.port;
    const SimTime arrival = scheduler_.now() + draw_latency();
    InFlight in{std::move(frame), id, hp.host, arrival};
    scheduler_.at(arrival, [this, ingress_port, in = std::move(in)] { ingress(ingress_port, in); });
    return id;
}

void Fabric::submit_frame(PortId ingress_port, FramePtr frame, SimTime at) {
    InFlight in{std::move(frame), next_frame_id_++, kExternalOrigin, at};
    scheduler_.at(at, [this, ingress_port, in = std::move(in)] { ingress(ingress_port, in); });
}

void Fabric::ingress(PortId ingress_id, const InFlight& in) {
    const SimTime now = scheduler_.now();
    const Port& in_port = port_ref(ingress_id);
    Switch& sw = switches_[ingress_id.sw];
    const LogLevel level = is_sv(*in.frame) ? LogLevel::debug : LogLevel::info;
    if (in_port.state == AdminState::disabled) {
        log_.record(now, EventKind::frame_rx, level,
                    {{"frame_id", in.frame_id},
                     {"switch", sw.name},
                     {"port", ingress_id.index},
                     {"disposition", "dropped_admin_down"}});
        return;
    }
    if (capture_enabled_) {
        sw.capture.push_back(pcap::CaptureRecord{now, in.frame_id, in.frame});
        sw.capture_seq.push_back(next_capture_seq_++);
    }

    codec::HeaderView header;
    const bool parsed = codec::peek_header(*in.frame, header);
    const FlowRule* rule = parsed ? sw.table.match(ingress_id.index, header) : nullptr;

    PrimaryAction primary = rule ? rule->action.primary : PrimaryAction::flood;
    if (rule && primary == PrimaryAction::drop && log_.wants(level)) {
        log_.record(now, EventKind::frame_rx, level,
                    {{"frame_id", in.frame_id},
                     {"switch", sw.name},
                     {"port", ingress_id.index},
                     {"disposition", "rule_hit"},
                     {"action", "drop"},
                     {"cookie", rule->cookie}});
    }

    const int mirror_port = (rule && rule->action.mirror) ? static_cast<int>(*rule->action.mirror) : -1;
    for (const Port& out : sw.ports) {
        if (out.id.index == ingress_id.index) {
            continue;
        }
        bool send = false;
        switch (primary) {
            case PrimaryAction::flood:
                send = !out.monitor && (out.host_port || out.trunk_peer);
                break;
            case PrimaryAction::forward:
                send = std::find(rule->action.out_ports.begin(), rule->action.out_ports.end(), out.id.index) !=
                       rule->action.out_ports.end();
                break;
            case PrimaryAction::drop:
                break;
        }
        const bool mirrored = mirror_port == static_cast<int>(out.id.index);
        if (send || mirrored) {
            emit(sw, out, in, ingress_id, mirrored && !send, now);
        }
    }
}

void Fabric::emit(const Switch&, const Port& out, const InFlight& in, PortId ingress_port, bool mirrored, SimTime now) {
    if (out.state == AdminState::disabled) {
        return;
    }
    const SimTime arrival = now + draw_latency();
    if (out.trunk_peer) {
        const PortId peer = *out.trunk_peer;
        scheduler_.at(arrival, [this, peer, in] { ingress(peer, in); });
    } else if (out.host_port) {
        const HostPortHandle to = *out.host_port;
        scheduler_.at(arrival, [this, to, in, ingress_port, mirrored] { deliver(to, in, ingress_port, mirrored); });
    }
}

void Fabric::deliver(HostPortHandle to, const InFlight& in, PortId ingress_port, bool mirrored) {
    const SimTime now = scheduler_.now();
    const auto& hp = host_ports_[to];
    const LogLevel level = is_sv(*in.frame) ? LogLevel::debug : LogLevel::info;
    if (log_.wants(level)) {
        log_.record(now, EventKind::frame_rx, level,
                    {{"frame_id", in.frame_id},
                     {"host", hosts_[hp.host].name},
                     {"port", hp.name},
                     {"mirrored", mirrored},
                     {"disposition", "delivered"}});
    }
    if (in.origin != kExternalOrigin && traced_.count(in.origin)) {
        trace_.push_back(TraceEntry{now, in.entered, in.frame_id, in.origin, hp.host, to, mirrored});
    }
    if (auto* endpoint = hosts_[hp.host].endpoint) {
        endpoint->on_frame(Delivery{now, in.frame, in.frame_id, to, mirrored, ingress_port});
    }
}

bool Fabric::install_rule(std::uint16_t sw, FlowRule rule) {
    auto& s = switches_.at(sw);
    const SimTime now = scheduler_.now();
    auto detail = to_json(rule);
    detail["switch"] = s.name;
    if (!s.table.insert(std::move(rule))) {
        detail["op"] = "install";
        detail["result"] = "duplicate_cookie";
        log_.record(now, EventKind::rule_update, LogLevel::error, std::move(detail));
        return false;
    }
    detail["op"] = "install";
    detail["result"] = "ok";
    log_.record(now, EventKind::rule_update, LogLevel::info, std::move(detail));
    return true;
}

void Fabric::remove_rule(std::uint16_t sw, std::uint64_t cookie) {
    auto& s = switches_.at(sw);
    const bool removed = s.table.remove(cookie);
    log_.record(scheduler_.now(), EventKind::rule_update, removed ? LogLevel::info : LogLevel::warn,
                {{"switch", s.name}, {"op", "remove"}, {"cookie", cookie}, {"result", removed ? "ok" : "unknown_cookie"}});
}

void Fabric::set_port_state(PortId id, AdminState state) {
    Port& port = port_ref(id);
    const bool noop = port.state == state;
    port.state = state;
    auto detail = port_json(id);
    detail["state"] = state == AdminState::enabled ? "enabled" : "disabled";
    detail["noop"] = noop;
    if (port.host_port) {
        detail["host"] = hosts_[host_ports_[*port.host_port].host].name;
        detail["host_port"] = host_ports_[*port.host_port].name;
    }
    log_.record(scheduler_.now(), EventKind::port_change, LogLevel::info, std::move(detail));
}

std::vector<pcap::CaptureRecord> Fabric::merged_capture() const {
    struct Item {
        std::uint64_t seq;
        const pcap::CaptureRecord* record;
    };
    std::vector<Item> items;
    for (const auto& sw : switches_) {
        for (std::size_t i = 0; i < sw.capture.size(); ++i) {
            items.push_back(Item{sw.capture_seq[i], &sw.capture[i]});
        }
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.seq < b.seq; });
    std::vector<pcap::CaptureRecord> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(*item.record);
    return out;
}

}  // namespace scs::fabric
