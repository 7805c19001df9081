#include "scs/hosts.hpp"

#include <stdexcept>
#include <variant>

namespace scs::hosts {

MergingUnitHost::MergingUnitHost(std::string id, fabric::Scheduler& scheduler, fabric::Fabric& fabric,
                                 const devices::WaveformSource& waveform, std::vector<devices::SvStreamConfig> streams,
                                 std::uint32_t sample_rate)
    : id_(std::move(id)),
      scheduler_(scheduler),
      fabric_(fabric),
      waveform_(waveform),
      streams_(std::move(streams)),
      rate_(sample_rate) {}

void MergingUnitHost::start(SimTime end) {
    end_ = end;
    next_k_ = 0;
    scheduler_.at(devices::sample_time(0, rate_), [this] { tick(); });
}

void MergingUnitHost::tick() {
    const std::uint64_t k = next_k_++;
    const auto src = fabric_.mac_of(port_);
    for (const auto& s : streams_) {
        const auto apdu = devices::make_sample(waveform_, s, k, rate_);
        fabric_.transmit(port_, std::make_shared<const codec::Bytes>(codec::encode_sv(apdu, {s.dst, src, s.appid})));
    }
    const SimTime next = devices::sample_time(next_k_, rate_);
    if (next <= end_) scheduler_.at(next, [this] { tick(); });
}

// ---------------------------------------------------------------------------

struct ProtectionHost::Function {
    FunctionConfig config;
    std::unique_ptr<devices::OvercurrentElement> oc;
    std::unique_ptr<devices::DifferentialElement> diff;
    std::unique_ptr<devices::GoosePublisher> publisher;

    bool tripped() const { return oc ? oc->tripped() : diff->tripped(); }
};

ProtectionHost::ProtectionHost(std::string id, std::string role, fabric::Scheduler& scheduler, fabric::Fabric& fabric,
                               EventLog& log, std::uint32_t sample_rate, double frequency_hz)
    : id_(std::move(id)),
      role_(std::move(role)),
      scheduler_(scheduler),
      fabric_(fabric),
      log_(log),
      rate_(sample_rate),
      frequency_hz_(frequency_hz) {}

ProtectionHost::~ProtectionHost() = default;

void ProtectionHost::add_function(FunctionConfig config) {
    auto fn = std::make_unique<Function>();
    const std::size_t index = functions_.size();
    if (config.kind == FunctionKind::overcurrent) {
        if (config.sv_ids.size() != 1) throw std::invalid_argument("overcurrent function needs exactly one SV stream");
        fn->oc = std::make_unique<devices::OvercurrentElement>(config.settings, rate_, frequency_hz_);
    } else {
        if (config.sv_ids.size() != 2) throw std::invalid_argument("differential function needs exactly two SV streams");
        fn->diff = std::make_unique<devices::DifferentialElement>(config.settings, rate_, frequency_hz_);
    }
    for (std::size_t side = 0; side < config.sv_ids.size(); ++side) routes_[config.sv_ids[side]].emplace_back(index, side);

    const auto port = config.goose_port;
    const auto appid = config.goose.appid;
    const auto dst = config.goose.dst;
    fn->publisher = std::make_unique<devices::GoosePublisher>(
        scheduler_, config.goose, [this, port, appid, dst](const codec::GooseApdu& apdu) {
            fabric_.transmit(port, std::make_shared<const codec::Bytes>(
                                       codec::encode_goose(apdu, {dst, fabric_.mac_of(port), appid})));
        });
    fn->config = std::move(config);
    functions_.push_back(std::move(fn));
}

void ProtectionHost::start() {
    for (auto& fn : functions_) fn->publisher->start();
}

std::vector<std::string> ProtectionHost::function_names() const {
    std::vector<std::string> out;
    for (const auto& fn : functions_) out.push_back(fn->config.name);
    return out;
}

ProtectionHost::Function& ProtectionHost::function(const std::string& name) const {
    for (const auto& fn : functions_) {
        if (fn->config.name == name) return *fn;
    }
    throw std::out_of_range(id_ + " has no function " + name);
}

const devices::GoosePublisher& ProtectionHost::publisher(const std::string& name) const {
    return *function(name).publisher;
}

bool ProtectionHost::tripped(const std::string& name) const { return function(name).tripped(); }

void ProtectionHost::set_health(devices::Health health) {
    if (health == health_) return;
    const auto previous = health_;
    health_ = health;
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                {{"device", id_}, {"action", "health"}, {"from", to_string(previous)}, {"to", to_string(health)}});
    if (health == devices::Health::isolated) {
        for (auto& fn : functions_) fn->publisher->stop();
    } else if (previous == devices::Health::isolated) {
        for (auto& fn : functions_) {
            fn->publisher->start();
            fn->publisher->publish(fn->tripped());
        }
    }
}

void ProtectionHost::on_frame(const fabric::Delivery& d) {
    if (d.mirrored || health_ == devices::Health::isolated) return;
    codec::HeaderView h;
    if (!codec::peek_header(*d.frame, h) || h.ethertype != codec::kEtherTypeSv) return;
    const auto decoded = codec::decode_frame(*d.frame);
    const auto* sv = std::get_if<codec::SvFrame>(&decoded);
    if (!sv) return;
    const auto it = routes_.find(sv->apdu.sv_id);
    if (it == routes_.end()) return;
    for (const auto& [index, side] : it->second) {
        auto& fn = *functions_[index];
        handle(fn, fn.oc ? fn.oc->on_sample(sv->apdu, d.time) : fn.diff->on_sample(side, sv->apdu, d.time));
    }
}

void ProtectionHost::handle(Function& fn, const devices::Evaluation& eval) {
    if (eval.diagnostic && log_.wants(LogLevel::warn)) {
        log_.record(scheduler_.now(), EventKind::device_action, LogLevel::warn,
                    {{"device", id_}, {"action", "diagnostic"}, {"function", fn.config.name}, {"detail", *eval.diagnostic}});
    }
    if (!eval.change) return;
    const auto& c = *eval.change;
    decisions_.push_back({fn.config.name, c});
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                {{"device", id_},
                 {"action", "trip_decision"},
                 {"function", fn.config.name},
                 {"trip", c.trip},
                 {"sample_index", c.sample_index},
                 {"sample_time_ns", c.sample_time},
                 {"measured_a", c.measured_a}});
    fn.publisher->publish(c.trip);
}

// ---------------------------------------------------------------------------

BreakerHost::BreakerHost(std::string id, fabric::Scheduler& scheduler, EventLog& log, std::set<std::string> subscriptions)
    : id_(std::move(id)), scheduler_(scheduler), log_(log), breaker_(std::move(subscriptions)) {}

void BreakerHost::on_frame(const fabric::Delivery& d) {
    if (d.mirrored) return;
    codec::HeaderView h;
    if (!codec::peek_header(*d.frame, h) || h.ethertype != codec::kEtherTypeGoose) return;
    const auto decoded = codec::decode_frame(*d.frame);
    const auto* g = std::get_if<codec::GooseFrame>(&decoded);
    if (!g) return;
    const auto outcome = breaker_.on_goose(g->apdu, scheduler_.now());
    const bool trip = !g->apdu.all_data.empty() && g->apdu.all_data.front();
    if (outcome == devices::CircuitBreaker::Outcome::opened) {
        opening_frame_ = d.frame_id;
        log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                    {{"device", id_},
                     {"action", "cb_open"},
                     {"go_id", g->apdu.go_id},
                     {"st_num", g->apdu.st_num},
                     {"src", h.src.to_string()},
                     {"frame_id", d.frame_id}});
    } else if (trip && outcome != devices::CircuitBreaker::Outcome::already_open) {
        log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                    {{"device", id_},
                     {"action", "diagnostic"},
                     {"detail", std::string(devices::to_string(outcome)) + " trip ignored"},
                     {"go_id", g->apdu.go_id},
                     {"frame_id", d.frame_id}});
    }
}

void BreakerHost::close() {
    if (breaker_.position() == devices::BreakerPosition::closed) return;
    breaker_.close();
    opening_frame_.reset();
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                {{"device", id_}, {"action", "cb_close"}, {"actor", "operator"}});
}

}  // namespace scs::hosts
