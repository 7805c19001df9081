#include "scs/ids.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace scs::ids {

std::string_view to_string(Protocol p) { return p == Protocol::sv ? "SV" : "GOOSE"; }

bool RuleConfig::on(const std::string& rule) const {
    auto it = enabled.find(rule);
    return it == enabled.end() || it->second;
}

nlohmann::json to_json(const Alert& a, const std::string& ingress_switch) {
    return {{"protocol", to_string(a.protocol)},
            {"rule", a.rule},
            {"stream", a.stream},
            {"src_mac", a.src_mac.to_string()},
            {"suspected_ingress", {{"switch", ingress_switch}, {"port", a.suspected_ingress.index}}},
            {"targets", a.targets},
            {"severity", a.severity()},
            {"evidence_frame_id", a.frame_id},
            {"detail", a.detail}};
}

Detector::Detector(RuleConfig config, std::vector<PublisherKey> whitelist, TargetMap targets)
    : config_(std::move(config)), whitelist_(std::move(whitelist)), targets_(std::move(targets)) {}

std::string Detector::stream_of(codec::ByteView frame) {
    auto decoded = codec::decode_frame(frame);
    if (auto* g = std::get_if<codec::GooseFrame>(&decoded)) return g->apdu.go_id;
    if (auto* s = std::get_if<codec::SvFrame>(&decoded)) return s->apdu.sv_id;
    if (auto* e = std::get_if<codec::DecodeError>(&decoded)) {
        codec::HeaderView h;
        if (codec::peek_header(frame, h)) return h.src.to_string();
        (void)e;
    }
    return {};
}

const PublisherKey* Detector::find_key(Protocol p, const std::string& id, const codec::MacAddress& src) const {
    for (const auto& k : whitelist_) {
        if (k.protocol == p && k.id == id && k.src == src) return &k;
    }
    return nullptr;
}

bool Detector::known_id(Protocol p, const std::string& id) const {
    return std::any_of(whitelist_.begin(), whitelist_.end(),
                       [&](const PublisherKey& k) { return k.protocol == p && k.id == id; });
}

std::vector<std::string> Detector::targets_for(Protocol p, const std::string& id) const {
    if (p == Protocol::sv) {
        auto it = targets_.sv_subscribers.find(id);
        return it == targets_.sv_subscribers.end() ? std::vector<std::string>{} : it->second;
    }
    auto it = targets_.goose_owner.find(id);
    return it == targets_.goose_owner.end() ? std::vector<std::string>{} : std::vector<std::string>{it->second};
}

// An attacker replaying or forging with the victim's MAC shows up as a frame on a
// port other than the one the publisher was learned on. Whichever of the offending
// frame and the last clean frame came in elsewhere is the suspect.
template <class Baseline>
fabric::PortId Detector::suspect(const Baseline& b, fabric::PortId frame_ingress) {
    if (!b.seen) return frame_ingress;
    if (frame_ingress != b.learned_ingress) return frame_ingress;
    if (b.last_ingress != b.learned_ingress) return b.last_ingress;
    return frame_ingress;
}

std::optional<Alert> Detector::raise(Alert alert) {
    const auto key = std::make_pair(alert.rule, alert.stream);
    auto it = last_alert_.find(key);
    if (it != last_alert_.end() && alert.time - it->second < config_.suppression) {
        ++suppressed_;
        return std::nullopt;
    }
    last_alert_[key] = alert.time;
    return alert;
}

std::optional<Alert> Detector::inspect(const Observation& obs) {
    ++inspected_;
    auto decoded = codec::decode_frame(obs.frame);
    if (auto* err = std::get_if<codec::DecodeError>(&decoded)) {
        if (err->ethertype != codec::kEtherTypeGoose && err->ethertype != codec::kEtherTypeSv) return std::nullopt;
        if (!config_.on("M1")) return std::nullopt;
        codec::HeaderView h;
        codec::peek_header(obs.frame, h);
        Alert a;
        a.time = obs.time;
        a.protocol = err->ethertype == codec::kEtherTypeSv ? Protocol::sv : Protocol::goose;
        a.rule = "M1";
        a.stream = h.src.to_string();
        a.src_mac = h.src;
        a.suspected_ingress = obs.ingress;
        a.frame_id = obs.frame_id;
        a.detail = "malformed frame at offset " + std::to_string(err->offset) + ": " + err->message;
        return raise(std::move(a));
    }
    if (auto* g = std::get_if<codec::GooseFrame>(&decoded)) return inspect_goose(obs, *g);
    if (auto* s = std::get_if<codec::SvFrame>(&decoded)) return inspect_sv(obs, *s);
    return std::nullopt;
}

std::optional<Alert> Detector::inspect_goose(const Observation& obs, const codec::GooseFrame& f) {
    const auto& apdu = f.apdu;
    const std::string& id = apdu.go_id;
    Alert a;
    a.time = obs.time;
    a.protocol = Protocol::goose;
    a.stream = id;
    a.src_mac = f.header.src;
    a.frame_id = obs.frame_id;
    a.suspected_ingress = obs.ingress;

    if (!find_key(Protocol::goose, id, f.header.src)) {
        if (!config_.on("G3")) return std::nullopt;
        a.rule = "G3";
        a.targets = targets_for(Protocol::goose, id);
        a.detail = known_id(Protocol::goose, id) ? "goID published from a non-whitelisted source MAC"
                                                 : "unknown goID";
        return raise(std::move(a));
    }
    if (retired_.count(id)) return std::nullopt;

    auto& b = goose_[id];
    a.targets = targets_for(Protocol::goose, id);
    a.suspected_ingress = suspect(b, obs.ingress);
    if (b.seen) {
        if (config_.on("G1")) {
            if (apdu.st_num < b.st) {
                a.rule = "G1";
                a.detail = "stNum rollback " + std::to_string(b.st) + " -> " + std::to_string(apdu.st_num);
                return raise(std::move(a));
            }
            if (apdu.st_num == b.st && apdu.sq_num != b.sq + 1) {
                a.rule = "G1";
                a.detail = "sqNum discontinuity " + std::to_string(b.sq) + " -> " + std::to_string(apdu.sq_num) +
                           " at stNum " + std::to_string(b.st);
                return raise(std::move(a));
            }
        }
        if (config_.on("G2") && apdu.st_num > b.st && apdu.st_num - b.st > config_.g2_max_jump) {
            a.rule = "G2";
            a.detail = "stNum jump " + std::to_string(b.st) + " -> " + std::to_string(apdu.st_num);
            return raise(std::move(a));
        }
        if (config_.on("G4") && apdu.st_num > b.st) {
            std::size_t recent = 1;
            for (SimTime t : b.changes) recent += (obs.time - t < kSecond) ? 1 : 0;
            if (static_cast<double>(recent) > config_.g4_max_changes_per_s) {
                a.rule = "G4";
                a.detail = std::to_string(recent) + " state changes within 1 s";
                return raise(std::move(a));
            }
        }
    }

    // Clean frame: advance the baseline.
    if (!b.seen) {
        b.learned_ingress = obs.ingress;
    } else if (apdu.st_num > b.st) {
        b.changes.push_back(obs.time);
        while (!b.changes.empty() && obs.time - b.changes.front() >= kSecond) b.changes.pop_front();
    }
    b.seen = true;
    b.st = apdu.st_num;
    b.sq = apdu.sq_num;
    b.last_ingress = obs.ingress;
    b.last_frame_id = obs.frame_id;
    b.deadline = obs.time + static_cast<SimTime>(apdu.time_allowed_to_live_ms) * kMillisecond;
    return std::nullopt;
}

std::optional<Alert> Detector::inspect_sv(const Observation& obs, const codec::SvFrame& f) {
    const auto& apdu = f.apdu;
    const std::string& id = apdu.sv_id;
    Alert a;
    a.time = obs.time;
    a.protocol = Protocol::sv;
    a.stream = id;
    a.src_mac = f.header.src;
    a.frame_id = obs.frame_id;
    a.suspected_ingress = obs.ingress;
    a.targets = targets_for(Protocol::sv, id);

    if (!find_key(Protocol::sv, id, f.header.src)) {
        if (!config_.on("S2")) return std::nullopt;
        a.rule = "S2";
        a.detail = known_id(Protocol::sv, id) ? "svID published from a non-whitelisted source MAC" : "unknown svID";
        return raise(std::move(a));
    }
    if (retired_.count(id)) return std::nullopt;

    auto& b = sv_[id];
    a.suspected_ingress = suspect(b, obs.ingress);
    if (b.seen && config_.on("S1")) {
        const std::uint32_t rate = config_.sample_rate;
        const std::uint16_t expected = static_cast<std::uint16_t>((b.smp_cnt + 1u) % rate);
        if (apdu.smp_cnt != expected) {
            a.rule = "S1";
            a.detail = std::string(apdu.smp_cnt == b.smp_cnt ? "duplicate" : "gap in") + " smpCnt: expected " +
                       std::to_string(expected) + ", got " + std::to_string(apdu.smp_cnt);
            return raise(std::move(a));
        }
    }
    if (config_.on("S3")) {
        const double bound_ma = config_.s3_bound_multiple * config_.nominal_a * std::sqrt(2.0) * 1000.0;
        for (std::size_t c = 0; c < 4; ++c) {
            if (std::abs(static_cast<double>(apdu.samples[c].value)) > bound_ma) {
                a.rule = "S3";
                a.detail = "channel " + std::to_string(c) + " sample " + std::to_string(apdu.samples[c].value) +
                           " mA beyond physical bound";
                return raise(std::move(a));
            }
        }
    }

    // Clean frame: close any elapsed rate window, then advance the baseline.
    std::optional<Alert> verdict;
    if (!b.seen) {
        b.learned_ingress = obs.ingress;
        b.window_start = obs.time;
        b.window_count = 0;
    } else if (obs.time >= b.window_start + config_.s4_window) {
        const double expected = static_cast<double>(config_.sample_rate) * static_cast<double>(config_.s4_window) /
                                static_cast<double>(kSecond);
        const SimTime elapsed = (obs.time - b.window_start) / config_.s4_window;
        const double observed = elapsed > 1 ? 0.0 : static_cast<double>(b.window_count);
        if (config_.on("S4") && std::abs(observed - expected) > config_.s4_tolerance * expected) {
            a.rule = "S4";
            a.detail = "rate window held " + std::to_string(static_cast<std::uint64_t>(observed)) + " frames, expected " +
                       std::to_string(static_cast<std::uint64_t>(expected));
            verdict = raise(std::move(a));
        }
        b.window_start += elapsed * config_.s4_window;
        b.window_count = 0;
    }
    b.seen = true;
    b.smp_cnt = apdu.smp_cnt;
    b.last_ingress = obs.ingress;
    ++b.window_count;
    return verdict;
}

std::optional<SimTime> Detector::deadline(const std::string& go_id) const {
    auto it = goose_.find(go_id);
    if (it == goose_.end()) return std::nullopt;
    return it->second.deadline;
}

std::optional<Alert> Detector::check_expiry(const std::string& go_id, SimTime now) {
    if (!config_.on("G5") || retired_.count(go_id)) return std::nullopt;
    auto it = goose_.find(go_id);
    if (it == goose_.end() || !it->second.deadline || *it->second.deadline > now) return std::nullopt;
    auto& b = it->second;
    b.deadline.reset();
    Alert a;
    a.time = now;
    a.protocol = Protocol::goose;
    a.rule = "G5";
    a.stream = go_id;
    for (const auto& k : whitelist_) {
        if (k.protocol == Protocol::goose && k.id == go_id) a.src_mac = k.src;
    }
    a.suspected_ingress = b.learned_ingress;
    a.targets = targets_for(Protocol::goose, go_id);
    a.frame_id = b.last_frame_id;
    a.detail = "timeAllowedToLive expired without refresh";
    return raise(std::move(a));
}

void Detector::retire(const std::string& stream_id) {
    retired_.insert(stream_id);
    goose_.erase(stream_id);
    sv_.erase(stream_id);
}

void Detector::reinstate(const std::string& stream_id) { retired_.erase(stream_id); }

// ---------------------------------------------------------------------------

IdsHost::IdsHost(fabric::Scheduler& scheduler, fabric::Fabric& fabric, EventLog& log, Detector detector,
                 AlertHandler handler)
    : scheduler_(scheduler), fabric_(fabric), log_(log), detector_(std::move(detector)), handler_(std::move(handler)) {}

void IdsHost::on_frame(const fabric::Delivery& d) {
    if (!enabled_) return;
    if (record_) seen_.push_back(Seen{d.time, d.frame_id, Detector::stream_of(*d.frame)});
    auto alert = detector_.inspect(Observation{d.time, *d.frame, d.frame_id, d.switch_ingress});
    if (alert) {
        emit(*alert);
        return;
    }
    codec::HeaderView h;
    if (codec::peek_header(*d.frame, h) && h.ethertype == codec::kEtherTypeGoose) {
        const std::string id = Detector::stream_of(*d.frame);
        if (!id.empty()) arm_expiry(id);
    }
}

void IdsHost::arm_expiry(const std::string& go_id) {
    const auto deadline = detector_.deadline(go_id);
    if (!deadline) return;
    scheduler_.at(*deadline, [this, go_id] {
        if (!enabled_) return;
        if (auto alert = detector_.check_expiry(go_id, scheduler_.now())) emit(*alert);
    });
}

void IdsHost::emit(const Alert& alert) {
    alerts_.push_back(alert);
    log_.record(alert.time, EventKind::alert, LogLevel::warn, to_json(alert, fabric_.switch_name(alert.suspected_ingress.sw)));
    if (handler_) handler_(alert);
}

}  // namespace scs::ids
