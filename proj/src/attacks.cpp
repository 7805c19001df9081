#include "scs/attacks.hpp"

#include <algorithm>

namespace scs::attacks {

std::string_view to_string(AttackKind k) {
    switch (k) {
        case AttackKind::sv_inject: return "sv_inject";
        case AttackKind::goose_spoof: return "goose_spoof";
        case AttackKind::replay: return "replay";
        case AttackKind::malformed: return "malformed";
    }
    return "unknown";
}

std::optional<AttackKind> parse_attack_kind(std::string_view s) {
    for (auto k : {AttackKind::sv_inject, AttackKind::goose_spoof, AttackKind::replay, AttackKind::malformed}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::string_view to_string(StStrategy s) {
    switch (s) {
        case StStrategy::increment: return "increment";
        case StStrategy::rollback: return "rollback";
        case StStrategy::jump: return "jump";
    }
    return "unknown";
}

std::optional<StStrategy> parse_st_strategy(std::string_view s) {
    for (auto k : {StStrategy::increment, StStrategy::rollback, StStrategy::jump}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

AttackerHost::AttackerHost(std::string id, fabric::Scheduler& scheduler, fabric::Fabric& fabric, EventLog& log,
                           std::uint32_t sample_rate, double frequency_hz, double nominal_a)
    : id_(std::move(id)),
      scheduler_(scheduler),
      fabric_(fabric),
      log_(log),
      rate_(sample_rate),
      frequency_hz_(frequency_hz),
      nominal_a_(nominal_a) {}

void AttackerHost::add_attack(AttackSpec spec, fabric::HostPortHandle port, AttackTarget target) {
    attacks_.push_back(Active{std::move(spec), port, std::move(target), {}, nullptr, 0, 0, false});
}

bool AttackerHost::live(const Active& a) const {
    const SimTime now = scheduler_.now();
    return now >= a.spec.start && (!a.spec.end || now < *a.spec.end);
}

codec::MacAddress AttackerHost::source_mac(const Active& a) const {
    return a.spec.stealth ? a.target.victim_mac : fabric_.mac_of(a.port);
}

void AttackerHost::send(const Active& a, fabric::FramePtr frame) { sent_.push_back(fabric_.transmit(a.port, std::move(frame))); }

void AttackerHost::announce(Active& a) {
    if (a.announced) return;
    a.announced = true;
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                {{"device", id_},
                 {"action", "attack_start"},
                 {"attack", to_string(a.spec.kind)},
                 {"target", a.spec.target},
                 {"stealth", a.spec.stealth}});
}

void AttackerHost::start() {
    for (std::size_t i = 0; i < attacks_.size(); ++i) {
        const auto& a = attacks_[i];
        if (a.spec.kind == AttackKind::sv_inject) {
            scheduler_.at(a.spec.start, [this, i] { announce(attacks_[i]); });
            continue;  // driven by sniffed victim samples
        }
        scheduler_.at(a.spec.start, [this, i] { repeat(i); });
    }
}

void AttackerHost::repeat(std::size_t index) {
    auto& a = attacks_[index];
    if (!live(a)) return;
    const bool first = !a.announced;
    announce(a);
    switch (a.spec.kind) {
        case AttackKind::goose_spoof: emit_spoof(a, first); break;
        case AttackKind::replay:
            if (a.captured) send(a, a.captured);
            break;
        case AttackKind::malformed: emit_malformed(a); break;
        case AttackKind::sv_inject: break;
    }
    scheduler_.after(a.spec.interval, [this, index] { repeat(index); });
}

void AttackerHost::emit_spoof(Active& a, bool first) {
    if (!a.target.goose) return;
    if (first) {
        const std::uint32_t seen = a.victim_st.value_or(1);
        switch (a.spec.st_strategy) {
            case StStrategy::increment: a.st = seen + 1; break;
            case StStrategy::rollback: a.st = seen > 1 ? seen - 1 : 1; break;
            case StStrategy::jump: a.st = seen + a.spec.st_jump; break;
        }
        a.sq = 0;
    } else {
        ++a.sq;
    }
    const auto& cfg = *a.target.goose;
    codec::GooseApdu apdu;
    apdu.gocb_ref = cfg.gocb_ref;
    apdu.time_allowed_to_live_ms = static_cast<std::uint32_t>(2 * a.spec.interval / kMillisecond);
    apdu.dat_set = cfg.dat_set;
    apdu.go_id = cfg.go_id;
    apdu.timestamp_ns = codec::quantize_utc_ns(static_cast<std::uint64_t>(scheduler_.now()));
    apdu.st_num = a.st;
    apdu.sq_num = a.sq;
    apdu.conf_rev = cfg.conf_rev;
    apdu.num_dat_set_entries = 1;
    apdu.all_data = {true};
    send(a, std::make_shared<const codec::Bytes>(codec::encode_goose(apdu, {cfg.dst, source_mac(a), cfg.appid})));
}

void AttackerHost::emit_malformed(Active& a) {
    codec::GooseApdu apdu;
    apdu.gocb_ref = a.target.goose ? a.target.goose->gocb_ref : "X/LLN0$GO$gcb";
    apdu.go_id = a.target.goose ? a.target.goose->go_id : "X";
    apdu.dat_set = a.target.goose ? a.target.goose->dat_set : "X/LLN0$ds";
    apdu.num_dat_set_entries = 1;
    apdu.all_data = {true};
    const auto dst = a.target.goose ? a.target.goose->dst : codec::MacAddress::parse("01:0c:cd:01:00:ff");
    auto bytes = codec::encode_goose(apdu, {dst, source_mac(a), 0x3fff});
    // Cut into the allData TLV; the declared lengths now overrun the frame.
    bytes.resize(bytes.size() - 4);
    ++a.sq;
    send(a, std::make_shared<const codec::Bytes>(std::move(bytes)));
}

void AttackerHost::on_frame(const fabric::Delivery& d) {
    if (d.mirrored || attacks_.empty()) return;
    codec::HeaderView h;
    if (!codec::peek_header(*d.frame, h)) return;
    if (h.ethertype != codec::kEtherTypeGoose && h.ethertype != codec::kEtherTypeSv) return;
    auto decoded = codec::decode_frame(*d.frame);

    for (std::size_t i = 0; i < attacks_.size(); ++i) {
        auto& a = attacks_[i];
        // Sniff on the attack's own port only; our forgeries come back on the others.
        if (d.port != a.port) continue;
        if (auto* g = std::get_if<codec::GooseFrame>(&decoded)) {
            if (g->apdu.go_id != a.spec.target || h.src == fabric_.mac_of(a.port)) continue;
            a.victim_st = g->apdu.st_num;
            if (a.spec.kind == AttackKind::replay && !a.captured && scheduler_.now() < a.spec.start) a.captured = d.frame;
        } else if (auto* s = std::get_if<codec::SvFrame>(&decoded)) {
            if (s->apdu.sv_id != a.spec.target) continue;
            if (a.spec.kind == AttackKind::replay && !a.captured && scheduler_.now() < a.spec.start) a.captured = d.frame;
            if (a.spec.kind != AttackKind::sv_inject || !a.target.sv || !live(a)) continue;
            announce(a);
            // Forge the same sample instant at the attack magnitude so the victim's
            // window takes the forged value whenever it arrives second.
            devices::WaveformSource forged;
            forged.frequency_hz = frequency_hz_;
            forged.schedule = {{0, a.spec.magnitude * nominal_a_}};
            const auto apdu = devices::make_sample(forged, *a.target.sv, s->apdu.smp_cnt, rate_);
            auto frame = std::make_shared<const codec::Bytes>(
                codec::encode_sv(apdu, {a.target.sv->dst, source_mac(a), a.target.sv->appid}));
            scheduler_.after(a.spec.reaction, [this, i, frame] {
                if (live(attacks_[i])) send(attacks_[i], frame);
            });
        }
    }
}

}  // namespace scs::attacks
