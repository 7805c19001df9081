#include <map>
#include <set>
#include <string>
#include <variant>

#include "doctest.h"
#include "scs/codec.hpp"
#include "scs/scenario.hpp"
#include "scs/simulation.hpp"

using namespace scs;

namespace {

scenario::Scenario load(const std::string& name) {
    return scenario::load_file(std::string(SCS_SCENARIO_DIR) + "/" + name + ".json");
}

sim::RunOptions short_run(bool ids, SimTime duration = 3 * kSecond) {
    sim::RunOptions o;
    o.ids_enabled = ids;
    o.duration = duration;
    return o;
}

// Bytes of every captured frame, by frame id (a frame crossing a trunk is captured twice, identically).
std::map<std::uint64_t, codec::Bytes> frames_by_id(const sim::Simulation& s) {
    std::map<std::uint64_t, codec::Bytes> out;
    for (const auto& r : s.fabric().merged_capture()) out.emplace(r.frame_id, *r.frame);
    return out;
}

// Attacker frames that reached a switch before the run ended, as captured.
std::vector<codec::Bytes> attacker_captured(const sim::Simulation& s) {
    const auto frames = frames_by_id(s);
    std::vector<codec::Bytes> out;
    for (auto id : s.attacker_frames()) {
        const auto it = frames.find(id);
        if (it != frames.end()) out.push_back(it->second);
    }
    return out;
}

std::vector<codec::GooseFrame> attacker_goose(const sim::Simulation& s) {
    std::vector<codec::GooseFrame> out;
    for (const auto& bytes : attacker_captured(s)) {
        const auto d = codec::decode_frame(bytes);
        REQUIRE(std::holds_alternative<codec::GooseFrame>(d));
        out.push_back(std::get<codec::GooseFrame>(d));
    }
    return out;
}

}  // namespace

TEST_CASE("forged SV without an IDS makes the overcurrent PIED trip the breaker") {
    sim::Simulation s(load("sv_attack"), short_run(false));
    s.run();
    REQUIRE(s.ids());
    CHECK(s.ids()->alerts().empty());
    const auto& cb = s.breaker("CB1").breaker();
    CHECK(cb.position() == devices::BreakerPosition::open);
    CHECK(cb.tripped_by() == "PIED_OC_TRIP");
    REQUIRE(cb.last_trip_time());
    CHECK(*cb.last_trip_time() > 2 * kSecond);
    CHECK(s.protection("PIED_OC").tripped("oc"));
    CHECK_FALSE(s.protection("PIED_DIFF").tripped("diff"));
    CHECK(s.apc().plans().empty());
}

TEST_CASE("forged SV frames decode and track the victim sample counter") {
    sim::Simulation s(load("sv_attack"), short_run(false, 2200 * kMillisecond));
    s.run();
    const auto frames = frames_by_id(s);
    const auto ids = s.attacker_frames();
    REQUIRE(ids.size() > 100);
    std::set<std::uint16_t> counts;
    for (auto id : ids) {
        const auto d = codec::decode_frame(frames.at(id));
        REQUIRE(std::holds_alternative<codec::SvFrame>(d));
        const auto& sv = std::get<codec::SvFrame>(d);
        CHECK(sv.apdu.sv_id == "MU1_FEEDER");
        CHECK(sv.header.appid == 0x4000);
        CHECK(sv.header.src == codec::MacAddress::parse("02:00:00:00:07:01"));
        counts.insert(sv.apdu.smp_cnt);
    }
    // One forged sample per victim sample: no duplicate counters within 200 ms.
    CHECK(counts.size() == ids.size());
}

TEST_CASE("spoofed GOOSE stNum follows the chosen strategy") {
    struct Case {
        attacks::StStrategy strategy;
        std::uint32_t first_st;
    };
    for (auto c : {Case{attacks::StStrategy::increment, 2}, Case{attacks::StStrategy::jump, 101},
                   Case{attacks::StStrategy::rollback, 1}}) {
        CAPTURE(attacks::to_string(c.strategy));
        auto sc = load("goose_attack");
        sc.attacks[0].st_strategy = c.strategy;
        sc.operator_actions.clear();
        sim::Simulation s(std::move(sc), short_run(false));
        s.run();
        const auto spoofs = attacker_goose(s);
        REQUIRE(spoofs.size() >= 3);
        for (std::size_t i = 0; i < spoofs.size(); ++i) {
            const auto& g = spoofs[i].apdu;
            CHECK(g.go_id == "PIED_DIFF_TRIP");
            CHECK(g.st_num == c.first_st);
            CHECK(g.sq_num == i);
            CHECK(g.all_data.at(0));
            CHECK(g.time_allowed_to_live_ms == 500);
        }
        const auto& cb = s.breaker("CB1").breaker();
        CHECK(cb.position() == devices::BreakerPosition::open);
        CHECK(cb.tripped_by() == "PIED_DIFF_TRIP");
        CHECK(s.breaker("CB1").opening_frame() == s.attacker_frames().front());
    }
}

TEST_CASE("replayed GOOSE is byte-identical to a frame the victim sent earlier") {
    sim::Simulation s(load("replay"), short_run(true));
    s.run();
    const auto frames = frames_by_id(s);
    const auto sent = s.attacker_frames();
    REQUIRE_FALSE(sent.empty());
    std::set<codec::Bytes> victim;
    for (const auto* r : s.log().of_kind(EventKind::frame_tx)) {
        const auto id = r->detail.at("frame_id").get<std::uint64_t>();
        if (r->detail.at("host") == "PIED_DIFF" && id < sent.front()) victim.insert(frames.at(id));
    }
    REQUIRE_FALSE(victim.empty());
    const auto replayed = attacker_captured(s);
    REQUIRE_FALSE(replayed.empty());
    for (const auto& bytes : replayed) CHECK(victim.count(bytes) == 1);

    REQUIRE(s.ids());
    REQUIRE_FALSE(s.ids()->alerts().empty());
    const auto& first = s.ids()->alerts().front();
    CHECK(first.rule == "G1");
    CHECK(first.stream == "PIED_DIFF_TRIP");
    CHECK(first.frame_id == sent.front());
    CHECK(s.apc().banners().size() == 1);
}

TEST_CASE("malformed frames fail to decode and never reach a protection function") {
    sim::Simulation s(load("malformed"), short_run(true));
    s.run();
    const auto sent = attacker_captured(s);
    REQUIRE_FALSE(sent.empty());
    for (const auto& bytes : sent) CHECK(std::holds_alternative<codec::DecodeError>(codec::decode_frame(bytes)));
    CHECK(s.breaker("CB1").breaker().position() == devices::BreakerPosition::closed);
    CHECK(s.apc().banners().empty());
    CHECK(s.apc().objective() == 0.0);
    REQUIRE(s.ids());
    REQUIRE_FALSE(s.ids()->alerts().empty());
    CHECK(s.ids()->alerts().front().rule == "M1");
    CHECK(s.attacker_drop_rule_installed());
}

TEST_CASE("forged SV with a stolen source MAC is still caught") {
    auto sc = load("sv_attack");
    sc.attacks[0].stealth = true;
    sim::Simulation s(std::move(sc), short_run(true));
    s.run();
    for (const auto& bytes : attacker_captured(s)) {
        const auto& sv = std::get<codec::SvFrame>(codec::decode_frame(bytes));
        CHECK(sv.header.src == codec::MacAddress::parse("02:00:00:00:01:01"));
    }
    REQUIRE(s.ids());
    REQUIRE_FALSE(s.ids()->alerts().empty());
    const auto& rule = s.ids()->alerts().front().rule;
    CHECK((rule == "S1" || rule == "S4"));
    REQUIRE(s.apc().banners().size() == 1);
    CHECK(s.apc().banners()[0].find("SV Cyber-Attack") != std::string::npos);
    CHECK(s.breaker("CB1").breaker().position() == devices::BreakerPosition::closed);
    CHECK(s.attacker_frames_after_mitigation() == 0);
}

TEST_CASE("attacks stop at their end time") {
    auto sc = load("goose_attack");
    sc.attacks[0].end = 2600 * kMillisecond;
    sc.operator_actions.clear();
    sim::Simulation s(std::move(sc), short_run(false));
    s.run();
    // Spoofs at 2.0, 2.25, 2.5 s.
    CHECK(s.attacker_frames().size() == 3);
}
