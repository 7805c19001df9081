#include <map>

#include "doctest.h"
#include "scs/fabric.hpp"

using namespace scs;
using namespace scs::fabric;
using codec::MacAddress;

namespace {

struct Recorder : Endpoint {
    std::vector<Delivery> got;
    void on_frame(const Delivery& d) override { got.push_back(d); }
};

FramePtr make_frame(const MacAddress& src, std::uint16_t ethertype = 0x0800) {
    codec::Bytes b(60, 0);
    const auto dst = MacAddress::parse("01:0c:cd:01:00:01");
    std::copy(dst.octets.begin(), dst.octets.end(), b.begin());
    std::copy(src.octets.begin(), src.octets.end(), b.begin() + 6);
    b[12] = static_cast<std::uint8_t>(ethertype >> 8);
    b[13] = static_cast<std::uint8_t>(ethertype);
    return std::make_shared<const codec::Bytes>(std::move(b));
}

MacAddress mac(int i) { return MacAddress::parse("00:00:00:00:00:0" + std::to_string(i)); }

// One switch, ports 1..n, one recording host per port.
struct Rig {
    Scheduler sched;
    EventLog log;
    Fabric fabric;
    std::uint16_t sw;
    std::vector<std::unique_ptr<Recorder>> hosts;
    std::vector<HostPortHandle> handles;

    explicit Rig(int n, std::uint64_t seed = 1) : fabric(sched, log, LatencyConfig{}, seed) {
        sw = fabric.add_switch("s1");
        for (int i = 1; i <= n; ++i) {
            fabric.add_port({sw, static_cast<std::uint16_t>(i)});
            hosts.push_back(std::make_unique<Recorder>());
            const auto h = fabric.add_host("h" + std::to_string(i), hosts.back().get());
            handles.push_back(fabric.attach(h, "eth0", {sw, static_cast<std::uint16_t>(i)}, mac(i)));
        }
    }

    std::size_t count(int host) const { return hosts.at(host - 1)->got.size(); }
    PortId port(int i) const { return {sw, static_cast<std::uint16_t>(i)}; }
};

FlowRule rule(std::uint16_t prio, std::uint64_t cookie, PrimaryAction primary) {
    FlowRule r;
    r.priority = prio;
    r.cookie = cookie;
    r.action.primary = primary;
    return r;
}

codec::HeaderView header_of(const FramePtr& f) {
    codec::HeaderView h;
    codec::peek_header(*f, h);
    return h;
}

}  // namespace

TEST_CASE("scheduler orders by time then insertion") {
    Scheduler s;
    std::vector<int> order;
    s.at(5, [&] { order.push_back(2); });
    s.at(1, [&] { order.push_back(0); });
    s.at(5, [&] { order.push_back(3); });
    s.at(3, [&] {
        order.push_back(1);
        s.at(5, [&] { order.push_back(4); });
    });
    s.at(9, [&] { order.push_back(9); });
    s.run_until(5);
    CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(s.now() == 5);
    CHECK_FALSE(s.empty());
}

TEST_CASE("match_frame semantics") {
    FlowTable table;
    const auto f = make_frame(mac(1));
    SUBCASE("empty table falls back to default flood") { CHECK(match_frame(table, {0, 1}, *f) == nullptr); }
    SUBCASE("higher priority wins") {
        table.insert(rule(50, 1, PrimaryAction::forward));
        table.insert(rule(100, 2, PrimaryAction::drop));
        REQUIRE(match_frame(table, {0, 1}, *f) != nullptr);
        CHECK(match_frame(table, {0, 1}, *f)->action.primary == PrimaryAction::drop);
    }
    SUBCASE("equal priority breaks ties by lowest cookie") {
        table.insert(rule(10, 7, PrimaryAction::drop));
        table.insert(rule(10, 3, PrimaryAction::forward));
        CHECK(match_frame(table, {0, 1}, *f)->cookie == 3);
    }
    SUBCASE("match fields") {
        auto r = rule(10, 1, PrimaryAction::drop);
        r.match.src_mac = mac(2);
        table.insert(r);
        CHECK(match_frame(table, {0, 1}, *f) == nullptr);
        CHECK(match_frame(table, {0, 1}, *make_frame(mac(2))) != nullptr);
        auto r2 = rule(20, 2, PrimaryAction::drop);
        r2.match.ingress_port = 4;
        r2.match.ethertype = 0x0800;
        table.insert(r2);
        CHECK(match_frame(table, {0, 4}, *f)->cookie == 2);
        CHECK(match_frame(table, {0, 3}, *f) == nullptr);
        auto r3 = rule(30, 3, PrimaryAction::drop);
        r3.match.appid = 0x10;
        table.insert(r3);
        CHECK(table.match(4, header_of(f))->cookie == 2);  // appid rule needs a 61850 frame
    }
    SUBCASE("duplicate cookie is rejected") {
        CHECK(table.insert(rule(10, 1, PrimaryAction::drop)));
        CHECK_FALSE(table.insert(rule(99, 1, PrimaryAction::forward)));
        CHECK(table.rules().size() == 1);
    }
}

TEST_CASE("default flood reaches every other enabled port exactly once") {
    Rig rig(3);
    rig.fabric.transmit(rig.handles[0], make_frame(mac(1)));
    rig.sched.run_until(kSecond);
    CHECK(rig.count(1) == 0);
    CHECK(rig.count(2) == 1);
    CHECK(rig.count(3) == 1);
    for (const auto& h : rig.hosts) {
        for (const auto& d : h->got) {
            CHECK(d.time >= 40 * kMicrosecond);
            CHECK(d.time <= 160 * kMicrosecond);
        }
    }
}

TEST_CASE("disabled ingress drops silently with a log record") {
    Rig rig(3);
    rig.fabric.set_port_state(rig.port(1), AdminState::disabled);
    rig.fabric.transmit(rig.handles[0], make_frame(mac(1)));
    rig.sched.run_until(kSecond);
    CHECK(rig.count(2) + rig.count(3) == 0);
    bool found = false;
    for (const auto* r : rig.log.of_kind(EventKind::frame_rx)) {
        if (r->detail.value("disposition", "") == "dropped_admin_down") found = true;
    }
    CHECK(found);
}

TEST_CASE("disabled egress port receives nothing; re-enabling resumes traffic") {
    Rig rig(3);
    rig.fabric.set_port_state(rig.port(3), AdminState::disabled);
    rig.fabric.transmit(rig.handles[0], make_frame(mac(1)));
    rig.sched.run_until(kMillisecond);
    CHECK(rig.count(3) == 0);
    CHECK(rig.count(2) == 1);
    rig.fabric.set_port_state(rig.port(3), AdminState::enabled);
    rig.fabric.transmit(rig.handles[0], make_frame(mac(1)));
    rig.sched.run_until(2 * kMillisecond);
    CHECK(rig.count(3) == 1);
}

TEST_CASE("enabling an enabled port logs a single no-op record") {
    Rig rig(2);
    rig.fabric.set_port_state(rig.port(1), AdminState::enabled);
    const auto changes = rig.log.of_kind(EventKind::port_change);
    REQUIRE(changes.size() == 1);
    CHECK(changes[0]->detail["noop"] == true);
}

TEST_CASE("drop rule yields zero egress and one rule_hit record") {
    Rig rig(3);
    auto r = rule(100, 42, PrimaryAction::drop);
    r.match.src_mac = mac(1);
    CHECK(rig.fabric.install_rule(rig.sw, r));
    rig.fabric.transmit(rig.handles[0], make_frame(mac(1)));
    rig.fabric.transmit(rig.handles[1], make_frame(mac(2)));
    rig.sched.run_until(kSecond);
    CHECK(rig.count(2) == 0);
    CHECK(rig.count(3) == 1);  // only host 2's frame
    int hits = 0;
    for (const auto* rec : rig.log.of_kind(EventKind::frame_rx)) {
        if (rec->detail.value("disposition", "") == "rule_hit") {
            ++hits;
            CHECK(rec->detail["cookie"] == 42);
        }
    }
    CHECK(hits == 1);
}

TEST_CASE("install/remove are inverse and duplicate cookies are refused") {
    Rig rig(3);
    const FlowTable before = rig.fabric.table(rig.sw);
    auto r = rule(10, 5, PrimaryAction::drop);
    CHECK(rig.fabric.install_rule(rig.sw, r));
    CHECK_FALSE(rig.fabric.install_rule(rig.sw, rule(20, 5, PrimaryAction::forward)));
    CHECK(rig.fabric.table(rig.sw).rules().size() == 1);
    rig.fabric.remove_rule(rig.sw, 5);
    CHECK(rig.fabric.table(rig.sw) == before);
    rig.fabric.remove_rule(rig.sw, 999);  // unknown: warning record only
    const auto updates = rig.log.of_kind(EventKind::rule_update);
    REQUIRE(updates.size() == 4);
    CHECK(updates[1]->detail["result"] == "duplicate_cookie");
    CHECK(updates[3]->detail["result"] == "unknown_cookie");
    CHECK(updates[3]->level == LogLevel::warn);
}

TEST_CASE("forward action and mirror copies") {
    Scheduler sched;
    EventLog log;
    Fabric fabric(sched, log, {}, 3);
    const auto sw = fabric.add_switch("s");
    fabric.add_port({sw, 1});
    fabric.add_port({sw, 2});
    fabric.add_port({sw, 3});
    fabric.add_port({sw, 9}, true);
    Recorder a, b, c, ids;
    fabric.attach(fabric.add_host("a", &a), "p", {sw, 1}, mac(1));
    fabric.attach(fabric.add_host("b", &b), "p", {sw, 2}, mac(2));
    fabric.attach(fabric.add_host("c", &c), "p", {sw, 3}, mac(3));
    fabric.attach(fabric.add_host("ids", &ids), "p", {sw, 9}, mac(9));

    SUBCASE("monitor port is excluded from flood") {
        fabric.submit_frame({sw, 1}, make_frame(mac(1)), 0);
        sched.run_until(kSecond);
        CHECK(b.got.size() == 1);
        CHECK(c.got.size() == 1);
        CHECK(ids.got.empty());
    }
    SUBCASE("mirror plus forward") {
        auto r = rule(10, 1, PrimaryAction::forward);
        r.action.out_ports = {3};
        r.action.mirror = 9;
        fabric.install_rule(sw, r);
        const auto f = make_frame(mac(1));
        fabric.submit_frame({sw, 1}, f, 0);
        sched.run_until(kSecond);
        CHECK(b.got.empty());
        REQUIRE(c.got.size() == 1);
        REQUIRE(ids.got.size() == 1);
        CHECK(ids.got[0].mirrored);
        CHECK(*ids.got[0].frame == *f);
        CHECK(ids.got[0].switch_ingress == PortId{sw, 1});
        CHECK_FALSE(c.got[0].mirrored);
    }
    SUBCASE("mirror plus drop keeps the monitor copy only") {
        auto r = rule(10, 1, PrimaryAction::drop);
        r.action.mirror = 9;
        fabric.install_rule(sw, r);
        fabric.submit_frame({sw, 1}, make_frame(mac(1)), 0);
        sched.run_until(kSecond);
        CHECK(b.got.empty());
        CHECK(c.got.empty());
        CHECK(ids.got.size() == 1);
    }
}

TEST_CASE("trunk carries frames between switches") {
    Scheduler sched;
    EventLog log;
    Fabric fabric(sched, log, {}, 5);
    const auto s1 = fabric.add_switch("pb");
    const auto s2 = fabric.add_switch("sb");
    for (std::uint16_t i : {1, 2, 7}) fabric.add_port({s1, i});
    for (std::uint16_t i : {1, 7}) fabric.add_port({s2, i});
    fabric.add_trunk({s1, 7}, {s2, 7});
    Recorder a, b, far;
    const auto ha = fabric.attach(fabric.add_host("a", &a), "p", {s1, 1}, mac(1));
    fabric.attach(fabric.add_host("b", &b), "p", {s1, 2}, mac(2));
    fabric.attach(fabric.add_host("far", &far), "p", {s2, 1}, mac(3));
    fabric.transmit(ha, make_frame(mac(1)));
    sched.run_until(kSecond);
    REQUIRE(far.got.size() == 1);
    CHECK(far.got[0].switch_ingress == PortId{s2, 7});
    CHECK(fabric.capture(s1).size() == 1);
    CHECK(fabric.capture(s2).size() == 1);
    CHECK(fabric.merged_capture().size() == 2);
    CHECK(far.got[0].time >= 3 * 20 * kMicrosecond);
}

TEST_CASE("property: flood correctness and determinism over random traffic") {
    auto run = [](std::uint64_t seed) {
        Rig rig(5, seed);
        std::mt19937_64 rng(seed);
        std::map<int, int> sent;
        for (int i = 0; i < 200; ++i) {
            const int from = 1 + static_cast<int>(rng() % 5);
            ++sent[from];
            rig.sched.at(static_cast<SimTime>(rng() % kSecond), [&rig, from] {
                rig.fabric.transmit(rig.handles[from - 1], make_frame(mac(from)));
            });
        }
        rig.sched.run_until(2 * kSecond);
        for (int h = 1; h <= 5; ++h) {
            CHECK(rig.count(h) == static_cast<std::size_t>(200 - sent[h]));
        }
        std::vector<SimTime> times;
        for (const auto& h : rig.hosts)
            for (const auto& d : h->got) times.push_back(d.time);
        return times;
    };
    CHECK(run(11) == run(11));
    CHECK(run(11) != run(12));
}
