#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "scs/devices.hpp"

using namespace scs;
using namespace scs::devices;

namespace {

constexpr std::uint32_t kRate = 4800;
constexpr SimTime kTransit = 50 * kMicrosecond;

SvStreamConfig stream(const std::string& id, const std::string& source, double polarity = 1.0) {
    SvStreamConfig s;
    s.sv_id = id;
    s.source = source;
    s.polarity = polarity;
    s.dst = codec::MacAddress::parse("01:0c:cd:04:00:01");
    return s;
}

WaveformSource steady(double rms_a) {
    WaveformSource w;
    w.schedule = {{0, rms_a}};
    return w;
}

// Feeds samples [from, to) to an overcurrent element; returns the first change.
std::optional<TripDecision> run_oc(OvercurrentElement& oc, const WaveformSource& w, std::uint64_t from,
                                   std::uint64_t to) {
    const auto s = stream("feeder", "feeder");
    for (std::uint64_t k = from; k < to; ++k) {
        auto ev = oc.on_sample(make_sample(w, s, k, kRate), sample_time(k, kRate) + kTransit);
        if (ev.change) return ev.change;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("one virtual second of samples carries smpCnt 0..4799") {
    const auto w = steady(1000);
    const auto s = stream("a", "feeder");
    for (std::uint64_t k = 0; k < kRate; ++k) {
        REQUIRE(make_sample(w, s, k, kRate).smp_cnt == k);
    }
    CHECK(make_sample(w, s, kRate, kRate).smp_cnt == 0);
    CHECK(sample_time(kRate, kRate) == kSecond);
    CHECK(sample_time(1, kRate) == 208'333);
    CHECK(sample_time(3, kRate) == 625'000);
}

TEST_CASE("zero magnitude gives zero samples") {
    auto w = steady(0);
    w.voltage_rms_v = 0;
    for (std::uint64_t k = 0; k < 200; ++k) {
        for (const auto& smp : make_sample(w, stream("a", "feeder"), k, kRate).samples) REQUIRE(smp.value == 0);
    }
}

TEST_CASE("1000 A RMS peaks at sqrt(2) * 1e6 mA") {
    const auto w = steady(1000);
    std::int32_t peak = 0;
    for (std::uint64_t k = 0; k < 80; ++k) {
        peak = std::max(peak, make_sample(w, stream("a", "feeder"), k, kRate).samples[0].value);
    }
    CHECK(std::abs(peak - 1'414'214) <= 1);
}

TEST_CASE("neutral channel is the sum of the phases") {
    const auto w = steady(1234);
    for (std::uint64_t k = 0; k < 80; ++k) {
        const auto a = make_sample(w, stream("a", "feeder"), k, kRate);
        CHECK(a.samples[3].value == a.samples[0].value + a.samples[1].value + a.samples[2].value);
    }
}

TEST_CASE("fault segments scale or invert only the listed sources") {
    WaveformSource w = steady(1000);
    w.faults.push_back({kSecond, 2 * kSecond, 5.0, {"feeder"}, false});
    w.faults.push_back({kSecond, 2 * kSecond, 1.0, {"xfmr_lv"}, true});
    CHECK(w.at(kSecond / 2, "feeder").rms_a == 1000);
    CHECK(w.at(kSecond, "feeder").rms_a == 5000);
    CHECK(w.at(kSecond, "xfmr_hv").rms_a == 1000);
    CHECK(w.at(kSecond, "xfmr_lv").polarity == -1.0);
    CHECK(w.at(2 * kSecond, "feeder").rms_a == 1000);
    w.faults.push_back({0, 0, 2.0, {}, false});
    CHECK_THROWS(w.validate());
}

TEST_CASE("rms_estimate") {
    SUBCASE("zeros") {
        std::vector<std::int32_t> z(80, 0);
        CHECK(rms_estimate(z) == 0.0);
    }
    SUBCASE("sinusoid of amplitude sqrt(2)*X has RMS X") {
        for (double x : {1.0, 250.0, 1000.0, 20000.0}) {
            std::vector<std::int32_t> v(80);
            for (int k = 0; k < 80; ++k) {
                v[k] = static_cast<std::int32_t>(std::lround(std::sqrt(2.0) * x * 1000.0 * std::sin(2 * M_PI * k / 80.0 + 0.3)));
            }
            CHECK(rms_estimate(v) == doctest::Approx(x).epsilon(0.001));
        }
    }
    SUBCASE("random windows match the direct formula") {
        std::mt19937_64 rng(77);
        std::uniform_int_distribution<std::int32_t> dist(-2'000'000'000, 2'000'000'000);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<std::int32_t> v(80);
            for (auto& x : v) x = dist(rng);
            long double sq = 0;
            for (auto x : v) sq += static_cast<long double>(x) * x;
            const double oracle = static_cast<double>(std::sqrt(sq / 80.0L) / 1000.0L);
            CHECK(std::abs(rms_estimate(v) - oracle) <= 1e-9 * oracle);
        }
    }
    CHECK_THROWS(rms_estimate({}));
}

TEST_CASE("sample window ordering rules") {
    SampleWindow win(4, kRate);
    codec::SvApdu a;
    auto push = [&](std::uint16_t cnt, std::int32_t v) {
        a.smp_cnt = cnt;
        a.samples[0].value = v;
        return win.push(a, sample_time(cnt, kRate) + kTransit);
    };
    CHECK(push(10, 1) == SampleWindow::Push::appended);
    CHECK(win.newest_index() == 10);
    CHECK(push(11, 2) == SampleWindow::Push::appended);
    CHECK(push(12, 3) == SampleWindow::Push::appended);
    CHECK_FALSE(win.full());
    CHECK(push(13, 4) == SampleWindow::Push::appended);
    CHECK(win.full());
    CHECK(push(12, 30) == SampleWindow::Push::overwritten);  // last writer wins
    CHECK(win.channel(0) == std::vector<std::int32_t>{1, 2, 30, 4});
    CHECK(push(14, 5) == SampleWindow::Push::appended);
    CHECK(win.channel(0) == std::vector<std::int32_t>{2, 30, 4, 5});
    CHECK(push(20, 6) == SampleWindow::Push::gap_reset);
    CHECK(win.size() == 1);
    CHECK(win.newest_index() == 20);

    SUBCASE("wrap at the sample rate keeps the unwrapped index growing") {
        SampleWindow w2(4, kRate);
        codec::SvApdu b;
        b.smp_cnt = 4799;
        w2.push(b, sample_time(4799, kRate) + kTransit);
        b.smp_cnt = 0;
        CHECK(w2.push(b, sample_time(4800, kRate) + kTransit) == SampleWindow::Push::appended);
        CHECK(w2.newest_index() == 4800);
    }
    SUBCASE("anchor uses the arrival second") {
        SampleWindow w3(4, kRate);
        codec::SvApdu b;
        b.smp_cnt = 5;
        w3.push(b, 3 * kSecond + sample_time(5, kRate) + kTransit);
        CHECK(w3.newest_index() == 3 * 4800 + 5);
    }
}

TEST_CASE("overcurrent: below pickup never trips") {
    OvercurrentElement oc(ProtectionSettings{}, kRate, 60);
    CHECK_FALSE(run_oc(oc, steady(1000), 0, 3 * kRate));  // 0.5x pickup
    CHECK_FALSE(oc.tripped());
}

TEST_CASE("overcurrent: step to 5x pickup trips after the delay plus at most one cycle") {
    const ProtectionSettings settings;
    OvercurrentElement oc(settings, kRate, 60);
    WaveformSource w = steady(1000);
    const SimTime step = kSecond / 2;
    w.faults.push_back({step, 10 * kSecond, 10.0, {}, false});  // 10 kA = 5x pickup
    const auto trip = run_oc(oc, w, 0, 2 * kRate);
    REQUIRE(trip);
    CHECK(trip->trip);
    const SimTime latency = trip->sample_time - step;
    CHECK(latency >= settings.oc_delay);
    CHECK(latency <= settings.oc_delay + kSecond / 60);
    CHECK(trip->measured_a > settings.oc_pickup_a);
}

TEST_CASE("overcurrent: pickup shorter than the delay resets the timer") {
    OvercurrentElement oc(ProtectionSettings{}, kRate, 60);
    WaveformSource w = steady(1000);
    w.faults.push_back({kSecond / 2, kSecond / 2 + 50 * kMillisecond, 10.0, {}, false});
    CHECK_FALSE(run_oc(oc, w, 0, 2 * kRate));
}

TEST_CASE("overcurrent: smpCnt gap resets the window with a diagnostic") {
    OvercurrentElement oc(ProtectionSettings{}, kRate, 60);
    const auto w = steady(10000);
    const auto s = stream("feeder", "feeder");
    for (std::uint64_t k = 0; k < 100; ++k) oc.on_sample(make_sample(w, s, k, kRate), sample_time(k, kRate) + kTransit);
    CHECK(oc.window().full());
    auto ev = oc.on_sample(make_sample(w, s, 105, kRate), sample_time(105, kRate) + kTransit);
    CHECK(ev.diagnostic);
    CHECK_FALSE(ev.change);
    CHECK(oc.window().size() == 1);
}

namespace {

struct DiffRun {
    std::optional<TripDecision> first_trip;
    std::vector<std::string> diagnostics;
};

DiffRun run_diff(DifferentialElement& d, const WaveformSource& w, std::uint64_t from, std::uint64_t to,
                 bool feed_b = true) {
    const auto hv = stream("hv", "xfmr_hv");
    const auto lv = stream("lv", "xfmr_lv", -1.0);
    DiffRun r;
    for (std::uint64_t k = from; k < to; ++k) {
        const SimTime t = sample_time(k, kRate) + kTransit;
        for (std::size_t side = 0; side < (feed_b ? 2u : 1u); ++side) {
            auto ev = d.on_sample(side, make_sample(w, side == 0 ? hv : lv, k, kRate), t);
            if (ev.diagnostic) r.diagnostics.push_back(*ev.diagnostic);
            if (ev.change && ev.change->trip && !r.first_trip) r.first_trip = ev.change;
        }
    }
    return r;
}

}  // namespace

TEST_CASE("differential: through load does not operate") {
    DifferentialElement d(ProtectionSettings{}, kRate, 60);
    CHECK_FALSE(run_diff(d, steady(1000), 0, kRate).first_trip);

    SampleWindow a(80, kRate), b(80, kRate);
    const auto w = steady(1000);
    for (std::uint64_t k = 0; k < 80; ++k) {
        a.push(make_sample(w, stream("hv", "xfmr_hv"), k, kRate), sample_time(k, kRate));
        b.push(make_sample(w, stream("lv", "xfmr_lv", -1.0), k, kRate), sample_time(k, kRate));
    }
    const auto m = differential_measure(a, b, 0, ProtectionSettings{});
    CHECK(m.operate_a == doctest::Approx(0.0));
    CHECK(m.restraint_a == doctest::Approx(1000.0).epsilon(0.001));
}

TEST_CASE("differential: internal fault with one polarity flipped gives I_op = 2 RMS and trips") {
    WaveformSource w = steady(1000);
    w.faults.push_back({kSecond / 2, 10 * kSecond, 1.0, {"xfmr_lv"}, true});
    DifferentialElement d(ProtectionSettings{}, kRate, 60);
    const auto r = run_diff(d, w, 0, kRate);
    REQUIRE(r.first_trip);
    CHECK(r.first_trip->sample_time >= kSecond / 2);
    CHECK(r.first_trip->sample_time <= kSecond / 2 + kSecond / 60);

    SampleWindow a(80, kRate), b(80, kRate);
    for (std::uint64_t k = 2400; k < 2480; ++k) {
        a.push(make_sample(w, stream("hv", "xfmr_hv"), k, kRate), sample_time(k, kRate));
        b.push(make_sample(w, stream("lv", "xfmr_lv", -1.0), k, kRate), sample_time(k, kRate));
    }
    const auto m = differential_measure(a, b, 1, ProtectionSettings{});
    CHECK(m.operate_a == doctest::Approx(2000.0).epsilon(0.001));
    CHECK(m.operates);
}

TEST_CASE("differential: both streams zero never operates") {
    DifferentialElement d(ProtectionSettings{}, kRate, 60);
    CHECK_FALSE(run_diff(d, steady(0), 0, kRate / 4).first_trip);
}

TEST_CASE("differential: one stream silent for more than two cycles declares stream loss") {
    WaveformSource w = steady(1000);
    w.faults.push_back({kSecond / 4, 10 * kSecond, 1.0, {"xfmr_lv"}, true});
    DifferentialElement d(ProtectionSettings{}, kRate, 60);
    run_diff(d, steady(1000), 0, 100);
    const auto r = run_diff(d, w, 100, kRate, false);
    CHECK(d.stream_lost());
    CHECK(r.diagnostics.size() == 1);
    CHECK_FALSE(r.first_trip);
}

TEST_CASE("settings validation") {
    ProtectionSettings s;
    CHECK_NOTHROW(s.validate());
    s.diff_slope = 1.5;
    CHECK_THROWS(s.validate());
    s = {};
    s.oc_pickup_a = 0;
    CHECK_THROWS(s.validate());
}

namespace {

struct PublisherRig {
    fabric::Scheduler sched;
    std::vector<std::pair<SimTime, codec::GooseApdu>> sent;
    GoosePublisher pub;

    PublisherRig()
        : pub(sched, GooseConfig{"IED/LLN0$GO$gcb", "IED/LLN0$ds", "IED_GO", 1, {}, 1},
              [this](const codec::GooseApdu& a) { sent.emplace_back(sched.now(), a); }) {}
};

}  // namespace

TEST_CASE("publisher heartbeats at a constant stNum without state change") {
    PublisherRig rig;
    rig.pub.start();
    rig.sched.run_until(5 * kSecond);
    REQUIRE(rig.sent.size() == 6);  // initial frame plus five heartbeats
    for (std::size_t i = 0; i < rig.sent.size(); ++i) {
        CHECK(rig.sent[i].first == static_cast<SimTime>(i) * kSecond);
        CHECK(rig.sent[i].second.st_num == 1);
        CHECK(rig.sent[i].second.sq_num == i);
        CHECK(rig.sent[i].second.time_allowed_to_live_ms == 2000);
    }
}

TEST_CASE("publisher burst follows 2, 4, 8, 16 ms then the heartbeat") {
    PublisherRig rig;
    rig.pub.start();
    rig.sched.run_until(kSecond / 2);
    rig.sched.at(kSecond / 2, [&] { rig.pub.publish(true); });
    rig.sched.run_until(3 * kSecond);
    std::vector<SimTime> times;
    std::vector<std::uint32_t> tal;
    for (const auto& [t, a] : rig.sent) {
        if (a.st_num == 2) {
            times.push_back(t);
            tal.push_back(a.time_allowed_to_live_ms);
            CHECK(a.all_data == std::vector<bool>{true});
        }
    }
    REQUIRE(times.size() >= 6);
    std::vector<SimTime> gaps;
    for (std::size_t i = 1; i < 6; ++i) gaps.push_back((times[i] - times[i - 1]) / kMillisecond);
    CHECK(gaps == std::vector<SimTime>{2, 4, 8, 16, 1000});
    CHECK(std::vector<std::uint32_t>(tal.begin(), tal.begin() + 5) == std::vector<std::uint32_t>{4, 8, 16, 32, 2000});
}

TEST_CASE("two changes 1 ms apart bump stNum twice and reset sqNum each time") {
    PublisherRig rig;
    rig.pub.start();
    rig.sched.at(kSecond / 2, [&] { rig.pub.publish(true); });
    rig.sched.at(kSecond / 2 + kMillisecond, [&] { rig.pub.publish(false); });
    rig.sched.run_until(kSecond / 2 + 40 * kMillisecond);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (const auto& [t, a] : rig.sent) pairs.emplace_back(a.st_num, a.sq_num);
    CHECK(pairs.at(1) == std::make_pair(2u, 0u));
    CHECK(pairs.at(2) == std::make_pair(3u, 0u));
    CHECK(pairs.back().first == 3);
    CHECK_FALSE(rig.pub.publish(false));  // unchanged value
}

TEST_CASE("publisher (stNum, sqNum) pairs are nondecreasing under random changes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PublisherRig rig;
        std::mt19937_64 rng(seed);
        rig.pub.start();
        for (int i = 0; i < 30; ++i) {
            const SimTime at = static_cast<SimTime>(rng() % (5 * kSecond));
            const bool v = rng() & 1;
            rig.sched.at(at, [&rig, v] { rig.pub.publish(v); });
        }
        rig.sched.run_until(6 * kSecond);
        for (std::size_t i = 1; i < rig.sent.size(); ++i) {
            const auto& p = rig.sent[i - 1].second;
            const auto& c = rig.sent[i].second;
            REQUIRE(std::make_pair(p.st_num, p.sq_num) < std::make_pair(c.st_num, c.sq_num));
            if (c.st_num != p.st_num) REQUIRE(c.sq_num == 0);
        }
    }
}

TEST_CASE("stopped publisher emits nothing") {
    PublisherRig rig;
    rig.pub.start();
    rig.sched.at(kSecond / 2, [&] { rig.pub.stop(); });
    rig.sched.run_until(4 * kSecond);
    CHECK(rig.sent.size() == 1);
}

TEST_CASE("breaker reacts only to subscribed, non-test trips") {
    CircuitBreaker cb({"PIED_OC_GO", "CIED_OC_GO"});
    codec::GooseApdu a;
    a.go_id = "PIED_OC_GO";
    a.num_dat_set_entries = 1;
    a.all_data = {false};
    CHECK(cb.on_goose(a, 10) == CircuitBreaker::Outcome::no_trip);
    a.all_data = {true};
    a.test = true;
    CHECK(cb.on_goose(a, 20) == CircuitBreaker::Outcome::test_ignored);
    CHECK(cb.position() == BreakerPosition::closed);
    a.test = false;
    a.go_id = "ROGUE";
    CHECK(cb.on_goose(a, 30) == CircuitBreaker::Outcome::unsubscribed);
    CHECK(cb.position() == BreakerPosition::closed);
    a.go_id = "CIED_OC_GO";
    CHECK(cb.on_goose(a, 40) == CircuitBreaker::Outcome::opened);
    CHECK(cb.position() == BreakerPosition::open);
    CHECK(cb.last_trip_time() == 40);
    CHECK(cb.tripped_by() == "CIED_OC_GO");
    CHECK(cb.on_goose(a, 50) == CircuitBreaker::Outcome::already_open);
    cb.close();
    CHECK(cb.position() == BreakerPosition::closed);
}
