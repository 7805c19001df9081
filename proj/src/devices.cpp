#include "scs/devices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace scs::devices {

namespace {

constexpr double kPhaseShift = 2.0 * std::numbers::pi / 3.0;

std::int32_t saturate(double v) {
    const double r = std::round(v);
    if (r >= static_cast<double>(std::numeric_limits<std::int32_t>::max())) return std::numeric_limits<std::int32_t>::max();
    if (r <= static_cast<double>(std::numeric_limits<std::int32_t>::min())) return std::numeric_limits<std::int32_t>::min();
    return static_cast<std::int32_t>(r);
}

std::size_t cycle_length_for(std::uint32_t rate, double frequency_hz) {
    const double n = static_cast<double>(rate) / frequency_hz;
    const auto len = static_cast<std::size_t>(std::llround(n));
    if (len < 2 || std::abs(n - static_cast<double>(len)) > 1e-9) {
        throw std::invalid_argument("sample rate must be a whole number of samples per cycle");
    }
    return len;
}

}  // namespace

std::string_view to_string(Health h) {
    switch (h) {
        case Health::normal: return "normal";
        case Health::compromised: return "compromised";
        case Health::isolated: return "isolated";
    }
    return "unknown";
}

void ProtectionSettings::validate() const {
    if (!(oc_pickup_a > 0.0)) throw std::invalid_argument("oc_pickup must be positive");
    if (oc_delay <= 0) throw std::invalid_argument("oc_delay must be positive");
    if (!(diff_min_operate_a > 0.0)) throw std::invalid_argument("diff_min_operate must be positive");
    if (!(diff_slope > 0.0 && diff_slope <= 1.0)) throw std::invalid_argument("diff_slope must lie in (0, 1]");
}

WaveformSource::Point WaveformSource::at(SimTime t, const std::string& source) const {
    Point p;
    for (const auto& step : schedule) {
        if (step.start <= t) p.rms_a = step.rms_a;
    }
    for (const auto& f : faults) {
        if (t < f.start || t >= f.end) continue;
        if (!f.sources.empty() && std::find(f.sources.begin(), f.sources.end(), source) == f.sources.end()) continue;
        p.rms_a *= f.multiplier;
        if (f.invert) p.polarity = -p.polarity;
    }
    return p;
}

void WaveformSource::validate() const {
    if (!(frequency_hz > 0.0)) throw std::invalid_argument("frequency must be positive");
    if (!(voltage_rms_v >= 0.0)) throw std::invalid_argument("voltage must be non-negative");
    if (schedule.empty() || schedule.front().start != 0) {
        throw std::invalid_argument("magnitude schedule must start at time 0");
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].rms_a >= 0.0)) throw std::invalid_argument("magnitudes must be non-negative");
        if (i > 0 && schedule[i].start <= schedule[i - 1].start) {
            throw std::invalid_argument("magnitude schedule must be strictly increasing in time");
        }
    }
    for (const auto& f : faults) {
        if (!(f.multiplier >= 0.0)) throw std::invalid_argument("fault multipliers must be non-negative");
        if (f.end <= f.start) throw std::invalid_argument("fault segment must end after it starts");
    }
}

SimTime sample_time(std::uint64_t k, std::uint32_t sample_rate) {
    const auto seconds = k / sample_rate;
    const auto rem = k % sample_rate;
    return static_cast<SimTime>(seconds) * kSecond + static_cast<SimTime>(rem * 1'000'000'000ULL / sample_rate);
}

codec::SvApdu make_sample(const WaveformSource& waveform, const SvStreamConfig& stream, std::uint64_t k,
                          std::uint32_t sample_rate) {
    codec::SvApdu apdu;
    apdu.sv_id = stream.sv_id;
    apdu.smp_cnt = static_cast<std::uint16_t>(k % sample_rate);
    apdu.conf_rev = stream.conf_rev;
    apdu.smp_synch = codec::SmpSynch::global;

    const auto point = waveform.at(sample_time(k, sample_rate), stream.source);
    // Angle from the sample counter so each cycle holds exactly rate/frequency points.
    const double theta = 2.0 * std::numbers::pi * waveform.frequency_hz * static_cast<double>(k % sample_rate) /
                         static_cast<double>(sample_rate);
    const double i_peak_ma = stream.polarity * point.polarity * std::numbers::sqrt2 * point.rms_a * 1000.0;
    const double v_peak = std::numbers::sqrt2 * waveform.voltage_rms_v * 100.0;
    std::int64_t i_sum = 0;
    std::int64_t v_sum = 0;
    for (std::size_t ph = 0; ph < 3; ++ph) {
        const double angle = theta - kPhaseShift * static_cast<double>(ph);
        const std::int32_t i = saturate(i_peak_ma * std::sin(angle));
        const std::int32_t v = saturate(v_peak * std::sin(angle));
        apdu.samples[ph].value = i;
        apdu.samples[4 + ph].value = v;
        i_sum += i;
        v_sum += v;
    }
    apdu.samples[3].value = saturate(static_cast<double>(i_sum));
    apdu.samples[7].value = saturate(static_cast<double>(v_sum));
    return apdu;
}

double rms_estimate(std::span<const std::int32_t> window_ma) {
    if (window_ma.empty()) {
        throw std::invalid_argument("rms_estimate needs at least one sample");
    }
    double acc = 0.0;
    for (std::int32_t v : window_ma) {
        const double a = static_cast<double>(v);
        acc += a * a;
    }
    return std::sqrt(acc / static_cast<double>(window_ma.size())) / 1000.0;
}

// ---------------------------------------------------------------------------

SampleWindow::SampleWindow(std::size_t cycle_length, std::uint32_t sample_rate)
    : cycle_length_(cycle_length), rate_(sample_rate) {
    if (cycle_length_ == 0 || sample_rate == 0 || cycle_length_ > sample_rate) {
        throw std::invalid_argument("invalid sample window geometry");
    }
    for (auto& ch : ring_) ch.assign(cycle_length_, 0);
}

void SampleWindow::reset() {
    filled_ = 0;
    head_ = 0;
}

std::size_t SampleWindow::slot_of(std::size_t age) const { return (head_ + cycle_length_ - age) % cycle_length_; }

SampleWindow::Push SampleWindow::push(const codec::SvApdu& apdu, SimTime arrival) {
    const std::uint16_t cnt = apdu.smp_cnt;
    auto store = [&](std::size_t slot) {
        for (std::size_t c = 0; c < codec::kSvChannels; ++c) ring_[c][slot] = apdu.samples[c].value;
    };

    if (filled_ > 0) {
        const std::uint32_t delta = (static_cast<std::uint32_t>(cnt) + rate_ - newest_) % rate_;
        if (delta == 1) {
            head_ = (head_ + 1) % cycle_length_;
            store(head_);
            filled_ = std::min(filled_ + 1, cycle_length_);
            newest_ = cnt;
            ++newest_index_;
            return Push::appended;
        }
        const std::uint32_t age = (rate_ - delta) % rate_;
        if (age < filled_) {
            store(slot_of(age));
            return Push::overwritten;
        }
    }

    const bool had_samples = filled_ > 0;
    // Anchor the unwrapped index at the arrival-time estimate with matching residue.
    const auto estimate = static_cast<std::int64_t>(arrival / kSecond) * rate_ +
                          static_cast<std::int64_t>((arrival % kSecond) * static_cast<std::int64_t>(rate_) / kSecond);
    std::int64_t index = estimate - ((estimate - cnt) % rate_ + rate_) % rate_;
    if (estimate - index > static_cast<std::int64_t>(rate_) / 2) index += rate_;
    head_ = 0;
    filled_ = 1;
    store(0);
    newest_ = cnt;
    newest_index_ = index;
    return had_samples ? Push::gap_reset : Push::appended;
}

std::vector<std::int32_t> SampleWindow::channel(std::size_t c) const {
    std::vector<std::int32_t> out(filled_);
    for (std::size_t i = 0; i < filled_; ++i) out[i] = ring_[c][slot_of(filled_ - 1 - i)];
    return out;
}

// ---------------------------------------------------------------------------

OvercurrentElement::OvercurrentElement(ProtectionSettings settings, std::uint32_t sample_rate, double frequency_hz)
    : settings_(settings), rate_(sample_rate), window_(cycle_length_for(sample_rate, frequency_hz), sample_rate) {
    settings_.validate();
}

Evaluation OvercurrentElement::on_sample(const codec::SvApdu& apdu, SimTime arrival) {
    Evaluation ev;
    const auto before = window_.newest_smp_cnt();
    if (window_.push(apdu, arrival) == SampleWindow::Push::gap_reset) {
        picked_up_ = false;
        ev.diagnostic = "smpCnt gap " + std::to_string(before) + " -> " + std::to_string(apdu.smp_cnt) +
                        ", window reset";
        return ev;
    }
    if (!window_.full()) {
        return ev;
    }
    double measured = 0.0;
    for (std::size_t ph = 0; ph < 3; ++ph) {
        const auto ch = window_.channel(ph);
        measured = std::max(measured, rms_estimate(ch));
    }
    const std::int64_t index = window_.newest_index();
    const SimTime now = sample_time(static_cast<std::uint64_t>(std::max<std::int64_t>(index, 0)), rate_);
    if (measured >= settings_.oc_pickup_a) {
        if (!picked_up_) {
            picked_up_ = true;
            pickup_index_ = index;
        }
        const SimTime since = sample_time(static_cast<std::uint64_t>(std::max<std::int64_t>(pickup_index_, 0)), rate_);
        if (!tripped_ && now - since >= settings_.oc_delay) {
            tripped_ = true;
            ev.change = TripDecision{index, now, true, measured};
        }
    } else {
        picked_up_ = false;
        if (tripped_) {
            tripped_ = false;
            ev.change = TripDecision{index, now, false, measured};
        }
    }
    return ev;
}

// ---------------------------------------------------------------------------

DifferentialMeasurement differential_measure(const SampleWindow& a, const SampleWindow& b, std::size_t phase,
                                             const ProtectionSettings& settings) {
    const auto xa = a.channel(phase);
    const auto xb = b.channel(phase);
    if (xa.empty() || xa.size() != xb.size()) {
        throw std::invalid_argument("differential windows must be non-empty and equally filled");
    }
    std::vector<std::int32_t> sum(xa.size());
    for (std::size_t i = 0; i < xa.size(); ++i) {
        const std::int64_t s = static_cast<std::int64_t>(xa[i]) + xb[i];
        sum[i] = static_cast<std::int32_t>(std::clamp<std::int64_t>(s, std::numeric_limits<std::int32_t>::min(),
                                                                    std::numeric_limits<std::int32_t>::max()));
    }
    DifferentialMeasurement m;
    m.operate_a = rms_estimate(sum);
    m.restraint_a = (rms_estimate(xa) + rms_estimate(xb)) / 2.0;
    m.operates = m.operate_a > std::max(settings.diff_min_operate_a, settings.diff_slope * m.restraint_a);
    return m;
}

DifferentialElement::DifferentialElement(ProtectionSettings settings, std::uint32_t sample_rate, double frequency_hz)
    : settings_(settings),
      rate_(sample_rate),
      windows_{SampleWindow(cycle_length_for(sample_rate, frequency_hz), sample_rate),
               SampleWindow(cycle_length_for(sample_rate, frequency_hz), sample_rate)} {
    settings_.validate();
}

Evaluation DifferentialElement::on_sample(std::size_t side, const codec::SvApdu& apdu, SimTime arrival) {
    Evaluation ev;
    auto& w = windows_.at(side);
    const auto before = w.newest_smp_cnt();
    if (w.push(apdu, arrival) == SampleWindow::Push::gap_reset) {
        ev.diagnostic = "stream " + std::to_string(side) + " smpCnt gap " + std::to_string(before) + " -> " +
                        std::to_string(apdu.smp_cnt) + ", window reset";
        return ev;
    }
    const auto& a = windows_[0];
    const auto& b = windows_[1];
    if (a.started() && b.started()) {
        const std::int64_t lag = std::abs(a.newest_index() - b.newest_index());
        const bool lost = lag > static_cast<std::int64_t>(2 * a.cycle_length());
        if (lost && !stream_lost_) {
            ev.diagnostic = "stream loss: streams " + std::to_string(lag) + " samples apart, holding";
        }
        stream_lost_ = lost;
    }
    if (stream_lost_ || !a.full() || !b.full() || a.newest_index() != b.newest_index()) {
        return ev;
    }
    bool operates = false;
    double measured = 0.0;
    for (std::size_t ph = 0; ph < 3; ++ph) {
        const auto m = differential_measure(a, b, ph, settings_);
        operates = operates || m.operates;
        measured = std::max(measured, m.operate_a);
    }
    if (operates != tripped_) {
        tripped_ = operates;
        const std::int64_t index = a.newest_index();
        ev.change = TripDecision{index, sample_time(static_cast<std::uint64_t>(std::max<std::int64_t>(index, 0)), rate_),
                                 operates, measured};
    }
    return ev;
}

// ---------------------------------------------------------------------------

GoosePublisher::GoosePublisher(fabric::Scheduler& scheduler, GooseConfig config, Sink sink,
                               RetransmissionSchedule schedule)
    : scheduler_(scheduler), config_(std::move(config)), sink_(std::move(sink)), schedule_(std::move(schedule)) {
    if (schedule_.heartbeat <= 0) throw std::invalid_argument("heartbeat must be positive");
}

void GoosePublisher::start() {
    if (running_) return;
    running_ = true;
    if (st_num_ == 0) {
        st_num_ = 1;
        sq_num_ = 0;
        change_time_ = scheduler_.now();
    } else {
        ++sq_num_;
    }
    ++generation_;
    send_and_schedule(schedule_.burst.size());
}

void GoosePublisher::stop() {
    running_ = false;
    ++generation_;
}

bool GoosePublisher::publish(bool value) {
    if (value == value_) return false;
    value_ = value;
    ++st_num_;
    sq_num_ = 0;
    change_time_ = scheduler_.now();
    if (!running_) return true;
    ++generation_;
    send_and_schedule(0);
    return true;
}

void GoosePublisher::send_and_schedule(std::size_t burst_step) {
    const SimTime interval = burst_step < schedule_.burst.size() ? schedule_.burst[burst_step] : schedule_.heartbeat;
    codec::GooseApdu apdu;
    apdu.gocb_ref = config_.gocb_ref;
    apdu.time_allowed_to_live_ms = static_cast<std::uint32_t>(2 * interval / kMillisecond);
    apdu.dat_set = config_.dat_set;
    apdu.go_id = config_.go_id;
    apdu.timestamp_ns = codec::quantize_utc_ns(static_cast<std::uint64_t>(change_time_));
    apdu.st_num = st_num_;
    apdu.sq_num = sq_num_;
    apdu.conf_rev = config_.conf_rev;
    apdu.num_dat_set_entries = 1;
    apdu.all_data = {value_};
    sink_(apdu);

    const std::uint64_t gen = generation_;
    const std::size_t next_step = std::min(burst_step + 1, schedule_.burst.size());
    scheduler_.after(interval, [this, gen, next_step] {
        if (gen != generation_ || !running_) return;
        ++sq_num_;
        send_and_schedule(next_step);
    });
}

// ---------------------------------------------------------------------------

std::string_view to_string(BreakerPosition p) { return p == BreakerPosition::closed ? "closed" : "open"; }

std::string_view to_string(CircuitBreaker::Outcome o) {
    switch (o) {
        case CircuitBreaker::Outcome::opened: return "opened";
        case CircuitBreaker::Outcome::already_open: return "already_open";
        case CircuitBreaker::Outcome::no_trip: return "no_trip";
        case CircuitBreaker::Outcome::test_ignored: return "test_ignored";
        case CircuitBreaker::Outcome::unsubscribed: return "unsubscribed";
    }
    return "unknown";
}

CircuitBreaker::CircuitBreaker(std::set<std::string> subscribed_go_ids) : subscribed_(std::move(subscribed_go_ids)) {}

CircuitBreaker::Outcome CircuitBreaker::on_goose(const codec::GooseApdu& apdu, SimTime now) {
    if (!subscribed_.count(apdu.go_id)) return Outcome::unsubscribed;
    if (apdu.test) return Outcome::test_ignored;
    if (apdu.all_data.empty() || !apdu.all_data.front()) return Outcome::no_trip;
    if (position_ == BreakerPosition::open) return Outcome::already_open;
    position_ = BreakerPosition::open;
    last_trip_time_ = now;
    tripped_by_ = apdu.go_id;
    return Outcome::opened;
}

void CircuitBreaker::close() { position_ = BreakerPosition::closed; }

}  // namespace scs::devices
