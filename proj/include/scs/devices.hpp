#pragma once

// Substation device logic: waveform source and merging unit, the sample window that
// aligns SV streams by smpCnt, overcurrent (50/51) and differential (87) elements,
// the GOOSE publisher with its retransmission schedule, and the circuit breaker.
// Everything here is independent of the fabric except the publisher, which uses
// the scheduler for its timers.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "scs/codec.hpp"
#include "scs/event_log.hpp"
#include "scs/fabric.hpp"

namespace scs::devices {

inline constexpr std::uint32_t kDefaultSampleRate = 4800;
inline constexpr double kDefaultFrequency = 60.0;

enum class Health { normal, compromised, isolated };
std::string_view to_string(Health h);

struct ProtectionSettings {
    double oc_pickup_a = 2000.0;
    SimTime oc_delay = 100 * kMillisecond;
    double diff_min_operate_a = 200.0;
    double diff_slope = 0.3;

    void validate() const;  // throws std::invalid_argument
    bool operator==(const ProtectionSettings&) const = default;
};

// Piecewise-constant RMS current; each step holds until the next one starts.
struct MagnitudeStep {
    SimTime start = 0;
    double rms_a = 0.0;
    bool operator==(const MagnitudeStep&) const = default;
};

// Multiplies the current of the listed sources (all sources when empty) over
// [start, end). `invert` flips the measured polarity, which is how an internal
// transformer fault shows up to a differential element.
struct FaultSegment {
    SimTime start = 0;
    SimTime end = 0;
    double multiplier = 1.0;
    std::vector<std::string> sources;
    bool invert = false;
    bool operator==(const FaultSegment&) const = default;
};

struct WaveformSource {
    double frequency_hz = kDefaultFrequency;
    double voltage_rms_v = 38'105.0;
    std::vector<MagnitudeStep> schedule{{0, 1000.0}};
    std::vector<FaultSegment> faults;

    struct Point {
        double rms_a = 0.0;
        double polarity = 1.0;
    };
    Point at(SimTime t, const std::string& source) const;

    void validate() const;  // throws std::invalid_argument
    bool operator==(const WaveformSource&) const = default;
};

struct SvStreamConfig {
    std::string sv_id;
    std::uint16_t appid = 0x4000;
    codec::MacAddress dst;
    std::uint32_t conf_rev = 1;
    std::string source;     // waveform source this stream measures
    double polarity = 1.0;  // CT orientation
    bool operator==(const SvStreamConfig&) const = default;
};

// Nominal publication instant of sample k (floor of k / rate seconds, in ns).
SimTime sample_time(std::uint64_t k, std::uint32_t sample_rate);

// SV sample k of `stream`: instantaneous three-phase currents in mA and voltages in
// 10 mV units, neutral channels as the phase sums; smpCnt = k mod rate.
codec::SvApdu make_sample(const WaveformSource& waveform, const SvStreamConfig& stream, std::uint64_t k,
                          std::uint32_t sample_rate);

// Square root of the mean of squares of a window of mA samples, in amperes.
double rms_estimate(std::span<const std::int32_t> window_ma);

// One cycle of samples per channel, indexed by smpCnt. A sample whose smpCnt is
// already in the window overwrites it (last writer wins); anything other than the
// successor of the newest sample resets the window.
class SampleWindow {
public:
    enum class Push { appended, overwritten, gap_reset };

    SampleWindow(std::size_t cycle_length, std::uint32_t sample_rate);

    Push push(const codec::SvApdu& apdu, SimTime arrival);
    void reset();

    bool full() const { return filled_ == cycle_length_; }
    bool started() const { return filled_ > 0; }
    std::size_t size() const { return filled_; }
    std::size_t cycle_length() const { return cycle_length_; }
    // Unwrapped index of the newest sample; anchored at the first sample from its arrival time.
    std::int64_t newest_index() const { return newest_index_; }
    std::uint16_t newest_smp_cnt() const { return newest_; }

    // Oldest-to-newest samples of one channel.
    std::vector<std::int32_t> channel(std::size_t c) const;

private:
    std::size_t slot_of(std::size_t age) const;  // age 0 = newest

    std::size_t cycle_length_;
    std::uint32_t rate_;
    std::array<std::vector<std::int32_t>, codec::kSvChannels> ring_;
    std::size_t head_ = 0;  // slot of the newest sample
    std::size_t filled_ = 0;
    std::uint16_t newest_ = 0;
    std::int64_t newest_index_ = 0;
};

struct TripDecision {
    std::int64_t sample_index = 0;
    SimTime sample_time = 0;
    bool trip = false;
    double measured_a = 0.0;
    bool operator==(const TripDecision&) const = default;
};

struct Evaluation {
    std::optional<TripDecision> change;
    std::optional<std::string> diagnostic;
};

// Definite-time overcurrent: trips once the largest phase RMS has stayed at or
// above pickup for the delay, measured on the sample clock.
class OvercurrentElement {
public:
    OvercurrentElement(ProtectionSettings settings, std::uint32_t sample_rate, double frequency_hz);

    Evaluation on_sample(const codec::SvApdu& apdu, SimTime arrival);
    bool tripped() const { return tripped_; }
    const SampleWindow& window() const { return window_; }

private:
    ProtectionSettings settings_;
    std::uint32_t rate_;
    SampleWindow window_;
    bool picked_up_ = false;
    std::int64_t pickup_index_ = 0;
    bool tripped_ = false;
};

struct DifferentialMeasurement {
    double operate_a = 0.0;
    double restraint_a = 0.0;
    bool operates = false;
};

// Per-phase percentage differential on one aligned cycle of both windows.
DifferentialMeasurement differential_measure(const SampleWindow& a, const SampleWindow& b, std::size_t phase,
                                             const ProtectionSettings& settings);

class DifferentialElement {
public:
    DifferentialElement(ProtectionSettings settings, std::uint32_t sample_rate, double frequency_hz);

    // side 0 or 1: which of the two current streams the sample belongs to.
    Evaluation on_sample(std::size_t side, const codec::SvApdu& apdu, SimTime arrival);
    bool tripped() const { return tripped_; }
    bool stream_lost() const { return stream_lost_; }

private:
    ProtectionSettings settings_;
    std::uint32_t rate_;
    std::array<SampleWindow, 2> windows_;
    bool tripped_ = false;
    bool stream_lost_ = false;
};

struct GooseConfig {
    std::string gocb_ref;
    std::string dat_set;
    std::string go_id;
    std::uint16_t appid = 0x0001;
    codec::MacAddress dst;
    std::uint32_t conf_rev = 1;
    bool operator==(const GooseConfig&) const = default;
};

struct RetransmissionSchedule {
    std::vector<SimTime> burst{2 * kMillisecond, 4 * kMillisecond, 8 * kMillisecond, 16 * kMillisecond};
    SimTime heartbeat = 1000 * kMillisecond;
};

// GOOSE publisher with a single boolean dataset member (the trip signal).
// A state change bumps stNum, resets sqNum and restarts the burst; otherwise
// frames repeat at the heartbeat interval with sqNum incrementing.
class GoosePublisher {
public:
    using Sink = std::function<void(const codec::GooseApdu&)>;

    GoosePublisher(fabric::Scheduler& scheduler, GooseConfig config, Sink sink,
                   RetransmissionSchedule schedule = {});

    void start();
    void stop();
    // Returns false when the value is unchanged (nothing published).
    bool publish(bool value);

    bool running() const { return running_; }
    std::uint32_t st_num() const { return st_num_; }
    std::uint32_t sq_num() const { return sq_num_; }
    bool value() const { return value_; }
    const GooseConfig& config() const { return config_; }

private:
    void send_and_schedule(std::size_t burst_step);

    fabric::Scheduler& scheduler_;
    GooseConfig config_;
    Sink sink_;
    RetransmissionSchedule schedule_;
    bool running_ = false;
    bool value_ = false;
    std::uint32_t st_num_ = 0;
    std::uint32_t sq_num_ = 0;
    SimTime change_time_ = 0;
    std::uint64_t generation_ = 0;
};

enum class BreakerPosition { closed, open };
std::string_view to_string(BreakerPosition p);

class CircuitBreaker {
public:
    enum class Outcome { opened, already_open, no_trip, test_ignored, unsubscribed };

    explicit CircuitBreaker(std::set<std::string> subscribed_go_ids);

    Outcome on_goose(const codec::GooseApdu& apdu, SimTime now);
    void close();

    BreakerPosition position() const { return position_; }
    std::optional<SimTime> last_trip_time() const { return last_trip_time_; }
    const std::string& tripped_by() const { return tripped_by_; }
    const std::set<std::string>& subscriptions() const { return subscribed_; }

private:
    std::set<std::string> subscribed_;
    BreakerPosition position_ = BreakerPosition::closed;
    std::optional<SimTime> last_trip_time_;
    std::string tripped_by_;
};

std::string_view to_string(CircuitBreaker::Outcome o);

}  // namespace scs::devices
