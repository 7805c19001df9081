#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace scs {

// Virtual time in nanoseconds since scenario start.
using SimTime = std::int64_t;

inline constexpr SimTime kMicrosecond = 1'000;
inline constexpr SimTime kMillisecond = 1'000'000;
inline constexpr SimTime kSecond = 1'000'000'000;

inline SimTime seconds_to_time(double s) { return static_cast<SimTime>(s * 1e9 + (s >= 0 ? 0.5 : -0.5)); }
inline double time_to_seconds(SimTime t) { return static_cast<double>(t) / 1e9; }

enum class EventKind { frame_tx, frame_rx, timer, alert, rule_update, port_change, device_action };
enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

std::string_view to_string(EventKind kind);
std::string_view to_string(LogLevel level);
std::optional<LogLevel> parse_log_level(std::string_view text);

struct EventRecord {
    SimTime time = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::timer;
    LogLevel level = LogLevel::info;
    nlohmann::json detail;
};

// Ordered, append-only record of everything the simulation did. Records above the
// capture level are discarded at the call site (check `wants` before building detail).
class EventLog {
public:
    explicit EventLog(LogLevel capture = LogLevel::info) : capture_(capture) {}

    bool wants(LogLevel level) const { return level <= capture_; }
    LogLevel capture_level() const { return capture_; }

    void record(SimTime time, EventKind kind, LogLevel level, nlohmann::json detail);

    const std::vector<EventRecord>& records() const { return records_; }
    std::vector<const EventRecord*> of_kind(EventKind kind) const;

    void write_jsonl(std::ostream& out) const;
    static std::string to_line(const EventRecord& record);

private:
    LogLevel capture_;
    std::uint64_t next_seq_ = 0;
    std::vector<EventRecord> records_;
};

}  // namespace scs
