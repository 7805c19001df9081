#include "scs/event_log.hpp"

#include <ostream>

namespace scs {

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::frame_tx: return "frame_tx";
        case EventKind::frame_rx: return "frame_rx";
        case EventKind::timer: return "timer";
        case EventKind::alert: return "alert";
        case EventKind::rule_update: return "rule_update";
        case EventKind::port_change: return "port_change";
        case EventKind::device_action: return "device_action";
    }
    return "unknown";
}

std::string_view to_string(LogLevel level) {
    switch (level) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
    }
    return "info";
}

std::optional<LogLevel> parse_log_level(std::string_view text) {
    if (text == "error") return LogLevel::error;
    if (text == "warn") return LogLevel::warn;
    if (text == "info") return LogLevel::info;
    if (text == "debug") return LogLevel::debug;
    return std::nullopt;
}

void EventLog::record(SimTime time, EventKind kind, LogLevel level, nlohmann::json detail) {
    if (!wants(level)) {
        return;
    }
    records_.push_back(EventRecord{time, next_seq_++, kind, level, std::move(detail)});
}

std::vector<const EventRecord*> EventLog::of_kind(EventKind kind) const {
    std::vector<const EventRecord*> out;
    for (const auto& r : records_) {
        if (r.kind == kind) {
            out.push_back(&r);
        }
    }
    return out;
}

std::string EventLog::to_line(const EventRecord& record) {
    nlohmann::json line;
    line["t_ns"] = record.time;
    line["seq"] = record.seq;
    line["kind"] = to_string(record.kind);
    line["level"] = to_string(record.level);
    line["detail"] = record.detail;
    return line.dump();
}

void EventLog::write_jsonl(std::ostream& out) const {
    for (const auto& r : records_) {
        out << to_line(r) << '\n';
    }
}

}  // namespace scs
