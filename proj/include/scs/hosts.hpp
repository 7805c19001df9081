#pragma once

// Fabric endpoints wrapping the device state machines: the merging unit, the
// protection IEDs (PIEDs and the CIED) and the circuit breaker.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scs/devices.hpp"
#include "scs/event_log.hpp"
#include "scs/fabric.hpp"

namespace scs::hosts {

class MergingUnitHost : public fabric::Endpoint {
public:
    // `waveform` is owned by the caller and read at every tick, so faults added
    // mid-run take effect from the next sample.
    MergingUnitHost(std::string id, fabric::Scheduler& scheduler, fabric::Fabric& fabric,
                    const devices::WaveformSource& waveform, std::vector<devices::SvStreamConfig> streams,
                    std::uint32_t sample_rate);

    // The port the streams leave on; set once the host is attached.
    void bind(fabric::HostPortHandle port) { port_ = port; }
    void start(SimTime end);
    void on_frame(const fabric::Delivery&) override {}
    std::uint64_t samples_sent() const { return next_k_; }

private:
    void tick();

    std::string id_;
    fabric::Scheduler& scheduler_;
    fabric::Fabric& fabric_;
    const devices::WaveformSource& waveform_;
    std::vector<devices::SvStreamConfig> streams_;
    fabric::HostPortHandle port_ = 0;
    std::uint32_t rate_;
    std::uint64_t next_k_ = 0;
    SimTime end_ = 0;
};

enum class FunctionKind { overcurrent, differential };

struct FunctionConfig {
    std::string name;  // "oc", "diff"
    FunctionKind kind = FunctionKind::overcurrent;
    std::vector<std::string> sv_ids;  // one for overcurrent, two for differential
    devices::ProtectionSettings settings;
    devices::GooseConfig goose;
    fabric::HostPortHandle goose_port = 0;
};

struct DecisionRecord {
    std::string function;
    devices::TripDecision decision;
    bool operator==(const DecisionRecord&) const = default;
};

// A PIED runs one function; the CIED runs one per replicated PIED, all the time.
class ProtectionHost : public fabric::Endpoint {
public:
    ProtectionHost(std::string id, std::string role, fabric::Scheduler& scheduler, fabric::Fabric& fabric, EventLog& log,
                   std::uint32_t sample_rate, double frequency_hz);
    ~ProtectionHost() override;

    void add_function(FunctionConfig config);
    void start();
    void on_frame(const fabric::Delivery& delivery) override;

    // Isolated devices stop publishing and ignore input; returning to normal restarts
    // the publishers with the current trip state.
    void set_health(devices::Health health);
    devices::Health health() const { return health_; }

    const std::string& id() const { return id_; }
    const std::string& role() const { return role_; }
    const std::vector<DecisionRecord>& decisions() const { return decisions_; }
    std::vector<std::string> function_names() const;
    const devices::GoosePublisher& publisher(const std::string& function) const;
    bool tripped(const std::string& function) const;

private:
    struct Function;

    Function& function(const std::string& name) const;
    void handle(Function& fn, const devices::Evaluation& eval);

    std::string id_;
    std::string role_;
    fabric::Scheduler& scheduler_;
    fabric::Fabric& fabric_;
    EventLog& log_;
    std::uint32_t rate_;
    double frequency_hz_;
    devices::Health health_ = devices::Health::normal;
    std::vector<std::unique_ptr<Function>> functions_;
    std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> routes_;  // svID -> (function, side)
    std::vector<DecisionRecord> decisions_;
};

class BreakerHost : public fabric::Endpoint {
public:
    BreakerHost(std::string id, fabric::Scheduler& scheduler, EventLog& log, std::set<std::string> subscriptions);

    void on_frame(const fabric::Delivery& delivery) override;
    // Operator reclose.
    void close();

    const devices::CircuitBreaker& breaker() const { return breaker_; }
    const std::string& id() const { return id_; }
    std::optional<std::uint64_t> opening_frame() const { return opening_frame_; }

private:
    std::string id_;
    fabric::Scheduler& scheduler_;
    EventLog& log_;
    devices::CircuitBreaker breaker_;
    std::optional<std::uint64_t> opening_frame_;
};

}  // namespace scs::hosts
