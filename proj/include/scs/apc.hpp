#pragma once

// Adaptive port controller. Turns IDS alerts (and self-reported device faults) into
// mitigation plans: PSSA decides which PIEDs to disable, whether the CIED takes over
// and which functions are redirected; the plan is applied to the fabric as one
// control-plane event after the controller latency.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scs/devices.hpp"
#include "scs/event_log.hpp"
#include "scs/fabric.hpp"
#include "scs/ids.hpp"
#include "scs/pssa.hpp"

namespace scs::apc {

inline constexpr std::string_view kSvBanner = "****** HIGH ALERT: SV Cyber-Attack Detected! Switching to CIED *****";
inline constexpr std::string_view kGooseBanner =
    "****** HIGH ALERT: GOOSE Cyber-Attack Detected! Switching to CIED ******";

// "SV" or "GOOSE"; anything else has no banner.
std::optional<std::string> emit_banner(std::string_view protocol);

inline constexpr std::uint16_t kMonitorPriority = 1;
inline constexpr std::uint16_t kTrunkPriority = 2;
inline constexpr std::uint16_t kRedirectPriority = 100;
inline constexpr std::uint16_t kDropPriority = 1000;

struct PiedEntry {
    std::string id;
    std::string function;  // e.g. "oc", "diff"
    double weight = 1.0;
    bool disableable = true;
    std::vector<fabric::PortId> ports;
    std::vector<std::string> publishers;  // goIDs the PIED owns
    fabric::PortId cied_port;             // CIED port carrying the replicated function
    std::string cied_publisher;           // goID the CIED uses for it
};

struct ControllerConfig {
    std::vector<PiedEntry> pieds;  // PSSA index order
    double gamma = 5.0;
    std::map<std::uint16_t, std::uint16_t> monitor_ports;             // switch -> IDS port
    std::map<std::uint16_t, std::vector<std::uint16_t>> trunk_ports;  // switch -> trunk ports
    std::vector<fabric::PortId> cb_ports;                             // redirect destinations
    SimTime control_latency = 200 * kMicrosecond;
};

enum class FailoverState { active, failing_over, failed_over };
std::string_view to_string(FailoverState s);

struct PlanAction {
    enum class Kind { install_rule, remove_rule, disable_port, enable_port, banner };
    Kind kind = Kind::banner;
    std::uint16_t sw = 0;
    fabric::FlowRule rule;
    std::uint64_t cookie = 0;
    fabric::PortId port;
    std::string text;
};

struct MitigationPlan {
    std::uint64_t id = 0;
    SimTime created = 0;
    SimTime apply_at = 0;
    std::string trigger;   // IDS rule, "device_fault" or "failback"
    std::string protocol;  // "SV" / "GOOSE" for alert-driven plans
    std::vector<bool> attack_vector;
    std::optional<pssa::Solution> solution;
    std::vector<PlanAction> actions;
    std::vector<std::string> failing_over;
    std::vector<std::string> failing_back;

    bool empty() const { return actions.empty(); }
};

nlohmann::json to_json(const MitigationPlan& plan, const fabric::Fabric& fabric);

struct Hooks {
    std::function<void(const std::string& pied, devices::Health)> on_health;
    std::function<void(const std::string& stream)> retire_publisher;
    std::function<void(const std::string& stream)> reinstate_publisher;
    std::function<void(const std::string& banner)> on_banner;
};

class Controller {
public:
    Controller(ControllerConfig config, fabric::Fabric& fabric, fabric::Scheduler& scheduler, EventLog& log,
               Hooks hooks = {});

    // Startup mirroring: every frame is copied to the IDS once, at the switch where it entered.
    void install_monitoring();

    MitigationPlan on_alert(const ids::Alert& alert);
    MitigationPlan on_device_fault(const std::string& pied, const std::string& diagnostic);
    // Manual return of a cleaned PIED to service.
    MitigationPlan failback(const std::string& pied);

    FailoverState state(const std::string& pied) const;
    const std::vector<MitigationPlan>& plans() const { return plans_; }
    std::vector<pssa::Solution> solutions() const;
    // Objective of the latest PSSA solution; 0 when nothing was ever solved.
    double objective() const;
    std::optional<SimTime> first_failover_applied() const { return first_failover_applied_; }
    const std::vector<std::string>& banners() const { return banners_; }
    const ControllerConfig& config() const { return config_; }
    std::vector<bool> attack_vector() const;
    std::uint64_t suppressed_alerts() const { return suppressed_alerts_; }

private:
    std::size_t index_of(const std::string& pied) const;
    void plan_failover(MitigationPlan& plan, const std::vector<std::size_t>& fresh, bool banner);
    MitigationPlan& schedule(MitigationPlan plan);
    void apply(std::uint64_t plan_id);
    std::optional<std::uint16_t> monitor_port(std::uint16_t sw) const;

    ControllerConfig config_;
    fabric::Fabric& fabric_;
    fabric::Scheduler& scheduler_;
    EventLog& log_;
    Hooks hooks_;
    std::vector<FailoverState> states_;
    std::map<std::size_t, std::uint64_t> redirect_cookies_;  // PIED index -> redirect rule
    std::set<std::tuple<std::uint16_t, std::uint16_t, codec::MacAddress>> drops_;
    std::vector<MitigationPlan> plans_;
    std::vector<std::string> banners_;
    std::optional<SimTime> first_failover_applied_;
    std::uint64_t next_cookie_ = 1;
    std::uint64_t suppressed_alerts_ = 0;
};

}  // namespace scs::apc
