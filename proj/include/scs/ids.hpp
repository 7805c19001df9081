#pragma once

// Rule-based network IDS over mirrored SV and GOOSE traffic. Publishers declared in
// the scenario form the whitelist; per-publisher baselines advance only on frames
// that raise no alert.
//
// Evaluation order per frame (first hit wins):
//   malformed 61850 payload ............................ M1
//   GOOSE: unknown (goID, src_mac) ..................... G3
//          stNum rollback / sqNum discontinuity ........ G1
//          stNum jump above the limit .................. G2
//          state-change rate above the limit ........... G4
//   SV:    svID from a non-whitelisted src_mac ......... S2
//          smpCnt gap or duplicate ..................... S1
//          sample beyond the physical bound ............ S3
//          frame rate deviation over a window .......... S4
// G5 (timeAllowedToLive expiry) is timer driven via `check_expiry`.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scs/codec.hpp"
#include "scs/event_log.hpp"
#include "scs/fabric.hpp"

namespace scs::ids {

enum class Protocol { sv, goose };
std::string_view to_string(Protocol p);  // "SV" / "GOOSE"

struct PublisherKey {
    Protocol protocol = Protocol::goose;
    std::string id;  // goID or svID
    codec::MacAddress src;
    std::uint16_t appid = 0;
    codec::MacAddress dst;
    bool operator==(const PublisherKey&) const = default;
};

struct RuleConfig {
    std::map<std::string, bool> enabled{{"G1", true}, {"G2", true}, {"G3", true}, {"G4", true}, {"G5", true},
                                        {"S1", true}, {"S2", true}, {"S3", true}, {"S4", true}, {"M1", true}};
    std::uint32_t g2_max_jump = 10;
    double g4_max_changes_per_s = 10.0;
    double s3_bound_multiple = 40.0;
    double nominal_a = 1000.0;
    double s4_tolerance = 0.05;
    SimTime s4_window = 100 * kMillisecond;
    SimTime suppression = 100 * kMillisecond;
    std::uint32_t sample_rate = 4800;

    bool on(const std::string& rule) const;
    bool operator==(const RuleConfig&) const = default;
};

// Stream to protection-device mapping used to name the compromised PIED(s).
struct TargetMap {
    std::map<std::string, std::vector<std::string>> sv_subscribers;  // svID -> PIEDs
    std::map<std::string, std::string> goose_owner;                  // goID -> PIED
};

struct Alert {
    SimTime time = 0;
    Protocol protocol = Protocol::goose;
    std::string rule;
    std::string stream;  // goID / svID, or the source MAC for undecodable frames
    codec::MacAddress src_mac;
    fabric::PortId suspected_ingress;
    std::vector<std::string> targets;  // empty: no PIED mapping, severity downgraded
    std::uint64_t frame_id = 0;        // evidence, as captured at the ingress switch
    std::string detail;

    std::string severity() const { return targets.empty() ? "low" : "high"; }
};

nlohmann::json to_json(const Alert& alert, const std::string& ingress_switch);

struct Observation {
    SimTime time = 0;
    codec::ByteView frame;
    std::uint64_t frame_id = 0;
    fabric::PortId ingress;
};

class Detector {
public:
    Detector(RuleConfig config, std::vector<PublisherKey> whitelist, TargetMap targets);

    // Inspects one mirrored frame. Alerts inside the suppression window of an earlier
    // alert with the same (rule, stream) are counted but not returned.
    std::optional<Alert> inspect(const Observation& obs);
    // Returns the stream id a frame belongs to (empty when it is not SV/GOOSE).
    static std::string stream_of(codec::ByteView frame);

    // Deadline armed by the last clean GOOSE frame of `go_id`, if any.
    std::optional<SimTime> deadline(const std::string& go_id) const;
    // G5: raises when the deadline has passed without a clean refresh.
    std::optional<Alert> check_expiry(const std::string& go_id, SimTime now);

    // A retired publisher (its device isolated) is exempt from liveness and loses its baseline.
    void retire(const std::string& stream_id);
    void reinstate(const std::string& stream_id);

    std::uint64_t suppressed() const { return suppressed_; }
    std::uint64_t inspected() const { return inspected_; }
    const RuleConfig& config() const { return config_; }

private:
    struct GooseBaseline {
        bool seen = false;
        std::uint32_t st = 0;
        std::uint32_t sq = 0;
        fabric::PortId learned_ingress;
        fabric::PortId last_ingress;
        std::optional<SimTime> deadline;
        std::uint64_t last_frame_id = 0;
        std::deque<SimTime> changes;
    };
    struct SvBaseline {
        bool seen = false;
        std::uint16_t smp_cnt = 0;
        fabric::PortId learned_ingress;
        fabric::PortId last_ingress;
        SimTime window_start = 0;
        std::uint64_t window_count = 0;
    };

    std::optional<Alert> inspect_goose(const Observation& obs, const codec::GooseFrame& f);
    std::optional<Alert> inspect_sv(const Observation& obs, const codec::SvFrame& f);
    std::optional<Alert> raise(Alert alert);
    std::vector<std::string> targets_for(Protocol p, const std::string& id) const;
    const PublisherKey* find_key(Protocol p, const std::string& id, const codec::MacAddress& src) const;
    bool known_id(Protocol p, const std::string& id) const;
    template <class Baseline>
    static fabric::PortId suspect(const Baseline& b, fabric::PortId frame_ingress);

    RuleConfig config_;
    std::vector<PublisherKey> whitelist_;
    TargetMap targets_;
    std::map<std::string, GooseBaseline> goose_;
    std::map<std::string, SvBaseline> sv_;
    std::set<std::string> retired_;
    std::map<std::pair<std::string, std::string>, SimTime> last_alert_;
    std::uint64_t suppressed_ = 0;
    std::uint64_t inspected_ = 0;
};

// Fabric endpoint on the monitor ports; forwards alerts to a handler.
class IdsHost : public fabric::Endpoint {
public:
    using AlertHandler = std::function<void(const Alert&)>;

    IdsHost(fabric::Scheduler& scheduler, fabric::Fabric& fabric, EventLog& log, Detector detector,
            AlertHandler handler);

    void on_frame(const fabric::Delivery& delivery) override;
    void set_enabled(bool enabled) { enabled_ = enabled; }
    bool enabled() const { return enabled_; }
    Detector& detector() { return detector_; }
    const std::vector<Alert>& alerts() const { return alerts_; }

    // Per-frame record of what the IDS saw, for detection-latency measurements.
    struct Seen {
        SimTime time;
        std::uint64_t frame_id;
        std::string stream;
    };
    void record_observations(bool on) { record_ = on; }
    const std::vector<Seen>& observations() const { return seen_; }

private:
    void emit(const Alert& alert);
    void arm_expiry(const std::string& go_id);

    fabric::Scheduler& scheduler_;
    fabric::Fabric& fabric_;
    EventLog& log_;
    Detector detector_;
    AlertHandler handler_;
    bool enabled_ = true;
    bool record_ = false;
    std::vector<Alert> alerts_;
    std::vector<Seen> seen_;
};

}  // namespace scs::ids
