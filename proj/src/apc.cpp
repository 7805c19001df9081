#include "scs/apc.hpp"

#include <algorithm>
#include <stdexcept>

namespace scs::apc {

std::optional<std::string> emit_banner(std::string_view protocol) {
    if (protocol == "SV") return std::string(kSvBanner);
    if (protocol == "GOOSE") return std::string(kGooseBanner);
    return std::nullopt;
}

std::string_view to_string(FailoverState s) {
    switch (s) {
        case FailoverState::active: return "active";
        case FailoverState::failing_over: return "failing_over";
        case FailoverState::failed_over: return "failed_over";
    }
    return "unknown";
}

namespace {

nlohmann::json bits(const std::vector<bool>& v) {
    auto out = nlohmann::json::array();
    for (bool b : v) out.push_back(b ? 1 : 0);
    return out;
}

}  // namespace

nlohmann::json to_json(const MitigationPlan& plan, const fabric::Fabric& fabric) {
    auto actions = nlohmann::json::array();
    for (const auto& a : plan.actions) {
        switch (a.kind) {
            case PlanAction::Kind::install_rule: {
                auto r = fabric::to_json(a.rule);
                r["op"] = "install_rule";
                r["switch"] = fabric.switch_name(a.sw);
                actions.push_back(r);
                break;
            }
            case PlanAction::Kind::remove_rule:
                actions.push_back({{"op", "remove_rule"}, {"switch", fabric.switch_name(a.sw)}, {"cookie", a.cookie}});
                break;
            case PlanAction::Kind::disable_port:
            case PlanAction::Kind::enable_port: {
                auto p = fabric.port_json(a.port);
                p["op"] = a.kind == PlanAction::Kind::disable_port ? "disable_port" : "enable_port";
                actions.push_back(p);
                break;
            }
            case PlanAction::Kind::banner:
                actions.push_back({{"op", "banner"}, {"text", a.text}});
                break;
        }
    }
    nlohmann::json out{{"plan_id", plan.id},
                       {"created_ns", plan.created},
                       {"apply_at_ns", plan.apply_at},
                       {"trigger", plan.trigger},
                       {"attack_vector", bits(plan.attack_vector)},
                       {"failing_over", plan.failing_over},
                       {"failing_back", plan.failing_back},
                       {"actions", actions}};
    if (!plan.protocol.empty()) out["protocol"] = plan.protocol;
    if (plan.solution) {
        out["pssa"] = {{"D", bits(plan.solution->disabled)},
                       {"E", plan.solution->cied_enabled ? 1 : 0},
                       {"F", bits(plan.solution->redirected)},
                       {"objective", plan.solution->objective}};
    }
    return out;
}

Controller::Controller(ControllerConfig config, fabric::Fabric& fabric, fabric::Scheduler& scheduler, EventLog& log,
                       Hooks hooks)
    : config_(std::move(config)), fabric_(fabric), scheduler_(scheduler), log_(log), hooks_(std::move(hooks)) {
    states_.assign(config_.pieds.size(), FailoverState::active);
}

std::optional<std::uint16_t> Controller::monitor_port(std::uint16_t sw) const {
    auto it = config_.monitor_ports.find(sw);
    if (it == config_.monitor_ports.end()) return std::nullopt;
    return it->second;
}

void Controller::install_monitoring() {
    for (const auto& [sw, port] : config_.monitor_ports) {
        auto trunks = config_.trunk_ports.find(sw);
        if (trunks != config_.trunk_ports.end()) {
            for (std::uint16_t t : trunks->second) {
                fabric::FlowRule from_trunk;
                from_trunk.priority = kTrunkPriority;
                from_trunk.cookie = next_cookie_++;
                from_trunk.match.ingress_port = t;
                from_trunk.action.primary = fabric::PrimaryAction::flood;
                fabric_.install_rule(sw, from_trunk);
            }
        }
        fabric::FlowRule mirror_all;
        mirror_all.priority = kMonitorPriority;
        mirror_all.cookie = next_cookie_++;
        mirror_all.action.primary = fabric::PrimaryAction::flood;
        mirror_all.action.mirror = port;
        fabric_.install_rule(sw, mirror_all);
    }
}

std::size_t Controller::index_of(const std::string& pied) const {
    for (std::size_t i = 0; i < config_.pieds.size(); ++i) {
        if (config_.pieds[i].id == pied) return i;
    }
    return config_.pieds.size();
}

FailoverState Controller::state(const std::string& pied) const {
    const auto i = index_of(pied);
    if (i == config_.pieds.size()) throw std::out_of_range("unknown PIED " + pied);
    return states_[i];
}

std::vector<bool> Controller::attack_vector() const {
    std::vector<bool> a(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) a[i] = states_[i] != FailoverState::active;
    return a;
}

std::vector<pssa::Solution> Controller::solutions() const {
    std::vector<pssa::Solution> out;
    for (const auto& p : plans_) {
        if (p.solution) out.push_back(*p.solution);
    }
    return out;
}

double Controller::objective() const {
    for (auto it = plans_.rbegin(); it != plans_.rend(); ++it) {
        if (it->solution) return it->solution->objective;
    }
    return 0.0;
}

void Controller::plan_failover(MitigationPlan& plan, const std::vector<std::size_t>& fresh, bool banner) {
    // Attack vector: PIEDs already failing or failed over, plus the new ones.
    std::vector<bool> attacks = attack_vector();
    for (std::size_t i : fresh) attacks[i] = true;
    pssa::Instance inst;
    for (const auto& p : config_.pieds) {
        inst.weights.push_back(p.weight);
        inst.disableable.push_back(p.disableable);
    }
    inst.gamma = config_.gamma;
    inst.attacks = attacks;
    const auto solution = pssa::solve(inst);
    plan.attack_vector = attacks;
    plan.solution = solution;

    for (std::size_t i : fresh) {
        states_[i] = FailoverState::failing_over;
        plan.failing_over.push_back(config_.pieds[i].id);
        if (hooks_.on_health) hooks_.on_health(config_.pieds[i].id, devices::Health::compromised);
        if (solution.disabled[i]) {
            for (const auto& port : config_.pieds[i].ports) {
                plan.actions.push_back({PlanAction::Kind::disable_port, 0, {}, 0, port, {}});
            }
        }
    }
    for (std::size_t i : fresh) {
        if (!solution.cied_enabled || !solution.redirected[i]) continue;
        const auto& entry = config_.pieds[i];
        plan.actions.push_back({PlanAction::Kind::enable_port, 0, {}, 0, entry.cied_port, {}});
        fabric::FlowRule redirect;
        redirect.priority = kRedirectPriority;
        redirect.cookie = next_cookie_++;
        redirect.match.ingress_port = entry.cied_port.index;
        redirect.action.primary = fabric::PrimaryAction::forward;
        for (const auto& cb : config_.cb_ports) {
            if (cb.sw == entry.cied_port.sw) redirect.action.out_ports.push_back(cb.index);
        }
        redirect.action.mirror = monitor_port(entry.cied_port.sw);
        redirect_cookies_[i] = redirect.cookie;
        plan.actions.push_back({PlanAction::Kind::install_rule, entry.cied_port.sw, redirect, 0, {}, {}});
    }
    if (banner) {
        if (auto text = emit_banner(plan.protocol)) {
            plan.actions.push_back({PlanAction::Kind::banner, 0, {}, 0, {}, *text});
        }
    }
}

MitigationPlan Controller::on_alert(const ids::Alert& alert) {
    MitigationPlan plan;
    plan.created = scheduler_.now();
    plan.trigger = alert.rule;
    plan.protocol = std::string(ids::to_string(alert.protocol));

    const auto drop_key = std::make_tuple(alert.suspected_ingress.sw, alert.suspected_ingress.index, alert.src_mac);
    if (!drops_.count(drop_key)) {
        drops_.insert(drop_key);
        fabric::FlowRule drop;
        drop.priority = kDropPriority;
        drop.cookie = next_cookie_++;
        drop.match.ingress_port = alert.suspected_ingress.index;
        drop.match.src_mac = alert.src_mac;
        drop.action.primary = fabric::PrimaryAction::drop;
        drop.action.mirror = monitor_port(alert.suspected_ingress.sw);
        plan.actions.push_back({PlanAction::Kind::install_rule, alert.suspected_ingress.sw, drop, 0, {}, {}});
    }

    std::vector<std::size_t> fresh;
    for (const auto& target : alert.targets) {
        const auto i = index_of(target);
        if (i < config_.pieds.size() && states_[i] == FailoverState::active &&
            std::find(fresh.begin(), fresh.end(), i) == fresh.end()) {
            fresh.push_back(i);
        }
    }
    if (!fresh.empty()) plan_failover(plan, fresh, true);

    if (plan.empty()) {
        ++suppressed_alerts_;
        if (log_.wants(LogLevel::debug)) {
            log_.record(scheduler_.now(), EventKind::device_action, LogLevel::debug,
                        {{"actor", "APC"}, {"action", "alert_suppressed"}, {"rule", alert.rule}, {"stream", alert.stream}});
        }
        return plan;
    }
    return schedule(std::move(plan));
}

MitigationPlan Controller::on_device_fault(const std::string& pied, const std::string& diagnostic) {
    MitigationPlan plan;
    plan.created = scheduler_.now();
    plan.trigger = "device_fault";
    const auto i = index_of(pied);
    if (i == config_.pieds.size()) throw std::out_of_range("unknown PIED " + pied);
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::warn,
                {{"actor", "APC"}, {"action", "device_fault"}, {"device", pied}, {"diagnostic", diagnostic},
                 {"state", to_string(states_[i])}});
    if (states_[i] != FailoverState::active) return plan;
    plan_failover(plan, {i}, false);
    return schedule(std::move(plan));
}

MitigationPlan Controller::failback(const std::string& pied) {
    MitigationPlan plan;
    plan.created = scheduler_.now();
    plan.trigger = "failback";
    const auto i = index_of(pied);
    if (i == config_.pieds.size()) throw std::out_of_range("unknown PIED " + pied);
    if (states_[i] != FailoverState::failed_over) {
        log_.record(scheduler_.now(), EventKind::device_action, LogLevel::warn,
                    {{"actor", "APC"}, {"action", "failback_ignored"}, {"device", pied}, {"state", to_string(states_[i])}});
        return plan;
    }
    const auto& entry = config_.pieds[i];
    for (const auto& port : entry.ports) {
        plan.actions.push_back({PlanAction::Kind::enable_port, 0, {}, 0, port, {}});
    }
    plan.actions.push_back({PlanAction::Kind::disable_port, 0, {}, 0, entry.cied_port, {}});
    if (auto it = redirect_cookies_.find(i); it != redirect_cookies_.end()) {
        plan.actions.push_back({PlanAction::Kind::remove_rule, entry.cied_port.sw, {}, it->second, {}, {}});
        redirect_cookies_.erase(it);
    }
    plan.failing_back.push_back(pied);
    states_[i] = FailoverState::active;
    pssa::Instance inst;
    for (const auto& p : config_.pieds) {
        inst.weights.push_back(p.weight);
        inst.disableable.push_back(p.disableable);
    }
    inst.gamma = config_.gamma;
    inst.attacks = attack_vector();
    plan.attack_vector = inst.attacks;
    plan.solution = pssa::solve(inst);
    return schedule(std::move(plan));
}

MitigationPlan& Controller::schedule(MitigationPlan plan) {
    plan.id = plans_.size();
    plan.apply_at = scheduler_.now() + config_.control_latency;
    plans_.push_back(std::move(plan));
    auto& stored = plans_.back();
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                {{"actor", "APC"}, {"action", "mitigation_plan"}, {"plan", to_json(stored, fabric_)}});
    const std::uint64_t id = stored.id;
    scheduler_.at(stored.apply_at, [this, id] { apply(id); });
    return stored;
}

void Controller::apply(std::uint64_t plan_id) {
    const MitigationPlan plan = plans_.at(plan_id);
    // Everything below runs inside one scheduler event, so no data-plane event can
    // observe a partially applied plan.
    for (const auto& a : plan.actions) {
        switch (a.kind) {
            case PlanAction::Kind::install_rule: fabric_.install_rule(a.sw, a.rule); break;
            case PlanAction::Kind::remove_rule: fabric_.remove_rule(a.sw, a.cookie); break;
            case PlanAction::Kind::disable_port: fabric_.set_port_state(a.port, fabric::AdminState::disabled); break;
            case PlanAction::Kind::enable_port: fabric_.set_port_state(a.port, fabric::AdminState::enabled); break;
            case PlanAction::Kind::banner:
                banners_.push_back(a.text);
                log_.record(scheduler_.now(), EventKind::alert, LogLevel::error, {{"banner", a.text}});
                if (hooks_.on_banner) hooks_.on_banner(a.text);
                break;
        }
    }
    for (const auto& id : plan.failing_over) {
        const auto i = index_of(id);
        states_[i] = FailoverState::failed_over;
        const bool isolated = plan.solution && plan.solution->disabled[i];
        if (hooks_.on_health) hooks_.on_health(id, isolated ? devices::Health::isolated : devices::Health::compromised);
        if (isolated && hooks_.retire_publisher) {
            for (const auto& pub : config_.pieds[i].publishers) hooks_.retire_publisher(pub);
        }
        if (hooks_.reinstate_publisher) hooks_.reinstate_publisher(config_.pieds[i].cied_publisher);
        if (!first_failover_applied_) first_failover_applied_ = scheduler_.now();
    }
    for (const auto& id : plan.failing_back) {
        const auto& entry = config_.pieds[index_of(id)];
        if (hooks_.on_health) hooks_.on_health(id, devices::Health::normal);
        if (hooks_.reinstate_publisher) {
            for (const auto& pub : entry.publishers) hooks_.reinstate_publisher(pub);
        }
        if (hooks_.retire_publisher) hooks_.retire_publisher(entry.cied_publisher);
    }
    log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                {{"actor", "APC"}, {"action", "plan_applied"}, {"plan_id", plan.id},
                 {"failed_over", plan.failing_over}, {"failed_back", plan.failing_back}});
}

}  // namespace scs::apc
