#include "scs/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "scs/pcap.hpp"

namespace scs::sim {

using nlohmann::json;
using scenario::Role;

namespace {

const scenario::Scenario& validated(const scenario::Scenario& s) {
    scenario::validate(s);
    return s;
}

std::string function_of(Role r) { return r == Role::PIED_OC ? "oc" : "diff"; }

hosts::FunctionKind kind_of(Role r) {
    return r == Role::PIED_OC ? hosts::FunctionKind::overcurrent : hosts::FunctionKind::differential;
}

std::string key(const std::string& device, const std::string& port) { return device + "/" + port; }

json time_json(std::optional<SimTime> t) { return t ? json(time_to_seconds(*t)) : json(nullptr); }

}  // namespace

Simulation::Simulation(scenario::Scenario scenario, RunOptions options)
    : scenario_(validated(scenario)),
      options_(std::move(options)),
      duration_(options_.duration.value_or(scenario_.duration)),
      log_(options_.log_level),
      fabric_(scheduler_, log_, fabric::LatencyConfig{scenario_.latency_min, scenario_.latency_max},
              options_.seed.value_or(scenario_.seed)),
      waveform_(scenario_.waveform()) {
    if (duration_ <= 0) throw scenario::ValidationError({"duration must be positive"});
    fabric_.set_capture(options_.capture);
    build_topology();
    build_devices();
    build_ids();
    build_apc();
    build_attacks();
    schedule_actions();
}

Simulation::~Simulation() = default;

void Simulation::build_topology() {
    for (const auto& sw : scenario_.switches) fabric_.add_switch(sw);
    const auto sw_of = [&](const std::string& name) { return *fabric_.find_switch(name); };
    for (const auto& t : scenario_.trunks) {
        const fabric::PortId a{sw_of(t.a_switch), t.a_port};
        const fabric::PortId b{sw_of(t.b_switch), t.b_port};
        fabric_.add_port(a);
        fabric_.add_port(b);
        fabric_.add_trunk(a, b);
    }
    for (const auto& d : scenario_.devices) {
        for (const auto& p : d.ports) fabric_.add_port({sw_of(p.sw), p.port}, p.monitor);
    }
}

void Simulation::build_devices() {
    const auto attach_all = [&](const scenario::DeviceSpec& d, fabric::Endpoint* endpoint) {
        const auto host = fabric_.add_host(d.id, endpoint);
        roles_[host] = d.role;
        for (const auto& p : d.ports) {
            const fabric::PortId pid{*fabric_.find_switch(p.sw), p.port};
            handles_[key(d.id, p.name)] = fabric_.attach(host, p.name, pid, p.mac);
        }
        return host;
    };
    const std::uint32_t rate = scenario_.sample_rate;
    const double freq = scenario_.frequency_hz;

    for (const auto& d : scenario_.devices) {
        switch (d.role) {
            case Role::MU: {
                mu_ = std::make_unique<hosts::MergingUnitHost>(d.id, scheduler_, fabric_, waveform_, d.sv_streams, rate);
                attach_all(d, mu_.get());
                mu_->bind(handles_.at(key(d.id, d.ports.front().name)));
                break;
            }
            case Role::PIED_OC:
            case Role::PIED_DIFF: {
                auto host = std::make_unique<hosts::ProtectionHost>(d.id, std::string(scenario::to_string(d.role)),
                                                                    scheduler_, fabric_, log_, rate, freq);
                attach_all(d, host.get());
                host->add_function({function_of(d.role), kind_of(d.role), d.subscriptions, d.settings,
                                    d.goose->config, handles_.at(key(d.id, d.goose->port))});
                protection_[d.id] = std::move(host);
                break;
            }
            case Role::CIED: {
                auto host = std::make_unique<hosts::ProtectionHost>(d.id, "CIED", scheduler_, fabric_, log_, rate, freq);
                attach_all(d, host.get());
                for (const auto& r : d.replicates) {
                    const auto& pied = *scenario_.device(r.pied);
                    host->add_function({function_of(pied.role), kind_of(pied.role), pied.subscriptions, pied.settings,
                                        r.goose, handles_.at(key(d.id, r.port))});
                    // Hot standby: the CIED computes and publishes from the start, the fabric holds its output back.
                    fabric_.set_port_state(fabric_.port_of(handles_.at(key(d.id, r.port))), fabric::AdminState::disabled);
                }
                protection_[d.id] = std::move(host);
                break;
            }
            case Role::CB: {
                auto host = std::make_unique<hosts::BreakerHost>(
                    d.id, scheduler_, log_, std::set<std::string>(d.subscriptions.begin(), d.subscriptions.end()));
                attach_all(d, host.get());
                breakers_[d.id] = std::move(host);
                break;
            }
            case Role::ATTACKER: {
                auto host = std::make_unique<attacks::AttackerHost>(d.id, scheduler_, fabric_, log_, rate, freq,
                                                                    scenario_.schedule.front().rms_a);
                const auto id = attach_all(d, host.get());
                fabric_.trace_origin(id);
                attackers_[d.id] = std::move(host);
                break;
            }
            case Role::IDS: break;  // built once the publisher whitelist is known
        }
    }
}

void Simulation::build_ids() {
    const auto devs = scenario_.with_role(Role::IDS);
    if (devs.empty()) return;
    const auto& spec = *devs.front();

    std::vector<ids::PublisherKey> whitelist;
    ids::TargetMap targets;
    for (const auto& d : scenario_.devices) {
        if (d.role == Role::MU) {
            const auto src = d.ports.front().mac;
            for (const auto& s : d.sv_streams) whitelist.push_back({ids::Protocol::sv, s.sv_id, src, s.appid, s.dst});
        }
        if (scenario::is_pied(d.role)) {
            const auto& g = d.goose->config;
            whitelist.push_back({ids::Protocol::goose, g.go_id, d.port(d.goose->port)->mac, g.appid, g.dst});
            targets.goose_owner[g.go_id] = d.id;
            for (const auto& sub : d.subscriptions) targets.sv_subscribers[sub].push_back(d.id);
        }
        if (d.role == Role::CIED) {
            for (const auto& r : d.replicates) {
                whitelist.push_back({ids::Protocol::goose, r.goose.go_id, d.port(r.port)->mac, r.goose.appid, r.goose.dst});
            }
        }
    }
    auto rules = scenario_.ids.rules;
    rules.sample_rate = scenario_.sample_rate;
    ids::Detector detector(rules, whitelist, targets);
    for (const auto* c : scenario_.with_role(Role::CIED)) {
        for (const auto& r : c->replicates) detector.retire(r.goose.go_id);
    }

    ids_ = std::make_unique<ids::IdsHost>(scheduler_, fabric_, log_, std::move(detector), [this](const ids::Alert& a) {
        if (apc_) note_plan(apc_->on_alert(a));
    });
    ids_->set_enabled(options_.ids_enabled.value_or(scenario_.ids.enabled));
    ids_->record_observations(options_.record_ids_observations);
    const auto host = fabric_.add_host(spec.id, ids_.get());
    roles_[host] = Role::IDS;
    for (const auto& p : spec.ports) {
        handles_[key(spec.id, p.name)] = fabric_.attach(host, p.name, {*fabric_.find_switch(p.sw), p.port}, p.mac);
    }
}

void Simulation::build_apc() {
    apc::ControllerConfig cfg;
    cfg.gamma = scenario_.gamma;
    cfg.control_latency = scenario_.control_latency;
    const auto* cied = scenario_.with_role(Role::CIED).empty() ? nullptr : scenario_.with_role(Role::CIED).front();
    for (const auto* d : scenario_.pieds()) {
        apc::PiedEntry e;
        e.id = d->id;
        e.function = function_of(d->role);
        e.weight = d->weight;
        e.disableable = d->disableable;
        for (const auto& p : d->ports) e.ports.push_back(port(d->id, p.name));
        e.publishers = {d->goose->config.go_id};
        for (const auto& r : cied->replicates) {
            if (r.pied != d->id) continue;
            e.cied_port = port(cied->id, r.port);
            e.cied_publisher = r.goose.go_id;
        }
        cfg.pieds.push_back(std::move(e));
    }
    for (const auto* d : scenario_.with_role(Role::IDS)) {
        for (const auto& p : d->ports) cfg.monitor_ports[*fabric_.find_switch(p.sw)] = p.port;
    }
    for (const auto& t : scenario_.trunks) {
        cfg.trunk_ports[*fabric_.find_switch(t.a_switch)].push_back(t.a_port);
        cfg.trunk_ports[*fabric_.find_switch(t.b_switch)].push_back(t.b_port);
    }
    for (const auto* d : scenario_.with_role(Role::CB)) {
        for (const auto& p : d->ports) cfg.cb_ports.push_back(port(d->id, p.name));
    }

    apc::Hooks hooks;
    hooks.on_health = [this](const std::string& pied, devices::Health h) {
        if (auto it = protection_.find(pied); it != protection_.end()) it->second->set_health(h);
    };
    hooks.retire_publisher = [this](const std::string& stream) {
        if (ids_) ids_->detector().retire(stream);
    };
    hooks.reinstate_publisher = [this](const std::string& stream) {
        if (ids_) ids_->detector().reinstate(stream);
    };
    hooks.on_banner = [this](const std::string& banner) {
        if (options_.console) options_.console(banner);
    };
    apc_ = std::make_unique<apc::Controller>(std::move(cfg), fabric_, scheduler_, log_, std::move(hooks));
}

void Simulation::build_attacks() {
    for (const auto& spec : scenario_.attacks) {
        auto& host = *attackers_.at(spec.attacker);
        attacks::AttackTarget target;
        for (const auto& d : scenario_.devices) {
            if (d.role == Role::MU) {
                for (const auto& s : d.sv_streams) {
                    if (s.sv_id != spec.target) continue;
                    target.sv = s;
                    target.victim_mac = d.ports.front().mac;
                }
            }
            if (d.goose && d.goose->config.go_id == spec.target) {
                target.goose = d.goose->config;
                target.victim_mac = d.port(d.goose->port)->mac;
            }
            for (const auto& r : d.replicates) {
                if (r.goose.go_id != spec.target) continue;
                target.goose = r.goose;
                target.victim_mac = d.port(r.port)->mac;
            }
        }
        host.add_attack(spec, handles_.at(key(spec.attacker, spec.port)), target);
    }
}

void Simulation::schedule_actions() {
    for (const auto& a : scenario_.operator_actions) {
        if (a.anchor != scenario::Anchor::absolute) continue;
        scheduler_.at(a.at, [this, a] {
            if (a.kind == scenario::OperatorAction::Kind::cb_close) {
                breakers_.at(a.device)->close();
            } else {
                note_plan(apc_->failback(a.device));
            }
        });
    }
    for (const auto& [pied, at] : options_.failbacks) {
        scheduler_.at(at, [this, pied] { note_plan(apc_->failback(pied)); });
    }
    for (const auto& f : scenario_.device_failures) {
        scheduler_.at(f.at, [this, f] {
            log_.record(scheduler_.now(), EventKind::device_action, LogLevel::warn,
                        {{"device", f.pied}, {"action", "self_reported_fault"}, {"detail", f.diagnostic}});
            note_plan(apc_->on_device_fault(f.pied, f.diagnostic));
        });
    }
}

void Simulation::note_plan(const apc::MitigationPlan& plan) {
    if (failover_time_ || plan.failing_over.empty()) return;
    failover_time_ = plan.apply_at;
    scheduler_.at(plan.apply_at, [this, at = plan.apply_at] { on_failover(at); });
}

void Simulation::on_failover(SimTime at) {
    for (const auto& f : scenario_.faults) {
        if (f.anchor != scenario::Anchor::failover) continue;
        auto seg = f.segment;
        seg.start += at;
        seg.end += at;
        waveform_.faults.push_back(seg);
        log_.record(scheduler_.now(), EventKind::device_action, LogLevel::info,
                    {{"device", "waveform"},
                     {"action", "fault_scheduled"},
                     {"start_s", time_to_seconds(seg.start)},
                     {"end_s", time_to_seconds(seg.end)},
                     {"multiplier", seg.multiplier},
                     {"sources", seg.sources}});
    }
    for (const auto& a : scenario_.operator_actions) {
        if (a.anchor != scenario::Anchor::failover) continue;
        scheduler_.at(at + a.at, [this, a] {
            if (a.kind == scenario::OperatorAction::Kind::cb_close) {
                breakers_.at(a.device)->close();
            } else {
                note_plan(apc_->failback(a.device));
            }
        });
    }
}

void Simulation::run() {
    if (finished_) throw std::logic_error("simulation already ran");
    log_.record(0, EventKind::device_action, LogLevel::info,
                {{"device", "simulator"},
                 {"action", "start"},
                 {"scenario", scenario_.name},
                 {"seed", options_.seed.value_or(scenario_.seed)},
                 {"duration_s", time_to_seconds(duration_)},
                 {"ids_enabled", ids_ && ids_->enabled()}});
    apc_->install_monitoring();
    if (mu_) mu_->start(duration_);
    for (auto& [id, host] : protection_) host->start();
    for (auto& [id, host] : attackers_) host->start();
    scheduler_.run_until(duration_);
    finished_ = true;
    log_.record(duration_, EventKind::device_action, LogLevel::info,
                {{"device", "simulator"}, {"action", "end"}, {"events", scheduler_.processed()}});
}

// ---------------------------------------------------------------------------

const hosts::ProtectionHost& Simulation::protection(const std::string& id) const { return *protection_.at(id); }
const hosts::BreakerHost& Simulation::breaker(const std::string& id) const { return *breakers_.at(id); }

const attacks::AttackerHost* Simulation::attacker(const std::string& id) const {
    const auto it = attackers_.find(id);
    return it == attackers_.end() ? nullptr : it->second.get();
}

fabric::PortId Simulation::port(const std::string& device, const std::string& port_name) const {
    const auto it = handles_.find(key(device, port_name));
    if (it == handles_.end()) throw std::out_of_range("no port " + key(device, port_name));
    return fabric_.port_of(it->second);
}

bool Simulation::port_enabled(const std::string& device, const std::string& port_name) const {
    return fabric_.port_state(port(device, port_name)) == fabric::AdminState::enabled;
}

std::optional<SimTime> Simulation::mitigation_time() const {
    for (const auto& plan : apc_->plans()) {
        for (const auto& a : plan.actions) {
            if (a.kind == apc::PlanAction::Kind::install_rule && a.rule.priority == apc::kDropPriority) return plan.apply_at;
        }
    }
    return std::nullopt;
}

std::uint64_t Simulation::attacker_frames_after_mitigation() const {
    const auto t = mitigation_time();
    if (!t) return 0;
    std::uint64_t n = 0;
    for (const auto& e : fabric_.trace()) {
        if (e.mirrored || e.entered <= *t) continue;
        const auto role = roles_.at(e.receiver);
        if (scenario::is_pied(role) || role == Role::CIED || role == Role::CB) ++n;
    }
    return n;
}

bool Simulation::attacker_drop_rule_installed() const {
    std::set<codec::MacAddress> macs;
    for (const auto* d : scenario_.with_role(Role::ATTACKER)) {
        for (const auto& p : d->ports) macs.insert(p.mac);
    }
    for (const auto& spec : scenario_.attacks) {
        // Stealth and replayed frames carry the victim's source MAC.
        if (!spec.stealth && spec.kind != attacks::AttackKind::replay) continue;
        for (const auto& d : scenario_.devices) {
            if (d.goose && d.goose->config.go_id == spec.target) macs.insert(d.port(d.goose->port)->mac);
            for (const auto& s : d.sv_streams) {
                if (s.sv_id == spec.target) macs.insert(d.ports.front().mac);
            }
        }
    }
    for (std::uint16_t sw = 0; sw < fabric_.switch_count(); ++sw) {
        for (const auto& r : fabric_.table(sw).rules()) {
            if (r.priority == apc::kDropPriority && r.action.primary == fabric::PrimaryAction::drop && r.match.src_mac &&
                macs.count(*r.match.src_mac)) {
                return true;
            }
        }
    }
    return false;
}

std::uint64_t Simulation::cied_goose_frames_captured() const {
    std::set<codec::MacAddress> macs;
    std::set<std::string> go_ids;
    for (const auto* c : scenario_.with_role(Role::CIED)) {
        for (const auto& r : c->replicates) {
            macs.insert(c->port(r.port)->mac);
            go_ids.insert(r.goose.go_id);
        }
    }
    std::uint64_t n = 0;
    for (const auto& rec : fabric_.merged_capture()) {
        codec::HeaderView h;
        if (!codec::peek_header(*rec.frame, h) || h.ethertype != codec::kEtherTypeGoose || !macs.count(h.src)) continue;
        const auto decoded = codec::decode_frame(*rec.frame);
        const auto* g = std::get_if<codec::GooseFrame>(&decoded);
        if (g && go_ids.count(g->apdu.go_id)) ++n;
    }
    return n;
}

std::vector<std::uint64_t> Simulation::attacker_frames() const {
    std::vector<std::uint64_t> out;
    for (const auto& [id, host] : attackers_) out.insert(out.end(), host->sent().begin(), host->sent().end());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

std::vector<AssertionResult> Simulation::check_assertions() const {
    const auto& as = scenario_.assertions;
    std::vector<AssertionResult> out;
    const auto add = [&](std::string name, bool pass, std::string expected, std::string actual) {
        out.push_back({std::move(name), pass, std::move(expected), std::move(actual)});
    };
    const auto number = [](double v) {
        json j = v;
        return j.dump();
    };

    if (as.objective) {
        const double got = apc_->objective();
        add("objective", std::abs(got - *as.objective) < 1e-9, number(*as.objective), number(got));
    }
    const std::uint64_t alerts = ids_ ? ids_->alerts().size() : 0;
    if (as.alerts_min) add("alerts_min", alerts >= *as.alerts_min, ">= " + std::to_string(*as.alerts_min), std::to_string(alerts));
    if (as.alerts_max) add("alerts_max", alerts <= *as.alerts_max, "<= " + std::to_string(*as.alerts_max), std::to_string(alerts));
    if (as.banners) {
        std::vector<std::string> want;
        for (const auto& p : *as.banners) want.push_back(*apc::emit_banner(p));
        const auto& got = apc_->banners();
        add("banners", got == want, json(want).dump(), json(got).dump());
    }
    for (const auto& [cb, pos] : as.cb_position) {
        const std::string got(devices::to_string(breakers_.at(cb)->breaker().position()));
        add("cb_position." + cb, got == pos, pos, got);
    }
    for (const auto& [cb, go] : as.cb_tripped_by) {
        const auto& got = breakers_.at(cb)->breaker().tripped_by();
        add("cb_tripped_by." + cb, got == go, go, got.empty() ? "(none)" : got);
    }
    for (const auto& pied : as.isolated) {
        bool all_down = true;
        for (const auto& p : scenario_.device(pied)->ports) all_down = all_down && !port_enabled(pied, p.name);
        add("isolated." + pied, all_down, "all ports disabled", all_down ? "all ports disabled" : "some port enabled");
    }
    for (const auto& pied : as.cied_active) {
        bool enabled = false;
        for (const auto* c : scenario_.with_role(Role::CIED)) {
            for (const auto& r : c->replicates) {
                if (r.pied == pied) enabled = port_enabled(c->id, r.port);
            }
        }
        add("cied_active." + pied, enabled, "CIED port enabled", enabled ? "CIED port enabled" : "CIED port disabled");
    }
    if (as.attacker_drop_rule) {
        const bool got = attacker_drop_rule_installed();
        add("attacker_drop_rule", got == *as.attacker_drop_rule, json(*as.attacker_drop_rule).dump(), json(got).dump());
    }
    if (as.attacker_isolated) {
        const bool mitigated = mitigation_time().has_value();
        const auto leaked = attacker_frames_after_mitigation();
        const bool got = mitigated && leaked == 0;
        add("attacker_isolated", got == *as.attacker_isolated, json(*as.attacker_isolated).dump(),
            mitigated ? std::to_string(leaked) + " frames after mitigation" : "no mitigation");
    }
    if (as.cied_goose_in_capture) {
        const auto n = cied_goose_frames_captured();
        add("cied_goose_in_capture", (n > 0) == *as.cied_goose_in_capture, json(*as.cied_goose_in_capture).dump(),
            std::to_string(n) + " frames");
    }
    return out;
}

json Simulation::summary() const {
    json j;
    j["scenario"] = scenario_.name;
    j["seed"] = options_.seed.value_or(scenario_.seed);
    j["duration_s"] = time_to_seconds(duration_);
    j["ids_enabled"] = ids_ && ids_->enabled();
    j["objective"] = apc_->objective();

    json alerts = json::array();
    if (ids_) {
        for (const auto& a : ids_->alerts()) alerts.push_back(ids::to_json(a, fabric_.switch_name(a.suspected_ingress.sw)));
        j["alerts_suppressed"] = ids_->detector().suppressed();
        j["frames_inspected"] = ids_->detector().inspected();
    }
    j["alerts"] = alerts;

    json plans = json::array();
    for (const auto& p : apc_->plans()) plans.push_back(apc::to_json(p, fabric_));
    j["plans"] = plans;
    json solutions = json::array();
    for (const auto& s : apc_->solutions()) {
        solutions.push_back({{"D", s.disabled}, {"E", s.cied_enabled}, {"F", s.redirected}, {"objective", s.objective}});
    }
    j["pssa_solutions"] = solutions;
    j["banners"] = apc_->banners();

    json breakers = json::object();
    for (const auto& [id, b] : breakers_) {
        const auto& cb = b->breaker();
        breakers[id] = {{"position", devices::to_string(cb.position())},
                        {"last_trip_time_s", time_json(cb.last_trip_time())},
                        {"tripped_by", cb.tripped_by()}};
    }
    j["breakers"] = breakers;

    json pieds = json::object();
    for (const auto* d : scenario_.pieds()) {
        json ports = json::object();
        for (const auto& p : d->ports) ports[p.name] = port_enabled(d->id, p.name) ? "enabled" : "disabled";
        pieds[d->id] = {{"health", devices::to_string(protection_.at(d->id)->health())},
                        {"failover_state", apc::to_string(apc_->state(d->id))},
                        {"ports", ports}};
    }
    j["pieds"] = pieds;
    json cied = json::object();
    for (const auto* c : scenario_.with_role(Role::CIED)) {
        for (const auto& r : c->replicates) {
            cied[r.pied] = {{"port", r.port},
                            {"go_id", r.goose.go_id},
                            {"active", port_enabled(c->id, r.port)}};
        }
    }
    j["cied"] = cied;

    j["failover_time_s"] = time_json(failover_time_);
    j["mitigation_time_s"] = time_json(mitigation_time());
    j["attacker_frames_sent"] = attacker_frames().size();
    j["attacker_frames_after_mitigation"] = attacker_frames_after_mitigation();
    j["cied_goose_frames_captured"] = cied_goose_frames_captured();
    j["frames_transmitted"] = fabric_.frames_transmitted();
    j["events_processed"] = scheduler_.processed();

    json results = json::array();
    bool all = true;
    for (const auto& r : check_assertions()) {
        all = all && r.pass;
        results.push_back({{"name", r.name}, {"pass", r.pass}, {"expected", r.expected}, {"actual", r.actual}});
    }
    j["assertions"] = results;
    j["assertions_pass"] = all;
    return j;
}

void Simulation::write_outputs(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "events.jsonl", std::ios::binary);
        log_.write_jsonl(out);
    }
    for (std::uint16_t sw = 0; sw < fabric_.switch_count(); ++sw) {
        pcap::write_file((fs::path(dir) / (fabric_.switch_name(sw) + ".pcap")).string(), fabric_.capture(sw));
    }
    pcap::write_file((fs::path(dir) / "merged.pcap").string(), fabric_.merged_capture());
    std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
    out << summary().dump(2) << '\n';
}

}  // namespace scs::sim
