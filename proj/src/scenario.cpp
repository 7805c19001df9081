#include "scs/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace scs::scenario {

using nlohmann::json;

namespace {

constexpr std::initializer_list<Role> kRoles = {Role::MU,  Role::PIED_OC, Role::PIED_DIFF, Role::CIED,
                                                Role::CB,  Role::IDS,     Role::ATTACKER};

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ValidationError({path + ": " + msg}); }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) fail(path, "unknown field '" + key + "'");
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) fail(path, "missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, e.what());
    }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return get<T>(j, key, path);
}

SimTime seconds(const json& j, const std::string& key, const std::string& path) {
    return seconds_to_time(get<double>(j, key, path));
}

SimTime micros(const json& j, const std::string& key, const std::string& path, SimTime fallback) {
    if (!j.contains(key)) return fallback;
    return static_cast<SimTime>(get<double>(j, key, path) * 1e3 + 0.5);
}

double to_micros(SimTime t) { return static_cast<double>(t) / 1e3; }

const json& array_at(const json& j, const std::string& key, const std::string& path) {
    static const json empty = json::array();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_array()) fail(path + "." + key, "expected an array");
    return j.at(key);
}

codec::MacAddress mac(const json& j, const std::string& key, const std::string& path) {
    const auto text = get<std::string>(j, key, path);
    try {
        return codec::MacAddress::parse(text);
    } catch (const std::exception& e) {
        fail(path + "." + key, e.what());
    }
}

std::uint16_t appid(const json& j, const std::string& key, const std::string& path, std::uint16_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0 && v.get<std::int64_t>() <= 0xffff) return v.get<std::uint16_t>();
    if (v.is_string()) {
        const auto text = v.get<std::string>();
        try {
            std::size_t used = 0;
            const unsigned long value = std::stoul(text, &used, 0);
            if (used == text.size() && value <= 0xffff) return static_cast<std::uint16_t>(value);
        } catch (const std::exception&) {
        }
    }
    fail(path + "." + key, "expected a 16-bit APPID");
}

std::string hex16(std::uint16_t v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04x", v);
    return buf;
}

Anchor anchor(const json& j, const std::string& path) {
    const auto text = get_or<std::string>(j, "anchor", path, "absolute");
    if (text == "absolute") return Anchor::absolute;
    if (text == "failover") return Anchor::failover;
    fail(path + ".anchor", "expected 'absolute' or 'failover'");
}

std::string_view to_string(Anchor a) { return a == Anchor::absolute ? "absolute" : "failover"; }

// ---------------------------------------------------------------------------

devices::GooseConfig goose_config(const json& j, const std::string& path) {
    devices::GooseConfig c;
    c.gocb_ref = get<std::string>(j, "gocb_ref", path);
    c.dat_set = get<std::string>(j, "dat_set", path);
    c.go_id = get<std::string>(j, "go_id", path);
    c.appid = appid(j, "appid", path, 0x0001);
    c.dst = mac(j, "dst", path);
    c.conf_rev = get_or<std::uint32_t>(j, "conf_rev", path, 1);
    return c;
}

json goose_json(const devices::GooseConfig& c) {
    return {{"gocb_ref", c.gocb_ref}, {"dat_set", c.dat_set},        {"go_id", c.go_id},
            {"appid", hex16(c.appid)}, {"dst", c.dst.to_string()}, {"conf_rev", c.conf_rev}};
}

PortSpec port_spec(const json& j, const std::string& path) {
    check_keys(j, path, {"name", "switch", "port", "mac", "monitor"});
    PortSpec p;
    p.name = get<std::string>(j, "name", path);
    p.sw = get<std::string>(j, "switch", path);
    p.port = get<std::uint16_t>(j, "port", path);
    p.mac = mac(j, "mac", path);
    p.monitor = get_or<bool>(j, "monitor", path, false);
    return p;
}

devices::SvStreamConfig sv_stream(const json& j, const std::string& path) {
    check_keys(j, path, {"sv_id", "appid", "dst", "conf_rev", "source", "polarity"});
    devices::SvStreamConfig s;
    s.sv_id = get<std::string>(j, "sv_id", path);
    s.appid = appid(j, "appid", path, 0x4000);
    s.dst = mac(j, "dst", path);
    s.conf_rev = get_or<std::uint32_t>(j, "conf_rev", path, 1);
    s.source = get<std::string>(j, "source", path);
    s.polarity = get_or<double>(j, "polarity", path, 1.0);
    return s;
}

devices::ProtectionSettings settings(const json& j, const std::string& path) {
    check_keys(j, path, {"oc_pickup_a", "oc_delay_ms", "diff_min_operate_a", "diff_slope"});
    devices::ProtectionSettings s;
    s.oc_pickup_a = get_or<double>(j, "oc_pickup_a", path, s.oc_pickup_a);
    if (j.contains("oc_delay_ms")) s.oc_delay = static_cast<SimTime>(get<double>(j, "oc_delay_ms", path) * 1e6 + 0.5);
    s.diff_min_operate_a = get_or<double>(j, "diff_min_operate_a", path, s.diff_min_operate_a);
    s.diff_slope = get_or<double>(j, "diff_slope", path, s.diff_slope);
    return s;
}

DeviceSpec device_spec(const json& j, const std::string& path) {
    check_keys(j, path,
               {"id", "role", "ports", "sv_streams", "subscriptions", "goose", "settings", "weight", "disableable",
                "replicates"});
    DeviceSpec d;
    d.id = get<std::string>(j, "id", path);
    const auto role = get<std::string>(j, "role", path);
    const auto r = parse_role(role);
    if (!r) fail(path + ".role", "unknown role '" + role + "'");
    d.role = *r;
    const std::string where = "device " + d.id;
    const auto& ports = array_at(j, "ports", where);
    for (std::size_t i = 0; i < ports.size(); ++i) d.ports.push_back(port_spec(ports[i], where + ".ports[" + std::to_string(i) + "]"));
    const auto& streams = array_at(j, "sv_streams", where);
    for (std::size_t i = 0; i < streams.size(); ++i) {
        d.sv_streams.push_back(sv_stream(streams[i], where + ".sv_streams[" + std::to_string(i) + "]"));
    }
    d.subscriptions = get_or<std::vector<std::string>>(j, "subscriptions", where, {});
    if (j.contains("goose")) {
        const auto& g = j.at("goose");
        check_keys(g, where + ".goose", {"port", "gocb_ref", "dat_set", "go_id", "appid", "dst", "conf_rev"});
        d.goose = GooseSpec{get<std::string>(g, "port", where + ".goose"), goose_config(g, where + ".goose")};
    }
    if (j.contains("settings")) d.settings = settings(j.at("settings"), where + ".settings");
    d.weight = get_or<double>(j, "weight", where, 1.0);
    d.disableable = get_or<bool>(j, "disableable", where, true);
    const auto& reps = array_at(j, "replicates", where);
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const std::string rp = where + ".replicates[" + std::to_string(i) + "]";
        check_keys(reps[i], rp, {"pied", "port", "goose"});
        if (!reps[i].contains("goose")) fail(rp, "missing field 'goose'");
        check_keys(reps[i].at("goose"), rp + ".goose", {"gocb_ref", "dat_set", "go_id", "appid", "dst", "conf_rev"});
        d.replicates.push_back({get<std::string>(reps[i], "pied", rp), get<std::string>(reps[i], "port", rp),
                                goose_config(reps[i].at("goose"), rp + ".goose")});
    }
    return d;
}

json device_json(const DeviceSpec& d) {
    json j{{"id", d.id}, {"role", to_string(d.role)}};
    json ports = json::array();
    for (const auto& p : d.ports) {
        json pj{{"name", p.name}, {"switch", p.sw}, {"port", p.port}, {"mac", p.mac.to_string()}};
        if (p.monitor) pj["monitor"] = true;
        ports.push_back(pj);
    }
    j["ports"] = ports;
    if (!d.sv_streams.empty()) {
        json streams = json::array();
        for (const auto& s : d.sv_streams) {
            streams.push_back({{"sv_id", s.sv_id},
                               {"appid", hex16(s.appid)},
                               {"dst", s.dst.to_string()},
                               {"conf_rev", s.conf_rev},
                               {"source", s.source},
                               {"polarity", s.polarity}});
        }
        j["sv_streams"] = streams;
    }
    if (!d.subscriptions.empty()) j["subscriptions"] = d.subscriptions;
    if (d.goose) {
        json g = goose_json(d.goose->config);
        g["port"] = d.goose->port;
        j["goose"] = g;
    }
    if (is_pied(d.role)) {
        j["settings"] = {{"oc_pickup_a", d.settings.oc_pickup_a},
                         {"oc_delay_ms", static_cast<double>(d.settings.oc_delay) / 1e6},
                         {"diff_min_operate_a", d.settings.diff_min_operate_a},
                         {"diff_slope", d.settings.diff_slope}};
        j["weight"] = d.weight;
        j["disableable"] = d.disableable;
    }
    if (!d.replicates.empty()) {
        json reps = json::array();
        for (const auto& r : d.replicates) reps.push_back({{"pied", r.pied}, {"port", r.port}, {"goose", goose_json(r.goose)}});
        j["replicates"] = reps;
    }
    return j;
}

ids::RuleConfig rule_config(const json& j, const std::string& path) {
    check_keys(j, path,
               {"rules", "g2_max_jump", "g4_max_changes_per_s", "s3_bound_multiple", "nominal_a", "s4_tolerance",
                "s4_window_ms", "suppression_ms", "enabled"});
    ids::RuleConfig c;
    if (j.contains("rules")) {
        const auto& rules = j.at("rules");
        if (!rules.is_object()) fail(path + ".rules", "expected an object");
        for (const auto& [rule, on] : rules.items()) {
            if (!c.enabled.count(rule)) fail(path + ".rules", "unknown rule '" + rule + "'");
            if (!on.is_boolean()) fail(path + ".rules." + rule, "expected a boolean");
            c.enabled[rule] = on.get<bool>();
        }
    }
    c.g2_max_jump = get_or<std::uint32_t>(j, "g2_max_jump", path, c.g2_max_jump);
    c.g4_max_changes_per_s = get_or<double>(j, "g4_max_changes_per_s", path, c.g4_max_changes_per_s);
    c.s3_bound_multiple = get_or<double>(j, "s3_bound_multiple", path, c.s3_bound_multiple);
    c.nominal_a = get_or<double>(j, "nominal_a", path, c.nominal_a);
    c.s4_tolerance = get_or<double>(j, "s4_tolerance", path, c.s4_tolerance);
    if (j.contains("s4_window_ms")) c.s4_window = static_cast<SimTime>(get<double>(j, "s4_window_ms", path) * 1e6 + 0.5);
    if (j.contains("suppression_ms")) {
        c.suppression = static_cast<SimTime>(get<double>(j, "suppression_ms", path) * 1e6 + 0.5);
    }
    return c;
}

json rule_json(const IdsSpec& ids) {
    const auto& c = ids.rules;
    json rules = json::object();
    for (const auto& [rule, on] : c.enabled) rules[rule] = on;
    return {{"enabled", ids.enabled},
            {"rules", rules},
            {"g2_max_jump", c.g2_max_jump},
            {"g4_max_changes_per_s", c.g4_max_changes_per_s},
            {"s3_bound_multiple", c.s3_bound_multiple},
            {"nominal_a", c.nominal_a},
            {"s4_tolerance", c.s4_tolerance},
            {"s4_window_ms", static_cast<double>(c.s4_window) / 1e6},
            {"suppression_ms", static_cast<double>(c.suppression) / 1e6}};
}

attacks::AttackSpec attack_spec(const json& j, const std::string& path) {
    check_keys(j, path,
               {"kind", "attacker", "port", "start_s", "end_s", "target", "magnitude", "st_strategy", "st_jump",
                "interval_ms", "stealth", "reaction_us"});
    attacks::AttackSpec a;
    const auto kind = get<std::string>(j, "kind", path);
    const auto k = attacks::parse_attack_kind(kind);
    if (!k) fail(path + ".kind", "unknown attack kind '" + kind + "'");
    a.kind = *k;
    a.attacker = get<std::string>(j, "attacker", path);
    a.port = get<std::string>(j, "port", path);
    a.start = seconds(j, "start_s", path);
    if (j.contains("end_s") && !j.at("end_s").is_null()) a.end = seconds(j, "end_s", path);
    a.target = get_or<std::string>(j, "target", path, "");
    a.magnitude = get_or<double>(j, "magnitude", path, a.magnitude);
    if (j.contains("st_strategy")) {
        const auto text = get<std::string>(j, "st_strategy", path);
        const auto s = attacks::parse_st_strategy(text);
        if (!s) fail(path + ".st_strategy", "unknown stNum strategy '" + text + "'");
        a.st_strategy = *s;
    }
    a.st_jump = get_or<std::uint32_t>(j, "st_jump", path, a.st_jump);
    if (j.contains("interval_ms")) a.interval = static_cast<SimTime>(get<double>(j, "interval_ms", path) * 1e6 + 0.5);
    a.stealth = get_or<bool>(j, "stealth", path, false);
    a.reaction = micros(j, "reaction_us", path, a.reaction);
    return a;
}

json attack_json(const attacks::AttackSpec& a) {
    json j{{"kind", attacks::to_string(a.kind)},
           {"attacker", a.attacker},
           {"port", a.port},
           {"start_s", time_to_seconds(a.start)},
           {"target", a.target},
           {"magnitude", a.magnitude},
           {"st_strategy", attacks::to_string(a.st_strategy)},
           {"st_jump", a.st_jump},
           {"interval_ms", static_cast<double>(a.interval) / 1e6},
           {"stealth", a.stealth},
           {"reaction_us", to_micros(a.reaction)}};
    if (a.end) j["end_s"] = time_to_seconds(*a.end);
    return j;
}

Assertions assertions(const json& j, const std::string& path) {
    check_keys(j, path,
               {"objective", "alerts_min", "alerts_max", "banners", "cb_position", "cb_tripped_by", "isolated",
                "cied_active", "attacker_drop_rule", "attacker_isolated", "cied_goose_in_capture"});
    Assertions a;
    if (j.contains("objective")) a.objective = get<double>(j, "objective", path);
    if (j.contains("alerts_min")) a.alerts_min = get<std::uint64_t>(j, "alerts_min", path);
    if (j.contains("alerts_max")) a.alerts_max = get<std::uint64_t>(j, "alerts_max", path);
    if (j.contains("banners")) a.banners = get<std::vector<std::string>>(j, "banners", path);
    a.cb_position = get_or<std::map<std::string, std::string>>(j, "cb_position", path, {});
    a.cb_tripped_by = get_or<std::map<std::string, std::string>>(j, "cb_tripped_by", path, {});
    a.isolated = get_or<std::vector<std::string>>(j, "isolated", path, {});
    a.cied_active = get_or<std::vector<std::string>>(j, "cied_active", path, {});
    if (j.contains("attacker_drop_rule")) a.attacker_drop_rule = get<bool>(j, "attacker_drop_rule", path);
    if (j.contains("attacker_isolated")) a.attacker_isolated = get<bool>(j, "attacker_isolated", path);
    if (j.contains("cied_goose_in_capture")) a.cied_goose_in_capture = get<bool>(j, "cied_goose_in_capture", path);
    return a;
}

json assertions_json(const Assertions& a) {
    json j = json::object();
    if (a.objective) j["objective"] = *a.objective;
    if (a.alerts_min) j["alerts_min"] = *a.alerts_min;
    if (a.alerts_max) j["alerts_max"] = *a.alerts_max;
    if (a.banners) j["banners"] = *a.banners;
    if (!a.cb_position.empty()) j["cb_position"] = a.cb_position;
    if (!a.cb_tripped_by.empty()) j["cb_tripped_by"] = a.cb_tripped_by;
    if (!a.isolated.empty()) j["isolated"] = a.isolated;
    if (!a.cied_active.empty()) j["cied_active"] = a.cied_active;
    if (a.attacker_drop_rule) j["attacker_drop_rule"] = *a.attacker_drop_rule;
    if (a.attacker_isolated) j["attacker_isolated"] = *a.attacker_isolated;
    if (a.cied_goose_in_capture) j["cied_goose_in_capture"] = *a.cied_goose_in_capture;
    return j;
}

}  // namespace

std::string_view to_string(Role r) {
    switch (r) {
        case Role::MU: return "MU";
        case Role::PIED_OC: return "PIED_OC";
        case Role::PIED_DIFF: return "PIED_DIFF";
        case Role::CIED: return "CIED";
        case Role::CB: return "CB";
        case Role::IDS: return "IDS";
        case Role::ATTACKER: return "ATTACKER";
    }
    return "unknown";
}

std::optional<Role> parse_role(std::string_view s) {
    for (auto r : kRoles) {
        if (to_string(r) == s) return r;
    }
    return std::nullopt;
}

const PortSpec* DeviceSpec::port(const std::string& name) const {
    for (const auto& p : ports) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

const DeviceSpec* Scenario::device(const std::string& id) const {
    for (const auto& d : devices) {
        if (d.id == id) return &d;
    }
    return nullptr;
}

std::vector<const DeviceSpec*> Scenario::with_role(Role r) const {
    std::vector<const DeviceSpec*> out;
    for (const auto& d : devices) {
        if (d.role == r) out.push_back(&d);
    }
    return out;
}

std::vector<const DeviceSpec*> Scenario::pieds() const {
    std::vector<const DeviceSpec*> out;
    for (const auto& d : devices) {
        if (is_pied(d.role)) out.push_back(&d);
    }
    return out;
}

devices::WaveformSource Scenario::waveform() const {
    devices::WaveformSource w;
    w.frequency_hz = frequency_hz;
    w.voltage_rms_v = voltage_rms_v;
    w.schedule = schedule;
    for (const auto& f : faults) {
        if (f.anchor == Anchor::absolute) w.faults.push_back(f.segment);
    }
    return w;
}

static std::string join_problems(const std::vector<std::string>& problems) {
    std::string out = "invalid scenario";
    for (const auto& p : problems) out += "\n  " + p;
    return out;
}

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

Scenario from_json(const json& j) {
    const std::string root = "scenario";
    check_keys(j, root,
               {"name", "description", "duration_s", "seed", "sample_rate", "frequency_hz", "latency_us",
                "control_latency_us", "switches", "trunks", "devices", "waveform", "pssa", "ids", "attacks",
                "operator_actions", "device_failures", "assertions"});
    Scenario s;
    s.name = get_or<std::string>(j, "name", root, "");
    s.description = get_or<std::string>(j, "description", root, "");
    s.duration = seconds(j, "duration_s", root);
    s.seed = get_or<std::uint64_t>(j, "seed", root, 1);
    s.sample_rate = get_or<std::uint32_t>(j, "sample_rate", root, devices::kDefaultSampleRate);
    s.frequency_hz = get_or<double>(j, "frequency_hz", root, devices::kDefaultFrequency);
    if (j.contains("latency_us")) {
        const auto& l = j.at("latency_us");
        check_keys(l, "latency_us", {"min", "max"});
        s.latency_min = micros(l, "min", "latency_us", s.latency_min);
        s.latency_max = micros(l, "max", "latency_us", s.latency_max);
    }
    s.control_latency = micros(j, "control_latency_us", root, s.control_latency);
    s.switches = get<std::vector<std::string>>(j, "switches", root);

    const auto& trunks = array_at(j, "trunks", root);
    for (std::size_t i = 0; i < trunks.size(); ++i) {
        const std::string p = "trunks[" + std::to_string(i) + "]";
        check_keys(trunks[i], p, {"a", "b"});
        const auto end = [&](const char* side) {
            if (!trunks[i].contains(side)) fail(p, std::string("missing field '") + side + "'");
            const auto& e = trunks[i].at(side);
            check_keys(e, p + "." + side, {"switch", "port"});
            return std::pair{get<std::string>(e, "switch", p + "." + side), get<std::uint16_t>(e, "port", p + "." + side)};
        };
        const auto [as, ap] = end("a");
        const auto [bs, bp] = end("b");
        s.trunks.push_back({as, ap, bs, bp});
    }

    const auto& devs = array_at(j, "devices", root);
    for (std::size_t i = 0; i < devs.size(); ++i) s.devices.push_back(device_spec(devs[i], "devices[" + std::to_string(i) + "]"));

    if (j.contains("waveform")) {
        const auto& w = j.at("waveform");
        check_keys(w, "waveform", {"voltage_rms_v", "schedule", "faults"});
        s.voltage_rms_v = get_or<double>(w, "voltage_rms_v", "waveform", s.voltage_rms_v);
        if (w.contains("schedule")) {
            s.schedule.clear();
            const auto& steps = array_at(w, "schedule", "waveform");
            for (std::size_t i = 0; i < steps.size(); ++i) {
                const std::string p = "waveform.schedule[" + std::to_string(i) + "]";
                check_keys(steps[i], p, {"start_s", "rms_a"});
                s.schedule.push_back({seconds(steps[i], "start_s", p), get<double>(steps[i], "rms_a", p)});
            }
        }
        const auto& faults = array_at(w, "faults", "waveform");
        for (std::size_t i = 0; i < faults.size(); ++i) {
            const std::string p = "waveform.faults[" + std::to_string(i) + "]";
            check_keys(faults[i], p, {"start_s", "end_s", "multiplier", "sources", "invert", "anchor"});
            FaultSpec f;
            f.segment.start = seconds(faults[i], "start_s", p);
            f.segment.end = seconds(faults[i], "end_s", p);
            f.segment.multiplier = get<double>(faults[i], "multiplier", p);
            f.segment.sources = get_or<std::vector<std::string>>(faults[i], "sources", p, {});
            f.segment.invert = get_or<bool>(faults[i], "invert", p, false);
            f.anchor = anchor(faults[i], p);
            s.faults.push_back(f);
        }
    }

    if (j.contains("pssa")) {
        check_keys(j.at("pssa"), "pssa", {"gamma"});
        s.gamma = get_or<double>(j.at("pssa"), "gamma", "pssa", s.gamma);
    }
    if (j.contains("ids")) {
        s.ids.enabled = get_or<bool>(j.at("ids"), "enabled", "ids", true);
        s.ids.rules = rule_config(j.at("ids"), "ids");
    }
    s.ids.rules.sample_rate = s.sample_rate;

    const auto& atk = array_at(j, "attacks", root);
    for (std::size_t i = 0; i < atk.size(); ++i) s.attacks.push_back(attack_spec(atk[i], "attacks[" + std::to_string(i) + "]"));

    const auto& ops = array_at(j, "operator_actions", root);
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const std::string p = "operator_actions[" + std::to_string(i) + "]";
        check_keys(ops[i], p, {"kind", "device", "at_s", "anchor"});
        OperatorAction a;
        const auto kind = get<std::string>(ops[i], "kind", p);
        if (kind == "cb_close") {
            a.kind = OperatorAction::Kind::cb_close;
        } else if (kind == "failback") {
            a.kind = OperatorAction::Kind::failback;
        } else {
            fail(p + ".kind", "expected 'cb_close' or 'failback'");
        }
        a.device = get<std::string>(ops[i], "device", p);
        a.at = seconds(ops[i], "at_s", p);
        a.anchor = anchor(ops[i], p);
        s.operator_actions.push_back(a);
    }

    const auto& fails = array_at(j, "device_failures", root);
    for (std::size_t i = 0; i < fails.size(); ++i) {
        const std::string p = "device_failures[" + std::to_string(i) + "]";
        check_keys(fails[i], p, {"pied", "at_s", "diagnostic"});
        s.device_failures.push_back({get<std::string>(fails[i], "pied", p), seconds(fails[i], "at_s", p),
                                     get_or<std::string>(fails[i], "diagnostic", p, "self-test failure")});
    }

    if (j.contains("assertions")) s.assertions = assertions(j.at("assertions"), "assertions");
    return s;
}

json to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["description"] = s.description;
    j["duration_s"] = time_to_seconds(s.duration);
    j["seed"] = s.seed;
    j["sample_rate"] = s.sample_rate;
    j["frequency_hz"] = s.frequency_hz;
    j["latency_us"] = {{"min", to_micros(s.latency_min)}, {"max", to_micros(s.latency_max)}};
    j["control_latency_us"] = to_micros(s.control_latency);
    j["switches"] = s.switches;
    json trunks = json::array();
    for (const auto& t : s.trunks) {
        trunks.push_back({{"a", {{"switch", t.a_switch}, {"port", t.a_port}}}, {"b", {{"switch", t.b_switch}, {"port", t.b_port}}}});
    }
    j["trunks"] = trunks;
    json devs = json::array();
    for (const auto& d : s.devices) devs.push_back(device_json(d));
    j["devices"] = devs;

    json schedule = json::array();
    for (const auto& st : s.schedule) schedule.push_back({{"start_s", time_to_seconds(st.start)}, {"rms_a", st.rms_a}});
    json faults = json::array();
    for (const auto& f : s.faults) {
        faults.push_back({{"start_s", time_to_seconds(f.segment.start)},
                          {"end_s", time_to_seconds(f.segment.end)},
                          {"multiplier", f.segment.multiplier},
                          {"sources", f.segment.sources},
                          {"invert", f.segment.invert},
                          {"anchor", to_string(f.anchor)}});
    }
    j["waveform"] = {{"voltage_rms_v", s.voltage_rms_v}, {"schedule", schedule}, {"faults", faults}};
    j["pssa"] = {{"gamma", s.gamma}};
    j["ids"] = rule_json(s.ids);

    json atk = json::array();
    for (const auto& a : s.attacks) atk.push_back(attack_json(a));
    j["attacks"] = atk;
    json ops = json::array();
    for (const auto& a : s.operator_actions) {
        ops.push_back({{"kind", a.kind == OperatorAction::Kind::cb_close ? "cb_close" : "failback"},
                       {"device", a.device},
                       {"at_s", time_to_seconds(a.at)},
                       {"anchor", to_string(a.anchor)}});
    }
    j["operator_actions"] = ops;
    json fails = json::array();
    for (const auto& f : s.device_failures) {
        fails.push_back({{"pied", f.pied}, {"at_s", time_to_seconds(f.at)}, {"diagnostic", f.diagnostic}});
    }
    j["device_failures"] = fails;
    j["assertions"] = assertions_json(s.assertions);
    return j;
}

Scenario parse(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError({std::string("not valid JSON: ") + e.what()});
    }
    return from_json(j);
}

Scenario load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError({"cannot open " + path});
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

// ---------------------------------------------------------------------------

void validate(const Scenario& s) {
    std::vector<std::string> problems;
    const auto problem = [&](std::string msg) { problems.push_back(std::move(msg)); };

    if (s.duration <= 0) problem("duration_s must be positive");
    if (s.sample_rate == 0) problem("sample_rate must be positive");
    if (!(s.frequency_hz > 0.0)) problem("frequency_hz must be positive");
    if (s.sample_rate > 0 && s.frequency_hz > 0.0) {
        const double per_cycle = s.sample_rate / s.frequency_hz;
        if (per_cycle != static_cast<double>(static_cast<std::uint64_t>(per_cycle)) || per_cycle < 2) {
            problem("sample_rate must be a whole multiple (>= 2) of frequency_hz");
        }
    }
    if (s.latency_min <= 0 || s.latency_max < s.latency_min) problem("latency_us needs 0 < min <= max");
    if (s.control_latency < 0) problem("control_latency_us must be non-negative");
    if (!(s.gamma > 0.0)) problem("pssa.gamma must be positive");
    try {
        s.waveform().validate();
    } catch (const std::exception& e) {
        problem(std::string("waveform: ") + e.what());
    }
    for (std::size_t i = 0; i < s.faults.size(); ++i) {
        const auto& f = s.faults[i].segment;
        if (f.end <= f.start) problem("waveform.faults[" + std::to_string(i) + "] must end after it starts");
        if (!(f.multiplier >= 0.0)) problem("waveform.faults[" + std::to_string(i) + "] multiplier must be >= 0");
    }

    std::set<std::string> switches;
    for (const auto& sw : s.switches) {
        if (!switches.insert(sw).second) problem("duplicate switch '" + sw + "'");
    }
    if (s.switches.empty()) problem("at least one switch is required");

    std::set<std::pair<std::string, std::uint16_t>> used_ports;
    const auto claim = [&](const std::string& sw, std::uint16_t port, const std::string& who) {
        if (!switches.count(sw)) {
            problem(who + " references unknown switch '" + sw + "'");
            return;
        }
        if (port == 0) problem(who + " uses port 0; ports are numbered from 1");
        if (!used_ports.insert({sw, port}).second) problem(who + " reuses " + sw + " port " + std::to_string(port));
    };
    for (std::size_t i = 0; i < s.trunks.size(); ++i) {
        const auto& t = s.trunks[i];
        claim(t.a_switch, t.a_port, "trunks[" + std::to_string(i) + "]");
        claim(t.b_switch, t.b_port, "trunks[" + std::to_string(i) + "]");
        if (t.a_switch == t.b_switch) problem("trunks[" + std::to_string(i) + "] must join two different switches");
    }

    std::set<std::string> ids;
    std::set<codec::MacAddress> macs;
    std::set<std::string> sv_ids;
    std::map<std::string, std::string> go_ids;  // goID -> publishing device
    for (const auto& d : s.devices) {
        if (d.id.empty()) problem("device with empty id");
        if (!ids.insert(d.id).second) problem("duplicate device id '" + d.id + "'");
        std::set<std::string> names;
        for (const auto& p : d.ports) {
            const std::string who = "device " + d.id + " port " + p.name;
            if (!names.insert(p.name).second) problem("device " + d.id + " has duplicate port name '" + p.name + "'");
            claim(p.sw, p.port, who);
            if (!p.monitor && !macs.insert(p.mac).second) problem(who + " reuses MAC " + p.mac.to_string());
            if (p.monitor && d.role != Role::IDS) problem(who + ": only the IDS may own monitor ports");
        }
        if (d.ports.empty()) problem("device " + d.id + " has no ports");
        for (const auto& st : d.sv_streams) {
            if (!sv_ids.insert(st.sv_id).second) problem("duplicate svID '" + st.sv_id + "'");
            if (st.sv_id.size() > codec::kMaxTextField) problem("svID '" + st.sv_id + "' exceeds 65 bytes");
            if (!st.dst.is_sv_multicast()) problem("svID '" + st.sv_id + "' destination is not an SV multicast address");
        }
        const auto add_goose = [&](const devices::GooseConfig& g) {
            if (!go_ids.emplace(g.go_id, d.id).second) problem("duplicate goID '" + g.go_id + "'");
            for (const auto* f : {&g.go_id, &g.gocb_ref, &g.dat_set}) {
                if (f->size() > codec::kMaxTextField) problem("device " + d.id + ": GOOSE text field exceeds 65 bytes");
            }
            if (!g.dst.is_goose_multicast()) problem("goID '" + g.go_id + "' destination is not a GOOSE multicast address");
        };
        if (d.goose) add_goose(d.goose->config);
        for (const auto& r : d.replicates) add_goose(r.goose);
    }

    for (const auto& d : s.devices) {
        const std::string who = "device " + d.id;
        switch (d.role) {
            case Role::MU:
                if (d.sv_streams.empty()) problem(who + " publishes no SV streams");
                if (d.ports.size() != 1) problem(who + " needs exactly one port");
                break;
            case Role::PIED_OC:
            case Role::PIED_DIFF: {
                const std::size_t want = d.role == Role::PIED_OC ? 1 : 2;
                if (d.subscriptions.size() != want) {
                    problem(who + " must subscribe to exactly " + std::to_string(want) + " SV stream(s)");
                }
                for (const auto& sub : d.subscriptions) {
                    if (!sv_ids.count(sub)) problem(who + " subscribes to undeclared svID '" + sub + "'");
                }
                if (!d.goose) {
                    problem(who + " has no GOOSE publisher");
                } else if (!d.port(d.goose->port)) {
                    problem(who + " publishes GOOSE on unknown port '" + d.goose->port + "'");
                }
                try {
                    d.settings.validate();
                } catch (const std::exception& e) {
                    problem(who + " settings: " + e.what());
                }
                if (!(d.weight > 0.0)) problem(who + " weight must be positive");
                std::size_t replicas = 0;
                for (const auto* c : s.with_role(Role::CIED)) {
                    for (const auto& r : c->replicates) replicas += r.pied == d.id;
                }
                if (replicas != 1) problem(who + " must be replicated by exactly one CIED function");
                break;
            }
            case Role::CIED:
                if (d.replicates.empty()) problem(who + " replicates no PIED");
                for (const auto& r : d.replicates) {
                    const auto* p = s.device(r.pied);
                    if (!p || !is_pied(p->role)) problem(who + " replicates unknown PIED '" + r.pied + "'");
                    if (!d.port(r.port)) problem(who + " replica port '" + r.port + "' is not declared");
                }
                break;
            case Role::CB:
                if (d.subscriptions.empty()) problem(who + " subscribes to no goID");
                for (const auto& sub : d.subscriptions) {
                    if (!go_ids.count(sub)) problem(who + " subscribes to undeclared goID '" + sub + "'");
                }
                break;
            case Role::IDS:
                for (const auto& p : d.ports) {
                    if (!p.monitor) problem(who + " port " + p.name + " must be a monitor port");
                }
                break;
            case Role::ATTACKER: break;
        }
    }
    if (s.with_role(Role::MU).size() > 1) problem("at most one MU device is supported");
    if (s.with_role(Role::IDS).size() > 1) problem("at most one IDS device is supported");
    if (s.with_role(Role::CIED).size() > 1) problem("at most one CIED device is supported");
    for (const auto* ids_dev : s.with_role(Role::IDS)) {
        std::set<std::string> covered;
        for (const auto& p : ids_dev->ports) {
            if (!covered.insert(p.sw).second) problem("IDS has two monitor ports on switch " + p.sw);
        }
    }

    for (std::size_t i = 0; i < s.attacks.size(); ++i) {
        const auto& a = s.attacks[i];
        const std::string who = "attacks[" + std::to_string(i) + "]";
        const auto* dev = s.device(a.attacker);
        if (!dev || dev->role != Role::ATTACKER) {
            problem(who + " attacker '" + a.attacker + "' is not an ATTACKER device");
        } else if (!dev->port(a.port)) {
            problem(who + " uses unknown attacker port '" + a.port + "'");
        }
        if (a.start < 0 || a.start >= s.duration) problem(who + " start must lie within the scenario duration");
        if (a.end && *a.end <= a.start) problem(who + " end must come after start");
        if (a.interval <= 0) problem(who + " interval must be positive");
        if (a.reaction < 0) problem(who + " reaction must be non-negative");
        switch (a.kind) {
            case attacks::AttackKind::sv_inject:
                if (!sv_ids.count(a.target)) problem(who + " targets undeclared svID '" + a.target + "'");
                if (!(a.magnitude >= 0.0)) problem(who + " magnitude must be non-negative");
                break;
            case attacks::AttackKind::goose_spoof:
                if (!go_ids.count(a.target)) problem(who + " targets undeclared goID '" + a.target + "'");
                break;
            case attacks::AttackKind::replay:
                if (!go_ids.count(a.target) && !sv_ids.count(a.target)) {
                    problem(who + " targets undeclared stream '" + a.target + "'");
                }
                break;
            case attacks::AttackKind::malformed:
                if (!a.target.empty() && !go_ids.count(a.target)) {
                    problem(who + " targets undeclared goID '" + a.target + "'");
                }
                break;
        }
    }

    for (std::size_t i = 0; i < s.operator_actions.size(); ++i) {
        const auto& a = s.operator_actions[i];
        const std::string who = "operator_actions[" + std::to_string(i) + "]";
        const auto* dev = s.device(a.device);
        if (a.kind == OperatorAction::Kind::cb_close && (!dev || dev->role != Role::CB)) {
            problem(who + " cb_close needs a CB device, got '" + a.device + "'");
        }
        if (a.kind == OperatorAction::Kind::failback && (!dev || !is_pied(dev->role))) {
            problem(who + " failback needs a PIED, got '" + a.device + "'");
        }
        if (a.at < 0) problem(who + " time must be non-negative");
    }
    for (std::size_t i = 0; i < s.device_failures.size(); ++i) {
        const auto& f = s.device_failures[i];
        const auto* dev = s.device(f.pied);
        if (!dev || !is_pied(dev->role)) problem("device_failures[" + std::to_string(i) + "] needs a PIED");
        if (f.at < 0 || f.at >= s.duration) problem("device_failures[" + std::to_string(i) + "] time outside duration");
    }

    const auto& as = s.assertions;
    for (const auto& [cb, pos] : as.cb_position) {
        const auto* dev = s.device(cb);
        if (!dev || dev->role != Role::CB) problem("assertions.cb_position names unknown CB '" + cb + "'");
        if (pos != "open" && pos != "closed") problem("assertions.cb_position values are 'open' or 'closed'");
    }
    for (const auto& [cb, go] : as.cb_tripped_by) {
        const auto* dev = s.device(cb);
        if (!dev || dev->role != Role::CB) problem("assertions.cb_tripped_by names unknown CB '" + cb + "'");
        if (!go_ids.count(go)) problem("assertions.cb_tripped_by names unknown goID '" + go + "'");
    }
    for (const auto& list : {&as.isolated, &as.cied_active}) {
        for (const auto& p : *list) {
            const auto* dev = s.device(p);
            if (!dev || !is_pied(dev->role)) problem("assertions name unknown PIED '" + p + "'");
        }
    }
    if (as.banners) {
        for (const auto& b : *as.banners) {
            if (b != "SV" && b != "GOOSE") problem("assertions.banners entries are 'SV' or 'GOOSE'");
        }
    }

    if (!problems.empty()) throw ValidationError(std::move(problems));
}

}  // namespace scs::scenario
