#include "ridersim/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ridersim/rng.hpp"

namespace ridersim {

using nlohmann::json;

std::vector<Zone> default_zone_layout(int width, int height, std::uint64_t layout_seed) {
    // Two rows of five centers at fixed grid fractions, jittered a few cells
    // so the layout is not artificially symmetric. The jitter depends only on
    // the layout seed, never on the run seed: every run of an experiment sees
    // the same city. Demand is center-weighted — the middle columns are the
    // downtown core, the edges are quiet — so zones differ in richness and
    // riders in cold zones genuinely lag the city-wide earning rate.
    static constexpr double kXFrac[5] = {0.1, 0.3, 0.5, 0.7, 0.9};
    static constexpr double kYFrac[2] = {0.25, 0.75};
    static constexpr double kColWeight[5] = {0.04, 0.10, 0.18, 0.12, 0.06};
    std::vector<Zone> zones;
    zones.reserve(10);
    int id = 0;
    for (int row = 0; row < 2; ++row) {
        for (int col = 0; col < 5; ++col) {
            RandomStream rng = substream(layout_seed, "zone-layout", static_cast<std::uint64_t>(id));
            Zone z;
            z.id = id;
            z.center.x = static_cast<int>(kXFrac[col] * width) +
                         static_cast<int>(rng.next_int(-5, 5));
            z.center.y = static_cast<int>(kYFrac[row] * height) +
                         static_cast<int>(rng.next_int(-5, 5));
            z.center.x = std::max(0, std::min(width - 1, z.center.x));
            z.center.y = std::max(0, std::min(height - 1, z.center.y));
            z.radius = 8;
            z.weight = kColWeight[col];
            zones.push_back(z);
            ++id;
        }
    }
    return zones;
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.world.zones = default_zone_layout(cfg.world.width, cfg.world.height,
                                          cfg.world.layout_seed);
    return cfg;
}

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
}

void check_known_keys(const json& obj, const std::string& section,
                      const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (!allowed.contains(item.key())) {
            fail("unknown key " + (section.empty() ? item.key() : section + "." + item.key()));
        }
    }
}

double get_num(const json& obj, const std::string& section, const std::string& key,
               double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(section + "." + key + " must be a number");
    return v.get<double>();
}

int get_int(const json& obj, const std::string& section, const std::string& key,
            int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(section + "." + key + " must be an integer");
    return v.get<int>();
}

std::uint64_t get_u64(const json& obj, const std::string& section,
                      const std::string& key, std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(section + "." + key + " must be an integer");
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const auto signed_v = v.get<std::int64_t>();
    if (signed_v < 0) fail(section + "." + key + " must be non-negative");
    return static_cast<std::uint64_t>(signed_v);
}

std::string get_str(const json& obj, const std::string& section,
                    const std::string& key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(section + "." + key + " must be a string");
    return v.get<std::string>();
}

Intelligence parse_intelligence(const std::string& s) {
    if (s == "low") return Intelligence::Low;
    if (s == "medium") return Intelligence::Medium;
    if (s == "high") return Intelligence::High;
    fail("agents.intelligence must be one of low|medium|high, got '" + s + "'");
}

InteractionKind parse_interaction(const std::string& s) {
    if (s == "none") return InteractionKind::None;
    if (s == "local") return InteractionKind::Local;
    if (s == "global") return InteractionKind::Global;
    fail("agents.interaction_mode must be one of none|local|global, got '" + s + "'");
}

GovernanceMode parse_governance(const std::string& s) {
    if (s == "off") return GovernanceMode::Off;
    if (s == "hill_climb") return GovernanceMode::HillClimb;
    fail("platform.governance.mode must be one of off|hill_climb, got '" + s + "'");
}

template <std::size_t N>
void read_array(const json& obj, const std::string& section, const std::string& key,
                std::array<double, N>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != N) {
        fail(section + "." + key + " must be an array of " + std::to_string(N) + " numbers");
    }
    for (std::size_t i = 0; i < N; ++i) {
        if (!v[i].is_number()) fail(section + "." + key + " must contain only numbers");
        out[i] = v[i].get<double>();
    }
}

WorldConfig parse_world(const json& obj) {
    WorldConfig w;
    check_known_keys(obj, "world",
                     {"width", "height", "steps_per_day", "horizon", "n_riders",
                      "speed", "zones", "layout_seed"});
    w.width = get_int(obj, "world", "width", w.width);
    w.height = get_int(obj, "world", "height", w.height);
    w.steps_per_day = get_int(obj, "world", "steps_per_day", w.steps_per_day);
    w.horizon = get_int(obj, "world", "horizon", w.horizon);
    w.n_riders = get_int(obj, "world", "n_riders", w.n_riders);
    w.speed = get_int(obj, "world", "speed", w.speed);
    w.layout_seed = get_u64(obj, "world", "layout_seed", w.layout_seed);
    if (obj.contains("zones")) {
        const json& zs = obj.at("zones");
        if (!zs.is_array() || zs.empty()) fail("world.zones must be a non-empty array");
        w.zones.clear();
        for (const json& zj : zs) {
            if (!zj.is_object()) fail("world.zones entries must be objects");
            check_known_keys(zj, "world.zones[]", {"id", "center", "radius", "weight"});
            Zone z;
            z.id = get_int(zj, "world.zones[]", "id", static_cast<int>(w.zones.size()));
            if (!zj.contains("center") || !zj.at("center").is_array() ||
                zj.at("center").size() != 2) {
                fail("world.zones[].center must be [x, y]");
            }
            z.center.x = zj.at("center")[0].get<int>();
            z.center.y = zj.at("center")[1].get<int>();
            z.radius = get_int(zj, "world.zones[]", "radius", z.radius);
            z.weight = get_num(zj, "world.zones[]", "weight", z.weight);
            w.zones.push_back(z);
        }
    } else {
        w.zones = default_zone_layout(w.width, w.height, w.layout_seed);
    }
    return w;
}

OrderConfig parse_orders(const json& obj) {
    OrderConfig o;
    check_known_keys(obj, "orders",
                     {"a", "b", "c", "volume_multiplier", "expiry", "dropoff_max"});
    read_array(obj, "orders", "a", o.a);
    read_array(obj, "orders", "b", o.b);
    read_array(obj, "orders", "c", o.c);
    o.volume_multiplier = get_num(obj, "orders", "volume_multiplier", o.volume_multiplier);
    o.expiry = get_int(obj, "orders", "expiry", o.expiry);
    o.dropoff_max = get_int(obj, "orders", "dropoff_max", o.dropoff_max);
    return o;
}

AgentConfig parse_agents(const json& obj) {
    AgentConfig a;
    check_known_keys(obj, "agents",
                     {"intelligence", "interaction_mode", "interaction_radius",
                      "alpha", "sigma0", "K", "H", "base_shift", "extend_step",
                      "grab_radius", "rate_window"});
    a.intelligence = parse_intelligence(
        get_str(obj, "agents", "intelligence", to_string(a.intelligence)));
    a.interaction_mode = parse_interaction(
        get_str(obj, "agents", "interaction_mode", to_string(a.interaction_mode)));
    a.interaction_radius = get_int(obj, "agents", "interaction_radius", a.interaction_radius);
    a.alpha = get_num(obj, "agents", "alpha", a.alpha);
    a.sigma0 = get_num(obj, "agents", "sigma0", a.sigma0);
    a.escalation_steps = get_int(obj, "agents", "K", a.escalation_steps);
    a.recovery_steps = get_int(obj, "agents", "H", a.recovery_steps);
    a.base_shift = get_int(obj, "agents", "base_shift", a.base_shift);
    a.extend_step = get_int(obj, "agents", "extend_step", a.extend_step);
    a.grab_radius = get_int(obj, "agents", "grab_radius", a.grab_radius);
    a.rate_window = get_int(obj, "agents", "rate_window", a.rate_window);
    return a;
}

PlatformConfig parse_platform(const json& obj) {
    PlatformConfig p;
    check_known_keys(obj, "platform", {"base_fee", "per_cell_rate", "governance"});
    p.base_fee = get_num(obj, "platform", "base_fee", p.base_fee);
    p.per_cell_rate = get_num(obj, "platform", "per_cell_rate", p.per_cell_rate);
    if (obj.contains("governance")) {
        const json& g = obj.at("governance");
        if (!g.is_object()) fail("platform.governance must be an object");
        check_known_keys(g, "platform.governance", {"mode", "step_size", "epoch_steps"});
        p.governance.mode = parse_governance(
            get_str(g, "platform.governance", "mode", to_string(p.governance.mode)));
        p.governance.step_size =
            get_num(g, "platform.governance", "step_size", p.governance.step_size);
        p.governance.epoch_steps =
            get_int(g, "platform.governance", "epoch_steps", p.governance.epoch_steps);
    }
    return p;
}

MetricsConfig parse_metrics(const json& obj) {
    MetricsConfig m;
    check_known_keys(obj, "metrics", {"eta", "epsilon", "move_cost", "time_cost"});
    m.eta = get_num(obj, "metrics", "eta", m.eta);
    m.epsilon = get_num(obj, "metrics", "epsilon", m.epsilon);
    m.move_cost = get_num(obj, "metrics", "move_cost", m.move_cost);
    m.time_cost = get_num(obj, "metrics", "time_cost", m.time_cost);
    return m;
}

ExperimentConfig parse_experiment(const json& obj) {
    ExperimentConfig e;
    check_known_keys(obj, "experiment",
                     {"factors", "replicates", "base_seed", "bootstrap_rounds"});
    e.replicates = get_int(obj, "experiment", "replicates", e.replicates);
    e.base_seed = get_u64(obj, "experiment", "base_seed", e.base_seed);
    e.bootstrap_rounds = get_int(obj, "experiment", "bootstrap_rounds", e.bootstrap_rounds);
    if (obj.contains("factors")) {
        const json& fs = obj.at("factors");
        if (!fs.is_array()) fail("experiment.factors must be an array");
        for (const json& fj : fs) {
            if (!fj.is_object()) fail("experiment.factors entries must be objects");
            check_known_keys(fj, "experiment.factors[]", {"name", "levels", "controllable"});
            FactorSpec f;
            f.name = get_str(fj, "experiment.factors[]", "name", "");
            if (f.name.empty()) fail("experiment.factors[].name must be non-empty");
            if (!fj.contains("levels") || !fj.at("levels").is_array() ||
                fj.at("levels").empty()) {
                fail("experiment.factors[].levels must be a non-empty array");
            }
            for (const json& lv : fj.at("levels")) {
                if (lv.is_string()) {
                    f.levels.push_back(lv.get<std::string>());
                } else if (lv.is_number()) {
                    f.levels.push_back(lv.dump());
                } else {
                    fail("experiment.factors[].levels must hold strings or numbers");
                }
            }
            if (fj.contains("controllable")) {
                if (!fj.at("controllable").is_boolean()) {
                    fail("experiment.factors[].controllable must be a boolean");
                }
                f.controllable = fj.at("controllable").get<bool>();
            }
            e.factors.push_back(f);
        }
    }
    return e;
}

void require_range(bool ok, const std::string& key, const std::string& bound) {
    if (!ok) fail(key + " out of range: must be " + bound);
}

json zones_to_json(const std::vector<Zone>& zones) {
    json arr = json::array();
    for (const Zone& z : zones) {
        arr.push_back({{"id", z.id},
                       {"center", {z.center.x, z.center.y}},
                       {"radius", z.radius},
                       {"weight", z.weight}});
    }
    return arr;
}

}  // namespace

void validate(const RunConfig& cfg) {
    const WorldConfig& w = cfg.world;
    require_range(w.width >= 10 && w.width <= 2000, "world.width", "in [10, 2000]");
    require_range(w.height >= 10 && w.height <= 2000, "world.height", "in [10, 2000]");
    require_range(w.steps_per_day >= 2 && w.steps_per_day <= 100000,
                  "world.steps_per_day", "in [2, 100000]");
    require_range(w.horizon >= 1 && w.horizon <= 10000000, "world.horizon",
                  "in [1, 10000000]");
    require_range(w.n_riders >= 1 && w.n_riders <= 100000, "world.n_riders",
                  "in [1, 100000]");
    require_range(w.speed >= 1 && w.speed <= 10, "world.speed", "in [1, 10]");
    require_range(!w.zones.empty(), "world.zones", "non-empty");
    std::set<int> zone_ids;
    for (const Zone& z : w.zones) {
        require_range(z.center.x >= 0 && z.center.x < w.width &&
                      z.center.y >= 0 && z.center.y < w.height,
                      "world.zones[].center", "inside the grid");
        require_range(z.radius >= 1, "world.zones[].radius", ">= 1");
        require_range(z.weight > 0.0, "world.zones[].weight", "> 0");
        // Dense ids let zone-indexed tables use plain vectors.
        require_range(z.id >= 0 && z.id < static_cast<int>(w.zones.size()),
                      "world.zones[].id", "in [0, zone count)");
        require_range(zone_ids.insert(z.id).second, "world.zones[].id", "unique");
    }

    const OrderConfig& o = cfg.orders;
    for (double ci : o.c) require_range(ci > 0.0, "orders.c", "> 0 elementwise");
    for (double ai : o.a) require_range(ai >= 0.0, "orders.a", ">= 0 elementwise");
    require_range(o.volume_multiplier >= 0.0, "orders.volume_multiplier", ">= 0");
    require_range(o.expiry >= 1, "orders.expiry", ">= 1");
    require_range(o.dropoff_max >= 1, "orders.dropoff_max", ">= 1");

    const AgentConfig& a = cfg.agents;
    require_range(a.alpha > 0.0 && a.alpha <= 10.0, "agents.alpha", "in (0, 10]");
    require_range(a.sigma0 >= 0.0, "agents.sigma0", ">= 0");
    require_range(a.escalation_steps >= 1, "agents.K", ">= 1");
    require_range(a.recovery_steps >= 1, "agents.H", ">= 1");
    require_range(a.base_shift >= 1 && a.base_shift <= w.steps_per_day,
                  "agents.base_shift", "in [1, world.steps_per_day]");
    require_range(a.extend_step >= 0, "agents.extend_step", ">= 0");
    require_range(a.grab_radius >= 0, "agents.grab_radius", ">= 0");
    require_range(a.rate_window >= 1, "agents.rate_window", ">= 1");
    require_range(a.interaction_radius >= 0, "agents.interaction_radius", ">= 0");

    const PlatformConfig& p = cfg.platform;
    require_range(p.base_fee >= 0.0, "platform.base_fee", ">= 0");
    require_range(p.per_cell_rate >= 0.0, "platform.per_cell_rate", ">= 0");
    require_range(p.governance.step_size >= 0.0, "platform.governance.step_size", ">= 0");
    require_range(p.governance.epoch_steps >= 1, "platform.governance.epoch_steps", ">= 1");

    const MetricsConfig& m = cfg.metrics;
    require_range(m.eta > 0.0, "metrics.eta", "> 0");
    require_range(m.epsilon > 0.0, "metrics.epsilon", "> 0");
    require_range(m.move_cost >= 0.0, "metrics.move_cost", ">= 0");
    require_range(m.time_cost >= 0.0, "metrics.time_cost", ">= 0");

    const ExperimentConfig& e = cfg.experiment;
    require_range(e.replicates >= 1, "experiment.replicates", ">= 1");
    require_range(e.bootstrap_rounds >= 1, "experiment.bootstrap_rounds", ">= 1");
    if (!e.factors.empty()) {
        // Surface unknown factor names and bad level values at load time, not
        // mid-experiment. The probe copy drops the factor list so its own
        // validation does not recurse back here.
        RunConfig probe = cfg;
        probe.experiment.factors.clear();
        std::set<std::string> factor_names;
        for (const FactorSpec& f : e.factors) {
            require_range(!f.levels.empty(), "experiment.factors[].levels", "non-empty");
            require_range(factor_names.insert(f.name).second,
                          "experiment.factors[].name", "unique");
            for (const std::string& lv : f.levels) apply_factor(probe, f.name, lv);
        }
    }
}

RunConfig config_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("top level must be an object");
    check_known_keys(root, "",
                     {"world", "orders", "agents", "platform", "metrics", "experiment"});
    RunConfig cfg;
    if (root.contains("world")) cfg.world = parse_world(root.at("world"));
    else cfg.world.zones = default_zone_layout(cfg.world.width, cfg.world.height,
                                               cfg.world.layout_seed);
    if (root.contains("orders")) cfg.orders = parse_orders(root.at("orders"));
    if (root.contains("agents")) cfg.agents = parse_agents(root.at("agents"));
    if (root.contains("platform")) cfg.platform = parse_platform(root.at("platform"));
    if (root.contains("metrics")) cfg.metrics = parse_metrics(root.at("metrics"));
    if (root.contains("experiment")) cfg.experiment = parse_experiment(root.at("experiment"));
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

std::string config_to_json_text(const RunConfig& cfg) {
    json root;
    root["world"] = {{"width", cfg.world.width},
                     {"height", cfg.world.height},
                     {"steps_per_day", cfg.world.steps_per_day},
                     {"horizon", cfg.world.horizon},
                     {"n_riders", cfg.world.n_riders},
                     {"speed", cfg.world.speed},
                     {"layout_seed", cfg.world.layout_seed},
                     {"zones", zones_to_json(cfg.world.zones)}};
    root["orders"] = {{"a", cfg.orders.a},
                      {"b", cfg.orders.b},
                      {"c", cfg.orders.c},
                      {"volume_multiplier", cfg.orders.volume_multiplier},
                      {"expiry", cfg.orders.expiry},
                      {"dropoff_max", cfg.orders.dropoff_max}};
    root["agents"] = {{"intelligence", to_string(cfg.agents.intelligence)},
                      {"interaction_mode", to_string(cfg.agents.interaction_mode)},
                      {"interaction_radius", cfg.agents.interaction_radius},
                      {"alpha", cfg.agents.alpha},
                      {"sigma0", cfg.agents.sigma0},
                      {"K", cfg.agents.escalation_steps},
                      {"H", cfg.agents.recovery_steps},
                      {"base_shift", cfg.agents.base_shift},
                      {"extend_step", cfg.agents.extend_step},
                      {"grab_radius", cfg.agents.grab_radius},
                      {"rate_window", cfg.agents.rate_window}};
    root["platform"] = {
        {"base_fee", cfg.platform.base_fee},
        {"per_cell_rate", cfg.platform.per_cell_rate},
        {"governance",
         {{"mode", to_string(cfg.platform.governance.mode)},
          {"step_size", cfg.platform.governance.step_size},
          {"epoch_steps", cfg.platform.governance.epoch_steps}}}};
    root["metrics"] = {{"eta", cfg.metrics.eta},
                       {"epsilon", cfg.metrics.epsilon},
                       {"move_cost", cfg.metrics.move_cost},
                       {"time_cost", cfg.metrics.time_cost}};
    json factors = json::array();
    for (const FactorSpec& f : cfg.experiment.factors) {
        factors.push_back(
            {{"name", f.name}, {"levels", f.levels}, {"controllable", f.controllable}});
    }
    root["experiment"] = {{"factors", factors},
                          {"replicates", cfg.experiment.replicates},
                          {"base_seed", cfg.experiment.base_seed},
                          {"bootstrap_rounds", cfg.experiment.bootstrap_rounds}};
    return root.dump(2) + "\n";
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    out << config_to_json_text(cfg);
}

std::string config_hash(const RunConfig& cfg) {
    const std::string canonical = json::parse(config_to_json_text(cfg)).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : canonical) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

const char* to_string(Intelligence v) {
    switch (v) {
        case Intelligence::Low: return "low";
        case Intelligence::Medium: return "medium";
        case Intelligence::High: return "high";
    }
    return "unknown";
}

const char* to_string(InteractionKind v) {
    switch (v) {
        case InteractionKind::None: return "none";
        case InteractionKind::Local: return "local";
        case InteractionKind::Global: return "global";
    }
    return "unknown";
}

const char* to_string(GovernanceMode v) {
    switch (v) {
        case GovernanceMode::Off: return "off";
        case GovernanceMode::HillClimb: return "hill_climb";
    }
    return "unknown";
}

RunConfig apply_factor(const RunConfig& cfg, const std::string& name,
                       const std::string& level) {
    // Route the assignment through the JSON form so every config key is a
    // valid factor and strict parsing re-checks the result.
    json root = json::parse(config_to_json_text(cfg));
    std::string pointer = "/" + name;
    for (char& ch : pointer) {
        if (ch == '.') ch = '/';
    }
    json::json_pointer ptr;
    try {
        ptr = json::json_pointer(pointer);
    } catch (const json::exception&) {
        fail("factor name '" + name + "' is not a config key path");
    }
    if (!root.contains(ptr)) fail("factor name '" + name + "' does not match a config key");

    // Interpret the level with the type of the existing value.
    const json& current = root.at(ptr);
    json parsed;
    try {
        if (current.is_string()) {
            parsed = level;
        } else if (current.is_number_integer()) {
            std::size_t used = 0;
            const long long v = std::stoll(level, &used);
            if (used != level.size()) throw std::invalid_argument(level);
            parsed = v;
        } else if (current.is_number()) {
            std::size_t used = 0;
            const double v = std::stod(level, &used);
            if (used != level.size()) throw std::invalid_argument(level);
            parsed = v;
        } else {
            fail("factor '" + name + "' does not target a scalar config key");
        }
    } catch (const std::invalid_argument&) {
        fail("factor '" + name + "': cannot parse level '" + level + "'");
    } catch (const std::out_of_range&) {
        fail("factor '" + name + "': level '" + level + "' out of range");
    }
    root.at(ptr) = parsed;
    return config_from_json_text(root.dump());
}

}  // namespace ridersim
