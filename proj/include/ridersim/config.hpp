// Run configuration: world geometry, demand profile, agent parameters,
// platform pricing, metric constants, and the experiment design. Loads from
// JSON with strict validation — unknown keys and out-of-range values are
// rejected with messages naming the offending key.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ridersim/types.hpp"

namespace ridersim {

struct WorldConfig {
    int width = 100;
    int height = 100;
    int steps_per_day = 120;
    int horizon = 3600;         // 30 days
    int n_riders = 100;
    int speed = 1;              // cells per step, 4-neighbor moves
    std::vector<Zone> zones;    // empty selects the default ten-zone layout
    std::uint64_t layout_seed = 42;  // jitter for the default layout only
};

struct OrderConfig {
    // Five-component Gaussian mixture over the day fraction in [0, 1):
    // breakfast, lunch, mid-afternoon, dinner, and late-evening peaks.
    std::array<double, 5> a{6.0, 10.0, 4.0, 8.0, 3.0};
    std::array<double, 5> b{0.08, 0.33, 0.5, 0.66, 0.9};
    std::array<double, 5> c{0.04, 0.05, 0.08, 0.05, 0.06};
    double volume_multiplier = 1.0;
    int expiry = 30;        // steps an order may wait before it lapses
    int dropoff_max = 20;   // max Manhattan pickup-to-dropoff distance
};

enum class Intelligence { Low, Medium, High };
enum class InteractionKind { None, Local, Global };

struct AgentConfig {
    Intelligence intelligence = Intelligence::Medium;
    InteractionKind interaction_mode = InteractionKind::Local;
    int interaction_radius = 15;  // peer visibility for Local mode, cells
    double alpha = 0.8;           // anxiety fires below alpha * peer median rate
    double sigma0 = 0.5;          // ... or when orders per rider drop below this
    int escalation_steps = 60;    // anxious this long -> risk-avoidant (K)
    int recovery_steps = 30;      // hysteresis before any de-escalation (H)
    int base_shift = 60;          // working steps granted at shift start
    int extend_step = 10;         // extra steps per extend-shift decision
    int grab_radius = 15;         // self-assignment reach for leftover orders
    // Steps in the windowed income rate. Three days keeps the rate smooth
    // enough that "lagging the peer median" marks persistently poor riders
    // instead of flickering with every delivery.
    int rate_window = 360;
};

enum class GovernanceMode { Off, HillClimb };

struct GovernanceConfig {
    GovernanceMode mode = GovernanceMode::Off;
    double step_size = 0.02;   // per-cell-rate perturbation
    int epoch_steps = 600;     // evaluation window between adjustments
};

struct PlatformConfig {
    double base_fee = 2.0;
    double per_cell_rate = 0.1;  // fee per Manhattan cell of delivery distance
    GovernanceConfig governance;
};

struct MetricsConfig {
    double eta = 0.15;
    double epsilon = 1e-6;
    double move_cost = 0.02;   // per cell moved
    double time_cost = 0.01;   // per working step
};

struct FactorSpec {
    std::string name;                  // config key path, e.g. "orders.volume_multiplier"
    std::vector<std::string> levels;
    bool controllable = true;          // platform lever vs. environment factor
};

struct ExperimentConfig {
    std::vector<FactorSpec> factors;
    int replicates = 10;
    std::uint64_t base_seed = 1000;
    int bootstrap_rounds = 2000;
};

struct RunConfig {
    WorldConfig world;
    OrderConfig orders;
    AgentConfig agents;
    PlatformConfig platform;
    MetricsConfig metrics;
    ExperimentConfig experiment;
};

// Fully populated defaults, including the ten-zone layout.
RunConfig default_config();

// Deterministic default layout: a 2 x 5 lattice of zone centers jittered by
// the layout seed, radius 8, center-weighted demand (busy core, quiet edges).
std::vector<Zone> default_zone_layout(int width, int height, std::uint64_t layout_seed);

// Throws std::invalid_argument naming the key on any violated bound.
void validate(const RunConfig& cfg);

// Strict JSON loading: missing sections fall back to defaults, unknown keys
// are errors. validate() runs on the result.
RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

// FNV-1a hash of the canonical JSON form, hex-encoded; identifies a config
// in the run manifest.
std::string config_hash(const RunConfig& cfg);

const char* to_string(Intelligence v);
const char* to_string(InteractionKind v);
const char* to_string(GovernanceMode v);

// Returns a copy of cfg with the named dotted key set to the given level
// string. Understands every factor key the experiment layer may sweep.
// Throws std::invalid_argument for unknown names or unparsable levels.
RunConfig apply_factor(const RunConfig& cfg, const std::string& name,
                       const std::string& level);

}  // namespace ridersim
