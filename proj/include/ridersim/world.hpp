// Simulation core: world construction, the per-step phase loop
// (generate -> dispatch -> act -> settle), and full-run execution with
// per-step records and a terminal summary.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ridersim/agents.hpp"
#include "ridersim/config.hpp"
#include "ridersim/metrics.hpp"
#include "ridersim/rng.hpp"
#include "ridersim/types.hpp"

namespace ridersim {

struct WorldState {
    RunConfig config;
    std::uint64_t seed = 0;
    CityGrid grid;
    SimClock clock;
    std::vector<RiderState> riders;
    std::vector<Order> orders;             // full ledger, id == index
    std::vector<std::int64_t> active_ids;  // open or assigned, undelivered
    PlatformPolicy platform;
    std::int64_t next_order_id = 0;

    RandomStream orders_rng;
    std::vector<RandomStream> rider_rng;

    // Running totals for conservation checks.
    double fees_paid_total = 0.0;
    std::int64_t created_total = 0;
    std::int64_t delivered_total = 0;
    std::int64_t expired_total = 0;

    // Governance accounting.
    double epoch_swf_sum = 0.0;
    int epoch_swf_count = 0;

    // Test hooks. A non-empty permutation reorders the rider decision loop
    // (results must not change); queued orders are injected ahead of random
    // generation on the next step.
    std::vector<int> processing_permutation;
    std::vector<std::pair<Cell, Cell>> queued_orders;

    // Windowed income per step for the rider, measured over completed steps.
    double income_rate(int rider_id) const;

    // Inside today's shift window with budget left.
    bool rider_on_shift(int rider_id) const;
    // On shift or still servicing an order past the budget.
    bool rider_working(int rider_id) const;
};

// Zone-level aggregates for the current state; rider-independent, computed
// once per step and shared by every observation.
std::vector<ZoneView> zone_views(const WorldState& world);

// What one rider sees, given the precomputed zone views.
Observation observe(const WorldState& world, std::span<const ZoneView> zones,
                    int rider_id);

struct StepRiderRecord {
    ActionKind action = ActionKind::Rest;
    std::int64_t action_target = -1;
    IntentionLabel intention = IntentionLabel::RuleFollowing;
    std::int16_t x = 0;
    std::int16_t y = 0;
    double income_delta = 0.0;
    double cost_delta = 0.0;
};

struct StepRecord {
    int step = 0;
    std::vector<std::int64_t> created;
    std::vector<std::pair<std::int64_t, int>> assigned;              // order, rider
    std::vector<std::tuple<std::int64_t, int, double>> delivered;    // order, rider, fee
    std::vector<std::int64_t> expired;
    std::vector<StepRiderRecord> riders;
    std::optional<WelfareSnapshot> welfare;  // absent for a single rider
};

struct TerminalSummary {
    std::vector<double> incomes;
    std::vector<double> costs;
    std::vector<double> utilities;
    std::optional<WelfareSnapshot> welfare;
    std::optional<double> involution;
    std::string involution_note;  // why the index is absent, when it is
    double mean_utility = 0.0;
    double frac_risk_avoidant = 0.0;
    // Day-end series (one entry per completed day): involution index (NaN
    // where undefined) and intention shares in label order.
    std::vector<double> day_involution;
    std::vector<std::array<double, 3>> day_intention_shares;
};

struct RunTrace {
    RunConfig config;
    std::uint64_t seed = 0;
    std::vector<StepRecord> records;  // empty when the trace is not kept
    TerminalSummary terminal;
};

// Builds the initial world: riders placed round-robin across zones, shifts
// staggered through the day, platform policy taken from the config. Pure in
// (config, seed).
WorldState init_world(const RunConfig& cfg, std::uint64_t seed);

// Advances one step and reports what happened.
StepRecord step(WorldState& world);

// Runs the full horizon. keep_records=false drops per-step records (the
// terminal summary and day series are always produced).
RunTrace run(const RunConfig& cfg, std::uint64_t seed, bool keep_records = true);

// Canonical JSON of the complete dynamic state, for determinism checks and
// debugging.
std::string serialize(const WorldState& world);

}  // namespace ridersim
