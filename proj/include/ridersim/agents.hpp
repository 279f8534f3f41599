// Rider and platform behavior: what a rider sees, how the anxiety state
// machine moves, what action each intelligence tier picks, how the platform
// matches open orders to idle riders, and the welfare-following fee
// adjustment. Everything here is a pure function of snapshots taken before
// the rider loop, so results never depend on rider iteration order.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ridersim/config.hpp"
#include "ridersim/rng.hpp"
#include "ridersim/types.hpp"

namespace ridersim {

struct ZoneView {
    int zone_id = 0;
    double open_fee_sum = 0.0;   // total fee of currently open orders
    int open_orders = 0;
    int active_orders = 0;       // open + assigned-but-undelivered
    int riders_choosing = 0;     // riders whose zone_choice is this zone
};

struct Observation {
    double own_rate = 0.0;             // windowed income per step
    double orders_per_rider = 0.0;     // active orders / riders in own zone
    // Median windowed rate over visible peers (excluding self). Absent when
    // the interaction mode is none or no peer is visible.
    std::optional<double> peer_median_rate;
    std::vector<ZoneView> zones;       // indexed by zone id
};

struct IntentionParams {
    double alpha = 0.8;
    double sigma0 = 0.5;
    int escalation_steps = 60;
    int recovery_steps = 30;
};

// One tick of the intention machine. Ticks only while the rider works;
// off-shift steps leave the state frozen.
IntentionState update_intention(const IntentionState& state, const Observation& obs,
                                const IntentionParams& p);

struct FeasibleOrder {
    std::int64_t order_id = 0;
    int distance = 0;      // rider position to pickup
    double fee = 0.0;
    int zone_id = 0;
};

struct DecisionContext {
    bool on_shift = false;    // inside the shift window with budget left
    bool can_extend = false;  // shift just exhausted and extension allowed
    int current_zone = 0;
};

// Picks this step's action. Off shift the only choices are Rest and — for
// anxious or risk-avoidant riders with can_extend — ExtendShift. On shift
// the intention overlay runs first (risk-avoidant riders retreat to the
// calmest zone),
// then the intelligence tier: low samples uniformly among accepting a
// feasible order, wandering, and resting; medium greedily takes the nearest
// feasible order; high targets the zone with the best fee-per-rider outlook
// before falling back to the medium rule.
Action decide(const AgentConfig& agents, const IntentionState& intention,
              const Observation& obs, std::span<const FeasibleOrder> feasible,
              const DecisionContext& ctx, RandomStream& rng);

struct DispatchOrder {
    std::int64_t order_id = 0;
    int created_step = 0;
    int zone_id = 0;
    Cell pickup;
};

struct DispatchRider {
    int rider_id = 0;
    Cell position;
    int zone_choice = 0;
};

struct Assignment {
    std::int64_t order_id = 0;
    int rider_id = 0;
};

// Platform matching: oldest open order first (id breaks ties), each order to
// the nearest idle rider working that zone (rider id breaks ties), at most
// one order per rider per step. Orders with no candidate stay open.
std::vector<Assignment> dispatch(std::span<const DispatchOrder> open_orders,
                                 std::span<const DispatchRider> idle_riders);

struct PlatformPolicy {
    double base_fee = 2.0;
    double per_cell_rate = 0.1;
    double volume_multiplier = 1.0;
    GovernanceConfig governance;
    // Hill-climb bookkeeping.
    int direction = 1;
    bool has_previous = false;
    double previous_swf = 0.0;
    double previous_rate = 0.1;
};

// One governance epoch: compare mean welfare of the just-finished epoch with
// the epoch before, keep the perturbation direction while welfare improves,
// otherwise revert and flip. No-op unless the mode is hill_climb.
PlatformPolicy govern(const PlatformPolicy& policy, double epoch_mean_swf);

}  // namespace ridersim
