// Core value types shared across the engine: grid geometry, orders, rider
// state, and the simulation clock.
#pragma once

#include <cstdint>
#include <cstdlib>
#include <vector>

namespace ridersim {

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) {
    return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

struct Zone {
    int id = 0;
    Cell center;
    int radius = 8;       // Euclidean disc, cells
    double weight = 1.0;  // relative share of order volume
};

struct CityGrid {
    int width = 100;
    int height = 100;
    std::vector<Zone> zones;

    bool contains(Cell c) const {
        return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
    }
    // Id of the zone containing c; nearest center breaks ties and covers
    // cells outside every disc.
    int zone_of(Cell c) const;
};

enum class OrderStatus { Open, Assigned, Delivered, Expired };

struct Order {
    std::int64_t id = 0;
    int created_step = 0;
    int zone_id = 0;
    Cell pickup;
    Cell dropoff;
    double fee = 0.0;
    OrderStatus status = OrderStatus::Open;
    int rider_id = -1;        // set once Assigned
    int assigned_step = -1;
    int resolved_step = -1;   // delivery or expiry step
};

enum class IntentionLabel { RuleFollowing = 0, Anxious = 1, RiskAvoidant = 2 };

const char* to_string(IntentionLabel label);

struct IntentionState {
    IntentionLabel label = IntentionLabel::RuleFollowing;
    int anxious_streak = 0;      // consecutive working steps spent Anxious
    int clear_streak = 0;        // working steps since a trigger last fired
    int above_peer_streak = 0;   // working steps at or above the peer median
};

enum class ActionKind { AcceptOrder = 0, SwitchZone = 1, RandomWalk = 2, Rest = 3, ExtendShift = 4 };

const char* to_string(ActionKind kind);

struct Action {
    ActionKind kind = ActionKind::Rest;
    std::int64_t target = -1;  // order id for AcceptOrder, zone id for SwitchZone
};

struct RiderState {
    int id = 0;
    Cell position;
    int zone_choice = 0;
    IntentionState intention;

    bool working = false;
    int shift_start = 0;    // step-of-day the shift opens
    int shift_budget = 0;   // working steps available today
    int worked_today = 0;
    // Smoothed carryover of past shift extensions: hours creep upward across
    // days once a rider starts extending, and drift back when they stop.
    double habit_steps = 0.0;

    double reward_total = 0.0;
    double cost_total = 0.0;

    std::int64_t active_order = -1;  // order being serviced, -1 when idle
    bool picked_up = false;

    // Ring buffer of recent per-step income deltas for the windowed rate.
    std::vector<double> income_window;
    double income_window_sum = 0.0;
};

struct SimClock {
    int step = 0;
    int steps_per_day = 120;
    int horizon = 3600;

    int step_of_day() const { return step % steps_per_day; }
    int day() const { return step / steps_per_day; }
    // Position within the day in [0, 1), the argument of the demand curve.
    double day_fraction() const {
        return static_cast<double>(step_of_day()) / steps_per_day;
    }
};

}  // namespace ridersim
