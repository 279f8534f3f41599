#include "ridersim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ridersim/world.hpp"

namespace ridersim {

Observation observe(const WorldState& world, std::span<const ZoneView> zones,
                    int rider_id) {
    const RiderState& self = world.riders[rider_id];
    const AgentConfig& agents = world.config.agents;

    Observation obs;
    obs.zones.assign(zones.begin(), zones.end());
    obs.own_rate = world.income_rate(rider_id);

    const ZoneView& own_zone = zones[self.zone_choice];
    obs.orders_per_rider = static_cast<double>(own_zone.active_orders) /
                           std::max(1, own_zone.riders_choosing);

    if (agents.interaction_mode != InteractionKind::None && world.riders.size() > 1) {
        std::vector<double> peer_rates;
        peer_rates.reserve(world.riders.size() - 1);
        for (const RiderState& other : world.riders) {
            if (other.id == self.id) continue;
            // Only riders currently out working are comparison targets;
            // off-shift riders' decayed rates would dilute the peer signal.
            if (!world.rider_working(other.id)) continue;
            if (agents.interaction_mode == InteractionKind::Local &&
                manhattan(other.position, self.position) > agents.interaction_radius) {
                continue;
            }
            peer_rates.push_back(world.income_rate(other.id));
        }
        if (!peer_rates.empty()) {
            const std::size_t mid = peer_rates.size() / 2;
            std::nth_element(peer_rates.begin(), peer_rates.begin() + mid, peer_rates.end());
            double median = peer_rates[mid];
            if (peer_rates.size() % 2 == 0) {
                const double lower =
                    *std::max_element(peer_rates.begin(), peer_rates.begin() + mid);
                median = 0.5 * (lower + median);
            }
            obs.peer_median_rate = median;
        }
    }
    return obs;
}

IntentionState update_intention(const IntentionState& state, const Observation& obs,
                                const IntentionParams& p) {
    const bool scarce = obs.orders_per_rider < p.sigma0;
    const bool lagging = obs.peer_median_rate.has_value() &&
                         obs.own_rate < p.alpha * *obs.peer_median_rate;
    const bool trigger = scarce || lagging;
    // "Doing fine" for de-escalation: at or above the peer median; without
    // peers in view the scarcity signal stands in.
    const bool above = obs.peer_median_rate.has_value()
                           ? obs.own_rate >= *obs.peer_median_rate
                           : !scarce;

    IntentionState s = state;
    switch (s.label) {
        case IntentionLabel::RuleFollowing:
            if (trigger) {
                s.label = IntentionLabel::Anxious;
                s.anxious_streak = 1;
                s.above_peer_streak = above ? 1 : 0;
                s.clear_streak = 0;
            }
            break;
        case IntentionLabel::Anxious:
            s.anxious_streak += 1;
            s.above_peer_streak = above ? s.above_peer_streak + 1 : 0;
            if (s.above_peer_streak >= p.recovery_steps) {
                s = IntentionState{};  // back to rule-following, streaks cleared
            } else if (s.anxious_streak >= p.escalation_steps) {
                s.label = IntentionLabel::RiskAvoidant;
                s.clear_streak = 0;
            }
            break;
        case IntentionLabel::RiskAvoidant:
            s.clear_streak = trigger ? 0 : s.clear_streak + 1;
            if (s.clear_streak >= p.recovery_steps) {
                // De-escalate one level; full recovery still has to be earned.
                s.label = IntentionLabel::Anxious;
                s.anxious_streak = 1;
                s.above_peer_streak = above ? 1 : 0;
                s.clear_streak = 0;
            }
            break;
    }
    return s;
}

namespace {

// Zone with the most active orders per competing rider — where going
// orderless is least likely. Ties go to the lower zone id.
int calmest_zone(std::span<const ZoneView> zones) {
    int best = 0;
    double best_slack = -1.0;
    for (const ZoneView& z : zones) {
        const double slack =
            static_cast<double>(z.active_orders) / std::max(1, z.riders_choosing);
        if (slack > best_slack) {
            best_slack = slack;
            best = z.zone_id;
        }
    }
    return best;
}

// Zone with the highest open fee volume per competing rider. Ties go to the
// lower zone id.
int richest_zone(std::span<const ZoneView> zones) {
    int best = 0;
    double best_value = -1.0;
    for (const ZoneView& z : zones) {
        const double value = z.open_fee_sum / std::max(1, z.riders_choosing);
        if (value > best_value) {
            best_value = value;
            best = z.zone_id;
        }
    }
    return best;
}

const FeasibleOrder* nearest_order(std::span<const FeasibleOrder> feasible) {
    const FeasibleOrder* best = nullptr;
    for (const FeasibleOrder& f : feasible) {
        if (best == nullptr || f.distance < best->distance ||
            (f.distance == best->distance && f.order_id < best->order_id)) {
            best = &f;
        }
    }
    return best;
}

}  // namespace

Action decide(const AgentConfig& agents, const IntentionState& intention,
              const Observation& obs, std::span<const FeasibleOrder> feasible,
              const DecisionContext& ctx, RandomStream& rng) {
    if (!ctx.on_shift) {
        // Anxious riders chase lost ground with longer hours; risk-avoidant
        // riders grind long hours too, just in safer territory. Only the
        // rule-followers clock off on time.
        if (intention.label != IntentionLabel::RuleFollowing && ctx.can_extend) {
            return Action{ActionKind::ExtendShift, -1};
        }
        return Action{ActionKind::Rest, -1};
    }

    if (intention.label == IntentionLabel::RiskAvoidant) {
        const int target = calmest_zone(obs.zones);
        if (target != ctx.current_zone) {
            return Action{ActionKind::SwitchZone, target};
        }
        // Already in the calmest zone: work it with the ordinary rule below.
    }

    switch (agents.intelligence) {
        case Intelligence::Low: {
            // No lookahead: a coin toss among whatever is possible right now.
            if (!feasible.empty()) {
                const std::int64_t pick = rng.next_int(0, 2);
                if (pick == 0) {
                    const std::int64_t which =
                        rng.next_int(0, static_cast<std::int64_t>(feasible.size()) - 1);
                    return Action{ActionKind::AcceptOrder, feasible[which].order_id};
                }
                return Action{pick == 1 ? ActionKind::RandomWalk : ActionKind::Rest, -1};
            }
            return Action{rng.next_int(0, 1) == 0 ? ActionKind::RandomWalk
                                                  : ActionKind::Rest,
                          -1};
        }
        case Intelligence::Medium: {
            if (const FeasibleOrder* best = nearest_order(feasible)) {
                return Action{ActionKind::AcceptOrder, best->order_id};
            }
            return Action{ActionKind::RandomWalk, -1};
        }
        case Intelligence::High: {
            const int target = richest_zone(obs.zones);
            if (target != ctx.current_zone) {
                return Action{ActionKind::SwitchZone, target};
            }
            if (const FeasibleOrder* best = nearest_order(feasible)) {
                return Action{ActionKind::AcceptOrder, best->order_id};
            }
            return Action{ActionKind::RandomWalk, -1};
        }
    }
    return Action{ActionKind::Rest, -1};
}

std::vector<Assignment> dispatch(std::span<const DispatchOrder> open_orders,
                                 std::span<const DispatchRider> idle_riders) {
    std::vector<const DispatchOrder*> queue;
    queue.reserve(open_orders.size());
    for (const DispatchOrder& o : open_orders) queue.push_back(&o);
    std::sort(queue.begin(), queue.end(),
              [](const DispatchOrder* a, const DispatchOrder* b) {
                  if (a->created_step != b->created_step) {
                      return a->created_step < b->created_step;
                  }
                  return a->order_id < b->order_id;
              });

    std::vector<Assignment> out;
    std::vector<bool> taken(idle_riders.size(), false);
    for (const DispatchOrder* order : queue) {
        int best = -1;
        int best_dist = 0;
        for (std::size_t i = 0; i < idle_riders.size(); ++i) {
            if (taken[i]) continue;
            const DispatchRider& r = idle_riders[i];
            if (r.zone_choice != order->zone_id) continue;
            const int d = manhattan(r.position, order->pickup);
            if (best < 0 || d < best_dist ||
                (d == best_dist && r.rider_id < idle_riders[best].rider_id)) {
                best = static_cast<int>(i);
                best_dist = d;
            }
        }
        if (best >= 0) {
            taken[best] = true;
            out.push_back(Assignment{order->order_id, idle_riders[best].rider_id});
        }
    }
    return out;
}

PlatformPolicy govern(const PlatformPolicy& policy, double epoch_mean_swf) {
    if (policy.governance.mode != GovernanceMode::HillClimb ||
        policy.governance.step_size <= 0.0) {
        return policy;
    }
    PlatformPolicy p = policy;
    const double step = p.governance.step_size;
    if (!p.has_previous || epoch_mean_swf > p.previous_swf) {
        // First measurement, or the last move helped: record the new best
        // point and keep pushing the same way.
        p.has_previous = true;
        p.previous_swf = epoch_mean_swf;
        p.previous_rate = p.per_cell_rate;
        p.per_cell_rate = std::max(0.0, p.per_cell_rate + p.direction * step);
    } else {
        // The move hurt: return to the best known rate and probe the other
        // direction. The stored best welfare stays the comparison baseline.
        p.per_cell_rate = p.previous_rate;
        p.direction = -p.direction;
        p.per_cell_rate = std::max(0.0, p.per_cell_rate + p.direction * step);
    }
    return p;
}

}  // namespace ridersim
