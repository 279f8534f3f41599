#include "ridersim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "ridersim/order_gen.hpp"

namespace ridersim {

double WorldState::income_rate(int rider_id) const {
    const RiderState& r = riders[rider_id];
    const int window = static_cast<int>(r.income_window.size());
    const int completed = std::min(clock.step, window);
    if (completed <= 0) return 0.0;
    return r.income_window_sum / completed;
}

bool WorldState::rider_on_shift(int rider_id) const {
    const RiderState& r = riders[rider_id];
    return clock.step_of_day() >= r.shift_start && r.worked_today < r.shift_budget;
}

bool WorldState::rider_working(int rider_id) const {
    return rider_on_shift(rider_id) || riders[rider_id].active_order >= 0;
}

std::vector<ZoneView> zone_views(const WorldState& world) {
    std::vector<ZoneView> zv(world.grid.zones.size());
    for (const Zone& z : world.grid.zones) zv[z.id].zone_id = z.id;
    for (const std::int64_t id : world.active_ids) {
        const Order& o = world.orders[static_cast<std::size_t>(id)];
        ZoneView& v = zv[o.zone_id];
        if (o.status == OrderStatus::Open) {
            v.open_orders += 1;
            v.open_fee_sum += o.fee;
            v.active_orders += 1;
        } else if (o.status == OrderStatus::Assigned) {
            v.active_orders += 1;
        }
    }
    for (const RiderState& r : world.riders) zv[r.zone_choice].riders_choosing += 1;
    return zv;
}

namespace {

// One Manhattan cell toward the target, x axis first.
void step_toward(Cell& pos, Cell target) {
    if (pos.x != target.x) {
        pos.x += (target.x > pos.x) ? 1 : -1;
    } else if (pos.y != target.y) {
        pos.y += (target.y > pos.y) ? 1 : -1;
    }
}

bool inside_zone(Cell pos, const Zone& z) {
    const long dx = pos.x - z.center.x;
    const long dy = pos.y - z.center.y;
    return dx * dx + dy * dy <= static_cast<long>(z.radius) * z.radius;
}

}  // namespace

WorldState init_world(const RunConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    WorldState w;
    w.config = cfg;
    w.seed = seed;
    w.grid.width = cfg.world.width;
    w.grid.height = cfg.world.height;
    w.grid.zones = cfg.world.zones;
    // Ids are validated dense, so sorting by id makes zones[id] a direct
    // lookup everywhere else.
    std::sort(w.grid.zones.begin(), w.grid.zones.end(),
              [](const Zone& a, const Zone& b) { return a.id < b.id; });
    w.clock = SimClock{0, cfg.world.steps_per_day, cfg.world.horizon};

    w.platform.base_fee = cfg.platform.base_fee;
    w.platform.per_cell_rate = cfg.platform.per_cell_rate;
    w.platform.volume_multiplier = cfg.orders.volume_multiplier;
    w.platform.governance = cfg.platform.governance;
    w.platform.previous_rate = w.platform.per_cell_rate;

    w.orders_rng = substream(seed, "orders");

    // Riders start where the work is: seats per zone follow a half-uniform,
    // half-demand blend (largest-remainder rounding), so busy zones open
    // with more riders while quiet zones are never empty.
    const int n = cfg.world.n_riders;
    const std::size_t nz = w.grid.zones.size();
    double weight_sum = 0.0;
    for (const Zone& z : w.grid.zones) weight_sum += z.weight;
    std::vector<int> seats(nz, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int seated = 0;
    for (std::size_t zi = 0; zi < nz; ++zi) {
        const double share = 0.5 / static_cast<double>(nz) +
                             0.5 * w.grid.zones[zi].weight / weight_sum;
        const double quota = share * n;
        seats[zi] = static_cast<int>(quota);
        seated += seats[zi];
        remainders.emplace_back(quota - seats[zi], zi);
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
              });
    for (int extra = 0; extra < n - seated; ++extra) {
        seats[remainders[static_cast<std::size_t>(extra) % nz].second] += 1;
    }

    w.riders.resize(static_cast<std::size_t>(n));
    w.rider_rng.reserve(static_cast<std::size_t>(n));
    const int shift_slack = std::max(0, cfg.world.steps_per_day - cfg.agents.base_shift);
    std::size_t zone_cursor = 0;
    int zone_filled = 0;
    for (int i = 0; i < n; ++i) {
        while (zone_cursor + 1 < nz && zone_filled >= seats[zone_cursor]) {
            zone_cursor += 1;
            zone_filled = 0;
        }
        zone_filled += 1;
        RandomStream place = substream(seed, "placement", static_cast<std::uint64_t>(i));
        RiderState& r = w.riders[static_cast<std::size_t>(i)];
        r.id = i;
        const Zone& home = w.grid.zones[zone_cursor];
        r.zone_choice = home.id;
        r.position = uniform_zone_cell(home, w.grid, place);
        r.shift_start = static_cast<int>(place.next_int(0, shift_slack));
        r.shift_budget = cfg.agents.base_shift;
        r.income_window.assign(static_cast<std::size_t>(cfg.agents.rate_window), 0.0);
        w.rider_rng.push_back(substream(seed, "rider-policy", static_cast<std::uint64_t>(i)));
    }
    return w;
}

StepRecord step(WorldState& w) {
    if (w.clock.step >= w.clock.horizon) {
        throw std::logic_error("step: clock already at the horizon");
    }
    const WorldConfig& wc = w.config.world;
    const AgentConfig& ag = w.config.agents;
    const MetricsConfig& mc = w.config.metrics;
    const int n = static_cast<int>(w.riders.size());
    const int step_of_day = w.clock.step_of_day();

    StepRecord rec;
    rec.step = w.clock.step;

    // Day boundary: fresh budgets, with yesterday's extensions feeding the
    // habit carryover — hours creep upward day over day while a rider keeps
    // extending, and the carried habit persists once they stop.
    if (step_of_day == 0) {
        for (RiderState& r : w.riders) {
            if (w.clock.step > 0) {
                r.habit_steps =
                    0.8 * r.habit_steps +
                    0.2 * std::max(0, r.shift_budget - ag.base_shift);
            }
            r.worked_today = 0;
            const int cap = wc.steps_per_day - r.shift_start;
            r.shift_budget = std::min(
                cap, ag.base_shift + static_cast<int>(std::lround(r.habit_steps)));
        }
    }

    // Observation snapshot before anything moves this step. Intentions and
    // decisions both read this frozen view, so the rider loop order cannot
    // leak into outcomes.
    const std::vector<ZoneView> zv = zone_views(w);
    std::vector<Observation> obs;
    obs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) obs.push_back(observe(w, zv, i));

    std::vector<char> on_shift(static_cast<std::size_t>(n), 0);
    std::vector<char> working(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        on_shift[static_cast<std::size_t>(i)] = w.rider_on_shift(i);
        working[static_cast<std::size_t>(i)] = w.rider_working(i);
    }

    // Intention machine ticks on working steps only; rest steps freeze it.
    // It also stays quiet until one full rate window has elapsed: income
    // rates over a part-filled window are too noisy to compare against peers.
    if (w.clock.step >= ag.rate_window) {
        const IntentionParams ip{ag.alpha, ag.sigma0, ag.escalation_steps,
                                 ag.recovery_steps};
        for (int i = 0; i < n; ++i) {
            if (!working[static_cast<std::size_t>(i)]) continue;
            RiderState& r = w.riders[static_cast<std::size_t>(i)];
            r.intention =
                update_intention(r.intention, obs[static_cast<std::size_t>(i)], ip);
        }
    }

    // Generate: injected orders first, then the random arrivals.
    const OrderPricing pricing{w.platform.base_fee, w.platform.per_cell_rate};
    for (const auto& [pickup, dropoff] : w.queued_orders) {
        Order o;
        o.id = w.next_order_id++;
        o.created_step = w.clock.step;
        o.zone_id = w.grid.zone_of(pickup);
        o.pickup = pickup;
        o.dropoff = dropoff;
        o.fee = delivery_fee(pricing, manhattan(pickup, dropoff));
        rec.created.push_back(o.id);
        w.active_ids.push_back(o.id);
        w.orders.push_back(o);
    }
    w.queued_orders.clear();
    OrderConfig oc = w.config.orders;
    oc.volume_multiplier = w.platform.volume_multiplier;
    for (Order& o : generate_orders(w.clock, oc, w.grid, pricing, w.next_order_id,
                                    w.orders_rng)) {
        rec.created.push_back(o.id);
        w.active_ids.push_back(o.id);
        w.orders.push_back(std::move(o));
    }
    w.created_total += static_cast<std::int64_t>(rec.created.size());

    // Expire stale open orders before matching.
    for (const std::int64_t id : w.active_ids) {
        Order& o = w.orders[static_cast<std::size_t>(id)];
        if (o.status == OrderStatus::Open &&
            w.clock.step - o.created_step >= w.config.orders.expiry) {
            o.status = OrderStatus::Expired;
            o.resolved_step = w.clock.step;
            rec.expired.push_back(id);
            w.expired_total += 1;
        }
    }

    // Platform dispatch: open orders to idle on-shift riders in-zone.
    {
        std::vector<DispatchOrder> dorders;
        for (const std::int64_t id : w.active_ids) {
            const Order& o = w.orders[static_cast<std::size_t>(id)];
            if (o.status == OrderStatus::Open) {
                dorders.push_back(DispatchOrder{o.id, o.created_step, o.zone_id, o.pickup});
            }
        }
        std::vector<DispatchRider> driders;
        for (int i = 0; i < n; ++i) {
            const RiderState& r = w.riders[static_cast<std::size_t>(i)];
            if (on_shift[static_cast<std::size_t>(i)] && r.active_order < 0) {
                driders.push_back(DispatchRider{r.id, r.position, r.zone_choice});
            }
        }
        for (const Assignment& a : dispatch(dorders, driders)) {
            Order& o = w.orders[static_cast<std::size_t>(a.order_id)];
            o.status = OrderStatus::Assigned;
            o.rider_id = a.rider_id;
            o.assigned_step = w.clock.step;
            w.riders[static_cast<std::size_t>(a.rider_id)].active_order = a.order_id;
            rec.assigned.emplace_back(a.order_id, a.rider_id);
        }
    }

    // Decisions for everyone not servicing an order, against the snapshot
    // observation and the post-dispatch leftovers. The processing
    // permutation is a test hook: outcomes must not depend on it.
    std::vector<Action> chosen(static_cast<std::size_t>(n), Action{ActionKind::Rest, -1});
    std::vector<std::int64_t> leftover;
    for (const std::int64_t id : w.active_ids) {
        if (w.orders[static_cast<std::size_t>(id)].status == OrderStatus::Open) {
            leftover.push_back(id);
        }
    }
    std::vector<int> sequence(static_cast<std::size_t>(n));
    if (w.processing_permutation.empty()) {
        for (int i = 0; i < n; ++i) sequence[static_cast<std::size_t>(i)] = i;
    } else {
        if (static_cast<int>(w.processing_permutation.size()) != n) {
            throw std::logic_error("processing permutation size mismatch");
        }
        sequence = w.processing_permutation;
    }
    for (const int i : sequence) {
        RiderState& r = w.riders[static_cast<std::size_t>(i)];
        if (r.active_order >= 0) {
            chosen[static_cast<std::size_t>(i)] =
                Action{ActionKind::AcceptOrder, r.active_order};
            continue;
        }
        DecisionContext ctx;
        ctx.on_shift = on_shift[static_cast<std::size_t>(i)] != 0;
        ctx.current_zone = r.zone_choice;
        ctx.can_extend = !ctx.on_shift && step_of_day >= r.shift_start &&
                         r.shift_budget < wc.steps_per_day - r.shift_start &&
                         ag.extend_step > 0;
        std::vector<FeasibleOrder> feasible;
        if (ctx.on_shift) {
            for (const std::int64_t id : leftover) {
                const Order& o = w.orders[static_cast<std::size_t>(id)];
                const int d = manhattan(r.position, o.pickup);
                if (d <= ag.grab_radius) {
                    feasible.push_back(FeasibleOrder{o.id, d, o.fee, o.zone_id});
                }
            }
        }
        chosen[static_cast<std::size_t>(i)] =
            decide(ag, r.intention, obs[static_cast<std::size_t>(i)], feasible, ctx,
                   w.rider_rng[static_cast<std::size_t>(i)]);
    }

    // Resolve contested grabs: nearest rider wins, id breaks ties; losers
    // fall back to wandering. Scanning in id order keeps this independent of
    // the decision sequence above.
    {
        struct Claim {
            int rider = -1;
            int distance = 0;
        };
        std::vector<std::pair<std::int64_t, Claim>> claims;
        for (int i = 0; i < n; ++i) {
            const Action& a = chosen[static_cast<std::size_t>(i)];
            const RiderState& r = w.riders[static_cast<std::size_t>(i)];
            if (a.kind != ActionKind::AcceptOrder || r.active_order >= 0) continue;
            const Order& o = w.orders[static_cast<std::size_t>(a.target)];
            const int d = manhattan(r.position, o.pickup);
            auto it = std::find_if(claims.begin(), claims.end(),
                                   [&](const auto& c) { return c.first == a.target; });
            if (it == claims.end()) {
                claims.emplace_back(a.target, Claim{i, d});
            } else if (d < it->second.distance) {
                it->second = Claim{i, d};
            }
        }
        for (int i = 0; i < n; ++i) {
            Action& a = chosen[static_cast<std::size_t>(i)];
            RiderState& r = w.riders[static_cast<std::size_t>(i)];
            if (a.kind != ActionKind::AcceptOrder || r.active_order >= 0) continue;
            const auto it = std::find_if(claims.begin(), claims.end(),
                                         [&](const auto& c) { return c.first == a.target; });
            if (it->second.rider == i) {
                Order& o = w.orders[static_cast<std::size_t>(a.target)];
                o.status = OrderStatus::Assigned;
                o.rider_id = i;
                o.assigned_step = w.clock.step;
                r.active_order = o.id;
                rec.assigned.emplace_back(o.id, i);
            } else {
                a = Action{ActionKind::RandomWalk, -1};
            }
        }
    }

    // Effects, in rider id order: movement, pickups, deliveries, walks,
    // shift extensions, and the cost clock.
    rec.riders.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        RiderState& r = w.riders[static_cast<std::size_t>(i)];
        const Action action = chosen[static_cast<std::size_t>(i)];
        double income = 0.0;
        double cost = 0.0;

        switch (action.kind) {
            case ActionKind::AcceptOrder: {
                int cells = wc.speed;
                while (r.active_order >= 0) {
                    Order& o = w.orders[static_cast<std::size_t>(r.active_order)];
                    const Cell target = r.picked_up ? o.dropoff : o.pickup;
                    if (r.position == target) {
                        if (!r.picked_up) {
                            r.picked_up = true;
                            continue;
                        }
                        o.status = OrderStatus::Delivered;
                        o.resolved_step = w.clock.step;
                        income += o.fee;
                        w.fees_paid_total += o.fee;
                        w.delivered_total += 1;
                        rec.delivered.emplace_back(o.id, i, o.fee);
                        r.active_order = -1;
                        r.picked_up = false;
                        break;
                    }
                    if (cells == 0) break;
                    step_toward(r.position, target);
                    --cells;
                    cost += mc.move_cost;
                }
                break;
            }
            case ActionKind::SwitchZone: {
                r.zone_choice = static_cast<int>(action.target);
                const Zone& z = w.grid.zones[static_cast<std::size_t>(r.zone_choice)];
                if (!(r.position == z.center)) {
                    step_toward(r.position, z.center);
                    cost += mc.move_cost;
                }
                break;
            }
            case ActionKind::RandomWalk: {
                const Zone& z = w.grid.zones[static_cast<std::size_t>(r.zone_choice)];
                if (!inside_zone(r.position, z)) {
                    step_toward(r.position, z.center);
                    cost += mc.move_cost;
                } else {
                    Cell candidates[4];
                    int count = 0;
                    const Cell options[4] = {{r.position.x + 1, r.position.y},
                                             {r.position.x - 1, r.position.y},
                                             {r.position.x, r.position.y + 1},
                                             {r.position.x, r.position.y - 1}};
                    for (const Cell c : options) {
                        if (w.grid.contains(c)) candidates[count++] = c;
                    }
                    if (count > 0) {
                        const auto pick = w.rider_rng[static_cast<std::size_t>(i)]
                                              .next_int(0, count - 1);
                        r.position = candidates[pick];
                        cost += mc.move_cost;
                    }
                }
                break;
            }
            case ActionKind::ExtendShift: {
                r.shift_budget = std::min(r.shift_budget + ag.extend_step,
                                          wc.steps_per_day - r.shift_start);
                break;
            }
            case ActionKind::Rest:
                break;
        }

        // Time on the clock: on-shift steps and overtime deliveries.
        const bool worked = on_shift[static_cast<std::size_t>(i)] ||
                            action.kind == ActionKind::AcceptOrder;
        if (worked) {
            cost += mc.time_cost;
            r.worked_today += 1;
        }

        r.reward_total += income;
        r.cost_total += cost;
        const int slot = w.clock.step % static_cast<int>(r.income_window.size());
        r.income_window_sum += income - r.income_window[static_cast<std::size_t>(slot)];
        r.income_window[static_cast<std::size_t>(slot)] = income;

        StepRiderRecord& rr = rec.riders[static_cast<std::size_t>(i)];
        rr.action = action.kind;
        rr.action_target = action.target;
        rr.intention = r.intention.label;
        rr.x = static_cast<std::int16_t>(r.position.x);
        rr.y = static_cast<std::int16_t>(r.position.y);
        rr.income_delta = income;
        rr.cost_delta = cost;
    }

    // Drop settled orders from the active set.
    std::erase_if(w.active_ids, [&](std::int64_t id) {
        const OrderStatus s = w.orders[static_cast<std::size_t>(id)].status;
        return s == OrderStatus::Delivered || s == OrderStatus::Expired;
    });

    if (n >= 2) {
        std::vector<double> incomes;
        incomes.reserve(static_cast<std::size_t>(n));
        for (const RiderState& r : w.riders) incomes.push_back(r.reward_total);
        rec.welfare = welfare(incomes);
        w.epoch_swf_sum += rec.welfare->swf;
        w.epoch_swf_count += 1;
    }

    if (w.platform.governance.mode == GovernanceMode::HillClimb &&
        (w.clock.step + 1) % w.platform.governance.epoch_steps == 0 &&
        w.epoch_swf_count > 0) {
        w.platform = govern(w.platform, w.epoch_swf_sum / w.epoch_swf_count);
        w.epoch_swf_sum = 0.0;
        w.epoch_swf_count = 0;
    }

    w.clock.step += 1;
    return rec;
}

RunTrace run(const RunConfig& cfg, std::uint64_t seed, bool keep_records) {
    WorldState w = init_world(cfg, seed);
    RunTrace trace;
    trace.config = w.config;
    trace.seed = seed;
    if (keep_records) trace.records.reserve(static_cast<std::size_t>(cfg.world.horizon));

    const UtilityParams up{cfg.metrics.eta, cfg.metrics.epsilon};
    const int n = cfg.world.n_riders;

    for (int t = 0; t < cfg.world.horizon; ++t) {
        StepRecord rec = step(w);

        if ((t + 1) % cfg.world.steps_per_day == 0) {
            double mean_u = 0.0;
            for (const RiderState& r : w.riders) {
                mean_u += rider_utility(r.reward_total, r.cost_total, up);
            }
            mean_u /= n;
            double day_index = std::numeric_limits<double>::quiet_NaN();
            if (rec.welfare.has_value() && mean_u > 0.0) {
                day_index = rec.welfare->swf / mean_u;
            }
            trace.terminal.day_involution.push_back(day_index);
            std::array<double, 3> shares{0.0, 0.0, 0.0};
            for (const RiderState& r : w.riders) {
                shares[static_cast<std::size_t>(r.intention.label)] += 1.0;
            }
            for (double& s : shares) s /= n;
            trace.terminal.day_intention_shares.push_back(shares);
        }

        if (keep_records) trace.records.push_back(std::move(rec));
    }

    TerminalSummary& term = trace.terminal;
    term.incomes.reserve(static_cast<std::size_t>(n));
    term.costs.reserve(static_cast<std::size_t>(n));
    term.utilities.reserve(static_cast<std::size_t>(n));
    int risk_avoidant = 0;
    for (const RiderState& r : w.riders) {
        term.incomes.push_back(r.reward_total);
        term.costs.push_back(r.cost_total);
        term.utilities.push_back(rider_utility(r.reward_total, r.cost_total, up));
        if (r.intention.label == IntentionLabel::RiskAvoidant) risk_avoidant += 1;
    }
    term.mean_utility =
        std::accumulate(term.utilities.begin(), term.utilities.end(), 0.0) / n;
    term.frac_risk_avoidant = static_cast<double>(risk_avoidant) / n;
    if (n >= 2) {
        term.welfare = welfare(term.incomes);
        if (term.mean_utility > 0.0) {
            term.involution = term.welfare->swf / term.mean_utility;
        } else {
            term.involution_note = "average utility non-positive";
        }
    } else {
        term.involution_note = "equality undefined for a single rider";
    }
    return trace;
}

std::string serialize(const WorldState& w) {
    nlohmann::json j;
    j["step"] = w.clock.step;
    j["next_order_id"] = w.next_order_id;
    j["platform"] = {{"base_fee", w.platform.base_fee},
                     {"per_cell_rate", w.platform.per_cell_rate},
                     {"volume_multiplier", w.platform.volume_multiplier},
                     {"direction", w.platform.direction},
                     {"has_previous", w.platform.has_previous},
                     {"previous_swf", w.platform.previous_swf},
                     {"previous_rate", w.platform.previous_rate}};
    j["totals"] = {{"fees_paid", w.fees_paid_total},
                   {"created", w.created_total},
                   {"delivered", w.delivered_total},
                   {"expired", w.expired_total}};
    nlohmann::json riders = nlohmann::json::array();
    for (const RiderState& r : w.riders) {
        riders.push_back({{"id", r.id},
                          {"pos", {r.position.x, r.position.y}},
                          {"zone", r.zone_choice},
                          {"intention", static_cast<int>(r.intention.label)},
                          {"anxious_streak", r.intention.anxious_streak},
                          {"clear_streak", r.intention.clear_streak},
                          {"above_peer_streak", r.intention.above_peer_streak},
                          {"shift_start", r.shift_start},
                          {"shift_budget", r.shift_budget},
                          {"worked_today", r.worked_today},
                          {"habit_steps", r.habit_steps},
                          {"reward", r.reward_total},
                          {"cost", r.cost_total},
                          {"active_order", r.active_order},
                          {"picked_up", r.picked_up},
                          {"window_sum", r.income_window_sum}});
    }
    j["riders"] = std::move(riders);
    nlohmann::json orders = nlohmann::json::array();
    for (const Order& o : w.orders) {
        orders.push_back({{"id", o.id},
                          {"created", o.created_step},
                          {"zone", o.zone_id},
                          {"pickup", {o.pickup.x, o.pickup.y}},
                          {"dropoff", {o.dropoff.x, o.dropoff.y}},
                          {"fee", o.fee},
                          {"status", static_cast<int>(o.status)},
                          {"rider", o.rider_id},
                          {"assigned", o.assigned_step},
                          {"resolved", o.resolved_step}});
    }
    j["orders"] = std::move(orders);
    nlohmann::json rng;
    rng["orders"] = w.orders_rng.state();
    nlohmann::json rider_states = nlohmann::json::array();
    for (const RandomStream& s : w.rider_rng) rider_states.push_back(s.state());
    rng["riders"] = std::move(rider_states);
    j["rng"] = std::move(rng);
    return j.dump();
}

}  // namespace ridersim
