// Simulation core tests: world construction, the step loop, order
// lifecycle, money conservation, shift mechanics, and determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "ridersim/config.hpp"
#include "ridersim/world.hpp"

using namespace ridersim;

namespace {

RunConfig single_rider_config() {
    RunConfig cfg = default_config();
    cfg.world.n_riders = 1;
    cfg.world.zones = {Zone{0, {50, 50}, 8, 1.0}};
    cfg.orders.volume_multiplier = 0.0;  // only scripted orders
    return cfg;
}

RunConfig desk_config(int riders, int horizon) {
    RunConfig cfg = default_config();
    cfg.world.n_riders = riders;
    cfg.world.horizon = horizon;
    return cfg;
}

// Pin the rider to a known spot with a deterministic day-one shift.
void pin_rider(WorldState& w, int i, Cell pos, int shift_start) {
    w.riders[static_cast<std::size_t>(i)].position = pos;
    w.riders[static_cast<std::size_t>(i)].shift_start = shift_start;
}

}  // namespace

// --------------------------------------------------------------- init_world

TEST_CASE("init_world builds the configured roster at step zero") {
    const RunConfig cfg = default_config();
    const WorldState w = init_world(cfg, 7);
    CHECK(w.riders.size() == 100);
    CHECK(w.grid.zones.size() == 10);
    CHECK(w.clock.step == 0);
    CHECK(w.created_total == 0);
    CHECK(w.delivered_total == 0);
    CHECK(w.expired_total == 0);
    CHECK(w.fees_paid_total == 0.0);
    CHECK(w.active_ids.empty());
    CHECK(w.platform.per_cell_rate == cfg.platform.per_cell_rate);

    std::map<int, int> zone_counts;
    const int slack = cfg.world.steps_per_day - cfg.agents.base_shift;
    for (const RiderState& r : w.riders) {
        CHECK(w.grid.contains(r.position));
        REQUIRE(r.zone_choice >= 0);
        REQUIRE(r.zone_choice < 10);
        zone_counts[r.zone_choice] += 1;
        CHECK(r.shift_start >= 0);
        CHECK(r.shift_start <= slack);
        CHECK(r.shift_budget == cfg.agents.base_shift);
        CHECK(r.income_window.size() ==
              static_cast<std::size_t>(cfg.agents.rate_window));
        CHECK(r.intention.label == IntentionLabel::RuleFollowing);
        CHECK(r.active_order == -1);
        CHECK(r.reward_total == 0.0);
    }
    // Seats blend uniform and demand share, so no zone starts empty.
    int total = 0;
    for (int z = 0; z < 10; ++z) {
        CHECK(zone_counts[z] >= 1);
        total += zone_counts[z];
    }
    CHECK(total == 100);
}

TEST_CASE("init_world handles the minimal one-rider world") {
    const RunConfig cfg = single_rider_config();
    const WorldState w = init_world(cfg, 0);
    REQUIRE(w.riders.size() == 1);
    CHECK(w.grid.contains(w.riders[0].position));
    CHECK(w.riders[0].zone_choice == 0);
}

TEST_CASE("init_world is a pure function of config and seed") {
    const RunConfig cfg = default_config();
    const WorldState a = init_world(cfg, 42);
    const WorldState b = init_world(cfg, 42);
    CHECK(serialize(a) == serialize(b));
    const WorldState c = init_world(cfg, 43);
    CHECK(serialize(a) != serialize(c));
}

TEST_CASE("init_world rejects an empty roster") {
    RunConfig cfg = default_config();
    cfg.world.n_riders = 0;
    CHECK_THROWS_AS(init_world(cfg, 1), std::invalid_argument);
}

// --------------------------------------------------------------------- step

TEST_CASE("a world with no orders and everyone off shift is inert") {
    RunConfig cfg = desk_config(5, 240);
    cfg.orders.volume_multiplier = 0.0;
    WorldState w = init_world(cfg, 3);
    // A start past the day length keeps the shift window permanently shut.
    for (RiderState& r : w.riders) r.shift_start = 200;
    const std::vector<Cell> before = [&] {
        std::vector<Cell> p;
        for (const RiderState& r : w.riders) p.push_back(r.position);
        return p;
    }();

    const StepRecord rec = step(w);
    CHECK(w.clock.step == 1);
    CHECK(rec.step == 0);
    CHECK(rec.created.empty());
    CHECK(rec.assigned.empty());
    CHECK(rec.delivered.empty());
    CHECK(rec.expired.empty());
    for (std::size_t i = 0; i < w.riders.size(); ++i) {
        CHECK(rec.riders[i].action == ActionKind::Rest);
        CHECK(w.riders[i].position == before[i]);
        CHECK(w.riders[i].reward_total == 0.0);
        CHECK(w.riders[i].cost_total == 0.0);
    }
}

TEST_CASE("each step advances the clock by exactly one") {
    WorldState w = init_world(desk_config(3, 360), 11);
    for (int t = 0; t < 5; ++t) {
        CHECK(w.clock.step == t);
        step(w);
    }
    CHECK(w.clock.step == 5);
}

TEST_CASE("stepping past the horizon is an error") {
    RunConfig cfg = single_rider_config();
    cfg.world.horizon = 120;
    WorldState w = init_world(cfg, 1);
    for (int t = 0; t < 120; ++t) step(w);
    CHECK_THROWS_AS(step(w), std::logic_error);
}

TEST_CASE("an adjacent scripted order is assigned, carried, and paid") {
    WorldState w = init_world(single_rider_config(), 5);
    pin_rider(w, 0, {50, 50}, 0);
    // Pickup one cell east, dropoff five cells further north.
    w.queued_orders.push_back({{51, 50}, {51, 55}});

    StepRecord rec = step(w);
    REQUIRE(rec.created.size() == 1);
    REQUIRE(rec.assigned.size() == 1);
    CHECK(rec.assigned[0].first == 0);
    CHECK(rec.assigned[0].second == 0);
    CHECK(rec.delivered.empty());
    CHECK(w.orders[0].status == OrderStatus::Assigned);
    CHECK(w.orders[0].assigned_step == 0);
    // Speed 1: the first step reaches the pickup.
    CHECK(w.riders[0].position == Cell{51, 50});
    CHECK(w.riders[0].picked_up);

    for (int t = 1; t < 5; ++t) {
        rec = step(w);
        CHECK(rec.delivered.empty());
    }
    rec = step(w);  // step 5: the last cell plus the handoff
    REQUIRE(rec.delivered.size() == 1);
    CHECK(std::get<0>(rec.delivered[0]) == 0);
    CHECK(std::get<1>(rec.delivered[0]) == 0);
    CHECK(std::get<2>(rec.delivered[0]) == doctest::Approx(2.5));

    const RiderState& r = w.riders[0];
    CHECK(w.orders[0].status == OrderStatus::Delivered);
    CHECK(w.orders[0].resolved_step == 5);
    CHECK(r.active_order == -1);
    CHECK(r.reward_total == doctest::Approx(2.5));
    // Six moves and six worked steps.
    CHECK(r.cost_total == doctest::Approx(6 * 0.02 + 6 * 0.01));
    CHECK(w.fees_paid_total == doctest::Approx(2.5));
    CHECK(w.delivered_total == 1);
    CHECK(w.active_ids.empty());
    CHECK(w.income_rate(0) == doctest::Approx(2.5 / 6.0));
}

TEST_CASE("three scripted deliveries sum their fees into the reward total") {
    WorldState w = init_world(single_rider_config(), 5);
    pin_rider(w, 0, {50, 50}, 0);
    const std::vector<std::pair<Cell, Cell>> jobs = {
        {{50, 50}, {53, 50}}, {{53, 50}, {53, 53}}, {{53, 53}, {50, 50}}};
    double expected_fees = 0.0;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        expected_fees += 2.0 + 0.1 * manhattan(jobs[k].first, jobs[k].second);
        w.queued_orders.push_back(jobs[k]);
        while (w.delivered_total < static_cast<std::int64_t>(k) + 1) step(w);
    }
    CHECK(w.delivered_total == 3);
    CHECK(w.riders[0].reward_total == doctest::Approx(expected_fees));
    CHECK(w.fees_paid_total == doctest::Approx(expected_fees));
    CHECK(w.created_total == 3);
}

TEST_CASE("unserved orders expire after the configured age") {
    RunConfig cfg = single_rider_config();
    WorldState w = init_world(cfg, 9);
    // Keep the rider permanently off shift so nothing is dispatched.
    w.riders[0].shift_start = 200;
    w.queued_orders.push_back({{50, 50}, {50, 55}});
    StepRecord rec = step(w);
    REQUIRE(rec.created.size() == 1);
    CHECK(rec.assigned.empty());

    for (int t = 1; t < cfg.orders.expiry; ++t) {
        rec = step(w);
        CHECK(rec.expired.empty());
    }
    rec = step(w);  // created at 0, expires when the age reaches 30
    REQUIRE(rec.expired.size() == 1);
    CHECK(rec.expired[0] == 0);
    CHECK(w.orders[0].status == OrderStatus::Expired);
    CHECK(w.orders[0].resolved_step == cfg.orders.expiry);
    CHECK(w.expired_total == 1);
    CHECK(w.active_ids.empty());
    CHECK(w.riders[0].reward_total == 0.0);
}

// -------------------------------------------------------- shift mechanics

TEST_CASE("anxious riders extend their shift; the budget is capped at day end") {
    RunConfig cfg = single_rider_config();
    WorldState w = init_world(cfg, 2);
    pin_rider(w, 0, {50, 50}, 0);
    RiderState& r = w.riders[0];
    r.intention.label = IntentionLabel::Anxious;
    r.intention.anxious_streak = 1;

    // Burn through the base budget: 60 working steps.
    for (int t = 0; t < 60; ++t) step(w);
    CHECK(r.worked_today == 60);
    CHECK_FALSE(w.rider_on_shift(0));

    const StepRecord rec = step(w);  // off shift, anxious, room to extend
    CHECK(rec.riders[0].action == ActionKind::ExtendShift);
    CHECK(r.shift_budget == 70);
    CHECK(rec.riders[0].cost_delta == 0.0);  // extension itself costs nothing
    CHECK(w.rider_on_shift(0));  // and reopens the shift immediately

    // Repeated extensions saturate at the end of the day.
    for (int t = 0; t < 56; ++t) step(w);
    CHECK(r.shift_budget <= 120);
    for (int t = w.clock.step; t < 120; ++t) step(w);
    CHECK(r.shift_budget == 120);
}

TEST_CASE("day boundaries reset hours and roll extensions into habit") {
    RunConfig cfg = single_rider_config();
    WorldState w = init_world(cfg, 2);
    pin_rider(w, 0, {50, 50}, 0);
    RiderState& r = w.riders[0];
    r.intention.label = IntentionLabel::Anxious;  // extends all day

    // The boundary lives at the top of the call that processes step 120.
    for (int t = 0; t < 121; ++t) step(w);
    // Day 2: habit absorbs a fifth of yesterday's 60 extra steps.
    CHECK(r.habit_steps == doctest::Approx(0.2 * 60.0));
    CHECK(r.shift_budget == 60 + 12);
    CHECK(r.worked_today == 1);  // already working day 2's first step

    for (int t = 121; t < 241; ++t) step(w);
    // Day 3: habit = 0.8*12 + 0.2*60 after another fully extended day.
    CHECK(r.habit_steps == doctest::Approx(0.8 * 12.0 + 0.2 * 60.0));
    CHECK(r.shift_budget == 60 + 22);
}

TEST_CASE("late starters get a budget clipped to the remaining day") {
    RunConfig cfg = single_rider_config();
    WorldState w = init_world(cfg, 2);
    pin_rider(w, 0, {50, 50}, 100);
    step(w);  // the first boundary recomputes the budget
    CHECK(w.riders[0].shift_budget == 20);
}

TEST_CASE("a rider mid-delivery works past the exhausted budget") {
    RunConfig cfg = single_rider_config();
    cfg.agents.base_shift = 1;
    WorldState w = init_world(cfg, 4);
    pin_rider(w, 0, {50, 50}, 0);
    w.queued_orders.push_back({{50, 50}, {50, 45}});

    step(w);  // assigned, picked up, one cell moved; budget now spent
    RiderState& r = w.riders[0];
    CHECK(r.worked_today == 1);
    CHECK_FALSE(w.rider_on_shift(0));
    CHECK(w.rider_working(0));  // the active order keeps them on the road

    for (int t = 1; t <= 4; ++t) {
        const StepRecord rec = step(w);
        CHECK(rec.riders[0].action == ActionKind::AcceptOrder);
        CHECK(rec.riders[0].cost_delta > 0.0);  // overtime still costs time
    }
    CHECK(w.delivered_total == 1);
    CHECK(r.worked_today == 5);
    CHECK(r.reward_total == doctest::Approx(2.5));

    // With the order done and no budget left, the rider stops.
    const StepRecord after = step(w);
    CHECK_FALSE(w.rider_working(0));
    CHECK(after.riders[0].income_delta == 0.0);
}

TEST_CASE("intentions stay rule-following until one rate window has passed") {
    RunConfig cfg = desk_config(2, 240);
    cfg.orders.volume_multiplier = 0.0;  // permanent scarcity trigger
    cfg.agents.rate_window = 4;
    WorldState w = init_world(cfg, 6);
    for (RiderState& r : w.riders) r.shift_start = 0;

    for (int t = 0; t < 4; ++t) {
        step(w);
        CHECK(w.riders[0].intention.label == IntentionLabel::RuleFollowing);
        CHECK(w.riders[1].intention.label == IntentionLabel::RuleFollowing);
    }
    step(w);  // clock.step == 4 == rate_window: the gate opens
    CHECK(w.riders[0].intention.label == IntentionLabel::Anxious);
    CHECK(w.riders[1].intention.label == IntentionLabel::Anxious);
}

TEST_CASE("off-shift riders keep their intention frozen") {
    RunConfig cfg = desk_config(2, 240);
    cfg.orders.volume_multiplier = 0.0;
    cfg.agents.rate_window = 4;
    WorldState w = init_world(cfg, 6);
    w.riders[0].shift_start = 0;
    w.riders[1].shift_start = 200;  // never works

    for (int t = 0; t < 10; ++t) step(w);
    CHECK(w.riders[0].intention.label == IntentionLabel::Anxious);
    CHECK(w.riders[1].intention.label == IntentionLabel::RuleFollowing);
}

// ------------------------------------------------- conservation and bounds

TEST_CASE("order ledger and money totals balance over a live run") {
    RunConfig cfg = desk_config(20, 600);
    WorldState w = init_world(cfg, 1234);
    double recorded_income = 0.0;
    double recorded_fees = 0.0;
    std::set<std::int64_t> ever_assigned;

    for (int t = 0; t < cfg.world.horizon; ++t) {
        const StepRecord rec = step(w);
        for (const auto& rr : rec.riders) recorded_income += rr.income_delta;
        for (const auto& d : rec.delivered) recorded_fees += std::get<2>(d);
        for (const auto& [oid, rid] : rec.assigned) {
            // No order is ever assigned twice.
            CHECK(ever_assigned.insert(oid).second);
        }
        // At most one active order per rider, and no duplicates.
        std::set<std::int64_t> held;
        for (const RiderState& r : w.riders) {
            CHECK(w.grid.contains(r.position));
            if (r.active_order >= 0) CHECK(held.insert(r.active_order).second);
        }
    }

    // Status counts partition the ledger.
    std::int64_t open = 0, assigned = 0, delivered = 0, expired = 0;
    for (const Order& o : w.orders) {
        switch (o.status) {
            case OrderStatus::Open: open += 1; break;
            case OrderStatus::Assigned: assigned += 1; break;
            case OrderStatus::Delivered:
                delivered += 1;
                CHECK(o.rider_id >= 0);
                CHECK(o.assigned_step >= o.created_step);
                CHECK(o.resolved_step >= o.assigned_step);
                break;
            case OrderStatus::Expired:
                expired += 1;
                CHECK(o.rider_id == -1);
                break;
        }
    }
    CHECK(open + assigned + delivered + expired == w.created_total);
    CHECK(w.created_total == static_cast<std::int64_t>(w.orders.size()));
    CHECK(delivered == w.delivered_total);
    CHECK(expired == w.expired_total);
    CHECK(static_cast<std::int64_t>(w.active_ids.size()) == open + assigned);

    // Every coin of income is a delivered fee, and vice versa.
    double rider_totals = 0.0;
    for (const RiderState& r : w.riders) rider_totals += r.reward_total;
    CHECK(recorded_income == doctest::Approx(w.fees_paid_total).epsilon(1e-12));
    CHECK(recorded_fees == doctest::Approx(w.fees_paid_total).epsilon(1e-12));
    CHECK(rider_totals == doctest::Approx(w.fees_paid_total).epsilon(1e-12));
}

TEST_CASE("rider processing order never changes the outcome") {
    const RunConfig cfg = desk_config(12, 360);
    WorldState a = init_world(cfg, 77);
    WorldState b = init_world(cfg, 77);
    b.processing_permutation.resize(12);
    for (int i = 0; i < 12; ++i) b.processing_permutation[static_cast<std::size_t>(i)] = 11 - i;

    for (int t = 0; t < cfg.world.horizon; ++t) {
        step(a);
        step(b);
    }
    CHECK(serialize(a) == serialize(b));

    WorldState c = init_world(cfg, 77);
    c.processing_permutation = {3, 1, 2};  // wrong size
    CHECK_THROWS_AS(step(c), std::logic_error);
}

// ---------------------------------------------------------------------- run

TEST_CASE("run is deterministic and keeps exactly horizon records") {
    const RunConfig cfg = desk_config(10, 360);
    const RunTrace a = run(cfg, 5);
    const RunTrace b = run(cfg, 5);
    REQUIRE(a.records.size() == 360);
    REQUIRE(b.records.size() == 360);
    for (std::size_t t = 0; t < a.records.size(); ++t) {
        const StepRecord& ra = a.records[t];
        const StepRecord& rb = b.records[t];
        CHECK(ra.created == rb.created);
        CHECK(ra.assigned == rb.assigned);
        CHECK(ra.expired == rb.expired);
        REQUIRE(ra.riders.size() == rb.riders.size());
        for (std::size_t i = 0; i < ra.riders.size(); ++i) {
            CHECK(ra.riders[i].action == rb.riders[i].action);
            CHECK(ra.riders[i].x == rb.riders[i].x);
            CHECK(ra.riders[i].y == rb.riders[i].y);
            CHECK(ra.riders[i].income_delta == rb.riders[i].income_delta);
        }
    }
    CHECK(a.terminal.incomes == b.terminal.incomes);
    CHECK(a.terminal.day_involution == b.terminal.day_involution);
}

TEST_CASE("run without records still produces the day series and summary") {
    const RunConfig cfg = desk_config(10, 360);
    const RunTrace t = run(cfg, 5, false);
    CHECK(t.records.empty());
    REQUIRE(t.terminal.day_involution.size() == 3);
    REQUIRE(t.terminal.day_intention_shares.size() == 3);
    for (const auto& shares : t.terminal.day_intention_shares) {
        CHECK(shares[0] + shares[1] + shares[2] == doctest::Approx(1.0));
    }
    CHECK(t.terminal.incomes.size() == 10);

    const RunTrace full = run(cfg, 5, true);
    CHECK(full.terminal.incomes == t.terminal.incomes);
    CHECK(full.terminal.mean_utility == t.terminal.mean_utility);
}

TEST_CASE("the default configuration yields a finite involution index") {
    RunConfig cfg = default_config();
    cfg.world.n_riders = 30;
    cfg.world.horizon = 1200;
    const RunTrace t = run(cfg, 99, false);
    REQUIRE(t.terminal.welfare.has_value());
    REQUIRE(t.terminal.involution.has_value());
    CHECK(std::isfinite(*t.terminal.involution));
    CHECK(*t.terminal.involution >= 0.0);
    CHECK(t.terminal.frac_risk_avoidant >= 0.0);
    CHECK(t.terminal.frac_risk_avoidant <= 1.0);
}

TEST_CASE("a single-rider run notes why the index is absent") {
    RunConfig cfg = single_rider_config();
    cfg.orders.volume_multiplier = 1.0;
    cfg.world.horizon = 240;
    const RunTrace t = run(cfg, 3);
    CHECK_FALSE(t.terminal.welfare.has_value());
    CHECK_FALSE(t.terminal.involution.has_value());
    CHECK(t.terminal.involution_note == "equality undefined for a single rider");
}

TEST_CASE("zero horizon is rejected before any work happens") {
    RunConfig cfg = default_config();
    cfg.world.horizon = 0;
    CHECK_THROWS_AS(run(cfg, 1), std::invalid_argument);
}
