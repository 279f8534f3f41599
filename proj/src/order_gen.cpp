#include "ridersim/order_gen.hpp"

#include <cmath>
#include <stdexcept>

namespace ridersim {

double order_intensity(double day_fraction, const OrderConfig& orders) {
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double z = (day_fraction - orders.b[i]) / orders.c[i];
        sum += orders.a[i] * std::exp(-z * z);
    }
    return orders.volume_multiplier * sum;
}

// Rejection over the bounding square; the center itself is always a valid
// fallback.
Cell uniform_zone_cell(const Zone& zone, const CityGrid& grid, RandomStream& rng) {
    const int r = zone.radius;
    for (int attempt = 0; attempt < 256; ++attempt) {
        const int dx = static_cast<int>(rng.next_int(-r, r));
        const int dy = static_cast<int>(rng.next_int(-r, r));
        if (dx * dx + dy * dy > r * r) continue;
        const Cell c{zone.center.x + dx, zone.center.y + dy};
        if (grid.contains(c)) return c;
    }
    return zone.center;
}

namespace {

// Uniform over cells at Manhattan distance [1, dmax] from the pickup, by
// rejection over the diamond's bounding square.
Cell sample_dropoff(Cell pickup, int dmax, const CityGrid& grid, RandomStream& rng) {
    for (int attempt = 0; attempt < 256; ++attempt) {
        const int dx = static_cast<int>(rng.next_int(-dmax, dmax));
        const int dy = static_cast<int>(rng.next_int(-dmax, dmax));
        const int dist = std::abs(dx) + std::abs(dy);
        if (dist < 1 || dist > dmax) continue;
        const Cell c{pickup.x + dx, pickup.y + dy};
        if (grid.contains(c)) return c;
    }
    // Extremely tight grids can starve the sampler; fall back to the nearest
    // in-grid neighbor.
    const Cell candidates[4] = {{pickup.x + 1, pickup.y},
                                {pickup.x - 1, pickup.y},
                                {pickup.x, pickup.y + 1},
                                {pickup.x, pickup.y - 1}};
    for (const Cell c : candidates) {
        if (grid.contains(c)) return c;
    }
    return pickup;
}

}  // namespace

std::vector<Order> generate_orders(const SimClock& clock, const OrderConfig& orders,
                                   const CityGrid& grid, const OrderPricing& pricing,
                                   std::int64_t& next_order_id, RandomStream& rng) {
    if (grid.zones.empty()) {
        throw std::invalid_argument("generate_orders: zone list is empty");
    }
    const double intensity = order_intensity(clock.day_fraction(), orders);
    double weight_sum = 0.0;
    for (const Zone& z : grid.zones) weight_sum += z.weight;

    std::vector<Order> out;
    if (intensity <= 0.0 || weight_sum <= 0.0) return out;

    for (const Zone& zone : grid.zones) {
        const double lambda = intensity * zone.weight / weight_sum;
        const std::int64_t count = rng.poisson(lambda);
        for (std::int64_t i = 0; i < count; ++i) {
            Order o;
            o.id = next_order_id++;
            o.created_step = clock.step;
            o.zone_id = zone.id;
            o.pickup = uniform_zone_cell(zone, grid, rng);
            o.dropoff = sample_dropoff(o.pickup, orders.dropoff_max, grid, rng);
            o.fee = delivery_fee(pricing, manhattan(o.pickup, o.dropoff));
            out.push_back(o);
        }
    }
    return out;
}

}  // namespace ridersim
