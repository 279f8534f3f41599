// Order generation: a five-component Gaussian demand curve over the day
// drives Poisson arrival counts, split across zones by weight; each order
// gets a pickup inside its zone disc and a nearby dropoff, priced by distance.
#pragma once

#include <cstdint>
#include <vector>

#include "ridersim/config.hpp"
#include "ridersim/rng.hpp"
#include "ridersim/types.hpp"

namespace ridersim {

// Expected city-wide order volume at a day fraction x in [0, 1):
// volume_multiplier * sum_i a_i * exp(-((x - b_i) / c_i)^2).
double order_intensity(double day_fraction, const OrderConfig& orders);

struct OrderPricing {
    double base_fee = 2.0;
    double per_cell_rate = 0.1;
};

inline double delivery_fee(const OrderPricing& p, int manhattan_cells) {
    return p.base_fee + p.per_cell_rate * manhattan_cells;
}

// Uniform cell of the zone disc intersected with the grid; also used to
// place riders. Falls back to the zone center if rejection sampling starves.
Cell uniform_zone_cell(const Zone& zone, const CityGrid& grid, RandomStream& rng);

// Draws this step's new orders. The intensity is a per-step city-wide rate;
// zone z independently draws Poisson(intensity * w_z / sum w). Pickups are
// uniform over the zone disc clipped to the grid, dropoffs uniform over
// Manhattan distance [1, dropoff_max] from the pickup. Consumes only the
// given stream, so generation is reproducible independent of everything else
// in the step.
std::vector<Order> generate_orders(const SimClock& clock, const OrderConfig& orders,
                                   const CityGrid& grid, const OrderPricing& pricing,
                                   std::int64_t& next_order_id, RandomStream& rng);

}  // namespace ridersim
