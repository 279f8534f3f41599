#include "ridersim/types.hpp"

namespace ridersim {

int CityGrid::zone_of(Cell c) const {
    // Nearest center, lower id on ties. Zone discs never overlap under the
    // default layout, so membership and proximity agree.
    int best = -1;
    long best_d2 = 0;
    for (std::size_t i = 0; i < zones.size(); ++i) {
        const long dx = c.x - zones[i].center.x;
        const long dy = c.y - zones[i].center.y;
        const long d2 = dx * dx + dy * dy;
        if (best < 0 || d2 < best_d2 ||
            (d2 == best_d2 && zones[i].id < zones[best].id)) {
            best = static_cast<int>(i);
            best_d2 = d2;
        }
    }
    return best < 0 ? -1 : zones[best].id;
}

const char* to_string(IntentionLabel label) {
    switch (label) {
        case IntentionLabel::RuleFollowing: return "rule_following";
        case IntentionLabel::Anxious: return "anxious";
        case IntentionLabel::RiskAvoidant: return "risk_avoidant";
    }
    return "unknown";
}

const char* to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::AcceptOrder: return "accept_order";
        case ActionKind::SwitchZone: return "switch_zone";
        case ActionKind::RandomWalk: return "random_walk";
        case ActionKind::Rest: return "rest";
        case ActionKind::ExtendShift: return "extend_shift";
    }
    return "unknown";
}

}  // namespace ridersim
