// The three analysis layers over runs and result tables: outcome
// distributions and anomalies (what happened), standardized effect paths
// (what changed it), and intention/behavior structure — clustering,
// correlation, and stage flows (why it happened).
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridersim/experiment.hpp"
#include "ridersim/metrics.hpp"
#include "ridersim/world.hpp"

namespace ridersim {

struct InvolutionDistribution {
    int low = 0;
    int moderate = 0;
    int high = 0;
    int failed = 0;           // rows without a defined index
    double fraction_high = 0.0;  // over classified rows
};

InvolutionDistribution involution_distribution(const ResultTable& results);

struct Anomaly {
    std::size_t row = 0;  // index into results.rows
    double value = 0.0;
    double robust_z = 0.0;
};

// Robust z-score screen on the involution index: |x - median| / (1.4826 *
// MAD) above the threshold flags the row. A zero MAD flags every value away
// from the median. Failed rows are ignored.
std::vector<Anomaly> detect_anomalies(const ResultTable& results,
                                      double threshold = 3.5);

struct Heatmap {
    int window_steps = 0;
    int width = 0;
    int height = 0;
    // counts[w][y * width + x] = rider-steps spent at (x, y) during window w.
    std::vector<std::vector<std::int64_t>> counts;
};

// Aggregates rider positions from a kept trace into per-window occupancy
// grids. Throws if the trace kept no records or the window does not divide
// the recorded horizon.
Heatmap density_heatmap(const RunTrace& trace, int window_steps);

struct PathCoefficients {
    std::vector<std::string> names;
    std::vector<double> beta;     // standardized OLS coefficients
    std::vector<double> p_value;  // two-sided t-test per coefficient
    double r_squared = 0.0;
};

// Standardized regression of a response on factor columns: both sides are
// z-scored, so coefficients are comparable path weights in [-1, 1] for
// orthogonal designs. p-values use the exact Student-t distribution.
PathCoefficients path_coefficients(const std::vector<std::vector<double>>& factors,
                                   std::span<const double> response,
                                   std::span<const std::string> names);

// Upper-tail helper for the t distribution, exposed for tests: P(T_nu > t).
double student_t_sf(double t, double nu);

// Per-rider intention and behavior sequences extracted from a kept trace.
struct IntentionLog {
    int horizon = 0;
    int n_riders = 0;
    // [rider][step]
    std::vector<std::vector<IntentionLabel>> intentions;
    std::vector<std::vector<ActionKind>> behaviors;
};

IntentionLog intention_log(const RunTrace& trace);

struct ClusterResult {
    int k = 1;
    std::vector<int> assignment;        // per rider
    std::optional<double> silhouette;   // absent for the degenerate k = 1
    std::string note;
};

// Groups riders by windowed intention-share profiles: k-means with k-means++
// seeding and restarts, k chosen from k_range by silhouette. Identical
// profiles collapse to a single cluster.
ClusterResult cluster_intentions(const IntentionLog& log, int window_steps,
                                 std::pair<int, int> k_range, std::uint64_t seed);

struct CorrelationMatrix {
    // r[intention][behavior]; empty when either windowed series is constant.
    std::array<std::array<std::optional<double>, 5>, 3> r;
    int windows = 0;
};

// Pearson correlation between per-window intention shares and per-window
// behavior frequencies, pooled over riders and windows.
CorrelationMatrix intention_behavior_correlation(const IntentionLog& log,
                                                 int window_steps);

struct FlowMatrix {
    int window_steps = 0;
    int windows = 0;
    // transitions[w][from][to]: riders whose dominant label moved from ->
    // to between windows w and w+1 (size windows - 1).
    std::vector<std::array<std::array<int, 3>, 3>> transitions;
    // Dominant-label shares per window.
    std::vector<std::array<double, 3>> shares;
};

// Dominant intention per rider per window (plurality; ties to the earlier
// stage) and the between-window transition counts.
FlowMatrix stage_flow_matrix(const IntentionLog& log, int window_steps);

}  // namespace ridersim
