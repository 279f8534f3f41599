// Welfare and involution metrics: CRRA utility, Gini-based equality, social
// welfare, the involution index with its classification bands, and series
// comparison statistics for benchmarking a run against reference data.
#pragma once

#include <optional>
#include <span>
#include <string>

namespace ridersim {

struct UtilityParams {
    double eta = 0.15;       // relative risk aversion of the reward term
    double epsilon = 1e-6;   // floor applied to the CRRA argument when eta >= 1
};

// CRRA value function (z^(1-eta) - 1) / (1 - eta); ln z in the limit eta = 1.
// z is floored to epsilon only when eta >= 1, where the function diverges at
// zero. Throws std::invalid_argument for eta <= 0.
double crra(double z, double eta, double epsilon = 1e-6);

// Utility of one rider: concave value of total reward minus linear total cost.
double rider_utility(double reward_total, double cost_total, const UtilityParams& p);

// Gini coefficient over non-negative incomes. All-zero incomes give 0.
// Throws std::invalid_argument on an empty span or any negative value.
double gini(std::span<const double> incomes);

struct WelfareSnapshot {
    double eq = 0.0;    // 1 - gini * N / (N - 1), in [0, 1]
    double prod = 0.0;  // total income
    double swf = 0.0;   // eq * prod
};

// Equality-weighted social welfare. Throws for fewer than two incomes: the
// bias-corrected equality term is undefined at N = 1.
WelfareSnapshot welfare(std::span<const double> incomes);

// Terminal social welfare over average terminal utility. Throws when the
// average utility is not strictly positive (the ratio loses its meaning).
double involution_index(double swf_terminal, std::span<const double> utilities);

enum class InvolutionLevel { Low, Moderate, High };

// Bands: (-inf, 30] Low, (30, 60] Moderate, (60, inf) High.
InvolutionLevel classify_involution(double index);
const char* to_string(InvolutionLevel level);

struct SeriesComparison {
    double mae = 0.0;
    double rmse = 0.0;
    // Empty when either series is constant (correlation undefined).
    std::optional<double> pearson;
};

// Elementwise comparison of two equal-length series. Throws on length
// mismatch or empty input.
SeriesComparison benchmark_compare(std::span<const double> reference,
                                   std::span<const double> candidate);

// Pearson correlation helper shared with the analysis layer; empty when
// either input is constant. Throws on length mismatch or length < 2.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

}  // namespace ridersim
