// Designed experiments over the simulator: full-factorial designs with
// common random numbers, batch execution, treatment-effect estimation with a
// percentile bootstrap, a polynomial response-surface metamodel, and the
// emergence probability tree.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridersim/config.hpp"
#include "ridersim/world.hpp"

namespace ridersim {

struct DesignRow {
    int design_point = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> levels;  // parallel to factor_names
};

struct DesignMatrix {
    std::vector<std::string> factor_names;
    std::vector<bool> controllable;
    std::vector<std::vector<std::string>> factor_levels;  // per factor, design order
    std::vector<DesignRow> rows;
    int replicates = 1;
    std::uint64_t base_seed = 0;
};

// Full factorial crossing in factor-definition order (the last factor varies
// fastest), replicated with common random numbers: replicate k uses seed
// base_seed + k at every design point.
DesignMatrix build_design(std::span<const FactorSpec> factors, int replicates,
                          std::uint64_t base_seed);

struct ResultRow {
    int design_point = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> levels;
    bool failed = false;
    std::string fail_reason;
    double involution = 0.0;
    double swf = 0.0;
    double mean_utility = 0.0;
    double frac_risk_avoidant = 0.0;
    std::vector<double> day_involution;
};

struct ResultTable {
    std::vector<std::string> factor_names;
    std::vector<std::vector<std::string>> factor_levels;
    std::vector<ResultRow> rows;
};

// Runs every design row against the template config. Rows whose run cannot
// produce an involution index are marked failed (with the reason) rather
// than aborting the batch. parallelism caps concurrent runs; results are
// identical for any value.
ResultTable execute_design(const DesignMatrix& design, const RunConfig& base,
                           int parallelism = 1);

struct AteEstimate {
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// Difference in means (treated - control) with a seeded percentile bootstrap
// over both samples. Throws on an empty side.
AteEstimate average_treatment_effect(std::span<const double> treated,
                                     std::span<const double> control,
                                     int bootstrap_rounds, std::uint64_t seed);

struct Metamodel {
    int degree = 1;
    std::vector<std::string> terms;        // "1", then feature terms
    std::vector<double> coefficients;      // parallel to terms
    std::vector<double> feature_mean;      // standardization of raw features
    std::vector<double> feature_scale;
    std::vector<double> feature_min;       // raw-range bounds for extrapolation
    std::vector<double> feature_max;
    double r_squared = 0.0;
};

// Least-squares polynomial fit (degree 1 or 2) on standardized features.
// Throws std::invalid_argument naming the offending columns when the
// expanded design matrix is rank-deficient (collinear features).
Metamodel fit_metamodel(const std::vector<std::vector<double>>& features,
                        std::span<const double> response,
                        std::span<const std::string> feature_names, int degree);

struct MetamodelPrediction {
    double value = 0.0;
    bool extrapolated = false;  // outside the fitted feature ranges
};

MetamodelPrediction predict(const Metamodel& model, std::span<const double> features);

// Four-stage emergence chain: an adaptation emerges only if the environment
// provides the stimulus, the agent decides to adapt, executes the decision,
// and the feedback loop sustains it. Probabilities of the failure leaves and
// the success leaf partition the stimulus mass.
struct EmergenceChain {
    double p_stimulus = 1.0;  // environment presents the trigger
    double p_decide = 0.0;    // agent decides to adapt, given the stimulus
    double p_act = 0.0;       // decision turns into behavior
    double p_sustain = 0.0;   // feedback keeps the behavior alive
};

struct EmergenceOutcome {
    double emerged = 0.0;      // full chain succeeded
    double declined = 0.0;     // stimulus present, agent declined to adapt
    double unexecuted = 0.0;   // decided but never acted
    double faded = 0.0;        // acted but feedback failed
};

// Exact leaf probabilities; the four outcomes sum to p_stimulus. Throws on
// probabilities outside [0, 1].
EmergenceOutcome emergence_outcome(const EmergenceChain& chain);

}  // namespace ridersim
