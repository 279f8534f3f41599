#include "ridersim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

#include "ridersim/log.hpp"
#include "ridersim/rng.hpp"

namespace ridersim {

DesignMatrix build_design(std::span<const FactorSpec> factors, int replicates,
                          std::uint64_t base_seed) {
    if (replicates < 1) throw std::invalid_argument("build_design: replicates must be >= 1");
    DesignMatrix d;
    d.replicates = replicates;
    d.base_seed = base_seed;
    std::size_t points = 1;
    for (const FactorSpec& f : factors) {
        if (f.levels.empty()) {
            throw std::invalid_argument("build_design: factor '" + f.name +
                                        "' has no levels");
        }
        d.factor_names.push_back(f.name);
        d.controllable.push_back(f.controllable);
        d.factor_levels.push_back(f.levels);
        points *= f.levels.size();
    }
    if (factors.empty()) points = 1;

    for (std::size_t p = 0; p < points; ++p) {
        // Mixed-radix decode, last factor fastest.
        std::vector<std::string> levels(factors.size());
        std::size_t rem = p;
        for (std::size_t f = factors.size(); f-- > 0;) {
            const std::size_t radix = factors[f].levels.size();
            levels[f] = factors[f].levels[rem % radix];
            rem /= radix;
        }
        for (int k = 0; k < replicates; ++k) {
            DesignRow row;
            row.design_point = static_cast<int>(p);
            row.replicate = k;
            // Common random numbers: replicate k shares its seed across all
            // design points, so cross-point contrasts cancel shared noise.
            row.seed = base_seed + static_cast<std::uint64_t>(k);
            row.levels = levels;
            d.rows.push_back(std::move(row));
        }
    }
    return d;
}

namespace {

ResultRow execute_row(const DesignMatrix& design, const DesignRow& row,
                      const RunConfig& base) {
    ResultRow out;
    out.design_point = row.design_point;
    out.replicate = row.replicate;
    out.seed = row.seed;
    out.levels = row.levels;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.involution = nan;
    out.swf = nan;
    out.mean_utility = nan;
    out.frac_risk_avoidant = nan;
    try {
        RunConfig cfg = base;
        for (std::size_t f = 0; f < design.factor_names.size(); ++f) {
            cfg = apply_factor(cfg, design.factor_names[f], row.levels[f]);
        }
        const RunTrace trace = run(cfg, row.seed, /*keep_records=*/false);
        const TerminalSummary& term = trace.terminal;
        out.mean_utility = term.mean_utility;
        out.frac_risk_avoidant = term.frac_risk_avoidant;
        out.day_involution = term.day_involution;
        if (term.welfare.has_value()) out.swf = term.welfare->swf;
        if (term.involution.has_value()) {
            out.involution = *term.involution;
        } else {
            out.failed = true;
            out.fail_reason = term.involution_note;
        }
    } catch (const std::exception& e) {
        out.failed = true;
        out.fail_reason = e.what();
    }
    return out;
}

}  // namespace

ResultTable execute_design(const DesignMatrix& design, const RunConfig& base,
                           int parallelism) {
    ResultTable table;
    table.factor_names = design.factor_names;
    table.factor_levels = design.factor_levels;
    table.rows.resize(design.rows.size());

    const int workers = std::max(1, parallelism);
    if (workers == 1 || design.rows.size() <= 1) {
        for (std::size_t i = 0; i < design.rows.size(); ++i) {
            table.rows[i] = execute_row(design, design.rows[i], base);
        }
    } else {
        // Each worker claims rows off a shared counter and writes its slot;
        // output is positionally identical for any worker count.
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int count = std::min<int>(workers, static_cast<int>(design.rows.size()));
        pool.reserve(static_cast<std::size_t>(count));
        for (int t = 0; t < count; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= design.rows.size()) return;
                    table.rows[i] = execute_row(design, design.rows[i], base);
                }
            });
        }
        for (std::thread& th : pool) th.join();
    }

    std::size_t failed = 0;
    for (const ResultRow& r : table.rows) failed += r.failed ? 1 : 0;
    if (failed > 0) {
        log_info("experiment: %zu of %zu runs failed", failed, table.rows.size());
    }
    return table;
}

AteEstimate average_treatment_effect(std::span<const double> treated,
                                     std::span<const double> control,
                                     int bootstrap_rounds, std::uint64_t seed) {
    if (treated.empty() || control.empty()) {
        throw std::invalid_argument("average_treatment_effect: empty sample");
    }
    if (bootstrap_rounds < 1) {
        throw std::invalid_argument("average_treatment_effect: bootstrap_rounds must be >= 1");
    }
    const auto mean = [](std::span<const double> v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    AteEstimate out;
    out.estimate = mean(treated) - mean(control);

    RandomStream rng = substream(seed, "ate-bootstrap");
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(bootstrap_rounds));
    const auto nt = static_cast<std::int64_t>(treated.size());
    const auto nc = static_cast<std::int64_t>(control.size());
    for (int b = 0; b < bootstrap_rounds; ++b) {
        double sum_t = 0.0;
        for (std::int64_t i = 0; i < nt; ++i) {
            sum_t += treated[static_cast<std::size_t>(rng.next_int(0, nt - 1))];
        }
        double sum_c = 0.0;
        for (std::int64_t i = 0; i < nc; ++i) {
            sum_c += control[static_cast<std::size_t>(rng.next_int(0, nc - 1))];
        }
        deltas.push_back(sum_t / static_cast<double>(nt) - sum_c / static_cast<double>(nc));
    }
    std::sort(deltas.begin(), deltas.end());
    // Linearly interpolated empirical quantiles at 2.5% and 97.5%.
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(deltas.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, deltas.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return deltas[lo] * (1.0 - frac) + deltas[hi] * frac;
    };
    out.ci_low = quantile(0.025);
    out.ci_high = quantile(0.975);
    return out;
}

namespace {

// Standardized features -> expanded polynomial row, leading 1 included.
// Shared by fit and predict so the term order cannot drift.
std::vector<double> expand_terms(std::span<const double> z, int degree) {
    std::vector<double> row;
    row.push_back(1.0);
    for (const double v : z) row.push_back(v);
    if (degree >= 2) {
        for (std::size_t i = 0; i < z.size(); ++i) {
            for (std::size_t j = i; j < z.size(); ++j) {
                row.push_back(z[i] * z[j]);
            }
        }
    }
    return row;
}

std::vector<std::string> term_names(std::span<const std::string> names, int degree) {
    std::vector<std::string> out;
    out.emplace_back("1");
    for (const std::string& n : names) out.push_back(n);
    if (degree >= 2) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            for (std::size_t j = i; j < names.size(); ++j) {
                out.push_back(i == j ? names[i] + "^2" : names[i] + "*" + names[j]);
            }
        }
    }
    return out;
}

}  // namespace

Metamodel fit_metamodel(const std::vector<std::vector<double>>& features,
                        std::span<const double> response,
                        std::span<const std::string> feature_names, int degree) {
    if (degree < 1 || degree > 2) {
        throw std::invalid_argument("fit_metamodel: degree must be 1 or 2");
    }
    const std::size_t rows = features.size();
    if (rows == 0 || rows != response.size()) {
        throw std::invalid_argument("fit_metamodel: feature/response size mismatch");
    }
    const std::size_t p = features.front().size();
    if (p != feature_names.size()) {
        throw std::invalid_argument("fit_metamodel: feature name count mismatch");
    }
    for (const auto& row : features) {
        if (row.size() != p) {
            throw std::invalid_argument("fit_metamodel: ragged feature rows");
        }
    }

    Metamodel m;
    m.degree = degree;
    m.terms = term_names(feature_names, degree);
    m.feature_mean.assign(p, 0.0);
    m.feature_scale.assign(p, 1.0);
    m.feature_min.assign(p, std::numeric_limits<double>::infinity());
    m.feature_max.assign(p, -std::numeric_limits<double>::infinity());

    for (std::size_t j = 0; j < p; ++j) {
        double sum = 0.0;
        for (const auto& row : features) {
            sum += row[j];
            m.feature_min[j] = std::min(m.feature_min[j], row[j]);
            m.feature_max[j] = std::max(m.feature_max[j], row[j]);
        }
        m.feature_mean[j] = sum / static_cast<double>(rows);
        double ss = 0.0;
        for (const auto& row : features) {
            const double d = row[j] - m.feature_mean[j];
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(rows));
        // A constant column keeps scale 1; it then duplicates the intercept
        // and is reported through the rank check below.
        m.feature_scale[j] = sd > 0.0 ? sd : 1.0;
    }

    const std::size_t terms = m.terms.size();
    if (rows < terms) {
        throw std::invalid_argument("fit_metamodel: fewer rows than model terms");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(terms));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    std::vector<double> z(p);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < p; ++j) {
            z[j] = (features[r][j] - m.feature_mean[j]) / m.feature_scale[j];
        }
        const std::vector<double> expanded = expand_terms(z, degree);
        for (std::size_t t = 0; t < terms; ++t) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = expanded[t];
        }
        y(static_cast<Eigen::Index>(r)) = response[r];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    if (rank < static_cast<Eigen::Index>(terms)) {
        const auto& perm = qr.colsPermutation().indices();
        std::string cols;
        for (Eigen::Index k = rank; k < static_cast<Eigen::Index>(terms); ++k) {
            if (!cols.empty()) cols += ", ";
            cols += m.terms[static_cast<std::size_t>(perm(k))];
        }
        throw std::invalid_argument("fit_metamodel: collinear terms: " + cols);
    }
    const Eigen::VectorXd beta = qr.solve(y);
    m.coefficients.assign(beta.data(), beta.data() + beta.size());

    const double y_mean = y.mean();
    const double sst = (y.array() - y_mean).square().sum();
    const double ssr = (y - X * beta).squaredNorm();
    // A constant response has no variance to explain; score it zero.
    m.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
    return m;
}

MetamodelPrediction predict(const Metamodel& model, std::span<const double> features) {
    const std::size_t p = model.feature_mean.size();
    if (features.size() != p) {
        throw std::invalid_argument("predict: feature count mismatch");
    }
    MetamodelPrediction out;
    std::vector<double> z(p);
    for (std::size_t j = 0; j < p; ++j) {
        if (features[j] < model.feature_min[j] || features[j] > model.feature_max[j]) {
            out.extrapolated = true;
        }
        z[j] = (features[j] - model.feature_mean[j]) / model.feature_scale[j];
    }
    const std::vector<double> expanded = expand_terms(z, model.degree);
    double value = 0.0;
    for (std::size_t t = 0; t < expanded.size(); ++t) {
        value += model.coefficients[t] * expanded[t];
    }
    out.value = value;
    return out;
}

EmergenceOutcome emergence_outcome(const EmergenceChain& chain) {
    const double ps[4] = {chain.p_stimulus, chain.p_decide, chain.p_act, chain.p_sustain};
    for (const double v : ps) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("emergence_outcome: probabilities must be in [0, 1]");
        }
    }
    EmergenceOutcome out;
    out.emerged = chain.p_stimulus * chain.p_decide * chain.p_act * chain.p_sustain;
    out.declined = chain.p_stimulus * (1.0 - chain.p_decide);
    out.unexecuted = chain.p_stimulus * chain.p_decide * (1.0 - chain.p_act);
    out.faded = chain.p_stimulus * chain.p_decide * chain.p_act * (1.0 - chain.p_sustain);
    return out;
}

}  // namespace ridersim
