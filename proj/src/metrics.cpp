#include "ridersim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ridersim {

double crra(double z, double eta, double epsilon) {
    if (eta <= 0.0) throw std::invalid_argument("crra: eta must be positive");
    if (eta >= 1.0 && z < epsilon) z = epsilon;
    if (eta == 1.0) return std::log(z);
    return (std::pow(z, 1.0 - eta) - 1.0) / (1.0 - eta);
}

double rider_utility(double reward_total, double cost_total, const UtilityParams& p) {
    return crra(reward_total, p.eta, p.epsilon) - cost_total;
}

double gini(std::span<const double> incomes) {
    if (incomes.empty()) throw std::invalid_argument("gini: empty income list");
    for (const double v : incomes) {
        if (v < 0.0) throw std::invalid_argument("gini: negative income");
    }
    const std::size_t n = incomes.size();
    const double total = std::accumulate(incomes.begin(), incomes.end(), 0.0);
    if (total == 0.0) return 0.0;

    // Sorted form: G = (2 * sum_i i*x_(i) / (n * sum x)) - (n + 1) / n,
    // with i counted from 1. O(n log n) against the O(n^2) pair definition.
    std::vector<double> sorted(incomes.begin(), incomes.end());
    std::sort(sorted.begin(), sorted.end());
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        weighted += static_cast<double>(i + 1) * sorted[i];
    }
    const double nd = static_cast<double>(n);
    return (2.0 * weighted) / (nd * total) - (nd + 1.0) / nd;
}

WelfareSnapshot welfare(std::span<const double> incomes) {
    if (incomes.size() < 2) {
        throw std::invalid_argument("welfare: equality undefined for fewer than two riders");
    }
    const double n = static_cast<double>(incomes.size());
    WelfareSnapshot snap;
    snap.prod = std::accumulate(incomes.begin(), incomes.end(), 0.0);
    snap.eq = 1.0 - gini(incomes) * n / (n - 1.0);
    snap.swf = snap.eq * snap.prod;
    return snap;
}

double involution_index(double swf_terminal, std::span<const double> utilities) {
    if (utilities.empty()) {
        throw std::invalid_argument("involution_index: no utilities");
    }
    const double mean =
        std::accumulate(utilities.begin(), utilities.end(), 0.0) /
        static_cast<double>(utilities.size());
    if (mean <= 0.0) {
        throw std::invalid_argument(
            "involution_index: average utility must be positive");
    }
    return swf_terminal / mean;
}

InvolutionLevel classify_involution(double index) {
    if (index <= 30.0) return InvolutionLevel::Low;
    if (index <= 60.0) return InvolutionLevel::Moderate;
    return InvolutionLevel::High;
}

const char* to_string(InvolutionLevel level) {
    switch (level) {
        case InvolutionLevel::Low: return "low";
        case InvolutionLevel::Moderate: return "moderate";
        case InvolutionLevel::High: return "high";
    }
    return "unknown";
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("pearson: need at least two points");
    const double n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

SeriesComparison benchmark_compare(std::span<const double> reference,
                                   std::span<const double> candidate) {
    if (reference.size() != candidate.size()) {
        throw std::invalid_argument("benchmark_compare: length mismatch");
    }
    if (reference.empty()) {
        throw std::invalid_argument("benchmark_compare: empty series");
    }
    SeriesComparison out;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = candidate[i] - reference[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double n = static_cast<double>(reference.size());
    out.mae = abs_sum / n;
    out.rmse = std::sqrt(sq_sum / n);
    out.pearson = reference.size() >= 2 ? pearson(reference, candidate) : std::nullopt;
    return out;
}

}  // namespace ridersim
