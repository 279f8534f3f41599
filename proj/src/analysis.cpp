#include "ridersim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "ridersim/rng.hpp"

namespace ridersim {

InvolutionDistribution involution_distribution(const ResultTable& results) {
    if (results.rows.empty()) {
        throw std::invalid_argument("involution_distribution: empty result table");
    }
    InvolutionDistribution dist;
    for (const ResultRow& row : results.rows) {
        if (row.failed || std::isnan(row.involution)) {
            dist.failed += 1;
            continue;
        }
        switch (classify_involution(row.involution)) {
            case InvolutionLevel::Low: dist.low += 1; break;
            case InvolutionLevel::Moderate: dist.moderate += 1; break;
            case InvolutionLevel::High: dist.high += 1; break;
        }
    }
    const int classified = dist.low + dist.moderate + dist.high;
    dist.fraction_high =
        classified > 0 ? static_cast<double>(dist.high) / classified : 0.0;
    return dist;
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower =
            *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (lower + m);
    }
    return m;
}

}  // namespace

std::vector<Anomaly> detect_anomalies(const ResultTable& results, double threshold) {
    std::vector<std::size_t> rows;
    std::vector<double> values;
    for (std::size_t i = 0; i < results.rows.size(); ++i) {
        const ResultRow& r = results.rows[i];
        if (r.failed || std::isnan(r.involution)) continue;
        rows.push_back(i);
        values.push_back(r.involution);
    }
    std::vector<Anomaly> out;
    // Below four usable runs the median/MAD spread is not meaningful; flag
    // nothing rather than guessing.
    if (values.size() < 4) return out;

    const double med = median_of(values);
    std::vector<double> deviations;
    deviations.reserve(values.size());
    for (const double v : values) deviations.push_back(std::abs(v - med));
    const double mad = median_of(deviations);
    const double scale = 1.4826 * mad;

    for (std::size_t i = 0; i < values.size(); ++i) {
        const double dev = std::abs(values[i] - med);
        if (scale > 0.0) {
            const double z = dev / scale;
            if (z > threshold) out.push_back(Anomaly{rows[i], values[i], z});
        } else if (dev > 0.0) {
            // Degenerate spread: everything off the median is anomalous.
            out.push_back(Anomaly{rows[i], values[i],
                                  std::numeric_limits<double>::infinity()});
        }
    }
    return out;
}

Heatmap density_heatmap(const RunTrace& trace, int window_steps) {
    if (trace.records.empty()) {
        throw std::invalid_argument("density_heatmap: trace kept no records");
    }
    if (window_steps < 1) {
        throw std::invalid_argument("density_heatmap: window must be >= 1");
    }
    const int horizon = static_cast<int>(trace.records.size());
    if (horizon % window_steps != 0) {
        throw std::invalid_argument(
            "density_heatmap: window must divide the recorded horizon");
    }
    Heatmap hm;
    hm.window_steps = window_steps;
    hm.width = trace.config.world.width;
    hm.height = trace.config.world.height;
    hm.counts.assign(static_cast<std::size_t>(horizon / window_steps),
                     std::vector<std::int64_t>(
                         static_cast<std::size_t>(hm.width) * hm.height, 0));
    for (int t = 0; t < horizon; ++t) {
        auto& grid = hm.counts[static_cast<std::size_t>(t / window_steps)];
        for (const StepRiderRecord& r : trace.records[static_cast<std::size_t>(t)].riders) {
            grid[static_cast<std::size_t>(r.y) * hm.width + r.x] += 1;
        }
    }
    return hm;
}

namespace {

// Continued fraction for the regularized incomplete beta, modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_sf(double t, double nu) {
    if (nu <= 0.0) throw std::invalid_argument("student_t_sf: nu must be positive");
    if (t < 0.0) return 1.0 - student_t_sf(-t, nu);
    const double x = nu / (nu + t * t);
    return 0.5 * regularized_incomplete_beta(0.5 * nu, 0.5, x);
}

PathCoefficients path_coefficients(const std::vector<std::vector<double>>& factors,
                                   std::span<const double> response,
                                   std::span<const std::string> names) {
    const std::size_t n = factors.size();
    if (n == 0 || n != response.size()) {
        throw std::invalid_argument("path_coefficients: factor/response size mismatch");
    }
    const std::size_t p = factors.front().size();
    if (p == 0 || p != names.size()) {
        throw std::invalid_argument("path_coefficients: name count mismatch");
    }
    for (const auto& row : factors) {
        if (row.size() != p) {
            throw std::invalid_argument("path_coefficients: ragged factor rows");
        }
    }
    if (n < p + 2) {
        throw std::invalid_argument("path_coefficients: not enough rows");
    }

    // z-score columns and response; standardized slopes are then direct path
    // weights.
    const auto zscore = [](std::vector<double>& col, const std::string& what) {
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) /
                            static_cast<double>(col.size());
        double ss = 0.0;
        for (const double v : col) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(col.size()));
        if (sd == 0.0) {
            throw std::invalid_argument("path_coefficients: constant column " + what);
        }
        for (double& v : col) v = (v - mean) / sd;
    };

    std::vector<std::vector<double>> cols(p, std::vector<double>(n));
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) cols[j][i] = factors[i][j];
        zscore(cols[j], names[j]);
    }
    std::vector<double> y(response.begin(), response.end());
    zscore(y, "response");

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
        }
        Y(static_cast<Eigen::Index>(i)) = y[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(p)) {
        const auto& perm = qr.colsPermutation().indices();
        std::string which;
        for (Eigen::Index k = qr.rank(); k < static_cast<Eigen::Index>(p); ++k) {
            if (!which.empty()) which += ", ";
            which += names[static_cast<std::size_t>(perm(k))];
        }
        throw std::invalid_argument("path_coefficients: collinear factors: " + which);
    }
    const Eigen::VectorXd beta = qr.solve(Y);

    PathCoefficients out;
    out.names.assign(names.begin(), names.end());
    out.beta.assign(beta.data(), beta.data() + beta.size());

    const Eigen::VectorXd resid = Y - X * beta;
    const double ssr = resid.squaredNorm();
    const double sst = (Y.array() - Y.mean()).square().sum();
    out.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;

    // Two-sided t-test per coefficient; one slot of freedom goes to the
    // implicit intercept removed by centering.
    const double dof = static_cast<double>(n) - static_cast<double>(p) - 1.0;
    const double sigma2 = ssr / dof;
    const Eigen::MatrixXd xtx_inv =
        (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(
            static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    out.p_value.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        const double se = std::sqrt(sigma2 * xtx_inv(static_cast<Eigen::Index>(j),
                                                     static_cast<Eigen::Index>(j)));
        if (se == 0.0) {
            out.p_value[j] = 0.0;
            continue;
        }
        const double t = out.beta[j] / se;
        out.p_value[j] = 2.0 * student_t_sf(std::abs(t), dof);
    }
    return out;
}

IntentionLog intention_log(const RunTrace& trace) {
    if (trace.records.empty()) {
        throw std::invalid_argument("intention_log: trace kept no records");
    }
    IntentionLog log;
    log.horizon = static_cast<int>(trace.records.size());
    log.n_riders = static_cast<int>(trace.records.front().riders.size());
    log.intentions.assign(static_cast<std::size_t>(log.n_riders), {});
    log.behaviors.assign(static_cast<std::size_t>(log.n_riders), {});
    for (auto& v : log.intentions) v.reserve(static_cast<std::size_t>(log.horizon));
    for (auto& v : log.behaviors) v.reserve(static_cast<std::size_t>(log.horizon));
    for (const StepRecord& rec : trace.records) {
        for (int i = 0; i < log.n_riders; ++i) {
            const StepRiderRecord& r = rec.riders[static_cast<std::size_t>(i)];
            log.intentions[static_cast<std::size_t>(i)].push_back(r.intention);
            log.behaviors[static_cast<std::size_t>(i)].push_back(r.action);
        }
    }
    return log;
}

namespace {

// Windowed intention-share profile of one rider: 3 values per window.
std::vector<double> intention_profile(const IntentionLog& log, int rider,
                                      int window_steps, int windows) {
    std::vector<double> profile;
    profile.reserve(static_cast<std::size_t>(windows) * 3);
    const auto& seq = log.intentions[static_cast<std::size_t>(rider)];
    for (int w = 0; w < windows; ++w) {
        double counts[3] = {0.0, 0.0, 0.0};
        for (int t = w * window_steps; t < (w + 1) * window_steps; ++t) {
            counts[static_cast<std::size_t>(seq[static_cast<std::size_t>(t)])] += 1.0;
        }
        for (const double c : counts) profile.push_back(c / window_steps);
    }
    return profile;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct KMeansRun {
    std::vector<int> assignment;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
};

KMeansRun lloyd(const std::vector<std::vector<double>>& points, int k,
                RandomStream& rng) {
    const std::size_t n = points.size();
    KMeansRun result;
    // k-means++ seeding.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    centroids.push_back(points[static_cast<std::size_t>(
        rng.next_int(0, static_cast<std::int64_t>(n) - 1))]);
    std::vector<double> d2(n);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // Fewer distinct points than requested centers; reuse any point,
            // the empty-cluster rule below keeps the run consistent.
            centroids.push_back(points[0]);
            continue;
        }
        double target = rng.next_double() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= d2[i];
            if (target <= 0.0) {
                pick = i;
                break;
            }
        }
        centroids.push_back(points[pick]);
    }

    std::vector<int> assignment(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = sq_dist(points[i], centroids[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
        }
        // Recompute centroids; an empty cluster restarts at the point
        // farthest from its centroid (lowest index on ties).
        const std::size_t dim = points.front().size();
        std::vector<std::vector<double>> sums(
            static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sizes[static_cast<std::size_t>(assignment[i])] += 1;
            auto& s = sums[static_cast<std::size_t>(assignment[i])];
            for (std::size_t j = 0; j < dim; ++j) s[j] += points[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] == 0) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(
                        points[i],
                        centroids[static_cast<std::size_t>(assignment[i])]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[static_cast<std::size_t>(c)] = points[far];
                changed = true;
            } else {
                for (std::size_t j = 0; j < dim; ++j) {
                    centroids[static_cast<std::size_t>(c)][j] =
                        sums[static_cast<std::size_t>(c)][j] /
                        sizes[static_cast<std::size_t>(c)];
                }
            }
        }
        if (!changed) break;
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        inertia += sq_dist(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
    }
    result.assignment = std::move(assignment);
    result.centroids = std::move(centroids);
    result.inertia = inertia;
    return result;
}

double silhouette_score(const std::vector<std::vector<double>>& points,
                        const std::vector<int>& assignment, int k) {
    const std::size_t n = points.size();
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (const int a : assignment) sizes[static_cast<std::size_t>(a)] += 1;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> mean_d(static_cast<std::size_t>(k), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            mean_d[static_cast<std::size_t>(assignment[j])] +=
                std::sqrt(sq_dist(points[i], points[j]));
        }
        const int own = assignment[i];
        const int own_size = sizes[static_cast<std::size_t>(own)];
        if (own_size <= 1) continue;  // singleton contributes 0
        const double a = mean_d[static_cast<std::size_t>(own)] / (own_size - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own || sizes[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, mean_d[static_cast<std::size_t>(c)] /
                                sizes[static_cast<std::size_t>(c)]);
        }
        if (!std::isfinite(b)) continue;
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

}  // namespace

ClusterResult cluster_intentions(const IntentionLog& log, int window_steps,
                                 std::pair<int, int> k_range, std::uint64_t seed) {
    if (window_steps < 1 || log.horizon < window_steps) {
        throw std::invalid_argument("cluster_intentions: bad window");
    }
    const int windows = log.horizon / window_steps;
    std::vector<std::vector<double>> points;
    points.reserve(static_cast<std::size_t>(log.n_riders));
    for (int i = 0; i < log.n_riders; ++i) {
        points.push_back(intention_profile(log, i, window_steps, windows));
    }

    // Count distinct profiles; clustering cannot use more centers.
    std::vector<std::vector<double>> distinct;
    for (const auto& p : points) {
        if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) {
            distinct.push_back(p);
        }
    }
    ClusterResult out;
    if (distinct.size() == 1) {
        out.k = 1;
        out.assignment.assign(static_cast<std::size_t>(log.n_riders), 0);
        out.note = "all rider profiles identical";
        return out;
    }

    int k_lo = std::max(1, k_range.first);
    int k_hi = std::min({k_range.second, log.n_riders,
                         static_cast<int>(distinct.size())});
    if (k_hi < k_lo) k_hi = k_lo;

    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = k_lo; k <= k_hi; ++k) {
        if (k < 2) continue;
        KMeansRun best_run;
        double best_inertia = std::numeric_limits<double>::infinity();
        for (int restart = 0; restart < 10; ++restart) {
            RandomStream rng = substream(seed, "kmeans",
                                         static_cast<std::uint64_t>(k) * 100 +
                                             static_cast<std::uint64_t>(restart));
            KMeansRun r = lloyd(points, k, rng);
            if (r.inertia < best_inertia) {
                best_inertia = r.inertia;
                best_run = std::move(r);
            }
        }
        const double score = silhouette_score(points, best_run.assignment, k);
        if (score > best_score) {
            best_score = score;
            out.k = k;
            out.assignment = best_run.assignment;
            out.silhouette = score;
        }
    }
    if (out.assignment.empty()) {
        // k_range allowed only k = 1.
        out.k = 1;
        out.assignment.assign(static_cast<std::size_t>(log.n_riders), 0);
        out.note = "single cluster requested";
    }
    return out;
}

CorrelationMatrix intention_behavior_correlation(const IntentionLog& log,
                                                 int window_steps) {
    if (window_steps < 1 || log.horizon < window_steps) {
        throw std::invalid_argument("intention_behavior_correlation: bad window");
    }
    CorrelationMatrix out;
    out.windows = log.horizon / window_steps;

    // Pool (rider, window) observations.
    std::vector<std::array<double, 3>> intent_obs;
    std::vector<std::array<double, 5>> behav_obs;
    for (int i = 0; i < log.n_riders; ++i) {
        const auto& intents = log.intentions[static_cast<std::size_t>(i)];
        const auto& actions = log.behaviors[static_cast<std::size_t>(i)];
        for (int w = 0; w < out.windows; ++w) {
            std::array<double, 3> ic{0.0, 0.0, 0.0};
            std::array<double, 5> bc{0.0, 0.0, 0.0, 0.0, 0.0};
            for (int t = w * window_steps; t < (w + 1) * window_steps; ++t) {
                ic[static_cast<std::size_t>(intents[static_cast<std::size_t>(t)])] += 1.0;
                bc[static_cast<std::size_t>(actions[static_cast<std::size_t>(t)])] += 1.0;
            }
            for (double& v : ic) v /= window_steps;
            for (double& v : bc) v /= window_steps;
            intent_obs.push_back(ic);
            behav_obs.push_back(bc);
        }
    }

    const std::size_t n = intent_obs.size();
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            for (std::size_t r = 0; r < n; ++r) {
                a[r] = intent_obs[r][i];
                b[r] = behav_obs[r][j];
            }
            out.r[i][j] = n >= 2 ? pearson(a, b) : std::nullopt;
        }
    }
    return out;
}

FlowMatrix stage_flow_matrix(const IntentionLog& log, int window_steps) {
    if (window_steps < 1 || log.horizon < 2 * window_steps) {
        throw std::invalid_argument(
            "stage_flow_matrix: need at least two whole windows");
    }
    FlowMatrix out;
    out.window_steps = window_steps;
    out.windows = log.horizon / window_steps;

    // Dominant label per rider per window; plurality with ties resolved
    // toward the earlier stage.
    std::vector<std::vector<int>> dominant(
        static_cast<std::size_t>(log.n_riders),
        std::vector<int>(static_cast<std::size_t>(out.windows), 0));
    for (int i = 0; i < log.n_riders; ++i) {
        const auto& seq = log.intentions[static_cast<std::size_t>(i)];
        for (int w = 0; w < out.windows; ++w) {
            int counts[3] = {0, 0, 0};
            for (int t = w * window_steps; t < (w + 1) * window_steps; ++t) {
                counts[static_cast<std::size_t>(seq[static_cast<std::size_t>(t)])] += 1;
            }
            int best = 0;
            for (int s = 1; s < 3; ++s) {
                if (counts[s] > counts[best]) best = s;
            }
            dominant[static_cast<std::size_t>(i)][static_cast<std::size_t>(w)] = best;
        }
    }

    out.shares.assign(static_cast<std::size_t>(out.windows), {0.0, 0.0, 0.0});
    for (int w = 0; w < out.windows; ++w) {
        for (int i = 0; i < log.n_riders; ++i) {
            out.shares[static_cast<std::size_t>(w)][static_cast<std::size_t>(
                dominant[static_cast<std::size_t>(i)][static_cast<std::size_t>(w)])] +=
                1.0;
        }
        for (double& v : out.shares[static_cast<std::size_t>(w)]) v /= log.n_riders;
    }

    if (out.windows > 1) {
        out.transitions.assign(static_cast<std::size_t>(out.windows - 1),
                               {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}});
        for (int w = 0; w + 1 < out.windows; ++w) {
            for (int i = 0; i < log.n_riders; ++i) {
                const int from =
                    dominant[static_cast<std::size_t>(i)][static_cast<std::size_t>(w)];
                const int to = dominant[static_cast<std::size_t>(i)]
                                       [static_cast<std::size_t>(w + 1)];
                out.transitions[static_cast<std::size_t>(w)][static_cast<std::size_t>(
                    from)][static_cast<std::size_t>(to)] += 1;
            }
        }
    }
    return out;
}

}  // namespace ridersim
