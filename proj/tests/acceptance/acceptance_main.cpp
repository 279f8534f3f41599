// End-to-end acceptance suite. Each numbered check prints one PASS/FAIL
// line with its key measurements and elapsed time; the process exits
// non-zero if any check fails. Invoked by ctest with the CLI binary path
// and a scratch working directory.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ridersim/analysis.hpp"
#include "ridersim/config.hpp"
#include "ridersim/experiment.hpp"
#include "ridersim/export.hpp"
#include "ridersim/metrics.hpp"
#include "ridersim/rng.hpp"
#include "ridersim/world.hpp"

using namespace ridersim;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_work;

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Collects failures; `note` keeps headline measurements even when passing.
struct Check {
    bool ok = true;
    std::string detail;
    std::string note;
    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

bool approx_rel(double a, double b, double tol = 1e-9) {
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const fs::path cap = g_work / "cli_capture.txt";
    const std::string cmd = g_cli + " " + args + " > " + cap.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    if (output != nullptr) *output = slurp(cap);
    if (raw == -1 || !WIFEXITED(raw)) return -1;
    return WEXITSTATUS(raw);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // tie-averaged
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const std::vector<double> rx = ranks_of(x);
    const std::vector<double> ry = ranks_of(y);
    return pearson(rx, ry).value_or(0.0);
}

RunConfig desk_config() {
    RunConfig cfg = default_config();
    cfg.world.n_riders = 50;
    cfg.world.horizon = 1200;
    return cfg;
}

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// ------------------------------------------------------------- criterion 1

Check metric_oracles() {
    Check c;
    for (const double eta : {0.5, 1.0, 2.0}) {
        c.require(approx_rel(crra(1.0, eta), 0.0), "crra(1) != 0");
    }
    c.require(approx_rel(crra(4.0, 0.5), 2.0), "crra(4, 0.5) != 2");
    c.require(approx_rel(crra(std::exp(1.0), 1.0), 1.0), "crra(e, 1) != 1");
    bool threw = false;
    try {
        crra(1.0, 0.0);
    } catch (const std::invalid_argument&) {
        threw = true;
    }
    c.require(threw, "crra accepted eta = 0");

    UtilityParams half{0.5, 1e-6};
    c.require(approx_rel(rider_utility(4.0, 1.0, half), 1.0), "utility(4,1)");
    c.require(approx_rel(rider_utility(1.0, 0.0, half), 0.0), "utility(1,0)");
    c.require(approx_rel(rider_utility(1.0, 0.0, UtilityParams{2.0, 1e-6}), 0.0),
              "utility(1,0) at eta 2");
    c.require(approx_rel(rider_utility(0.0, 0.0, half), -2.0), "utility(0,0)");

    const double even[] = {1.0, 1.0, 1.0, 1.0};
    const double skew[] = {0.0, 0.0, 0.0, 10.0};
    const double lone[] = {5.0};
    c.require(approx_rel(gini(even), 0.0), "gini equal != 0");
    c.require(approx_rel(gini(lone), 0.0), "gini singleton != 0");
    // Independent pairwise brute force of the skewed example.
    double sum_abs = 0.0, total = 0.0;
    for (const double a : skew) {
        total += a;
        for (const double b : skew) sum_abs += std::abs(a - b);
    }
    const double brute = sum_abs / (2.0 * 4.0 * 4.0 * (total / 4.0));
    c.require(approx_rel(brute, 0.75), "brute-force gini != 0.75");
    c.require(approx_rel(gini(skew), brute), "gini != brute force");

    const WelfareSnapshot w1 = welfare(std::array<double, 2>{2.0, 2.0});
    c.require(approx_rel(w1.eq, 1.0) && approx_rel(w1.prod, 4.0) &&
                  approx_rel(w1.swf, 4.0),
              "welfare [2,2]");
    const WelfareSnapshot w2 = welfare(skew);
    c.require(approx_rel(w2.eq, 0.0) && approx_rel(w2.prod, 10.0) &&
                  approx_rel(w2.swf, 0.0),
              "welfare [0,0,0,10]");
    const WelfareSnapshot w3 = welfare(std::array<double, 2>{3.0, 1.0});
    c.require(approx_rel(w3.eq, 0.5) && approx_rel(w3.prod, 4.0) &&
                  approx_rel(w3.swf, 2.0),
              "welfare [3,1]");

    c.require(approx_rel(involution_index(100.0, std::array<double, 2>{2.0, 2.0}),
                         50.0),
              "index(100, mean 2) != 50");
    c.require(approx_rel(involution_index(0.0, std::array<double, 2>{1.0, 3.0}),
                         0.0),
              "index(0) != 0");
    threw = false;
    try {
        involution_index(100.0, std::array<double, 2>{-1.0, -1.0});
    } catch (const std::invalid_argument&) {
        threw = true;
    }
    c.require(threw, "index accepted negative mean utility");

    c.require(classify_involution(25.0) == InvolutionLevel::Low, "25 not Low");
    c.require(classify_involution(30.0) == InvolutionLevel::Low, "30 not Low");
    c.require(classify_involution(45.0) == InvolutionLevel::Moderate,
              "45 not Moderate");
    c.require(classify_involution(60.0) == InvolutionLevel::Moderate,
              "60 not Moderate");
    c.require(classify_involution(60.0001) == InvolutionLevel::High,
              "60.0001 not High");
    c.require(classify_involution(72.0) == InvolutionLevel::High, "72 not High");
    c.note = "closed forms + pairwise brute force at 1e-9";
    return c;
}

// ------------------------------------------------------------- criterion 2

Check determinism() {
    Check c;
    const fs::path cfg_path = g_work / "default.json";
    save_config(default_config(), cfg_path.string());
    const std::string base = "simulate --config " + cfg_path.string() + " --seed 42";
    c.require(run_cli(base + " --out " + (g_work / "det_a").string()) == 0,
              "first simulate failed");
    c.require(run_cli(base + " --out " + (g_work / "det_b").string()) == 0,
              "second simulate failed");
    const std::string ta = slurp(g_work / "det_a" / "trace.jsonl");
    const std::string tb = slurp(g_work / "det_b" / "trace.jsonl");
    c.require(!ta.empty(), "trace.jsonl missing or empty");
    c.require(ta == tb, "trace.jsonl differs between identical runs");

    const std::string exp = "experiment --config " + cfg_path.string();
    c.require(run_cli(exp + " --out " + (g_work / "det_p1").string() +
                      " --parallel 1") == 0,
              "experiment --parallel 1 failed");
    c.require(run_cli(exp + " --out " + (g_work / "det_p8").string() +
                      " --parallel 8") == 0,
              "experiment --parallel 8 failed");
    const std::string r1 = slurp(g_work / "det_p1" / "results.csv");
    const std::string r8 = slurp(g_work / "det_p8" / "results.csv");
    c.require(!r1.empty(), "results.csv missing or empty");
    c.require(r1 == r8, "results.csv differs between --parallel 1 and 8");
    std::size_t lines = 0;
    for (const char ch : r1) lines += ch == '\n';
    c.require(lines == 11, "expected 10 seed rows, saw " + std::to_string(lines - 1));
    c.note = "trace and 10-seed results byte-identical";
    return c;
}

// ------------------------------------------------------------- criterion 3

Check conservation() {
    Check c;
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 20; ++trial) {
        RunConfig cfg = default_config();
        cfg.world.n_riders = 2 + static_cast<int>(g() % 11);
        cfg.world.horizon = 240;
        cfg.orders.volume_multiplier = 0.3 + 0.1 * static_cast<double>(g() % 13);
        cfg.agents.interaction_mode = static_cast<InteractionKind>(g() % 3);
        const std::uint64_t seed = g();
        const RunTrace trace = run(cfg, seed, true);
        const std::string tag = " (trial " + std::to_string(trial) + ")";

        double fees = 0.0;
        for (const StepRecord& rec : trace.records) {
            double step_fees = 0.0;
            for (const auto& d : rec.delivered) step_fees += std::get<2>(d);
            double step_income = 0.0;
            for (const StepRiderRecord& r : rec.riders) step_income += r.income_delta;
            c.require(std::abs(step_income - step_fees) <= 1e-9,
                      "per-step income != fees" + tag);
            fees += step_fees;
        }
        const double incomes = std::accumulate(trace.terminal.incomes.begin(),
                                               trace.terminal.incomes.end(), 0.0);
        c.require(approx_rel(incomes, fees), "terminal income != paid fees" + tag);

        const Heatmap hm = density_heatmap(trace, 120);
        for (const std::vector<std::int64_t>& window : hm.counts) {
            const std::int64_t total =
                std::accumulate(window.begin(), window.end(), std::int64_t{0});
            c.require(total == 120LL * cfg.world.n_riders,
                      "heatmap window lost rider-steps" + tag);
        }
    }
    c.note = "money and rider-steps conserved on 20 random configs";
    return c;
}

// ------------------------------------------------------------- criterion 4

Check volume_sweep() {
    Check c;
    const FactorSpec factor{"orders.volume_multiplier",
                            {"0.3", "0.5", "0.7", "1.0"},
                            true};
    const DesignMatrix design = build_design({&factor, 1}, 10, 500);
    for (int point = 0; point < 4; ++point) {
        std::vector<std::uint64_t> seeds;
        for (const DesignRow& row : design.rows) {
            if (row.design_point == point) seeds.push_back(row.seed);
        }
        std::sort(seeds.begin(), seeds.end());
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            c.require(seeds[k] == 500 + k, "common random numbers broken");
        }
    }
    const ResultTable table = execute_design(design, desk_config(), 1);
    std::array<std::vector<double>, 4> by_level;
    for (const ResultRow& row : table.rows) {
        c.require(!row.failed, "run failed at level " + row.levels[0]);
        if (!row.failed) {
            by_level[static_cast<std::size_t>(row.design_point)].push_back(
                row.involution);
        }
    }
    std::vector<double> medians, levels{0.3, 0.5, 0.7, 1.0};
    for (const std::vector<double>& v : by_level) medians.push_back(median_of(v));
    for (std::size_t k = 0; k + 1 < medians.size(); ++k) {
        c.require(medians[k] > medians[k + 1], "medians not strictly decreasing");
    }
    const double rho = spearman(levels, medians);
    c.require(rho <= -0.9, "Spearman rho " + fmt(rho) + " > -0.9");
    c.note = "medians " + fmt(medians[0]) + "/" + fmt(medians[1]) + "/" +
             fmt(medians[2]) + "/" + fmt(medians[3]) + ", rho " + fmt(rho);
    return c;
}

// ------------------------------------------------------------- criterion 5

Check interaction_sweep() {
    Check c;
    RunConfig cfg = desk_config();
    cfg.orders.volume_multiplier = 0.55;
    const FactorSpec factor{"agents.interaction_mode",
                            {"none", "local", "global"},
                            true};
    const DesignMatrix design = build_design({&factor, 1}, 10, 2000);
    const ResultTable table = execute_design(design, cfg, 1);
    std::array<std::vector<double>, 3> by_mode;
    for (const ResultRow& row : table.rows) {
        c.require(!row.failed, "run failed in mode " + row.levels[0]);
        if (!row.failed) {
            by_mode[static_cast<std::size_t>(row.design_point)].push_back(
                row.involution);
        }
    }
    const double none = median_of(by_mode[0]);
    const double local = median_of(by_mode[1]);
    const double global = median_of(by_mode[2]);
    c.require(none <= local, "median fell from none to local");
    c.require(local <= global, "median fell from local to global");
    c.note = "medians " + fmt(none) + " <= " + fmt(local) + " <= " + fmt(global);
    return c;
}

// ------------------------------------------------------------- criterion 6

Check ate_recovery() {
    Check c;
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        RandomStream gen(9000 + static_cast<std::uint64_t>(trial));
        std::vector<double> control(100), treated(100);
        for (double& x : control) x = gen.normal(0.0, 1.0);
        for (double& x : treated) x = 2.0 + gen.normal(0.0, 1.0);
        const AteEstimate est = average_treatment_effect(
            treated, control, 10000, 777 + static_cast<std::uint64_t>(trial));
        if (est.ci_low <= 2.0 && 2.0 <= est.ci_high) hits += 1;

        if (trial == 0) {
            // Independent brute-force bootstrap at B=10000: same resampling
            // recipe re-coded here must land on the identical interval.
            RandomStream rng = substream(777, "ate-bootstrap");
            std::vector<double> deltas;
            for (int b = 0; b < 10000; ++b) {
                double st = 0.0, sc = 0.0;
                for (int i = 0; i < 100; ++i) {
                    st += treated[static_cast<std::size_t>(rng.next_int(0, 99))];
                }
                for (int i = 0; i < 100; ++i) {
                    sc += control[static_cast<std::size_t>(rng.next_int(0, 99))];
                }
                deltas.push_back(st / 100.0 - sc / 100.0);
            }
            std::sort(deltas.begin(), deltas.end());
            const auto quantile = [&](double q) {
                const double pos = q * static_cast<double>(deltas.size() - 1);
                const auto lo = static_cast<std::size_t>(pos);
                const std::size_t hi = std::min(lo + 1, deltas.size() - 1);
                const double frac = pos - static_cast<double>(lo);
                return deltas[lo] * (1.0 - frac) + deltas[hi] * frac;
            };
            c.require(quantile(0.025) == est.ci_low &&
                          quantile(0.975) == est.ci_high,
                      "brute-force bootstrap disagrees with the library CI");
        }
    }
    c.require(hits >= 93, "CI covered 2.0 in only " + std::to_string(hits) +
                              "/100 trials");
    c.note = "CI covered 2.0 in " + std::to_string(hits) +
             "/100 trials; B=10000 oracle exact";
    return c;
}

// ------------------------------------------------------------- criterion 7

Check path_weights() {
    Check c;
    RandomStream rng(2718);
    std::vector<std::vector<double>> X, X2;
    std::vector<double> y, y2;
    for (int i = 0; i < 10000; ++i) {
        const double x1 = rng.normal(0.0, 1.0);
        const double x2 = rng.normal(0.0, 1.0);
        X.push_back({x1, x2});
        X2.push_back({3.0 * x1 - 7.0, 0.5 * x2 + 2.0});
        y.push_back(2.0 * x1 + x2);
        y2.push_back(10.0 * y.back() + 3.0);
    }
    const std::string names[] = {"strong_path", "weak_path"};
    const PathCoefficients pc = path_coefficients(X, y, names);
    const double b0 = 2.0 / std::sqrt(5.0);  // 0.894
    const double b1 = 1.0 / std::sqrt(5.0);  // 0.447
    c.require(std::abs(pc.beta[0] - b0) <= 0.02,
              "beta0 " + fmt(pc.beta[0], 3) + " off 0.894");
    c.require(std::abs(pc.beta[1] - b1) <= 0.02,
              "beta1 " + fmt(pc.beta[1], 3) + " off 0.447");
    const PathCoefficients pc2 = path_coefficients(X2, y2, names);
    c.require(std::abs(pc2.beta[0] - pc.beta[0]) <= 1e-9 &&
                  std::abs(pc2.beta[1] - pc.beta[1]) <= 1e-9,
              "affine rescaling moved the weights");
    c.note = "betas " + fmt(pc.beta[0], 3) + "/" + fmt(pc.beta[1], 3) +
             ", affine-invariant to 1e-9";
    return c;
}

// ------------------------------------------------------------- criterion 8

Check emergence_tree() {
    Check c;
    RandomStream rng(31);
    for (int i = 0; i < 1000; ++i) {
        const EmergenceChain ch{rng.next_double(), rng.next_double(),
                                rng.next_double(), rng.next_double()};
        const EmergenceOutcome o = emergence_outcome(ch);
        const bool leaves =
            o.declined == ch.p_stimulus * (1.0 - ch.p_decide) &&
            o.unexecuted == ch.p_stimulus * ch.p_decide * (1.0 - ch.p_act) &&
            o.faded ==
                ch.p_stimulus * ch.p_decide * ch.p_act * (1.0 - ch.p_sustain) &&
            o.emerged == ch.p_stimulus * ch.p_decide * ch.p_act * ch.p_sustain;
        c.require(leaves, "leaf mismatch at triple " + std::to_string(i));
        const double total = o.emerged + o.declined + o.unexecuted + o.faded;
        c.require(std::abs(total - ch.p_stimulus) <= 1e-12,
                  "leaves do not sum to the stimulus mass");
        if (!c.ok) break;
    }
    c.note = "1000 random triples exact; partition to 1e-12";
    return c;
}

// ------------------------------------------------------------- criterion 9

Check mechanism_pipeline() {
    Check c;
    RunConfig cfg = default_config();
    cfg.orders.volume_multiplier = 0.7;
    cfg.agents.interaction_mode = InteractionKind::Global;
    const int n = cfg.world.n_riders;
    int rising = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const RunTrace trace = run(cfg, seed, true);
        const IntentionLog log = intention_log(trace);
        const FlowMatrix fm = stage_flow_matrix(log, 600);
        c.require(fm.windows == 6, "expected 6 windows");
        for (int w = 0; w < fm.windows; ++w) {
            const auto& s = fm.shares[static_cast<std::size_t>(w)];
            c.require(std::abs(s[0] + s[1] + s[2] - 1.0) <= 1e-12,
                      "shares do not partition");
            for (const double v : s) {
                const double scaled = v * n;
                c.require(std::abs(scaled - std::round(scaled)) <= 1e-9,
                          "share not a rider count multiple");
            }
        }
        for (std::size_t w = 0; w + 1 < static_cast<std::size_t>(fm.windows); ++w) {
            int total = 0;
            for (int from = 0; from < 3; ++from) {
                int row = 0;
                for (int to = 0; to < 3; ++to) {
                    row += fm.transitions[w][static_cast<std::size_t>(from)]
                                          [static_cast<std::size_t>(to)];
                }
                const double expect =
                    fm.shares[w][static_cast<std::size_t>(from)] * n;
                c.require(row == std::lround(expect), "row sum != window count");
                total += row;
            }
            c.require(total == n, "transitions lost riders");
        }
        // Final third of the horizon: the risk-avoidant share holds or grows.
        const std::size_t last = static_cast<std::size_t>(fm.windows) - 1;
        if (fm.shares[last - 1][2] <= fm.shares[last][2]) rising += 1;
    }
    c.require(rising >= 7, "risk-avoidant share rose in only " +
                               std::to_string(rising) + "/10 seeds");
    c.note = "risk-avoidant share non-decreasing in " + std::to_string(rising) +
             "/10 seeds; flows exact";
    return c;
}

// ------------------------------------------------------------ criterion 10

Check benchmark_triple() {
    Check c;
    const double real[] = {1.0, 2.0, 3.0};
    const double sim[] = {1.0, 2.0, 4.0};
    const SeriesComparison cmp = benchmark_compare(real, sim);
    c.require(std::abs(cmp.mae - 1.0 / 3.0) <= 1e-4, "mae off 1/3");
    c.require(std::abs(cmp.rmse - std::sqrt(1.0 / 3.0)) <= 1e-4, "rmse off 0.5774");
    c.require(cmp.pearson.has_value() &&
                  std::abs(*cmp.pearson - 9.0 / std::sqrt(84.0)) <= 1e-4,
              "pearson off 0.9820");
    const SeriesComparison self = benchmark_compare(real, real);
    c.require(approx_rel(self.mae, 0.0) && approx_rel(self.rmse, 0.0) &&
                  self.pearson.has_value() && approx_rel(*self.pearson, 1.0),
              "self-comparison not (0, 0, 1)");

    // The CLI emits the same metric set for externally supplied series.
    const fs::path in_dir = g_work / "rep_in";
    fs::create_directories(in_dir);
    std::ofstream(g_work / "real.csv") << "1\n2\n3\n";
    std::ofstream(g_work / "sim.csv") << "1\n2\n4\n";
    std::string out;
    const int code =
        run_cli("report --in " + in_dir.string() + " --real " +
                    (g_work / "real.csv").string() + " --sim " +
                    (g_work / "sim.csv").string(),
                &out);
    c.require(code == 0, "report exited " + std::to_string(code));
    c.require(out.find("mae=0.333333333") != std::string::npos &&
                  out.find("rmse=0.577350269") != std::string::npos &&
                  out.find("r=0.981980506") != std::string::npos,
              "report output missing the metric triple");
    c.note = "(0.3333, 0.5774, 0.9820) to 1e-4, echoed by the CLI";
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <cli-binary> <work-dir>\n", argv[0]);
        return 2;
    }
    g_cli = argv[1];
    g_work = argv[2];
    fs::create_directories(g_work);

    struct Criterion {
        const char* label;
        Check (*fn)();
        double budget_s;  // hard runtime bound from the contract
    };
    const Criterion criteria[] = {
        {"metric oracles", metric_oracles, 1.0},
        {"determinism", determinism, 120.0},
        {"conservation", conservation, 60.0},
        {"volume sweep decreases involution", volume_sweep, 600.0},
        {"interaction sweep raises involution", interaction_sweep, 600.0},
        {"treatment-effect recovery", ate_recovery, 60.0},
        {"path coefficients", path_weights, 600.0},
        {"emergence tree", emergence_tree, 600.0},
        {"mechanism pipeline", mechanism_pipeline, 600.0},
        {"benchmark comparator", benchmark_triple, 600.0},
    };

    int failed = 0;
    int number = 0;
    for (const Criterion& cr : criteria) {
        number += 1;
        const double t0 = now_s();
        Check c;
        try {
            c = cr.fn();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        const double dt = now_s() - t0;
        if (dt >= cr.budget_s) {
            c.ok = false;
            if (!c.detail.empty()) c.detail += "; ";
            c.detail += "over budget " + fmt(cr.budget_s, 0) + " s";
        }
        failed += c.ok ? 0 : 1;
        std::printf("[%2d] %s  %s — %s  [%.2f s]\n", number,
                    c.ok ? "PASS" : "FAIL", cr.label,
                    c.ok ? c.note.c_str() : c.detail.c_str(), dt);
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/10 criteria passed\n", 10 - failed);
    return failed == 0 ? 0 : 1;
}
