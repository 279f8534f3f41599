// Command-line front end: simulate | experiment | analyze | report.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ridersim/analysis.hpp"
#include "ridersim/config.hpp"
#include "ridersim/experiment.hpp"
#include "ridersim/export.hpp"
#include "ridersim/log.hpp"
#include "ridersim/metrics.hpp"
#include "ridersim/version.hpp"
#include "ridersim/world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ridersim;

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     start)
        .count();
}

RunConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) {
        log_info("no --config given, using built-in defaults");
        return default_config();
    }
    return load_config(config_path);
}

void run_simulate(const std::string& config_path, std::uint64_t seed,
                  const std::string& out_dir, bool no_trace) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = load_or_default(config_path);
    fs::create_directories(out_dir);

    const RunTrace trace = run(cfg, seed, !no_trace);

    ManifestInfo mf;
    mf.command = "simulate";
    mf.config_hash = config_hash(cfg);
    mf.seeds = {seed};
    if (!no_trace) {
        export_trace(trace, (fs::path(out_dir) / "trace.jsonl").string());
        mf.outputs.push_back("trace.jsonl");
    }
    export_summary(trace, (fs::path(out_dir) / "summary.json").string());
    mf.outputs.push_back("summary.json");
    mf.wall_time_ms = elapsed_ms(start);
    write_manifest(mf, (fs::path(out_dir) / "manifest.json").string());

    const TerminalSummary& t = trace.terminal;
    if (t.involution.has_value()) {
        log_info("run done: involution %.4g (%s), swf %.4g", *t.involution,
                 to_string(classify_involution(*t.involution)),
                 t.welfare ? t.welfare->swf : 0.0);
    } else {
        log_info("run done: involution undefined (%s)", t.involution_note.c_str());
    }
}

void run_experiment(const std::string& config_path, const std::string& out_dir,
                    int parallel) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = load_or_default(config_path);
    fs::create_directories(out_dir);

    const DesignMatrix design = build_design(
        cfg.experiment.factors, cfg.experiment.replicates, cfg.experiment.base_seed);
    log_info("experiment: %zu runs (%zu points x %d replicates), parallel=%d",
             design.rows.size(), design.rows.size() / design.replicates,
             design.replicates, parallel);
    const ResultTable results = execute_design(design, cfg, parallel);

    export_design(design, (fs::path(out_dir) / "design.json").string());
    export_results_csv(results, (fs::path(out_dir) / "results.csv").string());
    export_index_timeseries(results,
                            (fs::path(out_dir) / "index_timeseries.csv").string());

    ManifestInfo mf;
    mf.command = "experiment";
    mf.config_hash = config_hash(cfg);
    for (int k = 0; k < design.replicates; ++k) {
        mf.seeds.push_back(design.base_seed + static_cast<std::uint64_t>(k));
    }
    mf.outputs = {"design.json", "results.csv", "index_timeseries.csv"};
    mf.wall_time_ms = elapsed_ms(start);
    write_manifest(mf, (fs::path(out_dir) / "manifest.json").string());
}

double response_of(const ResultRow& row, const std::string& response) {
    if (response == "involution_index") return row.involution;
    if (response == "swf") return row.swf;
    if (response == "mean_utility") return row.mean_utility;
    if (response == "frac_risk_avoidant") return row.frac_risk_avoidant;
    throw std::invalid_argument("unknown response '" + response + "'");
}

// Numeric factor coding: a factor whose levels all parse as numbers uses the
// numeric values; otherwise levels code as their design-order index.
std::vector<double> factor_codes(const std::vector<std::string>& levels) {
    std::vector<double> codes;
    codes.reserve(levels.size());
    bool numeric = true;
    for (const std::string& s : levels) {
        try {
            std::size_t used = 0;
            codes.push_back(std::stod(s, &used));
            if (used != s.size()) numeric = false;
        } catch (const std::exception&) {
            numeric = false;
        }
    }
    if (!numeric) {
        codes.clear();
        for (std::size_t i = 0; i < levels.size(); ++i) {
            codes.push_back(static_cast<double>(i));
        }
    }
    return codes;
}

void analyze_observe(const std::string& in_dir, const std::string& out_dir,
                     int window, double anomaly_threshold,
                     std::vector<std::string>& outputs) {
    const bool has_results = fs::exists(fs::path(in_dir) / "results.csv");
    const bool has_trace = fs::exists(fs::path(in_dir) / "trace.jsonl");
    if (!has_results && !has_trace) {
        throw std::runtime_error("observe: neither results.csv nor trace.jsonl in " +
                                 in_dir);
    }

    if (has_results) {
        const ResultTable results = read_results_dir(in_dir);
        const InvolutionDistribution dist = involution_distribution(results);
        {
            std::ofstream out((fs::path(out_dir) / "distribution.csv").string(),
                              std::ios::binary);
            out << "class,count\n";
            out << "low," << dist.low << "\n";
            out << "moderate," << dist.moderate << "\n";
            out << "high," << dist.high << "\n";
            out << "failed," << dist.failed << "\n";
            outputs.push_back("distribution.csv");
        }
        const std::vector<Anomaly> anomalies =
            detect_anomalies(results, anomaly_threshold);
        {
            std::ofstream out((fs::path(out_dir) / "anomalies.csv").string(),
                              std::ios::binary);
            out << "row,design_point,seed,involution_index,robust_z\n";
            for (const Anomaly& a : anomalies) {
                const ResultRow& r = results.rows[a.row];
                out << a.row << ',' << r.design_point << ',' << r.seed << ','
                    << format_num(a.value) << ',' << format_num(a.robust_z) << "\n";
            }
            outputs.push_back("anomalies.csv");
        }
        json j;
        j["counts"] = {{"low", dist.low},
                       {"moderate", dist.moderate},
                       {"high", dist.high},
                       {"failed", dist.failed}};
        j["fraction_high"] = dist.fraction_high;
        j["anomalies"] = anomalies.size();
        j["threshold"] = anomaly_threshold;
        std::ofstream out((fs::path(out_dir) / "observe_summary.json").string(),
                          std::ios::binary);
        out << j.dump(2) << "\n";
        outputs.push_back("observe_summary.json");
    }

    if (has_trace) {
        const RunTrace trace = read_trace_dir(in_dir);
        int w = window;
        if (w <= 0) {
            const int horizon = static_cast<int>(trace.records.size());
            if (horizon % 6 == 0) {
                w = horizon / 6;
            } else {
                throw std::runtime_error(
                    "observe: horizon not divisible by 6, pass --window");
            }
        }
        const Heatmap hm = density_heatmap(trace, w);
        export_heatmaps(hm, out_dir);
        for (std::size_t i = 0; i < hm.counts.size(); ++i) {
            outputs.push_back("heatmap_w" + std::to_string(i) + ".csv");
        }
    }
}

void analyze_intervene(const std::string& in_dir, const std::string& out_dir,
                       const std::string& response, int bootstrap_rounds,
                       std::uint64_t seed, std::vector<std::string>& outputs) {
    const ResultTable results = read_results_dir(in_dir);
    if (results.factor_names.empty()) {
        throw std::runtime_error("intervene: the result table has no factors");
    }

    // Treatment effects: first design level is control, last is treated,
    // marginalizing over everything else.
    {
        std::ofstream out((fs::path(out_dir) / "ate.csv").string(), std::ios::binary);
        out << "factor,control_level,treated_level,estimate,ci_low,ci_high\n";
        for (std::size_t f = 0; f < results.factor_names.size(); ++f) {
            const auto& levels = results.factor_levels[f];
            if (levels.size() < 2) continue;
            const std::string& control_level = levels.front();
            const std::string& treated_level = levels.back();
            std::vector<double> treated, control;
            for (const ResultRow& row : results.rows) {
                const double y = response_of(row, response);
                if (std::isnan(y)) continue;
                if (row.levels[f] == treated_level) treated.push_back(y);
                else if (row.levels[f] == control_level) control.push_back(y);
            }
            if (treated.empty() || control.empty()) continue;
            const AteEstimate ate = average_treatment_effect(
                treated, control, bootstrap_rounds,
                seed + static_cast<std::uint64_t>(f));
            out << csv_field(results.factor_names[f]) << ',' << csv_field(control_level)
                << ',' << csv_field(treated_level) << ',' << format_num(ate.estimate)
                << ',' << format_num(ate.ci_low) << ',' << format_num(ate.ci_high)
                << "\n";
        }
        outputs.push_back("ate.csv");
    }

    // Shared numeric coding for paths and the metamodel.
    std::vector<std::vector<double>> level_codes;
    for (const auto& levels : results.factor_levels) {
        level_codes.push_back(factor_codes(levels));
    }
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (const ResultRow& row : results.rows) {
        const double v = response_of(row, response);
        if (std::isnan(v)) continue;
        std::vector<double> xs(results.factor_names.size());
        for (std::size_t f = 0; f < results.factor_names.size(); ++f) {
            const auto& levels = results.factor_levels[f];
            const auto it = std::find(levels.begin(), levels.end(), row.levels[f]);
            if (it == levels.end()) {
                throw std::runtime_error("intervene: level not in design: " +
                                         row.levels[f]);
            }
            xs[f] = level_codes[f][static_cast<std::size_t>(it - levels.begin())];
        }
        X.push_back(std::move(xs));
        y.push_back(v);
    }
    if (X.empty()) throw std::runtime_error("intervene: no usable rows");

    const PathCoefficients pc = path_coefficients(X, y, results.factor_names);
    export_path_coefficients(pc, (fs::path(out_dir) / "coefficients.csv").string());
    outputs.push_back("coefficients.csv");

    // Response surface: prefer the quadratic, fall back to linear when the
    // design cannot identify it (two-level factors make squares collinear).
    Metamodel mm;
    try {
        mm = fit_metamodel(X, y, results.factor_names, 2);
    } catch (const std::invalid_argument&) {
        mm = fit_metamodel(X, y, results.factor_names, 1);
    }
    json j;
    j["degree"] = mm.degree;
    j["response"] = response;
    j["terms"] = mm.terms;
    j["coefficients"] = mm.coefficients;
    j["r_squared"] = mm.r_squared;
    j["feature_names"] = results.factor_names;
    j["feature_mean"] = mm.feature_mean;
    j["feature_scale"] = mm.feature_scale;
    j["feature_min"] = mm.feature_min;
    j["feature_max"] = mm.feature_max;
    std::ofstream out((fs::path(out_dir) / "metamodel.json").string(), std::ios::binary);
    out << j.dump(2) << "\n";
    outputs.push_back("metamodel.json");
}

void analyze_mechanism(const std::string& in_dir, const std::string& out_dir,
                       int window, std::uint64_t seed,
                       std::vector<std::string>& outputs) {
    const RunTrace trace = read_trace_dir(in_dir);
    const int horizon = static_cast<int>(trace.records.size());
    int w = window;
    if (w <= 0) {
        if (horizon % 6 == 0) {
            w = horizon / 6;
        } else {
            throw std::runtime_error("mechanism: horizon not divisible by 6, pass --window");
        }
    }
    const IntentionLog log = intention_log(trace);

    const ClusterResult clusters = cluster_intentions(log, w, {2, 6}, seed);
    {
        std::ofstream out((fs::path(out_dir) / "clusters.csv").string(),
                          std::ios::binary);
        out << "rider,cluster\n";
        for (std::size_t i = 0; i < clusters.assignment.size(); ++i) {
            out << i << ',' << clusters.assignment[i] << "\n";
        }
        outputs.push_back("clusters.csv");
    }

    const CorrelationMatrix corr = intention_behavior_correlation(log, w);
    {
        std::ofstream out((fs::path(out_dir) / "correlation.csv").string(),
                          std::ios::binary);
        out << "intention,behavior,r\n";
        for (int i = 0; i < 3; ++i) {
            for (int b = 0; b < 5; ++b) {
                const auto& r = corr.r[static_cast<std::size_t>(i)]
                                      [static_cast<std::size_t>(b)];
                out << to_string(static_cast<IntentionLabel>(i)) << ','
                    << to_string(static_cast<ActionKind>(b)) << ','
                    << (r.has_value() ? format_num(*r) : "nan") << "\n";
            }
        }
        outputs.push_back("correlation.csv");
    }

    const FlowMatrix flows = stage_flow_matrix(log, w);
    export_flows(flows, (fs::path(out_dir) / "flows.csv").string(),
                 (fs::path(out_dir) / "shares.csv").string());
    outputs.push_back("flows.csv");
    outputs.push_back("shares.csv");

    json j;
    j["k"] = clusters.k;
    j["silhouette"] =
        clusters.silhouette.has_value() ? json(*clusters.silhouette) : json(nullptr);
    j["note"] = clusters.note;
    j["window_steps"] = w;
    j["windows"] = flows.windows;
    std::ofstream out((fs::path(out_dir) / "mechanism_summary.json").string(),
                      std::ios::binary);
    out << j.dump(2) << "\n";
    outputs.push_back("mechanism_summary.json");
}

void run_analyze(const std::string& in_dir, const std::string& layer,
                 const std::string& out_dir, int window, const std::string& response,
                 int bootstrap_rounds, std::uint64_t seed, double threshold) {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    std::vector<std::string> outputs;
    if (layer == "observe") {
        analyze_observe(in_dir, out_dir, window, threshold, outputs);
    } else if (layer == "intervene") {
        analyze_intervene(in_dir, out_dir, response, bootstrap_rounds, seed, outputs);
    } else if (layer == "mechanism") {
        analyze_mechanism(in_dir, out_dir, window, seed, outputs);
    } else {
        throw CLI::ValidationError("--layer must be observe, intervene, or mechanism");
    }
    ManifestInfo mf;
    mf.command = "analyze " + layer;
    mf.outputs = outputs;
    mf.wall_time_ms = elapsed_ms(start);
    write_manifest(mf, (fs::path(out_dir) / "manifest.json").string());
    log_info("analyze %s: wrote %zu files to %s", layer.c_str(), outputs.size(),
             out_dir.c_str());
}

json maybe_json(const fs::path& p) {
    if (!fs::exists(p)) return nullptr;
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return json::parse(buf.str());
}

void run_report(const std::string& in_dir, const std::string& out_file,
                const std::string& real_path, const std::string& sim_path) {
    json report;
    report["engine_version"] = kEngineVersion;

    const json summary = maybe_json(fs::path(in_dir) / "summary.json");
    if (!summary.is_null()) {
        report["run"] = {{"seed", summary.at("seed")},
                         {"terminal", summary.at("terminal")}};
    }
    for (const char* name :
         {"observe_summary.json", "metamodel.json", "mechanism_summary.json"}) {
        const json j = maybe_json(fs::path(in_dir) / name);
        if (!j.is_null()) {
            std::string key = name;
            key = key.substr(0, key.find('.'));
            report[key] = j;
        }
    }

    if (!real_path.empty() || !sim_path.empty()) {
        if (real_path.empty() || sim_path.empty()) {
            throw CLI::ValidationError("--real and --sim must be given together");
        }
        const std::vector<double> real = read_series(real_path);
        const std::vector<double> sim = read_series(sim_path);
        const SeriesComparison cmp = benchmark_compare(real, sim);
        report["benchmark"] = {
            {"n", real.size()},
            {"mae", cmp.mae},
            {"rmse", cmp.rmse},
            {"pearson", cmp.pearson.has_value() ? json(*cmp.pearson) : json(nullptr)},
        };
        std::printf("benchmark: n=%zu mae=%s rmse=%s r=%s\n", real.size(),
                    format_num(cmp.mae).c_str(), format_num(cmp.rmse).c_str(),
                    cmp.pearson ? format_num(*cmp.pearson).c_str() : "undefined");
    }

    if (report.contains("run")) {
        const json& t = report["run"]["terminal"];
        std::printf("run: involution=%s class=%s mean_utility=%s\n",
                    t.at("involution_index").is_null()
                        ? "undefined"
                        : format_num(t.at("involution_index").get<double>()).c_str(),
                    t.at("involution_class").is_null()
                        ? "-"
                        : t.at("involution_class").get<std::string>().c_str(),
                    format_num(t.at("mean_utility").get<double>()).c_str());
    }
    if (report.contains("observe_summary")) {
        const json& o = report["observe_summary"];
        std::printf("observe: low=%d moderate=%d high=%d failed=%d fraction_high=%s "
                    "anomalies=%zu\n",
                    o.at("counts").at("low").get<int>(),
                    o.at("counts").at("moderate").get<int>(),
                    o.at("counts").at("high").get<int>(),
                    o.at("counts").at("failed").get<int>(),
                    format_num(o.at("fraction_high").get<double>()).c_str(),
                    o.at("anomalies").get<std::size_t>());
    }
    if (report.contains("metamodel")) {
        std::printf("metamodel: degree=%d r_squared=%s\n",
                    report["metamodel"].at("degree").get<int>(),
                    format_num(report["metamodel"].at("r_squared").get<double>()).c_str());
    }
    if (report.contains("mechanism_summary")) {
        const json& m = report["mechanism_summary"];
        std::printf("mechanism: clusters=%d silhouette=%s\n", m.at("k").get<int>(),
                    m.at("silhouette").is_null()
                        ? "undefined"
                        : format_num(m.at("silhouette").get<double>()).c_str());
    }

    if (!out_file.empty()) {
        fs::path parent = fs::path(out_file).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + out_file);
        out << report.dump(2) << "\n";
        log_info("report written to %s", out_file.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delivery-platform rider simulation and analysis engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string in_dir;
    std::string out_path;
    std::string layer;
    std::string response = "involution_index";
    std::string real_path;
    std::string sim_path;
    std::uint64_t seed = 1;
    std::uint64_t analyze_seed = 12345;
    int parallel = 1;
    int window = 0;
    int bootstrap_rounds = 2000;
    double threshold = 3.5;
    bool no_trace = false;

    CLI::App* sim = app.add_subcommand("simulate", "Run one simulation");
    sim->add_option("--config", config_path, "JSON config (defaults when omitted)");
    sim->add_option("--seed", seed, "Run seed")->capture_default_str();
    sim->add_option("--out", out_path, "Output directory")->required();
    sim->add_flag("--no-trace", no_trace, "Skip the per-step trace file");

    CLI::App* exp = app.add_subcommand("experiment", "Run a factorial experiment");
    exp->add_option("--config", config_path, "JSON config with experiment.factors");
    exp->add_option("--out", out_path, "Output directory")->required();
    exp->add_option("--parallel", parallel, "Concurrent runs")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    CLI::App* ana = app.add_subcommand("analyze", "Analyze simulate/experiment outputs");
    ana->add_option("--in", in_dir, "Directory with results.csv and/or trace.jsonl")
        ->required();
    ana->add_option("--layer", layer, "observe | intervene | mechanism")->required();
    ana->add_option("--out", out_path, "Output directory")->required();
    ana->add_option("--window", window, "Window steps (0 = horizon/6)")
        ->capture_default_str();
    ana->add_option("--response", response,
                    "involution_index | swf | mean_utility | frac_risk_avoidant")
        ->capture_default_str();
    ana->add_option("--bootstrap", bootstrap_rounds, "Bootstrap resamples for ATE CIs")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    ana->add_option("--seed", analyze_seed, "Seed for bootstrap and clustering")
        ->capture_default_str();
    ana->add_option("--threshold", threshold, "Robust z-score anomaly threshold")
        ->capture_default_str();

    CLI::App* rep = app.add_subcommand("report", "Combine analysis outputs");
    rep->add_option("--in", in_dir, "Directory with analysis outputs")->required();
    rep->add_option("--out", out_path, "Report JSON file (optional)");
    rep->add_option("--real", real_path, "Reference series for benchmarking");
    rep->add_option("--sim", sim_path, "Candidate series for benchmarking");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            run_simulate(config_path, seed, out_path, no_trace);
        } else if (exp->parsed()) {
            run_experiment(config_path, out_path, parallel);
        } else if (ana->parsed()) {
            run_analyze(in_dir, layer, out_path, window, response, bootstrap_rounds,
                        analyze_seed, threshold);
        } else if (rep->parsed()) {
            run_report(in_dir, out_path, real_path, sim_path);
        }
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
