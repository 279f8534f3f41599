// File formats: the per-step trace (JSON lines), run summary, experiment
// results and design, analysis tables (CSV), and the run manifest. All
// numeric text uses %.9g so identical runs produce identical bytes; the
// manifest is the one exception (it records wall time).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ridersim/analysis.hpp"
#include "ridersim/experiment.hpp"
#include "ridersim/world.hpp"

namespace ridersim {

// "%.9g" rendering; NaN prints as "nan", infinities as "inf"/"-inf".
std::string format_num(double v);

// Quotes a CSV field only when it contains a comma, quote, or newline.
std::string csv_field(const std::string& s);

void export_trace(const RunTrace& trace, const std::string& path);
void export_summary(const RunTrace& trace, const std::string& path);

// Rebuilds a trace from trace.jsonl + summary.json in dir (the summary
// carries the config; the records carry everything else).
RunTrace read_trace_dir(const std::string& dir);

void export_results_csv(const ResultTable& table, const std::string& path);
void export_index_timeseries(const ResultTable& table, const std::string& path);
void export_design(const DesignMatrix& design, const std::string& path);

// Reads results.csv + design.json back into a ResultTable (terminal metrics
// and factor levels; day series live only in index_timeseries.csv).
ResultTable read_results_dir(const std::string& dir);

void export_heatmaps(const Heatmap& hm, const std::string& dir);
void export_flows(const FlowMatrix& fm, const std::string& flows_path,
                  const std::string& shares_path);
void export_path_coefficients(const PathCoefficients& pc, const std::string& path);

struct ManifestInfo {
    std::string command;
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> outputs;
    double wall_time_ms = 0.0;
};

void write_manifest(const ManifestInfo& info, const std::string& path);

// One floating-point number per line; a non-numeric first line is treated
// as a header and skipped. Used for the benchmark series inputs.
std::vector<double> read_series(const std::string& path);

}  // namespace ridersim
