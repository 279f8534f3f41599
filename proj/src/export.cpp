#include "ridersim/export.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ridersim/version.hpp"

namespace ridersim {

using nlohmann::json;

std::string format_num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
}

// RFC-4180-ish quoting: only fields containing a comma, quote, or newline
// get wrapped.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

json welfare_json(const std::optional<WelfareSnapshot>& w) {
    if (!w.has_value()) return nullptr;
    return json{{"eq", w->eq}, {"prod", w->prod}, {"swf", w->swf}};
}

}  // namespace

void export_trace(const RunTrace& trace, const std::string& path) {
    std::ofstream out = open_out(path);
    std::string line;
    for (const StepRecord& rec : trace.records) {
        line.clear();
        line += "{\"step\":" + std::to_string(rec.step);
        line += ",\"created\":[";
        for (std::size_t i = 0; i < rec.created.size(); ++i) {
            if (i) line += ',';
            line += std::to_string(rec.created[i]);
        }
        line += "],\"assigned\":[";
        for (std::size_t i = 0; i < rec.assigned.size(); ++i) {
            if (i) line += ',';
            line += '[' + std::to_string(rec.assigned[i].first) + ',' +
                    std::to_string(rec.assigned[i].second) + ']';
        }
        line += "],\"delivered\":[";
        for (std::size_t i = 0; i < rec.delivered.size(); ++i) {
            if (i) line += ',';
            const auto& [oid, rid, fee] = rec.delivered[i];
            line += '[' + std::to_string(oid) + ',' + std::to_string(rid) + ',' +
                    format_num(fee) + ']';
        }
        line += "],\"expired\":[";
        for (std::size_t i = 0; i < rec.expired.size(); ++i) {
            if (i) line += ',';
            line += std::to_string(rec.expired[i]);
        }
        line += "],\"welfare\":";
        if (rec.welfare.has_value()) {
            line += '[' + format_num(rec.welfare->eq) + ',' +
                    format_num(rec.welfare->prod) + ',' + format_num(rec.welfare->swf) +
                    ']';
        } else {
            line += "null";
        }
        line += ",\"riders\":[";
        for (std::size_t i = 0; i < rec.riders.size(); ++i) {
            if (i) line += ',';
            const StepRiderRecord& r = rec.riders[i];
            line += '[' + std::to_string(static_cast<int>(r.action)) + ',' +
                    std::to_string(r.action_target) + ',' +
                    std::to_string(static_cast<int>(r.intention)) + ',' +
                    std::to_string(r.x) + ',' + std::to_string(r.y) + ',' +
                    format_num(r.income_delta) + ',' + format_num(r.cost_delta) + ']';
        }
        line += "]}\n";
        out << line;
    }
}

void export_summary(const RunTrace& trace, const std::string& path) {
    const TerminalSummary& t = trace.terminal;
    json j;
    j["config"] = json::parse(config_to_json_text(trace.config));
    j["seed"] = trace.seed;
    j["engine_version"] = kEngineVersion;
    j["terminal"] = {
        {"incomes", t.incomes},
        {"costs", t.costs},
        {"utilities", t.utilities},
        {"welfare", welfare_json(t.welfare)},
        {"involution_index",
         t.involution.has_value() ? json(*t.involution) : json(nullptr)},
        {"involution_note", t.involution_note},
        {"involution_class",
         t.involution.has_value() ? json(to_string(classify_involution(*t.involution)))
                                  : json(nullptr)},
        {"mean_utility", t.mean_utility},
        {"frac_risk_avoidant", t.frac_risk_avoidant},
    };
    json day_inv = json::array();
    for (const double v : t.day_involution) {
        day_inv.push_back(std::isnan(v) ? json(nullptr) : json(v));
    }
    j["terminal"]["day_involution"] = std::move(day_inv);
    json day_shares = json::array();
    for (const auto& s : t.day_intention_shares) day_shares.push_back(s);
    j["terminal"]["day_intention_shares"] = std::move(day_shares);
    open_out(path) << j.dump(2) << "\n";
}

RunTrace read_trace_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string summary_path = (fs::path(dir) / "summary.json").string();
    const std::string trace_path = (fs::path(dir) / "trace.jsonl").string();
    json summary = json::parse(slurp(summary_path));

    RunTrace trace;
    trace.config = config_from_json_text(summary.at("config").dump());
    trace.seed = summary.at("seed").get<std::uint64_t>();

    TerminalSummary& t = trace.terminal;
    const json& jt = summary.at("terminal");
    t.incomes = jt.at("incomes").get<std::vector<double>>();
    t.costs = jt.at("costs").get<std::vector<double>>();
    t.utilities = jt.at("utilities").get<std::vector<double>>();
    if (!jt.at("welfare").is_null()) {
        const json& w = jt.at("welfare");
        t.welfare = WelfareSnapshot{w.at("eq").get<double>(), w.at("prod").get<double>(),
                                    w.at("swf").get<double>()};
    }
    if (!jt.at("involution_index").is_null()) {
        t.involution = jt.at("involution_index").get<double>();
    }
    t.involution_note = jt.at("involution_note").get<std::string>();
    t.mean_utility = jt.at("mean_utility").get<double>();
    t.frac_risk_avoidant = jt.at("frac_risk_avoidant").get<double>();
    for (const json& v : jt.at("day_involution")) {
        t.day_involution.push_back(
            v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
    for (const json& s : jt.at("day_intention_shares")) {
        t.day_intention_shares.push_back(
            {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()});
    }

    std::ifstream in(trace_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + trace_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        StepRecord sr;
        sr.step = rec.at("step").get<int>();
        for (const json& id : rec.at("created")) {
            sr.created.push_back(id.get<std::int64_t>());
        }
        for (const json& a : rec.at("assigned")) {
            sr.assigned.emplace_back(a[0].get<std::int64_t>(), a[1].get<int>());
        }
        for (const json& d : rec.at("delivered")) {
            sr.delivered.emplace_back(d[0].get<std::int64_t>(), d[1].get<int>(),
                                      d[2].get<double>());
        }
        for (const json& id : rec.at("expired")) {
            sr.expired.push_back(id.get<std::int64_t>());
        }
        if (!rec.at("welfare").is_null()) {
            const json& w = rec.at("welfare");
            sr.welfare = WelfareSnapshot{w[0].get<double>(), w[1].get<double>(),
                                         w[2].get<double>()};
        }
        for (const json& r : rec.at("riders")) {
            StepRiderRecord rr;
            rr.action = static_cast<ActionKind>(r[0].get<int>());
            rr.action_target = r[1].get<std::int64_t>();
            rr.intention = static_cast<IntentionLabel>(r[2].get<int>());
            rr.x = static_cast<std::int16_t>(r[3].get<int>());
            rr.y = static_cast<std::int16_t>(r[4].get<int>());
            rr.income_delta = r[5].get<double>();
            rr.cost_delta = r[6].get<double>();
            sr.riders.push_back(rr);
        }
        trace.records.push_back(std::move(sr));
    }
    return trace;
}

void export_results_csv(const ResultTable& table, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "design_point,seed";
    for (const std::string& name : table.factor_names) {
        out << ",factor_" << csv_field(name);
    }
    out << ",involution_index,swf,mean_utility,frac_risk_avoidant\n";
    for (const ResultRow& row : table.rows) {
        out << row.design_point << ',' << row.seed;
        for (const std::string& level : row.levels) out << ',' << csv_field(level);
        out << ',' << format_num(row.involution) << ',' << format_num(row.swf) << ','
            << format_num(row.mean_utility) << ',' << format_num(row.frac_risk_avoidant)
            << "\n";
    }
}

void export_index_timeseries(const ResultTable& table, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "design_point,seed,day,involution_index\n";
    for (const ResultRow& row : table.rows) {
        for (std::size_t d = 0; d < row.day_involution.size(); ++d) {
            out << row.design_point << ',' << row.seed << ',' << d << ','
                << format_num(row.day_involution[d]) << "\n";
        }
    }
}

void export_design(const DesignMatrix& design, const std::string& path) {
    json j;
    json factors = json::array();
    for (std::size_t f = 0; f < design.factor_names.size(); ++f) {
        factors.push_back({{"name", design.factor_names[f]},
                           {"levels", design.factor_levels[f]},
                           {"controllable", static_cast<bool>(design.controllable[f])}});
    }
    j["factors"] = std::move(factors);
    j["replicates"] = design.replicates;
    j["base_seed"] = design.base_seed;
    json rows = json::array();
    for (const DesignRow& r : design.rows) {
        rows.push_back({{"design_point", r.design_point},
                        {"replicate", r.replicate},
                        {"seed", r.seed},
                        {"levels", r.levels}});
    }
    j["rows"] = std::move(rows);
    open_out(path) << j.dump(2) << "\n";
}

ResultTable read_results_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    const json design = json::parse(slurp((fs::path(dir) / "design.json").string()));
    ResultTable table;
    for (const json& f : design.at("factors")) {
        table.factor_names.push_back(f.at("name").get<std::string>());
        table.factor_levels.push_back(f.at("levels").get<std::vector<std::string>>());
    }

    std::ifstream in((fs::path(dir) / "results.csv").string(), std::ios::binary);
    if (!in) throw std::runtime_error("cannot open results.csv in " + dir);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("results.csv is empty");
    const std::vector<std::string> header = split_csv_line(line);
    const std::size_t expected = 2 + table.factor_names.size() + 4;
    if (header.size() != expected) {
        throw std::runtime_error("results.csv header does not match design.json");
    }
    const auto parse_num = [](const std::string& s) {
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        return std::stod(s);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != expected) throw std::runtime_error("results.csv ragged row");
        ResultRow row;
        row.design_point = std::stoi(f[0]);
        row.seed = static_cast<std::uint64_t>(std::stoull(f[1]));
        for (std::size_t i = 0; i < table.factor_names.size(); ++i) {
            row.levels.push_back(f[2 + i]);
        }
        const std::size_t m = 2 + table.factor_names.size();
        row.involution = parse_num(f[m]);
        row.swf = parse_num(f[m + 1]);
        row.mean_utility = parse_num(f[m + 2]);
        row.frac_risk_avoidant = parse_num(f[m + 3]);
        row.failed = std::isnan(row.involution);
        table.rows.push_back(std::move(row));
    }
    return table;
}

void export_heatmaps(const Heatmap& hm, const std::string& dir) {
    namespace fs = std::filesystem;
    for (std::size_t w = 0; w < hm.counts.size(); ++w) {
        const std::string path =
            (fs::path(dir) / ("heatmap_w" + std::to_string(w) + ".csv")).string();
        std::ofstream out = open_out(path);
        for (int y = 0; y < hm.height; ++y) {
            for (int x = 0; x < hm.width; ++x) {
                if (x) out << ',';
                out << hm.counts[w][static_cast<std::size_t>(y) * hm.width + x];
            }
            out << "\n";
        }
    }
}

void export_flows(const FlowMatrix& fm, const std::string& flows_path,
                  const std::string& shares_path) {
    {
        std::ofstream out = open_out(flows_path);
        out << "window,from_stage,to_stage,count\n";
        for (std::size_t w = 0; w < fm.transitions.size(); ++w) {
            for (int from = 0; from < 3; ++from) {
                for (int to = 0; to < 3; ++to) {
                    out << w << ',' << to_string(static_cast<IntentionLabel>(from)) << ','
                        << to_string(static_cast<IntentionLabel>(to)) << ','
                        << fm.transitions[w][static_cast<std::size_t>(from)]
                                         [static_cast<std::size_t>(to)]
                        << "\n";
                }
            }
        }
    }
    {
        std::ofstream out = open_out(shares_path);
        out << "window,rule_following,anxious,risk_avoidant\n";
        for (std::size_t w = 0; w < fm.shares.size(); ++w) {
            out << w << ',' << format_num(fm.shares[w][0]) << ','
                << format_num(fm.shares[w][1]) << ',' << format_num(fm.shares[w][2])
                << "\n";
        }
    }
}

void export_path_coefficients(const PathCoefficients& pc, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "factor,beta,p_value\n";
    for (std::size_t i = 0; i < pc.names.size(); ++i) {
        out << csv_field(pc.names[i]) << ',' << format_num(pc.beta[i]) << ','
            << format_num(pc.p_value[i]) << "\n";
    }
}

void write_manifest(const ManifestInfo& info, const std::string& path) {
    json j;
    j["engine_version"] = kEngineVersion;
    j["command"] = info.command;
    j["config_hash"] = info.config_hash;
    j["seeds"] = info.seeds;
    j["outputs"] = info.outputs;
    j["wall_time_ms"] = info.wall_time_ms;
    open_out(path) << j.dump(2) << "\n";
}

std::vector<double> read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(line, &used);
            if (used != line.size()) throw std::invalid_argument(line);
            out.push_back(v);
        } catch (const std::exception&) {
            if (first) {
                first = false;
                continue;  // header line
            }
            throw std::runtime_error("read_series: cannot parse line '" + line +
                                     "' in " + path);
        }
        first = false;
    }
    return out;
}

}  // namespace ridersim
