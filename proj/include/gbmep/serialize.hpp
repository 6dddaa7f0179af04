#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gbmep/csv.hpp"
#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/fit.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/gof.hpp"
#include "gbmep/ingest.hpp"
#include "gbmep/model.hpp"

namespace gbmep {

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw numerical_error("failed to format a double");
    return std::string(buf, p);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    auto [p, ec] = std::from_chars(begin, begin + s.size(), v);
    if (ec != std::errc() || p != begin + s.size())
        throw schema_error("expected a number, got '" + s + "'");
    return v;
}

// ---- event stream text format -------------------------------------------
//
//   # gbmep-events v1
//   # nodes=<M> horizon=<T>
//   source,destination,start,end
//   0,3,1.25,2.75
//
// Times are hours since the window origin, printed exactly.

inline void write_events(const EventStore& store, std::ostream& out) {
    out << "# gbmep-events v1\n";
    out << "# nodes=" << store.num_nodes() << " horizon=" << format_double(store.horizon())
        << "\n";
    out << "source,destination,start,end\n";
    for (const EventRecord& r : store.records()) {
        out << r.source << ',' << r.destination << ',' << format_double(r.start) << ','
            << format_double(r.end) << '\n';
    }
}

inline void write_events_file(const EventStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw argument_error("cannot write events file " + path);
    write_events(store, out);
}

inline EventStore read_events(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# gbmep-events v1", 0) != 0)
        throw schema_error("not a gbmep events file (bad magic line)");
    if (!std::getline(in, line) || line.rfind("# nodes=", 0) != 0)
        throw schema_error("events file is missing the nodes/horizon line");
    std::size_t nodes = 0;
    double horizon = 0.0;
    {
        std::istringstream meta(line.substr(2));
        std::string tok;
        while (meta >> tok) {
            if (tok.rfind("nodes=", 0) == 0) nodes = std::stoull(tok.substr(6));
            else if (tok.rfind("horizon=", 0) == 0) horizon = parse_double(tok.substr(8));
        }
    }
    if (!std::getline(in, line) || split_csv_line(line) !=
                                       std::vector<std::string>{"source", "destination", "start",
                                                                "end"})
        throw schema_error("events file is missing the column header");
    std::vector<EventRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw schema_error("events row must have 4 fields");
        EventRecord r;
        r.source = static_cast<NodeId>(std::stol(f[0]));
        r.destination = static_cast<NodeId>(std::stol(f[1]));
        r.start = parse_double(f[2]);
        r.end = parse_double(f[3]);
        records.push_back(r);
    }
    return EventStore(std::move(records), nodes, horizon);
}

inline EventStore read_events_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw argument_error("cannot open events file " + path);
    return read_events(in);
}

// ---- station registry -----------------------------------------------------

inline void write_registry(const StationRegistry& reg, std::ostream& out) {
    out << "id,name,lat,lon\n";
    for (std::size_t i = 0; i < reg.size(); ++i) {
        const Station& s = reg.station(static_cast<NodeId>(i));
        out << csv_escape(s.id) << ',' << csv_escape(s.name) << ',' << format_double(s.latitude)
            << ',' << format_double(s.longitude) << '\n';
    }
}

inline void write_registry_file(const StationRegistry& reg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw argument_error("cannot write stations file " + path);
    write_registry(reg, out);
}

// ---- neighborhoods ---------------------------------------------------------

inline void write_neighborhoods(const NeighborhoodGraph& g, std::ostream& out) {
    out << "i,j,distance_km\n";
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        for (const Neighbor& nb : g.neighbors(static_cast<NodeId>(i)))
            out << i << ',' << nb.node << ',' << format_double(nb.distance_km) << '\n';
}

// ---- node parameters / fit results ----------------------------------------

inline nlohmann::json params_to_json(const NodeParams& p) {
    return nlohmann::json{{"lambda", p.lambda},
                          {"alpha", p.alpha},
                          {"beta", p.beta},
                          {"theta", p.theta},
                          {"alpha_prime", p.alpha_prime},
                          {"beta_prime", p.beta_prime},
                          {"theta_prime", p.theta_prime}};
}

inline NodeParams params_from_json(const nlohmann::json& j) {
    NodeParams p;
    p.lambda = j.at("lambda").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.at("beta").get<double>();
    p.theta = j.at("theta").get<double>();
    p.alpha_prime = j.at("alpha_prime").get<double>();
    p.beta_prime = j.at("beta_prime").get<double>();
    p.theta_prime = j.at("theta_prime").get<double>();
    return p;
}

inline nlohmann::json fit_to_json(const FitResult& fit) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < fit.nodes.size(); ++i) {
        const NodeFit& nf = fit.nodes[i];
        nlohmann::json entry = params_to_json(nf.params);
        entry["node"] = i;
        entry["loglik"] = nf.loglik;
        entry["status"] = fit_status_name(nf.status);
        entry["iterations"] = nf.iterations;
        if (!nf.message.empty()) entry["message"] = nf.message;
        nodes.push_back(std::move(entry));
    }
    return nlohmann::json{{"format", "gbmep-params-v1"},
                          {"variant", fit.spec.name()},
                          {"horizon", fit.horizon},
                          {"nodes", std::move(nodes)}};
}

inline FitResult fit_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gbmep-params-v1")
        throw schema_error("not a gbmep parameter file");
    FitResult fit;
    fit.spec = ModelSpec{ModelSpec::parse_variant(j.at("variant").get<std::string>())};
    fit.horizon = j.at("horizon").get<double>();
    const auto& nodes = j.at("nodes");
    fit.nodes.resize(nodes.size());
    for (const auto& entry : nodes) {
        const std::size_t i = entry.at("node").get<std::size_t>();
        if (i >= fit.nodes.size()) throw schema_error("parameter file node index out of range");
        NodeFit nf;
        nf.params = params_from_json(entry);
        nf.loglik = entry.at("loglik").get<double>();
        nf.status = parse_fit_status(entry.at("status").get<std::string>());
        nf.iterations = entry.value("iterations", 0);
        nf.message = entry.value("message", "");
        fit.nodes[i] = std::move(nf);
    }
    return fit;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw argument_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw argument_error("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw schema_error("invalid json in " + path + ": " + e.what());
    }
}

// ---- goodness-of-fit artifacts ---------------------------------------------

inline nlohmann::json gof_to_json(const GofReport& report, const std::string& variant) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const NodeGof& g : report.nodes) {
        nlohmann::json entry{{"node", g.node},
                             {"n_train", g.p_train.size()},
                             {"n_test", g.p_test.size()}};
        if (g.ks_train) entry["ks_train"] = *g.ks_train;
        if (g.ks_test) entry["ks_test"] = *g.ks_test;
        nodes.push_back(std::move(entry));
    }
    nlohmann::json pooled{{"n_train", report.pooled_train.size()},
                          {"n_test", report.pooled_test.size()}};
    if (report.pooled_ks_train) pooled["ks_train"] = *report.pooled_ks_train;
    if (report.pooled_ks_test) pooled["ks_test"] = *report.pooled_ks_test;
    return nlohmann::json{{"format", "gbmep-gof-v1"},
                          {"variant", variant},
                          {"pooled", std::move(pooled)},
                          {"skipped_nodes", report.skipped_nodes},
                          {"nodes", std::move(nodes)}};
}

inline void write_pernode_ks_csv(const GofReport& report, const StationRegistry* reg,
                                 std::ostream& out) {
    out << "node,external_id,n_train,n_test,ks_train,ks_test\n";
    for (const NodeGof& g : report.nodes) {
        out << g.node << ',';
        if (reg && static_cast<std::size_t>(g.node) < reg->size())
            out << csv_escape(reg->station(g.node).id);
        out << ',' << g.p_train.size() << ',' << g.p_test.size() << ',';
        if (g.ks_train) out << format_double(*g.ks_train);
        out << ',';
        if (g.ks_test) out << format_double(*g.ks_test);
        out << '\n';
    }
}

// Q-Q data at up to `max_points` evenly spaced theoretical quantiles of the
// pooled sample.
inline void write_qq_csv(std::vector<double> pooled, std::size_t max_points, std::ostream& out) {
    out << "theoretical,empirical\n";
    if (pooled.empty()) return;
    std::sort(pooled.begin(), pooled.end());
    const std::size_t n = pooled.size();
    const std::size_t points = std::min(max_points, n);
    for (std::size_t k = 0; k < points; ++k) {
        const double q = (static_cast<double>(k) + 0.5) / static_cast<double>(points);
        const std::size_t idx = std::min(static_cast<std::size_t>(q * static_cast<double>(n)),
                                         n - 1);
        out << format_double(q) << ',' << format_double(pooled[idx]) << '\n';
    }
}

// Five-number summaries of the per-station KS scores, one row per model.
inline void write_boxplot_csv(
    const std::vector<std::pair<std::string, std::vector<double>>>& per_model_scores,
    std::ostream& out) {
    out << "model,n,min,q1,median,q3,max\n";
    for (const auto& [model, scores_in] : per_model_scores) {
        if (scores_in.empty()) continue;
        std::vector<double> s = scores_in;
        std::sort(s.begin(), s.end());
        auto quantile = [&](double q) {
            const double pos = q * static_cast<double>(s.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, s.size() - 1);
            const double w = pos - static_cast<double>(lo);
            return (1.0 - w) * s[lo] + w * s[hi];
        };
        out << model << ',' << s.size() << ',' << format_double(s.front()) << ','
            << format_double(quantile(0.25)) << ',' << format_double(quantile(0.5)) << ','
            << format_double(quantile(0.75)) << ',' << format_double(s.back()) << '\n';
    }
}

inline nlohmann::json ingest_report_to_json(const IngestReport& r) {
    nlohmann::json rejected = nlohmann::json::object();
    for (const auto& [reason, count] : r.rejected) rejected[reject_reason_name(reason)] = count;
    return nlohmann::json{{"format", "gbmep-ingest-report-v1"},
                          {"rows_read", r.rows_read},
                          {"accepted", r.accepted},
                          {"rejected", std::move(rejected)},
                          {"total_rejected", r.total_rejected()},
                          {"ambiguous_times", r.ambiguous_times},
                          {"skipped_times", r.skipped_times},
                          {"stations_skipped", r.stations_skipped},
                          {"origin_date", r.origin_date},
                          {"horizon_hours", r.horizon_hours},
                          {"split_hours", r.split_hours}};
}

} // namespace gbmep
