// Command-line driver binding ingestion, simulation, fitting, and
// evaluation into reproducible runs. Every subcommand reads one JSON config
// (flags override a few common settings) and echoes the fully resolved
// configuration next to its outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gbmep/gbmep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gbmep;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) throw argument_error("--config is required");
    return read_json_file(path);
}

fs::path resolve_out_dir(const json& cfg, const std::string& override_dir) {
    const std::string dir = !override_dir.empty() ? override_dir
                                                  : cfg.value("output_dir", std::string("out"));
    fs::create_directories(dir);
    return dir;
}

ColumnMap column_map_from(const json& data) {
    ColumnMap m;
    if (!data.contains("columns")) return m;
    const json& c = data.at("columns");
    m.rental_id = c.value("rental_id", m.rental_id);
    m.start_time = c.value("start_time", m.start_time);
    m.end_time = c.value("end_time", m.end_time);
    m.start_station = c.value("start_station", m.start_station);
    m.end_station = c.value("end_station", m.end_station);
    m.duration = c.value("duration", m.duration);
    m.timestamp_format = c.value("timestamp_format", m.timestamp_format);
    m.timezone = parse_timezone(c.value("timezone", std::string(timezone_name(m.timezone))));
    return m;
}

StationColumns station_columns_from(const json& data) {
    StationColumns s;
    if (!data.contains("station_columns")) return s;
    const json& c = data.at("station_columns");
    s.id = c.value("id", s.id);
    s.name = c.value("name", s.name);
    s.latitude = c.value("lat", s.latitude);
    s.longitude = c.value("lon", s.longitude);
    return s;
}

json column_map_to_json(const ColumnMap& m) {
    return json{{"rental_id", m.rental_id},
                {"start_time", m.start_time},
                {"end_time", m.end_time},
                {"start_station", m.start_station},
                {"end_station", m.end_station},
                {"duration", m.duration},
                {"timestamp_format", m.timestamp_format},
                {"timezone", timezone_name(m.timezone)}};
}

struct GraphSettings {
    double epsilon_km = kDefaultEpsilonKm;
    int min_neighbors = kDefaultMinNeighbors;
    double earth_radius_km = kDefaultEarthRadiusKm;
};

GraphSettings graph_settings_from(const json& cfg) {
    GraphSettings g;
    if (!cfg.contains("graph")) return g;
    const json& j = cfg.at("graph");
    g.epsilon_km = j.value("epsilon_km", g.epsilon_km);
    g.min_neighbors = j.value("min_neighbors", g.min_neighbors);
    g.earth_radius_km = j.value("earth_radius_km", g.earth_radius_km);
    return g;
}

json graph_settings_to_json(const GraphSettings& g) {
    return json{{"epsilon_km", g.epsilon_km},
                {"min_neighbors", g.min_neighbors},
                {"earth_radius_km", g.earth_radius_km}};
}

void write_resolved_config(const json& resolved, const fs::path& out_dir,
                           const std::string& subcommand) {
    write_json_file(resolved, (out_dir / ("resolved_config_" + subcommand + ".json")).string());
}

std::vector<Variant> variants_from(const json& fit_cfg) {
    std::vector<Variant> variants;
    if (fit_cfg.contains("variants")) {
        for (const auto& v : fit_cfg.at("variants"))
            variants.push_back(ModelSpec::parse_variant(v.get<std::string>()));
    } else {
        variants.assign(kAllVariants.begin(), kAllVariants.end());
    }
    return variants;
}

NodeParams params_from_config(const json& j) {
    NodeParams p;
    p.lambda = j.value("lambda", p.lambda);
    p.alpha = j.value("alpha", p.alpha);
    p.beta = j.value("beta", p.beta);
    p.theta = j.value("theta", p.theta);
    p.alpha_prime = j.value("alpha_prime", p.alpha_prime);
    p.beta_prime = j.value("beta_prime", p.beta_prime);
    p.theta_prime = j.value("theta_prime", p.theta_prime);
    return p;
}

int cmd_ingest(const json& cfg, const std::string& out_override) {
    if (!cfg.contains("data")) throw schema_error("config is missing the 'data' section");
    const json& data = cfg.at("data");
    const fs::path out_dir = resolve_out_dir(cfg, out_override);

    std::vector<std::string> journeys;
    for (const auto& f : data.at("journeys")) journeys.push_back(f.get<std::string>());
    const std::string stations = data.at("stations").get<std::string>();
    const ColumnMap columns = column_map_from(data);
    const StationColumns station_columns = station_columns_from(data);
    const json& w = data.at("window");
    IngestWindow window{w.at("start").get<std::string>(), w.at("split").get<std::string>(),
                        w.at("end").get<std::string>()};

    IngestOutput out = ingest(journeys, stations, columns, window, station_columns);

    write_events_file(out.train, (out_dir / "train.events").string());
    write_events_file(out.test, (out_dir / "test.events").string());
    write_registry_file(out.registry, (out_dir / "stations.csv").string());
    write_json_file(ingest_report_to_json(out.report), (out_dir / "ingest_report.json").string());

    write_resolved_config(
        json{{"output_dir", out_dir.string()},
             {"data", json{{"journeys", journeys},
                           {"stations", stations},
                           {"columns", column_map_to_json(columns)},
                           {"window", json{{"start", window.first_day},
                                           {"split", window.first_test_day},
                                           {"end", window.last_day}}}}}},
        out_dir, "ingest");

    std::cerr << "ingest: " << out.report.accepted << " journeys accepted, "
              << out.report.total_rejected() << " rejected, M=" << out.registry.size()
              << " stations\n";
    return 0;
}

int cmd_simulate(const json& cfg, const std::string& out_override,
                 std::optional<std::uint64_t> seed_override) {
    if (!cfg.contains("simulate")) throw schema_error("config is missing the 'simulate' section");
    const json& sim = cfg.at("simulate");
    const fs::path out_dir = resolve_out_dir(cfg, out_override);
    const GraphSettings gs = graph_settings_from(cfg);

    StationRegistry registry;
    if (sim.contains("grid")) {
        const json& grid = sim.at("grid");
        registry = make_grid_network(grid.at("side").get<int>(),
                                     grid.at("spacing_km").get<double>(),
                                     grid.value("center_lat", 51.509),
                                     grid.value("center_lon", -0.118), gs.earth_radius_km);
    } else if (sim.contains("stations")) {
        registry = load_stations_file(sim.at("stations").get<std::string>(),
                                      station_columns_from(cfg.value("data", json::object())));
    } else {
        throw schema_error("simulate config needs either 'grid' or 'stations'");
    }
    NeighborhoodGraph nbhd =
        NeighborhoodGraph::build(registry, gs.epsilon_km, gs.min_neighbors, gs.earth_radius_km);

    SimConfig sc;
    sc.spec = ModelSpec{ModelSpec::parse_variant(sim.value("variant", std::string("gbmep")))};
    sc.horizon_hours = sim.at("horizon_hours").get<double>();
    sc.seed = seed_override ? *seed_override : sim.value("seed", cfg.value("seed", 1));
    sc.max_events = sim.value("max_events", sc.max_events);
    if (sim.contains("duration_lognormal")) {
        sc.duration.log_mean_hours = sim.at("duration_lognormal").value("mu", -1.0);
        sc.duration.log_sd_hours = sim.at("duration_lognormal").value("sigma", 0.5);
    }
    if (sim.contains("params_file")) {
        const FitResult fit = fit_from_json(read_json_file(sim.at("params_file").get<std::string>()));
        if (fit.nodes.size() != registry.size())
            throw argument_error("params file does not cover the station set");
        for (const NodeFit& nf : fit.nodes) sc.params.push_back(nf.params);
        if (!sim.contains("variant")) sc.spec = fit.spec;
    } else if (sim.contains("params")) {
        sc.params.assign(registry.size(), params_from_config(sim.at("params")));
    } else {
        throw schema_error("simulate config needs 'params' or 'params_file'");
    }

    const SimOutput out = simulate(sc, nbhd);
    write_events_file(out.store, (out_dir / "sim.events").string());
    write_registry_file(registry, (out_dir / "sim_stations.csv").string());
    if (sim.contains("t_star_hours")) {
        auto [train, test] = out.store.split_at(sim.at("t_star_hours").get<double>());
        write_events_file(train, (out_dir / "sim_train.events").string());
        write_events_file(test, (out_dir / "sim_test.events").string());
    }

    json manifest{{"format", "gbmep-sim-manifest-v1"},
                  {"rng", kRngAlgorithm},
                  {"seed", sc.seed},
                  {"variant", sc.spec.name()},
                  {"horizon_hours", sc.horizon_hours},
                  {"events", out.store.size()},
                  {"proposals", out.proposals},
                  {"dropped_past_horizon", out.dropped_past_horizon}};
    write_json_file(manifest, (out_dir / "sim_manifest.json").string());

    json resolved{{"output_dir", out_dir.string()},
                  {"graph", graph_settings_to_json(gs)},
                  {"simulate", json{{"variant", sc.spec.name()},
                                    {"horizon_hours", sc.horizon_hours},
                                    {"seed", sc.seed},
                                    {"max_events", sc.max_events},
                                    {"duration_lognormal",
                                     json{{"mu", sc.duration.log_mean_hours},
                                          {"sigma", sc.duration.log_sd_hours}}}}}};
    write_resolved_config(resolved, out_dir, "simulate");
    std::cerr << "simulate: " << out.store.size() << " events over " << sc.horizon_hours
              << "h (seed " << sc.seed << ")\n";
    return 0;
}

int cmd_fit(const json& cfg, const std::string& out_override, int workers_override) {
    const fs::path out_dir = resolve_out_dir(cfg, out_override);
    const json fit_cfg = cfg.value("fit", json::object());
    const GraphSettings gs = graph_settings_from(cfg);

    const std::string train_path =
        fit_cfg.value("train_events", (out_dir / "train.events").string());
    const std::string stations_path =
        fit_cfg.value("stations", (out_dir / "stations.csv").string());

    const EventStore train = read_events_file(train_path);
    const StationRegistry registry = load_stations_file(stations_path);
    if (registry.size() != train.num_nodes())
        throw argument_error("stations file and event store disagree on node count");
    const NeighborhoodGraph nbhd =
        NeighborhoodGraph::build(registry, gs.epsilon_km, gs.min_neighbors, gs.earth_radius_km);
    {
        std::ofstream nb((out_dir / "neighborhoods.csv").string());
        write_neighborhoods(nbhd, nb);
    }

    FitConfig base;
    base.max_iterations = fit_cfg.value("max_iterations", base.max_iterations);
    base.gradient_tolerance = fit_cfg.value("gradient_tolerance", base.gradient_tolerance);
    base.workers = workers_override > 0 ? workers_override : fit_cfg.value("workers", 1);
    const std::string init_mode = fit_cfg.value("initialization", std::string("cascade"));
    if (init_mode != "cascade" && init_mode != "paper_default")
        throw argument_error("initialization must be 'cascade' or 'paper_default'");
    base.init = init_mode == "cascade" ? InitMode::cascade : InitMode::paper_default;

    const std::vector<Variant> variants = variants_from(fit_cfg);
    std::map<Variant, FitResult> results;
    if (base.init == InitMode::cascade) {
        results = fit_cascade(variants, base, train, nbhd);
    } else {
        for (Variant v : variants) {
            FitConfig c = base;
            c.spec = ModelSpec{v};
            results.emplace(v, fit_all(c, train, nbhd));
        }
    }

    for (const auto& [variant, fit] : results) {
        const std::string name = ModelSpec::variant_name(variant);
        write_json_file(fit_to_json(fit), (out_dir / ("params_" + name + ".json")).string());
        std::size_t flagged = 0;
        for (const NodeFit& nf : fit.nodes)
            if (nf.status != FitStatus::converged && nf.status != FitStatus::closed_form)
                ++flagged;
        std::cerr << "fit " << name << ": " << fit.nodes.size() << " nodes, " << flagged
                  << " flagged (" << fit.wall_seconds << "s)\n";
    }

    json resolved{{"output_dir", out_dir.string()},
                  {"graph", graph_settings_to_json(gs)},
                  {"fit", json{{"train_events", train_path},
                               {"stations", stations_path},
                               {"initialization", init_mode},
                               {"max_iterations", base.max_iterations},
                               {"gradient_tolerance", base.gradient_tolerance},
                               {"workers", base.workers},
                               {"variants", [&] {
                                    json a = json::array();
                                    for (Variant v : variants) a.push_back(ModelSpec::variant_name(v));
                                    return a;
                                }()}}}};
    write_resolved_config(resolved, out_dir, "fit");
    return 0;
}

// Table-style pooled summary plus plot-ready per-model artifacts from a set
// of gof reports.
void write_summary_artifacts(const std::map<std::string, json>& gof_by_model,
                             const fs::path& out_dir) {
    std::ofstream summary((out_dir / "summary.csv").string());
    summary << "split";
    for (Variant v : kAllVariants) {
        const std::string name = ModelSpec::variant_name(v);
        if (gof_by_model.count(name)) summary << ',' << name;
    }
    summary << '\n';
    for (const std::string split : {"train", "test"}) {
        summary << split;
        for (Variant v : kAllVariants) {
            const std::string name = ModelSpec::variant_name(v);
            auto it = gof_by_model.find(name);
            if (it == gof_by_model.end()) continue;
            summary << ',';
            const json& pooled = it->second.at("pooled");
            const std::string key = "ks_" + split;
            if (pooled.contains(key)) summary << format_double(pooled.at(key).get<double>());
        }
        summary << '\n';
    }

    for (const std::string split : {"train", "test"}) {
        std::vector<std::pair<std::string, std::vector<double>>> per_model;
        for (Variant v : kAllVariants) {
            const std::string name = ModelSpec::variant_name(v);
            auto it = gof_by_model.find(name);
            if (it == gof_by_model.end()) continue;
            std::vector<double> scores;
            for (const auto& node : it->second.at("nodes")) {
                const std::string key = "ks_" + split;
                if (node.contains(key)) scores.push_back(node.at(key).get<double>());
            }
            per_model.emplace_back(name, std::move(scores));
        }
        std::ofstream box((out_dir / ("boxplot_" + split + ".csv")).string());
        write_boxplot_csv(per_model, box);
    }

    // Station-level comparison of the two leading models on the test split.
    if (gof_by_model.count("smep") && gof_by_model.count("gbmep")) {
        std::map<int, double> smep_ks, gbmep_ks;
        for (const auto& node : gof_by_model.at("smep").at("nodes"))
            if (node.contains("ks_test")) smep_ks[node.at("node").get<int>()] = node.at("ks_test");
        for (const auto& node : gof_by_model.at("gbmep").at("nodes"))
            if (node.contains("ks_test")) gbmep_ks[node.at("node").get<int>()] = node.at("ks_test");
        std::ofstream diff((out_dir / "ks_diff_test.csv").string());
        diff << "node,ks_smep,ks_gbmep,smep_minus_gbmep\n";
        for (const auto& [node, ks] : smep_ks) {
            auto it = gbmep_ks.find(node);
            if (it == gbmep_ks.end()) continue;
            diff << node << ',' << format_double(ks) << ',' << format_double(it->second) << ','
                 << format_double(ks - it->second) << '\n';
        }
    }
}

int cmd_evaluate(const json& cfg, const std::string& out_override, int workers_override) {
    const fs::path out_dir = resolve_out_dir(cfg, out_override);
    const json eval_cfg = cfg.value("evaluate", json::object());
    const json fit_cfg = cfg.value("fit", json::object());
    const GraphSettings gs = graph_settings_from(cfg);

    const std::string train_path =
        eval_cfg.value("train_events", fit_cfg.value("train_events",
                                                     (out_dir / "train.events").string()));
    const std::string test_path =
        eval_cfg.value("test_events", (out_dir / "test.events").string());
    const std::string stations_path =
        eval_cfg.value("stations", fit_cfg.value("stations",
                                                 (out_dir / "stations.csv").string()));
    const int workers = workers_override > 0 ? workers_override : eval_cfg.value("workers", 1);
    const std::size_t qq_points = eval_cfg.value("qq_points", 1024);

    const EventStore train = read_events_file(train_path);
    const EventStore test = read_events_file(test_path);
    const StationRegistry registry = load_stations_file(stations_path);
    const NeighborhoodGraph nbhd =
        NeighborhoodGraph::build(registry, gs.epsilon_km, gs.min_neighbors, gs.earth_radius_km);

    std::map<std::string, json> gof_by_model;
    for (Variant v : variants_from(fit_cfg)) {
        const std::string name = ModelSpec::variant_name(v);
        const fs::path params_path = out_dir / ("params_" + name + ".json");
        if (!fs::exists(params_path)) {
            if (fit_cfg.contains("variants"))
                throw argument_error("missing parameter file for requested model '" + name +
                                     "': " + params_path.string());
            continue; // default variant list: evaluate whatever was fitted
        }
        const FitResult fit = fit_from_json(read_json_file(params_path.string()));
        const GofReport report = evaluate(fit, train, test, nbhd, workers);

        const json gof_json = gof_to_json(report, name);
        write_json_file(gof_json, (out_dir / ("gof_" + name + ".json")).string());
        {
            std::ofstream out((out_dir / ("pernode_ks_" + name + ".csv")).string());
            write_pernode_ks_csv(report, &registry, out);
        }
        {
            std::ofstream out((out_dir / ("qq_train_" + name + ".csv")).string());
            write_qq_csv(report.pooled_train, qq_points, out);
        }
        {
            std::ofstream out((out_dir / ("qq_test_" + name + ".csv")).string());
            write_qq_csv(report.pooled_test, qq_points, out);
        }
        gof_by_model.emplace(name, gof_json);
        std::cerr << "evaluate " << name << ": pooled train KS "
                  << (report.pooled_ks_train ? format_double(*report.pooled_ks_train) : "-")
                  << ", test KS "
                  << (report.pooled_ks_test ? format_double(*report.pooled_ks_test) : "-") << '\n';
    }
    if (gof_by_model.empty()) throw argument_error("no fitted models found in " + out_dir.string());

    write_summary_artifacts(gof_by_model, out_dir);

    json resolved{{"output_dir", out_dir.string()},
                  {"graph", graph_settings_to_json(gs)},
                  {"evaluate", json{{"train_events", train_path},
                                    {"test_events", test_path},
                                    {"stations", stations_path},
                                    {"workers", workers},
                                    {"qq_points", qq_points}}}};
    write_resolved_config(resolved, out_dir, "evaluate");
    return 0;
}

int cmd_report(const json& cfg, const std::string& out_override) {
    const fs::path out_dir = resolve_out_dir(cfg, out_override);
    std::map<std::string, json> gof_by_model;
    for (Variant v : kAllVariants) {
        const std::string name = ModelSpec::variant_name(v);
        const fs::path path = out_dir / ("gof_" + name + ".json");
        if (fs::exists(path)) gof_by_model.emplace(name, read_json_file(path.string()));
    }
    if (gof_by_model.empty())
        throw argument_error("no gof_<model>.json files found in " + out_dir.string());
    write_summary_artifacts(gof_by_model, out_dir);
    std::cerr << "report: aggregated " << gof_by_model.size() << " models\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-based mutually exciting process toolkit for bike-share event streams"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int workers = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub, bool with_workers, bool with_seed) {
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        if (with_workers) sub->add_option("--workers", workers, "worker threads (overrides config)");
        if (with_seed)
            sub->add_option("--seed", seed, "RNG seed (overrides config)")
                ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* ingest_cmd = app.add_subcommand("ingest", "parse journey CSVs into event stores");
    add_common(ingest_cmd, false, false);
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "generate a synthetic event stream");
    add_common(simulate_cmd, false, true);
    CLI::App* fit_cmd = app.add_subcommand("fit", "estimate model parameters per station");
    add_common(fit_cmd, true, false);
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score fitted models on train/test");
    add_common(evaluate_cmd, true, false);
    CLI::App* report_cmd = app.add_subcommand("report", "re-aggregate stored evaluation reports");
    add_common(report_cmd, false, false);

    CLI11_PARSE(app, argc, argv);

    try {
        const json cfg = load_config(config_path);
        if (ingest_cmd->parsed()) return cmd_ingest(cfg, out_dir);
        if (simulate_cmd->parsed())
            return cmd_simulate(cfg, out_dir,
                                seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt);
        if (fit_cmd->parsed()) return cmd_fit(cfg, out_dir, workers);
        if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, out_dir, workers);
        if (report_cmd->parsed()) return cmd_report(cfg, out_dir);
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
