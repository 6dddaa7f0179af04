#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gbmep/gbmep.hpp"
#include "test_support.hpp"

using namespace gbmep;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gbmep_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string cli_path() {
    const char* env = std::getenv("GBMEP_CLI");
    REQUIRE(env != nullptr);
    return env;
}

int run_cli(const std::string& args, const fs::path& dir, const std::string& tag) {
    const std::string cmd = cli_path() + " " + args + " >" + (dir / (tag + ".out")).string() +
                            " 2>" + (dir / (tag + ".err")).string();
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Synthetic journeys + stations + config rooted at dir, returning the config
// path. Small but busy enough for every node to carry events.
fs::path prepare_inputs(const fs::path& dir, int workers) {
    StationRegistry reg = make_grid_network(2, 0.3);
    NodeParams p;
    p.lambda = 0.5;
    p.alpha = 0.3;
    p.beta = 2.0;
    p.theta = 1.0;
    p.alpha_prime = 0.2;
    p.beta_prime = 3.0;
    p.theta_prime = 1.0;
    SimConfig sim;
    sim.spec = ModelSpec{Variant::gbmep};
    sim.params.assign(4, p);
    sim.horizon_hours = 480.0;
    sim.duration.log_mean_hours = -2.0;
    sim.seed = 2024;
    NeighborhoodGraph nbhd = NeighborhoodGraph::build(reg, 0.5, 3);
    const SimOutput out = simulate(sim, nbhd);

    write_registry_file(reg, (dir / "stations.csv").string());
    testsupport::write_journeys_csv(out.store, reg, (dir / "journeys.csv").string(),
                                    "2022-03-02");

    json cfg{{"output_dir", (dir / "out").string()},
             {"data",
              json{{"journeys", json::array({(dir / "journeys.csv").string()})},
                   {"stations", (dir / "stations.csv").string()},
                   {"window", json{{"start", "2022-03-02"},
                                   {"split", "2022-03-12"},
                                   {"end", "2022-03-22"}}}}},
             {"graph", json{{"epsilon_km", 0.5}, {"min_neighbors", 3}}},
             {"fit", json{{"variants", json::array({"poisson", "sep", "smep"})},
                          {"initialization", "cascade"},
                          {"workers", workers}}},
             {"evaluate", json{{"workers", workers}, {"qq_points", 64}}}};
    const fs::path cfg_path = dir / "config.json";
    std::ofstream f(cfg_path);
    f << cfg.dump(2);
    return cfg_path;
}

std::map<std::string, std::string> artifact_bytes(const fs::path& out_dir) {
    std::map<std::string, std::string> bytes;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("resolved_config_", 0) == 0) continue; // echoes settings like workers
        bytes[name] = slurp(entry.path());
    }
    return bytes;
}

} // namespace

TEST_CASE("cli pipeline: ingest, fit, evaluate, report") {
    TempDir tmp;
    const fs::path cfg = prepare_inputs(tmp.path, 1);

    REQUIRE(run_cli("ingest --config " + cfg.string(), tmp.path, "ingest") == 0);
    const fs::path out = tmp.path / "out";
    CHECK(fs::exists(out / "train.events"));
    CHECK(fs::exists(out / "test.events"));
    CHECK(fs::exists(out / "stations.csv"));
    CHECK(fs::exists(out / "ingest_report.json"));

    REQUIRE(run_cli("fit --config " + cfg.string(), tmp.path, "fit") == 0);
    CHECK(fs::exists(out / "params_poisson.json"));
    CHECK(fs::exists(out / "params_sep.json"));
    CHECK(fs::exists(out / "params_smep.json"));
    CHECK(fs::exists(out / "neighborhoods.csv"));

    REQUIRE(run_cli("evaluate --config " + cfg.string(), tmp.path, "evaluate") == 0);
    CHECK(fs::exists(out / "gof_smep.json"));
    CHECK(fs::exists(out / "pernode_ks_smep.csv"));
    CHECK(fs::exists(out / "qq_train_smep.csv"));
    CHECK(fs::exists(out / "summary.csv"));
    CHECK(fs::exists(out / "boxplot_test.csv"));

    // summary has a header plus train and test rows, one column per model.
    std::ifstream summary(out / "summary.csv");
    std::string header, train_row, test_row;
    std::getline(summary, header);
    std::getline(summary, train_row);
    std::getline(summary, test_row);
    CHECK(header == "split,poisson,sep,smep");
    CHECK(train_row.rfind("train,", 0) == 0);
    CHECK(test_row.rfind("test,", 0) == 0);

    REQUIRE(run_cli("report --config " + cfg.string(), tmp.path, "report") == 0);

    // The poisson fit exposes the closed-form rate per node.
    const json params = json::parse(slurp(out / "params_poisson.json"));
    const EventStore train = read_events_file((out / "train.events").string());
    for (const auto& node : params.at("nodes")) {
        const NodeId id = node.at("node").get<NodeId>();
        const double expected =
            static_cast<double>(train.starts(id).size()) / train.horizon();
        CHECK(node.at("lambda").get<double>() == expected);
    }
}

TEST_CASE("cli runs are byte-deterministic across repeats and worker counts") {
    TempDir tmp1, tmp2;
    const fs::path cfg1 = prepare_inputs(tmp1.path, 1);
    const fs::path cfg2 = prepare_inputs(tmp2.path, 8);

    for (const auto& [cfg, dir] : {std::pair(cfg1, tmp1.path), std::pair(cfg2, tmp2.path)}) {
        REQUIRE(run_cli("ingest --config " + cfg.string(), dir, "ingest") == 0);
        REQUIRE(run_cli("fit --config " + cfg.string(), dir, "fit") == 0);
        REQUIRE(run_cli("evaluate --config " + cfg.string(), dir, "evaluate") == 0);
    }
    const auto bytes1 = artifact_bytes(tmp1.path / "out");
    const auto bytes2 = artifact_bytes(tmp2.path / "out");
    REQUIRE(bytes1.size() == bytes2.size());
    for (const auto& [name, content] : bytes1) {
        INFO("artifact " << name);
        REQUIRE(bytes2.count(name) == 1);
        CHECK(content == bytes2.at(name));
    }
}

TEST_CASE("cli simulate is deterministic per seed and validates parameters") {
    TempDir tmp;
    json cfg{{"output_dir", (tmp.path / "o1").string()},
             {"graph", json{{"epsilon_km", 0.5}}},
             {"simulate", json{{"grid", json{{"side", 2}, {"spacing_km", 0.3}}},
                               {"variant", "sep"},
                               {"params", json{{"lambda", 0.4}, {"alpha", 0.3}, {"beta", 1.5}}},
                               {"horizon_hours", 200.0},
                               {"seed", 9}}}};
    const fs::path cfg_path = tmp.path / "sim.json";
    {
        std::ofstream f(cfg_path);
        f << cfg.dump(2);
    }
    REQUIRE(run_cli("simulate --config " + cfg_path.string(), tmp.path, "sim1") == 0);
    REQUIRE(run_cli("simulate --config " + cfg_path.string() + " --out " +
                        (tmp.path / "o2").string(),
                    tmp.path, "sim2") == 0);
    CHECK(slurp(tmp.path / "o1" / "sim.events") == slurp(tmp.path / "o2" / "sim.events"));

    // alpha >= beta must fail with a constraint message.
    cfg["simulate"]["params"]["alpha"] = 2.0;
    {
        std::ofstream f(cfg_path);
        f << cfg.dump(2);
    }
    CHECK(run_cli("simulate --config " + cfg_path.string(), tmp.path, "sim3") != 0);
    const std::string err = slurp(tmp.path / "sim3.err");
    CHECK(err.find("alpha") != std::string::npos);
}

TEST_CASE("cli structural failures exit nonzero with a diagnostic") {
    TempDir tmp;
    const fs::path cfg = prepare_inputs(tmp.path, 1);

    // Break the schema: the start-time column name does not exist.
    json broken = json::parse(slurp(cfg));
    broken["data"]["columns"] = json{{"start_time", "No Such Column"}};
    const fs::path bad_cfg = tmp.path / "bad.json";
    {
        std::ofstream f(bad_cfg);
        f << broken.dump(2);
    }
    CHECK(run_cli("ingest --config " + bad_cfg.string(), tmp.path, "bad_ingest") != 0);
    CHECK(slurp(tmp.path / "bad_ingest.err").find("No Such Column") != std::string::npos);

    REQUIRE(run_cli("ingest --config " + cfg.string(), tmp.path, "ingest") == 0);

    // Missing fit file fails evaluate, naming the model.
    json missing = json::parse(slurp(cfg));
    missing["output_dir"] = (tmp.path / "fresh").string();
    missing["fit"]["variants"] = json::array({"gbmep"});
    missing["fit"]["train_events"] = (tmp.path / "out" / "train.events").string();
    missing["evaluate"] = json{{"test_events", (tmp.path / "out" / "test.events").string()},
                               {"stations", (tmp.path / "out" / "stations.csv").string()}};
    const fs::path missing_cfg = tmp.path / "missing.json";
    {
        std::ofstream f(missing_cfg);
        f << missing.dump(2);
    }
    fs::create_directories(tmp.path / "fresh");
    CHECK(run_cli("evaluate --config " + missing_cfg.string(), tmp.path, "bad_eval") != 0);
    CHECK(slurp(tmp.path / "bad_eval.err").find("gbmep") != std::string::npos);

    // Corrupt events file fails fit.
    {
        std::ofstream f(tmp.path / "out" / "train.events");
        f << "garbage\n";
    }
    CHECK(run_cli("fit --config " + cfg.string(), tmp.path, "bad_fit") != 0);
}
