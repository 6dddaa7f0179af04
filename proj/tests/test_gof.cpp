#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "gbmep/gof.hpp"
#include "gbmep/simulate.hpp"
#include "test_support.hpp"

using namespace gbmep;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("poisson p-values are exponential transforms of the gaps") {
    // lambda = 1, consecutive gap log 2 -> p = 1/2.
    std::vector<EventRecord> records = {{0, 0, 1.0, 9.0},
                                        {0, 0, 1.0 + std::log(2.0), 9.5}};
    EventStore store(std::move(records), 1, 10.0);
    NeighborhoodGraph self = NeighborhoodGraph::self_only(1);
    NodeParams p;
    p.lambda = 1.0;
    const auto pv = pvalues_node(p, ModelSpec{Variant::poisson}, 0, store, self, 0.0, 10.0);
    REQUIRE(pv.size() == 2);
    CHECK_THAT(pv[0], WithinAbs(std::exp(-1.0), 1e-12));
    CHECK_THAT(pv[1], WithinAbs(0.5, 1e-12));
}

TEST_CASE("first p-value uses a zero compensator baseline") {
    auto w = testsupport::worked_example();
    const ModelSpec spec{Variant::gbmep};
    const auto pv = pvalues_node(w.params[0], spec, 0, w.store, w.nbhd, 0.0, 10.0);
    REQUIRE(pv.size() == 2); // node 0 starts at 1.25 and 4.0
    const double lam1 = compensator_node(w.params[0], spec, 0, 1.25, w.store, w.nbhd);
    CHECK_THAT(pv[0], WithinRel(std::exp(-lam1), 1e-10));
}

TEST_CASE("reduced recursive p-values equal compensator differences") {
    std::mt19937_64 rng(401);
    StationRegistry reg = testsupport::random_registry(rng, 3, 0.004);
    NeighborhoodGraph nbhd = NeighborhoodGraph::build(reg, 0.5, 1);
    EventStore store = testsupport::random_store(rng, 3, 150, 50.0);
    const ModelSpec spec{Variant::gbmep};
    const NodeParams p = testsupport::random_params(rng, spec);

    for (NodeId node = 0; node < 3; ++node) {
        const auto pv = pvalues_node(p, spec, node, store, nbhd, 0.0, 50.0);
        const auto own = store.starts(node);
        REQUIRE(pv.size() == own.size());
        for (double v : pv) {
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
        }
        double prev = 0.0;
        double max_diff = 0.0;
        for (std::size_t k = 0; k < own.size(); ++k) {
            const double direct =
                std::exp(-(compensator_node(p, spec, node, own[k], store, nbhd) -
                           compensator_node(p, spec, node, prev, store, nbhd)));
            max_diff = std::max(max_diff, std::abs(direct - pv[k]));
            prev = own[k];
        }
        CHECK(max_diff < 1e-10);
    }
}

TEST_CASE("ks_score on known samples") {
    CHECK(ks_score({0.5}) == 0.5);
    CHECK_THAT(ks_score({0.25, 0.5, 0.75}), WithinAbs(0.25, 1e-15));

    // Perfectly uniform grid (2k-1)/2n.
    std::vector<double> grid;
    for (int k = 1; k <= 100; ++k) grid.push_back((2.0 * k - 1.0) / 200.0);
    CHECK_THAT(ks_score(grid), WithinAbs(0.005, 1e-15));

    CHECK_THROWS_AS(ks_score({}), argument_error);
}

TEST_CASE("ks_score equals a brute-force supremum over a fine grid") {
    std::mt19937_64 rng(409);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> sample;
        for (int i = 0; i < 40; ++i) sample.push_back(u(rng));
        const double fast = ks_score(sample);
        double brute = 0.0;
        std::vector<double> sorted = sample;
        std::sort(sorted.begin(), sorted.end());
        for (int g = 0; g <= 100000; ++g) {
            const double x = g / 100000.0;
            const double ecdf_strict =
                static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), x) -
                                    sorted.begin()) /
                static_cast<double>(sorted.size());
            brute = std::max(brute, std::abs(x - ecdf_strict));
        }
        CHECK_THAT(fast, WithinAbs(brute, 1e-4));
        CHECK(fast >= brute - 1e-12); // the exact sup dominates any grid value
    }
}

TEST_CASE("pooled score is invariant to concatenation order") {
    std::mt19937_64 rng(419);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a, b;
    for (int i = 0; i < 50; ++i) a.push_back(u(rng));
    for (int i = 0; i < 70; ++i) b.push_back(u(rng));
    std::vector<double> ab = a, ba = b;
    ab.insert(ab.end(), b.begin(), b.end());
    ba.insert(ba.end(), a.begin(), a.end());
    CHECK(ks_score(ab) == ks_score(ba));
}

TEST_CASE("evaluate on well-specified poisson data") {
    // Simulate a 2-node poisson stream, fit the closed form on train, and
    // check the pooled train KS sits below the 1% critical value.
    SimConfig sim;
    sim.spec = ModelSpec{Variant::poisson};
    NodeParams p;
    p.lambda = 1.5;
    sim.params = {p, p};
    sim.horizon_hours = 3000.0;
    sim.seed = 5;
    NeighborhoodGraph self = NeighborhoodGraph::self_only(2);
    const SimOutput data = simulate(sim, self);
    auto [train, test] = data.store.split_at(2000.0);

    FitConfig cfg;
    cfg.spec = ModelSpec{Variant::poisson};
    cfg.init = InitMode::paper_default;
    const FitResult fit = fit_all(cfg, train, self);
    const GofReport report = evaluate(fit, train, test, self);

    REQUIRE(report.pooled_ks_train.has_value());
    REQUIRE(report.pooled_ks_test.has_value());
    CHECK(*report.pooled_ks_train < testsupport::ks_critical_1pct(report.pooled_train.size()));

    // A deliberately wrong rate concentrates the p-values near zero.
    FitResult wrong = fit;
    for (NodeFit& nf : wrong.nodes) nf.params.lambda *= 10.0;
    const GofReport bad = evaluate(wrong, train, test, self);
    CHECK(*bad.pooled_ks_train > 0.5);
}

TEST_CASE("per-node p-values are uniform under the true model") {
    // 100 light replicates; each must pass a 1% KS test in at least 95.
    NeighborhoodGraph self = NeighborhoodGraph::self_only(1);
    NodeParams truth;
    truth.lambda = 0.4;
    truth.alpha = 0.4;
    truth.beta = 1.2;
    int passed = 0;
    for (int rep = 0; rep < 100; ++rep) {
        SimConfig sim;
        sim.spec = ModelSpec{Variant::sep};
        sim.params = {truth};
        sim.horizon_hours = 400.0;
        sim.seed = 1000 + rep;
        const SimOutput data = simulate(sim, self);
        if (data.store.starts(0).empty()) continue;
        const auto pv = pvalues_node(truth, sim.spec, 0, data.store, self, 0.0, 400.0);
        if (ks_score(pv) < testsupport::ks_critical_1pct(pv.size())) ++passed;
    }
    CHECK(passed >= 95);
}

TEST_CASE("evaluate keeps test history conditioned on training events") {
    auto w = testsupport::worked_example();
    auto [train, test] = w.store.split_at(3.0);
    FitResult fit;
    fit.spec = ModelSpec{Variant::gbmep};
    fit.horizon = train.horizon();
    for (NodeId i = 0; i < 3; ++i) fit.nodes.push_back({w.params[i], 0.0, FitStatus::converged, 0, ""});
    const GofReport report = evaluate(fit, train, test, w.nbhd);

    // Node 0 starts at 1.25 (train window) and 4.0 (test window).
    CHECK(report.nodes[0].p_train.size() == 1);
    CHECK(report.nodes[0].p_test.size() == 1);
    // The test p-value integrates from the previous own start (1.25), over
    // the full history, matching a direct compensator difference on the
    // merged store.
    const EventStore merged = EventStore::merge(train, test);
    const double expected = std::exp(
        -(compensator_node(w.params[0], fit.spec, 0, 4.0, merged, w.nbhd) -
          compensator_node(w.params[0], fit.spec, 0, 1.25, merged, w.nbhd)));
    CHECK_THAT(report.nodes[0].p_test[0], WithinRel(expected, 1e-10));

    // Pooled sizes add up.
    std::size_t total_train = 0;
    for (const auto& n : report.nodes) total_train += n.p_train.size();
    CHECK(report.pooled_train.size() == total_train);
}
