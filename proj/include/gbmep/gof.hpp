#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/fit.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/likelihood.hpp"
#include "gbmep/model.hpp"
#include "gbmep/parallel.hpp"

namespace gbmep {

// Upper-tail p-values for the start events of `node` falling in
// (window_lo, window_hi]:
//
//   p_k = exp{ -(Lambda_i(t_{i,k}) - Lambda_i(t_{i,k-1})) }
//
// where t_{i,k-1} is the previous own start event in the store (0 before the
// first). The compensator differences come from the kernel recursion over
// the full history of the store, so events before the window still shape
// the intensity; only the emitted set is restricted. Under a correctly
// specified model the values are uniform on (0, 1).
inline std::vector<double> pvalues_node(const NodeParams& p, const ModelSpec& spec, NodeId node,
                                        const EventStore& store, const NeighborhoodGraph& nbhd,
                                        double window_lo, double window_hi) {
    if (!(window_lo >= 0.0) || !(window_hi <= store.horizon()) || !(window_lo < window_hi))
        throw argument_error("p-value window must satisfy 0 <= lo < hi <= horizon");
    LogLikOptions opts;
    opts.with_increments = true;
    const LogLikResult ll = loglik_node(p, spec, node, store, nbhd, opts);
    const auto own = store.starts(node);
    std::vector<double> pvals;
    for (std::size_t k = 0; k < own.size(); ++k) {
        if (own[k] <= window_lo || own[k] > window_hi) continue;
        const double value = std::exp(-ll.increments[k]);
        pvals.push_back(std::max(value, std::numeric_limits<double>::min()));
    }
    return pvals;
}

// Exact Kolmogorov-Smirnov discrepancy between a p-value sample and the
// uniform distribution, taking the supremum from both sides of every order
// statistic.
inline double ks_score(std::vector<double> pvals) {
    if (pvals.empty()) throw argument_error("KS score of an empty sample is undefined");
    std::sort(pvals.begin(), pvals.end());
    const double n = static_cast<double>(pvals.size());
    double d = 0.0;
    for (std::size_t i = 0; i < pvals.size(); ++i) {
        const double below = pvals[i] - static_cast<double>(i) / n;
        const double above = static_cast<double>(i + 1) / n - pvals[i];
        d = std::max({d, below, above});
    }
    return d;
}

struct NodeGof {
    NodeId node = 0;
    std::vector<double> p_train;
    std::vector<double> p_test;
    std::optional<double> ks_train;
    std::optional<double> ks_test;
};

struct GofReport {
    std::vector<NodeGof> nodes;
    std::optional<double> pooled_ks_train;
    std::optional<double> pooled_ks_test;
    std::vector<double> pooled_train;
    std::vector<double> pooled_test;
    std::size_t skipped_nodes = 0;
};

// Train/test evaluation: training p-values come from the training store over
// (0, T*]; test p-values come from the merged store over (T*, T], so the
// test-window intensity is conditioned on the full history. Per-node and
// pooled (all stations concatenated) KS scores summarize both splits.
inline GofReport evaluate(const FitResult& fit, const EventStore& train, const EventStore& test,
                          const NeighborhoodGraph& nbhd, int workers = 1) {
    if (train.num_nodes() != test.num_nodes() || train.num_nodes() != nbhd.num_nodes())
        throw argument_error("train/test stores and graph disagree on node count");
    if (std::abs(fit.horizon - train.horizon()) > 1e-9 * std::max(1.0, train.horizon()))
        throw argument_error("fit was not produced on this training store");
    const EventStore full = EventStore::merge(train, test);
    const double t_star = train.horizon();
    const double horizon = full.horizon();

    const std::size_t m = train.num_nodes();
    GofReport report;
    report.nodes.resize(std::min(m, fit.nodes.size()));
    if (fit.nodes.size() < m) report.skipped_nodes = m - fit.nodes.size();

    parallel_for(report.nodes.size(), workers, [&](std::size_t i) {
        const NodeId node = static_cast<NodeId>(i);
        NodeGof g;
        g.node = node;
        const NodeParams& p = fit.nodes[i].params;
        g.p_train = pvalues_node(p, fit.spec, node, train, nbhd, 0.0, t_star);
        g.p_test = pvalues_node(p, fit.spec, node, full, nbhd, t_star, horizon);
        if (!g.p_train.empty()) g.ks_train = ks_score(g.p_train);
        if (!g.p_test.empty()) g.ks_test = ks_score(g.p_test);
        report.nodes[i] = std::move(g);
    });

    for (const NodeGof& g : report.nodes) {
        report.pooled_train.insert(report.pooled_train.end(), g.p_train.begin(), g.p_train.end());
        report.pooled_test.insert(report.pooled_test.end(), g.p_test.begin(), g.p_test.end());
    }
    if (!report.pooled_train.empty()) report.pooled_ks_train = ks_score(report.pooled_train);
    if (!report.pooled_test.empty()) report.pooled_ks_test = ks_score(report.pooled_test);
    return report;
}

} // namespace gbmep
