#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/lbfgs.hpp"
#include "gbmep/likelihood.hpp"
#include "gbmep/model.hpp"
#include "gbmep/parallel.hpp"

namespace gbmep {

// Paper-style seeds for the first cascade stage.
inline const double kInitRate = std::exp(-4.0);
inline const double kInitJump = std::exp(-4.0);
inline const double kInitDecay = 2.0 * std::exp(-4.0);
// Spatial decay used when a cascade step turns a spatial component on; a
// strictly positive start keeps the theta direction away from its flat spot.
inline constexpr double kInitSpatialDecay = 1.0;
// Values that embed a nested optimum inside a richer variant: a jump this
// small contributes nothing at double precision, and a spatial decay this
// large zeroes every neighbor weight except self.
inline constexpr double kVanishingJump = 1e-300;
inline constexpr double kVanishingSpatialReach = 1e12;

enum class FitStatus {
    converged,
    max_iterations,
    line_search_failed,
    closed_form,
    insufficient_data,
    failed
};

inline const char* fit_status_name(FitStatus s) {
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iterations: return "max_iterations";
        case FitStatus::line_search_failed: return "line_search_failed";
        case FitStatus::closed_form: return "closed_form";
        case FitStatus::insufficient_data: return "insufficient_data";
        case FitStatus::failed: return "failed";
    }
    return "?";
}

inline FitStatus parse_fit_status(const std::string& s) {
    for (FitStatus v : {FitStatus::converged, FitStatus::max_iterations,
                        FitStatus::line_search_failed, FitStatus::closed_form,
                        FitStatus::insufficient_data, FitStatus::failed})
        if (s == fit_status_name(v)) return v;
    throw argument_error("unknown fit status '" + s + "'");
}

enum class InitMode { cascade, paper_default, explicit_params };

struct FitConfig {
    ModelSpec spec;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6;
    InitMode init = InitMode::cascade;
    std::optional<NodeParams> explicit_init; // used when init == explicit_params
    int workers = 1;
};

struct NodeFit {
    NodeParams params;
    double loglik = 0.0;
    FitStatus status = FitStatus::failed;
    int iterations = 0;
    std::string message;
};

struct FitResult {
    ModelSpec spec;
    double horizon = 0.0;
    std::vector<NodeFit> nodes;
    double wall_seconds = 0.0; // diagnostic only; never serialized
};

// Bijection between valid parameters and an unconstrained vector:
//   lambda = e^{u1}, alpha = e^{u2}, beta = e^{u2} + e^{u3},
//   theta = e^{u4}, and the primed triple analogously,
// so positivity and alpha < beta hold for every u. Only the active entries
// of the variant appear, in canonical order.
inline std::vector<double> to_unconstrained(const NodeParams& p, const ModelSpec& spec) {
    std::vector<double> u;
    u.reserve(static_cast<std::size_t>(spec.active_count()));
    u.push_back(std::log(p.lambda));
    if (spec.start_active()) {
        u.push_back(std::log(p.alpha));
        u.push_back(std::log(p.beta - p.alpha));
    }
    if (spec.theta_active()) u.push_back(std::log(p.theta));
    if (spec.end_active()) {
        u.push_back(std::log(p.alpha_prime));
        u.push_back(std::log(p.beta_prime - p.alpha_prime));
    }
    if (spec.theta_prime_active()) u.push_back(std::log(p.theta_prime));
    return u;
}

inline NodeParams from_unconstrained(std::span<const double> u, const ModelSpec& spec) {
    if (u.size() != static_cast<std::size_t>(spec.active_count()))
        throw argument_error("unconstrained vector has wrong length for variant " + spec.name());
    NodeParams p;
    std::size_t i = 0;
    p.lambda = std::exp(u[i++]);
    if (spec.start_active()) {
        p.alpha = std::exp(u[i]);
        p.beta = p.alpha + std::exp(u[i + 1]);
        i += 2;
    }
    if (spec.theta_active()) p.theta = std::exp(u[i++]);
    if (spec.end_active()) {
        p.alpha_prime = std::exp(u[i]);
        p.beta_prime = p.alpha_prime + std::exp(u[i + 1]);
        i += 2;
    }
    if (spec.theta_prime_active()) p.theta_prime = std::exp(u[i++]);
    return p;
}

// Chain rule from natural-parameter partials to the unconstrained scale.
inline std::vector<double> gradient_to_unconstrained(const std::array<double, 7>& natural,
                                                     const NodeParams& p, const ModelSpec& spec) {
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(spec.active_count()));
    g.push_back(p.lambda * natural[0]);
    if (spec.start_active()) {
        g.push_back(p.alpha * (natural[1] + natural[2]));
        g.push_back((p.beta - p.alpha) * natural[2]);
    }
    if (spec.theta_active()) g.push_back(p.theta * natural[3]);
    if (spec.end_active()) {
        g.push_back(p.alpha_prime * (natural[4] + natural[5]));
        g.push_back((p.beta_prime - p.alpha_prime) * natural[5]);
    }
    if (spec.theta_prime_active()) g.push_back(p.theta_prime * natural[6]);
    return g;
}

namespace detail {

inline NodeParams sanitize_init(NodeParams p, const ModelSpec& spec) {
    // The optimizer works on logs, so components that are allowed to be zero
    // in evaluation must start strictly inside the domain.
    if (!(p.lambda > 0.0)) p.lambda = kInitRate;
    if (spec.start_active()) {
        if (!(p.alpha > 0.0)) p.alpha = kInitJump;
        if (!(p.beta > p.alpha)) p.beta = p.alpha + kInitJump;
        if (spec.theta_active() && !(p.theta > 0.0)) p.theta = kInitSpatialDecay;
    }
    if (spec.end_active()) {
        if (!(p.alpha_prime > 0.0)) p.alpha_prime = kInitJump;
        if (!(p.beta_prime > p.alpha_prime)) p.beta_prime = p.alpha_prime + kInitJump;
        if (spec.theta_prime_active() && !(p.theta_prime > 0.0))
            p.theta_prime = kInitSpatialDecay;
    }
    return p;
}

} // namespace detail

// Maximum-likelihood fit for one node. The Poisson variant is closed form;
// nodes without start events are flagged and given floor parameters; the
// rest run L-BFGS on the negative log-likelihood over the unconstrained
// scale, so every iterate maps to valid parameters.
inline NodeFit fit_node(NodeId node, const NodeParams& init, const FitConfig& config,
                        const EventStore& store, const NeighborhoodGraph& nbhd) {
    const ModelSpec spec = config.spec;
    const double horizon = store.horizon();
    if (!(horizon > 0.0)) throw argument_error("cannot fit on a zero-length window");
    const std::size_t n_events = store.starts(node).size();

    NodeFit out;
    if (spec.variant == Variant::poisson) {
        const double rate = n_events > 0 ? static_cast<double>(n_events) / horizon : 1.0 / horizon;
        out.params = NodeParams{};
        out.params.lambda = rate;
        out.loglik = static_cast<double>(n_events) * std::log(rate) - rate * horizon;
        out.status = n_events > 0 ? FitStatus::closed_form : FitStatus::insufficient_data;
        if (n_events == 0) out.message = "no start events; rate floored at 1/horizon";
        return out;
    }

    if (n_events == 0) {
        NodeParams p = detail::sanitize_init(init, spec);
        p.lambda = 1.0 / horizon;
        out.params = p;
        out.loglik = loglik_node(p, spec, node, store, nbhd).loglik;
        out.status = FitStatus::insufficient_data;
        out.message = "no start events; excitation left at initialization";
        return out;
    }

    const NodeParams start = detail::sanitize_init(init, spec);
    auto objective = [&](const std::vector<double>& u, std::vector<double>& grad) {
        NodeParams p = from_unconstrained(u, spec);
        try {
            LogLikOptions opts;
            opts.with_gradient = true;
            const LogLikResult ll = loglik_node(p, spec, node, store, nbhd, opts);
            const auto gu = gradient_to_unconstrained(ll.gradient, p, spec);
            for (std::size_t i = 0; i < gu.size(); ++i) grad[i] = -gu[i];
            return -ll.loglik;
        } catch (const error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    LbfgsOptions lopts;
    lopts.max_iterations = config.max_iterations;
    lopts.gradient_tolerance = config.gradient_tolerance;
    try {
        const LbfgsResult r = lbfgs_minimize(objective, to_unconstrained(start, spec), lopts);
        out.params = from_unconstrained(r.x, spec);
        validate_params(out.params, spec); // the bijection guarantees this holds
        out.loglik = -r.f;
        out.iterations = r.iterations;
        switch (r.status) {
            case LbfgsStatus::converged: out.status = FitStatus::converged; break;
            case LbfgsStatus::max_iterations: out.status = FitStatus::max_iterations; break;
            case LbfgsStatus::line_search_failed: out.status = FitStatus::line_search_failed; break;
        }
    } catch (const error& e) {
        out.params = start;
        out.loglik = loglik_node(start, spec, node, store, nbhd).loglik;
        out.status = FitStatus::failed;
        out.message = "node " + std::to_string(node) + ": " + e.what();
    }
    return out;
}

namespace detail {

// Evaluates a candidate start point, replacing `best` when it wins. Used to
// embed nested optima inside richer variants: the ordering of fitted
// log-likelihoods along the cascade then holds by construction.
inline void consider_candidate(NodeId node, const NodeParams& candidate, const ModelSpec& spec,
                               const EventStore& store, const NeighborhoodGraph& nbhd,
                               const FitConfig& config, NodeFit& best, bool reoptimize) {
    double value;
    try {
        value = loglik_node(candidate, spec, node, store, nbhd).loglik;
    } catch (const error&) {
        return;
    }
    if (value <= best.loglik) return;
    if (reoptimize) {
        FitConfig c = config;
        c.spec = spec;
        c.init = InitMode::explicit_params;
        NodeFit refit = fit_node(node, candidate, c, store, nbhd);
        if (refit.loglik >= value) {
            best = refit;
            return;
        }
    }
    best.params = candidate;
    best.loglik = value;
    best.status = FitStatus::converged;
    best.message = "embedded nested optimum";
}

} // namespace detail

// Fits the nested chain for one node:
//   poisson; sep and mep from the fixed seeds; smep seeded by sep + mep;
//   spmep and gbmep seeded by smep.
// Richer variants additionally consider the nested optimum embedded at the
// component boundary (vanishing new jump, or unreachable spatial decay), so
// their training log-likelihood never falls below the nested one.
inline std::map<Variant, NodeFit> fit_node_cascade(NodeId node, const FitConfig& base,
                                                   const EventStore& store,
                                                   const NeighborhoodGraph& nbhd) {
    std::map<Variant, NodeFit> out;
    auto config_for = [&](Variant v) {
        FitConfig c = base;
        c.spec = ModelSpec{v};
        return c;
    };
    const ModelSpec sep{Variant::sep}, mep{Variant::mep}, smep{Variant::smep},
        spmep{Variant::spmep}, gbmep{Variant::gbmep};

    out[Variant::poisson] =
        fit_node(node, NodeParams{}, config_for(Variant::poisson), store, nbhd);

    NodeParams seed;
    seed.lambda = kInitRate;
    seed.alpha = kInitJump;
    seed.beta = kInitDecay;
    seed.alpha_prime = kInitJump;
    seed.beta_prime = kInitDecay;
    out[Variant::sep] = fit_node(node, seed, config_for(Variant::sep), store, nbhd);
    out[Variant::mep] = fit_node(node, seed, config_for(Variant::mep), store, nbhd);

    const NodeParams& sep_hat = out[Variant::sep].params;
    const NodeParams& mep_hat = out[Variant::mep].params;

    NodeParams smep_init = restrict_params(sep_hat, sep, smep);
    smep_init.lambda = 0.5 * (sep_hat.lambda + mep_hat.lambda);
    smep_init.alpha_prime = mep_hat.alpha_prime;
    smep_init.beta_prime = mep_hat.beta_prime;
    out[Variant::smep] = fit_node(node, smep_init, config_for(Variant::smep), store, nbhd);
    {
        NodeParams embed_sep = restrict_params(sep_hat, sep, smep);
        embed_sep.alpha_prime = kVanishingJump;
        embed_sep.beta_prime = kInitDecay;
        detail::consider_candidate(node, embed_sep, smep, store, nbhd, base, out[Variant::smep],
                                   true);
        NodeParams embed_mep = restrict_params(mep_hat, mep, smep);
        embed_mep.alpha = kVanishingJump;
        embed_mep.beta = kInitDecay;
        detail::consider_candidate(node, embed_mep, smep, store, nbhd, base, out[Variant::smep],
                                   true);
    }

    const NodeParams& smep_hat = out[Variant::smep].params;
    ParamSeeds spatial_seeds;
    spatial_seeds.theta = kInitSpatialDecay;

    NodeParams spmep_init = restrict_params(smep_hat, smep, spmep, spatial_seeds);
    out[Variant::spmep] = fit_node(node, spmep_init, config_for(Variant::spmep), store, nbhd);

    NodeParams gbmep_init = restrict_params(smep_hat, smep, gbmep, spatial_seeds);
    out[Variant::gbmep] = fit_node(node, gbmep_init, config_for(Variant::gbmep), store, nbhd);
    {
        NodeParams embed_smep = restrict_params(smep_hat, smep, gbmep);
        embed_smep.theta = kVanishingSpatialReach;
        embed_smep.theta_prime = kVanishingSpatialReach;
        detail::consider_candidate(node, embed_smep, gbmep, store, nbhd, base, out[Variant::gbmep],
                                   false);
    }
    return out;
}

// Fits every node of the store for all requested variants, distributing
// nodes across workers. Output is independent of the worker count.
inline std::map<Variant, FitResult> fit_cascade(const std::vector<Variant>& variants,
                                                const FitConfig& base, const EventStore& store,
                                                const NeighborhoodGraph& nbhd) {
    if (store.num_nodes() != nbhd.num_nodes())
        throw argument_error("event store and neighborhood graph disagree on node count");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t m = store.num_nodes();
    std::vector<std::map<Variant, NodeFit>> per_node(m);
    parallel_for(m, base.workers, [&](std::size_t i) {
        per_node[i] = fit_node_cascade(static_cast<NodeId>(i), base, store, nbhd);
    });
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::map<Variant, FitResult> out;
    for (Variant v : variants) {
        FitResult r;
        r.spec = ModelSpec{v};
        r.horizon = store.horizon();
        r.wall_seconds = elapsed;
        r.nodes.reserve(m);
        for (std::size_t i = 0; i < m; ++i) r.nodes.push_back(per_node[i][v]);
        out.emplace(v, std::move(r));
    }
    return out;
}

// Fits a single variant for every node, honoring the configured
// initialization mode.
inline FitResult fit_all(const FitConfig& config, const EventStore& store,
                         const NeighborhoodGraph& nbhd) {
    if (store.num_nodes() != nbhd.num_nodes())
        throw argument_error("event store and neighborhood graph disagree on node count");
    if (config.init == InitMode::cascade)
        return fit_cascade({config.spec.variant}, config, store, nbhd)
            .at(config.spec.variant);
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t m = store.num_nodes();
    FitResult r;
    r.spec = config.spec;
    r.horizon = store.horizon();
    r.nodes.resize(m);
    NodeParams init;
    if (config.init == InitMode::explicit_params) {
        if (!config.explicit_init)
            throw argument_error("explicit initialization requested without parameters");
        init = *config.explicit_init;
    } else {
        init.lambda = kInitRate;
        init.alpha = kInitJump;
        init.beta = kInitDecay;
        init.alpha_prime = kInitJump;
        init.beta_prime = kInitDecay;
        init.theta = kInitSpatialDecay;
        init.theta_prime = kInitSpatialDecay;
    }
    parallel_for(m, config.workers, [&](std::size_t i) {
        r.nodes[i] = fit_node(static_cast<NodeId>(i), init, config, store, nbhd);
    });
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

} // namespace gbmep
