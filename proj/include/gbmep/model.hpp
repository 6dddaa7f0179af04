#pragma once

#include <array>
#include <cmath>
#include <string>

#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/geometry.hpp"

namespace gbmep {

// The six model variants are nested restrictions of one intensity:
//
//   lambda_i(t) = lambda_i
//     + sum_j exp(-theta  gamma(i,j)) 1{gamma(i,j) <= eps_i} alpha  sum_{t_{j,k} < t} exp(-beta  (t - t_{j,k}))
//     + sum_j exp(-theta' gamma(i,j)) 1{gamma(i,j) <= eps_i} alpha' sum_{t'_{j,h} < t} exp(-beta' (t - t'_{j,h}))
//
// The start-time and end-time components can each be absent, restricted to
// the node itself, or extended over the epsilon-neighborhood.
enum class Variant { poisson, mep, sep, smep, spmep, gbmep };

enum class Scope { none, self_only, graph };

struct ModelSpec {
    Variant variant = Variant::poisson;

    constexpr Scope start_scope() const {
        switch (variant) {
            case Variant::poisson: return Scope::none;
            case Variant::mep: return Scope::none;
            case Variant::sep: return Scope::self_only;
            case Variant::smep: return Scope::self_only;
            case Variant::spmep: return Scope::graph;
            case Variant::gbmep: return Scope::graph;
        }
        return Scope::none;
    }

    constexpr Scope end_scope() const {
        switch (variant) {
            case Variant::poisson: return Scope::none;
            case Variant::mep: return Scope::self_only;
            case Variant::sep: return Scope::none;
            case Variant::smep: return Scope::self_only;
            case Variant::spmep: return Scope::none;
            case Variant::gbmep: return Scope::graph;
        }
        return Scope::none;
    }

    constexpr bool start_active() const { return start_scope() != Scope::none; }
    constexpr bool end_active() const { return end_scope() != Scope::none; }
    constexpr bool theta_active() const { return start_scope() == Scope::graph; }
    constexpr bool theta_prime_active() const { return end_scope() == Scope::graph; }

    // Active flags in canonical order: lambda, alpha, beta, theta,
    // alpha', beta', theta'.
    constexpr std::array<bool, 7> active_mask() const {
        return {true,           start_active(), start_active(), theta_active(),
                end_active(),   end_active(),   theta_prime_active()};
    }

    constexpr int active_count() const {
        int n = 0;
        for (bool b : active_mask()) n += b ? 1 : 0;
        return n;
    }

    std::string name() const { return std::string(variant_name(variant)); }

    static constexpr const char* variant_name(Variant v) {
        switch (v) {
            case Variant::poisson: return "poisson";
            case Variant::mep: return "mep";
            case Variant::sep: return "sep";
            case Variant::smep: return "smep";
            case Variant::spmep: return "spmep";
            case Variant::gbmep: return "gbmep";
        }
        return "?";
    }

    static Variant parse_variant(const std::string& s) {
        for (Variant v : {Variant::poisson, Variant::mep, Variant::sep, Variant::smep,
                          Variant::spmep, Variant::gbmep})
            if (s == variant_name(v)) return v;
        throw argument_error("unknown model variant '" + s + "'");
    }
};

inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::poisson, Variant::mep, Variant::sep,
    Variant::smep,    Variant::spmep, Variant::gbmep};

// Per-node parameters. Inactive entries sit at neutral values: a zero jump
// removes a component, a zero spatial decay leaves neighbors unweighted.
struct NodeParams {
    double lambda = 0.0;
    double alpha = 0.0;
    double beta = 1.0;
    double theta = 0.0;
    double alpha_prime = 0.0;
    double beta_prime = 1.0;
    double theta_prime = 0.0;
};

// A zero jump is allowed at evaluation time (it removes the component, the
// neutral value for nesting identities); fitted parameters are always
// strictly positive through the unconstrained bijection.
inline void validate_params(const NodeParams& p, const ModelSpec& spec) {
    if (!(p.lambda > 0.0) || !std::isfinite(p.lambda))
        throw domain_error("baseline rate must be positive and finite");
    if (spec.start_active()) {
        if (!(p.alpha >= 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.beta))
            throw domain_error("start-excitation jump must be nonnegative and finite");
        if (!(p.alpha < p.beta))
            throw domain_error("start-excitation requires alpha < beta");
        if (!(p.theta >= 0.0) || !std::isfinite(p.theta))
            throw domain_error("spatial decay theta must be >= 0");
    }
    if (spec.end_active()) {
        if (!(p.alpha_prime >= 0.0) || !std::isfinite(p.alpha_prime) ||
            !std::isfinite(p.beta_prime))
            throw domain_error("end-excitation jump must be nonnegative and finite");
        if (!(p.alpha_prime < p.beta_prime))
            throw domain_error("end-excitation requires alpha' < beta'");
        if (!(p.theta_prime >= 0.0) || !std::isfinite(p.theta_prime))
            throw domain_error("spatial decay theta' must be >= 0");
    }
}

// Applies fn(neighbor, distance) for every node in the scope of `node`.
template <typename Fn>
inline void for_scope(Scope scope, NodeId node, const NeighborhoodGraph& nbhd, Fn&& fn) {
    switch (scope) {
        case Scope::none: break;
        case Scope::self_only: fn(node, 0.0); break;
        case Scope::graph:
            for (const Neighbor& nb : nbhd.neighbors(node)) fn(nb.node, nb.distance_km);
            break;
    }
}

// Conditional intensity of node `node` at time t, summing over every event
// strictly before t. This is the deliberate O(events) reference path; the
// likelihood module never calls it.
inline double cif(const NodeParams& p, const ModelSpec& spec, NodeId node, double t,
                  const EventStore& store, const NeighborhoodGraph& nbhd) {
    validate_params(p, spec);
    double value = p.lambda;
    for_scope(spec.start_scope(), node, nbhd, [&](NodeId j, double gamma) {
        const double kappa = std::exp(-p.theta * gamma);
        double sum = 0.0;
        for (double tj : store.starts(j)) {
            if (!(tj < t)) break;
            sum += std::exp(-p.beta * (t - tj));
        }
        value += kappa * p.alpha * sum;
    });
    for_scope(spec.end_scope(), node, nbhd, [&](NodeId j, double gamma) {
        const double kappa = std::exp(-p.theta_prime * gamma);
        double sum = 0.0;
        for (double tj : store.ends(j)) {
            if (!(tj < t)) break;
            sum += std::exp(-p.beta_prime * (t - tj));
        }
        value += kappa * p.alpha_prime * sum;
    });
    return value;
}

// Seed values used when a cascade step activates a parameter that the source
// variant did not carry.
struct ParamSeeds {
    double alpha = std::exp(-4.0);
    double beta = 2.0 * std::exp(-4.0);
    double theta = 0.0;
};

// Carries parameters between nested variants: shared active entries copy
// over, newly activated entries take seed values, deactivated entries reset
// to neutral.
inline NodeParams restrict_params(const NodeParams& source, const ModelSpec& from,
                                  const ModelSpec& to, const ParamSeeds& seeds = {}) {
    NodeParams out;
    out.lambda = source.lambda;
    if (to.start_active()) {
        out.alpha = from.start_active() ? source.alpha : seeds.alpha;
        out.beta = from.start_active() ? source.beta : seeds.beta;
    }
    if (to.theta_active()) out.theta = from.theta_active() ? source.theta : seeds.theta;
    if (to.end_active()) {
        out.alpha_prime = from.end_active() ? source.alpha_prime : seeds.alpha;
        out.beta_prime = from.end_active() ? source.beta_prime : seeds.beta;
    }
    if (to.theta_prime_active())
        out.theta_prime = from.theta_prime_active() ? source.theta_prime : seeds.theta;
    return out;
}

} // namespace gbmep
