#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/model.hpp"

namespace gbmep {

// Floor for the argument of log in the event-term sum. A positive baseline
// makes true zeros impossible; the floor only guards extreme parameter
// combinations visited by a line search.
inline constexpr double kLogFloor = 1e-300;

// One excitation source feeding a node: the event times of one neighbor
// together with its spatial weight kappa = exp(-theta * gamma).
struct KernelChannel {
    double gamma = 0.0;
    double kappa = 1.0;
    std::span<const double> times;
    std::size_t cursor = 0; // events consumed so far = N_j(prev_t)
    double decayed_sum = 0.0;      // A_j  = sum_{l <= cursor} exp(-beta (prev_t - t_l))
    double decayed_lag_sum = 0.0;  // dA_j/d(-beta) = sum (prev_t - t_l) exp(-beta (prev_t - t_l))
};

// Recursive state for one exponential-kernel component of a node's process.
// advance(t) moves every channel from the previous own-event time to t using
//
//   A_j(k) = exp(-beta (t_k - t_{k-1})) A_j(k-1)
//          + sum over events of j in [N_j(t_{k-1})+1, N_j(t_k)] of exp(-beta (t_k - t_{j,l}))
//
// so each neighbor event is consumed exactly once across the sweep. Events at
// exactly t are excluded (left-continuous counting).
struct KernelRecursion {
    double beta = 1.0;
    bool with_gradient = false;
    std::vector<KernelChannel> channels;
    double prev_t = 0.0;

    // Aggregates refreshed by advance():
    double weighted_sum = 0.0;       // S = sum_j kappa_j A_j(k)
    double distance_weighted = 0.0;  // G = sum_j gamma_j kappa_j A_j(k)
    double lag_weighted = 0.0;       // H = sum_j kappa_j dA_j/d(-beta)
    double increment_piece = 0.0;    // U = sum_j kappa_j (count_j - dA_j); beta-scaled later
    long ops = 0;

    void advance(double t) {
        if (t < prev_t) throw numerical_error("own event times must be non-decreasing");
        const double dt = t - prev_t;
        const double decay = std::exp(-beta * dt);
        weighted_sum = 0.0;
        distance_weighted = 0.0;
        lag_weighted = 0.0;
        increment_piece = 0.0;
        for (KernelChannel& c : channels) {
            const double a_prev = c.decayed_sum;
            double a = a_prev * decay;
            if (with_gradient) c.decayed_lag_sum = decay * (c.decayed_lag_sum + dt * a_prev);
            std::size_t consumed = 0;
            const auto& ts = c.times;
            while (c.cursor < ts.size() && ts[c.cursor] < t) {
                const double lag = t - ts[c.cursor];
                const double e = std::exp(-beta * lag);
                a += e;
                if (with_gradient) c.decayed_lag_sum += lag * e;
                ++c.cursor;
                ++consumed;
            }
            c.decayed_sum = a;
            weighted_sum += c.kappa * a;
            increment_piece += c.kappa * (static_cast<double>(consumed) - (a - a_prev));
            if (with_gradient) {
                distance_weighted += c.gamma * c.kappa * a;
                lag_weighted += c.kappa * c.decayed_lag_sum;
            }
            ops += 1 + static_cast<long>(consumed);
        }
        prev_t = t;
    }
};

struct LogLikOptions {
    bool with_gradient = false;
    bool with_increments = false;
};

struct LogLikResult {
    double loglik = 0.0;
    // Partial derivatives with respect to the natural parameters, in the
    // canonical order lambda, alpha, beta, theta, alpha', beta', theta'.
    // Inactive entries are zero. Filled only when requested.
    std::array<double, 7> gradient{};
    double compensator_at_horizon = 0.0;
    // Compensator increments Lambda(t_k) - Lambda(t_{k-1}) per own start
    // event (t_0 = 0). Filled only when requested.
    std::vector<double> increments;
    long floored_log_terms = 0;
    long ops = 0;
};

namespace detail {

inline KernelRecursion make_recursion(Scope scope, NodeId node, double beta, double theta,
                                      bool starts_side, bool with_gradient,
                                      const EventStore& store, const NeighborhoodGraph& nbhd) {
    KernelRecursion rec;
    rec.beta = beta;
    rec.with_gradient = with_gradient;
    for_scope(scope, node, nbhd, [&](NodeId j, double gamma) {
        KernelChannel c;
        c.gamma = gamma;
        c.kappa = std::exp(-theta * gamma);
        c.times = starts_side ? store.starts(j) : store.ends(j);
        rec.channels.push_back(c);
    });
    return rec;
}

} // namespace detail

// Log-likelihood of one node's start process over [0, horizon]:
//
//   l_i = sum_k log lambda_i(t_{i,k}) - Lambda_i(horizon)
//
// evaluated with the kernel recursion, so the cost is O(N_i M_i^eps) plus a
// single scan of every neighbor event. When requested, exact analytic
// partials for all active parameters are accumulated from companion
// recursions of the same sweep.
inline LogLikResult loglik_node(const NodeParams& p, const ModelSpec& spec, NodeId node,
                                const EventStore& store, const NeighborhoodGraph& nbhd,
                                const LogLikOptions& opts = {}) {
    validate_params(p, spec);
    const std::span<const double> own = store.starts(node);
    const double horizon = store.horizon();
    const bool has_start = spec.start_active();
    const bool has_end = spec.end_active();

    KernelRecursion start_rec, end_rec;
    if (has_start)
        start_rec = detail::make_recursion(spec.start_scope(), node, p.beta, p.theta,
                                           /*starts_side=*/true, opts.with_gradient, store, nbhd);
    if (has_end)
        end_rec = detail::make_recursion(spec.end_scope(), node, p.beta_prime, p.theta_prime,
                                         /*starts_side=*/false, opts.with_gradient, store, nbhd);

    LogLikResult out;
    if (opts.with_increments) out.increments.reserve(own.size());

    double sum_log = 0.0;
    double compensator = 0.0;
    // Event-term gradient accumulators.
    double d_lambda = 0.0;
    double d_alpha = 0.0, d_beta = 0.0, d_theta = 0.0;
    double d_alpha_p = 0.0, d_beta_p = 0.0, d_theta_p = 0.0;

    double prev = 0.0;
    auto step = [&](double t) {
        double incr = p.lambda * (t - prev);
        if (has_start) {
            start_rec.advance(t);
            incr += (p.alpha / p.beta) * start_rec.increment_piece;
        }
        if (has_end) {
            end_rec.advance(t);
            incr += (p.alpha_prime / p.beta_prime) * end_rec.increment_piece;
        }
        prev = t;
        return incr;
    };

    for (double t : own) {
        const double incr = step(t);
        compensator += incr;
        if (opts.with_increments) out.increments.push_back(incr);

        double value = p.lambda;
        if (has_start) value += p.alpha * start_rec.weighted_sum;
        if (has_end) value += p.alpha_prime * end_rec.weighted_sum;
        if (!(value > kLogFloor)) {
            value = kLogFloor;
            ++out.floored_log_terms;
        }
        sum_log += std::log(value);
        if (opts.with_gradient) {
            const double inv = 1.0 / value;
            d_lambda += inv;
            if (has_start) {
                d_alpha += start_rec.weighted_sum * inv;
                d_beta -= p.alpha * start_rec.lag_weighted * inv;
                d_theta -= p.alpha * start_rec.distance_weighted * inv;
            }
            if (has_end) {
                d_alpha_p += end_rec.weighted_sum * inv;
                d_beta_p -= p.alpha_prime * end_rec.lag_weighted * inv;
                d_theta_p -= p.alpha_prime * end_rec.distance_weighted * inv;
            }
        }
    }

    // Tail from the last own event to the horizon; consumes the remaining
    // neighbor events so the channel states now describe time `horizon`.
    compensator += step(horizon);
    out.compensator_at_horizon = compensator;
    out.loglik = sum_log - compensator;
    if (!std::isfinite(out.loglik))
        throw numerical_error("log-likelihood overflowed for node " + std::to_string(node));

    if (opts.with_gradient) {
        out.gradient[0] = d_lambda - horizon;
        auto fold_tail = [&](const KernelRecursion& rec, double jump, double decay,
                             double& g_jump, double& g_decay, double& g_theta) {
            double kc = 0.0, gkc = 0.0, kd = 0.0;
            for (const KernelChannel& c : rec.channels) {
                const double integral_gap =
                    static_cast<double>(c.cursor) - c.decayed_sum; // sum (1 - e^{-beta (T - t_l)})
                kc += c.kappa * integral_gap;
                gkc += c.gamma * c.kappa * integral_gap;
                kd += c.kappa * c.decayed_lag_sum;
            }
            g_jump -= kc / decay;
            g_decay -= jump * (kd / decay - kc / (decay * decay));
            g_theta += (jump / decay) * gkc;
        };
        if (has_start) {
            fold_tail(start_rec, p.alpha, p.beta, d_alpha, d_beta, d_theta);
            out.gradient[1] = d_alpha;
            out.gradient[2] = d_beta;
            if (spec.theta_active()) out.gradient[3] = d_theta;
        }
        if (has_end) {
            fold_tail(end_rec, p.alpha_prime, p.beta_prime, d_alpha_p, d_beta_p, d_theta_p);
            out.gradient[4] = d_alpha_p;
            out.gradient[5] = d_beta_p;
            if (spec.theta_prime_active()) out.gradient[6] = d_theta_p;
        }
        for (double g : out.gradient)
            if (!std::isfinite(g))
                throw numerical_error("gradient overflowed for node " + std::to_string(node));
    }
    out.ops = (has_start ? start_rec.ops : 0) + (has_end ? end_rec.ops : 0);
    return out;
}

// Integrated intensity Lambda_i(t) evaluated by direct summation of the
// analytic per-event terms:
//
//   Lambda_i(t) = lambda_i t
//     + sum_j exp(-theta  gamma(i,j)) (alpha /beta ) sum_{t_{j,k} < t} (1 - exp(-beta  (t - t_{j,k})))
//     + sum_j exp(-theta' gamma(i,j)) (alpha'/beta') sum_{t'_{j,h} < t} (1 - exp(-beta' (t - t'_{j,h})))
//
// Independent of the recursion above; serves as the second route when
// checking the recursive path.
inline double compensator_node(const NodeParams& p, const ModelSpec& spec, NodeId node, double t,
                               const EventStore& store, const NeighborhoodGraph& nbhd) {
    validate_params(p, spec);
    if (!(t >= 0.0) || !(t <= store.horizon()))
        throw argument_error("compensator time must lie in [0, horizon]");
    double value = p.lambda * t;
    for_scope(spec.start_scope(), node, nbhd, [&](NodeId j, double gamma) {
        const double kappa = std::exp(-p.theta * gamma);
        double sum = 0.0;
        for (double tj : store.starts(j)) {
            if (!(tj < t)) break;
            sum += 1.0 - std::exp(-p.beta * (t - tj));
        }
        value += kappa * (p.alpha / p.beta) * sum;
    });
    for_scope(spec.end_scope(), node, nbhd, [&](NodeId j, double gamma) {
        const double kappa = std::exp(-p.theta_prime * gamma);
        double sum = 0.0;
        for (double tj : store.ends(j)) {
            if (!(tj < t)) break;
            sum += 1.0 - std::exp(-p.beta_prime * (t - tj));
        }
        value += kappa * (p.alpha_prime / p.beta_prime) * sum;
    });
    if (!std::isfinite(value))
        throw numerical_error("compensator overflowed for node " + std::to_string(node));
    return value;
}

} // namespace gbmep
