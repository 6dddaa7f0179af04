#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

#include "gbmep/errors.hpp"

namespace gbmep {

struct LbfgsOptions {
    int memory = 10;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6; // max-norm of the gradient
    int max_line_search = 50;
    double armijo_c1 = 1e-4;
    double wolfe_c2 = 0.9;
};

enum class LbfgsStatus { converged, max_iterations, line_search_failed };

struct LbfgsResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    std::vector<double> gradient;
    double grad_max_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    long evaluations = 0;
    LbfgsStatus status = LbfgsStatus::line_search_failed;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double max_norm(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

} // namespace detail

// Limited-memory BFGS with a strong-Wolfe line search (bracket then zoom).
// The objective is fn(x, grad) -> f, filling grad; it may return a
// non-finite value for points it cannot evaluate, which the line search
// treats as "too far". Accepted steps always decrease f, so the final value
// never exceeds the value at x0.
template <typename Fn>
LbfgsResult lbfgs_minimize(Fn&& fn, std::vector<double> x0, const LbfgsOptions& opts = {}) {
    const std::size_t n = x0.size();
    LbfgsResult result;
    result.x = std::move(x0);
    result.gradient.assign(n, 0.0);
    if (n == 0) {
        result.f = fn(result.x, result.gradient);
        result.status = LbfgsStatus::converged;
        result.grad_max_norm = 0.0;
        return result;
    }

    std::vector<double> x = result.x;
    std::vector<double> g(n, 0.0);
    long evals = 0;
    auto evaluate = [&](const std::vector<double>& point, std::vector<double>& grad) {
        ++evals;
        return fn(point, grad);
    };
    double f = evaluate(x, g);
    if (!std::isfinite(f))
        throw numerical_error("objective is not finite at the starting point");

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> history;

    std::vector<double> d(n), x_trial(n), g_trial(n), q(n);
    std::vector<double> alpha_coef;

    auto finish = [&](LbfgsStatus status, int iters) {
        result.x = x;
        result.f = f;
        result.gradient = g;
        result.grad_max_norm = detail::max_norm(g);
        result.iterations = iters;
        result.evaluations = evals;
        result.status = status;
        return result;
    };

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (detail::max_norm(g) < opts.gradient_tolerance)
            return finish(LbfgsStatus::converged, iter);

        // Two-loop recursion for d = -H g.
        q = g;
        alpha_coef.assign(history.size(), 0.0);
        for (std::size_t i = history.size(); i-- > 0;) {
            const Pair& p = history[i];
            alpha_coef[i] = p.rho * detail::dot(p.s, q);
            for (std::size_t k = 0; k < n; ++k) q[k] -= alpha_coef[i] * p.y[k];
        }
        if (!history.empty()) {
            const Pair& newest = history.back();
            const double yy = detail::dot(newest.y, newest.y);
            const double scale = yy > 0.0 ? 1.0 / (newest.rho * yy) : 1.0;
            for (double& v : q) v *= scale;
        }
        for (std::size_t i = 0; i < history.size(); ++i) {
            const Pair& p = history[i];
            const double b = p.rho * detail::dot(p.y, q);
            for (std::size_t k = 0; k < n; ++k) q[k] += (alpha_coef[i] - b) * p.s[k];
        }
        for (std::size_t k = 0; k < n; ++k) d[k] = -q[k];

        double dg = detail::dot(d, g);
        if (!(dg < 0.0) || !std::isfinite(dg)) {
            // Not a descent direction; restart from steepest descent.
            history.clear();
            for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
            dg = -detail::dot(g, g);
            if (!(dg < 0.0)) return finish(LbfgsStatus::converged, iter);
        }

        // Strong Wolfe line search.
        auto phi = [&](double step) {
            for (std::size_t k = 0; k < n; ++k) x_trial[k] = x[k] + step * d[k];
            return evaluate(x_trial, g_trial);
        };
        const double c1 = opts.armijo_c1, c2 = opts.wolfe_c2;
        double step = iter == 0 ? std::min(1.0, 1.0 / std::max(1.0, detail::max_norm(g))) : 1.0;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double f_lo = f, dg_lo = dg;
        double accepted = -1.0, f_acc = f;
        double prev_step = 0.0, f_prev = f, dg_prev = dg;
        int ls = 0;
        bool bracketed = false;
        for (; ls < opts.max_line_search; ++ls) {
            const double ft = phi(step);
            const double dgt = std::isfinite(ft) ? detail::dot(g_trial, d)
                                                 : std::numeric_limits<double>::quiet_NaN();
            if (!bracketed) {
                if (!std::isfinite(ft) || ft > f + c1 * step * dg || (ls > 0 && ft >= f_prev)) {
                    lo = prev_step;
                    f_lo = f_prev;
                    dg_lo = dg_prev;
                    hi = step;
                    bracketed = true;
                } else if (std::abs(dgt) <= -c2 * dg) {
                    accepted = step;
                    f_acc = ft;
                    break;
                } else if (dgt >= 0.0) {
                    lo = step;
                    f_lo = ft;
                    dg_lo = dgt;
                    hi = prev_step;
                    bracketed = true;
                } else {
                    prev_step = step;
                    f_prev = ft;
                    dg_prev = dgt;
                    step *= 2.0;
                    if (step > 1e12) {
                        lo = prev_step;
                        f_lo = f_prev;
                        break;
                    }
                    continue;
                }
                step = 0.5 * (lo + hi);
                continue;
            }
            // Zoom phase: [lo, hi] brackets a Wolfe point (f_lo is the best
            // Armijo-feasible value, and the interval shrinks every round).
            if (!std::isfinite(ft) || ft > f + c1 * step * dg || ft >= f_lo) {
                hi = step;
            } else {
                if (std::abs(dgt) <= -c2 * dg) {
                    accepted = step;
                    f_acc = ft;
                    break;
                }
                if (dgt * (hi - lo) >= 0.0) hi = lo;
                lo = step;
                f_lo = ft;
                dg_lo = dgt;
            }
            if (std::abs(hi - lo) < 1e-14 * std::max(1.0, std::abs(lo))) break;
            step = 0.5 * (lo + hi);
        }

        if (accepted < 0.0) {
            // No strong-Wolfe point within budget; fall back to the best
            // Armijo-feasible point so progress stays monotone.
            if (lo > 0.0 && f_lo < f) {
                accepted = lo;
                f_acc = phi(lo);
                (void)dg_lo;
            } else {
                return finish(LbfgsStatus::line_search_failed, iter);
            }
        }

        // x_trial/g_trial hold the accepted point after the last phi() call.
        Pair pair;
        pair.s.resize(n);
        pair.y.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            pair.s[k] = x_trial[k] - x[k];
            pair.y[k] = g_trial[k] - g[k];
        }
        const double sy = detail::dot(pair.s, pair.y);
        const double sn = std::sqrt(detail::dot(pair.s, pair.s));
        const double yn = std::sqrt(detail::dot(pair.y, pair.y));
        if (sy > 1e-10 * sn * yn && std::isfinite(sy)) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (history.size() > static_cast<std::size_t>(std::max(1, opts.memory)))
                history.pop_front();
        }
        x = x_trial;
        g = g_trial;
        f = f_acc;
    }
    return finish(LbfgsStatus::max_iterations, opts.max_iterations);
}

} // namespace gbmep
