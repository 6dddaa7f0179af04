#pragma once

#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/model.hpp"

namespace gbmep {

// Journey durations are log-normal in hours; the start process only sees
// them through the end times they produce.
struct DurationModel {
    double log_mean_hours = -1.0;
    double log_sd_hours = 0.5;
};

struct SimConfig {
    ModelSpec spec;
    std::vector<NodeParams> params; // one per node
    double horizon_hours = 0.0;
    DurationModel duration;
    std::vector<double> destination_weights; // empty = uniform over all nodes
    std::uint64_t seed = 1;
    std::size_t max_events = 1'000'000;
};

// Generator identity recorded in run manifests.
inline constexpr const char* kRngAlgorithm = "mt19937_64";

struct SimOutput {
    EventStore store;
    std::size_t accepted = 0;
    std::size_t proposals = 0;
    // Journeys whose end time fell past the horizon; they excited the
    // process while it ran but are not part of the observed window, the
    // same censoring the data protocol applies.
    std::size_t dropped_past_horizon = 0;
};

// Exact simulation of the start process by thinning. Between events every
// node's intensity decays, so the total intensity immediately after the
// latest event bounds it until the next start or scheduled end time; end
// times arriving before a proposal raise the bound, which is handled by
// re-proposing from the jump. Each accepted start draws a duration and a
// destination, and the resulting end time feeds back into the intensity.
inline SimOutput simulate(const SimConfig& config, const NeighborhoodGraph& nbhd) {
    const std::size_t m = nbhd.num_nodes();
    if (config.params.size() != m)
        throw argument_error("simulation needs one parameter set per node");
    if (!(config.horizon_hours > 0.0)) throw argument_error("simulation horizon must be positive");
    for (const NodeParams& p : config.params) validate_params(p, config.spec);
    if (!config.destination_weights.empty() && config.destination_weights.size() != m)
        throw argument_error("destination weights must cover every node");

    // Receiver-side views: when node j emits a start (or an end lands on j),
    // every node i whose scope contains j gains kappa_{ij} of excitation.
    struct Receiver {
        std::size_t node;
        double kappa;
    };
    std::vector<std::vector<Receiver>> start_receivers(m), end_receivers(m);
    for (std::size_t i = 0; i < m; ++i) {
        const NodeParams& p = config.params[i];
        for_scope(config.spec.start_scope(), static_cast<NodeId>(i), nbhd,
                  [&](NodeId j, double gamma) {
                      start_receivers[static_cast<std::size_t>(j)].push_back(
                          {i, std::exp(-p.theta * gamma)});
                  });
        for_scope(config.spec.end_scope(), static_cast<NodeId>(i), nbhd,
                  [&](NodeId j, double gamma) {
                      end_receivers[static_cast<std::size_t>(j)].push_back(
                          {i, std::exp(-p.theta_prime * gamma)});
                  });
    }

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(config.duration.log_mean_hours,
                                            config.duration.log_sd_hours);

    std::vector<double> start_state(m, 0.0); // sum kappa exp(-beta (t - start))
    std::vector<double> end_state(m, 0.0);
    std::vector<double> intensity(m, 0.0);

    auto decay_to = [&](double from, double to) {
        const double dt = to - from;
        if (dt <= 0.0) return;
        for (std::size_t i = 0; i < m; ++i) {
            start_state[i] *= std::exp(-config.params[i].beta * dt);
            end_state[i] *= std::exp(-config.params[i].beta_prime * dt);
        }
    };
    auto total_intensity = [&]() {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const NodeParams& p = config.params[i];
            intensity[i] = p.lambda + p.alpha * start_state[i] + p.alpha_prime * end_state[i];
            total += intensity[i];
        }
        return total;
    };

    using PendingEnd = std::pair<double, std::size_t>; // (end time, destination)
    std::priority_queue<PendingEnd, std::vector<PendingEnd>, std::greater<>> pending;

    std::vector<EventRecord> observed;
    SimOutput out;
    const double horizon = config.horizon_hours;
    double now = 0.0;
    std::vector<double> cumulative(m, 0.0);

    while (true) {
        const double bound = total_intensity();
        const double wait = -std::log(1.0 - unif(rng)) / bound;
        double candidate = now + wait;
        if (!pending.empty() && pending.top().first <= std::min(candidate, horizon)) {
            // An end time lands before the proposal: apply its jump and
            // re-propose from there with a refreshed bound.
            const double jump_time = pending.top().first;
            decay_to(now, jump_time);
            while (!pending.empty() && pending.top().first == jump_time) {
                const std::size_t dest = pending.top().second;
                pending.pop();
                for (const Receiver& r : end_receivers[dest]) end_state[r.node] += r.kappa;
            }
            now = jump_time;
            continue;
        }
        if (candidate > horizon) break;
        ++out.proposals;
        decay_to(now, candidate);
        now = candidate;
        const double current = total_intensity();
        if (current > bound * (1.0 + 1e-12))
            throw numerical_error("thinning bound exceeded; simulation state corrupted");
        if (unif(rng) * bound > current) continue; // rejected proposal

        // Accepted: attribute the start to a node proportionally to its
        // share of the intensity.
        double pick = unif(rng) * current;
        std::size_t node = m - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += intensity[i];
            if (pick <= acc) {
                node = i;
                break;
            }
        }
        const double duration = std::exp(normal(rng));
        std::size_t dest;
        if (config.destination_weights.empty()) {
            dest = std::min<std::size_t>(static_cast<std::size_t>(unif(rng) * m), m - 1);
        } else {
            double total_w = 0.0;
            for (double w : config.destination_weights) total_w += w;
            double pick_w = unif(rng) * total_w;
            dest = m - 1;
            double acc_w = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                acc_w += config.destination_weights[i];
                if (pick_w <= acc_w) {
                    dest = i;
                    break;
                }
            }
        }
        const double end_time = now + duration;
        if (end_time <= horizon) {
            observed.push_back({static_cast<NodeId>(node), static_cast<NodeId>(dest), now,
                                end_time});
            pending.emplace(end_time, dest);
        } else {
            ++out.dropped_past_horizon;
        }
        for (const Receiver& r : start_receivers[node]) start_state[r.node] += r.kappa;
        if (++out.accepted > config.max_events)
            throw numerical_error("simulation exceeded the configured event cap of " +
                                  std::to_string(config.max_events) +
                                  "; the parameter regime may be unstable");
    }

    out.store = EventStore(std::move(observed), m, horizon);
    return out;
}

// side x side stations on a latitude/longitude grid with approximately the
// given haversine spacing, centered on central London by default.
inline StationRegistry make_grid_network(int side, double spacing_km,
                                         double center_lat = 51.509, double center_lon = -0.118,
                                         double rho_km = kDefaultEarthRadiusKm) {
    if (side < 1) throw argument_error("grid side must be >= 1");
    if (!(spacing_km > 0.0)) throw argument_error("grid spacing must be positive");
    constexpr double rad = std::numbers::pi / 180.0;
    const double dlat = spacing_km / rho_km / rad;
    const double dlon = spacing_km / (rho_km * std::cos(center_lat * rad)) / rad;
    StationRegistry reg;
    const double offset = 0.5 * (side - 1);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            Station s;
            s.id = "G" + std::to_string(r * side + c);
            s.name = "grid-" + std::to_string(r) + "-" + std::to_string(c);
            s.latitude = center_lat + (r - offset) * dlat;
            s.longitude = center_lon + (c - offset) * dlon;
            reg.add(std::move(s));
        }
    }
    return reg;
}

} // namespace gbmep
