#pragma once

// Shared fixtures and independent reference implementations for the test
// suite. The oracle_* functions transcribe the defining formulas directly
// (plain double loops, no recursion, no shared code with the library paths
// they check).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gbmep/event_store.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/model.hpp"
#include "gbmep/timeparse.hpp"

namespace testsupport {

using namespace gbmep;

// Distance lookup by scanning the neighbor list; infinity when j is outside
// the scope of i.
inline double scope_distance(const ModelSpec& spec, bool starts_side, NodeId i, NodeId j,
                             const NeighborhoodGraph& nbhd) {
    const Scope scope = starts_side ? spec.start_scope() : spec.end_scope();
    if (scope == Scope::none) return std::numeric_limits<double>::infinity();
    if (scope == Scope::self_only)
        return i == j ? 0.0 : std::numeric_limits<double>::infinity();
    for (const Neighbor& nb : nbhd.neighbors(i))
        if (nb.node == j) return nb.distance_km;
    return std::numeric_limits<double>::infinity();
}

// Literal evaluation of the intensity: for every node j and every event of j
// before t, add the spatially weighted exponential kernel.
inline double oracle_cif(const NodeParams& p, const ModelSpec& spec, NodeId node, double t,
                         const EventStore& store, const NeighborhoodGraph& nbhd) {
    double value = p.lambda;
    for (std::size_t j = 0; j < store.num_nodes(); ++j) {
        const NodeId jj = static_cast<NodeId>(j);
        const double d_start = scope_distance(spec, true, node, jj, nbhd);
        if (std::isfinite(d_start)) {
            for (double tj : store.starts(jj))
                if (tj < t)
                    value += std::exp(-p.theta * d_start) * p.alpha *
                             std::exp(-p.beta * (t - tj));
        }
        const double d_end = scope_distance(spec, false, node, jj, nbhd);
        if (std::isfinite(d_end)) {
            for (double tj : store.ends(jj))
                if (tj < t)
                    value += std::exp(-p.theta_prime * d_end) * p.alpha_prime *
                             std::exp(-p.beta_prime * (t - tj));
        }
    }
    return value;
}

// Literal integrated intensity: lambda t plus per-event analytic integrals.
inline double oracle_compensator(const NodeParams& p, const ModelSpec& spec, NodeId node,
                                 double t, const EventStore& store,
                                 const NeighborhoodGraph& nbhd) {
    double value = p.lambda * t;
    for (std::size_t j = 0; j < store.num_nodes(); ++j) {
        const NodeId jj = static_cast<NodeId>(j);
        const double d_start = scope_distance(spec, true, node, jj, nbhd);
        if (std::isfinite(d_start)) {
            for (double tj : store.starts(jj))
                if (tj < t)
                    value += std::exp(-p.theta * d_start) * (p.alpha / p.beta) *
                             (1.0 - std::exp(-p.beta * (t - tj)));
        }
        const double d_end = scope_distance(spec, false, node, jj, nbhd);
        if (std::isfinite(d_end)) {
            for (double tj : store.ends(jj))
                if (tj < t)
                    value += std::exp(-p.theta_prime * d_end) * (p.alpha_prime / p.beta_prime) *
                             (1.0 - std::exp(-p.beta_prime * (t - tj)));
        }
    }
    return value;
}

// Naive O(N^2) log-likelihood built from the two oracles above.
inline double oracle_loglik(const NodeParams& p, const ModelSpec& spec, NodeId node,
                            const EventStore& store, const NeighborhoodGraph& nbhd) {
    double sum_log = 0.0;
    for (double t : store.starts(node)) sum_log += std::log(oracle_cif(p, spec, node, t, store, nbhd));
    return sum_log - oracle_compensator(p, spec, node, store.horizon(), store, nbhd);
}

// Composite-Simpson quadrature of a function with kinks only at event times:
// integrates segment by segment between sorted breakpoints.
template <typename F>
double segmented_simpson(F&& f, double lo, double hi, std::vector<double> breaks,
                         int panels_per_segment = 200) {
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double a = std::max(lo, breaks[s]);
        const double b = std::min(hi, breaks[s + 1]);
        if (!(b > a)) continue;
        const int n = panels_per_segment;
        const double h = (b - a) / (2.0 * n);
        // The integrand jumps at event times: nudge the left endpoint into
        // the open interval so its right limit is integrated.
        double acc = f(a + 1e-10 * (b - a)) + f(b);
        for (int k = 1; k < 2 * n; ++k) acc += f(a + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
        total += acc * h / 3.0;
    }
    return total;
}

// Small synthetic event stream: uniform starts, short random durations,
// random endpoints. Events always fit inside the horizon.
inline EventStore random_store(std::mt19937_64& rng, std::size_t num_nodes,
                               std::size_t num_events, double horizon) {
    std::uniform_real_distribution<double> ustart(0.0, horizon * 0.9);
    std::uniform_real_distribution<double> udur(0.01, horizon * 0.1);
    std::uniform_int_distribution<int> unode(0, static_cast<int>(num_nodes) - 1);
    std::vector<EventRecord> records;
    records.reserve(num_events);
    for (std::size_t k = 0; k < num_events; ++k) {
        EventRecord r;
        r.source = unode(rng);
        r.destination = unode(rng);
        r.start = ustart(rng);
        r.end = std::min(r.start + udur(rng), horizon);
        if (!(r.end > r.start)) r.end = r.start + 1e-6;
        records.push_back(r);
    }
    return EventStore(std::move(records), num_nodes, horizon);
}

// Valid random parameters for a variant, in comfortably identifiable ranges.
inline NodeParams random_params(std::mt19937_64& rng, const ModelSpec& spec) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NodeParams p;
    p.lambda = 0.05 + 1.5 * u(rng);
    if (spec.start_active()) {
        p.alpha = 0.05 + 0.6 * u(rng);
        p.beta = p.alpha + 0.2 + 2.0 * u(rng);
        if (spec.theta_active()) p.theta = 0.2 + 2.0 * u(rng);
    }
    if (spec.end_active()) {
        p.alpha_prime = 0.05 + 0.6 * u(rng);
        p.beta_prime = p.alpha_prime + 0.2 + 2.0 * u(rng);
        if (spec.theta_prime_active()) p.theta_prime = 0.2 + 2.0 * u(rng);
    }
    return p;
}

// Small clustered station layouts for geometry and spatial-model tests.
inline StationRegistry random_registry(std::mt19937_64& rng, std::size_t num_stations,
                                       double span_deg = 0.02) {
    std::uniform_real_distribution<double> du(-span_deg, span_deg);
    StationRegistry reg;
    for (std::size_t i = 0; i < num_stations; ++i) {
        Station s;
        s.id = "S" + std::to_string(i);
        s.latitude = 51.5 + du(rng);
        s.longitude = -0.12 + du(rng);
        reg.add(std::move(s));
    }
    return reg;
}

inline double ks_critical_1pct(std::size_t n) {
    return 1.628 / std::sqrt(static_cast<double>(n));
}

// Renders an event store as a journey CSV in the public export layout, with
// minute-resolution timestamps relative to origin_date local midnight. Used
// to feed the ingest path from simulated data.
inline void write_journeys_csv(const EventStore& store, const StationRegistry& reg,
                               const std::string& path, const std::string& origin_date,
                               TimeZoneMode tz = TimeZoneMode::europe_london) {
    const std::int64_t origin = civil_to_epoch(parse_iso_date(origin_date), tz).epoch_seconds;
    std::ofstream out(path);
    out << "Rental Id,Duration,Bike Id,End Date,EndStation Id,EndStation Name,"
           "Start Date,StartStation Id,StartStation Name\n";
    auto stamp = [&](double hours) {
        const std::int64_t minutes =
            static_cast<std::int64_t>(std::floor(hours * 60.0));
        const CivilDateTime c = epoch_to_civil(origin + minutes * 60, tz);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%02d/%02d/%04d %02d:%02d", c.day, c.month, c.year,
                      c.hour, c.minute);
        return std::pair<std::string, std::int64_t>(buf, minutes * 60);
    };
    std::size_t rental = 1;
    for (const EventRecord& r : store.records()) {
        auto [start_str, start_s] = stamp(r.start);
        auto [end_str, end_s] = stamp(r.end);
        if (end_s <= start_s) {
            const std::int64_t bumped = start_s + 60;
            const CivilDateTime c = epoch_to_civil(origin + bumped, tz);
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%02d/%02d/%04d %02d:%02d", c.day, c.month, c.year,
                          c.hour, c.minute);
            end_str = buf;
            end_s = bumped;
        }
        out << rental++ << ',' << (end_s - start_s) << ",1," << end_str << ','
            << reg.station(r.destination).id << ",dest," << start_str << ','
            << reg.station(r.source).id << ",src\n";
    }
}

// Three-node worked example: events (1,2,1.25,2.75), (1,3,4,4.5),
// (2,2,2.35,8) on nodes {1,2,3} (zero-based {0,1,2} here), with pairwise
// distances 0.5/0.75/0.25 and every pair interacting.
struct WorkedExample {
    EventStore store;
    NeighborhoodGraph nbhd;
    std::vector<NodeParams> params;
};

inline WorkedExample worked_example() {
    WorkedExample w{
        EventStore({{0, 1, 1.25, 2.75}, {0, 2, 4.0, 4.5}, {1, 1, 2.35, 8.0}}, 3, 10.0),
        NeighborhoodGraph::from_distances(
            {{0.0, 0.5, 0.75}, {0.5, 0.0, 0.25}, {0.75, 0.25, 0.0}},
            std::numeric_limits<double>::infinity(), 1),
        {}};
    NodeParams p1;
    p1.lambda = 0.2;
    p1.alpha = 0.8;
    p1.beta = 1.0;
    p1.theta = 1.0;
    p1.alpha_prime = 0.5;
    p1.beta_prime = 1.0;
    p1.theta_prime = 1.5;
    NodeParams p2 = p1;
    p2.lambda = 0.3;
    p2.alpha = 0.6;
    NodeParams p3 = p2;
    p3.lambda = 0.15;
    p3.alpha_prime = 0.3;
    w.params = {p1, p2, p3};
    return w;
}

} // namespace testsupport
