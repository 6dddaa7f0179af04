#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"

namespace gbmep {

// Earth radius at the latitude of London, no altitude.
inline constexpr double kDefaultEarthRadiusKm = 6365.079;
inline constexpr double kDefaultEpsilonKm = 0.5;
inline constexpr int kDefaultMinNeighbors = 3;

struct Station {
    std::string id;   // external id, unique
    std::string name; // optional display name
    double latitude = 0.0;
    double longitude = 0.0;
};

// Node set with coordinates; external ids map to dense indices 0..M-1.
class StationRegistry {
  public:
    NodeId add(Station s) {
        if (!(s.latitude >= -90.0 && s.latitude <= 90.0))
            throw argument_error("latitude out of range for station " + s.id);
        if (!(s.longitude >= -180.0 && s.longitude <= 180.0))
            throw argument_error("longitude out of range for station " + s.id);
        if (index_.count(s.id))
            throw argument_error("duplicate station id " + s.id);
        const NodeId node = static_cast<NodeId>(stations_.size());
        index_.emplace(s.id, node);
        stations_.push_back(std::move(s));
        return node;
    }

    std::size_t size() const { return stations_.size(); }

    const Station& station(NodeId node) const {
        if (node < 0 || static_cast<std::size_t>(node) >= stations_.size())
            throw registry_error("unknown node id " + std::to_string(node));
        return stations_[static_cast<std::size_t>(node)];
    }

    std::optional<NodeId> find(const std::string& external_id) const {
        auto it = index_.find(external_id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

  private:
    std::vector<Station> stations_;
    std::unordered_map<std::string, NodeId> index_;
};

// Great-circle distance in km between two (latitude, longitude) points given
// in degrees:
//   2 rho asin sqrt( sin^2(dphi/2) + cos(phi_a) cos(phi_b) sin^2(dl/2) )
inline double haversine(double lat_a, double lon_a, double lat_b, double lon_b,
                        double rho_km = kDefaultEarthRadiusKm) {
    if (!(lat_a >= -90.0 && lat_a <= 90.0 && lat_b >= -90.0 && lat_b <= 90.0))
        throw argument_error("latitude out of range");
    if (!(lon_a >= -180.0 && lon_a <= 180.0 && lon_b >= -180.0 && lon_b <= 180.0))
        throw argument_error("longitude out of range");
    if (!(rho_km > 0.0)) throw argument_error("earth radius must be positive");
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi_a = lat_a * deg;
    const double phi_b = lat_b * deg;
    const double s_phi = std::sin(0.5 * (phi_b - phi_a));
    const double s_lam = std::sin(0.5 * (lon_b - lon_a) * deg);
    const double h = s_phi * s_phi + std::cos(phi_a) * std::cos(phi_b) * s_lam * s_lam;
    return 2.0 * rho_km * std::asin(std::min(1.0, std::sqrt(h)));
}

struct Neighbor {
    NodeId node = 0;
    double distance_km = 0.0;
};

// Per-node truncated neighbor lists: node j appears in the list of node i
// when gamma(i,j) <= eps_i, where eps_i is the base radius, enlarged to the
// min_neighbors-th smallest distance from i when the base radius captures
// fewer than min_neighbors nodes. Self is always a neighbor at distance 0,
// so every list counts the node itself.
class NeighborhoodGraph {
  public:
    static NeighborhoodGraph build(const StationRegistry& reg, double epsilon_km,
                                   int min_neighbors = kDefaultMinNeighbors,
                                   double rho_km = kDefaultEarthRadiusKm) {
        const std::size_t m = reg.size();
        std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            const Station& a = reg.station(static_cast<NodeId>(i));
            for (std::size_t j = i + 1; j < m; ++j) {
                const Station& b = reg.station(static_cast<NodeId>(j));
                const double d = haversine(a.latitude, a.longitude, b.latitude, b.longitude, rho_km);
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        return from_distances(dist, epsilon_km, min_neighbors, rho_km);
    }

    // Same construction from an explicit symmetric distance matrix; lets
    // callers plug in a metric other than the haversine one.
    static NeighborhoodGraph from_distances(const std::vector<std::vector<double>>& dist,
                                            double epsilon_km,
                                            int min_neighbors = kDefaultMinNeighbors,
                                            double rho_km = kDefaultEarthRadiusKm) {
        const std::size_t m = dist.size();
        if (m == 0) throw argument_error("neighborhood graph needs at least one node");
        if (!(epsilon_km > 0.0)) throw argument_error("epsilon must be positive");
        if (min_neighbors < 1 || static_cast<std::size_t>(min_neighbors) > m)
            throw argument_error("min_neighbors must lie in [1, number of nodes]");
        for (const auto& row : dist)
            if (row.size() != m) throw argument_error("distance matrix must be square");

        NeighborhoodGraph g;
        g.epsilon_km_ = epsilon_km;
        g.rho_km_ = rho_km;
        g.lists_.resize(m);
        g.radius_.resize(m);
        std::vector<double> sorted;
        for (std::size_t i = 0; i < m; ++i) {
            const auto& row = dist[i];
            double eps_i = epsilon_km;
            std::size_t within = 0;
            for (double d : row)
                if (d <= eps_i) ++within;
            if (within < static_cast<std::size_t>(min_neighbors)) {
                sorted.assign(row.begin(), row.end());
                std::nth_element(sorted.begin(), sorted.begin() + (min_neighbors - 1), sorted.end());
                eps_i = sorted[static_cast<std::size_t>(min_neighbors - 1)];
            }
            auto& list = g.lists_[i];
            for (std::size_t j = 0; j < m; ++j)
                if (row[j] <= eps_i) list.push_back({static_cast<NodeId>(j), row[j]});
            std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) {
                return a.distance_km != b.distance_km ? a.distance_km < b.distance_km
                                                      : a.node < b.node;
            });
            g.radius_[i] = eps_i;
        }
        return g;
    }

    // Degenerate graph where each node sees only itself; used by the purely
    // self/mutually exciting model variants.
    static NeighborhoodGraph self_only(std::size_t num_nodes) {
        NeighborhoodGraph g;
        g.epsilon_km_ = 0.0;
        g.rho_km_ = 0.0;
        g.lists_.resize(num_nodes);
        g.radius_.assign(num_nodes, 0.0);
        for (std::size_t i = 0; i < num_nodes; ++i)
            g.lists_[i].push_back({static_cast<NodeId>(i), 0.0});
        return g;
    }

    std::size_t num_nodes() const { return lists_.size(); }
    double base_epsilon_km() const { return epsilon_km_; }
    double earth_radius_km() const { return rho_km_; }

    std::span<const Neighbor> neighbors(NodeId node) const {
        return lists_[checked(node)];
    }

    double effective_radius_km(NodeId node) const {
        return radius_[checked(node)];
    }

  private:
    std::size_t checked(NodeId node) const {
        if (node < 0 || static_cast<std::size_t>(node) >= lists_.size())
            throw registry_error("unknown node id " + std::to_string(node));
        return static_cast<std::size_t>(node);
    }

    double epsilon_km_ = 0.0;
    double rho_km_ = 0.0;
    std::vector<std::vector<Neighbor>> lists_;
    std::vector<double> radius_;
};

} // namespace gbmep
