#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gbmep/errors.hpp"

namespace gbmep {

using NodeId = std::int32_t;

// One journey: a bike leaves `source` at `start` and is docked at
// `destination` at `end`. Times are hours since the window origin.
struct EventRecord {
    NodeId source = 0;
    NodeId destination = 0;
    double start = 0.0;
    double end = 0.0;
};

// Immutable, indexed event stream observed on [0, horizon].
//
// Records are kept ordered by end time. Per node the store indexes the
// start times of journeys leaving it and the end times of journeys
// arriving at it, both sorted ascending, so the left-continuous counts
// N_i(t) = #{starts < t} and N'_i(t) = #{ends < t} are binary searches.
// Simultaneous start times on one node keep their record order.
class EventStore {
  public:
    EventStore() = default;

    EventStore(std::vector<EventRecord> records, std::size_t num_nodes, double horizon)
        : num_nodes_(num_nodes), horizon_(horizon), records_(std::move(records)) {
        if (horizon_ < 0.0) throw argument_error("event store horizon must be >= 0");
        for (const auto& r : records_) {
            if (r.source < 0 || static_cast<std::size_t>(r.source) >= num_nodes_ ||
                r.destination < 0 || static_cast<std::size_t>(r.destination) >= num_nodes_)
                throw registry_error("event record references unregistered node id " +
                                     std::to_string(r.source < 0 || static_cast<std::size_t>(r.source) >= num_nodes_
                                                        ? r.source
                                                        : r.destination));
            if (!(r.end > r.start))
                throw argument_error("event record must have end > start");
            if (r.start < 0.0 || r.end > horizon_)
                throw argument_error("event record times must lie in [0, horizon]");
        }
        std::stable_sort(records_.begin(), records_.end(),
                         [](const EventRecord& a, const EventRecord& b) { return a.end < b.end; });
        starts_.resize(num_nodes_);
        ends_.resize(num_nodes_);
        for (const auto& r : records_) {
            starts_[static_cast<std::size_t>(r.source)].push_back(r.start);
            ends_[static_cast<std::size_t>(r.destination)].push_back(r.end);
        }
        for (auto& v : starts_) std::stable_sort(v.begin(), v.end());
        // ends_ are already ascending (records are end-sorted); keep as built.
    }

    std::size_t num_nodes() const { return num_nodes_; }
    double horizon() const { return horizon_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::span<const EventRecord> records() const { return records_; }

    // Start times of journeys leaving `node`, ascending.
    std::span<const double> starts(NodeId node) const {
        return starts_[checked(node)];
    }

    // End times of journeys arriving at `node`, ascending.
    std::span<const double> ends(NodeId node) const {
        return ends_[checked(node)];
    }

    // N_i(t): number of journeys started from `node` strictly before t.
    std::size_t count_starts(NodeId node, double t) const {
        check_time(t);
        const auto& v = starts_[checked(node)];
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
    }

    // N'_i(t): number of journeys ended at `node` strictly before t.
    std::size_t count_ends(NodeId node, double t) const {
        check_time(t);
        const auto& v = ends_[checked(node)];
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
    }

    // Partitions by end time: records ending before t_star (horizon t_star)
    // and the remainder (horizon unchanged).
    std::pair<EventStore, EventStore> split_at(double t_star) const {
        if (!(t_star > 0.0) || !(t_star < horizon_))
            throw argument_error("split point must lie strictly inside (0, horizon)");
        std::vector<EventRecord> head, tail;
        for (const auto& r : records_) {
            (r.end < t_star ? head : tail).push_back(r);
        }
        return {EventStore(std::move(head), num_nodes_, t_star),
                EventStore(std::move(tail), num_nodes_, horizon_)};
    }

    // Union of two stores over the same node set; horizon is the larger one.
    static EventStore merge(const EventStore& a, const EventStore& b) {
        if (a.num_nodes() != b.num_nodes())
            throw argument_error("cannot merge event stores over different node sets");
        std::vector<EventRecord> all;
        all.reserve(a.size() + b.size());
        all.insert(all.end(), a.records().begin(), a.records().end());
        all.insert(all.end(), b.records().begin(), b.records().end());
        return EventStore(std::move(all), a.num_nodes(), std::max(a.horizon(), b.horizon()));
    }

  private:
    std::size_t checked(NodeId node) const {
        if (node < 0 || static_cast<std::size_t>(node) >= num_nodes_)
            throw registry_error("unknown node id " + std::to_string(node));
        return static_cast<std::size_t>(node);
    }

    void check_time(double t) const {
        if (!(t >= 0.0) || !(t <= horizon_))
            throw argument_error("query time must lie in [0, horizon]");
    }

    std::size_t num_nodes_ = 0;
    double horizon_ = 0.0;
    std::vector<EventRecord> records_;
    std::vector<std::vector<double>> starts_;
    std::vector<std::vector<double>> ends_;
};

} // namespace gbmep
