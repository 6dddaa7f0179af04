#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "gbmep/csv.hpp"
#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/timeparse.hpp"

namespace gbmep {

// Journey CSV layout. Defaults match the public Santander Cycles exports.
struct ColumnMap {
    std::string rental_id = "Rental Id";
    std::string start_time = "Start Date";
    std::string end_time = "End Date";
    std::string start_station = "StartStation Id";
    std::string end_station = "EndStation Id";
    std::string duration = "Duration"; // seconds; cross-checked against the timestamps
    std::string timestamp_format = "%d/%m/%Y %H:%M";
    TimeZoneMode timezone = TimeZoneMode::europe_london;
};

// Station CSV layout.
struct StationColumns {
    std::string id = "id";
    std::string name = "name";
    std::string latitude = "lat";
    std::string longitude = "lon";
};

enum class RejectReason {
    non_positive_duration,
    unknown_station,
    unparseable,
    outside_window,
    duplicate_rental_id,
    duration_mismatch
};

inline const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::non_positive_duration: return "non_positive_duration";
        case RejectReason::unknown_station: return "unknown_station";
        case RejectReason::unparseable: return "unparseable";
        case RejectReason::outside_window: return "outside_window";
        case RejectReason::duplicate_rental_id: return "duplicate_rental_id";
        case RejectReason::duration_mismatch: return "duration_mismatch";
    }
    return "?";
}

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t accepted = 0;
    std::map<RejectReason, std::size_t> rejected;
    std::size_t ambiguous_times = 0; // clocks-back readings, earlier offset taken
    std::size_t skipped_times = 0;   // clocks-forward readings, earlier offset taken
    std::size_t stations_skipped = 0; // station rows without usable coordinates
    std::string origin_date;         // window start, local midnight
    double horizon_hours = 0.0;      // T
    double split_hours = 0.0;        // T*
    std::size_t total_rejected() const {
        std::size_t n = 0;
        for (const auto& [k, v] : rejected) n += v;
        return n;
    }
};

// Window boundaries as civil dates: journeys from first_day 00:00 local up
// to (but excluding) the midnight after last_day; the first day of the test
// split separates train from test by journey end time.
struct IngestWindow {
    std::string first_day;      // ISO date, inclusive
    std::string first_test_day; // ISO date; ends before this midnight train
    std::string last_day;       // ISO date, inclusive
};

struct IngestOutput {
    EventStore train;
    EventStore test;
    StationRegistry registry;
    IngestReport report;
};

// Rows without usable coordinates are skipped (counted through the optional
// out-parameter); journeys touching such stations later reject as
// unknown_station instead of failing the whole load.
inline StationRegistry load_stations(std::istream& in, const StationColumns& cols = {},
                                     std::size_t* skipped = nullptr) {
    CsvReader reader(in);
    const std::size_t ci = reader.column(cols.id);
    const std::size_t clat = reader.column(cols.latitude);
    const std::size_t clon = reader.column(cols.longitude);
    const bool named = reader.has_column(cols.name);
    const std::size_t cname = named ? reader.column(cols.name) : 0;
    StationRegistry reg;
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() <= std::max({ci, clat, clon})) {
            if (skipped) ++*skipped;
            continue;
        }
        Station s;
        s.id = row[ci];
        s.name = named && cname < row.size() ? row[cname] : "";
        try {
            std::size_t lat_len = 0, lon_len = 0;
            s.latitude = std::stod(row[clat], &lat_len);
            s.longitude = std::stod(row[clon], &lon_len);
            if (lat_len != row[clat].size() || lon_len != row[clon].size())
                throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            if (skipped) ++*skipped;
            continue;
        }
        reg.add(std::move(s));
    }
    if (reg.size() == 0) throw schema_error("station file contains no usable stations");
    return reg;
}

inline StationRegistry load_stations_file(const std::string& path, const StationColumns& cols = {},
                                          std::size_t* skipped = nullptr) {
    std::ifstream in(path);
    if (!in) throw argument_error("cannot open stations file " + path);
    return load_stations(in, cols, skipped);
}

namespace detail {

inline bool parse_long(const std::string& s, long long& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [p, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && p == end;
}

} // namespace detail

// Parses journey CSVs into train/test stores against the window. Timestamps
// are converted to hours since the window origin (first_day local midnight);
// records land in train when they end before the first test day. Every
// rejected row is counted under exactly one reason; nothing is dropped
// silently.
inline IngestOutput ingest(const std::vector<std::string>& journey_files,
                           const std::string& stations_file, const ColumnMap& columns,
                           const IngestWindow& window,
                           const StationColumns& station_columns = {}) {
    IngestOutput out;
    std::size_t stations_skipped = 0;
    out.registry = load_stations_file(stations_file, station_columns, &stations_skipped);

    const auto origin = civil_to_epoch(parse_iso_date(window.first_day), columns.timezone);
    const auto split = civil_to_epoch(parse_iso_date(window.first_test_day), columns.timezone);
    auto last = parse_iso_date(window.last_day);
    // End boundary: the midnight after the (inclusive) last day.
    const std::int64_t last_days = days_from_civil(last.year, last.month, last.day) + 1;
    CivilDateTime end_civil;
    civil_from_days(last_days, end_civil.year, end_civil.month, end_civil.day);
    const auto end = civil_to_epoch(end_civil, columns.timezone);

    const double horizon_hours = static_cast<double>(end.epoch_seconds - origin.epoch_seconds) / 3600.0;
    const double split_hours = static_cast<double>(split.epoch_seconds - origin.epoch_seconds) / 3600.0;
    if (!(split_hours > 0.0) || !(split_hours < horizon_hours))
        throw argument_error("split date must lie strictly inside the window");

    IngestReport& report = out.report;
    report.origin_date = window.first_day;
    report.horizon_hours = horizon_hours;
    report.split_hours = split_hours;
    report.stations_skipped = stations_skipped;

    std::vector<EventRecord> train_records, test_records;
    std::unordered_set<std::string> seen_rentals;

    for (const std::string& path : journey_files) {
        std::ifstream in(path);
        if (!in) throw argument_error("cannot open journey file " + path);
        CsvReader reader(in);
        const std::size_t c_rental = reader.column(columns.rental_id);
        const std::size_t c_start = reader.column(columns.start_time);
        const std::size_t c_end = reader.column(columns.end_time);
        const std::size_t c_src = reader.column(columns.start_station);
        const std::size_t c_dst = reader.column(columns.end_station);
        const std::size_t c_dur = reader.column(columns.duration);
        const std::size_t needed = std::max({c_rental, c_start, c_end, c_src, c_dst, c_dur});

        std::vector<std::string> row;
        while (reader.next(row)) {
            ++report.rows_read;
            if (row.size() <= needed) {
                ++report.rejected[RejectReason::unparseable];
                continue;
            }
            CivilDateTime start_civil, end_civil_row;
            if (!parse_timestamp(row[c_start], columns.timestamp_format, start_civil) ||
                !parse_timestamp(row[c_end], columns.timestamp_format, end_civil_row)) {
                ++report.rejected[RejectReason::unparseable];
                continue;
            }
            const auto start_res = civil_to_epoch(start_civil, columns.timezone);
            const auto end_res = civil_to_epoch(end_civil_row, columns.timezone);
            report.ambiguous_times += (start_res.ambiguous ? 1 : 0) + (end_res.ambiguous ? 1 : 0);
            report.skipped_times += (start_res.skipped ? 1 : 0) + (end_res.skipped ? 1 : 0);

            const double start_h =
                static_cast<double>(start_res.epoch_seconds - origin.epoch_seconds) / 3600.0;
            const double end_h =
                static_cast<double>(end_res.epoch_seconds - origin.epoch_seconds) / 3600.0;
            if (!(end_h > start_h)) {
                ++report.rejected[RejectReason::non_positive_duration];
                continue;
            }
            const auto src = out.registry.find(row[c_src]);
            const auto dst = out.registry.find(row[c_dst]);
            if (!src || !dst) {
                ++report.rejected[RejectReason::unknown_station];
                continue;
            }
            if (start_h < 0.0 || end_h > horizon_hours) {
                ++report.rejected[RejectReason::outside_window];
                continue;
            }
            long long duration_s = 0;
            if (detail::parse_long(row[c_dur], duration_s)) {
                // The duration column is only a cross-check; a gap over a
                // minute against the timestamps marks corrupted rows.
                const double implied = (end_h - start_h) * 3600.0;
                if (std::abs(implied - static_cast<double>(duration_s)) > 60.0) {
                    ++report.rejected[RejectReason::duration_mismatch];
                    continue;
                }
            } else {
                ++report.rejected[RejectReason::unparseable];
                continue;
            }
            if (!seen_rentals.insert(row[c_rental]).second) {
                ++report.rejected[RejectReason::duplicate_rental_id];
                continue;
            }
            EventRecord rec{*src, *dst, start_h, end_h};
            (end_h < split_hours ? train_records : test_records).push_back(rec);
            ++report.accepted;
        }
    }

    if (report.accepted == 0) throw argument_error("no journeys were accepted from the inputs");
    out.train = EventStore(std::move(train_records), out.registry.size(), split_hours);
    out.test = EventStore(std::move(test_records), out.registry.size(), horizon_hours);
    return out;
}

struct NodeSummary {
    NodeId node = 0;
    std::string external_id;
    std::size_t starts = 0;
    std::size_t ends = 0;
};

struct SummaryTable {
    std::vector<NodeSummary> nodes;
    std::size_t total_records = 0;
    double horizon_hours = 0.0;
};

inline SummaryTable summarize(const EventStore& store, const StationRegistry& reg) {
    SummaryTable t;
    t.total_records = store.size();
    t.horizon_hours = store.horizon();
    for (std::size_t i = 0; i < store.num_nodes(); ++i) {
        NodeSummary s;
        s.node = static_cast<NodeId>(i);
        s.external_id = i < reg.size() ? reg.station(s.node).id : "";
        s.starts = store.starts(s.node).size();
        s.ends = store.ends(s.node).size();
        t.nodes.push_back(std::move(s));
    }
    return t;
}

} // namespace gbmep
