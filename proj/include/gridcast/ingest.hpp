#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcast/grid.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/util.hpp"

namespace gridcast {

/// One GPS probe sample: position, local timestamp, speed in km/h and
/// heading in degrees clockwise from north.
struct ProbeRecord {
    double lat = 0;
    double lon = 0;
    LocalDateTime t;
    double speed = 0;
    double heading = 0;
};

struct IngestStats {
    std::uint64_t records = 0;
    std::uint64_t in_bounds = 0;
    std::uint64_t out_of_bounds = 0;
    std::uint64_t rejected = 0;

    IngestStats& operator+=(const IngestStats& o) {
        records += o.records;
        in_bounds += o.in_bounds;
        out_of_bounds += o.out_of_bounds;
        rejected += o.rejected;
        return *this;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"records", records},
                              {"in_bounds", in_bounds},
                              {"out_of_bounds", out_of_bounds},
                              {"rejected", rejected}};
    }
};

/// Raw per-cell sums for one day. Speeds are accumulated as integer
/// milli-km/h so that merging partial accumulators is exact regardless of
/// shard boundaries or merge order.
class DayAccumulator {
public:
    struct Plane {
        std::vector<std::uint32_t> count;
        std::vector<std::uint64_t> speed_milli;

        bool empty() const { return count.empty(); }
    };

    DayAccumulator() = default;
    explicit DayAccumulator(const CityConfig& cfg)
        : rows_(cfg.rows), cols_(cfg.cols), frames_(static_cast<std::size_t>(cfg.bins_per_day)) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t bins() const { return frames_.size(); }

    void add(int bin, GridCell cell, Heading h, std::uint64_t speed_milli) {
        Plane& p = plane(static_cast<std::size_t>(bin));
        const std::size_t i = slot(cell, h);
        p.count[i] += 1;
        p.speed_milli[i] += speed_milli;
    }

    const Plane& frame(std::size_t bin) const { return frames_.at(bin); }

    std::uint32_t count_at(std::size_t bin, GridCell cell, Heading h) const {
        const Plane& p = frames_.at(bin);
        return p.empty() ? 0 : p.count[slot(cell, h)];
    }

    std::uint64_t speed_milli_at(std::size_t bin, GridCell cell, Heading h) const {
        const Plane& p = frames_.at(bin);
        return p.empty() ? 0 : p.speed_milli[slot(cell, h)];
    }

    /// Elementwise sum; an untouched plane counts as all zeros.
    void merge(const DayAccumulator& other) {
        if (rows_ != other.rows_ || cols_ != other.cols_ || bins() != other.bins()) {
            throw InvalidInputError("cannot merge accumulators of different geometry");
        }
        for (std::size_t b = 0; b < frames_.size(); ++b) {
            const Plane& src = other.frames_[b];
            if (src.empty()) continue;
            Plane& dst = plane(b);
            for (std::size_t i = 0; i < src.count.size(); ++i) {
                dst.count[i] += src.count[i];
                dst.speed_milli[i] += src.speed_milli[i];
            }
        }
    }

    std::size_t slot(GridCell cell, Heading h) const {
        return (cell.row * cols_ + cell.col) * 4 + static_cast<std::size_t>(h);
    }

private:
    Plane& plane(std::size_t bin) {
        Plane& p = frames_.at(bin);
        if (p.empty()) {
            p.count.assign(rows_ * cols_ * 4, 0);
            p.speed_milli.assign(rows_ * cols_ * 4, 0);
        }
        return p;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Plane> frames_;
};

/// Integer milli-km/h representation used by the accumulator.
inline std::uint64_t speed_to_milli(double speed) {
    return static_cast<std::uint64_t>(std::llround(speed * 1000.0));
}

/// Volume byte for a cell: 0 when the count is zero or below the privacy
/// threshold, otherwise round(255 * min(count, cap) / cap) pulled up to at
/// least 1 so suppression stays distinguishable from genuine emptiness.
inline std::uint8_t encode_volume(std::uint32_t count, const CityConfig& cfg) {
    if (count == 0 || count < cfg.privacy_threshold) return 0;
    const std::uint64_t capped = std::min<std::uint64_t>(count, cfg.volume_cap);
    std::uint64_t v = round_half_up_ratio(255 * capped, cfg.volume_cap);
    if (v == 0) v = 1;
    if (v > 255) v = 255;
    return static_cast<std::uint8_t>(v);
}

/// Speed byte for a cell: 0 when the cell encodes no volume, otherwise the
/// mean speed scaled so speed_cap maps to 255, clamped into [1, 255].
inline std::uint8_t encode_speed(std::uint32_t count, std::uint64_t speed_milli,
                                 const CityConfig& cfg) {
    if (count == 0 || count < cfg.privacy_threshold) return 0;
    const std::uint64_t cap_milli = static_cast<std::uint64_t>(std::llround(cfg.speed_cap * 1000.0));
    // mean = speed_milli / (1000 * count) km/h; byte = round(255 * min(mean, cap) / cap).
    // Done in 128-bit integers so the result depends only on the integer sums.
    const unsigned __int128 mean_num = speed_milli;          // per-record milli sums
    const unsigned __int128 cap_num = static_cast<unsigned __int128>(cap_milli) * count;
    const unsigned __int128 num = mean_num < cap_num ? mean_num : cap_num;
    const unsigned __int128 v = (2 * 255 * num + cap_num) / (2 * cap_num);
    std::uint64_t byte = static_cast<std::uint64_t>(v);
    if (byte == 0) byte = 1;
    if (byte > 255) byte = 255;
    return static_cast<std::uint8_t>(byte);
}

enum class RecordFate { InBounds, OutOfBounds, Rejected };

/// Route one record into the accumulator. Records on the wrong date or
/// outside the grid are a normal occurrence, not an error.
inline RecordFate accumulate(DayAccumulator& acc, const ProbeRecord& rec, const CityConfig& cfg,
                             const LocalDate& date) {
    if (!std::isfinite(rec.lat) || !std::isfinite(rec.lon) || !std::isfinite(rec.speed) ||
        !std::isfinite(rec.heading) || rec.speed < 0) {
        return RecordFate::Rejected;
    }
    if (rec.t.date != date) return RecordFate::OutOfBounds;
    const auto cell = cell_of(rec.lat, rec.lon, cfg);
    if (!cell) return RecordFate::OutOfBounds;
    acc.add(bin_of(rec.t), *cell, quadrant_of(rec.heading), speed_to_milli(rec.speed));
    return RecordFate::InBounds;
}

/// Encode the finished accumulator into a (bins, rows, cols, 8) movie.
inline ByteTensor finalize(const DayAccumulator& acc, const CityConfig& cfg,
                           unsigned workers = 1) {
    ByteTensor out({acc.bins(), acc.rows(), acc.cols(), 8}, 0);
    const std::size_t cells = acc.rows() * acc.cols();
    parallel_for(std::size_t{0}, acc.bins(), workers, [&](std::size_t bin) {
        const DayAccumulator::Plane& p = acc.frame(bin);
        if (p.empty()) return;
        std::uint8_t* frame = out.data() + bin * cells * 8;
        for (std::size_t i = 0; i < cells * 4; ++i) {
            const std::uint32_t c = p.count[i];
            if (c == 0) continue;
            const std::size_t cell = i / 4;
            const Heading h = static_cast<Heading>(i % 4);
            frame[cell * 8 + static_cast<std::size_t>(volume_channel(h))] = encode_volume(c, cfg);
            frame[cell * 8 + static_cast<std::size_t>(speed_channel(h))] =
                encode_speed(c, p.speed_milli[i], cfg);
        }
    });
    return out;
}

namespace detail {

inline bool parse_full_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && !s.empty();
}

}  // namespace detail

inline constexpr std::string_view kProbeHeader = "lat,lon,timestamp,speed,heading";

/// Parse one CSV data line. Returns nullopt for anything malformed: wrong
/// field count, unparseable numbers, or a bad timestamp.
inline std::optional<ProbeRecord> parse_probe_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::string_view fields[5];
    std::size_t n = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            if (n == 5) return std::nullopt;
            fields[n++] = line.substr(start, i - start);
            start = i + 1;
        }
    }
    if (n != 5) return std::nullopt;

    ProbeRecord rec;
    if (!detail::parse_full_double(fields[0], rec.lat)) return std::nullopt;
    if (!detail::parse_full_double(fields[1], rec.lon)) return std::nullopt;
    const auto ts = parse_datetime(fields[2]);
    if (!ts) return std::nullopt;
    rec.t = *ts;
    if (!detail::parse_full_double(fields[3], rec.speed)) return std::nullopt;
    if (!detail::parse_full_double(fields[4], rec.heading)) return std::nullopt;
    return rec;
}

namespace detail {

/// Process the lines of buf whose first byte lies in [begin, end).
/// data_start points at the first byte after the header line.
inline void ingest_range(std::string_view buf, std::size_t data_start, std::size_t begin,
                         std::size_t end, DayAccumulator& acc, IngestStats& stats,
                         const CityConfig& cfg, const LocalDate& date) {
    std::size_t pos = std::max(begin, data_start);
    if (pos > data_start && buf[pos - 1] != '\n') {
        // Mid-line start: this line belongs to the previous range.
        const std::size_t nl = buf.find('\n', pos);
        if (nl == std::string_view::npos) return;
        pos = nl + 1;
    }
    while (pos < end && pos < buf.size()) {
        std::size_t nl = buf.find('\n', pos);
        if (nl == std::string_view::npos) nl = buf.size();
        std::string_view line = buf.substr(pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        stats.records += 1;
        const auto rec = parse_probe_line(line);
        if (!rec) {
            stats.rejected += 1;
            continue;
        }
        switch (accumulate(acc, *rec, cfg, date)) {
            case RecordFate::InBounds: stats.in_bounds += 1; break;
            case RecordFate::OutOfBounds: stats.out_of_bounds += 1; break;
            case RecordFate::Rejected: stats.rejected += 1; break;
        }
    }
}

}  // namespace detail

/// Ingest one CSV file into the accumulator. The header line is mandatory.
/// Workers split the file by byte ranges; integer accumulation makes the
/// result identical for any worker count.
inline IngestStats ingest_file(const std::filesystem::path& path, DayAccumulator& acc,
                               const CityConfig& cfg, const LocalDate& date,
                               unsigned workers = 1) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open probe file: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t header_end = buf.find('\n');
    if (header_end == std::string::npos) header_end = buf.size();
    std::string_view header(buf.data(), header_end);
    if (!header.empty() && header.back() == '\r') header.remove_suffix(1);
    if (header != kProbeHeader) {
        throw InvalidInputError("bad probe header in " + path.string() + ": expected \"" +
                                std::string(kProbeHeader) + "\"");
    }
    const std::size_t data_start = std::min(header_end + 1, buf.size());

    if (workers <= 1 || buf.size() - data_start < 1 << 16) {
        IngestStats stats;
        detail::ingest_range(buf, data_start, data_start, buf.size(), acc, stats, cfg, date);
        return stats;
    }

    const std::size_t nchunks = workers;
    std::vector<DayAccumulator> parts(nchunks);
    std::vector<IngestStats> part_stats(nchunks);
    for (auto& p : parts) p = DayAccumulator(cfg);
    const std::size_t span = buf.size() - data_start;
    parallel_for(std::size_t{0}, nchunks, workers, [&](std::size_t i) {
        const std::size_t lo = data_start + span * i / nchunks;
        const std::size_t hi = data_start + span * (i + 1) / nchunks;
        detail::ingest_range(buf, data_start, lo, hi, parts[i], part_stats[i], cfg, date);
    });

    IngestStats stats;
    for (std::size_t i = 0; i < nchunks; ++i) {
        acc.merge(parts[i]);
        stats += part_stats[i];
    }
    return stats;
}

/// Ingest a set of probe files into one day movie.
inline ByteTensor ingest_day(const std::vector<std::filesystem::path>& paths,
                             const CityConfig& cfg, const LocalDate& date, unsigned workers,
                             IngestStats* stats_out = nullptr) {
    DayAccumulator acc(cfg);
    IngestStats stats;
    for (const auto& p : paths) stats += ingest_file(p, acc, cfg, date, workers);
    if (stats_out) *stats_out = stats;
    return finalize(acc, cfg, workers);
}

}  // namespace gridcast
