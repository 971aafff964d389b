#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcast/grid.hpp"
#include "gridcast/metrics.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/test_slots.hpp"
#include "gridcast/util.hpp"

namespace gridcast {

/// A jam-like anomaly at one directional pixel: a run of bins where volume
/// is unusually high while speed is unusually low.
struct OutlierEvent {
    std::size_t row = 0;
    std::size_t col = 0;
    Heading heading = Heading::NE;
    int start_bin = 0;
    int duration = 0;

    auto operator<=>(const OutlierEvent&) const = default;
};

struct OutlierCriteria {
    double vol_quantile = 0.90;
    double speed_quantile = 0.05;
    std::uint32_t min_volume = 5;
    int window_start = 96;
    int window_end = 240;
    int min_consecutive = 2;
    double vol_mean_factor = 1.5;
    double speed_mean_factor = 0.7;
    double context_hours = 2.0;

    int context_bins() const {
        return static_cast<int>(std::llround(context_hours * 60.0 / kBinMinutes));
    }

    void validate() const {
        if (!(vol_quantile > 0 && vol_quantile < 1) ||
            !(speed_quantile > 0 && speed_quantile < 1)) {
            throw InvalidInputError("outlier criteria: quantiles must lie in (0,1)");
        }
        if (!(vol_mean_factor > 0) || !(speed_mean_factor > 0)) {
            throw InvalidInputError("outlier criteria: mean factors must be positive");
        }
        if (window_start < 0 || window_end < window_start || window_end >= kBinsPerDay) {
            throw InvalidInputError("outlier criteria: bad detection window");
        }
        if (min_consecutive < 1) {
            throw InvalidInputError("outlier criteria: min_consecutive must be >= 1");
        }
        if (!(context_hours > 0)) {
            throw InvalidInputError("outlier criteria: context_hours must be positive");
        }
    }

    static OutlierCriteria from_json(const nlohmann::json& j) {
        OutlierCriteria c;
        c.vol_quantile = j.value("vol_quantile", c.vol_quantile);
        c.speed_quantile = j.value("speed_quantile", c.speed_quantile);
        c.min_volume = j.value("min_volume", c.min_volume);
        if (j.contains("window")) {
            const auto& w = j.at("window");
            c.window_start = w.at(0).get<int>();
            c.window_end = w.at(1).get<int>();
        }
        c.min_consecutive = j.value("min_consecutive", c.min_consecutive);
        c.vol_mean_factor = j.value("vol_mean_factor", c.vol_mean_factor);
        c.speed_mean_factor = j.value("speed_mean_factor", c.speed_mean_factor);
        c.context_hours = j.value("context_hours", c.context_hours);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"vol_quantile", vol_quantile},
                              {"speed_quantile", speed_quantile},
                              {"min_volume", min_volume},
                              {"window", {window_start, window_end}},
                              {"min_consecutive", min_consecutive},
                              {"vol_mean_factor", vol_mean_factor},
                              {"speed_mean_factor", speed_mean_factor},
                              {"context_hours", context_hours}};
    }

    static OutlierCriteria load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw InvalidInputError("cannot open criteria file: " + path.string());
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

/// Empirical nearest-rank quantiles per (row, col, channel), computed over
/// the frames of one day by counting sort.
struct QuantileTable {
    double q = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(std::size_t r, std::size_t c, std::size_t channel) const {
        return values[(r * cols + c) * 8 + channel];
    }
};

inline QuantileTable channel_quantiles(const ByteTensor& day, double q) {
    if (day.rank() != 4 || day.dim(3) != kChannels || day.dim(0) == 0) {
        throw InvalidInputError("expected a (frames, rows, cols, 8) day tensor, got " +
                                day.shape_string());
    }
    if (!(q > 0 && q <= 1)) throw InvalidInputError("quantile must lie in (0, 1]");

    const std::size_t n = day.dim(0);
    const std::size_t rows = day.dim(1);
    const std::size_t cols = day.dim(2);
    // Nearest rank: the k-th smallest of n samples with k = ceil(q * n).
    std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (k < 1) k = 1;
    if (k > n) k = n;

    QuantileTable table;
    table.q = q;
    table.rows = rows;
    table.cols = cols;
    table.values.assign(rows * cols * 8, 0);

    const std::size_t frame = rows * cols * 8;
    std::vector<std::uint32_t> hist(256);
    for (std::size_t cell = 0; cell < rows * cols; ++cell) {
        for (std::size_t ch = 0; ch < 8; ++ch) {
            std::fill(hist.begin(), hist.end(), 0);
            const std::uint8_t* base = day.data() + cell * 8 + ch;
            for (std::size_t t = 0; t < n; ++t) hist[base[t * frame]] += 1;
            std::size_t seen = 0;
            for (int v = 0; v < 256; ++v) {
                seen += hist[static_cast<std::size_t>(v)];
                if (seen >= k) {
                    table.values[cell * 8 + ch] = static_cast<std::uint8_t>(v);
                    break;
                }
            }
        }
    }
    return table;
}

/// Scan one day for jam events. A bin is flagged when its volume exceeds the
/// pixel's volume quantile and min_volume, its speed undercuts the speed
/// quantile, and it falls inside the detection window; maximal flagged runs
/// of sufficient length must then beat the trailing-context mean tests.
inline std::vector<OutlierEvent> detect_outliers(const ByteTensor& day,
                                                 const OutlierCriteria& crit,
                                                 unsigned workers = 1) {
    crit.validate();
    if (day.rank() != 4 || day.dim(3) != kChannels) {
        throw InvalidInputError("expected a (frames, rows, cols, 8) day tensor, got " +
                                day.shape_string());
    }
    const std::size_t n = day.dim(0);
    const std::size_t rows = day.dim(1);
    const std::size_t cols = day.dim(2);
    if (static_cast<std::size_t>(crit.window_end) >= n) {
        throw InvalidInputError("detection window extends past the day tensor");
    }

    const QuantileTable vol_q = channel_quantiles(day, crit.vol_quantile);
    const QuantileTable spd_q = channel_quantiles(day, crit.speed_quantile);

    const std::size_t frame = rows * cols * 8;
    const int ctx_bins = crit.context_bins();

    std::vector<std::vector<OutlierEvent>> per_row(rows);
    parallel_for(std::size_t{0}, rows, workers, [&](std::size_t r) {
        std::vector<std::uint8_t> vol(n), spd(n);
        for (std::size_t c = 0; c < cols; ++c) {
            for (Heading h : kHeadings) {
                const std::size_t vch = static_cast<std::size_t>(volume_channel(h));
                const std::size_t sch = static_cast<std::size_t>(speed_channel(h));
                const std::uint8_t* base = day.data() + (r * cols + c) * 8;
                for (std::size_t t = 0; t < n; ++t) {
                    vol[t] = base[t * frame + vch];
                    spd[t] = base[t * frame + sch];
                }
                const std::uint8_t vq = vol_q.at(r, c, vch);
                const std::uint8_t sq = spd_q.at(r, c, sch);

                auto flagged = [&](int t) {
                    return vol[static_cast<std::size_t>(t)] > vq &&
                           spd[static_cast<std::size_t>(t)] < sq &&
                           vol[static_cast<std::size_t>(t)] > crit.min_volume;
                };

                int t = crit.window_start;
                while (t <= crit.window_end) {
                    if (!flagged(t)) {
                        ++t;
                        continue;
                    }
                    int end = t;
                    while (end + 1 <= crit.window_end && flagged(end + 1)) ++end;
                    const int len = end - t + 1;
                    if (len >= crit.min_consecutive) {
                        double run_vol = 0, run_spd = 0;
                        for (int i = t; i <= end; ++i) {
                            run_vol += vol[static_cast<std::size_t>(i)];
                            run_spd += spd[static_cast<std::size_t>(i)];
                        }
                        run_vol /= len;
                        run_spd /= len;
                        const int ctx_lo = std::max(0, t - ctx_bins);
                        double ctx_vol = 0, ctx_spd = 0;
                        for (int i = ctx_lo; i < t; ++i) {
                            ctx_vol += vol[static_cast<std::size_t>(i)];
                            ctx_spd += spd[static_cast<std::size_t>(i)];
                        }
                        if (t > ctx_lo) {
                            ctx_vol /= t - ctx_lo;
                            ctx_spd /= t - ctx_lo;
                        }
                        if (run_vol > crit.vol_mean_factor * ctx_vol &&
                            run_spd < crit.speed_mean_factor * ctx_spd) {
                            per_row[r].push_back(OutlierEvent{r, c, h, t, len});
                        }
                    }
                    t = end + 1;
                }
            }
        }
    });

    std::vector<OutlierEvent> events;
    for (auto& v : per_row) events.insert(events.end(), v.begin(), v.end());
    return events;
}

inline void write_events_csv(std::ostream& out, const std::vector<OutlierEvent>& events) {
    out << "row,col,heading,start_bin,duration\n";
    for (const OutlierEvent& e : events) {
        out << e.row << "," << e.col << "," << heading_name(e.heading) << "," << e.start_bin
            << "," << e.duration << "\n";
    }
}

inline std::vector<OutlierEvent> read_events_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("empty events file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "row,col,heading,start_bin,duration") {
        throw InvalidInputError("bad events header: " + line);
    }
    std::vector<OutlierEvent> events;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string fields[5];
        for (int i = 0; i < 5; ++i) {
            if (!std::getline(row, fields[i], ',')) {
                throw InvalidInputError("bad events row: " + line);
            }
        }
        OutlierEvent e;
        try {
            e.row = std::stoull(fields[0]);
            e.col = std::stoull(fields[1]);
            e.start_bin = std::stoi(fields[3]);
            e.duration = std::stoi(fields[4]);
        } catch (const std::exception&) {
            throw InvalidInputError("bad events row: " + line);
        }
        const auto h = parse_heading(fields[2]);
        if (!h) throw InvalidInputError("bad heading in events row: " + line);
        e.heading = *h;
        events.push_back(e);
    }
    return events;
}

struct OutlierScoreReport {
    double mse = 0;
    std::size_t n_tests = 0;
    std::size_t values = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"mse", mse}, {"n_tests", n_tests}, {"values", values}};
    }
};

/// Special-prize scoring: per test, only the event pixel's volume and speed
/// channels count, so the denominator is always n_tests * 6 * 2.
inline OutlierScoreReport outlier_mask_score(const ByteTensor& pred, const ByteTensor& truth,
                                             const std::vector<OutlierEvent>& events) {
    if (!pred.same_shape(truth)) {
        throw InvalidInputError("prediction shape " + pred.shape_string() +
                                " does not match truth shape " + truth.shape_string());
    }
    const detail::TestStack p = detail::as_test_stack(pred, 6, "prediction");
    if (events.size() != p.n) {
        throw InvalidInputError("got " + std::to_string(events.size()) + " events for " +
                                std::to_string(p.n) + " tests");
    }
    const std::size_t frame = p.rows * p.cols * 8;
    std::uint64_t err = 0;
    for (std::size_t i = 0; i < p.n; ++i) {
        const OutlierEvent& e = events[i];
        if (e.row >= p.rows || e.col >= p.cols) {
            throw InvalidInputError("event pixel outside the grid");
        }
        const std::size_t cell = (e.row * p.cols + e.col) * 8;
        const std::size_t chans[2] = {static_cast<std::size_t>(volume_channel(e.heading)),
                                      static_cast<std::size_t>(speed_channel(e.heading))};
        for (int f = 0; f < 6; ++f) {
            const std::size_t off = (i * 6 + static_cast<std::size_t>(f)) * frame + cell;
            for (std::size_t ch : chans) {
                const int d = static_cast<int>(pred.data()[off + ch]) -
                              static_cast<int>(truth.data()[off + ch]);
                err += static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(d);
            }
        }
    }
    OutlierScoreReport rep;
    rep.n_tests = p.n;
    rep.values = p.n * 6 * 2;
    rep.mse = static_cast<double>(err) / static_cast<double>(rep.values);
    return rep;
}

struct OutlierTestSet {
    std::vector<TestSlot> slots;
    /// Events paired 1:1 with the emitted slots (skipped ones removed).
    std::vector<OutlierEvent> events;
    std::size_t skipped = 0;
};

/// Build test slots whose final input frame is each event's first bin.
/// Events without room for a full input window (or truth horizon) are
/// skipped and tallied.
inline OutlierTestSet make_outlier_tests(const ByteTensor& day, const LocalDate& date,
                                         const std::string& city,
                                         const std::vector<OutlierEvent>& events) {
    OutlierTestSet out;
    for (const OutlierEvent& e : events) {
        const int start = e.start_bin - (kInputFrames - 1);
        if (start < 0 || start > kMaxStartBin) {
            out.skipped += 1;
            continue;
        }
        auto [input, truth] = slice_slot(day, start);
        out.slots.push_back(TestSlot{city, date, start, std::move(input), std::move(truth)});
        out.events.push_back(e);
    }
    return out;
}

}  // namespace gridcast
