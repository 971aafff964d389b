#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcast/grid.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/tensor_io.hpp"
#include "gridcast/test_slots.hpp"
#include "gridcast/util.hpp"

namespace gridcast {

/// Dataset manifest: a city name plus date -> day-file map. Relative paths
/// are resolved against the manifest's directory on load.
struct DayManifest {
    std::string city;
    DayList days;

    static DayManifest load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw InvalidInputError("cannot open manifest: " + path.string());
        nlohmann::json j;
        in >> j;
        DayManifest m;
        m.city = j.at("city").get<std::string>();
        const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
        for (const auto& [key, value] : j.at("days").items()) {
            const auto date = parse_date(key);
            if (!date) throw InvalidInputError("bad date in manifest: " + key);
            std::filesystem::path p = value.get<std::string>();
            if (p.is_relative()) p = base / p;
            m.days.emplace_back(*date, p);
        }
        std::sort(m.days.begin(), m.days.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        return m;
    }

    void save(const std::filesystem::path& path) const {
        nlohmann::json day_map = nlohmann::json::object();
        for (const auto& [date, file] : days) day_map[format_date(date)] = file.string();
        std::ofstream out(path);
        if (!out) throw InvalidInputError("cannot write manifest: " + path.string());
        out << nlohmann::json{{"city", city}, {"days", day_map}}.dump(2) << "\n";
    }
};

/// Grid-wide volume per 5-minute bin (all four heading volumes summed),
/// averaged over a set of days.
struct DailyVolumeCurve {
    std::string label;
    std::vector<double> values;
};

class DailyVolumeAccumulator {
public:
    void add_day(const ByteTensor& day) {
        if (day.rank() != 4 || day.dim(0) != kBinsPerDay || day.dim(3) != kChannels) {
            throw InvalidInputError("day movie must have shape (288, rows, cols, 8), got " +
                                    day.shape_string());
        }
        if (sums_.empty()) sums_.assign(kBinsPerDay, 0);
        const std::size_t cells = day.dim(1) * day.dim(2);
        for (std::size_t b = 0; b < kBinsPerDay; ++b) {
            const std::uint8_t* frame = day.data() + b * cells * 8;
            std::uint64_t s = 0;
            for (std::size_t cell = 0; cell < cells; ++cell) {
                const std::uint8_t* px = frame + cell * 8;
                s += px[0] + px[2] + px[4] + px[6];
            }
            sums_[b] += s;
        }
        days_ += 1;
    }

    std::size_t days() const { return days_; }

    DailyVolumeCurve curve(const std::string& label) const {
        if (days_ == 0) throw InvalidInputError("daily volume curve needs at least one day");
        DailyVolumeCurve c;
        c.label = label;
        c.values.resize(kBinsPerDay);
        for (std::size_t b = 0; b < kBinsPerDay; ++b) {
            c.values[b] = static_cast<double>(sums_[b]) / static_cast<double>(days_);
        }
        return c;
    }

private:
    std::vector<std::uint64_t> sums_;
    std::size_t days_ = 0;
};

inline DailyVolumeCurve daily_volume_curve(const std::vector<ByteTensor>& days,
                                           const std::string& label) {
    DailyVolumeAccumulator acc;
    for (const ByteTensor& d : days) acc.add_day(d);
    return acc.curve(label);
}

inline DailyVolumeCurve daily_volume_curve_files(const std::vector<std::filesystem::path>& files,
                                                 const std::string& label) {
    DailyVolumeAccumulator acc;
    for (const auto& f : files) acc.add_day(read_tensor(f));
    return acc.curve(label);
}

/// Rows from several curves share one file so regimes can be overlaid.
inline void write_daily_volume_csv(std::ostream& out,
                                   const std::vector<DailyVolumeCurve>& curves) {
    out << "bin,value,label\n";
    for (const DailyVolumeCurve& c : curves) {
        for (std::size_t b = 0; b < c.values.size(); ++b) {
            out << b << "," << c.values[b] << "," << c.label << "\n";
        }
    }
}

/// Per-bin series of one directional pixel's channel pair. With several
/// days the series carries day-wise mean and population std per bin.
struct PixelTimeseries {
    DirectionalPixel pixel;
    std::size_t days = 0;
    std::vector<double> vol_mean, vol_std, speed_mean, speed_std;

    void write_csv(std::ostream& out) const {
        if (days == 1) {
            out << "bin,volume,speed\n";
            for (std::size_t b = 0; b < vol_mean.size(); ++b) {
                out << b << "," << vol_mean[b] << "," << speed_mean[b] << "\n";
            }
        } else {
            out << "bin,vol_mean,vol_std,speed_mean,speed_std\n";
            for (std::size_t b = 0; b < vol_mean.size(); ++b) {
                out << b << "," << vol_mean[b] << "," << vol_std[b] << "," << speed_mean[b] << ","
                    << speed_std[b] << "\n";
            }
        }
    }
};

class PixelSeriesAccumulator {
public:
    explicit PixelSeriesAccumulator(DirectionalPixel p) : pixel_(p) {}

    void add_day(const ByteTensor& day) {
        if (day.rank() != 4 || day.dim(0) != kBinsPerDay || day.dim(3) != kChannels) {
            throw InvalidInputError("day movie must have shape (288, rows, cols, 8), got " +
                                    day.shape_string());
        }
        if (pixel_.row >= day.dim(1) || pixel_.col >= day.dim(2)) {
            throw InvalidInputError("pixel outside the grid");
        }
        if (vol_sum_.empty()) {
            vol_sum_.assign(kBinsPerDay, 0);
            vol_sq_.assign(kBinsPerDay, 0);
            spd_sum_.assign(kBinsPerDay, 0);
            spd_sq_.assign(kBinsPerDay, 0);
        }
        for (std::size_t b = 0; b < kBinsPerDay; ++b) {
            const std::uint64_t v =
                day(b, pixel_.row, pixel_.col,
                    static_cast<std::size_t>(volume_channel(pixel_.heading)));
            const std::uint64_t s =
                day(b, pixel_.row, pixel_.col,
                    static_cast<std::size_t>(speed_channel(pixel_.heading)));
            vol_sum_[b] += v;
            vol_sq_[b] += v * v;
            spd_sum_[b] += s;
            spd_sq_[b] += s * s;
        }
        days_ += 1;
    }

    PixelTimeseries series() const {
        if (days_ == 0) throw InvalidInputError("pixel series needs at least one day");
        PixelTimeseries t;
        t.pixel = pixel_;
        t.days = days_;
        t.vol_mean.resize(kBinsPerDay);
        t.vol_std.resize(kBinsPerDay);
        t.speed_mean.resize(kBinsPerDay);
        t.speed_std.resize(kBinsPerDay);
        const double m = static_cast<double>(days_);
        for (std::size_t b = 0; b < kBinsPerDay; ++b) {
            t.vol_mean[b] = static_cast<double>(vol_sum_[b]) / m;
            t.vol_std[b] = std::sqrt(std::max(
                0.0, static_cast<double>(vol_sq_[b]) / m - t.vol_mean[b] * t.vol_mean[b]));
            t.speed_mean[b] = static_cast<double>(spd_sum_[b]) / m;
            t.speed_std[b] = std::sqrt(std::max(
                0.0, static_cast<double>(spd_sq_[b]) / m - t.speed_mean[b] * t.speed_mean[b]));
        }
        return t;
    }

private:
    DirectionalPixel pixel_;
    std::size_t days_ = 0;
    std::vector<std::uint64_t> vol_sum_, vol_sq_, spd_sum_, spd_sq_;
};

inline PixelTimeseries pixel_timeseries(const std::vector<ByteTensor>& days,
                                        DirectionalPixel p) {
    PixelSeriesAccumulator acc(p);
    for (const ByteTensor& d : days) acc.add_day(d);
    return acc.series();
}

}  // namespace gridcast
