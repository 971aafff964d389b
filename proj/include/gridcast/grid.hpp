#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gridcast/util.hpp"

namespace gridcast {

inline constexpr int kChannels = 8;
inline constexpr int kBinsPerDay = 288;
inline constexpr int kBinMinutes = 5;

/// Heading quadrants in channel order. Each quadrant owns a (volume, speed)
/// channel pair: NE -> (0,1), SE -> (2,3), SW -> (4,5), NW -> (6,7).
enum class Heading : std::uint8_t { NE = 0, SE = 1, SW = 2, NW = 3 };

inline constexpr std::array<Heading, 4> kHeadings = {Heading::NE, Heading::SE, Heading::SW,
                                                     Heading::NW};

constexpr int volume_channel(Heading h) { return 2 * static_cast<int>(h); }
constexpr int speed_channel(Heading h) { return 2 * static_cast<int>(h) + 1; }

constexpr std::string_view heading_name(Heading h) {
    constexpr std::string_view names[4] = {"NE", "SE", "SW", "NW"};
    return names[static_cast<int>(h)];
}

inline std::optional<Heading> parse_heading(std::string_view s) {
    for (Heading h : kHeadings) {
        if (s == heading_name(h)) return h;
    }
    return std::nullopt;
}

/// A (row, col, heading) triple: one virtual volume/speed detector.
/// A default-sized grid has 495*436*4 = 863,280 of them.
struct DirectionalPixel {
    std::size_t row = 0;
    std::size_t col = 0;
    Heading heading = Heading::NE;

    auto operator<=>(const DirectionalPixel&) const = default;
};

/// Per-city grid geometry and encoding parameters.
///
/// The grid is anchored at its southwest corner (lat_min, lon_min); row 0 is
/// the northernmost band (image convention). With rotate_90 the geographic
/// box spans cols x rows cells and binned coordinates are transposed into
/// the stored (rows, cols) frame.
struct CityConfig {
    std::string name;
    double lat_min = 0.0;
    double lon_min = 0.0;
    std::size_t rows = 495;
    std::size_t cols = 436;
    double cell_size = 0.001;
    int bins_per_day = kBinsPerDay;
    int bin_minutes = kBinMinutes;
    std::uint32_t volume_cap = 255;
    double speed_cap = 120.0;
    std::uint32_t privacy_threshold = 0;
    bool rotate_90 = false;

    void validate() const {
        if (rows == 0 || cols == 0) throw InvalidInputError("city config: grid must be non-empty");
        if (cell_size <= 0) throw InvalidInputError("city config: cell_size must be positive");
        if (bins_per_day <= 0 || bin_minutes <= 0 || bins_per_day * bin_minutes != 24 * 60) {
            throw InvalidInputError("city config: bins_per_day * bin_minutes must cover one day");
        }
        if (volume_cap < 1) throw InvalidInputError("city config: volume_cap must be >= 1");
        if (!(speed_cap > 0)) throw InvalidInputError("city config: speed_cap must be > 0");
    }

    /// Number of latitude/longitude bins of the geographic box.
    std::size_t lat_bins() const { return rotate_90 ? cols : rows; }
    std::size_t lon_bins() const { return rotate_90 ? rows : cols; }

    double lat_max() const { return lat_min + static_cast<double>(lat_bins()) * cell_size; }
    double lon_max() const { return lon_min + static_cast<double>(lon_bins()) * cell_size; }

    static CityConfig from_json(const nlohmann::json& j) {
        CityConfig c;
        c.name = j.at("name").get<std::string>();
        c.lat_min = j.at("lat_min").get<double>();
        c.lon_min = j.at("lon_min").get<double>();
        c.rows = j.value("rows", std::size_t{495});
        c.cols = j.value("cols", std::size_t{436});
        c.cell_size = j.value("cell_size", 0.001);
        c.bins_per_day = j.value("bins_per_day", kBinsPerDay);
        c.bin_minutes = j.value("bin_minutes", kBinMinutes);
        c.volume_cap = j.value("volume_cap", std::uint32_t{255});
        c.speed_cap = j.value("speed_cap", 120.0);
        c.privacy_threshold = j.value("privacy_threshold", std::uint32_t{0});
        c.rotate_90 = j.value("rotate_90", false);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"name", name},
                              {"lat_min", lat_min},
                              {"lon_min", lon_min},
                              {"rows", rows},
                              {"cols", cols},
                              {"cell_size", cell_size},
                              {"bins_per_day", bins_per_day},
                              {"bin_minutes", bin_minutes},
                              {"volume_cap", volume_cap},
                              {"speed_cap", speed_cap},
                              {"privacy_threshold", privacy_threshold},
                              {"rotate_90", rotate_90}};
    }

    static CityConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw InvalidInputError("cannot open city config: " + path.string());
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw InvalidInputError("cannot write city config: " + path.string());
        out << to_json().dump(2) << "\n";
    }
};

struct GridCell {
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const GridCell&) const = default;
};

/// Bin a WGS84 coordinate into the stored grid frame. Row 0 is the
/// northernmost band. Out-of-bounds coordinates are a value, not an error.
inline std::optional<GridCell> cell_of(double lat, double lon, const CityConfig& cfg) {
    if (!std::isfinite(lat) || !std::isfinite(lon)) return std::nullopt;
    const double row_f = std::floor((cfg.lat_max() - lat) / cfg.cell_size);
    const double col_f = std::floor((lon - cfg.lon_min) / cfg.cell_size);
    if (row_f < 0 || col_f < 0 || row_f >= static_cast<double>(cfg.lat_bins()) ||
        col_f >= static_cast<double>(cfg.lon_bins())) {
        return std::nullopt;
    }
    std::size_t row = static_cast<std::size_t>(row_f);
    std::size_t col = static_cast<std::size_t>(col_f);
    if (cfg.rotate_90) std::swap(row, col);
    return GridCell{row, col};
}

/// Quadrant of a heading in degrees: NE [0,90), SE [90,180), SW [180,270),
/// NW [270,360). Headings outside [0,360) are normalized by modulo.
inline Heading quadrant_of(double heading_deg) {
    if (!std::isfinite(heading_deg)) throw InvalidInputError("heading must be finite");
    double h = std::fmod(heading_deg, 360.0);
    if (h < 0) h += 360.0;
    if (h >= 360.0) h = 0.0;  // fmod can land exactly on 360 after the += above
    return static_cast<Heading>(static_cast<int>(h / 90.0));
}

/// Frame index of a local wall-clock time: floor(minutes since midnight / 5).
inline int bin_of(const LocalDateTime& t) {
    return (t.hour * 60 + t.minute) / kBinMinutes;
}

struct CellBounds {
    double lat_lo = 0, lat_hi = 0, lon_lo = 0, lon_hi = 0;

    double lat_center() const { return 0.5 * (lat_lo + lat_hi); }
    double lon_center() const { return 0.5 * (lon_lo + lon_hi); }
};

/// Geographic bounding box of a stored cell (inverse of cell_of up to the
/// half-open boundary convention).
inline CellBounds cell_bounds(GridCell cell, const CityConfig& cfg) {
    std::size_t lat_bin = cell.row;
    std::size_t lon_bin = cell.col;
    if (cfg.rotate_90) std::swap(lat_bin, lon_bin);
    if (lat_bin >= cfg.lat_bins() || lon_bin >= cfg.lon_bins()) {
        throw InvalidInputError("cell outside grid");
    }
    CellBounds b;
    b.lat_hi = cfg.lat_max() - static_cast<double>(lat_bin) * cfg.cell_size;
    b.lat_lo = b.lat_hi - cfg.cell_size;
    b.lon_lo = cfg.lon_min + static_cast<double>(lon_bin) * cfg.cell_size;
    b.lon_hi = b.lon_lo + cfg.cell_size;
    return b;
}

}  // namespace gridcast
