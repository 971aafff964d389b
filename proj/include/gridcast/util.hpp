#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <unistd.h>

namespace gridcast {

/// Thrown when an operation receives arguments that violate its contract
/// (shape mismatches, invalid configs, out-of-range indices).
struct InvalidInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Round half away from zero for non-negative values. All quantities in this
/// library are non-negative, so this is round-half-up.
inline std::int64_t round_half_up(double x) {
    return static_cast<std::int64_t>(std::floor(x + 0.5));
}

/// round_half_up(num / den) in exact integer arithmetic, den > 0.
inline std::uint64_t round_half_up_ratio(std::uint64_t num, std::uint64_t den) {
    return (2 * num + den) / (2 * den);
}

// ---------------------------------------------------------------------------
// Calendar / wall-clock helpers. Timestamps are local wall-clock values;
// there is no timezone handling anywhere in the library.
// ---------------------------------------------------------------------------

struct LocalDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const LocalDate&) const = default;
};

struct LocalDateTime {
    LocalDate date;
    int hour = 0;
    int minute = 0;
    int second = 0;

    auto operator<=>(const LocalDateTime&) const = default;
};

/// Days since 1970-01-01 for a proleptic Gregorian civil date.
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Day of week with 0 = Monday ... 6 = Sunday.
inline int day_of_week(const LocalDate& d) {
    const std::int64_t days = days_from_civil(d.year, d.month, d.day);
    return static_cast<int>((days % 7 + 10) % 7);  // 1970-01-01 was a Thursday
}

inline bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return lengths[m - 1];
}

namespace detail {

inline bool parse_uint_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        const char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

/// Parse "YYYY-MM-DD". Returns nullopt on malformed or non-existent dates.
inline std::optional<LocalDate> parse_date(std::string_view s) {
    LocalDate d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!detail::parse_uint_fixed(s, 0, 4, d.year) || !detail::parse_uint_fixed(s, 5, 2, d.month) ||
        !detail::parse_uint_fixed(s, 8, 2, d.day)) {
        return std::nullopt;
    }
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        return std::nullopt;
    }
    return d;
}

/// Parse an ISO-8601 local timestamp "YYYY-MM-DD[T ]HH:MM:SS[.frac]".
/// Fractional seconds are parsed and discarded. Anything else trailing
/// (offsets, zone names) makes the timestamp malformed: inputs are local
/// wall-clock by contract.
inline std::optional<LocalDateTime> parse_datetime(std::string_view s) {
    if (s.size() < 19) return std::nullopt;
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    const auto date = parse_date(s.substr(0, 10));
    if (!date) return std::nullopt;
    LocalDateTime t;
    t.date = *date;
    if (s[13] != ':' || s[16] != ':') return std::nullopt;
    if (!detail::parse_uint_fixed(s, 11, 2, t.hour) || !detail::parse_uint_fixed(s, 14, 2, t.minute) ||
        !detail::parse_uint_fixed(s, 17, 2, t.second)) {
        return std::nullopt;
    }
    if (t.hour > 23 || t.minute > 59 || t.second > 59) return std::nullopt;
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const std::size_t digits_begin = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == digits_begin) return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
    return t;
}

inline std::string format_date(const LocalDate& d) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

// ---------------------------------------------------------------------------
// Fork/join over an index range. Deterministic chunking: the chunk layout
// depends only on (begin, end, workers), never on scheduling.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, unsigned workers, Fn&& fn) {
    if (end <= begin) return;
    const std::size_t n = end - begin;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    const std::size_t n_chunks = std::min<std::size_t>(workers, n);
    const std::size_t chunk = (n + n_chunks - 1) / n_chunks;
    std::vector<std::thread> threads;
    threads.reserve(n_chunks);
    for (std::size_t i = 0; i < n_chunks; ++i) {
        const std::size_t lo = begin + i * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&fn, lo, hi] {
            for (std::size_t j = lo; j < hi; ++j) fn(j);
        });
    }
    for (auto& t : threads) t.join();
}

// ---------------------------------------------------------------------------
// Output lock file. Guards against two ingest runs writing the same output.
// ---------------------------------------------------------------------------

class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& target)
        : lock_path_(target.string() + ".lock") {
        const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw std::runtime_error("output is locked by another run: " + lock_path_.string() +
                                     " (remove the stale .lock file if no run is active)");
        }
        ::close(fd);
    }

    ~OutputLock() {
        std::error_code ec;
        std::filesystem::remove(lock_path_, ec);
    }

    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path lock_path_;
};

}  // namespace gridcast
